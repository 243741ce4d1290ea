//! Day-ahead home energy scheduling.
//!
//! A [`scenario::Scenario`] describes one household day: tariffs, fixed and
//! deferrable loads, PV, and optional stationary battery and EV. The
//! [`formulation`] module compiles it into a [`milp::MilpModel`], which the
//! embedded solver in [`milp`] solves to optimality; [`validation`] re-checks
//! the resulting schedule from first principles.

pub mod formulation;
pub mod milp;
pub mod scenario;
pub mod validation;
