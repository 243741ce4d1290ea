//! Plain-text dump of a model in CPLEX LP layout, for cross-checking with
//! external solvers.
//!
//! Layout: a `\` comment header, `Minimize` with a single `obj:` row,
//! `Subject To` with one `tag: terms sense rhs` line per constraint, `Bounds`
//! with one `lower <= name <= upper` line per variable (`+inf` for an open
//! upper bound), `Binaries` listing the binary variables, then `End`. Names
//! are sanitized to `[A-Za-z0-9_]`; constraint names get a `_r<index>` suffix
//! so they stay unique.

use std::fmt::Write;

use super::{MilpModel, Sense, VarKind};

pub fn sanitize(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    while out.ends_with('_') {
        out.pop();
    }
    if out.is_empty() || out.starts_with(|c: char| c.is_ascii_digit()) {
        out.insert(0, 'v');
    }
    out
}

fn write_terms(out: &mut String, terms: impl Iterator<Item = (String, f64)>) {
    let mut first = true;
    for (name, coef) in terms {
        if coef == 0.0 {
            continue;
        }
        let sign = if coef < 0.0 { "-" } else if first { "" } else { "+" };
        if first {
            write!(out, " {sign}{} {name}", coef.abs()).unwrap();
        } else {
            write!(out, " {sign} {} {name}", coef.abs()).unwrap();
        }
        first = false;
    }
    if first {
        out.push_str(" 0");
    }
}

pub fn to_lp_string(model: &MilpModel) -> String {
    let names: Vec<String> = model
        .variables()
        .iter()
        .map(|v| format!("{}_{}", sanitize(&v.name), v.id.0))
        .collect();
    let mut out = String::new();
    out.push_str("\\ hems model dump v1\n");
    writeln!(
        out,
        "\\ {} variables, {} constraints, {} binaries",
        model.num_variables(),
        model.num_constraints(),
        model.num_binaries()
    )
    .unwrap();
    out.push_str("Minimize\n obj:");
    write_terms(
        &mut out,
        model
            .objective()
            .iter()
            .enumerate()
            .map(|(j, &c)| (names[j].clone(), c)),
    );
    out.push_str("\nSubject To\n");
    for (i, row) in model.constraints().iter().enumerate() {
        write!(out, " {}_r{i}:", sanitize(&row.tag)).unwrap();
        write_terms(
            &mut out,
            row.terms.iter().map(|&(v, a)| (names[v.0].clone(), a)),
        );
        let sense = match row.sense {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        };
        writeln!(out, " {sense} {}", row.rhs).unwrap();
    }
    out.push_str("Bounds\n");
    for (v, name) in model.variables().iter().zip(&names) {
        if v.upper.is_infinite() {
            writeln!(out, " {} <= {name} <= +inf", v.lower).unwrap();
        } else {
            writeln!(out, " {} <= {name} <= {}", v.lower, v.upper).unwrap();
        }
    }
    out.push_str("Binaries\n");
    for (v, name) in model.variables().iter().zip(&names) {
        if v.kind == VarKind::Binary {
            writeln!(out, " {name}").unwrap();
        }
    }
    out.push_str("End\n");
    out
}
