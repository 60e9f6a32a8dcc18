//! CPLEX-style LP text export.

use std::fmt::Write;

use super::{MilpModel, Sense, VarKind};

const LINE_WIDTH: usize = 96;

fn number(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x}")
    }
}

/// Appends `terms` as a linear expression, wrapping long rows onto
/// continuation lines.
fn write_expr(out: &mut String, prefix: &str, terms: impl Iterator<Item = (f64, String)>) {
    let mut line = String::from(prefix);
    let mut first = true;
    for (coef, name) in terms {
        let mag = coef.abs();
        let body = if mag == 1.0 { name } else { format!("{} {name}", number(mag)) };
        let piece = match (first, coef < 0.0) {
            (true, false) => format!(" {body}"),
            (true, true) => format!(" - {body}"),
            (false, false) => format!(" + {body}"),
            (false, true) => format!(" - {body}"),
        };
        if line.len() + piece.len() > LINE_WIDTH && !first {
            out.push_str(&line);
            out.push('\n');
            line = String::from("  ");
        }
        line.push_str(&piece);
        first = false;
    }
    out.push_str(&line);
}

/// Renders `model` as an LP file: objective, rows, bounds, then binaries.
///
/// Output depends only on the model, so identical models produce identical
/// text.
pub fn export_lp(model: &MilpModel) -> String {
    let mut out = String::new();
    let stats = model.stats();
    let _ = writeln!(
        out,
        "\\ {} continuous, {} binary, {} rows",
        stats.num_continuous, stats.num_binary, stats.num_constraints
    );
    out.push_str("Minimize\n");
    write_expr(
        &mut out,
        " obj:",
        model.vars().iter().filter(|v| v.cost != 0.0).map(|v| (v.cost, v.name.clone())),
    );
    out.push('\n');
    out.push_str("Subject To\n");
    for c in model.constraints() {
        let prefix = format!(" {}:", c.name);
        if c.terms.is_empty() {
            // LP syntax has no empty rows; pin it to a zero multiple of a
            // variable when one exists.
            match model.vars().first() {
                Some(v) => write_expr(&mut out, &prefix, std::iter::once((0.0, v.name.clone()))),
                None => out.push_str(&prefix),
            }
        } else {
            write_expr(
                &mut out,
                &prefix,
                c.terms.iter().map(|&(v, coef)| (coef, model.var(v).name.clone())),
            );
        }
        let op = match c.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", number(c.rhs));
    }
    out.push_str("Bounds\n");
    for v in model.vars() {
        let line = match (v.lower.is_finite(), v.upper.is_finite()) {
            (false, false) => format!(" {} free", v.name),
            (true, true) if v.lower == v.upper => format!(" {} = {}", v.name, number(v.lower)),
            (true, true) => format!(" {} <= {} <= {}", number(v.lower), v.name, number(v.upper)),
            (true, false) => format!(" {} >= {}", v.name, number(v.lower)),
            (false, true) => format!(" -inf <= {} <= {}", v.name, number(v.upper)),
        };
        out.push_str(&line);
        out.push('\n');
    }
    let binaries: Vec<&str> = model
        .vars()
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.name.as_str())
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binary\n");
        for name in binaries {
            let _ = writeln!(out, " {name}");
        }
    }
    out.push_str("End\n");
    out
}
