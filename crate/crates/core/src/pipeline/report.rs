//! Plain-text equilibrium table.

use std::fmt::Write;

use super::config::ModelParams;
use crate::dynsys::{classified_equilibria, stability_report, Equilibrium};
use crate::error::Result;

fn fmt_num(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

fn fmt_location(e: &Equilibrium) -> String {
    match &e.location {
        Some(l) => format!(
            "({})",
            l.iter().map(|&v| fmt_num(v)).collect::<Vec<_>>().join(", ")
        ),
        None => "degenerate".into(),
    }
}

fn fmt_eigs(e: &Equilibrium) -> String {
    e.eigenvalues
        .iter()
        .map(|z| {
            if z.im == 0.0 {
                fmt_num(z.re)
            } else {
                format!(
                    "{}{}{}i",
                    fmt_num(z.re),
                    if z.im < 0.0 { "-" } else { "+" },
                    fmt_num(z.im.abs())
                )
            }
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// Equilibria with location, feasibility, the closed-form stability verdict
/// (competition model only), the eigenvalue classification and the
/// eigenvalues themselves.
pub fn report_equilibria(params: &ModelParams) -> Result<String> {
    let model = params.build()?;
    let eqs = classified_equilibria(&model);
    let table = match params {
        ModelParams::Competition(k) => Some(stability_report(k)),
        ModelParams::Hilker(_) => None,
    };
    let rows: Vec<[String; 6]> = eqs
        .iter()
        .map(|e| {
            let verdict = table
                .as_ref()
                .and_then(|t| t.verdict(e.id))
                .map_or("-".to_string(), |s| {
                    if s { "stable" } else { "unstable" }.into()
                });
            let numeric = e.stability.map_or("-".to_string(), |s| s.to_string());
            [
                e.id.to_string(),
                fmt_location(e),
                if e.feasible { "yes" } else { "no" }.into(),
                verdict,
                numeric,
                fmt_eigs(e),
            ]
        })
        .collect();
    let header = [
        "id",
        "location",
        "feasible",
        "table",
        "numeric",
        "eigenvalues",
    ];
    let mut widths = header.map(str::len);
    for r in &rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[&str]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        writeln!(out, "{}", parts.join("  ").trim_end()).unwrap();
    };
    writeln!(out, "model: {}", model_name(params)).unwrap();
    line(&mut out, &header);
    for r in &rows {
        line(&mut out, &r.iter().map(String::as_str).collect::<Vec<_>>());
    }
    let stable: Vec<String> = eqs
        .iter()
        .filter(|e| e.is_attractor())
        .map(|e| e.id.to_string())
        .collect();
    writeln!(out, "stable: {}", stable.join(", ")).unwrap();
    Ok(out)
}

fn model_name(params: &ModelParams) -> &'static str {
    match params {
        ModelParams::Hilker(_) => "hilker",
        ModelParams::Competition(_) => "competition",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::config::{Preset, RunConfig};

    fn stable_line(p: Preset) -> String {
        let text = report_equilibria(&RunConfig::preset(p).params).unwrap();
        text.lines().last().unwrap().to_string()
    }

    #[test]
    fn stable_sets() {
        assert_eq!(stable_line(Preset::Competition2Eq), "stable: E3, E4");
        assert_eq!(stable_line(Preset::Competition3Eq), "stable: E1, E2, E3");
        assert_eq!(stable_line(Preset::HilkerRef), "stable: E0, E4");
    }

    #[test]
    fn coexistence_row_is_saddle() {
        let text = report_equilibria(&RunConfig::preset(Preset::Competition3Eq).params).unwrap();
        let row = text.lines().find(|l| l.starts_with("E7")).unwrap();
        assert!(row.contains("saddle"), "{row}");
    }
}
