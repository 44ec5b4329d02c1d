//! CSV serialization of results. Column orders are fixed and documented in
//! `docs/formats.md`. Floats use the shortest representation that parses
//! back to the identical `f64`, so files are reproducible bit for bit.

use std::fmt::Write;

use crate::approx::ApproxResult;
use crate::lk::LkVector;
use crate::mc::{ComparisonRow, McEstimate};
use crate::pickands::PickandsEstimate;

/// Round-trip exact rendering of a float.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "null".to_string(), fmt_f64)
}

/// `j,L_j`
pub fn lk_csv(lk: &LkVector) -> String {
    let mut out = String::from("j,L_j\n");
    for (j, l) in lk.values().iter().enumerate() {
        writeln!(out, "{j},{}", fmt_f64(*l)).unwrap();
    }
    out
}

/// `method,u,total,term_0,…,term_k,H_value,H_provenance`, with as many term
/// columns as the longest result; missing cells are empty.
pub fn approx_csv(results: &[ApproxResult]) -> String {
    let width = results.iter().map(|r| r.terms.len()).max().unwrap_or(1);
    let mut out = String::from("method,u,total");
    for j in 0..width {
        write!(out, ",term_{j}").unwrap();
    }
    out.push_str(",H_value,H_provenance\n");
    for r in results {
        write!(out, "{},{},{}", r.method, fmt_f64(r.u), fmt_f64(r.total)).unwrap();
        for j in 0..width {
            out.push(',');
            if let Some(t) = r.terms.get(j) {
                out.push_str(&fmt_f64(*t));
            }
        }
        match &r.h {
            Some(h) => writeln!(out, ",{},{}", fmt_f64(h.value), h.provenance).unwrap(),
            None => out.push_str(",,\n"),
        }
    }
    out
}

/// `alpha,N,K,spacing,reps,seed,estimate,stderr`
pub fn pickands_csv(estimates: &[PickandsEstimate]) -> String {
    let mut out = String::from("alpha,N,K,spacing,reps,seed,estimate,stderr\n");
    for e in estimates {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt_f64(e.alpha),
            e.dim,
            fmt_f64(e.k),
            fmt_f64(e.spacing),
            e.reps,
            e.seed,
            fmt_f64(e.estimate),
            fmt_f64(e.stderr)
        )
        .unwrap();
    }
    out
}

/// `u,p_hat,ci_low,ci_high,hits,reps,grid_size,resolution,seed`
pub fn mc_csv(estimates: &[McEstimate]) -> String {
    let mut out = String::from("u,p_hat,ci_low,ci_high,hits,reps,grid_size,resolution,seed\n");
    for e in estimates {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            fmt_f64(e.u),
            fmt_f64(e.p_hat),
            fmt_f64(e.ci_low),
            fmt_f64(e.ci_high),
            e.hits,
            e.reps,
            e.grid_size,
            e.resolution,
            e.seed
        )
        .unwrap();
    }
    out
}

/// `u,analytic_total,p_hat,ci_low,ci_high,ratio,within_ci,resolution,reps,seed,p_hat_coarse`
pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from(
        "u,analytic_total,p_hat,ci_low,ci_high,ratio,within_ci,resolution,reps,seed,p_hat_coarse\n",
    );
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(r.u),
            fmt_f64(r.analytic_total),
            fmt_f64(r.p_hat),
            fmt_f64(r.ci_low),
            fmt_f64(r.ci_high),
            opt(r.ratio),
            r.within_ci,
            r.resolution,
            r.reps,
            r.seed,
            opt(r.p_hat_coarse)
        )
        .unwrap();
    }
    out
}
