//! Validation tables: truth solves against online certificates.

use std::io::Write;

use rayon::prelude::*;
use romkit_core::certify::{certificate, effectivity_report, EffectivityChecks};
use romkit_core::truth::{solve_fom, GeneralizedEigenOracle};
use romkit_core::{AffineProblem, EffectivityReport, ParameterPoint, ReducedBasis, ReducedModel, ResidualData};
use serde::Serialize;

use crate::WorkbenchError;

/// Written in place of effectivities whose true error is too small to
/// divide by, and of `η_s,rel` when `s_rb ≤ 0`.
pub const INDETERMINATE: &str = "indeterminate";

/// Columns after the `mu_i` block, in order.
pub const COLUMNS: [&str; 26] = [
    "s_delta",
    "s_rb",
    "err_mu",
    "err_v",
    "eta_en",
    "eta_s",
    "eta_s_rel",
    "eta_v",
    "eta_v_rel",
    "eff_en",
    "eff_s",
    "eff_s_rel",
    "eff_v",
    "eff_v_rel",
    "alpha_lb",
    "alpha_delta",
    "gamma_delta",
    "gamma_ub",
    "rigorous",
    "eta_v_rel_valid",
    "out_of_domain",
    "cancellation",
    "below_floor",
    "rigor_ok",
    "ceilings_ok",
    "s_monotone",
];

pub fn header(p: usize) -> Vec<String> {
    (0..p)
        .map(|i| format!("mu_{i}"))
        .chain(COLUMNS.iter().map(|c| c.to_string()))
        .collect()
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| INDETERMINATE.to_string(), num)
}

fn flag(b: bool) -> String {
    (if b { "1" } else { "0" }).to_string()
}

/// `s_δ ≥ s_rb − 1e-12`
pub fn output_monotone(r: &EffectivityReport) -> bool {
    r.s_delta >= r.certificate.s_rb - 1e-12
}

pub fn row(r: &EffectivityReport) -> Vec<String> {
    let c = &r.certificate;
    let checks = r.checks();
    let mut out: Vec<String> = c.mu.values().iter().map(|&v| num(v)).collect();
    out.extend([
        num(r.s_delta),
        num(c.s_rb),
        num(r.err_mu),
        num(r.err_v),
        num(c.eta_en),
        num(c.eta_s),
        opt(c.eta_s_rel),
        num(c.eta_v),
        num(c.eta_v_rel),
        opt(r.eff_en),
        opt(r.eff_s),
        opt(r.eff_s_rel),
        opt(r.eff_v),
        opt(r.eff_v_rel),
        num(c.alpha_lb),
        num(r.alpha_delta),
        num(r.gamma_delta),
        num(c.gamma_ub),
        flag(c.rigorous),
        flag(c.eta_v_rel_valid),
        flag(c.out_of_domain),
        flag(c.dual_norm.cancellation),
        flag(c.dual_norm.below_floor),
        flag(checks.rigor()),
        flag(checks.ceilings()),
        flag(output_monotone(r)),
    ]);
    out
}

pub fn write_table<W: Write>(out: W, p: usize, reports: &[EffectivityReport]) -> Result<(), WorkbenchError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(p))?;
    for r in reports {
        w.write_record(row(r))?;
    }
    w.flush().map_err(|e| WorkbenchError::Csv(e.into()))?;
    Ok(())
}

/// Truth solve, certificate and effectivities at every parameter, in
/// parallel; results come back in input order.
pub fn validate(
    problem: &AffineProblem,
    basis: &ReducedBasis,
    model: &ReducedModel,
    residual: &ResidualData,
    params: &[ParameterPoint],
) -> Result<Vec<EffectivityReport>, WorkbenchError> {
    let oracle = GeneralizedEigenOracle::new(problem)?;
    params
        .par_iter()
        .map(|mu| {
            let cert = certificate(model, residual, mu)?;
            let truth = solve_fom(problem, mu)?;
            Ok(effectivity_report(problem, basis, cert, &truth, &oracle)?)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stats {
    pub min: f64,
    pub median: f64,
    pub max: f64,
    pub count: usize,
}

pub fn stats(values: impl IntoIterator<Item = f64>) -> Option<Stats> {
    let mut v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    let median = if k % 2 == 1 { v[k / 2] } else { 0.5 * (v[k / 2 - 1] + v[k / 2]) };
    Some(Stats {
        min: v[0],
        median,
        max: v[k - 1],
        count: k,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationSummary {
    pub samples: usize,
    pub rigor_failures: usize,
    pub ceiling_failures: usize,
    /// Rows with some determinate effectivity below one.
    pub effectivity_below_one: usize,
    pub monotonicity_failures: usize,
    pub indeterminate: usize,
    pub eff_en: Option<Stats>,
    pub eff_s: Option<Stats>,
    pub passed: bool,
}

pub fn summarize(reports: &[EffectivityReport]) -> ValidationSummary {
    let checks: Vec<EffectivityChecks> = reports.iter().map(EffectivityReport::checks).collect();
    let rigor_failures = checks.iter().filter(|c| !c.rigor()).count();
    let ceiling_failures = checks.iter().filter(|c| !c.ceilings()).count();
    // the relative V bound is only claimed when η_V,rel ≤ 1
    let effectivity_below_one = reports
        .iter()
        .filter(|r| {
            let e = r.effectivities();
            let claimed = [true, true, true, true, r.certificate.eta_v_rel_valid];
            e.iter().zip(claimed).any(|(v, c)| c && v.is_some_and(|x| x < 1.0 - 1e-8))
        })
        .count();
    let monotonicity_failures = reports.iter().filter(|r| !output_monotone(r)).count();
    let indeterminate = reports.iter().filter(|r| r.effectivities().iter().any(Option::is_none)).count();
    ValidationSummary {
        samples: reports.len(),
        rigor_failures,
        ceiling_failures,
        effectivity_below_one,
        monotonicity_failures,
        indeterminate,
        eff_en: stats(reports.iter().filter_map(|r| r.eff_en)),
        eff_s: stats(reports.iter().filter_map(|r| r.eff_s)),
        passed: rigor_failures == 0 && ceiling_failures == 0 && effectivity_below_one == 0 && monotonicity_failures == 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let h = header(2);
        assert_eq!(h.len(), 2 + COLUMNS.len());
        assert_eq!(&h[..3], &["mu_0", "mu_1", "s_delta"]);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(stats([3.0, 1.0, 2.0]).unwrap().median, 2.0);
        assert_eq!(stats([4.0, 1.0, 2.0, 3.0]).unwrap().median, 2.5);
        assert_eq!(stats(std::iter::empty()), None);
    }
}
