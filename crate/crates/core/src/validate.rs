//! Monte Carlo and golden-number harness: empirical violation estimation
//! with exact binomial intervals, count-distribution checks against the
//! selection-probability bounds, reproduction of the reference design
//! tables, and confidence-curve data emission.

use crate::bounds::{
    levelq_confidence, psi_campi, selection_prob_bounds, BoundCurve, ProbInterval, SupportBounds,
};
use crate::design::{design, multi_design, BoundMode, DesignSpec, TrialDesign};
use crate::engine::run_trial;
use crate::error::{Error, Result};
use crate::rng;
use crate::scenario::{ScenarioProblem, Solution};
use crate::specfun::{binom_cdf, binom_cdf_inv_eps};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;

/// Empirical probability with an exact (Clopper-Pearson) binomial interval.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EmpiricalEstimate {
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_draws: u64,
    pub confidence: f64,
}

/// Exact two-sided binomial confidence interval for `successes` out of `n`.
pub fn clopper_pearson(successes: u64, n: u64, confidence: f64) -> Result<(f64, f64)> {
    if n == 0 || successes > n {
        return Err(Error::domain(format!(
            "clopper_pearson requires 0 <= successes <= n, n >= 1; got {successes}/{n}"
        )));
    }
    if !(0.0 < confidence && confidence < 1.0) {
        return Err(Error::domain(format!(
            "confidence must lie in (0,1), got {confidence}"
        )));
    }
    let alpha = 1.0 - confidence;
    // Lower endpoint: largest p with P{X >= successes | p} <= alpha/2,
    // i.e. Phi(successes-1; n, p) = 1 - alpha/2 (Phi decreasing in p).
    let lower = if successes == 0 {
        0.0
    } else {
        bisect_p(n, |p| {
            Ok(binom_cdf(successes as i64 - 1, n, p)? >= 1.0 - alpha / 2.0)
        })?
    };
    // Upper endpoint: smallest p with Phi(successes; n, p) = alpha/2.
    let upper = if successes == n {
        1.0
    } else {
        bisect_p(n, |p| Ok(binom_cdf(successes as i64, n, p)? >= alpha / 2.0))?
    };
    Ok((lower, upper))
}

/// Largest p in [0,1] for which `pred(p)` holds; pred must be monotone
/// (true below a threshold, false above).
fn bisect_p(_n: u64, mut pred: impl FnMut(f64) -> Result<bool>) -> Result<f64> {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if pred(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Estimate the violation probability of a solution for constraint `j` by
/// fresh sampling, with an exact interval at confidence 0.99.
pub fn empirical_violation(
    problem: &dyn ScenarioProblem,
    j: usize,
    solution: &Solution,
    n_draws: u64,
    seed: u64,
) -> Result<EmpiricalEstimate> {
    empirical_violation_with_confidence(problem, j, solution, n_draws, seed, 0.99)
}

pub fn empirical_violation_with_confidence(
    problem: &dyn ScenarioProblem,
    j: usize,
    solution: &Solution,
    n_draws: u64,
    seed: u64,
    confidence: f64,
) -> Result<EmpiricalEstimate> {
    if n_draws == 0 {
        return Err(Error::domain("empirical_violation requires n_draws >= 1"));
    }
    // Chunked so the violation count is reproducible yet parallel.
    const CHUNK: u64 = 1 << 16;
    let n_chunks = n_draws.div_ceil(CHUNK);
    let violated: u64 = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut r = rng::substream(seed, c, j as u64);
            let lo = c * CHUNK;
            let hi = n_draws.min(lo + CHUNK);
            let mut buf = Vec::new();
            (lo..hi)
                .filter(|_| {
                    problem.draw_into(j, &mut r, &mut buf);
                    problem.violated(j, solution, &buf)
                })
                .count() as u64
        })
        .sum();
    let (ci_low, ci_high) = clopper_pearson(violated, n_draws, confidence)?;
    Ok(EmpiricalEstimate {
        point: violated as f64 / n_draws as f64,
        ci_low,
        ci_high,
        n_draws,
        confidence,
    })
}

/// One named pass/fail outcome with a human-readable residual summary.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckResult {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        CheckResult {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

/// JSON-serializable roll-up of validation checks.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationSummary {
    pub checks: Vec<CheckResult>,
}

impl ValidationSummary {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// One row of the centered-count distribution table: the empirical CDF of
/// |theta - band midpoint| at threshold `dq`, with the summed
/// selection-probability bracket.
#[derive(Debug, Clone, Serialize)]
pub struct QhatCdfRow {
    pub dq: u64,
    pub empirical: f64,
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

/// Empirical CDF of the centered unviolated-constraint count over `n_runs`
/// independent trials, tabulated against the summed selection-probability
/// bounds. Each row passes when the empirical value lies within the
/// bracket up to 4-sigma Monte Carlo slack.
pub fn qhat_cdf_check(
    problem: &dyn ScenarioProblem,
    spec: &DesignSpec,
    trial_design: &TrialDesign,
    n_runs: u64,
    seed: u64,
) -> Result<Vec<QhatCdfRow>> {
    if n_runs < 100 {
        return Err(Error::domain("qhat_cdf_check requires n_runs >= 100"));
    }
    let m = spec.m;
    let r = trial_design.r_star;
    let center = 0.5 * (trial_design.q_low + trial_design.q_high) as f64;

    let thetas: Vec<u64> = (0..n_runs as usize)
        .into_par_iter()
        .map(|i| run_trial(problem, &[r], m, seed, i).map(|t| t.theta[0]))
        .collect::<Result<Vec<_>>>()?;

    let max_dq = thetas
        .iter()
        .map(|&t| (t as f64 - center).abs().ceil() as u64)
        .max()
        .unwrap_or(0);

    let mut rows = Vec::new();
    let mut cum_lower = vec![0.0f64; (max_dq + 1) as usize];
    let mut cum_upper = vec![0.0f64; (max_dq + 1) as usize];
    // Accumulate the per-q bracket into CDF form: q contributes to every
    // threshold dq >= |q - center|, realized as increments at the first
    // contributing threshold followed by a prefix sum.
    for q in r..=m {
        let d = (q as f64 - center).abs();
        if d > max_dq as f64 {
            continue;
        }
        let iv = selection_prob_bounds(r, q, m, spec.support)?;
        let start = d.ceil() as usize;
        cum_lower[start] += iv.lower;
        cum_upper[start] += iv.upper;
    }
    for slot in 1..cum_lower.len() {
        cum_lower[slot] += cum_lower[slot - 1];
        cum_upper[slot] += cum_upper[slot - 1];
    }

    let n = n_runs as f64;
    for dq in 0..=max_dq {
        let hits = thetas
            .iter()
            .filter(|&&t| (t as f64 - center).abs() <= dq as f64)
            .count();
        let empirical = hits as f64 / n;
        let lower = cum_lower[dq as usize].min(1.0);
        let upper = cum_upper[dq as usize].min(1.0);
        // The 5/n floor covers the Poisson regime in the extreme tails,
        // where the normal 4-sigma band collapses below one count.
        let slack_l = 4.0 * (lower * (1.0 - lower) / n).sqrt() + 5.0 / n;
        let slack_u = 4.0 * (upper * (1.0 - upper) / n).sqrt() + 5.0 / n;
        let pass = empirical >= lower - slack_l - 1e-12 && empirical <= upper + slack_u + 1e-12;
        rows.push(QhatCdfRow {
            dq,
            empirical,
            lower,
            upper,
            pass,
        });
    }
    Ok(rows)
}

pub fn qhat_cdf_csv(rows: &[QhatCdfRow]) -> String {
    let mut out = String::from("dq,empirical,lower,upper,status\n");
    for r in rows {
        let status = if r.pass { "PASS" } else { "FAIL" };
        let _ = writeln!(
            out,
            "{},{},{},{},{status}",
            r.dq, r.empirical, r.lower, r.upper
        );
    }
    out
}

/// A reproduced reference table: CSV text plus the aggregate verdict.
#[derive(Debug, Clone, Serialize)]
pub struct TableReport {
    pub csv: String,
    pub all_pass: bool,
}

/// Reference design sweep: r_star and the trial count across support-bound
/// pairs and prior probabilities at m = 1e5, band (0.19, 0.21].
///
/// Golden values are recomputed exactly from the defining conditions;
/// published figures for the same settings differ by one or two trials in
/// a few cells where the trial-count ceiling sits near an integer.
pub fn reproduce_table1() -> Result<TableReport> {
    struct Row {
        zeta: (u64, u64),
        r_star: u64,
        n_trials: [u64; 4],
    }
    let golden = [
        Row { zeta: (2, 5), r_star: 15, n_trials: [84, 110, 176, 291] },
        Row { zeta: (7, 10), r_star: 40, n_trials: [37, 48, 77, 128] },
        Row { zeta: (17, 20), r_star: 91, n_trials: [22, 29, 46, 76] },
        Row { zeta: (47, 50), r_star: 241, n_trials: [13, 16, 26, 43] },
        Row { zeta: (97, 100), r_star: 492, n_trials: [8, 11, 18, 29] },
        Row { zeta: (1, 2), r_star: 5, n_trials: [96, 125, 200, 331] },
        Row { zeta: (1, 5), r_star: 12, n_trials: [189, 247, 396, 656] },
        Row { zeta: (1, 10), r_star: 22, n_trials: [1023, 1330, 2117, 3468] },
    ];
    let priors = [0.9, 0.95, 0.99, 0.999];

    let mut csv = String::from(
        "zeta_low,zeta_high,p_prior,r_star,n_trials,golden_r_star,golden_n_trials,status\n",
    );
    let mut all_pass = true;
    let cells: Vec<(usize, usize)> = (0..golden.len())
        .flat_map(|g| (0..priors.len()).map(move |p| (g, p)))
        .collect();
    let designs: Vec<Result<TrialDesign>> = cells
        .par_iter()
        .map(|&(g, p)| {
            let p_prior = priors[p];
            let spec = DesignSpec {
                eps_low: 0.19,
                eps_high: 0.21,
                p_prior,
                p_post: 0.5 * (1.0 + p_prior),
                m: 100_000,
                support: SupportBounds::new(golden[g].zeta.0, golden[g].zeta.1)?,
                r_max: None,
                bound_mode: BoundMode::Guaranteed,
            };
            design(&spec)
        })
        .collect();
    for (&(g, p), d) in cells.iter().zip(designs) {
        let d = d?;
        let row = &golden[g];
        let ok = d.r_star == row.r_star && d.n_trials == row.n_trials[p];
        all_pass &= ok;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            row.zeta.0,
            row.zeta.1,
            priors[p],
            d.r_star,
            d.n_trials,
            row.r_star,
            row.n_trials[p],
            if ok { "PASS" } else { "FAIL" }
        );
    }
    Ok(TableReport { csv, all_pass })
}

/// Spec for the reference tight-band case: m = 65000, band (0, 0.005],
/// near-certain posterior probability, r capped at 1000.
pub fn reference_case_a() -> DesignSpec {
    DesignSpec {
        eps_low: 0.0,
        eps_high: 0.005,
        p_prior: 0.9,
        p_post: 1.0 - 1e-9,
        m: 65_000,
        support: SupportBounds::new(1, 3).expect("static bounds"),
        r_max: Some(1000),
        bound_mode: BoundMode::Guaranteed,
    }
}

/// Spec for the reference wide-band case: m = 65000, band (0.18, 0.22).
pub fn reference_case_b() -> DesignSpec {
    DesignSpec {
        eps_low: 0.18,
        eps_high: 0.22,
        p_prior: 0.9,
        p_post: 0.995,
        m: 65_000,
        support: SupportBounds::new(1, 3).expect("static bounds"),
        r_max: None,
        bound_mode: BoundMode::Guaranteed,
    }
}

/// Reference design cases (a), (b) and the joint two-constraint case (c).
///
/// Golden values are recomputed exactly from the defining conditions; the
/// published band edges for these settings differ by a few counts at
/// threshold-grazing edges, which also shifts the case-(a) trial
/// probability and the joint trial count.
pub fn reproduce_table2() -> Result<TableReport> {
    let mut csv = String::from("case,r_star,q_low,q_high,n_trials,p_trial,status\n");
    let mut all_pass = true;

    let a = design(&reference_case_a())?;
    let ok_a = a.r_star == 1000
        && (a.q_low, a.q_high) == (64_782, 65_000)
        && a.n_trials == 5
        && (a.p_trial - 0.3831463897973377).abs() < 1e-6;
    all_pass &= ok_a;
    let _ = writeln!(
        csv,
        "a,{},{},{},{},{:.6},{}",
        a.r_star,
        a.q_low,
        a.q_high,
        a.n_trials,
        a.p_trial,
        if ok_a { "PASS" } else { "FAIL" }
    );

    let b = design(&reference_case_b())?;
    let ok_b = b.r_star == 8
        && (b.q_low, b.q_high) == (50_999, 53_024)
        && b.n_trials == 44
        && (b.p_trial - 0.05250779533279494).abs() < 1e-6;
    all_pass &= ok_b;
    let _ = writeln!(
        csv,
        "b,{},{},{},{},{:.6},{}",
        b.r_star,
        b.q_low,
        b.q_high,
        b.n_trials,
        b.p_trial,
        if ok_b { "PASS" } else { "FAIL" }
    );

    let joint = multi_design(&[reference_case_a(), reference_case_b()])?;
    let ok_c = joint.n_trials == 116 && (joint.p_trial_joint - 0.020118172217977882).abs() < 1e-6;
    all_pass &= ok_c;
    let _ = writeln!(
        csv,
        "c,,,,{},{:.6},{}",
        joint.n_trials,
        joint.p_trial_joint,
        if ok_c { "PASS" } else { "FAIL" }
    );

    Ok(TableReport { csv, all_pass })
}

/// The three confidence curves at fixed (m, q): the upper bound
/// Phi(q - zeta_low; m, 1-eps), the lower bound Phi(q - zeta_high; m, 1-eps),
/// and the comparison bound Psi for optimal-discarding strategies.
pub fn confidence_curves(
    m: u64,
    q: u64,
    support: SupportBounds,
    eps_grid: &[f64],
) -> Result<String> {
    let upper = BoundCurve::tabulate(eps_grid, |e| levelq_confidence(q, m, support.zeta_low, e))?;
    let lower = BoundCurve::tabulate(eps_grid, |e| levelq_confidence(q, m, support.zeta_high, e))?;
    let psi = BoundCurve::tabulate(eps_grid, |e| psi_campi(q, support.zeta_high, m, e))?;
    let mut out = String::from("eps,phi_zeta_low,phi_zeta_high,psi\n");
    for ((a, b), c) in upper.points.iter().zip(&lower.points).zip(&psi.points) {
        let _ = writeln!(out, "{},{},{},{}", a.0, a.1, b.1, c.1);
    }
    Ok(out)
}

/// Violation-probability levels at the 5% and 95% confidence crossings for
/// one sample size: eps5 from the upper-bound curve, eps95 from the
/// lower-bound curve, and eps95_cmp from the comparison bound Psi.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConfidenceCrossing {
    pub m: u64,
    pub q: u64,
    pub eps5: f64,
    pub eps95: f64,
    pub eps95_cmp: f64,
}

/// Solves Psi(q, zeta_high; m, eps) = target for eps by bisection.
pub fn psi_inv_eps(q: u64, zeta_high: u64, m: u64, target: f64) -> Result<f64> {
    if !(0.0 < target && target < 1.0) {
        return Err(Error::domain(format!(
            "psi_inv_eps requires target in (0,1), got {target}"
        )));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if psi_campi(q, zeta_high, m, mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Sweep of the confidence crossings over sample sizes with q = ceil(0.75 m).
pub fn confidence_crossings(ms: &[u64], support: SupportBounds) -> Result<Vec<ConfidenceCrossing>> {
    ms.iter()
        .map(|&m| {
            let q = (0.75 * m as f64).ceil() as u64;
            let eps5 = binom_cdf_inv_eps(q as i64 - support.zeta_low as i64, m, 0.05)?;
            let eps95 = binom_cdf_inv_eps(q as i64 - support.zeta_high as i64, m, 0.95)?;
            let eps95_cmp = psi_inv_eps(q, support.zeta_high, m, 0.95)?;
            Ok(ConfidenceCrossing {
                m,
                q,
                eps5,
                eps95,
                eps95_cmp,
            })
        })
        .collect()
}

pub fn confidence_crossings_csv(rows: &[ConfidenceCrossing]) -> String {
    let mut out = String::from("m,q,eps5,eps95,eps95_cmp,range_ratio\n");
    for r in rows {
        let ratio = (r.eps95_cmp - r.eps5) / (r.eps95 - r.eps5);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.m, r.q, r.eps5, r.eps95, r.eps95_cmp, ratio
        );
    }
    out
}

/// Critical value of the two-sided Kolmogorov-Smirnov statistic at
/// significance 0.01 for large n.
pub fn ks_critical_001(n: u64) -> f64 {
    1.6276 / (n as f64).sqrt()
}

/// Distribution check for the regularized violation probability of the
/// 1-D quantile problem: with exactly k uniform samples, the probability
/// that a fresh sample displaces one of the k retained constraints is
/// 1 - min of the sample, whose CDF is v^k. Runs a KS test per k.
pub fn regularized_violation_ks(k_max: u64, n_draws: u64, seed: u64) -> Result<Vec<CheckResult>> {
    if k_max == 0 || n_draws < 100 {
        return Err(Error::domain(
            "regularized_violation_ks requires k_max >= 1 and n_draws >= 100",
        ));
    }
    let crit = ks_critical_001(n_draws);
    (1..=k_max)
        .map(|k| {
            // Transform by the claimed CDF; KS then tests uniformity.
            let mut u: Vec<f64> = (0..n_draws)
                .into_par_iter()
                .map(|i| {
                    let mut r = rng::substream(seed, i, k);
                    let min = (0..k)
                        .map(|_| r.gen_range(0.0..1.0))
                        .fold(f64::INFINITY, f64::min);
                    (1.0 - min).powi(k as i32)
                })
                .collect();
            u.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            let n = n_draws as f64;
            let mut d = 0.0f64;
            for (i, &v) in u.iter().enumerate() {
                d = d.max(((i + 1) as f64 / n - v).abs());
                d = d.max((v - i as f64 / n).abs());
            }
            Ok(CheckResult::new(
                format!("regularized_violation_ks_k{k}"),
                d < crit,
                format!("ks={d:.5} critical={crit:.5} n={n_draws}"),
            ))
        })
        .collect()
}

/// Empirical check of the cost exceedance bound on the 1-D quantile
/// problem: the probability that the r-sample optimum exceeds the
/// (1-eps)-quantile equals 1 - (1-eps)^r; the empirical frequency must
/// match within 4-sigma.
pub fn cost_exceedance_check(r: u64, eps: f64, n_draws: u64, seed: u64) -> Result<CheckResult> {
    let bound = crate::bounds::cost_upper_prob(r, eps)?;
    let hits: u64 = (0..n_draws)
        .into_par_iter()
        .map(|i| {
            let mut g = rng::substream(seed, i, r);
            let max = (0..r)
                .map(|_| g.gen_range(0.0f64..1.0))
                .fold(f64::NEG_INFINITY, f64::max);
            u64::from(max > 1.0 - eps)
        })
        .sum();
    let emp = hits as f64 / n_draws as f64;
    let sigma = (bound * (1.0 - bound) / n_draws as f64).sqrt();
    let pass = emp <= bound + 4.0 * sigma;
    Ok(CheckResult::new(
        format!("cost_exceedance_r{r}"),
        pass,
        format!("empirical={emp:.5} bound={bound:.5} sigma={sigma:.6}"),
    ))
}

/// Empirical check of the conditional cost bound on the 1-D quantile
/// problem: given the unviolated count equals q, the probability that the
/// r-sample optimum is at or above the (1-eps)-quantile is bounded below
/// by Phi(q - zeta_high; m, 1-eps); for this fully supported problem the
/// bound holds with equality.
pub fn conditional_cost_check(
    r: u64,
    m: u64,
    eps: f64,
    n_runs: u64,
    seed: u64,
) -> Result<CheckResult> {
    let outcomes: Vec<(u64, bool)> = (0..n_runs)
        .into_par_iter()
        .map(|i| {
            let mut g = rng::substream(seed, i, 0);
            let samples: Vec<f64> = (0..m).map(|_| g.gen_range(0.0f64..1.0)).collect();
            let x = samples[..r as usize]
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            let theta = samples.iter().filter(|&&s| s <= x).count() as u64;
            (theta, x >= 1.0 - eps)
        })
        .collect();

    let mut worst: Option<(u64, f64, f64, f64)> = None;
    let mut pass = true;
    let mut qs: Vec<u64> = outcomes.iter().map(|o| o.0).collect();
    qs.sort_unstable();
    qs.dedup();
    for q in qs {
        let total = outcomes.iter().filter(|o| o.0 == q).count() as f64;
        if total < 200.0 {
            continue;
        }
        let hits = outcomes.iter().filter(|o| o.0 == q && o.1).count() as f64;
        let emp = hits / total;
        let bound = levelq_confidence(q, m, 1, eps)?;
        let sigma = (bound * (1.0 - bound) / total).sqrt().max(1.0 / total);
        if emp < bound - 4.0 * sigma {
            pass = false;
        }
        let margin = emp - bound;
        if worst.map_or(true, |w| margin < w.1 - w.2) {
            worst = Some((q, emp, bound, sigma));
        }
    }
    let detail = match worst {
        Some((q, emp, bound, sigma)) => {
            format!("tightest bin q={q}: empirical={emp:.4} bound={bound:.4} sigma={sigma:.5}")
        }
        None => "no bin reached the occupancy floor".to_string(),
    };
    Ok(CheckResult::new(
        format!("conditional_cost_r{r}_m{m}"),
        pass,
        detail,
    ))
}

/// Generate (count, violation) outcomes from independent single trials of
/// the 1-D quantile problem: solve on the first r of m uniform samples,
/// count satisfied samples, and report the closed-form violation 1 - x.
pub fn quantile_trial_outcomes(r: u64, m: u64, n_runs: u64, seed: u64) -> Vec<(u64, f64)> {
    (0..n_runs)
        .into_par_iter()
        .map(|i| {
            let mut g = rng::substream(seed, i, 1);
            let samples: Vec<f64> = (0..m).map(|_| g.gen_range(0.0f64..1.0)).collect();
            let x = samples[..r as usize]
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            let theta = samples.iter().filter(|&&s| s <= x).count() as u64;
            (theta, 1.0 - x)
        })
        .collect()
}

/// Exactness check for the fully supported case: given (count, violation)
/// outcomes, the conditional frequency of V <= eps within each count bin
/// of at least `min_bin` outcomes must match Phi(q - 1; m, 1-eps) within
/// 4-sigma at every epsilon grid point.
pub fn conditional_violation_exactness(
    outcomes: &[(u64, f64)],
    m: u64,
    eps_grid: &[f64],
    min_bin: usize,
) -> Result<Vec<CheckResult>> {
    let mut qs: Vec<u64> = outcomes.iter().map(|o| o.0).collect();
    qs.sort_unstable();
    qs.dedup();
    let mut checks = Vec::new();
    for &eps in eps_grid {
        let mut pass = true;
        let mut worst = (0u64, 0.0f64, 0.0f64, f64::INFINITY);
        for &q in &qs {
            let bin: Vec<f64> = outcomes
                .iter()
                .filter(|o| o.0 == q)
                .map(|o| o.1)
                .collect();
            if bin.len() < min_bin {
                continue;
            }
            let total = bin.len() as f64;
            let emp = bin.iter().filter(|&&v| v <= eps).count() as f64 / total;
            let exact = levelq_confidence(q, m, 1, eps)?;
            let sigma = (exact * (1.0 - exact) / total).sqrt().max(1.0 / total);
            let dev = (emp - exact).abs() / sigma;
            if dev > 4.0 {
                pass = false;
            }
            let margin = 4.0 - dev;
            if margin < worst.3 {
                worst = (q, emp, exact, margin);
            }
        }
        checks.push(CheckResult::new(
            format!("conditional_violation_eps{eps}"),
            pass,
            format!(
                "tightest bin q={}: empirical={:.4} exact={:.4} (4-sigma margin {:.2})",
                worst.0, worst.1, worst.2, worst.3
            ),
        ));
    }
    Ok(checks)
}

/// Probability-interval sanity wrapper used by callers that report
/// posterior coverage: fraction of `values` falling inside `interval`.
pub fn coverage(values: &[f64], interval: ProbInterval) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().filter(|&&v| interval.contains(v)).count() as f64 / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Quantile1d;

    #[test]
    fn clopper_pearson_matches_frozen_oracle() {
        // Frozen reference values from an independent implementation of the
        // exact interval (beta quantiles): x=5, n=50, conf=0.95.
        let (lo, hi) = clopper_pearson(5, 50, 0.95).unwrap();
        assert!((lo - 0.03327).abs() < 5e-5, "lo={lo}");
        assert!((hi - 0.21814).abs() < 5e-5, "hi={hi}");
        // x=0 and x=n endpoints are exact.
        let (lo, hi) = clopper_pearson(0, 20, 0.99).unwrap();
        assert_eq!(lo, 0.0);
        // Upper solves Phi(0; 20, p) = 0.005 -> p = 1 - 0.005^(1/20).
        assert!((hi - (1.0 - 0.005f64.powf(1.0 / 20.0))).abs() < 1e-6);
        let (_, hi) = clopper_pearson(20, 20, 0.99).unwrap();
        assert_eq!(hi, 1.0);
    }

    #[test]
    fn clopper_pearson_interval_duality() {
        // At the lower endpoint the upper tail probability equals alpha/2.
        let (lo, hi) = clopper_pearson(30, 100, 0.99).unwrap();
        let upper_tail = 1.0 - binom_cdf(29, 100, lo).unwrap();
        assert!((upper_tail - 0.005).abs() < 1e-6);
        let lower_tail = binom_cdf(30, 100, hi).unwrap();
        assert!((lower_tail - 0.005).abs() < 1e-6);
    }

    #[test]
    fn empirical_violation_closed_form() {
        // x = 1.0 on uniform(0,1): nothing violates.
        let sol = Solution {
            x: vec![1.0],
            objective: 1.0,
            support_count: Some(1),
        };
        let est = empirical_violation(&Quantile1d, 0, &sol, 10_000, 7).unwrap();
        assert_eq!(est.point, 0.0);
        assert_eq!(est.ci_low, 0.0);

        // x = 0.8: violation probability 0.2 exactly.
        let sol = Solution {
            x: vec![0.8],
            objective: 0.8,
            support_count: Some(1),
        };
        let est = empirical_violation(&Quantile1d, 0, &sol, 200_000, 7).unwrap();
        assert!((est.point - 0.2).abs() < 0.005, "point={}", est.point);
        assert!(est.ci_low <= 0.2 && 0.2 <= est.ci_high);
    }

    #[test]
    fn empirical_violation_deterministic() {
        let sol = Solution {
            x: vec![0.5],
            objective: 0.5,
            support_count: Some(1),
        };
        let a = empirical_violation(&Quantile1d, 0, &sol, 70_000, 3).unwrap();
        let b = empirical_violation(&Quantile1d, 0, &sol, 70_000, 3).unwrap();
        assert_eq!(a.point, b.point);
    }

    #[test]
    fn qhat_cdf_collapses_for_unique_support() {
        // For the 1-D quantile problem the selection bracket is a point, so
        // empirical and bounds must agree within Monte Carlo slack.
        let spec = DesignSpec {
            eps_low: 0.15,
            eps_high: 0.25,
            p_prior: 0.9,
            p_post: 0.95,
            m: 500,
            support: SupportBounds::new(1, 1).unwrap(),
            r_max: None,
            bound_mode: BoundMode::Guaranteed,
        };
        let d = design(&spec).unwrap();
        let rows = qhat_cdf_check(&Quantile1d, &spec, &d, 400, 11).unwrap();
        assert!(!rows.is_empty());
        for row in &rows {
            assert!((row.upper - row.lower).abs() < 1e-12, "bracket must collapse");
            assert!(row.pass, "dq={}: emp={} bound={}", row.dq, row.empirical, row.lower);
        }
        let last = rows.last().unwrap();
        assert!(last.empirical >= 1.0 - 1e-12);
        let csv = qhat_cdf_csv(&rows);
        assert!(csv.starts_with("dq,empirical,lower,upper,status\n"));
    }

    #[test]
    fn confidence_curves_format_and_dominance() {
        let support = SupportBounds::new(1, 10).unwrap();
        let grid = crate::bounds::linspace(0.0, 1.0, 101);
        let csv = confidence_curves(500, 375, support, &grid).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "eps,phi_zeta_low,phi_zeta_high,psi");
        for line in lines {
            let f: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
            let (phi_up, phi_lo, psi) = (f[1], f[2], f[3]);
            assert!(phi_up + 1e-12 >= phi_lo, "upper bound dominates lower");
            assert!(phi_lo + 1e-10 >= psi, "comparison bound is looser");
        }
    }

    #[test]
    fn crossing_inversions_are_consistent() {
        let support = SupportBounds::new(1, 10).unwrap();
        let rows = confidence_crossings(&[200], support).unwrap();
        let r = rows[0];
        assert_eq!(r.q, 150);
        let phi5 = levelq_confidence(r.q, r.m, 1, r.eps5).unwrap();
        assert!((phi5 - 0.05).abs() < 1e-8);
        let phi95 = levelq_confidence(r.q, r.m, 10, r.eps95).unwrap();
        assert!((phi95 - 0.95).abs() < 1e-8);
        let psi95 = psi_campi(r.q, 10, r.m, r.eps95_cmp).unwrap();
        assert!((psi95 - 0.95).abs() < 1e-8);
        // The comparison-bound crossing sits to the right of the tight one.
        assert!(r.eps95_cmp > r.eps95);
    }

    #[test]
    fn ks_check_passes_on_true_distribution() {
        for c in regularized_violation_ks(3, 20_000, 5).unwrap() {
            assert!(c.pass, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn ks_check_rejects_wrong_distribution() {
        // Same harness, but feed k=2 samples to a k=3 CDF by reusing the
        // statistic at a mismatched exponent: build it manually.
        let n = 20_000u64;
        let crit = ks_critical_001(n);
        let mut u: Vec<f64> = (0..n)
            .map(|i| {
                let mut r = rng::substream(5, i, 2);
                let min = (0..2).map(|_| r.gen_range(0.0..1.0)).fold(f64::INFINITY, f64::min);
                // Deliberately wrong exponent.
                (1.0 - min).powi(3)
            })
            .collect();
        u.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut d = 0.0f64;
        for (i, &v) in u.iter().enumerate() {
            d = d.max(((i + 1) as f64 / n as f64 - v).abs());
            d = d.max((v - i as f64 / n as f64).abs());
        }
        assert!(d > crit, "mismatched CDF must be rejected: d={d} crit={crit}");
    }

    #[test]
    fn cost_exceedance_is_tight_for_quantile() {
        let c = cost_exceedance_check(15, 0.2, 50_000, 9).unwrap();
        assert!(c.pass, "{}", c.detail);
    }

    #[test]
    fn conditional_cost_equality_for_quantile() {
        let c = conditional_cost_check(10, 200, 0.2, 20_000, 13).unwrap();
        assert!(c.pass, "{}", c.detail);
    }

    #[test]
    fn conditional_violation_exact_for_single_trials() {
        // Single trials of the fully supported problem: every occupied
        // count bin must match the closed-form conditional distribution.
        let outcomes = quantile_trial_outcomes(5, 200, 20_000, 21);
        let checks =
            conditional_violation_exactness(&outcomes, 200, &[0.1, 0.2, 0.3], 300).unwrap();
        assert_eq!(checks.len(), 3);
        for c in checks {
            assert!(c.pass, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn coverage_counts_inside_fraction() {
        let iv = ProbInterval::new(0.2, 0.4).unwrap();
        assert_eq!(coverage(&[0.1, 0.25, 0.3, 0.5], iv), 0.5);
        assert_eq!(coverage(&[], iv), 0.0);
    }
}
