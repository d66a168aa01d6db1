//! Trial design: band selection (q_low, q_high), the r* maximization,
//! trial counts, posterior resolution, sample sizing, and the
//! multi-constraint generalization.

use crate::bounds::SupportBounds;
use crate::error::{Error, Result};
use crate::specfun::{binom_cdf, log_factorial};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Whether p_trial uses the guaranteed lower selection bound (min over the
/// support-dimension range) or the optimistic upper bound (max over it).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMode {
    #[default]
    Guaranteed,
    Optimistic,
}

/// Inputs to the trial design: the violation-probability band, prior and
/// posterior confidence levels, sample size, and support bounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignSpec {
    pub eps_low: f64,
    pub eps_high: f64,
    pub p_prior: f64,
    pub p_post: f64,
    pub m: u64,
    pub support: SupportBounds,
    #[serde(default)]
    pub r_max: Option<u64>,
    #[serde(default)]
    pub bound_mode: BoundMode,
}

impl DesignSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eps_low)
            || !(0.0..=1.0).contains(&self.eps_high)
            || self.eps_low >= self.eps_high
        {
            return Err(Error::domain(format!(
                "require 0 <= eps_low < eps_high <= 1, got ({}, {})",
                self.eps_low, self.eps_high
            )));
        }
        if !(self.p_prior > 0.0 && self.p_prior < self.p_post && self.p_post < 1.0) {
            return Err(Error::domain(format!(
                "require 0 < p_prior < p_post < 1, got ({}, {})",
                self.p_prior, self.p_post
            )));
        }
        if self.m < self.support.zeta_high {
            return Err(Error::domain(format!(
                "require m >= zeta_high, got m={}, zeta_high={}",
                self.m, self.support.zeta_high
            )));
        }
        if let Some(r_max) = self.r_max {
            if r_max < self.support.zeta_high {
                return Err(Error::domain(format!(
                    "require r_max >= zeta_high, got r_max={r_max}"
                )));
            }
        }
        Ok(())
    }
}

/// Output of design step (i).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialDesign {
    pub q_low: u64,
    pub q_high: u64,
    pub r_star: u64,
    pub p_trial: f64,
    pub n_trials: u64,
    pub eps_a: f64,
    pub eps_b: f64,
    pub delta_eps: f64,
}

/// Design document emitted by the CLI: the design plus an echo of its inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignDocument {
    #[serde(flatten)]
    pub design: TrialDesign,
    pub spec: DesignSpec,
}

/// Per-constraint designs plus the joint trial count for multiple chance
/// constraints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiDesign {
    pub designs: Vec<TrialDesign>,
    pub p_trial_joint: f64,
    pub n_trials: u64,
}

/// Smallest q with Phi(q - zeta_high; m, 1-eps_high) >= (1+p_post)/2 and
/// largest q with Phi(q - zeta_low; m, 1-eps_low) <= (1-p_post)/2.
///
/// Both left-hand sides are nondecreasing in q, so each bound is found by
/// bisection over the integers.
pub fn q_range(spec: &DesignSpec) -> Result<(u64, u64)> {
    spec.validate()?;
    let m = spec.m;
    let zh = spec.support.zeta_high;
    let zl = spec.support.zeta_low;
    let t_low = 0.5 * (1.0 + spec.p_post);
    let t_high = 0.5 * (1.0 - spec.p_post);

    let cond_low =
        |q: u64| -> Result<bool> { Ok(binom_cdf(q as i64 - zh as i64, m, 1.0 - spec.eps_high)? >= t_low) };
    let cond_high =
        |q: u64| -> Result<bool> { Ok(binom_cdf(q as i64 - zl as i64, m, 1.0 - spec.eps_low)? <= t_high) };

    if !cond_low(m)? {
        return Err(Error::infeasible(format!(
            "no q <= m={m} satisfies the lower band condition; increase m or widen (eps_low, eps_high)"
        )));
    }
    // min q in [zh, m] with cond_low
    let (mut lo, mut hi) = (zh, m);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if cond_low(mid)? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let q_low = lo;

    if !cond_high(zl)? {
        return Err(Error::infeasible(
            "no q satisfies the upper band condition; increase m or widen (eps_low, eps_high)".to_string(),
        ));
    }
    // max q in [zl, m] with cond_high
    let (mut lo, mut hi) = (zl, m);
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if cond_high(mid)? {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let q_high = lo;

    if q_low > q_high {
        return Err(Error::infeasible(format!(
            "empty band: q_low={q_low} > q_high={q_high}; increase m or widen (eps_low, eps_high)"
        )));
    }
    Ok((q_low, q_high))
}

/// ln of the per-q selection term optimized over the support-dimension
/// range: ln C(m-r, q-r) + opt_zeta [ln B(m-q+z, q-z+1) - ln B(z, r-z+1)].
fn log_band_term(m: u64, r: u64, q: u64, support: SupportBounds, mode: BoundMode) -> f64 {
    debug_assert!(r <= q && q <= m);
    let lf = log_factorial;
    let log_choose = lf(m - r) - lf(q - r) - lf(m - q);
    let mut best = match mode {
        BoundMode::Guaranteed => f64::INFINITY,
        BoundMode::Optimistic => f64::NEG_INFINITY,
    };
    for z in support.zeta_low..=support.zeta_high.min(r) {
        let v = if z == 0 {
            // Empty essential set: the count is m with certainty.
            if q == m {
                0.0 - log_choose
            } else {
                f64::NEG_INFINITY
            }
        } else {
            // ln B(m-q+z, q-z+1) - ln B(z, r-z+1), expanded in log-factorials
            lf(m - q + z - 1) + lf(q - z) - lf(m) - (lf(z - 1) + lf(r - z) - lf(r))
        };
        best = match mode {
            BoundMode::Guaranteed => best.min(v),
            BoundMode::Optimistic => best.max(v),
        };
    }
    log_choose + best
}

/// p_trial(r): the banded sum of per-q selection terms for a given r.
pub fn p_trial_for_r(spec: &DesignSpec, q_low: u64, q_high: u64, r: u64) -> f64 {
    let lo = r.max(q_low);
    if lo > q_high {
        return 0.0;
    }
    (lo..=q_high)
        .map(|q| log_band_term(spec.m, r, q, spec.support, spec.bound_mode).exp())
        .sum()
}

/// Exhaustive scan for r* = argmax p_trial(r) over r in
/// [zeta_high, min(r_max, q_high)], ties broken toward smaller r.
pub fn optimize_r(spec: &DesignSpec, q_low: u64, q_high: u64) -> Result<(u64, f64)> {
    spec.validate()?;
    let r_lo = spec.support.zeta_high;
    let r_hi = spec.r_max.unwrap_or(q_high).min(q_high);
    if r_lo > r_hi {
        return Err(Error::infeasible(format!(
            "empty r search domain [{r_lo}, {r_hi}]"
        )));
    }
    let evaluated: Vec<(u64, f64)> = (r_lo..=r_hi)
        .into_par_iter()
        .map(|r| (r, p_trial_for_r(spec, q_low, q_high, r)))
        .collect();
    let mut best = (r_lo, f64::NEG_INFINITY);
    for (r, p) in evaluated {
        if p > best.1 {
            best = (r, p);
        }
    }
    if !(best.1 > 0.0) {
        return Err(Error::infeasible("p_trial is zero over the entire r domain".to_string()));
    }
    Ok(best)
}

/// Trial count ceil( ln(1 - p_prior/p_post) / ln(1 - p_trial) ).
pub fn n_trials(p_prior: f64, p_post: f64, p_trial: f64) -> Result<u64> {
    if !(p_prior > 0.0 && p_prior < p_post) {
        return Err(Error::domain(format!(
            "require 0 < p_prior < p_post, got ({p_prior}, {p_post})"
        )));
    }
    if !(p_trial > 0.0 && p_trial <= 1.0) {
        return Err(Error::domain(format!("require p_trial in (0,1], got {p_trial}")));
    }
    let num = (-p_prior / p_post).ln_1p();
    let den = (-p_trial).ln_1p();
    let n = (num / den).ceil();
    Ok((n as u64).max(1))
}

/// Posterior resolution (eps_a, eps_b): the sharpest pair satisfying the
/// two posterior band conditions at q = floor(m (1 - eps_high)).
///
/// eps_a is minimized and eps_b maximized, each by bisection to 1e-9.
pub fn posterior_resolution(spec: &DesignSpec) -> Result<(f64, f64)> {
    spec.validate()?;
    let m = spec.m;
    let q_ref = (m as f64 * (1.0 - spec.eps_high)).floor() as i64;
    let n_a = q_ref - spec.support.zeta_high as i64;
    let n_b = q_ref - spec.support.zeta_low as i64;
    let t_a = 0.5 * (1.0 + spec.p_post);
    let t_b = 0.5 * (1.0 - spec.p_post);

    // Phi(n_a; m, 1-eps) is nondecreasing in eps; find the least eps with
    // Phi >= t_a.
    if binom_cdf(n_a, m, 0.0)? < t_a {
        return Err(Error::infeasible(
            "no eps in [0,1] meets the lower posterior condition".to_string(),
        ));
    }
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if binom_cdf(n_a, m, 1.0 - mid)? >= t_a {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let eps_a = hi;

    // Phi(n_b; m, 1-eps) <= t_b holds on a prefix of eps; find its right end.
    if binom_cdf(n_b, m, 1.0)? > t_b {
        return Err(Error::infeasible(
            "no eps in [0,1] meets the upper posterior condition".to_string(),
        ));
    }
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if binom_cdf(n_b, m, 1.0 - mid)? <= t_b {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let eps_b = lo;

    Ok((eps_a, eps_b))
}

fn delta_eps_for_m(
    m: u64,
    eps_high: f64,
    support: SupportBounds,
    p_post: f64,
) -> Option<f64> {
    let spec = DesignSpec {
        eps_low: 0.0,
        eps_high,
        p_prior: 0.5 * p_post,
        p_post,
        m,
        support,
        r_max: None,
        bound_mode: BoundMode::Guaranteed,
    };
    match posterior_resolution(&spec) {
        Ok((a, b)) => Some((a - b).max(0.0)),
        Err(_) => None,
    }
}

/// Smallest m whose posterior resolution delta_eps is at or below the
/// target, found by doubling then bisection. Gives up beyond m = 1e8.
pub fn min_sample_size(
    target_delta_eps: f64,
    eps_high: f64,
    support: SupportBounds,
    p_post: f64,
) -> Result<u64> {
    if !(target_delta_eps > 0.0) {
        return Err(Error::domain("target_delta_eps must be positive".to_string()));
    }
    let m_min = support.zeta_high.max(1);
    if target_delta_eps >= 1.0 {
        // delta_eps cannot exceed 1; any admissible m qualifies.
        return Ok(m_min);
    }
    const M_CAP: u64 = 100_000_000;
    let ok = |m: u64| delta_eps_for_m(m, eps_high, support, p_post).is_some_and(|d| d <= target_delta_eps);

    let mut hi = m_min;
    while !ok(hi) {
        if hi >= M_CAP {
            return Err(Error::ResourceLimit(format!(
                "no m <= {M_CAP} reaches delta_eps <= {target_delta_eps}"
            )));
        }
        hi = (hi * 2).min(M_CAP);
    }
    let mut lo = m_min;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}

/// Full scalar design: band, r*, trial count, and posterior resolution.
pub fn design(spec: &DesignSpec) -> Result<TrialDesign> {
    let (q_low, q_high) = q_range(spec)?;
    let (r_star, p_trial) = optimize_r(spec, q_low, q_high)?;
    let n = n_trials(spec.p_prior, spec.p_post, p_trial)?;
    let (eps_a, eps_b) = posterior_resolution(spec)?;
    Ok(TrialDesign {
        q_low,
        q_high,
        r_star,
        p_trial,
        n_trials: n,
        eps_a,
        eps_b,
        delta_eps: (eps_a - eps_b).max(0.0),
    })
}

/// Multi-constraint design: per-constraint step (i) plus the product-form
/// joint trial count.
pub fn multi_design(specs: &[DesignSpec]) -> Result<MultiDesign> {
    if specs.is_empty() {
        return Err(Error::domain("multi_design requires at least one spec".to_string()));
    }
    let p_prior = specs[0].p_prior;
    let m = specs[0].m;
    for s in specs {
        if s.p_prior != p_prior || s.m != m {
            return Err(Error::domain(
                "all constraints must share p_prior and m".to_string(),
            ));
        }
    }
    let designs = specs.iter().map(design).collect::<Result<Vec<_>>>()?;
    let p_post_joint: f64 = specs.iter().map(|s| s.p_post).product();
    if p_post_joint <= p_prior {
        return Err(Error::infeasible(format!(
            "product of posterior probabilities {p_post_joint} does not exceed p_prior {p_prior}"
        )));
    }
    let p_trial_joint: f64 = designs.iter().map(|d| d.p_trial).product();
    let n = n_trials(p_prior, p_post_joint, p_trial_joint)?;
    Ok(MultiDesign {
        designs,
        p_trial_joint,
        n_trials: n,
    })
}
