//! Closed-form confidence bounds: level-q solution bounds, posterior
//! bounds, selection probabilities, cost bounds, and the comparison bound
//! from deterministic-discarding analyses.
//!
//! All functions are pure; misordered integer arguments raise domain
//! errors rather than being clamped.

use crate::error::{Error, Result};
use crate::specfun::{binom_cdf, log_beta, log_binomial_coeff};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Almost-sure bounds on the support dimension of the sampled problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportBounds {
    pub zeta_low: u64,
    pub zeta_high: u64,
}

impl SupportBounds {
    pub fn new(zeta_low: u64, zeta_high: u64) -> Result<Self> {
        if zeta_low > zeta_high || zeta_high == 0 {
            return Err(Error::domain(format!(
                "support bounds require 0 <= zeta_low <= zeta_high, zeta_high >= 1; got ({zeta_low},{zeta_high})"
            )));
        }
        Ok(SupportBounds { zeta_low, zeta_high })
    }

    pub fn is_unique(&self) -> bool {
        self.zeta_low == self.zeta_high
    }
}

/// A closed interval of probabilities, lower <= upper.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbInterval {
    pub lower: f64,
    pub upper: f64,
}

impl ProbInterval {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lower) || !(0.0..=1.0).contains(&upper) || lower > upper + 1e-12 {
            return Err(Error::domain(format!(
                "invalid probability interval ({lower},{upper})"
            )));
        }
        Ok(ProbInterval {
            lower: lower.min(upper),
            upper,
        })
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

/// Phi(q - zeta; m, 1 - eps): the level-q confidence quantity. With
/// zeta = zeta_high it is the lower confidence bound, with zeta = zeta_low
/// the upper one.
pub fn levelq_confidence(q: u64, m: u64, zeta: u64, eps: f64) -> Result<f64> {
    if zeta > q || q > m {
        return Err(Error::domain(format!(
            "levelq_confidence requires zeta <= q <= m, got zeta={zeta}, q={q}, m={m}"
        )));
    }
    binom_cdf(q as i64 - zeta as i64, m, 1.0 - eps)
}

/// The posterior interval (Phi(q - zeta_high; m, 1-eps), Phi(q - zeta_low; m, 1-eps)).
///
/// Degenerates to a point when the support dimension is unique.
pub fn levelq_interval(q: u64, m: u64, s: SupportBounds, eps: f64) -> Result<ProbInterval> {
    if s.zeta_high > q {
        return Err(Error::domain(format!(
            "levelq_interval requires zeta_high <= q, got {} > {q}",
            s.zeta_high
        )));
    }
    let lower = levelq_confidence(q, m, s.zeta_high, eps)?;
    let upper = levelq_confidence(q, m, s.zeta_low, eps)?;
    ProbInterval::new(lower, upper)
}

fn check_selection_args(r: u64, q: u64, m: u64, k: u64) -> Result<()> {
    if !(1 <= k && k <= r && r <= q && q <= m) {
        return Err(Error::domain(format!(
            "selection probability requires 1 <= k <= r <= q <= m, got k={k}, r={r}, q={q}, m={m}"
        )));
    }
    Ok(())
}

fn log_selection_prob(r: u64, q: u64, m: u64, k: u64) -> f64 {
    // ln[ C(m-r, q-r) * B(m-q+k, q-k+1) / B(k, r-k+1) ]
    log_binomial_coeff(m - r, (q - r) as i64)
        + log_beta(m - q + k, q - k + 1).expect("integer beta args >= 1")
        - log_beta(k, r - k + 1).expect("integer beta args >= 1")
}

/// Exact probability of landing on a level-q count when the regularized
/// essential set has cardinality k: C(m-r, q-r) B(m-q+k, q-k+1) / B(k, r-k+1).
pub fn selection_prob_exact(r: u64, q: u64, m: u64, k: u64) -> Result<f64> {
    check_selection_args(r, q, m, k)?;
    Ok(log_selection_prob(r, q, m, k).exp().min(1.0))
}

/// Bracket of the selection probability over integer support dimensions in
/// [zeta_low, zeta_high]. The ratio need not be monotone in zeta, so every
/// integer in the range is evaluated.
pub fn selection_prob_bounds(r: u64, q: u64, m: u64, s: SupportBounds) -> Result<ProbInterval> {
    if s.zeta_high > r {
        return Err(Error::domain(format!(
            "selection_prob_bounds requires zeta_high <= r, got {} > {r}",
            s.zeta_high
        )));
    }
    check_selection_args(r, q, m, s.zeta_high)?;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for zeta in s.zeta_low..=s.zeta_high {
        // zeta = 0 is the degenerate empty essential set: the count is m
        // with certainty.
        let v = if zeta == 0 {
            if q == m {
                1.0
            } else {
                0.0
            }
        } else {
            selection_prob_exact(r, q, m, zeta)?
        };
        min = min.min(v);
        max = max.max(v);
    }
    ProbInterval::new(min, max)
}

/// Raw (unclamped) comparison bound for optimal-discarding strategies:
/// 1 - C(m-q+zh-1, m-q) Phi(m-q+zh-1; m, eps). May be strongly negative.
pub fn psi_campi_raw(q: u64, zeta_high: u64, m: u64, eps: f64) -> Result<f64> {
    if zeta_high < 1 || q > m {
        return Err(Error::domain(format!(
            "psi requires zeta_high >= 1 and q <= m, got zeta_high={zeta_high}, q={q}, m={m}"
        )));
    }
    let n = m - q + zeta_high - 1;
    let log_coeff = log_binomial_coeff(n, (m - q) as i64);
    let phi = binom_cdf(n as i64, m, eps)?;
    Ok(1.0 - (log_coeff.exp() * phi))
}

/// Comparison bound clamped to [0, 1] for probability reporting.
pub fn psi_campi(q: u64, zeta_high: u64, m: u64, eps: f64) -> Result<f64> {
    Ok(psi_campi_raw(q, zeta_high, m, eps)?.clamp(0.0, 1.0))
}

/// Upper bound on the probability that the sampled optimum exceeds the
/// chance-constrained optimum: Phi(r-1; r, 1-eps) = 1 - (1-eps)^r.
pub fn cost_upper_prob(r: u64, eps: f64) -> Result<f64> {
    if r < 1 {
        return Err(Error::domain("cost_upper_prob requires r >= 1"));
    }
    binom_cdf(r as i64 - 1, r, 1.0 - eps)
}

/// Lower bound on P{J* >= J_o | theta_r = q}: Phi(q - zeta_high; m, 1-eps).
pub fn cost_lower_prob(q: u64, m: u64, zeta_high: u64, eps: f64) -> Result<f64> {
    levelq_confidence(q, m, zeta_high, eps)
}

/// One tabulated (eps, value) curve, exportable as CSV with header `eps,value`.
#[derive(Debug, Clone, Serialize)]
pub struct BoundCurve {
    pub points: Vec<(f64, f64)>,
}

impl BoundCurve {
    /// Tabulates a bound function over an epsilon grid.
    pub fn tabulate(eps_grid: &[f64], mut f: impl FnMut(f64) -> Result<f64>) -> Result<Self> {
        let points = eps_grid
            .iter()
            .map(|&e| f(e).map(|v| (e, v)))
            .collect::<Result<Vec<_>>>()?;
        Ok(BoundCurve { points })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "eps,value")?;
        for (eps, v) in &self.points {
            writeln!(w, "{eps},{v}")?;
        }
        Ok(())
    }
}

/// Uniformly spaced grid over [lo, hi] with `points` entries.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![lo];
    }
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::binom_cdf_inv_eps;

    #[test]
    fn levelq_edges() {
        // q = m, eps = 0, zeta >= 1: all mass at i = m, Phi(m - zeta; m, 1) = 0
        assert_eq!(levelq_confidence(100, 100, 2, 0.0).unwrap(), 0.0);
        // eps = 1: Phi at p = 0 is 1
        assert_eq!(levelq_confidence(50, 100, 2, 1.0).unwrap(), 1.0);
        assert!(levelq_confidence(10, 5, 1, 0.5).is_err());
        assert!(levelq_confidence(3, 10, 5, 0.5).is_err());
    }

    #[test]
    fn levelq_curve_crossing_matches_inversion() {
        // Where the lower-bound curve crosses 0.95, the inverse must agree.
        let (q, m, zeta) = (375u64, 500u64, 10u64);
        let eps_cross = binom_cdf_inv_eps(q as i64 - zeta as i64, m, 0.95).unwrap();
        let v = levelq_confidence(q, m, zeta, eps_cross).unwrap();
        assert!((v - 0.95).abs() < 1e-8);
    }

    #[test]
    fn interval_degenerate_and_zero_eps() {
        let s = SupportBounds::new(3, 3).unwrap();
        let iv = levelq_interval(50, 100, s, 0.3).unwrap();
        assert_eq!(iv.lower, iv.upper);

        let s = SupportBounds::new(1, 3).unwrap();
        let iv = levelq_interval(50, 100, s, 0.0).unwrap();
        assert_eq!(iv.lower, 0.0);
        assert_eq!(iv.upper, 0.0);
    }

    #[test]
    fn interval_ordering_and_monotonicity() {
        let s = SupportBounds::new(1, 5).unwrap();
        let mut prev = 0.0;
        for eps in [0.05, 0.1, 0.2, 0.3, 0.5] {
            let iv = levelq_interval(80, 100, s, eps).unwrap();
            assert!(iv.lower <= iv.upper);
            assert!(iv.lower + 1e-12 >= prev, "monotone in eps");
            prev = iv.lower;
        }
        let mut prev = 0.0;
        for q in [60u64, 70, 80, 90, 100] {
            let iv = levelq_interval(q, 100, s, 0.25).unwrap();
            assert!(iv.lower + 1e-12 >= prev, "monotone in q");
            prev = iv.lower;
        }
    }

    #[test]
    fn selection_prob_certain_case() {
        // r = q = m: the count is m with certainty.
        for k in 1..=3u64 {
            let p = selection_prob_exact(3, 3, 3, k).unwrap();
            assert!((p - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn selection_prob_one_dim_oracle() {
        // 1-D max problem with m=3, r=2, k=1: theta = 2 iff the held-out
        // sample exceeds both drawn ones, which happens w.p. 1/3.
        let p2 = selection_prob_exact(2, 2, 3, 1).unwrap();
        assert!((p2 - 1.0 / 3.0).abs() < 1e-12);
        let p3 = selection_prob_exact(2, 3, 3, 1).unwrap();
        assert!((p3 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn selection_prob_mass_sums_to_one() {
        for &(m, r, k) in &[(10u64, 3u64, 1u64), (50, 7, 3), (400, 20, 5), (2000, 40, 10)] {
            let total: f64 = (r..=m).map(|q| selection_prob_exact(r, q, m, k).unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-9, "m={m} r={r} k={k}: {total}");
        }
    }

    #[test]
    fn selection_bounds_degenerate_support() {
        let s = SupportBounds::new(2, 2).unwrap();
        let iv = selection_prob_bounds(5, 9, 20, s).unwrap();
        let exact = selection_prob_exact(5, 9, 20, 2).unwrap();
        assert_eq!(iv.lower, exact);
        assert_eq!(iv.upper, exact);
    }

    #[test]
    fn psi_equals_levelq_at_q_eq_m() {
        // Psi(m, zh; m, eps) = 1 - Phi(zh - 1; m, eps) = Phi(m - zh; m, 1 - eps)
        let (m, zh, eps) = (200u64, 4u64, 0.13);
        let psi = psi_campi(m, zh, m, eps).unwrap();
        let phi = levelq_confidence(m, m, zh, eps).unwrap();
        assert!((psi - phi).abs() < 1e-10);
    }

    #[test]
    fn psi_raw_negative_at_small_eps() {
        // At eps = 0 the CDF factor is 1, so the raw value is
        // 1 - C(m-q+zh-1, m-q), far below zero; the clamped form floors at 0.
        let raw = psi_campi_raw(300, 10, 500, 0.0).unwrap();
        assert!(raw < -1e10);
        assert_eq!(psi_campi(300, 10, 500, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn psi_dominated_by_levelq_lower_bound() {
        let (q, m, zh) = (375u64, 500u64, 10u64);
        for eps in linspace(0.0, 1.0, 101) {
            let phi = levelq_confidence(q, m, zh, eps).unwrap();
            let psi = psi_campi(q, zh, m, eps).unwrap();
            assert!(phi + 1e-10 >= psi, "eps={eps}: {phi} < {psi}");
        }
    }

    #[test]
    fn cost_bounds() {
        assert!((cost_upper_prob(1, 0.5).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(cost_upper_prob(10, 0.0).unwrap(), 0.0);
        let v = cost_upper_prob(15, 0.2).unwrap();
        assert!((v - (1.0 - 0.8f64.powi(15))).abs() < 1e-10);

        // cost_lower_prob shares the level-q kernel exactly.
        let a = cost_lower_prob(375, 500, 10, 0.3).unwrap();
        let b = levelq_confidence(375, 500, 10, 0.3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn curve_csv_format() {
        let curve = BoundCurve::tabulate(&[0.0, 0.5], |e| Ok(e * 2.0)).unwrap();
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("eps,value\n"));
        assert_eq!(text.lines().count(), 3);
    }
}
