//! Numerically stable special-function kernels: log-factorials, log-beta
//! with integer arguments, the binomial distribution function Phi(n; N, p)
//! and its inverse in the success probability.
//!
//! Everything is evaluated in log space and probabilities are materialized
//! only at the API boundary. All functions are pure and reentrant; the
//! log-factorial table is built once and immutable afterwards.

use crate::error::{Error, Result};
use std::sync::OnceLock;

/// Largest n covered by the cumulative log-factorial table. Beyond this a
/// Stirling series is used, which at this magnitude is accurate to well
/// below 1e-15 relative.
const TABLE_MAX: usize = 1 << 17;

/// Crossover from direct log-space summation of the binomial pmf to the
/// regularized incomplete beta identity.
const DIRECT_SUM_MAX_N: u64 = 10_000;

fn log_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = Vec::with_capacity(TABLE_MAX + 1);
        table.push(0.0);
        // Kahan summation keeps the cumulative error near machine epsilon.
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for n in 1..=TABLE_MAX {
            let term = (n as f64).ln() - comp;
            let next = sum + term;
            comp = (next - sum) - term;
            sum = next;
            table.push(sum);
        }
        table
    })
}

/// ln(n!) via table lookup for small n and a Stirling series otherwise.
pub fn log_factorial(n: u64) -> f64 {
    if (n as usize) <= TABLE_MAX {
        return log_factorial_table()[n as usize];
    }
    let x = n as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // ln Gamma(x+1) = (x + 1/2) ln x - x + ln(2 pi)/2 + series in 1/x
    (x + 0.5) * x.ln() - x
        + 0.5 * (2.0 * std::f64::consts::PI).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}

/// ln C(N, k); negative infinity outside 0 <= k <= N.
pub fn log_binomial_coeff(big_n: u64, k: i64) -> f64 {
    if k < 0 || (k as u64) > big_n {
        return f64::NEG_INFINITY;
    }
    let k = k as u64;
    log_factorial(big_n) - log_factorial(k) - log_factorial(big_n - k)
}

/// ln B(a, b) for positive integer arguments.
pub fn log_beta(a: u64, b: u64) -> Result<f64> {
    if a < 1 || b < 1 {
        return Err(Error::domain(format!("log_beta requires a,b >= 1, got ({a},{b})")));
    }
    Ok(log_factorial(a - 1) + log_factorial(b - 1) - log_factorial(a + b - 1))
}

/// log of the binomial pmf C(N,i) p^i (1-p)^(N-i).
pub fn log_binom_pmf(i: u64, big_n: u64, p: f64) -> f64 {
    debug_assert!(i <= big_n);
    if p == 0.0 {
        return if i == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if p == 1.0 {
        return if i == big_n { 0.0 } else { f64::NEG_INFINITY };
    }
    log_binomial_coeff(big_n, i as i64) + (i as f64) * p.ln() + ((big_n - i) as f64) * (-p).ln_1p()
}

/// Continued fraction for the regularized incomplete beta function
/// (modified Lentz). Valid for x < (a+1)/(a+b+2).
fn beta_cont_frac(a: f64, b: f64, x: f64) -> Result<f64> {
    const MAX_ITER: usize = 20_000;
    const EPS: f64 = 1e-16;
    const FPMIN: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            return Ok(h);
        }
    }
    Err(Error::Numerical(format!(
        "incomplete beta continued fraction failed to converge (a={a}, b={b}, x={x})"
    )))
}

/// Regularized incomplete beta I_x(a, b) for positive integer a, b.
fn reg_inc_beta(a: u64, b: u64, x: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    if x >= 1.0 {
        return Ok(1.0);
    }
    let af = a as f64;
    let bf = b as f64;
    let ln_pre = af * x.ln() + bf * (-x).ln_1p() - log_beta(a, b)?;
    if x < (af + 1.0) / (af + bf + 2.0) {
        Ok(ln_pre.exp() * beta_cont_frac(af, bf, x)? / af)
    } else {
        Ok(1.0 - ln_pre.exp() * beta_cont_frac(bf, af, 1.0 - x)? / bf)
    }
}

/// The binomial distribution function Phi(n; N, p): the probability of n or
/// fewer successes in N independent trials of success probability p.
///
/// Returns 0 for n < 0 and 1 for n >= N. Absolute error <= 1e-10 for
/// N <= 1e6.
pub fn binom_cdf(n: i64, big_n: u64, p: f64) -> Result<f64> {
    if big_n == 0 {
        return Err(Error::domain("binom_cdf requires N >= 1"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("binom_cdf requires p in [0,1], got {p}")));
    }
    if n < 0 {
        return Ok(0.0);
    }
    let n = n as u64;
    if n >= big_n {
        return Ok(1.0);
    }
    if p == 0.0 {
        return Ok(1.0);
    }
    if p == 1.0 {
        return Ok(0.0);
    }
    if big_n <= DIRECT_SUM_MAX_N {
        // Direct log-space summation anchored at the dominant term.
        let logs: Vec<f64> = (0..=n).map(|i| log_binom_pmf(i, big_n, p)).collect();
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        let sum: f64 = logs.iter().map(|&l| (l - max).exp()).sum();
        Ok((max.exp() * sum).min(1.0))
    } else {
        reg_inc_beta(big_n - n, n + 1, 1.0 - p)
    }
}

/// Solves Phi(n; N, 1 - eps) = target for eps by bisection.
///
/// Phi(n; N, 1-eps) is nondecreasing in eps, 0 at eps = 0 (for n < N) and
/// 1 at eps = 1, so the root exists and is unique up to flat regions.
pub fn binom_cdf_inv_eps(n: i64, big_n: u64, target: f64) -> Result<f64> {
    if n < 0 || n as u64 >= big_n {
        return Err(Error::domain(format!(
            "binom_cdf_inv_eps requires 0 <= n < N, got n={n}, N={big_n}"
        )));
    }
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::domain(format!(
            "binom_cdf_inv_eps requires target in (0,1), got {target}"
        )));
    }
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if binom_cdf(n, big_n, 1.0 - mid)? < target {
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
