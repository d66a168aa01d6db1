//! Sampled convex programs: the problem interface and three built-ins
//! (minimum enclosing ball, a fully supported 1-D quantile problem, and a
//! finite-horizon control problem with uncertain dynamics).

mod fhc;
mod minball;
mod quantile;

pub use fhc::{fhc_simulate, Fhc, FhcConfig};
pub use minball::{minball_solve, Minball};
pub use quantile::Quantile1d;

use crate::bounds::SupportBounds;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// One draw of the random parameter vector.
pub type Sample = Vec<f64>;

/// Output of a sampled solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub support_count: Option<u64>,
}

/// A convex program over random constraint samples. Implementations must be
/// deterministic in `solve` and keep `violated` a pure predicate; samples in
/// the solve set are never violated by the returned solution (up to the
/// problem's stated tolerance).
pub trait ScenarioProblem: Send + Sync {
    fn decision_dim(&self) -> usize;
    fn sample_dim(&self) -> usize;
    fn constraint_count(&self) -> usize {
        1
    }
    /// Declared support-dimension bounds for constraint `j`.
    fn support(&self, j: usize) -> SupportBounds;
    fn draw(&self, j: usize, rng: &mut dyn rand::RngCore) -> Sample;
    /// Draw into a reusable buffer; hot loops use this to avoid one
    /// allocation per sample. Must consume the same RNG stream as `draw`.
    fn draw_into(&self, j: usize, rng: &mut dyn rand::RngCore, buf: &mut Sample) {
        *buf = self.draw(j, rng);
    }
    /// Solve with one sample list per constraint.
    fn solve(&self, sample_sets: &[Vec<Sample>]) -> Result<Solution>;
    fn violated(&self, j: usize, solution: &Solution, sample: &Sample) -> bool;
}

/// JSON-configurable choice of built-in problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemConfig {
    /// Minimum enclosing ball of standard-normal points in `dim` dimensions.
    Minball { dim: usize },
    /// Minimize x subject to delta <= x, delta ~ uniform(0,1).
    Quantile1d,
    /// Finite-horizon control with elementwise-uniform dynamics perturbation.
    Fhc(FhcConfig),
}

impl ProblemConfig {
    pub fn build(&self) -> Result<Box<dyn ScenarioProblem>> {
        match self {
            ProblemConfig::Minball { dim } => Ok(Box::new(Minball::new(*dim)?)),
            ProblemConfig::Quantile1d => Ok(Box::new(Quantile1d)),
            ProblemConfig::Fhc(cfg) => Ok(Box::new(Fhc::new(cfg.clone())?)),
        }
    }
}

pub(crate) fn check_sample_dim(expected: usize, sample: &Sample) -> Result<()> {
    if sample.len() != expected {
        return Err(Error::domain(format!(
            "sample dimension {} does not match problem dimension {expected}",
            sample.len()
        )));
    }
    Ok(())
}

/// Solve the square system `a x = rhs` in place by Gaussian elimination with
/// partial pivoting. Returns None when the matrix is singular to tolerance.
pub(crate) fn solve_linear(a: &mut [Vec<f64>], rhs: &mut [f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    let scale: f64 = a
        .iter()
        .flat_map(|row| row.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1.0);
    for col in 0..n {
        let (pivot_row, pivot) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))?;
        if pivot <= 1e-12 * scale {
            return None;
        }
        a.swap(col, pivot_row);
        rhs.swap(col, pivot_row);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for c in row + 1..n {
            acc -= a[row][c] * x[c];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_solver_identity_and_random() {
        let mut a = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let mut rhs = vec![3.0, -4.0];
        assert_eq!(solve_linear(&mut a, &mut rhs).unwrap(), vec![3.0, -4.0]);

        let mut a = vec![vec![2.0, 1.0, 0.5], vec![1.0, 3.0, 1.0], vec![0.5, 1.0, 4.0]];
        let x_true = [1.0, -2.0, 0.5];
        let mut rhs: Vec<f64> = (0..3)
            .map(|r| (0..3).map(|c| a[r][c] * x_true[c]).sum())
            .collect();
        let x = solve_linear(&mut a, &mut rhs).unwrap();
        for (xi, ti) in x.iter().zip(x_true.iter()) {
            assert!((xi - ti).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_solver_rejects_singular() {
        let mut a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        let mut rhs = vec![1.0, 2.0];
        assert!(solve_linear(&mut a, &mut rhs).is_none());
    }

    #[test]
    fn problem_config_round_trips_through_json() {
        let cfg = ProblemConfig::Minball { dim: 4 };
        let s = serde_json::to_string(&cfg).unwrap();
        let back: ProblemConfig = serde_json::from_str(&s).unwrap();
        let p = back.build().unwrap();
        assert_eq!(p.sample_dim(), 4);
        assert_eq!(p.decision_dim(), 5);
    }
}
