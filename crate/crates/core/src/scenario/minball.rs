//! Exact minimum enclosing ball via Welzl's move-to-front recursion with a
//! circumsphere linear solve on the boundary set.

use super::{check_sample_dim, dist2, solve_linear, Sample, ScenarioProblem, Solution};
use crate::bounds::SupportBounds;
use crate::error::{Error, Result};
use rand_distr::{Distribution, StandardNormal};

const BOUNDARY_TOL: f64 = 1e-7;
const CONTAIN_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
struct Ball {
    center: Vec<f64>,
    radius: f64,
}

impl Ball {
    fn empty(dim: usize) -> Self {
        Ball {
            center: vec![0.0; dim],
            radius: -1.0,
        }
    }

    fn contains(&self, p: &[f64]) -> bool {
        if self.radius < 0.0 {
            return false;
        }
        dist2(&self.center, p).sqrt() <= self.radius + CONTAIN_TOL * (1.0 + self.radius)
    }
}

/// Smallest sphere passing through all points of `boundary` (at most d+1
/// affinely independent points). Center c = p0 + sum lambda_i (p_i - p0)
/// with the lambdas solving the Gram system
/// (p_i - p0) . (c - p0) = |p_i - p0|^2 / 2.
fn circumsphere(boundary: &[&[f64]], dim: usize) -> Result<Ball> {
    match boundary.len() {
        0 => Ok(Ball::empty(dim)),
        1 => Ok(Ball {
            center: boundary[0].to_vec(),
            radius: 0.0,
        }),
        k => {
            let p0 = boundary[0];
            let diffs: Vec<Vec<f64>> = boundary[1..]
                .iter()
                .map(|p| p.iter().zip(p0).map(|(a, b)| a - b).collect())
                .collect();
            let mut gram: Vec<Vec<f64>> = (0..k - 1)
                .map(|i| (0..k - 1).map(|j| dot(&diffs[i], &diffs[j])).collect())
                .collect();
            let mut rhs: Vec<f64> = diffs.iter().map(|d| 0.5 * dot(d, d)).collect();
            let lambda = solve_linear(&mut gram, &mut rhs).ok_or_else(|| {
                Error::Numerical("singular circumsphere system (degenerate boundary set)".to_string())
            })?;
            let mut center = p0.to_vec();
            for (l, d) in lambda.iter().zip(&diffs) {
                for (c, di) in center.iter_mut().zip(d) {
                    *c += l * di;
                }
            }
            let radius = dist2(&center, p0).sqrt();
            Ok(Ball { center, radius })
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn welzl<'a>(points: &mut [&'a [f64]], n: usize, boundary: &mut Vec<&'a [f64]>, dim: usize) -> Result<Ball> {
    if n == 0 || boundary.len() == dim + 1 {
        return circumsphere(boundary, dim);
    }
    let p = points[n - 1];
    let ball = welzl(points, n - 1, boundary, dim)?;
    if ball.contains(p) {
        return Ok(ball);
    }
    boundary.push(p);
    let ball = welzl(points, n - 1, boundary, dim)?;
    boundary.pop();
    // Move-to-front: keep recently forced boundary points early so later
    // recursions terminate quickly.
    points[..n].rotate_right(1);
    Ok(ball)
}

/// Exact minimum enclosing ball. Returns (center..., radius) as the decision
/// vector, the radius as objective, and the count of boundary samples.
pub fn minball_solve(samples: &[Sample]) -> Result<Solution> {
    let Some(first) = samples.first() else {
        return Err(Error::DegenerateInput("minball requires at least one sample".to_string()));
    };
    let dim = first.len();
    for s in samples {
        check_sample_dim(dim, s)?;
    }
    let mut points: Vec<&[f64]> = samples.iter().map(|s| s.as_slice()).collect();
    let n = points.len();
    let mut boundary = Vec::with_capacity(dim + 1);
    let ball = welzl(&mut points, n, &mut boundary, dim)?;
    let support_count = samples
        .iter()
        .filter(|s| {
            (dist2(&ball.center, s).sqrt() - ball.radius).abs() <= BOUNDARY_TOL * (1.0 + ball.radius)
        })
        .count() as u64;
    let mut x = ball.center;
    x.push(ball.radius);
    Ok(Solution {
        x,
        objective: ball.radius,
        support_count: Some(support_count),
    })
}

/// Minimum enclosing ball of standard-normal points in `dim` dimensions.
#[derive(Debug, Clone)]
pub struct Minball {
    dim: usize,
}

impl Minball {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("minball dimension must be positive".to_string()));
        }
        Ok(Minball { dim })
    }
}

impl ScenarioProblem for Minball {
    fn decision_dim(&self) -> usize {
        self.dim + 1
    }

    fn sample_dim(&self) -> usize {
        self.dim
    }

    fn support(&self, _j: usize) -> SupportBounds {
        // Boundary sets of continuous point clouds almost surely have
        // between 2 and d+1 points.
        SupportBounds::new(2, self.dim as u64 + 1).expect("static bounds")
    }

    fn draw(&self, _j: usize, rng: &mut dyn rand::RngCore) -> Sample {
        (0..self.dim).map(|_| StandardNormal.sample(rng)).collect()
    }

    fn draw_into(&self, _j: usize, rng: &mut dyn rand::RngCore, buf: &mut Sample) {
        buf.clear();
        buf.extend((0..self.dim).map(|_| -> f64 { StandardNormal.sample(rng) }));
    }

    fn solve(&self, sample_sets: &[Vec<Sample>]) -> Result<Solution> {
        minball_solve(&sample_sets[0])
    }

    fn violated(&self, _j: usize, solution: &Solution, sample: &Sample) -> bool {
        let (center, radius) = solution.x.split_at(self.dim);
        let r = radius[0];
        dist2(center, sample).sqrt() > r + CONTAIN_TOL * (1.0 + r)
    }
}
