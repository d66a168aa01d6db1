//! Fully supported 1-D test problem: minimize x subject to delta <= x for
//! every sampled delta ~ uniform(0,1). The solution is the sample maximum
//! and the support dimension is exactly 1, which makes every probabilistic
//! bound in this crate attain equality.

use super::{Sample, ScenarioProblem, Solution};
use crate::bounds::SupportBounds;
use crate::error::{Error, Result};
use rand::Rng;

#[derive(Debug, Clone, Copy)]
pub struct Quantile1d;

impl ScenarioProblem for Quantile1d {
    fn decision_dim(&self) -> usize {
        1
    }

    fn sample_dim(&self) -> usize {
        1
    }

    fn support(&self, _j: usize) -> SupportBounds {
        SupportBounds::new(1, 1).expect("static bounds")
    }

    fn draw(&self, _j: usize, rng: &mut dyn rand::RngCore) -> Sample {
        vec![rng.gen_range(0.0..1.0)]
    }

    fn draw_into(&self, _j: usize, rng: &mut dyn rand::RngCore, buf: &mut Sample) {
        buf.clear();
        buf.push(rng.gen_range(0.0..1.0));
    }

    fn solve(&self, sample_sets: &[Vec<Sample>]) -> Result<Solution> {
        let samples = &sample_sets[0];
        if samples.is_empty() {
            return Err(Error::DegenerateInput(
                "quantile1d requires at least one sample".to_string(),
            ));
        }
        let x = samples
            .iter()
            .map(|s| s[0])
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(Solution {
            x: vec![x],
            objective: x,
            support_count: Some(1),
        })
    }

    fn violated(&self, _j: usize, solution: &Solution, sample: &Sample) -> bool {
        sample[0] > solution.x[0]
    }
}
