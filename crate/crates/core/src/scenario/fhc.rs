//! Finite-horizon control with uncertain dynamics: choose an input sequence
//! u minimizing lambda ||u||^2 + sum_j sigma_j R_j^2 subject to the terminal
//! state staying within distance R_j of a reference for every sampled
//! dynamics perturbation in set j. Solved as a second-order cone program.

use super::{check_sample_dim, Sample, ScenarioProblem, Solution};
use crate::bounds::SupportBounds;
use crate::error::{Error, Result};
use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Plant, horizon, and weight description. The sample vector encodes a
/// row-major n_z x n_z additive perturbation of `a0`, each entry uniform on
/// [-rho, rho].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FhcConfig {
    pub a0: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub z0: Vec<f64>,
    pub z_ref: Vec<f64>,
    pub rho: f64,
    pub horizon: usize,
    pub lambda: f64,
    pub sigmas: Vec<f64>,
    /// Per-constraint support-dimension bounds; defaults to (1, N*n_u + 1).
    #[serde(default)]
    pub supports: Option<Vec<[u64; 2]>>,
}

impl FhcConfig {
    pub fn n_z(&self) -> usize {
        self.a0.len()
    }

    pub fn n_u(&self) -> usize {
        self.b.first().map_or(0, |row| row.len())
    }

    pub fn input_dim(&self) -> usize {
        self.horizon * self.n_u()
    }

    fn validate(&self) -> Result<()> {
        let n_z = self.n_z();
        if n_z == 0 || self.a0.iter().any(|row| row.len() != n_z) {
            return Err(Error::Config("a0 must be square and nonempty".to_string()));
        }
        if self.b.len() != n_z || self.n_u() == 0 || self.b.iter().any(|r| r.len() != self.n_u()) {
            return Err(Error::Config("b must be n_z x n_u with n_u >= 1".to_string()));
        }
        if self.z0.len() != n_z || self.z_ref.len() != n_z {
            return Err(Error::Config("z0 and z_ref must have length n_z".to_string()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be positive".to_string()));
        }
        if !(self.lambda > 0.0) || self.rho < 0.0 {
            return Err(Error::Config("lambda must be positive and rho nonnegative".to_string()));
        }
        if self.sigmas.is_empty() || self.sigmas.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Config("sigmas must be nonempty and positive".to_string()));
        }
        if let Some(sup) = &self.supports {
            if sup.len() != self.sigmas.len() {
                return Err(Error::Config("supports length must match sigmas".to_string()));
            }
        }
        Ok(())
    }

    /// Small two-state instance used by tests and as a runnable default when
    /// no plant data is supplied externally.
    pub fn synthetic_small() -> Self {
        FhcConfig {
            a0: vec![vec![0.9, 0.2], vec![-0.1, 0.8]],
            b: vec![vec![1.0], vec![0.5]],
            z0: vec![1.0, -1.0],
            z_ref: vec![0.5, 0.5],
            rho: 0.05,
            horizon: 2,
            lambda: 0.1,
            sigmas: vec![1.0],
            supports: None,
        }
    }
}

/// Roll the state forward: z <- A(delta) z + B u_t for t = 0..N-1.
pub fn fhc_simulate(cfg: &FhcConfig, u: &[f64], delta: &Sample) -> Result<Vec<f64>> {
    let n_z = cfg.n_z();
    let n_u = cfg.n_u();
    if u.len() != cfg.input_dim() {
        return Err(Error::domain(format!(
            "input length {} does not match horizon*n_u = {}",
            u.len(),
            cfg.input_dim()
        )));
    }
    check_sample_dim(n_z * n_z, delta)?;
    let mut z = cfg.z0.clone();
    let mut next = vec![0.0; n_z];
    for t in 0..cfg.horizon {
        for i in 0..n_z {
            let mut acc = 0.0;
            for j in 0..n_z {
                acc += (cfg.a0[i][j] + delta[i * n_z + j]) * z[j];
            }
            for k in 0..n_u {
                acc += cfg.b[i][k] * u[t * n_u + k];
            }
            next[i] = acc;
        }
        std::mem::swap(&mut z, &mut next);
    }
    Ok(z)
}

/// Terminal-state residual decomposition: z_ref - z(u, delta) = c - G u,
/// with c the zero-input residual and G the input-to-terminal-state map.
fn residual_affine(cfg: &FhcConfig, delta: &Sample) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n_z = cfg.n_z();
    let nu = cfg.input_dim();
    let zero_u = vec![0.0; nu];
    let z_free = fhc_simulate(cfg, &zero_u, delta)?;
    let c: Vec<f64> = cfg.z_ref.iter().zip(&z_free).map(|(r, z)| r - z).collect();
    let mut g = vec![vec![0.0; nu]; n_z];
    let zero_state = FhcConfig {
        z0: vec![0.0; n_z],
        ..cfg.clone()
    };
    for k in 0..nu {
        let mut e = vec![0.0; nu];
        e[k] = 1.0;
        let col = fhc_simulate(&zero_state, &e, delta)?;
        for i in 0..n_z {
            g[i][k] = col[i];
        }
    }
    Ok((c, g))
}

fn exact_objective(cfg: &FhcConfig, u: &[f64], sample_sets: &[Vec<Sample>]) -> Result<(f64, Vec<f64>)> {
    let mut obj = cfg.lambda * u.iter().map(|v| v * v).sum::<f64>();
    let mut r2 = Vec::with_capacity(sample_sets.len());
    for (j, set) in sample_sets.iter().enumerate() {
        let mut worst = 0.0f64;
        for delta in set {
            let z = fhc_simulate(cfg, u, delta)?;
            let d2: f64 = cfg
                .z_ref
                .iter()
                .zip(&z)
                .map(|(r, zi)| (r - zi) * (r - zi))
                .sum();
            worst = worst.max(d2);
        }
        obj += cfg.sigmas[j] * worst;
        r2.push(worst);
    }
    Ok((obj, r2))
}

#[derive(Debug, Clone)]
pub struct Fhc {
    cfg: FhcConfig,
}

impl Fhc {
    pub fn new(cfg: FhcConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Fhc { cfg })
    }

    pub fn config(&self) -> &FhcConfig {
        &self.cfg
    }
}

impl ScenarioProblem for Fhc {
    fn decision_dim(&self) -> usize {
        self.cfg.input_dim() + self.cfg.sigmas.len()
    }

    fn sample_dim(&self) -> usize {
        self.cfg.n_z() * self.cfg.n_z()
    }

    fn constraint_count(&self) -> usize {
        self.cfg.sigmas.len()
    }

    fn support(&self, j: usize) -> SupportBounds {
        match &self.cfg.supports {
            Some(sup) => SupportBounds::new(sup[j][0], sup[j][1]).expect("validated supports"),
            None => SupportBounds::new(1, self.cfg.input_dim() as u64 + 1).expect("static bounds"),
        }
    }

    fn draw(&self, _j: usize, rng: &mut dyn rand::RngCore) -> Sample {
        let d = self.sample_dim();
        if self.cfg.rho == 0.0 {
            return vec![0.0; d];
        }
        (0..d).map(|_| rng.gen_range(-self.cfg.rho..self.cfg.rho)).collect()
    }

    fn solve(&self, sample_sets: &[Vec<Sample>]) -> Result<Solution> {
        let cfg = &self.cfg;
        let nu_dim = cfg.input_dim();
        let n_z = cfg.n_z();
        let n_con = cfg.sigmas.len();
        if sample_sets.len() != n_con {
            return Err(Error::domain(format!(
                "expected {n_con} sample sets, got {}",
                sample_sets.len()
            )));
        }
        if sample_sets.iter().any(|s| s.is_empty()) {
            return Err(Error::DegenerateInput("every fhc sample set must be nonempty".to_string()));
        }

        // Variables: [u (nu_dim), R_1..R_nu]. Objective
        // lambda ||u||^2 + sum_j sigma_j R_j^2 as (1/2) x' P x.
        let n_var = nu_dim + n_con;
        let mut p_diag = vec![2.0 * cfg.lambda; n_var];
        for (j, s) in cfg.sigmas.iter().enumerate() {
            p_diag[nu_dim + j] = 2.0 * s;
        }
        let p = CscMatrix::new_from_triplets(
            n_var,
            n_var,
            (0..n_var).collect(),
            (0..n_var).collect(),
            p_diag,
        );
        let q = vec![0.0; n_var];

        // One second-order cone per sample: (R_j, c_delta - G_delta u) with
        // s = b - A x.
        let mut ti = Vec::new();
        let mut tj = Vec::new();
        let mut tv = Vec::new();
        let mut b = Vec::new();
        let mut cones = Vec::new();
        let mut row = 0usize;
        for (j, set) in sample_sets.iter().enumerate() {
            for delta in set {
                let (c, g) = residual_affine(cfg, delta)?;
                ti.push(row);
                tj.push(nu_dim + j);
                tv.push(-1.0);
                b.push(0.0);
                row += 1;
                for i in 0..n_z {
                    for k in 0..nu_dim {
                        if g[i][k] != 0.0 {
                            ti.push(row);
                            tj.push(k);
                            tv.push(g[i][k]);
                        }
                    }
                    b.push(c[i]);
                    row += 1;
                }
                cones.push(SupportedConeT::SecondOrderConeT(n_z + 1));
            }
        }
        let a = CscMatrix::new_from_triplets(row, n_var, ti, tj, tv);

        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(2000)
            .build()
            .map_err(|e| Error::Config(format!("solver settings: {e}")))?;
        let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings);
        solver.solve();
        let sol = &solver.solution;
        match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => {}
            status => {
                return Err(Error::Nonconvergence {
                    message: format!("conic solver stopped with status {status:?}"),
                    best_objective: sol.obj_val,
                    residual: sol.r_prim,
                })
            }
        }
        let u = &sol.x[..nu_dim];

        // Report the attained per-set maxima so every solve-set sample sits
        // inside its own radius exactly.
        let (objective, r2) = exact_objective(cfg, u, sample_sets)?;
        let mut x = u.to_vec();
        x.extend(r2.iter().map(|v| v.sqrt()));
        Ok(Solution {
            x,
            objective,
            support_count: None,
        })
    }

    fn violated(&self, j: usize, solution: &Solution, sample: &Sample) -> bool {
        let nu_dim = self.cfg.input_dim();
        let u = &solution.x[..nu_dim];
        let r = solution.x[nu_dim + j];
        let z = match fhc_simulate(&self.cfg, u, sample) {
            Ok(z) => z,
            Err(_) => return true,
        };
        let d2: f64 = self
            .cfg
            .z_ref
            .iter()
            .zip(&z)
            .map(|(rf, zi)| (rf - zi) * (rf - zi))
            .sum();
        d2 > r * r * (1.0 + 1e-9) + 1e-15
    }
}
