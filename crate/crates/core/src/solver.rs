//! Primal-dual (Chambolle–Pock) solver for the relaxed two-phase
//! segmentation subproblem
//!
//! ```text
//!   min_{u ∈ [0,1]}  (1/α) Σ u·d  +  TV_γ(u)  −  <u, p_breg>
//! ```
//!
//! where `d = (f − c_in)² − (f − c_out)²` is the pointwise data term. The dual
//! variable lives in the unit ball of γ*, so the projection does not depend on
//! α; the data term carries the 1/α instead.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gamma::{tv_value, GammaNorm};
use crate::grid::{divergence_at, operator_norm_bound, DualField, ImageGrid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tau: f64,
    pub sigma: f64,
    pub theta: f64,
    pub max_inner_its: usize,
    /// Stop once the mean absolute change of `u` per iteration drops below this.
    pub tol: f64,
    pub mu: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let step = 1.0 / operator_norm_bound().sqrt();
        Self {
            tau: step,
            sigma: step,
            theta: 1.0,
            max_inner_its: 1000,
            tol: 1e-6,
            mu: 0.5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.tau > 0.0) || !(self.sigma > 0.0) {
            return bad(format!("steps must be positive (tau={}, sigma={})", self.tau, self.sigma));
        }
        // Small slack so the default 1/sqrt(8) pair passes despite rounding.
        if self.tau * self.sigma * operator_norm_bound() > 1.0 + 1e-12 {
            return bad(format!(
                "tau*sigma*8 = {} exceeds 1",
                self.tau * self.sigma * operator_norm_bound()
            ));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return bad(format!("theta {} outside [0, 1]", self.theta));
        }
        if self.max_inner_its == 0 {
            return bad("max_inner_its must be at least 1".into());
        }
        if !(self.tol >= 0.0) {
            return bad(format!("tol {} must be non-negative", self.tol));
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return bad(format!("mu {} outside (0, 1)", self.mu));
        }
        Ok(())
    }
}

/// Primal iterate, its extrapolation and the dual iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerState {
    pub u: ImageGrid,
    pub u_bar: ImageGrid,
    pub p: DualField,
}

impl InnerState {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            u: ImageGrid::zeros(width, height),
            u_bar: ImageGrid::zeros(width, height),
            p: DualField::zeros(width, height),
        }
    }

    pub fn extent(&self) -> (usize, usize) {
        self.u.extent()
    }
}

#[derive(Debug, Clone)]
pub struct InnerOutcome {
    pub state: InnerState,
    pub iterations: usize,
    pub converged: bool,
}

/// `(f − c_in)² − (f − c_out)²`: negative where `f` is closer to `c_in`,
/// i.e. where the `u = 1` phase is favoured.
pub fn data_term(f: &ImageGrid, c_in: f64, c_out: f64) -> ImageGrid {
    f.map(|v| (v - c_in).powi(2) - (v - c_out).powi(2))
}

/// Resolvent of the primal part: `clamp(ũ − (step/α)(d − α p_breg), 0, 1)`.
pub fn prox_primal(u_tilde: &ImageGrid, step: f64, data: &ImageGrid, alpha: f64, p_breg: &ImageGrid) -> ImageGrid {
    let forcing = data.zip_map(p_breg, |d, p| step * (d / alpha - p));
    u_tilde.zip_map(&forcing, |u, w| (u - w).clamp(0.0, 1.0))
}

/// Binary mask `v >= mu`.
pub fn threshold(v: &ImageGrid, mu: f64) -> ImageGrid {
    v.map(|x| if x >= mu { 1.0 } else { 0.0 })
}

/// Fixed data of one relaxed segmentation subproblem.
#[derive(Debug, Clone)]
pub struct CvProblem {
    pub data: ImageGrid,
    pub alpha: f64,
    pub gamma: GammaNorm,
}

impl CvProblem {
    pub fn new(data: ImageGrid, alpha: f64, gamma: GammaNorm) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
        }
        Ok(Self { data, alpha, gamma })
    }

    pub fn from_image(f: &ImageGrid, c_in: f64, c_out: f64, alpha: f64, gamma: GammaNorm) -> Result<Self> {
        Self::new(data_term(f, c_in, c_out), alpha, gamma)
    }

    /// `Σ u·d + α TV_γ(u) − α <u, p_breg>`.
    pub fn energy(&self, u: &ImageGrid, p_breg: &ImageGrid) -> f64 {
        u.dot(&self.data) + self.alpha * tv_value(self.gamma, u) - self.alpha * u.dot(p_breg)
    }
}

/// Runs the primal-dual iteration from `warm` until the mean absolute change
/// of `u` drops below `cfg.tol` or `cfg.max_inner_its` is reached.
pub fn solve_inner(
    problem: &CvProblem,
    p_breg: &ImageGrid,
    warm: InnerState,
    cfg: &SolverConfig,
) -> Result<InnerOutcome> {
    cfg.validate()?;
    problem.data.ensure_same_extent(p_breg)?;
    problem.data.ensure_same_extent(&warm.u)?;
    problem.data.ensure_same_extent(&warm.u_bar)?;
    if warm.p.extent() != problem.data.extent() {
        return Err(Error::ExtentMismatch {
            expected: problem.data.extent(),
            actual: warm.p.extent(),
        });
    }

    let (width, height) = problem.data.extent();
    let n = width * height;
    let SolverConfig {
        tau, sigma, theta, ..
    } = *cfg;
    let gamma = problem.gamma;
    let forcing: Vec<f64> = problem
        .data
        .values()
        .par_iter()
        .zip(p_breg.values().par_iter())
        .map(|(&d, &pb)| tau * (d / problem.alpha - pb))
        .collect();

    let InnerState { mut u, mut u_bar, mut p } = warm;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_inner_its {
        iterations += 1;

        // p <- Proj(p + σ ∇ū)
        {
            let ub = u_bar.values();
            p.x.par_chunks_mut(width)
                .zip(p.y.par_chunks_mut(width))
                .enumerate()
                .for_each(|(i, (rx, ry))| {
                    let row = &ub[i * width..(i + 1) * width];
                    for j in 0..width {
                        let gx = if i + 1 < height { ub[(i + 1) * width + j] - row[j] } else { 0.0 };
                        let gy = if j + 1 < width { row[j + 1] - row[j] } else { 0.0 };
                        let [a, b] = gamma.project([rx[j] + sigma * gx, ry[j] + sigma * gy]);
                        rx[j] = a;
                        ry[j] = b;
                    }
                });
        }

        // u <- clamp(u + τ div p − forcing), ū <- u + θ(u − u_prev)
        let change: f64 = {
            let (px, py) = (&p.x, &p.y);
            let forcing = &forcing;
            u.values_mut()
                .par_chunks_mut(width)
                .zip(u_bar.values_mut().par_chunks_mut(width))
                .enumerate()
                .map(|(i, (ru, rb))| {
                    let mut acc = 0.0;
                    for j in 0..width {
                        let idx = i * width + j;
                        let div = divergence_at(px, py, width, height, i, j);
                        let old = ru[j];
                        let new = (old + tau * div - forcing[idx]).clamp(0.0, 1.0);
                        ru[j] = new;
                        rb[j] = new + theta * (new - old);
                        acc += (new - old).abs();
                    }
                    acc
                })
                .collect::<Vec<f64>>()
                .into_iter()
                .sum()
        };

        if !change.is_finite() {
            return Err(Error::Divergence {
                outer: None,
                iteration: iterations,
            });
        }
        if change / (n as f64) < cfg.tol {
            converged = true;
            break;
        }
    }

    Ok(InnerOutcome {
        state: InnerState { u, u_bar, p },
        iterations,
        converged,
    })
}

/// Single relaxed solve from a zero start; the building block of the forward sweep.
pub fn solve_cv(problem: &CvProblem, cfg: &SolverConfig) -> Result<InnerOutcome> {
    let (w, h) = problem.data.extent();
    solve_inner(problem, &ImageGrid::zeros(w, h), InnerState::zeros(w, h), cfg)
}
