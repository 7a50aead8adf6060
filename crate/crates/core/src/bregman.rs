//! Inverse scale space segmentation by Bregman iteration, and the forward
//! scale space obtained by sweeping the regularization weight.
//!
//! Step `k` (counting from 0) solves
//!
//! ```text
//!   min_{u ∈ [0,1]}  Σ u·d + α (TV_γ(u) − <u, p_k>),   p_k = −(k/α) d,
//! ```
//!
//! which is the plain relaxed problem at weight `α/(k+1)`: early steps only
//! admit large or high-contrast objects, later ones add finer structure.

use crate::error::{Error, Result};
use crate::gamma::GammaNorm;
use crate::grid::ImageGrid;
use crate::solver::{data_term, solve_inner, threshold, CvProblem, InnerState, SolverConfig};
use crate::spectral::{transform, Direction, SpectralComponent};

/// Region intensities of the two-phase model. The segmentation (`u = 1`)
/// is the phase closer to `foreground`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    pub background: f64,
    pub foreground: f64,
}

impl Constants {
    pub fn new(background: f64, foreground: f64) -> Result<Self> {
        if !background.is_finite() || !foreground.is_finite() {
            return Err(Error::Domain("constants must be finite".into()));
        }
        Ok(Self {
            background,
            foreground,
        })
    }

    pub fn data_term(&self, f: &ImageGrid) -> ImageGrid {
        data_term(f, self.foreground, self.background)
    }
}

/// Two-class means, starting from the split at half the maximum intensity.
///
/// The split threshold is then moved to the midpoint of the two means until
/// the partition stops changing. Under noise the hard split biases both means
/// outwards, so the result seeds an equal-variance two-Gaussian mixture fit
/// whose means are returned instead. On noise-free two-level data the
/// within-class variance is zero and the hard split is kept as is.
pub fn estimate_constants(f: &ImageGrid) -> Result<Constants> {
    let (lo, hi) = (f.min(), f.max());
    if lo == hi {
        return Err(Error::DegenerateInput(format!(
            "constant image (value {lo}) has no two phases"
        )));
    }
    let means = |t: f64| {
        let (mut s0, mut n0, mut s1, mut n1) = (0.0, 0usize, 0.0, 0usize);
        for &v in f.values() {
            if v < t {
                s0 += v;
                n0 += 1;
            } else {
                s1 += v;
                n1 += 1;
            }
        }
        (n0, n1, s0 / n0.max(1) as f64, s1 / n1.max(1) as f64)
    };

    let mut t = 0.5 * hi;
    let (n0, n1, _, _) = means(t);
    if n0 == 0 || n1 == 0 {
        t = 0.5 * (lo + hi);
    }
    let (mut n0, _, mut c0, mut c1) = means(t);
    for _ in 0..100 {
        let next = 0.5 * (c0 + c1);
        let (m0, m1, d0, d1) = means(next);
        if m0 == 0 || m1 == 0 {
            break;
        }
        let stable = m0 == n0;
        n0 = m0;
        c0 = d0;
        c1 = d1;
        if stable {
            break;
        }
    }
    let (c0, c1) = mixture_means(f.values(), c0, c1, n0);
    Constants::new(c0, c1)
}

/// EM for two Gaussians with a shared variance, started from a hard split.
fn mixture_means(values: &[f64], mut c0: f64, mut c1: f64, n0: usize) -> (f64, f64) {
    let n = values.len() as f64;
    let split = 0.5 * (c0 + c1);
    let mut var = values
        .iter()
        .map(|&v| if v < split { (v - c0).powi(2) } else { (v - c1).powi(2) })
        .sum::<f64>()
        / n;
    let spread = (c1 - c0).powi(2);
    // noise-free or nearly so: the hard split is already the answer
    if var <= 1e-3 * spread {
        return (c0, c1);
    }
    let mut w1 = 1.0 - n0 as f64 / n;
    for _ in 0..500 {
        let log_prior = (w1 / (1.0 - w1)).ln();
        let (mut r_sum, mut r_v, mut q_v) = (0.0, 0.0, 0.0);
        let mut resp = Vec::with_capacity(values.len());
        for &v in values {
            let z = log_prior + ((v - c0).powi(2) - (v - c1).powi(2)) / (2.0 * var);
            let r = 1.0 / (1.0 + (-z).exp());
            r_sum += r;
            r_v += r * v;
            q_v += (1.0 - r) * v;
            resp.push(r);
        }
        if r_sum <= 0.0 || r_sum >= n {
            break;
        }
        let d1 = r_v / r_sum;
        let d0 = q_v / (n - r_sum);
        let new_var = values
            .iter()
            .zip(&resp)
            .map(|(&v, &r)| (1.0 - r) * (v - d0).powi(2) + r * (v - d1).powi(2))
            .sum::<f64>()
            / n;
        let change = (d0 - c0).abs().max((d1 - c1).abs());
        c0 = d0;
        c1 = d1;
        var = new_var.max(f64::MIN_POSITIVE);
        w1 = (r_sum / n).clamp(1e-9, 1.0 - 1e-9);
        if change < 1e-10 {
            break;
        }
    }
    (c0, c1)
}

/// `α/(k+1)`: the weight of the plain model that Bregman step `k` solves.
pub fn effective_alpha(alpha: f64, k: usize) -> f64 {
    alpha / (k as f64 + 1.0)
}

/// `n` values from `hi` down to `lo`, evenly spaced in log scale.
pub fn log_spaced_alphas(hi: f64, lo: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![hi],
        _ => (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                (hi.ln() + t * (lo.ln() - hi.ln())).exp()
            })
            .collect(),
    }
}

/// `n` values from `hi` down to `lo`, evenly spaced.
pub fn linear_alphas(hi: f64, lo: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![hi],
        _ => (0..n)
            .map(|i| hi + (lo - hi) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Ordered record of a multiscale run.
///
/// For [`Direction::Inverse`] `masks[k]` is the thresholded result of Bregman
/// step `k`. For [`Direction::Forward`] `masks[i]` belongs to the `i`-th
/// (descending) weight of the sweep.
#[derive(Debug, Clone)]
pub struct ScaleSequence {
    pub direction: Direction,
    pub alpha: Option<f64>,
    pub gamma: GammaNorm,
    pub constants: Constants,
    pub masks: Vec<ImageGrid>,
    pub relaxed: Vec<ImageGrid>,
    pub alphas_effective: Vec<f64>,
    pub inner_iterations: Vec<usize>,
}

impl ScaleSequence {
    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    /// Finest segmentation: the last Bregman step, or the smallest sweep weight.
    pub fn final_mask(&self) -> Option<&ImageGrid> {
        self.masks.last()
    }

    pub fn components(&self) -> Result<Vec<SpectralComponent>> {
        transform(&self.masks, self.direction)
    }

    pub fn responses(&self) -> Result<Vec<f64>> {
        Ok(self.components()?.iter().map(|c| c.response).collect())
    }
}

/// The outer Bregman loop, one step at a time.
#[derive(Debug, Clone)]
pub struct BregmanIteration {
    problem: CvProblem,
    mu: f64,
    p_breg: ImageGrid,
    state: InnerState,
    k: usize,
}

/// Result of one Bregman step.
#[derive(Debug, Clone)]
pub struct BregmanStep {
    pub k: usize,
    pub mask: ImageGrid,
    pub relaxed: ImageGrid,
    pub alpha_effective: f64,
    pub inner_iterations: usize,
}

impl BregmanIteration {
    pub fn new(f: &ImageGrid, alpha: f64, gamma: GammaNorm, constants: Constants, mu: f64) -> Result<Self> {
        let problem = CvProblem::new(constants.data_term(f), alpha, gamma)?;
        let (w, h) = f.extent();
        Ok(Self {
            problem,
            mu,
            p_breg: ImageGrid::zeros(w, h),
            state: InnerState::zeros(w, h),
            k: 0,
        })
    }

    /// Index of the next step.
    pub fn k(&self) -> usize {
        self.k
    }

    /// The current multiplier `p_k`, a scalar field.
    pub fn p_breg(&self) -> &ImageGrid {
        &self.p_breg
    }

    pub fn problem(&self) -> &CvProblem {
        &self.problem
    }

    /// Solves step `k` warm-started from step `k − 1`, then advances
    /// `p_{k+1} = p_k − d/α`.
    pub fn step(&mut self, cfg: &SolverConfig) -> Result<BregmanStep> {
        let k = self.k;
        let warm = self.state.clone();
        let out = solve_inner(&self.problem, &self.p_breg, warm, cfg).map_err(|e| match e {
            Error::Divergence { iteration, .. } => Error::Divergence {
                outer: Some(k),
                iteration,
            },
            other => other,
        })?;
        self.state = out.state;
        let inv_alpha = 1.0 / self.problem.alpha;
        for (p, &d) in self.p_breg.values_mut().iter_mut().zip(self.problem.data.values()) {
            *p -= inv_alpha * d;
        }
        self.k += 1;
        Ok(BregmanStep {
            k,
            mask: threshold(&self.state.u, self.mu),
            relaxed: self.state.u.clone(),
            alpha_effective: effective_alpha(self.problem.alpha, k),
            inner_iterations: out.iterations,
        })
    }
}

fn resolve_constants(f: &ImageGrid, constants: Option<Constants>) -> Result<Constants> {
    match constants {
        Some(c) => Ok(c),
        None => estimate_constants(f),
    }
}

/// `iterations` Bregman steps starting from `u_0 = 0`, `p_0 = 0`.
pub fn run_bregman(
    f: &ImageGrid,
    alpha: f64,
    iterations: usize,
    gamma: GammaNorm,
    cfg: &SolverConfig,
    constants: Option<Constants>,
) -> Result<ScaleSequence> {
    if iterations == 0 {
        return Err(Error::Domain("at least one Bregman iteration is required".into()));
    }
    cfg.validate()?;
    let constants = resolve_constants(f, constants)?;
    let mut it = BregmanIteration::new(f, alpha, gamma, constants, cfg.mu)?;
    let mut seq = ScaleSequence {
        direction: Direction::Inverse,
        alpha: Some(alpha),
        gamma,
        constants,
        masks: Vec::with_capacity(iterations),
        relaxed: Vec::with_capacity(iterations),
        alphas_effective: Vec::with_capacity(iterations),
        inner_iterations: Vec::with_capacity(iterations),
    };
    for _ in 0..iterations {
        let step = it.step(cfg)?;
        seq.masks.push(step.mask);
        seq.relaxed.push(step.relaxed);
        seq.alphas_effective.push(step.alpha_effective);
        seq.inner_iterations.push(step.inner_iterations);
    }
    Ok(seq)
}

/// Independent relaxed solves for a strictly descending list of weights,
/// each warm-started from the previous one.
pub fn run_forward_sweep(
    f: &ImageGrid,
    alphas: &[f64],
    gamma: GammaNorm,
    cfg: &SolverConfig,
    constants: Option<Constants>,
) -> Result<ScaleSequence> {
    if alphas.is_empty() {
        return Err(Error::Domain("empty weight list".into()));
    }
    if alphas.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
        return Err(Error::Domain("weights must be positive and finite".into()));
    }
    if alphas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Domain("weights must be strictly descending".into()));
    }
    cfg.validate()?;
    let constants = resolve_constants(f, constants)?;
    let data = constants.data_term(f);
    let (w, h) = f.extent();
    let zero = ImageGrid::zeros(w, h);
    let mut state = InnerState::zeros(w, h);
    let mut seq = ScaleSequence {
        direction: Direction::Forward,
        alpha: None,
        gamma,
        constants,
        masks: Vec::with_capacity(alphas.len()),
        relaxed: Vec::with_capacity(alphas.len()),
        alphas_effective: alphas.to_vec(),
        inner_iterations: Vec::with_capacity(alphas.len()),
    };
    for (i, &alpha) in alphas.iter().enumerate() {
        let problem = CvProblem::new(data.clone(), alpha, gamma)?;
        let out = solve_inner(&problem, &zero, state, cfg).map_err(|e| match e {
            Error::Divergence { iteration, .. } => Error::Divergence {
                outer: Some(i),
                iteration,
            },
            other => other,
        })?;
        state = out.state;
        seq.masks.push(threshold(&state.u, cfg.mu));
        seq.relaxed.push(state.u.clone());
        seq.inner_iterations.push(out.iterations);
    }
    Ok(seq)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn effective_alpha_schedule() {
        assert_eq!(effective_alpha(50.0, 0), 50.0);
        assert_eq!(effective_alpha(50.0, 49), 1.0);
        let a: Vec<f64> = (0..20).map(|k| effective_alpha(7.0, k)).collect();
        for w in a.windows(3) {
            assert!(w[1] < w[0]);
            assert!(w[0] - w[1] > w[1] - w[2]);
        }
    }

    #[test]
    fn alpha_lists() {
        let lin = linear_alphas(50.0, 1.0, 50);
        assert_eq!(lin.len(), 50);
        assert_eq!(lin[0], 50.0);
        assert_eq!(lin[49], 1.0);
        assert!((lin[1] - 49.0).abs() < 1e-12);
        let log = log_spaced_alphas(100.0, 1.0, 3);
        assert!((log[1] - 10.0).abs() < 1e-12);
        assert!(log.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn constants_of_binary_image() {
        let f = ImageGrid::from_fn(10, 10, |i, _| if i == 0 { 1.0 } else { 0.0 });
        let c = estimate_constants(&f).unwrap();
        assert_eq!((c.background, c.foreground), (0.0, 1.0));
    }

    #[test]
    fn constants_of_three_level_image() {
        // Background majority at 0, two bright levels 0.55 and 1.
        let f = ImageGrid::from_fn(20, 20, |i, j| match (i, j) {
            (0..=3, 0..=4) => 1.0,
            (10..=12, 10..=14) => 0.55,
            _ => 0.0,
        });
        let c = estimate_constants(&f).unwrap();
        let expected = (20.0 * 1.0 + 15.0 * 0.55) / 35.0;
        assert!(c.background.abs() < 1e-6, "{c:?}");
        assert!((c.foreground - expected).abs() < 1e-6, "{c:?}");
    }

    #[test]
    fn constants_survive_heavy_noise() {
        use crate::phantom::{render, SceneSpec, Shape};
        for sigma in [0.25, 0.5, 0.75] {
            let spec = SceneSpec::new(128, 128)
                .with_shape(Shape::square(64.0, 64.0, 60.0, 1.0))
                .with_noise(sigma, 7);
            let c = estimate_constants(&render(&spec).unwrap()).unwrap();
            assert!(c.background.abs() < 0.05, "sigma={sigma}: {c:?}");
            assert!((c.foreground - 1.0).abs() < 0.05, "sigma={sigma}: {c:?}");
        }
    }

    #[test]
    fn constant_image_is_degenerate() {
        assert!(matches!(
            estimate_constants(&ImageGrid::filled(4, 4, 0.2)),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn all_bright_nonconstant_image_falls_back_to_midrange() {
        let f = ImageGrid::new(4, 1, vec![0.8, 0.8, 1.0, 1.0]).unwrap();
        let c = estimate_constants(&f).unwrap();
        assert_eq!((c.background, c.foreground), (0.8, 1.0));
    }

    #[test]
    fn multiplier_has_closed_form() {
        let f = ImageGrid::from_fn(12, 12, |i, j| ((i * 5 + j * 3) % 7) as f64 / 6.0);
        let c = Constants::new(0.1, 0.9).unwrap();
        let cfg = SolverConfig {
            max_inner_its: 5,
            ..SolverConfig::default()
        };
        let alpha = 3.0;
        let mut it = BregmanIteration::new(&f, alpha, GammaNorm::L2, c, 0.5).unwrap();
        let d = c.data_term(&f);
        for k in 1..=12 {
            it.step(&cfg).unwrap();
            for (p, dv) in it.p_breg().values().iter().zip(d.values()) {
                let closed = -(k as f64 / alpha) * dv;
                assert!((p - closed).abs() <= 1e-12, "k={k}: {p} vs {closed}");
            }
        }
    }

    #[test]
    fn forward_sweep_rejects_bad_lists() {
        let f = ImageGrid::from_fn(4, 4, |i, _| i as f64);
        let cfg = SolverConfig::default();
        assert!(run_forward_sweep(&f, &[], GammaNorm::L2, &cfg, None).is_err());
        assert!(run_forward_sweep(&f, &[1.0, 2.0], GammaNorm::L2, &cfg, None).is_err());
        assert!(run_forward_sweep(&f, &[2.0, 2.0], GammaNorm::L2, &cfg, None).is_err());
        assert!(run_forward_sweep(&f, &[2.0, -1.0], GammaNorm::L2, &cfg, None).is_err());
    }

    #[test]
    fn constant_image_sweep_is_flat() {
        let f = ImageGrid::filled(16, 16, 0.4);
        let cfg = SolverConfig::default();
        for (c, expect) in [((0.0, 1.0), 0.0), ((1.0, 0.0), 1.0)] {
            let constants = Constants::new(c.0, c.1).unwrap();
            let seq = run_forward_sweep(&f, &[4.0, 2.0, 1.0], GammaNorm::L2, &cfg, Some(constants)).unwrap();
            for m in &seq.masks {
                assert!(m.values().iter().all(|&v| v == expect));
            }
        }
    }

    #[test]
    fn zero_iterations_rejected() {
        let f = ImageGrid::from_fn(4, 4, |i, _| i as f64);
        assert!(run_bregman(&f, 1.0, 0, GammaNorm::L2, &SolverConfig::default(), None).is_err());
    }
}
