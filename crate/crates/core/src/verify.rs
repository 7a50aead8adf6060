//! Self-checks of the numerical building blocks, run by `msseg verify`.

use std::fmt;
use std::time::Instant;

use crate::bregman::{effective_alpha, BregmanIteration, Constants};
use crate::error::Result;
use crate::gamma::{project_dual_ball, GammaNorm};
use crate::grid::{divergence, estimate_operator_norm_sq, gradient, DualField, ImageGrid};
use crate::phantom::{preset, render, SceneSpec, Shape};
use crate::rng::CounterRng;
use crate::solver::{solve_cv, threshold, CvProblem, SolverConfig};
use crate::spectral::{transform, Direction};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Measured quantity against its tolerance.
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {:<36} {} ({:.2}s)",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail,
                c.seconds
            )?;
        }
        Ok(())
    }
}

pub const ADJOINT_TOL: f64 = 1e-10;
pub const FEASIBILITY_TOL: f64 = 1e-12;
pub const MULTIPLIER_TOL: f64 = 1e-12;
pub const MU_CHANGE_TOL: f64 = 0.01;
pub const EQUIVALENCE_TOL: f64 = 0.01;

fn random_grid(rng: &CounterRng, offset: u64, w: usize, h: usize, scale: f64) -> ImageGrid {
    ImageGrid::from_fn(w, h, |i, j| scale * rng.normal(offset + (i * w + j) as u64))
}

fn random_field(rng: &CounterRng, offset: u64, w: usize, h: usize, scale: f64) -> DualField {
    let n = (w * h) as u64;
    let x = (0..n).map(|k| scale * rng.normal(offset + k)).collect();
    let y = (0..n).map(|k| scale * rng.normal(offset + n + k)).collect();
    DualField::new(w, h, x, y).expect("consistent lengths")
}

fn timed(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> Result<CheckResult> {
    let t = Instant::now();
    let (passed, detail) = f()?;
    Ok(CheckResult {
        name: name.to_string(),
        passed,
        detail,
        seconds: t.elapsed().as_secs_f64(),
    })
}

/// `|<∇u, p> + <u, div p>| / (‖u‖‖p‖ + 1)` over random grids up to 64×64.
pub fn check_adjointness() -> Result<CheckResult> {
    timed("adjointness", || {
        let rng = CounterRng::new(11);
        let mut worst: f64 = 0.0;
        let sizes = [(1, 1), (1, 9), (2, 3), (7, 5), (17, 31), (64, 64)];
        for (n, &(w, h)) in sizes.iter().enumerate() {
            for trial in 0..4u64 {
                let base = (n as u64 * 4 + trial) * 1_000_000;
                let u = random_grid(&rng, base, w, h, 1.0);
                let p = random_field(&rng, base + 100_000, w, h, 1.0);
                let lhs = gradient(&u).dot(&p);
                let rhs = u.dot(&divergence(&p));
                worst = worst.max((lhs + rhs).abs() / (u.norm() * p.norm() + 1.0));
            }
        }
        Ok((worst <= ADJOINT_TOL, format!("max rel. error {worst:.2e} <= {ADJOINT_TOL:.0e}")))
    })
}

pub fn check_operator_norm() -> Result<CheckResult> {
    timed("operator norm <= 8", || {
        let est = [(1, 1), (2, 2), (5, 3), (64, 64)]
            .iter()
            .map(|&(w, h)| estimate_operator_norm_sq(w, h, 300))
            .fold(0.0, f64::max);
        Ok((est <= 8.0 + 1e-9, format!("power iteration max {est:.6}")))
    })
}

/// Idempotence, feasibility and non-expansiveness of the dual-ball projection.
pub fn check_projection(g: GammaNorm) -> Result<Vec<CheckResult>> {
    let rng = CounterRng::new(23 + g as u64);
    let (w, h) = (48, 48);
    let fields: Vec<DualField> = (0..8u64)
        .map(|t| random_field(&rng, t * 10_000, w, h, 0.5 + t as f64 * 0.5))
        .collect();
    let projected: Vec<DualField> = fields.iter().map(|p| project_dual_ball(g, p)).collect();
    let idem = timed(&format!("projection idempotence ({g})"), || {
        let bad = projected
            .iter()
            .map(|q| {
                let qq = project_dual_ball(g, q);
                (0..q.len())
                    .filter(|&k| qq.x[k].to_bits() != q.x[k].to_bits() || qq.y[k].to_bits() != q.y[k].to_bits())
                    .count()
            })
            .sum::<usize>();
        Ok((bad == 0, format!("{bad} pixels moved on re-projection")))
    })?;
    let feas = timed(&format!("projection feasibility ({g})"), || {
        let worst = projected
            .iter()
            .flat_map(|q| (0..q.len()).map(move |k| g.dual_value([q.x[k], q.y[k]])))
            .fold(0.0, f64::max);
        Ok((
            worst <= 1.0 + FEASIBILITY_TOL,
            format!("max dual norm {worst:.15} <= 1 + {FEASIBILITY_TOL:.0e}"),
        ))
    })?;
    let nonexp = timed(&format!("projection non-expansiveness ({g})"), || {
        let mut worst: f64 = 0.0;
        for a in 0..fields.len() {
            for b in a + 1..fields.len() {
                let diff = |p: &DualField, q: &DualField| {
                    p.x.iter()
                        .zip(&q.x)
                        .chain(p.y.iter().zip(&q.y))
                        .map(|(s, t)| (s - t) * (s - t))
                        .sum::<f64>()
                        .sqrt()
                };
                let ratio = diff(&projected[a], &projected[b]) / diff(&fields[a], &fields[b]);
                worst = worst.max(ratio);
            }
        }
        Ok((worst <= 1.0 + 1e-12, format!("max ‖Pp−Pq‖/‖p−q‖ = {worst:.6}")))
    })?;
    Ok(vec![idem, feas, nonexp])
}

fn small_scene() -> Result<ImageGrid> {
    let spec = SceneSpec::new(96, 96)
        .with_shape(Shape::disc(30.0, 30.0, 18.0, 1.0))
        .with_shape(Shape::disc(66.0, 68.0, 9.0, 1.0))
        .with_shape(Shape::square(70.0, 22.0, 14.0, 1.0))
        .with_noise(0.1, 5);
    render(&spec)
}

/// Closed-form multiplier and telescoping on one Bregman run.
pub fn check_bregman() -> Result<Vec<CheckResult>> {
    let f = small_scene()?;
    let constants = Constants::new(0.0, 1.0)?;
    let alpha = 20.0;
    let cfg = SolverConfig::default();
    let mut it = BregmanIteration::new(&f, alpha, GammaNorm::L2, constants, cfg.mu)?;
    let mut masks = Vec::new();
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let d = constants.data_term(&f);
    for _ in 0..12 {
        masks.push(it.step(&cfg)?.mask);
        let k = it.k() as f64;
        let err = it
            .p_breg()
            .values()
            .iter()
            .zip(d.values())
            .map(|(&p, &dv)| (p + k / alpha * dv).abs())
            .fold(0.0, f64::max);
        worst = worst.max(err);
    }
    let multiplier = CheckResult {
        name: "closed-form Bregman multiplier".into(),
        passed: worst <= MULTIPLIER_TOL,
        detail: format!("max |p_k + (k/α)d| = {worst:.2e} <= {MULTIPLIER_TOL:.0e}"),
        seconds: t.elapsed().as_secs_f64(),
    };
    let telescoping = timed("telescoping sum of components", || {
        let comps = transform(&masks, Direction::Inverse)?;
        let mut sum = vec![0.0; f.len()];
        for c in &comps {
            for (s, v) in sum.iter_mut().zip(c.phi.values()) {
                *s += v;
            }
        }
        let last = masks.last().expect("12 masks");
        let bad = sum.iter().zip(last.values()).filter(|(s, u)| s.to_bits() != u.to_bits()).count();
        Ok((bad == 0, format!("{bad} pixels differ from u_K")))
    })?;
    let equivalence = timed("Bregman step k = CV at α/(k+1)", || {
        let mut worst: f64 = 0.0;
        let mut segmented = 0;
        for (k, mask) in masks.iter().enumerate().take(6) {
            let problem = CvProblem::new(d.clone(), effective_alpha(alpha, k), GammaNorm::L2)?;
            let direct = threshold(&solve_cv(&problem, &cfg)?.state.u, cfg.mu);
            worst = worst.max(direct.count_mismatch(mask) as f64 / f.len() as f64);
            segmented = segmented.max(direct.count_foreground());
        }
        Ok((
            worst <= EQUIVALENCE_TOL && segmented > 0,
            format!("max mismatch {:.3}% <= {}%", 100.0 * worst, 100.0 * EQUIVALENCE_TOL),
        ))
    })?;
    Ok(vec![multiplier, telescoping, equivalence])
}

/// Thresholds one converged relaxed solution of the size-discs scene at
/// μ = 0.3, 0.5, 0.7 and reports the largest pixel change against μ = 0.5.
pub fn check_mu_insensitivity() -> Result<CheckResult> {
    timed("μ-insensitivity", || {
        let f = render(&preset("size-discs")?.spec)?;
        let constants = Constants::new(0.0, 1.0)?;
        // low enough that all four discs are segmented
        let problem = CvProblem::new(constants.data_term(&f), 6.0, GammaNorm::L2)?;
        let v = solve_cv(&problem, &SolverConfig::default())?.state.u;
        let base = threshold(&v, 0.5);
        let worst = [0.3, 0.7]
            .iter()
            .map(|&mu| threshold(&v, mu).count_mismatch(&base) as f64 / f.len() as f64)
            .fold(0.0, f64::max);
        Ok((
            worst <= MU_CHANGE_TOL && base.count_foreground() > 0,
            format!("max change {:.3}% <= {}%", 100.0 * worst, 100.0 * MU_CHANGE_TOL),
        ))
    })
}

pub fn run_suite() -> Result<VerifyReport> {
    let mut checks = vec![check_adjointness()?, check_operator_norm()?];
    for g in GammaNorm::ALL {
        checks.extend(check_projection(g)?);
    }
    checks.extend(check_bregman()?);
    checks.push(check_mu_insensitivity()?);
    Ok(VerifyReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cheap_checks_pass() {
        assert!(check_adjointness().unwrap().passed);
        assert!(check_operator_norm().unwrap().passed);
        for g in GammaNorm::ALL {
            for c in check_projection(g).unwrap() {
                assert!(c.passed, "{c:?}");
            }
        }
    }

    #[test]
    fn report_formats_one_line_per_check() {
        let report = VerifyReport {
            checks: vec![
                CheckResult {
                    name: "a".into(),
                    passed: true,
                    detail: "ok".into(),
                    seconds: 0.0,
                },
                CheckResult {
                    name: "b".into(),
                    passed: false,
                    detail: "bad".into(),
                    seconds: 0.0,
                },
            ],
        };
        let text = report.to_string();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("PASS a"));
        assert!(!report.all_passed());
        assert_eq!(report.get("b").unwrap().detail, "bad");
    }
}
