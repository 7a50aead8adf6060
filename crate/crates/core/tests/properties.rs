use msseg::bregman::{BregmanIteration, Constants};
use msseg::gamma::{max_dual_norm, project_dual_ball};
use msseg::grid::estimate_operator_norm_sq;
use msseg::io::Pgm;
use msseg::phantom::{render, SceneSpec, Shape};
use msseg::rng::CounterRng;
use msseg::solver::{prox_primal, solve_cv, threshold, InnerState};
use msseg::spectral::{detect_peaks, filter_scales, response, scale_map};
use msseg::*;
use proptest::prelude::*;

fn gamma_strategy() -> impl Strategy<Value = GammaNorm> {
    prop_oneof![Just(GammaNorm::L1), Just(GammaNorm::L2), Just(GammaNorm::Linf)]
}

/// Grid of the given extent filled with values from `vals` (cycled).
fn grid_from(w: usize, h: usize, vals: &[f64]) -> ImageGrid {
    ImageGrid::from_fn(w, h, |i, j| vals[(i * w + j) % vals.len()])
}

fn field_from(w: usize, h: usize, vals: &[f64]) -> DualField {
    let n = w * h;
    let x = (0..n).map(|k| vals[k % vals.len()]).collect();
    let y = (0..n).map(|k| vals[(k * 7 + 3) % vals.len()]).collect();
    DualField::new(w, h, x, y).unwrap()
}

fn sized_values() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (1usize..=64, 1usize..=64, prop::collection::vec(-10.0f64..10.0, 1..200))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_and_divergence_are_adjoint((w, h, vals) in sized_values(), shift in 0usize..50) {
        let u = grid_from(w, h, &vals);
        let rotated: Vec<f64> = vals.iter().cycle().skip(shift).take(vals.len()).copied().collect();
        let p = field_from(w, h, &rotated);
        let lhs = gradient(&u).dot(&p);
        let rhs = u.dot(&divergence(&p));
        prop_assert!((lhs + rhs).abs() <= 1e-10 * (u.norm() * p.norm() + 1.0));
    }

    #[test]
    fn gradient_respects_neumann_boundary((w, h, vals) in sized_values()) {
        let g = gradient(&grid_from(w, h, &vals));
        for j in 0..w {
            prop_assert_eq!(g.get(h - 1, j)[0], 0.0);
        }
        for i in 0..h {
            prop_assert_eq!(g.get(i, w - 1)[1], 0.0);
        }
    }

    #[test]
    fn tv_is_homogeneous_and_shift_invariant(
        (w, h, vals) in sized_values(), c in 0.0f64..5.0, shift in -3.0f64..3.0, g in gamma_strategy()
    ) {
        let u = grid_from(w, h, &vals);
        let tv = tv_value(g, &u);
        let scaled = tv_value(g, &u.map(|v| c * v));
        prop_assert!((scaled - c * tv).abs() <= 1e-9 * (1.0 + c * tv));
        let shifted = tv_value(g, &u.map(|v| v + shift));
        prop_assert!((shifted - tv).abs() <= 1e-9 * (1.0 + tv));
        prop_assert!(tv >= 0.0);
    }

    #[test]
    fn projection_is_idempotent_feasible_nonexpansive(
        a in prop::collection::vec(-5.0f64..5.0, 2..60),
        b in prop::collection::vec(-5.0f64..5.0, 2..60),
        g in gamma_strategy(),
    ) {
        let p = field_from(5, 3, &a);
        let q = field_from(5, 3, &b);
        let pp = project_dual_ball(g, &p);
        let qq = project_dual_ball(g, &q);
        prop_assert_eq!(&project_dual_ball(g, &pp), &pp);
        prop_assert!(max_dual_norm(g, &pp) <= 1.0 + 1e-12);
        let dist = |x: &DualField, y: &DualField| {
            x.x.iter().zip(&y.x).chain(x.y.iter().zip(&y.y)).map(|(s, t)| (s - t).powi(2)).sum::<f64>().sqrt()
        };
        prop_assert!(dist(&pp, &qq) <= dist(&p, &q) * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn dual_norm_matches_sampled_supremum(z0 in -4.0f64..4.0, z1 in -4.0f64..4.0, g in gamma_strategy()) {
        // sup over x of z·x / γ(x), sampled on a fine circle (γ is 1-homogeneous)
        let n = 20_000;
        let sup = (0..n)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / n as f64;
                let x = [t.cos(), t.sin()];
                (z0 * x[0] + z1 * x[1]) / g.value(x)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((sup - g.dual_value([z0, z1])).abs() <= 1e-3);
    }

    #[test]
    fn gamma_values_are_norms(z0 in -4.0f64..4.0, z1 in -4.0f64..4.0, c in 0.0f64..3.0, g in gamma_strategy()) {
        let v = g.value([z0, z1]);
        prop_assert!((g.value([c * z0, c * z1]) - c * v).abs() <= 1e-12 * (1.0 + v));
        prop_assert!(v > 0.0 || (z0 == 0.0 && z1 == 0.0));
        prop_assert_eq!(g.dual().dual(), g);
    }

    #[test]
    fn prox_stays_in_unit_interval(vals in prop::collection::vec(-3.0f64..3.0, 16), step in 0.01f64..2.0, alpha in 0.1f64..50.0) {
        let u = grid_from(4, 4, &vals);
        let d = grid_from(4, 4, &vals.iter().rev().copied().collect::<Vec<_>>());
        let out = prox_primal(&u, step, &d, alpha, &ImageGrid::zeros(4, 4));
        prop_assert!(out.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn pgm_round_trip_is_exact(samples in prop::collection::vec(any::<u16>(), 1..100), wide in any::<bool>()) {
        let maxval: u32 = if wide { 65535 } else { 255 };
        let samples: Vec<u16> = samples.into_iter().map(|s| (u32::from(s) % (maxval + 1)) as u16).collect();
        let pgm = Pgm { width: samples.len(), height: 1, maxval: maxval as u16, samples };
        let back = Pgm::decode(&pgm.encode()).unwrap();
        prop_assert_eq!(&back, &pgm);
        prop_assert_eq!(Pgm::from_grid(&back.to_grid().unwrap(), maxval as u16), pgm);
    }

    #[test]
    fn rng_is_deterministic_and_in_range(seed in any::<u64>(), n in 0u64..1_000_000) {
        let a = CounterRng::new(seed);
        let b = CounterRng::new(seed);
        prop_assert_eq!(a.bits(n), b.bits(n));
        let u = a.uniform(n);
        prop_assert!(u > 0.0 && u <= 1.0);
        prop_assert!(a.normal(n).is_finite());
    }

    #[test]
    fn peaks_are_local_maxima_above_floor(s in prop::collection::vec(0.0f64..100.0, 1..40)) {
        let total: f64 = s.iter().sum();
        for p in detect_peaks(&s, 0.02) {
            prop_assert!(s[p] >= 0.02 * total && s[p] > 0.0);
            if p > 0 { prop_assert!(s[p] >= s[p - 1]); }
            if p + 1 < s.len() { prop_assert!(s[p] >= s[p + 1]); }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn operator_norm_never_exceeds_bound(w in 1usize..=32, h in 1usize..=32) {
        prop_assert!(estimate_operator_norm_sq(w, h, 200) <= 8.0 + 1e-9);
    }

    #[test]
    fn components_telescope_to_last_mask(
        bits in prop::collection::vec(prop::collection::vec(any::<bool>(), 30), 1..8),
    ) {
        let masks: Vec<ImageGrid> = bits
            .iter()
            .map(|b| ImageGrid::from_fn(6, 5, |i, j| if b[i * 6 + j] { 1.0 } else { 0.0 }))
            .collect();
        let comps = transform(&masks, Direction::Inverse).unwrap();
        prop_assert_eq!(comps.len(), masks.len());
        let all = filter_scales(&comps, |_| true).unwrap();
        prop_assert_eq!(&all.signed, masks.last().unwrap());
        for (c, s) in comps.iter().zip(response(&comps)) {
            prop_assert_eq!(c.phi.values().iter().map(|v| v.abs()).sum::<f64>(), s);
        }
        // every pixel of the final mask has a first-appearance index
        let map = scale_map(&comps).unwrap();
        let last = masks.last().unwrap();
        for n in 0..last.len() {
            if last.values()[n] == 1.0 {
                prop_assert!(map.appearance_index[n] >= 1);
            }
        }
    }

    #[test]
    fn solver_keeps_iterates_feasible_and_lowers_energy(
        vals in prop::collection::vec(0.0f64..1.0, 64), alpha in 0.1f64..5.0, g in gamma_strategy(),
    ) {
        let f = grid_from(8, 8, &vals);
        let problem = CvProblem::from_image(&f, 1.0, 0.0, alpha, g).unwrap();
        let cfg = SolverConfig { max_inner_its: 20000, tol: 1e-12, ..SolverConfig::default() };
        let out = solve_cv(&problem, &cfg).unwrap();
        prop_assert!(out.state.u.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!(max_dual_norm(g, &out.state.p) <= 1.0 + 1e-12);
        let zero = ImageGrid::zeros(8, 8);
        let (e, e0) = (problem.energy(&out.state.u, &zero), problem.energy(&zero, &zero));
        prop_assert!(e <= e0 + 1e-6, "{} > {} after {} its, alpha {}", e, e0, out.iterations, alpha);
        prop_assert!(threshold(&out.state.u, 0.5).is_binary());
    }

    #[test]
    fn bregman_multiplier_has_closed_form(
        vals in prop::collection::vec(0.0f64..1.0, 100), alpha in 1.0f64..20.0, steps in 1usize..6,
    ) {
        let f = grid_from(10, 10, &vals);
        let c = Constants::new(0.2, 0.8).unwrap();
        let mut it = BregmanIteration::new(&f, alpha, GammaNorm::L2, c, 0.5).unwrap();
        let cfg = SolverConfig { max_inner_its: 50, ..SolverConfig::default() };
        let d = c.data_term(&f);
        for _ in 0..steps {
            it.step(&cfg).unwrap();
            let k = it.k() as f64;
            for (p, dv) in it.p_breg().values().iter().zip(d.values()) {
                prop_assert!((p + k / alpha * dv).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn rendering_is_reproducible(seed in any::<u64>(), sigma in 0.0f64..1.0, r in 2.0f64..10.0) {
        let spec = SceneSpec::new(24, 24)
            .with_shape(Shape::disc(12.0, 12.0, r, 0.9))
            .with_noise(sigma, seed);
        let a = render(&spec).unwrap();
        let b = render(&spec).unwrap();
        prop_assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
        let back = SceneSpec::from_scene_text(&spec.to_scene_text()).unwrap();
        prop_assert_eq!(back, spec);
    }

    #[test]
    fn warm_restart_continues_exactly(vals in prop::collection::vec(0.0f64..1.0, 36), split in 1usize..30) {
        let f = grid_from(6, 6, &vals);
        let problem = CvProblem::from_image(&f, 1.0, 0.0, 0.7, GammaNorm::L2).unwrap();
        let cfg = |n| SolverConfig { max_inner_its: n, tol: 0.0, ..SolverConfig::default() };
        let z = ImageGrid::zeros(6, 6);
        let whole = msseg::solver::solve_inner(&problem, &z, InnerState::zeros(6, 6), &cfg(40)).unwrap();
        let first = msseg::solver::solve_inner(&problem, &z, InnerState::zeros(6, 6), &cfg(split)).unwrap();
        let rest = msseg::solver::solve_inner(&problem, &z, first.state, &cfg(40 - split)).unwrap();
        prop_assert_eq!(whole.state.u, rest.state.u);
    }
}
