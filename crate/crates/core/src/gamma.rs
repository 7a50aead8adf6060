//! Generalized total variation `TV_γ(u) = Σ γ(∇u)` for the three norm bodies
//! γ ∈ {ℓ1, ℓ2, ℓ∞}.
//!
//! The unit ball of the dual norm γ* is the Wulff shape of γ and is the set
//! the dual variable of the primal-dual solver is projected onto. Indicator
//! functions of the Wulff shape are TV_γ eigenfunctions:
//!
//! | γ   | γ*  | Wulff shape           |
//! |-----|-----|-----------------------|
//! | ℓ1  | ℓ∞  | axis-aligned square   |
//! | ℓ2  | ℓ2  | disc                  |
//! | ℓ∞  | ℓ1  | diamond               |

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{gradient, DualField, ImageGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum GammaNorm {
    L1,
    #[default]
    L2,
    Linf,
}

impl GammaNorm {
    pub const ALL: [GammaNorm; 3] = [GammaNorm::L1, GammaNorm::L2, GammaNorm::Linf];

    #[inline]
    pub fn value(self, z: [f64; 2]) -> f64 {
        let [a, b] = z;
        match self {
            GammaNorm::L1 => a.abs() + b.abs(),
            GammaNorm::L2 => a.hypot(b),
            GammaNorm::Linf => a.abs().max(b.abs()),
        }
    }

    pub fn dual(self) -> GammaNorm {
        match self {
            GammaNorm::L1 => GammaNorm::Linf,
            GammaNorm::L2 => GammaNorm::L2,
            GammaNorm::Linf => GammaNorm::L1,
        }
    }

    /// γ*(z).
    #[inline]
    pub fn dual_value(self, z: [f64; 2]) -> f64 {
        self.dual().value(z)
    }

    /// Euclidean projection of a single vector onto `{z : γ*(z) <= 1}`.
    ///
    /// Points within `BALL_SLACK` of the ball are kept, so the rounding of a
    /// previous projection never triggers a second one.
    #[inline]
    pub fn project(self, z: [f64; 2]) -> [f64; 2] {
        let [a, b] = z;
        match self {
            // ℓ∞ box
            GammaNorm::L1 => [a.clamp(-1.0, 1.0), b.clamp(-1.0, 1.0)],
            // disc
            GammaNorm::L2 => {
                let n = a.hypot(b);
                if n <= 1.0 + BALL_SLACK {
                    z
                } else {
                    [a / n, b / n]
                }
            }
            // ℓ1 diamond
            GammaNorm::Linf => project_l1_ball(a, b),
        }
    }
}

const BALL_SLACK: f64 = 1e-14;

/// Sort-based simplex projection specialized to two coordinates.
#[inline]
fn project_l1_ball(a: f64, b: f64) -> [f64; 2] {
    let (ma, mb) = (a.abs(), b.abs());
    if ma + mb <= 1.0 + BALL_SLACK {
        return [a, b];
    }
    let (hi, lo) = if ma >= mb { (ma, mb) } else { (mb, ma) };
    let theta = (hi + lo - 1.0) / 2.0;
    let (phi, plo) = if lo > theta {
        (hi - theta, lo - theta)
    } else {
        (1.0, 0.0)
    };
    let (pa, pb) = if ma >= mb { (phi, plo) } else { (plo, phi) };
    [pa.copysign(a), pb.copysign(b)]
}

impl fmt::Display for GammaNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GammaNorm::L1 => "l1",
            GammaNorm::L2 => "l2",
            GammaNorm::Linf => "linf",
        })
    }
}

impl FromStr for GammaNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(GammaNorm::L1),
            "l2" => Ok(GammaNorm::L2),
            "linf" | "l-inf" | "inf" => Ok(GammaNorm::Linf),
            other => Err(Error::Domain(format!(
                "unknown norm `{other}` (expected l1, l2 or linf)"
            ))),
        }
    }
}

pub fn gamma_value(g: GammaNorm, z: [f64; 2]) -> f64 {
    g.value(z)
}

pub fn tv_value(g: GammaNorm, u: &ImageGrid) -> f64 {
    let p = gradient(u);
    p.x.par_chunks(u.width())
        .zip(p.y.par_chunks(u.width()))
        .map(|(rx, ry)| rx.iter().zip(ry).map(|(&a, &b)| g.value([a, b])).sum::<f64>())
        .collect::<Vec<_>>()
        .into_iter()
        .sum()
}

/// Pixelwise projection of `p` onto the unit ball of γ*.
pub fn project_dual_ball(g: GammaNorm, p: &DualField) -> DualField {
    let mut out = p.clone();
    project_dual_ball_in_place(g, &mut out.x, &mut out.y);
    out
}

pub(crate) fn project_dual_ball_in_place(g: GammaNorm, px: &mut [f64], py: &mut [f64]) {
    px.par_iter_mut().zip(py.par_iter_mut()).for_each(|(a, b)| {
        let [na, nb] = g.project([*a, *b]);
        *a = na;
        *b = nb;
    });
}

/// Largest γ*(p_ij) over the field.
pub fn max_dual_norm(g: GammaNorm, p: &DualField) -> f64 {
    p.x.iter()
        .zip(&p.y)
        .map(|(&a, &b)| g.dual_value([a, b]))
        .fold(0.0, f64::max)
}

/// Decay rate `Per/Area = 2/r` of a disc of radius `r` under the TV flow.
pub fn disc_eigenvalue(radius: f64) -> Result<f64> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::Domain(format!("disc radius must be positive, got {radius}")));
    }
    Ok(2.0 / radius)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenReport {
    /// Number of unit pixel edges separating the mask from the rest of the grid.
    pub perimeter: f64,
    pub area: f64,
    pub max_curvature: f64,
    pub satisfied: bool,
}

impl EigenReport {
    pub fn ratio(&self) -> f64 {
        self.perimeter / self.area
    }
}

/// Options for [`check_eigenfunction_condition`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureOptions {
    /// Boundary pixels fitted by each osculating circle.
    pub window: usize,
    /// Spacing, along the traced contour, between consecutive fit points.
    pub stride: usize,
    pub tolerance: f64,
}

impl Default for CurvatureOptions {
    fn default() -> Self {
        Self {
            window: 5,
            stride: 3,
            tolerance: 0.1,
        }
    }
}

/// Discrete check of `ess sup κ <= Per(C)/Area(C)` for a binary, connected mask.
///
/// Edges on the image frame do not count toward the perimeter (Neumann), so a
/// full-frame mask has zero perimeter and trivially passes.
pub fn check_eigenfunction_condition(mask: &ImageGrid) -> Result<EigenReport> {
    check_eigenfunction_condition_with(mask, CurvatureOptions::default())
}

pub fn check_eigenfunction_condition_with(
    mask: &ImageGrid,
    opts: CurvatureOptions,
) -> Result<EigenReport> {
    if !mask.is_binary() {
        return Err(Error::Diagnostic("mask is not binary".into()));
    }
    let (w, h) = mask.extent();
    let inside = |i: isize, j: isize| -> bool {
        i >= 0 && j >= 0 && (i as usize) < h && (j as usize) < w && mask.get(i as usize, j as usize) == 1.0
    };
    let area = mask.values().iter().filter(|&&v| v == 1.0).count();
    if area == 0 {
        return Err(Error::Diagnostic("mask is empty".into()));
    }
    if connected_components(mask) != 1 {
        return Err(Error::Diagnostic("mask has more than one connected component".into()));
    }

    let mut perimeter = 0usize;
    for i in 0..h {
        for j in 0..w {
            let v = mask.get(i, j);
            if i + 1 < h && mask.get(i + 1, j) != v {
                perimeter += 1;
            }
            if j + 1 < w && mask.get(i, j + 1) != v {
                perimeter += 1;
            }
        }
    }
    let area = area as f64;
    let perimeter = perimeter as f64;
    if perimeter == 0.0 {
        return Ok(EigenReport {
            perimeter,
            area,
            max_curvature: 0.0,
            satisfied: true,
        });
    }

    let contour = trace_contour(inside, h, w);
    let on_frame = |(i, j): (isize, isize)| i == 0 || j == 0 || i as usize == h - 1 || j as usize == w - 1;
    let n = contour.len();
    let window = opts.window.max(3);
    let stride = opts.stride.max(1).min((n / window).max(1));
    let half = (window / 2) as isize;
    let mut max_curvature: f64 = 0.0;
    let mut pts = Vec::with_capacity(window);
    for c in 0..n {
        if on_frame(contour[c]) {
            continue;
        }
        pts.clear();
        for t in -half..=half {
            let idx = (c as isize + t * stride as isize).rem_euclid(n as isize) as usize;
            let (i, j) = contour[idx];
            pts.push((i as f64, j as f64));
        }
        max_curvature = max_curvature.max(fit_circle_curvature(&pts));
    }

    let satisfied = max_curvature <= perimeter / area + opts.tolerance;
    Ok(EigenReport {
        perimeter,
        area,
        max_curvature,
        satisfied,
    })
}

fn connected_components(mask: &ImageGrid) -> usize {
    let (w, h) = mask.extent();
    let mut seen = vec![false; w * h];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if seen[start] || mask.values()[start] != 1.0 {
            continue;
        }
        count += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(n) = stack.pop() {
            let (i, j) = (n / w, n % w);
            let mut visit = |m: usize| {
                if !seen[m] && mask.values()[m] == 1.0 {
                    seen[m] = true;
                    stack.push(m);
                }
            };
            if i > 0 {
                visit(n - w);
            }
            if i + 1 < h {
                visit(n + w);
            }
            if j > 0 {
                visit(n - 1);
            }
            if j + 1 < w {
                visit(n + 1);
            }
        }
    }
    count
}

// Clockwise with rows growing downward, starting west.
const MOORE: [(isize, isize); 8] = [
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
];

/// Moore-neighbour tracing of the outer boundary, stopping when the
/// (pixel, backtrack) state repeats.
fn trace_contour(inside: impl Fn(isize, isize) -> bool, h: usize, w: usize) -> Vec<(isize, isize)> {
    let start = (0..h as isize)
        .flat_map(|i| (0..w as isize).map(move |j| (i, j)))
        .find(|&(i, j)| inside(i, j))
        .expect("non-empty mask");
    let mut contour = vec![start];
    let mut cur = start;
    let mut back = 0usize;
    let limit = 4 * h * w + 8;
    for _ in 0..limit {
        let mut next = None;
        for t in 1..=8 {
            let d = (back + t) % 8;
            let cand = (cur.0 + MOORE[d].0, cur.1 + MOORE[d].1);
            if inside(cand.0, cand.1) {
                let prev = (cur.0 + MOORE[(d + 7) % 8].0, cur.1 + MOORE[(d + 7) % 8].1);
                let rel = (prev.0 - cand.0, prev.1 - cand.1);
                let nb = MOORE.iter().position(|&o| o == rel).expect("adjacent backtrack");
                next = Some((cand, nb));
                break;
            }
        }
        let Some((cand, nb)) = next else {
            break; // isolated pixel
        };
        if cand == start && nb == 0 {
            break;
        }
        cur = cand;
        back = nb;
        contour.push(cur);
    }
    contour
}

/// Curvature of the algebraic least-squares circle through `pts`; 0 for
/// (nearly) collinear points.
fn fit_circle_curvature(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let (mx, my) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x / n, b + y / n));
    // Solve [Sxx Sxy Sx; Sxy Syy Sy; Sx Sy n] [D E F]^T = -[Sxz Syz Sz].
    let (mut sxx, mut sxy, mut syy, mut sx, mut sy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut sxz, mut syz, mut sz) = (0.0, 0.0, 0.0);
    for &(x, y) in pts {
        let (x, y) = (x - mx, y - my);
        let z = x * x + y * y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
        sx += x;
        sy += y;
        sxz += x * z;
        syz += y * z;
        sz += z;
    }
    let m = [[sxx, sxy, sx], [sxy, syy, sy], [sx, sy, n]];
    let rhs = [-sxz, -syz, -sz];
    let det = det3(m);
    let scale = sxx.max(syy).max(1.0);
    if det.abs() <= 1e-9 * scale * scale * n {
        return 0.0;
    }
    let solve = |col: usize| {
        let mut mm = m;
        for r in 0..3 {
            mm[r][col] = rhs[r];
        }
        det3(mm) / det
    };
    let (d, e, f) = (solve(0), solve(1), solve(2));
    let r2 = (d * d + e * e) / 4.0 - f;
    if r2 <= 0.0 {
        return 0.0;
    }
    1.0 / r2.sqrt()
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc(size: usize, r: f64) -> ImageGrid {
        let c = (size as f64 - 1.0) / 2.0;
        ImageGrid::from_fn(size, size, |i, j| {
            let (di, dj) = (i as f64 - c, j as f64 - c);
            if di * di + dj * dj <= r * r { 1.0 } else { 0.0 }
        })
    }

    #[test]
    fn gamma_values_of_three_four() {
        assert_eq!(gamma_value(GammaNorm::L2, [3.0, 4.0]), 5.0);
        assert_eq!(gamma_value(GammaNorm::L1, [3.0, 4.0]), 7.0);
        assert_eq!(gamma_value(GammaNorm::Linf, [3.0, 4.0]), 4.0);
    }

    #[test]
    fn dual_pairing() {
        assert_eq!(GammaNorm::L1.dual(), GammaNorm::Linf);
        assert_eq!(GammaNorm::L2.dual(), GammaNorm::L2);
        assert_eq!(GammaNorm::Linf.dual(), GammaNorm::L1);
    }

    #[test]
    fn projection_examples() {
        assert_eq!(GammaNorm::L2.project([0.3, 0.4]), [0.3, 0.4]);
        let [a, b] = GammaNorm::L2.project([3.0, 4.0]);
        assert!((a - 0.6).abs() < 1e-15 && (b - 0.8).abs() < 1e-15);
        assert_eq!(GammaNorm::Linf.project([1.0, 1.0]), [0.5, 0.5]);
        assert_eq!(GammaNorm::L1.project([2.0, -0.5]), [1.0, -0.5]);
    }

    #[test]
    fn l1_ball_projection_matches_grid_search() {
        // Oracle: brute-force nearest point of the diamond on a fine lattice.
        let targets = [[1.0, 1.0], [2.0, 0.2], [-0.3, 1.7], [-3.0, -2.5], [0.9, -0.6]];
        let steps = 2000;
        for z in targets {
            let mut best = (f64::INFINITY, [0.0, 0.0]);
            for a in 0..=steps {
                let x = -1.0 + 2.0 * a as f64 / steps as f64;
                let rem = 1.0 - x.abs();
                for b in 0..=steps {
                    let y = -rem + 2.0 * rem * b as f64 / steps as f64;
                    let d = (x - z[0]).powi(2) + (y - z[1]).powi(2);
                    if d < best.0 {
                        best = (d, [x, y]);
                    }
                }
            }
            let p = GammaNorm::Linf.project(z);
            assert!((p[0] - best.1[0]).abs() < 2e-3 && (p[1] - best.1[1]).abs() < 2e-3, "{z:?}: {p:?} vs {:?}", best.1);
        }
    }

    #[test]
    fn tv_of_constant_is_zero() {
        let u = ImageGrid::filled(9, 9, 0.4);
        for g in GammaNorm::ALL {
            assert_eq!(tv_value(g, &u), 0.0);
        }
    }

    #[test]
    fn tv_l1_of_square_is_anisotropic_perimeter() {
        for r in [1usize, 3, 10] {
            let u = ImageGrid::from_fn(r + 6, r + 6, |i, j| {
                if (3..3 + r).contains(&i) && (3..3 + r).contains(&j) { 1.0 } else { 0.0 }
            });
            assert_eq!(tv_value(GammaNorm::L1, &u), 4.0 * r as f64);
        }
    }

    #[test]
    fn tv_l2_of_disc_near_circumference() {
        // One-sided differences overcount staircase edges by roughly 16%.
        for r in [8.0, 16.0, 30.0] {
            let size = (2.0 * r) as usize + 10;
            let tv = tv_value(GammaNorm::L2, &disc(size, r));
            let per = std::f64::consts::TAU * r;
            assert!(tv >= per && tv <= 1.2 * per, "r={r}: {tv} vs {per}");
        }
    }

    #[test]
    fn disc_eigenvalue_examples() {
        assert_eq!(disc_eigenvalue(2.0).unwrap(), 1.0);
        assert_eq!(disc_eigenvalue(10.0).unwrap(), 0.2);
        assert_eq!(disc_eigenvalue(40.0).unwrap(), 0.05);
        assert!(disc_eigenvalue(0.0).is_err());
        assert!(disc_eigenvalue(-1.0).is_err());
    }

    #[test]
    fn disc_satisfies_eigen_condition() {
        let rep = check_eigenfunction_condition(&disc(64, 20.0)).unwrap();
        assert!(rep.satisfied, "{rep:?}");
        assert!((rep.max_curvature - 0.05).abs() < 0.04, "{rep:?}");
    }

    #[test]
    fn rectangle_reports_edge_geometry() {
        let rect = ImageGrid::from_fn(120, 60, |i, j| {
            if (10..40).contains(&i) && (10..80).contains(&j) { 1.0 } else { 0.0 }
        });
        let rep = check_eigenfunction_condition(&rect).unwrap();
        assert_eq!(rep.perimeter, 200.0);
        assert_eq!(rep.area, 2100.0);
        assert!((rep.ratio() - 200.0 / 2100.0).abs() < 1e-12);
        // corners drive the curvature above Per/Area + 0.1
        assert!(!rep.satisfied, "{rep:?}");
    }

    #[test]
    fn discs_pass_and_squares_fail() {
        for r in [10.0, 20.0, 32.0] {
            let rep = check_eigenfunction_condition(&disc(80, r)).unwrap();
            assert!(rep.satisfied, "r={r}: {rep:?}");
        }
        let square = ImageGrid::from_fn(80, 80, |i, j| {
            if (20..60).contains(&i) && (20..60).contains(&j) { 1.0 } else { 0.0 }
        });
        assert!(!check_eigenfunction_condition(&square).unwrap().satisfied);
    }

    #[test]
    fn full_frame_mask_is_degenerate_but_satisfied() {
        let rep = check_eigenfunction_condition(&ImageGrid::filled(10, 8, 1.0)).unwrap();
        assert_eq!(rep.perimeter, 0.0);
        assert!(rep.satisfied);
    }

    #[test]
    fn empty_or_disconnected_masks_are_rejected() {
        assert!(check_eigenfunction_condition(&ImageGrid::zeros(5, 5)).is_err());
        let two = ImageGrid::from_fn(6, 6, |i, j| if (i, j) == (1, 1) || (i, j) == (4, 4) { 1.0 } else { 0.0 });
        assert!(check_eigenfunction_condition(&two).is_err());
        let grey = ImageGrid::filled(3, 3, 0.5);
        assert!(check_eigenfunction_condition(&grey).is_err());
    }

    #[test]
    fn contour_of_square_visits_every_boundary_pixel_once() {
        let sq = ImageGrid::from_fn(8, 8, |i, j| if (2..6).contains(&i) && (2..6).contains(&j) { 1.0 } else { 0.0 });
        let c = trace_contour(
            |i, j| i >= 0 && j >= 0 && i < 8 && j < 8 && sq.get(i as usize, j as usize) == 1.0,
            8,
            8,
        );
        assert_eq!(c.len(), 12);
    }
}
