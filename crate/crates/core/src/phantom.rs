//! Synthetic test scenes and the preset catalogue.
//!
//! Coordinates are `(row, col)` in pixel units; pixel `(i, j)` covers
//! `[i, i+1) x [j, j+1)` and belongs to a shape when its centre
//! `(i + 0.5, j + 0.5)` does (no anti-aliasing). Shapes are painted over the
//! background in list order. Gaussian noise is added last from the
//! counter-based generator in [`crate::rng`], draw index = pixel index, and
//! is not clamped.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gamma::GammaNorm;
use crate::grid::ImageGrid;
use crate::rng::CounterRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShapeKind {
    Disc { radius: f64 },
    /// Axis-aligned square.
    Square { side: f64 },
    /// `|Δrow| + |Δcol| <= radius`.
    Diamond { radius: f64 },
    /// Axis-aligned rectangle.
    Rectangle { height: f64, width: f64 },
    /// Equilateral triangle, apex up, centroid at the shape centre.
    Triangle { side: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shape {
    pub kind: ShapeKind,
    /// (row, col)
    pub center: (f64, f64),
    pub intensity: f64,
}

impl Shape {
    pub fn disc(row: f64, col: f64, radius: f64, intensity: f64) -> Self {
        Self {
            kind: ShapeKind::Disc { radius },
            center: (row, col),
            intensity,
        }
    }

    pub fn square(row: f64, col: f64, side: f64, intensity: f64) -> Self {
        Self {
            kind: ShapeKind::Square { side },
            center: (row, col),
            intensity,
        }
    }

    pub fn diamond(row: f64, col: f64, radius: f64, intensity: f64) -> Self {
        Self {
            kind: ShapeKind::Diamond { radius },
            center: (row, col),
            intensity,
        }
    }

    pub fn rectangle(row: f64, col: f64, height: f64, width: f64, intensity: f64) -> Self {
        Self {
            kind: ShapeKind::Rectangle { height, width },
            center: (row, col),
            intensity,
        }
    }

    pub fn triangle(row: f64, col: f64, side: f64, intensity: f64) -> Self {
        Self {
            kind: ShapeKind::Triangle { side },
            center: (row, col),
            intensity,
        }
    }

    /// Half extents (rows, cols) of the bounding box.
    fn half_extent(&self) -> (f64, f64) {
        match self.kind {
            ShapeKind::Disc { radius } | ShapeKind::Diamond { radius } => (radius, radius),
            ShapeKind::Square { side } => (side / 2.0, side / 2.0),
            ShapeKind::Rectangle { height, width } => (height / 2.0, width / 2.0),
            // centroid sits 2/3 of the height below the apex
            ShapeKind::Triangle { side } => (side * 3f64.sqrt() / 3.0, side / 2.0),
        }
    }

    fn size_ok(&self) -> bool {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        match self.kind {
            ShapeKind::Disc { radius } | ShapeKind::Diamond { radius } => positive(radius),
            ShapeKind::Square { side } | ShapeKind::Triangle { side } => positive(side),
            ShapeKind::Rectangle { height, width } => positive(height) && positive(width),
        }
    }

    /// Whether the point `(y, x)` lies inside the closed shape.
    pub fn contains(&self, y: f64, x: f64) -> bool {
        let (dy, dx) = (y - self.center.0, x - self.center.1);
        match self.kind {
            ShapeKind::Disc { radius } => dy * dy + dx * dx <= radius * radius,
            ShapeKind::Square { side } => dy.abs() <= side / 2.0 && dx.abs() <= side / 2.0,
            ShapeKind::Diamond { radius } => dy.abs() + dx.abs() <= radius,
            ShapeKind::Rectangle { height, width } => dy.abs() <= height / 2.0 && dx.abs() <= width / 2.0,
            ShapeKind::Triangle { side } => {
                let h = side * 3f64.sqrt() / 2.0;
                // apex at dy = -2h/3, base at dy = +h/3
                let top = -2.0 * h / 3.0;
                let base = h / 3.0;
                if dy < top || dy > base {
                    return false;
                }
                let half_width = (dy - top) / h * side / 2.0;
                dx.abs() <= half_width
            }
        }
    }

    /// Binary mask of the shape alone.
    pub fn mask(&self, width: usize, height: usize) -> ImageGrid {
        ImageGrid::from_fn(width, height, |i, j| {
            if self.contains(i as f64 + 0.5, j as f64 + 0.5) {
                1.0
            } else {
                0.0
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub background: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub shapes: Vec<Shape>,
}

impl SceneSpec {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            background: 0.0,
            noise_sigma: 0.0,
            seed: 0,
            shapes: Vec::new(),
        }
    }

    pub fn with_shape(mut self, shape: Shape) -> Self {
        self.shapes.push(shape);
        self
    }

    pub fn with_noise(mut self, sigma: f64, seed: u64) -> Self {
        self.noise_sigma = sigma;
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Scene(m));
        if self.width == 0 || self.height == 0 {
            return bad(format!("zero extent {}x{}", self.width, self.height));
        }
        if !(0.0..1.0).contains(&self.background) {
            return bad(format!("background {} outside [0, 1)", self.background));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return bad(format!("noise sigma {} must be non-negative", self.noise_sigma));
        }
        for (n, s) in self.shapes.iter().enumerate() {
            if !(s.intensity > 0.0 && s.intensity <= 1.0) {
                return bad(format!("shape {n}: intensity {} outside (0, 1]", s.intensity));
            }
            if !s.size_ok() {
                return bad(format!("shape {n}: non-positive size"));
            }
            let (hy, hx) = s.half_extent();
            let (cy, cx) = s.center;
            if cy - hy < 0.0 || cx - hx < 0.0 || cy + hy > self.height as f64 || cx + hx > self.width as f64 {
                return bad(format!("shape {n} extends outside the {}x{} frame", self.width, self.height));
            }
        }
        Ok(())
    }

    /// Noise-free rendering.
    pub fn render_clean(&self) -> Result<ImageGrid> {
        self.validate()?;
        let w = self.width;
        let mut values = vec![self.background; w * self.height];
        values.par_chunks_mut(w).enumerate().for_each(|(i, row)| {
            let y = i as f64 + 0.5;
            for (j, v) in row.iter_mut().enumerate() {
                let x = j as f64 + 0.5;
                for s in &self.shapes {
                    if s.contains(y, x) {
                        *v = s.intensity;
                    }
                }
            }
        });
        ImageGrid::new(w, self.height, values)
    }

    /// Union of all shapes as a binary mask.
    pub fn foreground_mask(&self) -> ImageGrid {
        ImageGrid::from_fn(self.width, self.height, |i, j| {
            let (y, x) = (i as f64 + 0.5, j as f64 + 0.5);
            if self.shapes.iter().any(|s| s.contains(y, x)) { 1.0 } else { 0.0 }
        })
    }

    /// Visible part of shape `n` (later shapes paint over earlier ones).
    pub fn shape_mask(&self, n: usize) -> ImageGrid {
        ImageGrid::from_fn(self.width, self.height, |i, j| {
            let (y, x) = (i as f64 + 0.5, j as f64 + 0.5);
            let top = self.shapes.iter().rposition(|s| s.contains(y, x));
            if top == Some(n) { 1.0 } else { 0.0 }
        })
    }

    /// Plain-text `key = value` form, one shape per line.
    pub fn to_scene_text(&self) -> String {
        let mut out = String::from("# msseg scene\n");
        let _ = writeln!(out, "width = {}", self.width);
        let _ = writeln!(out, "height = {}", self.height);
        let _ = writeln!(out, "background = {:?}", self.background);
        let _ = writeln!(out, "noise_sigma = {:?}", self.noise_sigma);
        let _ = writeln!(out, "seed = {}", self.seed);
        for s in &self.shapes {
            let (r, c) = s.center;
            let line = match s.kind {
                ShapeKind::Disc { radius } => format!("disc = {r:?} {c:?} {radius:?}"),
                ShapeKind::Square { side } => format!("square = {r:?} {c:?} {side:?}"),
                ShapeKind::Diamond { radius } => format!("diamond = {r:?} {c:?} {radius:?}"),
                ShapeKind::Rectangle { height, width } => {
                    format!("rectangle = {r:?} {c:?} {height:?} {width:?}")
                }
                ShapeKind::Triangle { side } => format!("triangle = {r:?} {c:?} {side:?}"),
            };
            let _ = writeln!(out, "{line} {:?}", s.intensity);
        }
        out
    }

    pub fn from_scene_text(text: &str) -> Result<Self> {
        let mut spec = SceneSpec::new(0, 0);
        let (mut have_w, mut have_h) = (false, false);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: &str| Error::Scene(format!("line {}: {m}", lineno + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| v.parse::<f64>().map_err(|_| err(&format!("bad number `{v}`")));
            match key {
                "width" => {
                    spec.width = value.parse().map_err(|_| err("bad width"))?;
                    have_w = true;
                }
                "height" => {
                    spec.height = value.parse().map_err(|_| err("bad height"))?;
                    have_h = true;
                }
                "background" => spec.background = num(value)?,
                "noise_sigma" => spec.noise_sigma = num(value)?,
                "seed" => spec.seed = value.parse().map_err(|_| err("bad seed"))?,
                "disc" | "square" | "diamond" | "rectangle" | "triangle" => {
                    let nums = value.split_whitespace().map(num).collect::<Result<Vec<_>>>()?;
                    let want = if key == "rectangle" { 5 } else { 4 };
                    if nums.len() != want {
                        return Err(err(&format!("`{key}` takes {want} numbers")));
                    }
                    let kind = match key {
                        "disc" => ShapeKind::Disc { radius: nums[2] },
                        "square" => ShapeKind::Square { side: nums[2] },
                        "diamond" => ShapeKind::Diamond { radius: nums[2] },
                        "triangle" => ShapeKind::Triangle { side: nums[2] },
                        _ => ShapeKind::Rectangle {
                            height: nums[2],
                            width: nums[3],
                        },
                    };
                    spec.shapes.push(Shape {
                        kind,
                        center: (nums[0], nums[1]),
                        intensity: nums[want - 1],
                    });
                }
                other => return Err(err(&format!("unknown key `{other}`"))),
            }
        }
        if !have_w || !have_h {
            return Err(Error::Scene("width and height are required".into()));
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Paints the scene and adds noise.
pub fn render(spec: &SceneSpec) -> Result<ImageGrid> {
    let mut img = spec.render_clean()?;
    if spec.noise_sigma > 0.0 {
        let rng = CounterRng::new(spec.seed);
        let sigma = spec.noise_sigma;
        img.values_mut()
            .par_iter_mut()
            .enumerate()
            .for_each(|(n, v)| *v += sigma * rng.normal(n as u64));
    }
    Ok(img)
}

/// A named scene plus the run parameters it was calibrated for.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: String,
    pub spec: SceneSpec,
    pub gamma: GammaNorm,
    pub alpha: f64,
    pub iterations: usize,
    pub description: &'static str,
}

pub const PRESET_NAMES: &[&str] = &[
    "size-discs",
    "intensity-discs",
    "ambiguity-0.68",
    "ambiguity-0.69",
    "ambiguity-0.70",
    "noisy-squares-<sigma>",
    "eigenshapes-l1",
    "eigenshapes-l2",
    "eigenshapes-linf",
    "non-wulff-rect",
    "mixed-shapes",
    "arms-network",
];

/// Radii of the four `size-discs` discs, largest first.
pub const SIZE_DISC_RADII: [f64; 4] = [40.0, 30.0, 22.0, 16.0];
/// Intensities of the four `intensity-discs` discs, brightest first.
pub const INTENSITY_DISC_LEVELS: [f64; 4] = [1.0, 0.85, 0.70, 0.55];
pub const INTENSITY_DISC_RADIUS: f64 = 40.0;
/// Small bright disc and large dim disc of the ambiguity presets.
pub const AMBIGUITY_SMALL_RADIUS: f64 = 13.0;
pub const AMBIGUITY_LARGE_RADIUS: f64 = 27.0;
/// Side lengths of the `noisy-squares` squares, largest first.
pub const NOISY_SQUARE_SIDES: [f64; 4] = [80.0, 56.0, 40.0, 24.0];
pub const NOISY_SQUARES_SEED: u64 = 20_160_101;

/// Looks up a preset. All geometry (grid size, radii, positions) is chosen
/// for this implementation; see the constants above.
pub fn preset(name: &str) -> Result<Preset> {
    let p = |spec: SceneSpec, gamma, alpha, iterations, description| Preset {
        name: name.to_string(),
        spec,
        gamma,
        alpha,
        iterations,
        description,
    };
    let scene = |w, h, shapes: Vec<Shape>| {
        let mut s = SceneSpec::new(w, h);
        s.shapes = shapes;
        s
    };
    match name {
        "size-discs" => {
            let r = SIZE_DISC_RADII;
            Ok(p(
                scene(
                    256,
                    256,
                    vec![
                        Shape::disc(68.0, 68.0, r[0], 1.0),
                        Shape::disc(70.0, 186.0, r[1], 1.0),
                        Shape::disc(186.0, 70.0, r[2], 1.0),
                        Shape::disc(188.0, 184.0, r[3], 1.0),
                    ],
                ),
                GammaNorm::L2,
                200.0,
                30,
                "four unit-intensity discs of decreasing radius",
            ))
        }
        "intensity-discs" => {
            let r = INTENSITY_DISC_RADIUS;
            let c = INTENSITY_DISC_LEVELS;
            Ok(p(
                scene(
                    256,
                    256,
                    vec![
                        Shape::disc(64.0, 64.0, r, c[0]),
                        Shape::disc(64.0, 192.0, r, c[1]),
                        Shape::disc(192.0, 64.0, r, c[2]),
                        Shape::disc(192.0, 192.0, r, c[3]),
                    ],
                ),
                GammaNorm::L2,
                100.0,
                30,
                "four equal discs with intensities 1.0, 0.85, 0.70, 0.55",
            ))
        }
        "ambiguity-0.68" | "ambiguity-0.69" | "ambiguity-0.70" => {
            let level: f64 = name["ambiguity-".len()..].parse().expect("literal");
            Ok(p(
                scene(
                    128,
                    128,
                    vec![
                        Shape::disc(40.0, 40.0, AMBIGUITY_LARGE_RADIUS, level),
                        Shape::disc(90.0, 95.0, AMBIGUITY_SMALL_RADIUS, 1.0),
                    ],
                ),
                GammaNorm::L2,
                200.0,
                40,
                "small bright disc next to a large dim disc",
            ))
        }
        "eigenshapes-l1" => Ok(p(
            scene(
                192,
                192,
                vec![
                    Shape::square(52.0, 52.0, 64.0, 1.0),
                    Shape::square(48.0, 144.0, 40.0, 1.0),
                    Shape::square(144.0, 56.0, 28.0, 1.0),
                    Shape::square(144.0, 144.0, 20.0, 1.0),
                ],
            ),
            GammaNorm::L1,
            100.0,
            30,
            "axis-aligned squares (Wulff shape of the l1 norm)",
        )),
        "eigenshapes-l2" => Ok(p(
            scene(
                192,
                192,
                vec![
                    Shape::disc(52.0, 52.0, 32.0, 1.0),
                    Shape::disc(48.0, 144.0, 20.0, 1.0),
                    Shape::disc(144.0, 56.0, 14.0, 1.0),
                    Shape::disc(144.0, 144.0, 10.0, 1.0),
                ],
            ),
            GammaNorm::L2,
            100.0,
            30,
            "discs (Wulff shape of the l2 norm)",
        )),
        "eigenshapes-linf" => Ok(p(
            scene(
                192,
                192,
                vec![
                    Shape::diamond(52.0, 52.0, 40.0, 1.0),
                    Shape::diamond(48.0, 144.0, 26.0, 1.0),
                    Shape::diamond(144.0, 56.0, 18.0, 1.0),
                    Shape::diamond(144.0, 144.0, 13.0, 1.0),
                ],
            ),
            GammaNorm::Linf,
            100.0,
            30,
            "diamonds (Wulff shape of the l-infinity norm)",
        )),
        "non-wulff-rect" => Ok(p(
            scene(128, 128, vec![Shape::rectangle(64.0, 64.0, 30.0, 70.0, 1.0)]),
            GammaNorm::L1,
            40.0,
            10,
            "axis-aligned rectangle, an anisotropic TV eigenfunction",
        )),
        "mixed-shapes" => Ok(p(
            scene(
                256,
                256,
                vec![
                    Shape::disc(50.0, 50.0, 28.0, 1.0),
                    Shape::square(52.0, 200.0, 48.0, 1.0),
                    Shape::triangle(140.0, 128.0, 90.0, 1.0),
                    Shape::disc(210.0, 40.0, 18.0, 1.0),
                    Shape::square(212.0, 214.0, 30.0, 1.0),
                ],
            ),
            GammaNorm::L2,
            200.0,
            45,
            "discs, squares and a triangle under the l2 norm",
        )),
        "arms-network" => Ok(p(
            scene(
                256,
                256,
                vec![
                    Shape::disc(128.0, 128.0, 26.0, 1.0),
                    Shape::rectangle(128.0, 62.0, 16.0, 104.0, 1.0),
                    Shape::rectangle(128.0, 200.0, 10.0, 100.0, 1.0),
                    Shape::rectangle(58.0, 128.0, 100.0, 6.0, 1.0),
                    Shape::rectangle(200.0, 128.0, 96.0, 12.0, 1.0),
                ],
            ),
            GammaNorm::L2,
            100.0,
            40,
            "round core with four arms of different widths",
        )),
        other => {
            if let Some(rest) = other.strip_prefix("noisy-squares-") {
                let sigma: f64 = rest.parse().map_err(|_| Error::UnknownPreset(other.to_string()))?;
                if !(sigma >= 0.0) || !sigma.is_finite() {
                    return Err(Error::UnknownPreset(other.to_string()));
                }
                let s = NOISY_SQUARE_SIDES;
                return Ok(p(
                    scene(
                        256,
                        256,
                        vec![
                            Shape::square(64.0, 64.0, s[0], 1.0),
                            Shape::square(64.0, 184.0, s[1], 1.0),
                            Shape::square(184.0, 64.0, s[2], 1.0),
                            Shape::square(184.0, 184.0, s[3], 1.0),
                        ],
                    )
                    .with_noise(sigma, NOISY_SQUARES_SEED),
                    GammaNorm::L1,
                    100.0,
                    30,
                    "four squares of decreasing size with additive Gaussian noise",
                ));
            }
            Err(Error::UnknownPreset(other.to_string()))
        }
    }
}
