//! Image files, run directories and the run manifest.
//!
//! A run directory holds `mask_####.pgm` (one binary mask per step, 0/255),
//! `response.csv`, `scale_map.pgm` (16-bit appearance indices), optionally
//! `scale_map.png`, and exactly one `manifest.txt`.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::bregman::{Constants, ScaleSequence};
use crate::error::{Error, Result};
use crate::gamma::GammaNorm;
use crate::grid::ImageGrid;
use crate::solver::SolverConfig;
use crate::spectral::{Direction, ScaleMap, SpectralComponent};

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const RESPONSE_FILE: &str = "response.csv";
pub const SCALE_MAP_FILE: &str = "scale_map.pgm";
pub const SCALE_MAP_PNG: &str = "scale_map.png";

pub fn mask_file_name(index: usize) -> String {
    format!("mask_{index:04}.pgm")
}

/// Raw samples of a grayscale PGM together with its maximum value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

impl Pgm {
    pub fn to_grid(&self) -> Result<ImageGrid> {
        let max = f64::from(self.maxval);
        ImageGrid::new(
            self.width,
            self.height,
            self.samples.iter().map(|&s| f64::from(s) / max).collect(),
        )
    }

    /// Quantizes `[0, 1]` values (clamped) to `maxval` levels.
    pub fn from_grid(grid: &ImageGrid, maxval: u16) -> Self {
        let max = f64::from(maxval);
        Self {
            width: grid.width(),
            height: grid.height(),
            maxval,
            samples: grid
                .values()
                .iter()
                .map(|&v| (v.clamp(0.0, 1.0) * max).round() as u16)
                .collect(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, self.maxval).into_bytes();
        if self.maxval < 256 {
            out.extend(self.samples.iter().map(|&s| s as u8));
        } else {
            for &s in &self.samples {
                out.extend_from_slice(&s.to_be_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut pos = 0;
        let mut token = || -> std::result::Result<String, String> {
            loop {
                while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                    pos += 1;
                }
                if pos < bytes.len() && bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                    continue;
                }
                break;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err("truncated header".into());
            }
            Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
        };
        let magic = token()?;
        if magic != "P5" {
            return Err(format!("expected binary PGM (P5), found `{magic}`"));
        }
        let mut num = |what: &str| -> std::result::Result<usize, String> {
            token()?.parse().map_err(|_| format!("bad {what} in header"))
        };
        let width = num("width")?;
        let height = num("height")?;
        let maxval = num("maxval")?;
        if width == 0 || height == 0 {
            return Err(format!("zero-dimension image {width}x{height}"));
        }
        if maxval == 0 || maxval > 65535 {
            return Err(format!("maxval {maxval} outside 1..=65535"));
        }
        // exactly one whitespace byte separates the header from the raster
        let start = pos + 1;
        let n = width * height;
        let bytes_per = if maxval < 256 { 1 } else { 2 };
        let raster = bytes.get(start..).unwrap_or(&[]);
        if raster.len() < n * bytes_per {
            return Err(format!("raster has {} bytes, expected {}", raster.len(), n * bytes_per));
        }
        let samples: Vec<u16> = if bytes_per == 1 {
            raster[..n].iter().map(|&b| u16::from(b)).collect()
        } else {
            raster[..2 * n].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
        };
        if let Some(s) = samples.iter().find(|&&s| usize::from(s) > maxval) {
            return Err(format!("sample {s} exceeds maxval {maxval}"));
        }
        Ok(Self {
            width,
            height,
            maxval: maxval as u16,
            samples,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes).map_err(|m| Error::format(path, m))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }
}

/// Loads an 8/16-bit binary PGM or a single-channel PNG, scaled to `[0, 1]`
/// by the format maximum.
pub fn load_image(path: &Path) -> Result<ImageGrid> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"P") {
        return Pgm::decode(&bytes).map_err(|m| Error::format(path, m))?.to_grid();
    }
    let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
        .map_err(|e| Error::format(path, format!("not a PGM (P5) or PNG file: {e}")))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::format(path, "zero-dimension image"));
    }
    let values: Vec<f64> = match img {
        image::DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(|v| f64::from(v) / 255.0).collect(),
        image::DynamicImage::ImageLuma16(buf) => buf.into_raw().into_iter().map(|v| f64::from(v) / 65535.0).collect(),
        other => {
            return Err(Error::format(
                path,
                format!(
                    "{} channels found; extract a single channel first (each channel is segmented separately)",
                    other.color().channel_count()
                ),
            ))
        }
    };
    ImageGrid::new(w, h, values)
}

/// Saves a `[0, 1]` image as PGM, 8-bit when `sixteen_bit` is false.
pub fn save_pgm(grid: &ImageGrid, path: &Path, sixteen_bit: bool) -> Result<()> {
    Pgm::from_grid(grid, if sixteen_bit { 65535 } else { 255 }).save(path)
}

/// 16-bit grayscale PNG when `path` ends in `.png`, 16-bit PGM otherwise.
/// Values are clamped to `[0, 1]`.
pub fn save_image(grid: &ImageGrid, path: &Path) -> Result<()> {
    let png = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if !png {
        return save_pgm(grid, path, true);
    }
    let raw = Pgm::from_grid(grid, 65535).samples;
    image::ImageBuffer::<image::Luma<u16>, _>::from_raw(grid.width() as u32, grid.height() as u32, raw)
        .expect("buffer matches extent")
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::format(path, e.to_string()))
}

/// Binary mask as 0/255 PGM.
pub fn save_mask(mask: &ImageGrid, path: &Path) -> Result<()> {
    let pgm = Pgm {
        width: mask.width(),
        height: mask.height(),
        maxval: 255,
        samples: mask.values().iter().map(|&v| if v >= 0.5 { 255 } else { 0 }).collect(),
    };
    pgm.save(path)
}

pub fn load_mask(path: &Path) -> Result<ImageGrid> {
    let pgm = Pgm::load(path)?;
    let half = f64::from(pgm.maxval) / 2.0;
    ImageGrid::new(
        pgm.width,
        pgm.height,
        pgm.samples.iter().map(|&s| if f64::from(s) >= half { 1.0 } else { 0.0 }).collect(),
    )
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_float(v: f64) -> String {
    format!("{v:?}")
}

pub fn response_csv(seq: &ScaleSequence, components: &[SpectralComponent]) -> String {
    let n = components.len();
    let mut out = String::from("k,S,alpha_effective\n");
    for (row, c) in components.iter().enumerate() {
        let alpha = match seq.direction {
            Direction::Inverse => seq.alphas_effective.get(row),
            // component k drops what existed last at the k-th smallest weight
            Direction::Forward => seq.alphas_effective.get(n - c.k),
        };
        let alpha = alpha.map(|&a| fmt_float(a)).unwrap_or_default();
        let _ = writeln!(out, "{row},{},{alpha}", fmt_float(c.response));
    }
    out
}

/// Parses `response.csv` into `(k, S, alpha_effective)` rows.
pub fn parse_response_csv(text: &str) -> std::result::Result<Vec<(usize, f64, f64)>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some("k,S,alpha_effective") => {}
        other => return Err(format!("unexpected header {other:?}")),
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 3 {
                return Err(format!("bad row `{l}`"));
            }
            let k = f[0].parse().map_err(|_| format!("bad k in `{l}`"))?;
            let s = f[1].parse().map_err(|_| format!("bad S in `{l}`"))?;
            let a = f[2].parse().map_err(|_| format!("bad alpha in `{l}`"))?;
            Ok((k, s, a))
        })
        .collect()
}

pub fn save_scale_map(map: &ScaleMap, path: &Path) -> Result<()> {
    let pgm = Pgm {
        width: map.width(),
        height: map.height(),
        maxval: 65535,
        samples: map.appearance_index.iter().map(|&k| k.min(65535) as u16).collect(),
    };
    pgm.save(path)
}

const VIRIDIS: [[f64; 3]; 9] = [
    [68.0, 1.0, 84.0],
    [71.0, 44.0, 122.0],
    [59.0, 81.0, 139.0],
    [44.0, 113.0, 142.0],
    [33.0, 144.0, 141.0],
    [39.0, 173.0, 129.0],
    [92.0, 200.0, 99.0],
    [170.0, 220.0, 50.0],
    [253.0, 231.0, 37.0],
];

/// Viridis-like colour for `t ∈ [0, 1]`.
pub fn colormap(t: f64) -> [u8; 3] {
    let x = t.clamp(0.0, 1.0) * (VIRIDIS.len() - 1) as f64;
    let i = (x.floor() as usize).min(VIRIDIS.len() - 2);
    let f = x - i as f64;
    let mut rgb = [0u8; 3];
    for (c, out) in rgb.iter_mut().enumerate() {
        *out = (VIRIDIS[i][c] + f * (VIRIDIS[i + 1][c] - VIRIDIS[i][c])).round() as u8;
    }
    rgb
}

/// Colour-coded scale map; pixels that never appear are black.
pub fn save_scale_map_png(map: &ScaleMap, path: &Path) -> Result<()> {
    let max = map.max_index().max(1) as f64;
    let mut buf = image::RgbImage::new(map.width() as u32, map.height() as u32);
    for (n, px) in buf.pixels_mut().enumerate() {
        let k = map.appearance_index[n];
        *px = if k == 0 {
            image::Rgb([0, 0, 0])
        } else {
            image::Rgb(colormap((k as f64 - 1.0) / (max - 1.0).max(1.0)))
        };
    }
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::format(path, e.to_string()))
}

/// Everything needed to reproduce, or post-process, a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    /// Input path, or `preset:NAME` for a rendered preset.
    pub input: String,
    pub direction: Direction,
    pub gamma: GammaNorm,
    pub alpha: Option<f64>,
    pub iterations: Option<usize>,
    pub alphas: Option<Vec<f64>>,
    pub solver: SolverConfig,
    pub constants: Constants,
    pub constants_estimated: bool,
    pub output_dir: PathBuf,
    /// Wall-clock seconds per stage, in execution order.
    pub timings: Vec<(String, f64)>,
}

impl RunManifest {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("tool_version", self.tool_version.clone());
        kv("command", self.command.clone());
        kv("input", self.input.clone());
        kv("direction", self.direction.to_string());
        kv("gamma", self.gamma.to_string());
        if let Some(a) = self.alpha {
            kv("alpha", fmt_float(a));
        }
        if let Some(k) = self.iterations {
            kv("iterations", k.to_string());
        }
        if let Some(list) = &self.alphas {
            kv("alphas", list.iter().map(|&a| fmt_float(a)).collect::<Vec<_>>().join(","));
        }
        let s = &self.solver;
        kv("tau", fmt_float(s.tau));
        kv("sigma", fmt_float(s.sigma));
        kv("theta", fmt_float(s.theta));
        kv("max_inner_its", s.max_inner_its.to_string());
        kv("tol", fmt_float(s.tol));
        kv("mu", fmt_float(s.mu));
        kv("c1", fmt_float(self.constants.background));
        kv("c2", fmt_float(self.constants.foreground));
        kv(
            "constants_source",
            if self.constants_estimated { "estimated" } else { "override" }.into(),
        );
        kv("output_dir", self.output_dir.display().to_string());
        for (stage, secs) in &self.timings {
            kv(&format!("time.{stage}"), format!("{secs:.3}"));
        }
        out
    }

    pub fn from_text(text: &str) -> std::result::Result<Self, String> {
        let mut m = RunManifest {
            tool_version: String::new(),
            command: String::new(),
            input: String::new(),
            direction: Direction::Inverse,
            gamma: GammaNorm::L2,
            alpha: None,
            iterations: None,
            alphas: None,
            solver: SolverConfig::default(),
            constants: Constants {
                background: 0.0,
                foreground: 1.0,
            },
            constants_estimated: true,
            output_dir: PathBuf::new(),
            timings: Vec::new(),
        };
        let float = |k: &str, v: &str| v.parse::<f64>().map_err(|_| format!("bad value for {k}: `{v}`"));
        let int = |k: &str, v: &str| v.parse::<usize>().map_err(|_| format!("bad value for {k}: `{v}`"));
        let (mut have_c1, mut have_c2) = (false, false);
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line.split_once(" = ").ok_or_else(|| format!("bad line `{line}`"))?;
            match k {
                "tool_version" => m.tool_version = v.into(),
                "command" => m.command = v.into(),
                "input" => m.input = v.into(),
                "direction" => m.direction = v.parse().map_err(|e: Error| e.to_string())?,
                "gamma" => m.gamma = v.parse().map_err(|e: Error| e.to_string())?,
                "alpha" => m.alpha = Some(float(k, v)?),
                "iterations" => m.iterations = Some(int(k, v)?),
                "alphas" => m.alphas = Some(v.split(',').map(|a| float(k, a)).collect::<std::result::Result<_, _>>()?),
                "tau" => m.solver.tau = float(k, v)?,
                "sigma" => m.solver.sigma = float(k, v)?,
                "theta" => m.solver.theta = float(k, v)?,
                "max_inner_its" => m.solver.max_inner_its = int(k, v)?,
                "tol" => m.solver.tol = float(k, v)?,
                "mu" => m.solver.mu = float(k, v)?,
                "c1" => {
                    m.constants.background = float(k, v)?;
                    have_c1 = true;
                }
                "c2" => {
                    m.constants.foreground = float(k, v)?;
                    have_c2 = true;
                }
                "constants_source" => m.constants_estimated = v == "estimated",
                "output_dir" => m.output_dir = PathBuf::from(v),
                _ => match k.strip_prefix("time.") {
                    Some(stage) => m.timings.push((stage.into(), float(k, v)?)),
                    None => return Err(format!("unknown key `{k}`")),
                },
            }
        }
        if m.command.is_empty() || !have_c1 || !have_c2 {
            return Err("manifest lacks command or constants".into());
        }
        Ok(m)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Self::from_text(&text).map_err(|m| Error::format(&path, m))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, self.to_text()).map_err(|e| Error::io(&path, e))
    }
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes masks, response, scale map (and its PNG when `colour` is set) and
/// the manifest into `dir`.
pub fn save_outputs(
    seq: &ScaleSequence,
    components: &[SpectralComponent],
    map: &ScaleMap,
    manifest: &RunManifest,
    dir: &Path,
    colour: bool,
) -> Result<()> {
    create_dir(dir)?;
    for (n, m) in seq.masks.iter().enumerate() {
        save_mask(m, &dir.join(mask_file_name(n + 1)))?;
    }
    write_file(&dir.join(RESPONSE_FILE), response_csv(seq, components).as_bytes())?;
    save_scale_map(map, &dir.join(SCALE_MAP_FILE))?;
    if colour {
        save_scale_map_png(map, &dir.join(SCALE_MAP_PNG))?;
    }
    manifest.save(dir)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// Masks `mask_0001.pgm`, `mask_0002.pgm`, ... of a run directory, in order.
pub fn load_masks(dir: &Path) -> Result<Vec<ImageGrid>> {
    let mut masks = Vec::new();
    loop {
        let path = dir.join(mask_file_name(masks.len() + 1));
        if !path.exists() {
            break;
        }
        masks.push(load_mask(&path)?);
    }
    if masks.is_empty() {
        return Err(Error::Sequence(format!("no mask files in {}", dir.display())));
    }
    Ok(masks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bregman::run_bregman;
    use crate::spectral::{scale_map, transform};

    #[test]
    fn eight_bit_full_scale_is_one() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.pgm");
        let pgm = Pgm {
            width: 2,
            height: 1,
            maxval: 255,
            samples: vec![255, 0],
        };
        pgm.save(&path).unwrap();
        let g = load_image(&path).unwrap();
        assert_eq!(g.values(), &[1.0, 0.0]);
    }

    #[test]
    fn sixteen_bit_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.pgm"), dir.path().join("b.pgm"));
        let samples: Vec<u16> = (0..64u32).map(|i| (i * 1031 % 65536) as u16).collect();
        let pgm = Pgm {
            width: 8,
            height: 8,
            maxval: 65535,
            samples,
        };
        pgm.save(&a).unwrap();
        let g = load_image(&a).unwrap();
        assert_eq!(g.values()[0], 0.0);
        save_pgm(&g, &b, true).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut bytes = b"P5\n# made by hand\n2 2\n# max\n255\n".to_vec();
        bytes.extend([0u8, 51, 102, 255]);
        let pgm = Pgm::decode(&bytes).unwrap();
        assert_eq!(pgm.samples, vec![0, 51, 102, 255]);
    }

    #[test]
    fn bad_pgms_are_rejected() {
        assert!(Pgm::decode(b"P2\n1 1\n255\n0").is_err());
        assert!(Pgm::decode(b"P5\n0 4\n255\n").is_err());
        assert!(Pgm::decode(b"P5\n2 2\n255\n\x00").is_err());
        assert!(Pgm::decode(b"P5\n1 1\n10\n\x20").is_err());
    }

    #[test]
    fn png_gray_loads_and_rgb_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let gray = dir.path().join("g.png");
        image::GrayImage::from_raw(2, 1, vec![0, 255]).unwrap().save(&gray).unwrap();
        assert_eq!(load_image(&gray).unwrap().values(), &[0.0, 1.0]);

        let g16 = dir.path().join("g16.png");
        image::ImageBuffer::<image::Luma<u16>, _>::from_raw(1, 1, vec![0u16]).unwrap().save(&g16).unwrap();
        assert_eq!(load_image(&g16).unwrap().values(), &[0.0]);

        let rgb = dir.path().join("c.png");
        image::RgbImage::new(2, 2).save(&rgb).unwrap();
        let err = load_image(&rgb).unwrap_err().to_string();
        assert!(err.contains("single channel"), "{err}");
    }

    #[test]
    fn png_sixteen_bit_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        let g = ImageGrid::new(3, 1, vec![0.0, 1.0, 12345.0 / 65535.0]).unwrap();
        save_image(&g, &path).unwrap();
        assert_eq!(load_image(&path).unwrap(), g);
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = load_image(Path::new("/nonexistent/x.pgm")).unwrap_err().to_string();
        assert!(err.contains("/nonexistent/x.pgm"), "{err}");
    }

    fn small_run(k: usize, alpha: f64) -> (ScaleSequence, Vec<SpectralComponent>, ScaleMap) {
        let f = ImageGrid::from_fn(24, 24, |i, j| {
            let (y, x) = (i as f64 - 11.5, j as f64 - 11.5);
            if y * y + x * x <= 64.0 { 1.0 } else { 0.0 }
        });
        let seq = run_bregman(&f, alpha, k, GammaNorm::L2, &SolverConfig::default(), None).unwrap();
        let comps = transform(&seq.masks, Direction::Inverse).unwrap();
        let map = scale_map(&comps).unwrap();
        (seq, comps, map)
    }

    fn manifest(seq: &ScaleSequence, dir: &Path) -> RunManifest {
        RunManifest {
            tool_version: "test".into(),
            command: "bregman".into(),
            input: "preset:test".into(),
            direction: Direction::Inverse,
            gamma: seq.gamma,
            alpha: seq.alpha,
            iterations: Some(seq.len()),
            alphas: None,
            solver: SolverConfig::default(),
            constants: seq.constants,
            constants_estimated: true,
            output_dir: dir.to_path_buf(),
            timings: vec![("solve".into(), 0.25)],
        }
    }

    #[test]
    fn run_directory_layout() {
        let dir = tempfile::tempdir().unwrap();
        let (seq, comps, map) = small_run(3, 50.0);
        save_outputs(&seq, &comps, &map, &manifest(&seq, dir.path()), dir.path(), true).unwrap();
        for n in 1..=3 {
            assert!(dir.path().join(mask_file_name(n)).exists());
        }
        assert!(!dir.path().join(mask_file_name(4)).exists());
        let rows = parse_response_csv(&fs::read_to_string(dir.path().join(RESPONSE_FILE)).unwrap()).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1].0, 1);
        assert_eq!(rows[1].2, 25.0);
        assert!(dir.path().join(SCALE_MAP_PNG).exists());
        assert_eq!(load_masks(dir.path()).unwrap(), seq.masks);
    }

    #[test]
    fn scale_map_pgm_peaks_at_k() {
        let dir = tempfile::tempdir().unwrap();
        // alpha so large that the disc only enters at the last step
        let (seq, comps, map) = small_run(4, 14.0);
        assert_eq!(map.max_index(), 4, "{:?}", seq.alphas_effective);
        save_scale_map(&map, &dir.path().join("m.pgm")).unwrap();
        let pgm = Pgm::load(&dir.path().join("m.pgm")).unwrap();
        assert_eq!(pgm.samples.iter().max(), Some(&4));
        assert_eq!(comps.len(), 4);
    }

    #[test]
    fn manifest_round_trip() {
        let (seq, _, _) = small_run(1, 10.0);
        let mut m = manifest(&seq, Path::new("/tmp/out"));
        m.alphas = Some(vec![3.0, 2.5, 0.1]);
        let back = RunManifest::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
        assert!(RunManifest::from_text("command = x\n").is_err());
        assert!(RunManifest::from_text("bogus = 1\n").is_err());
    }

    #[test]
    fn floats_round_trip_through_text() {
        for v in [0.1, 1.0 / 3.0, 25.0, 1e-300, 123456.789] {
            assert_eq!(fmt_float(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn colormap_ends() {
        assert_eq!(colormap(0.0), [68, 1, 84]);
        assert_eq!(colormap(1.0), [253, 231, 37]);
        assert_eq!(colormap(2.0), colormap(1.0));
    }
}
