//! `msseg`: command-line front end for multiscale segmentation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use msseg::bregman::{log_spaced_alphas, BregmanIteration};
use msseg::io::{self, RunManifest};
use msseg::phantom::{self, SceneSpec};
use msseg::solver::{solve_cv, threshold};
use msseg::spectral::{self, filter_scales, peak_mass, DEFAULT_MIN_MASS_FRACTION};
use msseg::{
    estimate_constants, run_forward_sweep, Constants, CvProblem, Direction, Error, GammaNorm, ImageGrid,
    ScaleSequence, SolverConfig,
};

const EXIT_USAGE: u8 = 1;
const EXIT_DIVERGENCE: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "msseg", version, about = "Multiscale segmentation by inverse scale space")]
struct Cli {
    /// Worker threads; 1 gives bit-for-bit reproducible runs.
    #[arg(long, global = true, env = "MSSEG_THREADS")]
    threads: Option<usize>,

    /// Suppress per-step progress on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Single relaxed Chan-Vese solve.
    Segment(SegmentArgs),
    /// Bregman (inverse scale space) run with spectral outputs.
    Bregman(BregmanArgs),
    /// Forward scale space over a descending list of weights.
    Sweep(SweepArgs),
    /// Recompute response and scale map of a previous run.
    Spectrum(SpectrumArgs),
    /// Recombine a band of spectral components of a previous run.
    Filter(FilterArgs),
    /// Render a preset or scene file to an image.
    Phantom(PhantomArgs),
    /// Run the numerical invariant suite.
    Verify,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct Source {
    /// Grayscale PGM (P5, 8/16-bit) or single-channel PNG.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Built-in scene, rendered in memory (noise is not clamped).
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args, Debug)]
struct Model {
    /// Regularization weight [default: the preset's recommended value].
    #[arg(long)]
    alpha: Option<f64>,
    /// Norm inside the total variation: l1, l2 or linf [default: l2, or the preset's].
    #[arg(long, value_parser = parse_gamma)]
    gamma: Option<GammaNorm>,
    /// Background intensity (estimated when omitted).
    #[arg(long, requires = "c2")]
    c1: Option<f64>,
    /// Foreground intensity (estimated when omitted).
    #[arg(long, requires = "c1")]
    c2: Option<f64>,
}

#[derive(Args, Debug)]
struct Solver {
    /// Primal step size [default: 1/sqrt(8)].
    #[arg(long)]
    tau: Option<f64>,
    /// Dual step size [default: 1/sqrt(8)].
    #[arg(long)]
    sigma: Option<f64>,
    /// Extrapolation parameter [default: 1].
    #[arg(long)]
    theta: Option<f64>,
    /// Inner iteration budget per solve [default: 1000].
    #[arg(long)]
    max_inner_its: Option<usize>,
    /// Stop when the mean absolute change drops below this [default: 1e-6].
    #[arg(long)]
    tol: Option<f64>,
    /// Threshold applied to the relaxed solution [default: 0.5].
    #[arg(long)]
    mu: Option<f64>,
}

impl Solver {
    fn config(&self) -> SolverConfig {
        let d = SolverConfig::default();
        SolverConfig {
            tau: self.tau.unwrap_or(d.tau),
            sigma: self.sigma.unwrap_or(d.sigma),
            theta: self.theta.unwrap_or(d.theta),
            max_inner_its: self.max_inner_its.unwrap_or(d.max_inner_its),
            tol: self.tol.unwrap_or(d.tol),
            mu: self.mu.unwrap_or(d.mu),
        }
    }
}

#[derive(Args, Debug)]
struct SegmentArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    model: Model,
    #[command(flatten)]
    solver: Solver,
    /// Output directory.
    #[arg(long, default_value = "msseg-out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BregmanArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    model: Model,
    /// Number of Bregman steps K [default: the preset's recommended value].
    #[arg(long)]
    iters: Option<usize>,
    #[command(flatten)]
    solver: Solver,
    /// Output directory.
    #[arg(long, default_value = "msseg-out")]
    out: PathBuf,
    /// Skip the colour-coded scale map PNG.
    #[arg(long)]
    no_colormap: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    model: Model,
    /// Strictly descending weights `a1,a2,...`, or `log:HI:LO:N`.
    #[arg(long)]
    alphas: String,
    #[command(flatten)]
    solver: Solver,
    /// Output directory.
    #[arg(long, default_value = "msseg-out")]
    out: PathBuf,
    /// Skip the colour-coded scale map PNG.
    #[arg(long)]
    no_colormap: bool,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    /// Directory written by `bregman` or `sweep`.
    #[arg(long)]
    run: PathBuf,
    /// Where to write response and scale map [default: the run directory].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Minimum peak mass as a fraction of the total response.
    #[arg(long, default_value_t = DEFAULT_MIN_MASS_FRACTION)]
    min_mass: f64,
}

#[derive(Args, Debug)]
struct FilterArgs {
    /// Directory written by `bregman` or `sweep`.
    #[arg(long)]
    run: PathBuf,
    /// Inclusive 1-based component range `k1..k2`.
    #[arg(long, value_parser = parse_band)]
    band: (usize, usize),
    /// Output mask [default: RUN/filtered_K1-K2.pgm].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PhantomArgs {
    /// Preset: size-discs, intensity-discs, ambiguity-0.68|0.69|0.70, noisy-squares-SIGMA,
    /// eigenshapes-l1|l2|linf, non-wulff-rect, mixed-shapes, arms-network.
    #[arg(long, required_unless_present = "scene", conflicts_with = "scene")]
    preset: Option<String>,
    /// Plain-text scene file.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Image to write (.pgm, or .png for 16-bit grayscale PNG); values are clamped to [0, 1].
    #[arg(long)]
    out: PathBuf,
    /// Also write the scene description as text.
    #[arg(long)]
    scene_out: Option<PathBuf>,
}

fn parse_gamma(s: &str) -> Result<GammaNorm, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_alphas(s: &str) -> Result<Vec<f64>, String> {
    if let Some(rest) = s.strip_prefix("log:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let [hi, lo, n] = parts[..] else {
            return Err("expected log:HI:LO:N".into());
        };
        let hi: f64 = hi.parse().map_err(|_| format!("bad weight `{hi}`"))?;
        let lo: f64 = lo.parse().map_err(|_| format!("bad weight `{lo}`"))?;
        let n: usize = n.parse().map_err(|_| format!("bad count `{n}`"))?;
        if !(hi > lo && lo > 0.0 && n >= 2) {
            return Err("need HI > LO > 0 and N >= 2".into());
        }
        return Ok(log_spaced_alphas(hi, lo, n));
    }
    s.split(',')
        .map(|a| a.trim().parse::<f64>().map_err(|_| format!("bad weight `{a}`")))
        .collect()
}

fn parse_band(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once("..").ok_or("expected k1..k2")?;
    let a: usize = a.parse().map_err(|_| format!("bad index `{a}`"))?;
    let b: usize = b.parse().map_err(|_| format!("bad index `{b}`"))?;
    if a == 0 || b < a {
        return Err("need 1 <= k1 <= k2".into());
    }
    Ok((a, b))
}

/// Failure of a subcommand, carrying its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_divergence() { EXIT_DIVERGENCE } else { EXIT_USAGE },
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

type CliResult<T> = Result<T, Failure>;

struct Loaded {
    image: ImageGrid,
    label: String,
    preset: Option<phantom::Preset>,
}

fn load_source(src: &Source) -> CliResult<Loaded> {
    match (&src.input, &src.preset) {
        (Some(path), None) => Ok(Loaded {
            image: io::load_image(path)?,
            label: path.display().to_string(),
            preset: None,
        }),
        (None, Some(name)) => {
            let p = phantom::preset(name)?;
            Ok(Loaded {
                image: phantom::render(&p.spec)?,
                label: format!("preset:{name}"),
                preset: Some(p),
            })
        }
        _ => Err(usage("exactly one of --input and --preset is required")),
    }
}

struct Resolved {
    gamma: GammaNorm,
    constants: Constants,
    estimated: bool,
}

fn resolve_model(model: &Model, loaded: &Loaded) -> CliResult<Resolved> {
    let gamma = model
        .gamma
        .or(loaded.preset.as_ref().map(|p| p.gamma))
        .unwrap_or_default();
    let (constants, estimated) = match (model.c1, model.c2) {
        (Some(c1), Some(c2)) => (Constants::new(c1, c2)?, false),
        _ => (estimate_constants(&loaded.image)?, true),
    };
    Ok(Resolved {
        gamma,
        constants,
        estimated,
    })
}

fn alpha_or_preset(model: &Model, loaded: &Loaded) -> CliResult<f64> {
    model
        .alpha
        .or(loaded.preset.as_ref().map(|p| p.alpha))
        .ok_or_else(|| usage("--alpha is required"))
}

fn progress(quiet: bool, msg: std::fmt::Arguments<'_>) {
    if !quiet {
        eprintln!("{msg}");
    }
}

struct Timer(Vec<(String, f64)>, Instant);

impl Timer {
    fn new() -> Self {
        Timer(Vec::new(), Instant::now())
    }

    fn lap(&mut self, stage: &str) {
        self.0.push((stage.into(), self.1.elapsed().as_secs_f64()));
        self.1 = Instant::now();
    }
}

fn segment(args: &SegmentArgs, quiet: bool) -> CliResult<()> {
    let mut timer = Timer::new();
    let loaded = load_source(&args.source)?;
    let alpha = alpha_or_preset(&args.model, &loaded)?;
    let model = resolve_model(&args.model, &loaded)?;
    let cfg = args.solver.config();
    cfg.validate()?;
    timer.lap("load");

    let problem = CvProblem::new(model.constants.data_term(&loaded.image), alpha, model.gamma)?;
    let out = solve_cv(&problem, &cfg)?;
    let mask = threshold(&out.state.u, cfg.mu);
    timer.lap("solve");
    progress(
        quiet,
        format_args!(
            "segment: {} inner iterations{}, {} foreground pixels",
            out.iterations,
            if out.converged { "" } else { " (budget reached)" },
            mask.count_foreground()
        ),
    );

    io::create_dir(&args.out)?;
    io::save_mask(&mask, &args.out.join("mask.pgm"))?;
    io::save_pgm(&out.state.u, &args.out.join("relaxed.pgm"), true)?;
    timer.lap("write");
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: "segment".into(),
        input: loaded.label,
        direction: Direction::Inverse,
        gamma: model.gamma,
        alpha: Some(alpha),
        iterations: None,
        alphas: None,
        solver: cfg,
        constants: model.constants,
        constants_estimated: model.estimated,
        output_dir: args.out.clone(),
        timings: timer.0,
    };
    manifest.save(&args.out)?;
    Ok(())
}

fn report_peaks(seq: &ScaleSequence, min_mass: f64) -> CliResult<()> {
    let s = seq.responses()?;
    let peaks = spectral::detect_peaks(&s, min_mass);
    println!("detected {} peak(s)", peaks.len());
    for &p in &peaks {
        println!(
            "  k={} S={} mass={} alpha_effective={}",
            p + 1,
            s[p],
            peak_mass(&s, p, min_mass),
            seq.alphas_effective.get(p).copied().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

fn write_run(seq: &ScaleSequence, manifest: &mut RunManifest, timer: &mut Timer, colour: bool) -> CliResult<()> {
    let components = seq.components()?;
    let map = spectral::scale_map(&components)?;
    timer.lap("spectral");
    // write timing is measured on the masks and tables, then recorded
    let dir = manifest.output_dir.clone();
    manifest.timings = timer.0.clone();
    io::save_outputs(seq, &components, &map, manifest, &dir, colour)?;
    timer.lap("write");
    manifest.timings = timer.0.clone();
    manifest.save(&dir)?;
    Ok(())
}

fn bregman(args: &BregmanArgs, quiet: bool) -> CliResult<()> {
    let mut timer = Timer::new();
    let loaded = load_source(&args.source)?;
    let alpha = alpha_or_preset(&args.model, &loaded)?;
    let iters = args
        .iters
        .or(loaded.preset.as_ref().map(|p| p.iterations))
        .ok_or_else(|| usage("--iters is required"))?;
    if iters == 0 {
        return Err(usage("--iters must be at least 1"));
    }
    let model = resolve_model(&args.model, &loaded)?;
    let cfg = args.solver.config();
    cfg.validate()?;
    timer.lap("load");
    progress(
        quiet,
        format_args!(
            "bregman: alpha={alpha} K={iters} gamma={} c1={} c2={}",
            model.gamma, model.constants.background, model.constants.foreground
        ),
    );

    let mut it = BregmanIteration::new(&loaded.image, alpha, model.gamma, model.constants, cfg.mu)?;
    let mut seq = ScaleSequence {
        direction: Direction::Inverse,
        alpha: Some(alpha),
        gamma: model.gamma,
        constants: model.constants,
        masks: Vec::with_capacity(iters),
        relaxed: Vec::with_capacity(iters),
        alphas_effective: Vec::with_capacity(iters),
        inner_iterations: Vec::with_capacity(iters),
    };
    for _ in 0..iters {
        let step = it.step(&cfg)?;
        progress(
            quiet,
            format_args!(
                "  step {:>3}  alpha_eff {:>10.4}  inner {:>5}  foreground {}",
                step.k,
                step.alpha_effective,
                step.inner_iterations,
                step.mask.count_foreground()
            ),
        );
        seq.masks.push(step.mask);
        seq.relaxed.push(step.relaxed);
        seq.alphas_effective.push(step.alpha_effective);
        seq.inner_iterations.push(step.inner_iterations);
    }
    timer.lap("solve");

    let mut manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: "bregman".into(),
        input: loaded.label,
        direction: Direction::Inverse,
        gamma: model.gamma,
        alpha: Some(alpha),
        iterations: Some(iters),
        alphas: None,
        solver: cfg,
        constants: model.constants,
        constants_estimated: model.estimated,
        output_dir: args.out.clone(),
        timings: Vec::new(),
    };
    write_run(&seq, &mut manifest, &mut timer, !args.no_colormap)?;
    report_peaks(&seq, DEFAULT_MIN_MASS_FRACTION)
}

fn sweep(args: &SweepArgs, quiet: bool) -> CliResult<()> {
    let mut timer = Timer::new();
    let alphas = parse_alphas(&args.alphas).map_err(usage)?;
    let loaded = load_source(&args.source)?;
    let model = resolve_model(&args.model, &loaded)?;
    let cfg = args.solver.config();
    timer.lap("load");
    let seq = run_forward_sweep(&loaded.image, &alphas, model.gamma, &cfg, Some(model.constants))?;
    timer.lap("solve");
    for (a, m) in seq.alphas_effective.iter().zip(&seq.masks) {
        progress(quiet, format_args!("  alpha {a:>10.4}  foreground {}", m.count_foreground()));
    }
    let mut manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: "sweep".into(),
        input: loaded.label,
        direction: Direction::Forward,
        gamma: model.gamma,
        alpha: None,
        iterations: None,
        alphas: Some(alphas),
        solver: cfg,
        constants: model.constants,
        constants_estimated: model.estimated,
        output_dir: args.out.clone(),
        timings: Vec::new(),
    };
    write_run(&seq, &mut manifest, &mut timer, !args.no_colormap)?;
    let s = seq.responses()?;
    println!("detected {} peak(s)", spectral::detect_peaks(&s, DEFAULT_MIN_MASS_FRACTION).len());
    Ok(())
}

/// Rebuilds the scale sequence of a run directory from its manifest and masks.
fn load_run(dir: &Path) -> CliResult<(RunManifest, ScaleSequence)> {
    let manifest = RunManifest::load(dir)?;
    let masks = io::load_masks(dir)?;
    let alphas_effective = match (&manifest.alphas, manifest.alpha) {
        (Some(list), _) => list.clone(),
        (None, Some(alpha)) => (0..masks.len()).map(|k| msseg::effective_alpha(alpha, k)).collect(),
        (None, None) => return Err(usage(format!("{}: manifest has neither alpha nor alphas", dir.display()))),
    };
    if alphas_effective.len() != masks.len() {
        return Err(usage(format!(
            "{}: {} masks but {} weights in the manifest",
            dir.display(),
            masks.len(),
            alphas_effective.len()
        )));
    }
    let seq = ScaleSequence {
        direction: manifest.direction,
        alpha: manifest.alpha,
        gamma: manifest.gamma,
        constants: manifest.constants,
        relaxed: Vec::new(),
        inner_iterations: Vec::new(),
        masks,
        alphas_effective,
    };
    Ok((manifest, seq))
}

fn spectrum(args: &SpectrumArgs) -> CliResult<()> {
    let (mut manifest, seq) = load_run(&args.run)?;
    let components = seq.components()?;
    let map = spectral::scale_map(&components)?;
    let out = args.out.clone().unwrap_or_else(|| args.run.clone());
    io::create_dir(&out)?;
    io::write_file(
        &out.join(io::RESPONSE_FILE),
        io::response_csv(&seq, &components).as_bytes(),
    )?;
    io::save_scale_map(&map, &out.join(io::SCALE_MAP_FILE))?;
    io::save_scale_map_png(&map, &out.join(io::SCALE_MAP_PNG))?;
    if out != args.run {
        manifest.output_dir = out.clone();
        manifest.save(&out)?;
    }
    report_peaks(&seq, args.min_mass)
}

fn filter(args: &FilterArgs) -> CliResult<()> {
    let (_, seq) = load_run(&args.run)?;
    let components = seq.components()?;
    let (k1, k2) = args.band;
    if k2 > components.len() {
        return Err(usage(format!("band ends at {k2} but the run has {} components", components.len())));
    }
    let filtered = filter_scales(&components, |k| (k1..=k2).contains(&k))?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.run.join(format!("filtered_{k1}-{k2}.pgm")));
    io::save_mask(&filtered.mask, &out)?;
    println!("{} pixels in band {k1}..{k2} -> {}", filtered.mask.count_foreground(), out.display());
    Ok(())
}

fn phantom_cmd(args: &PhantomArgs) -> CliResult<()> {
    let spec = match (&args.preset, &args.scene) {
        (Some(name), None) => phantom::preset(name)?.spec,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            SceneSpec::from_scene_text(&text)?
        }
        _ => return Err(usage("exactly one of --preset and --scene is required")),
    };
    io::save_image(&phantom::render(&spec)?, &args.out)?;
    if let Some(path) = &args.scene_out {
        io::write_file(path, spec.to_scene_text().as_bytes())?;
    }
    Ok(())
}

fn verify() -> CliResult<()> {
    let report = msseg::verify::run_suite()?;
    print!("{report}");
    if report.all_passed() {
        println!("all {} checks passed", report.checks.len());
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_CHECK_FAILED,
            message: "invariant suite failed".into(),
        })
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(e.to_string()))?;
    }
    match &cli.command {
        Command::Segment(a) => segment(a, cli.quiet),
        Command::Bregman(a) => bregman(a, cli.quiet),
        Command::Sweep(a) => sweep(a, cli.quiet),
        Command::Spectrum(a) => spectrum(a),
        Command::Filter(a) => filter(a),
        Command::Phantom(a) => phantom_cmd(a),
        Command::Verify => verify(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
