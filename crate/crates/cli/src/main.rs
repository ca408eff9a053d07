//! Config-driven experiment runner for the `specgeom` library.
//!
//! Subcommands expose the individual constructions (spaces, supports,
//! spectra, Connes metrics, deformation distances, dimension estimates);
//! `run` executes a TOML experiment config and writes an artifact bundle
//! with a manifest; `verify` runs the built-in acceptance suites. All
//! outputs are deterministic: identical inputs give byte-identical files
//! apart from the manifest timestamp.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use specgeom::connes::{connes_metric_on_y, lipschitz_distance, save_metric, uniform_metric_distance};
use specgeom::deformation::{
    compact_open_distance, load_spectrum, perturb_simple_regular, save_spectrum,
    uniform_distance, validate_bounded, weak_lp_distance, MarkedSpectrum,
};
use specgeom::dimension::{
    box_dim_estimate, build_qqh_support, geometric_window, half_octave_window,
    hausdorff_reference, save_report_csv, save_report_json, spectral_dim_estimate,
    DimensionReport,
};
use specgeom::geometry::{save_eigenvalues, spectrum_of_ds, SpectralGeometry};
use specgeom::spaces::{
    gen_cantor, gen_circle, load_space, save_space, CantorSpec, FiniteMetricSpace,
};
use specgeom::support::{
    bounding_radius, brute_density, build_multiscale_support, complete_support, load_support,
    save_support, DensityTarget, SupportSet,
};
use specgeom::verify::{run_suite, SUITES};

#[derive(Parser)]
#[command(name = "specgeom", version, about = "Spectral geometries on finite metric spaces")]
struct Cli {
    /// Output directory for generated artifacts
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker thread count (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Format for printed summaries
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate or inspect a finite metric space
    Space(SpaceArgs),
    /// Build a support set over a space
    Support(SupportArgs),
    /// Build a marked spectrum over a support
    Spectrum(SpectrumArgs),
    /// Compute the Connes metric on the support projection
    Connes(ConnesArgs),
    /// Compare two spectra and their Connes metrics
    Deform(DeformArgs),
    /// Estimate spectral and box dimensions
    Dims(DimsArgs),
    /// Execute a TOML experiment config and write an artifact bundle
    Run(RunArgs),
    /// Run a built-in acceptance suite
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SpaceArgs {
    /// Cantor approximation P_{n,p} as "n,p,depth"
    #[arg(long, value_name = "N,P,DEPTH")]
    cantor: Option<String>,
    /// Sampled unit circle with the arc metric
    #[arg(long, value_name = "SAMPLES")]
    circle: Option<usize>,
    /// Inspect an existing distance-matrix file instead of generating
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
}

#[derive(Args)]
struct SupportArgs {
    /// Distance-matrix file of the ground space
    #[arg(long, value_name = "FILE")]
    space: PathBuf,
    /// Construction method
    #[arg(long, value_enum)]
    method: SupportMethod,
    /// Density target D for `multiscale` ("inf" for the infinite target)
    #[arg(long, value_name = "D|inf")]
    density: Option<String>,
    /// Homogeneity exponent q for `qqh`
    #[arg(long)]
    q: Option<f64>,
    /// First level for `qqh`
    #[arg(long, default_value_t = 5)]
    k_min: u32,
    /// Last level for `qqh`
    #[arg(long, default_value_t = 8)]
    k_max: u32,
    /// Also measure the exact density by brute scan
    #[arg(long)]
    measure: bool,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum SupportMethod {
    Multiscale,
    Qqh,
    Complete,
}

#[derive(Args)]
struct SpectrumArgs {
    /// Distance-matrix file of the ground space
    #[arg(long, value_name = "FILE")]
    space: PathBuf,
    /// Support file
    #[arg(long, value_name = "FILE")]
    support: PathBuf,
    /// Spectrum kind
    #[arg(long, value_enum, default_value_t = SpectrumKind::Base)]
    kind: SpectrumKind,
    /// Scale factor for `scaled`
    #[arg(long)]
    lambda: Option<f64>,
    /// Input spectrum file for `file` and `perturb`
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
    /// Perturbation size for `perturb` (0 < h < 1)
    #[arg(long)]
    h: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum SpectrumKind {
    Base,
    Scaled,
    File,
    Perturb,
}

#[derive(Args)]
struct ConnesArgs {
    #[arg(long, value_name = "FILE")]
    space: PathBuf,
    #[arg(long, value_name = "FILE")]
    support: PathBuf,
    /// Spectrum file (defaults to the base spectrum)
    #[arg(long, value_name = "FILE")]
    spectrum: Option<PathBuf>,
}

#[derive(Args)]
struct DeformArgs {
    #[arg(long, value_name = "FILE")]
    space: PathBuf,
    #[arg(long, value_name = "FILE")]
    support: PathBuf,
    /// First spectrum file
    #[arg(long, value_name = "FILE")]
    spectrum_a: PathBuf,
    /// Second spectrum file (reference; also the weak-Lp weight)
    #[arg(long, value_name = "FILE")]
    spectrum_b: PathBuf,
    /// Level for the compact-open distance (defaults to the min base length)
    #[arg(long)]
    t: Option<f64>,
    /// Exponent for the weak-Lp distance
    #[arg(long, default_value_t = 2.0)]
    p: f64,
}

#[derive(Args)]
struct DimsArgs {
    #[arg(long, value_name = "FILE")]
    space: PathBuf,
    /// Support file; required for the spectral estimate
    #[arg(long, value_name = "FILE")]
    support: Option<PathBuf>,
    /// Spectrum file (defaults to the base spectrum)
    #[arg(long, value_name = "FILE")]
    spectrum: Option<PathBuf>,
    /// Explicit window "hi,lo,count" (defaults to a half-octave grid)
    #[arg(long, value_name = "HI,LO,COUNT")]
    window: Option<String>,
    /// Reference dimension echoed into the reports
    #[arg(long)]
    reference: Option<f64>,
    /// Skip the box estimate
    #[arg(long)]
    no_box: bool,
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment config
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite name
    #[arg(default_value = "all")]
    suite: String,
}

// ------------------------------------------------------------------ errors

/// Machine-readable failure: names the owning module and operation.
#[derive(Serialize)]
struct CliError {
    module: &'static str,
    op: &'static str,
    error: String,
}

impl CliError {
    fn new(module: &'static str, op: &'static str, err: impl std::fmt::Display) -> Self {
        CliError { module, op, error: format!("{err}") }
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        // ignore failure: the global pool may already exist in tests
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    let code = match dispatch(&cli) {
        Ok(ok) => {
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e).unwrap());
            ExitCode::from(2)
        }
    };
    code
}

/// Ok(true) = success exit; Ok(false) = clean run with failed checks.
fn dispatch(cli: &Cli) -> CliResult<bool> {
    match &cli.cmd {
        Cmd::Space(a) => cmd_space(cli, a).map(|_| true),
        Cmd::Support(a) => cmd_support(cli, a).map(|_| true),
        Cmd::Spectrum(a) => cmd_spectrum(cli, a).map(|_| true),
        Cmd::Connes(a) => cmd_connes(cli, a).map(|_| true),
        Cmd::Deform(a) => cmd_deform(cli, a).map(|_| true),
        Cmd::Dims(a) => cmd_dims(cli, a).map(|_| true),
        Cmd::Run(a) => cmd_run(cli, a),
        Cmd::Verify(a) => cmd_verify(a),
    }
}

fn ensure_out(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::new("cli", "create_out_dir", e))
}

fn read_space(path: &Path) -> CliResult<Arc<FiniteMetricSpace<f64>>> {
    load_space(path)
        .map(Arc::new)
        .map_err(|e| CliError::new("spaces", "load_space", e))
}

fn read_support(path: &Path) -> CliResult<SupportSet<f64>> {
    load_support(path).map_err(|e| CliError::new("support", "load_support", e))
}

fn read_spectrum(support: &SupportSet<f64>, path: &Path) -> CliResult<MarkedSpectrum<f64>> {
    load_spectrum(support, path).map_err(|e| CliError::new("deformation", "load_spectrum", e))
}

fn print_kv(format: Format, pairs: &[(&str, String)]) {
    match format {
        Format::Csv => {
            let keys: Vec<&str> = pairs.iter().map(|(k, _)| *k).collect();
            let vals: Vec<&str> = pairs.iter().map(|(_, v)| v.as_str()).collect();
            println!("{}", keys.join(","));
            println!("{}", vals.join(","));
        }
        Format::Json => {
            let map: serde_json::Map<String, serde_json::Value> = pairs
                .iter()
                .map(|(k, v)| {
                    let val = if let Ok(b) = v.parse::<bool>() {
                        serde_json::json!(b)
                    } else if let Ok(n) = v.parse::<i64>() {
                        serde_json::json!(n)
                    } else if let Ok(f) = v.parse::<f64>().map(|f| f.is_finite().then_some(f)) {
                        f.map(|f| serde_json::json!(f)).unwrap_or_else(|| serde_json::json!(v))
                    } else {
                        serde_json::json!(v)
                    };
                    (k.to_string(), val)
                })
                .collect();
            println!("{}", serde_json::to_string_pretty(&map).unwrap());
        }
    }
}

// ------------------------------------------------------------- subcommands

fn cmd_space(cli: &Cli, a: &SpaceArgs) -> CliResult<()> {
    let space: Arc<FiniteMetricSpace<f64>> = if let Some(spec) = &a.cantor {
        let parts: Vec<&str> = spec.split(',').collect();
        if parts.len() != 3 {
            return Err(CliError::new("cli", "parse_args", "expected --cantor n,p,depth"));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| CliError::new("cli", "parse_args", e))
        };
        let n = parse(parts[0])?;
        let p: f64 = parts[1]
            .trim()
            .parse()
            .map_err(|e| CliError::new("cli", "parse_args", e))?;
        let depth = parse(parts[2])?;
        let spec = CantorSpec::new(n, p, depth)
            .map_err(|e| CliError::new("spaces", "cantor_spec", e))?;
        Arc::new(gen_cantor(&spec).map_err(|e| CliError::new("spaces", "gen_cantor", e))?)
    } else if let Some(samples) = a.circle {
        Arc::new(gen_circle(samples).map_err(|e| CliError::new("spaces", "gen_circle", e))?)
    } else if let Some(path) = &a.input {
        read_space(path)?
    } else {
        return Err(CliError::new(
            "cli",
            "parse_args",
            "one of --cantor, --circle, --input is required",
        ));
    };
    if a.input.is_none() {
        ensure_out(&cli.out)?;
        let path = cli.out.join("space.csv");
        save_space(&space, &path).map_err(|e| CliError::new("spaces", "save_space", e))?;
    }
    print_kv(
        cli.format,
        &[
            ("points", space.n().to_string()),
            ("diameter", format!("{}", space.diameter())),
            ("min_distance", format!("{}", space.min_positive_distance())),
            ("distinct_distances", space.distinct_distances().len().to_string()),
        ],
    );
    Ok(())
}

fn parse_density(s: &str) -> CliResult<DensityTarget<f64>> {
    if s.eq_ignore_ascii_case("inf") {
        return Ok(DensityTarget::Infinite);
    }
    let d: f64 = s
        .parse()
        .map_err(|e| CliError::new("cli", "parse_args", e))?;
    Ok(DensityTarget::Finite(d))
}

fn cmd_support(cli: &Cli, a: &SupportArgs) -> CliResult<()> {
    let space = read_space(&a.space)?;
    let (support, extra): (SupportSet<f64>, Vec<(&str, String)>) = match a.method {
        SupportMethod::Multiscale => {
            let target = parse_density(a.density.as_deref().unwrap_or("4"))?;
            let ms = build_multiscale_support(&space, target, None)
                .map_err(|e| CliError::new("support", "build_multiscale_support", e))?;
            (ms.support, vec![("scales", ms.scales.len().to_string())])
        }
        SupportMethod::Qqh => {
            let q = a.q.ok_or_else(|| {
                CliError::new("cli", "parse_args", "--q is required for method qqh")
            })?;
            let qqh = build_qqh_support(&space, q, a.k_min..=a.k_max)
                .map_err(|e| CliError::new("dimension", "build_qqh_support", e))?;
            (
                qqh.support,
                vec![
                    ("levels", qqh.levels.len().to_string()),
                    ("fitted_c", format!("{}", qqh.fitted_c)),
                ],
            )
        }
        SupportMethod::Complete => {
            let b = complete_support(&space)
                .map_err(|e| CliError::new("support", "complete_support", e))?;
            (b, vec![])
        }
    };
    ensure_out(&cli.out)?;
    save_support(&support, &cli.out.join("support.csv"))
        .map_err(|e| CliError::new("support", "save_support", e))?;
    let mut pairs = vec![
        ("pairs", support.len().to_string()),
        ("min_len", format!("{}", support.min_len().unwrap_or(f64::NAN))),
        ("max_len", format!("{}", support.max_len().unwrap_or(f64::NAN))),
    ];
    pairs.extend(extra);
    if a.measure {
        let dens = brute_density(&space, &support)
            .map_err(|e| CliError::new("support", "brute_density", e))?;
        pairs.push(("density", format!("{dens}")));
    }
    print_kv(cli.format, &pairs);
    Ok(())
}

fn cmd_spectrum(cli: &Cli, a: &SpectrumArgs) -> CliResult<()> {
    let space = read_space(&a.space)?;
    let support = read_support(&a.support)?;
    let spectrum = match a.kind {
        SpectrumKind::Base => MarkedSpectrum::base(&support),
        SpectrumKind::Scaled => {
            let lambda = a.lambda.ok_or_else(|| {
                CliError::new("cli", "parse_args", "--lambda is required for kind scaled")
            })?;
            MarkedSpectrum::scaled(&support, lambda)
        }
        SpectrumKind::File => {
            let path = a.input.as_ref().ok_or_else(|| {
                CliError::new("cli", "parse_args", "--input is required for kind file")
            })?;
            read_spectrum(&support, path)?
        }
        SpectrumKind::Perturb => {
            let h = a.h.ok_or_else(|| {
                CliError::new("cli", "parse_args", "--h is required for kind perturb")
            })?;
            let base = match &a.input {
                Some(path) => read_spectrum(&support, path)?,
                None => MarkedSpectrum::base(&support),
            };
            perturb_simple_regular(&support, &base, h)
                .map_err(|e| CliError::new("deformation", "perturb_simple_regular", e))?
                .spectrum
        }
    };
    let (c, cc) = validate_bounded(&support, &spectrum)
        .map_err(|e| CliError::new("deformation", "validate_bounded", e))?;
    ensure_out(&cli.out)?;
    save_spectrum(&support, &spectrum, &cli.out.join("spectrum.csv"))
        .map_err(|e| CliError::new("deformation", "save_spectrum", e))?;
    let g = SpectralGeometry::with_spectrum(Arc::clone(&space), support, spectrum)
        .map_err(|e| CliError::new("geometry", "with_spectrum", e))?;
    save_eigenvalues(&spectrum_of_ds(&g), &cli.out.join("eigenvalues.csv"))
        .map_err(|e| CliError::new("geometry", "save_eigenvalues", e))?;
    print_kv(
        cli.format,
        &[
            ("pairs", g.support().len().to_string()),
            ("bound_c", format!("{c}")),
            ("bound_C", format!("{cc}")),
        ],
    );
    Ok(())
}

fn build_geometry(
    space: Arc<FiniteMetricSpace<f64>>,
    support: SupportSet<f64>,
    spectrum: Option<&PathBuf>,
) -> CliResult<SpectralGeometry<f64>> {
    match spectrum {
        Some(path) => {
            let rho = read_spectrum(&support, path)?;
            SpectralGeometry::with_spectrum(space, support, rho)
                .map_err(|e| CliError::new("geometry", "with_spectrum", e))
        }
        None => Ok(SpectralGeometry::new(space, support)),
    }
}

fn connes_connected(g: &SpectralGeometry<f64>) -> CliResult<specgeom::Metric> {
    let m = connes_metric_on_y(g).map_err(|e| CliError::new("connes", "connes_metric_on_y", e))?;
    if !m.connected {
        return Err(CliError::new(
            "connes",
            "connes_metric_on_y",
            "incidence graph is disconnected: the Connes metric on the support \
             projection requires a connected incidence graph",
        ));
    }
    Ok(m)
}

fn cmd_connes(cli: &Cli, a: &ConnesArgs) -> CliResult<()> {
    let space = read_space(&a.space)?;
    let support = read_support(&a.support)?;
    let g = build_geometry(space, support, a.spectrum.as_ref())?;
    let m = connes_connected(&g)?;
    ensure_out(&cli.out)?;
    save_metric(&m, &cli.out.join("metric.csv"))
        .map_err(|e| CliError::new("connes", "save_metric", e))?;
    print_kv(
        cli.format,
        &[
            ("vertices", m.points.len().to_string()),
            ("connected", m.connected.to_string()),
        ],
    );
    Ok(())
}

fn cmd_deform(cli: &Cli, a: &DeformArgs) -> CliResult<()> {
    let space = read_space(&a.space)?;
    let support = read_support(&a.support)?;
    let s1 = read_spectrum(&support, &a.spectrum_a)?;
    let s2 = read_spectrum(&support, &a.spectrum_b)?;
    let t = a.t.unwrap_or_else(|| support.min_len().unwrap_or(0.0));
    let co = compact_open_distance(&support, &s1, &s2, t)
        .map_err(|e| CliError::new("deformation", "compact_open_distance", e))?;
    let uni = uniform_distance(&support, &s1, &s2)
        .map_err(|e| CliError::new("deformation", "uniform_distance", e))?;
    let wlp = weak_lp_distance(&support, &s1, &s2, a.p, None)
        .map_err(|e| CliError::new("deformation", "weak_lp_distance", e))?;
    let g1 = SpectralGeometry::with_spectrum(Arc::clone(&space), support.clone(), s1)
        .map_err(|e| CliError::new("geometry", "with_spectrum", e))?;
    let g2 = SpectralGeometry::with_spectrum(space, support, s2)
        .map_err(|e| CliError::new("geometry", "with_spectrum", e))?;
    let m1 = connes_connected(&g1)?;
    let m2 = connes_connected(&g2)?;
    let lip = lipschitz_distance(&m1, &m2)
        .map_err(|e| CliError::new("connes", "lipschitz_distance", e))?;
    let umd = uniform_metric_distance(&m1, &m2)
        .map_err(|e| CliError::new("connes", "uniform_metric_distance", e))?;
    print_kv(
        cli.format,
        &[
            ("compact_open", format!("{co}")),
            ("uniform", format!("{uni}")),
            ("weak_lp", format!("{wlp}")),
            ("lipschitz", format!("{lip}")),
            ("uniform_metric", format!("{umd}")),
        ],
    );
    Ok(())
}

fn parse_window(spec: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = spec.split(',').collect();
    if parts.len() != 3 {
        return Err(CliError::new("cli", "parse_args", "expected --window hi,lo,count"));
    }
    let hi: f64 = parts[0].trim().parse().map_err(|e| CliError::new("cli", "parse_args", e))?;
    let lo: f64 = parts[1].trim().parse().map_err(|e| CliError::new("cli", "parse_args", e))?;
    let count: usize = parts[2].trim().parse().map_err(|e| CliError::new("cli", "parse_args", e))?;
    geometric_window(hi, lo, count).map_err(|e| CliError::new("dimension", "geometric_window", e))
}

/// Default spectral window: half-octave grid anchored at half the largest
/// support length; box window anchored at a quarter of the diameter.
fn dims_reports(
    space: &FiniteMetricSpace<f64>,
    geometry: Option<&SpectralGeometry<f64>>,
    window: Option<&Vec<f64>>,
    reference: Option<f64>,
    with_box: bool,
) -> CliResult<(Option<DimensionReport<f64>>, Option<DimensionReport<f64>>)> {
    let spectral = match geometry {
        Some(g) => {
            let w = match window {
                Some(w) => w.clone(),
                None => {
                    let hi = g.support().max_len().unwrap_or(0.0) / 2.0;
                    half_octave_window(hi)
                        .map_err(|e| CliError::new("dimension", "half_octave_window", e))?
                }
            };
            Some(
                spectral_dim_estimate(g, &w, reference)
                    .map_err(|e| CliError::new("dimension", "spectral_dim_estimate", e))?,
            )
        }
        None => None,
    };
    let boxr = if with_box {
        let w = match window {
            Some(w) => w.clone(),
            None => half_octave_window(space.diameter() / 4.0)
                .map_err(|e| CliError::new("dimension", "half_octave_window", e))?,
        };
        Some(
            box_dim_estimate(space, &w, reference)
                .map_err(|e| CliError::new("dimension", "box_dim_estimate", e))?,
        )
    } else {
        None
    };
    Ok((spectral, boxr))
}

fn write_report(report: &DimensionReport<f64>, out: &Path, stem: &str) -> CliResult<()> {
    save_report_csv(report, &out.join(format!("{stem}.csv")))
        .map_err(|e| CliError::new("dimension", "save_report_csv", e))?;
    save_report_json(report, &out.join(format!("{stem}.json")))
        .map_err(|e| CliError::new("dimension", "save_report_json", e))
}

fn cmd_dims(cli: &Cli, a: &DimsArgs) -> CliResult<()> {
    let space = read_space(&a.space)?;
    let geometry = match &a.support {
        Some(path) => {
            let support = read_support(path)?;
            Some(build_geometry(Arc::clone(&space), support, a.spectrum.as_ref())?)
        }
        None => None,
    };
    let window = a.window.as_deref().map(parse_window).transpose()?;
    let (spectral, boxr) =
        dims_reports(&space, geometry.as_ref(), window.as_ref(), a.reference, !a.no_box)?;
    ensure_out(&cli.out)?;
    let mut pairs: Vec<(&str, String)> = Vec::new();
    if let Some(r) = &spectral {
        write_report(r, &cli.out, "spectral_report")?;
        pairs.push(("spectral_slope", format!("{}", r.slope)));
    }
    if let Some(r) = &boxr {
        write_report(r, &cli.out, "box_report")?;
        pairs.push(("box_slope", format!("{}", r.slope)));
    }
    if pairs.is_empty() {
        return Err(CliError::new(
            "cli",
            "parse_args",
            "nothing to estimate: pass --support and/or omit --no-box",
        ));
    }
    print_kv(cli.format, &pairs);
    Ok(())
}

fn cmd_verify(a: &VerifyArgs) -> CliResult<bool> {
    let results = run_suite(&a.suite).map_err(|e| {
        CliError::new(
            "verify",
            "run_suite",
            format!("{e}; known suites: {}", SUITES.join(", ")),
        )
    })?;
    let mut all = true;
    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!("{} {} {}: {}", r.id, status, r.name, r.details);
        all &= r.passed;
    }
    Ok(all)
}

// ------------------------------------------------------------------ config

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ExperimentConfig {
    space: SpaceSpec,
    support: SupportSpec,
    #[serde(default)]
    spectrum: SpectrumSpec,
    /// Any of: density, connes, dims, deform-convergence, bounds-check
    analysis: Vec<String>,
}

#[derive(Deserialize, Serialize)]
#[serde(tag = "generator", rename_all = "lowercase", deny_unknown_fields)]
enum SpaceSpec {
    Cantor { n: usize, p: f64, depth: usize },
    Circle { samples: usize },
    File { path: String },
}

#[derive(Deserialize, Serialize)]
#[serde(tag = "method", rename_all = "lowercase", deny_unknown_fields)]
enum SupportSpec {
    /// `density` is a TOML float; `inf` selects the infinite target.
    Multiscale { density: f64 },
    Qqh {
        q: f64,
        #[serde(default = "default_k_min")]
        k_min: u32,
        #[serde(default = "default_k_max")]
        k_max: u32,
    },
    Complete {},
    File { path: String },
}

fn default_k_min() -> u32 {
    5
}

fn default_k_max() -> u32 {
    8
}

#[derive(Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum SpectrumSpec {
    Base {},
    Scaled { lambda: f64 },
    File { path: String },
    Perturb { h: f64 },
}

impl Default for SpectrumSpec {
    fn default() -> Self {
        SpectrumSpec::Base {}
    }
}

const ANALYSES: &[&str] = &["density", "connes", "dims", "deform-convergence", "bounds-check"];

fn cmd_run(cli: &Cli, a: &RunArgs) -> CliResult<bool> {
    let text = std::fs::read_to_string(&a.config)
        .map_err(|e| CliError::new("cli", "read_config", e))?;
    let config: ExperimentConfig =
        toml::from_str(&text).map_err(|e| CliError::new("cli", "parse_config", e))?;
    for name in &config.analysis {
        if !ANALYSES.contains(&name.as_str()) {
            return Err(CliError::new(
                "cli",
                "parse_config",
                format!("unknown analysis '{name}'; known: {}", ANALYSES.join(", ")),
            ));
        }
    }
    ensure_out(&cli.out)?;
    let mut artifacts: Vec<String> = Vec::new();
    let mut checks: Vec<(String, bool)> = Vec::new();
    let save = |name: &str, res: CliResult<()>, artifacts: &mut Vec<String>| {
        res.map(|()| artifacts.push(name.to_string()))
    };

    // space
    let (space, cantor_spec): (Arc<FiniteMetricSpace<f64>>, Option<CantorSpec<f64>>) =
        match &config.space {
            SpaceSpec::Cantor { n, p, depth } => {
                let spec = CantorSpec::new(*n, *p, *depth)
                    .map_err(|e| CliError::new("spaces", "cantor_spec", e))?;
                let x = gen_cantor(&spec).map_err(|e| CliError::new("spaces", "gen_cantor", e))?;
                (Arc::new(x), Some(spec))
            }
            SpaceSpec::Circle { samples } => (
                Arc::new(
                    gen_circle(*samples).map_err(|e| CliError::new("spaces", "gen_circle", e))?,
                ),
                None,
            ),
            SpaceSpec::File { path } => (read_space(Path::new(path))?, None),
        };
    save(
        "space.csv",
        save_space(&space, &cli.out.join("space.csv"))
            .map_err(|e| CliError::new("spaces", "save_space", e)),
        &mut artifacts,
    )?;

    // support
    let mut requested_density: Option<f64> = None;
    let support: SupportSet<f64> = match &config.support {
        SupportSpec::Multiscale { density } => {
            let target = if density.is_infinite() {
                DensityTarget::Infinite
            } else {
                requested_density = Some(*density);
                DensityTarget::Finite(*density)
            };
            build_multiscale_support(&space, target, None)
                .map_err(|e| CliError::new("support", "build_multiscale_support", e))?
                .support
        }
        SupportSpec::Qqh { q, k_min, k_max } => {
            build_qqh_support(&space, *q, *k_min..=*k_max)
                .map_err(|e| CliError::new("dimension", "build_qqh_support", e))?
                .support
        }
        SupportSpec::Complete {} => complete_support(&space)
            .map_err(|e| CliError::new("support", "complete_support", e))?,
        SupportSpec::File { path } => read_support(Path::new(path))?,
    };
    save(
        "support.csv",
        save_support(&support, &cli.out.join("support.csv"))
            .map_err(|e| CliError::new("support", "save_support", e)),
        &mut artifacts,
    )?;

    // spectrum
    let spectrum = match &config.spectrum {
        SpectrumSpec::Base {} => MarkedSpectrum::base(&support),
        SpectrumSpec::Scaled { lambda } => MarkedSpectrum::scaled(&support, *lambda),
        SpectrumSpec::File { path } => read_spectrum(&support, Path::new(path))?,
        SpectrumSpec::Perturb { h } => {
            perturb_simple_regular(&support, &MarkedSpectrum::base(&support), *h)
                .map_err(|e| CliError::new("deformation", "perturb_simple_regular", e))?
                .spectrum
        }
    };
    save(
        "spectrum.csv",
        save_spectrum(&support, &spectrum, &cli.out.join("spectrum.csv"))
            .map_err(|e| CliError::new("deformation", "save_spectrum", e)),
        &mut artifacts,
    )?;
    let geometry =
        SpectralGeometry::with_spectrum(Arc::clone(&space), support.clone(), spectrum.clone())
            .map_err(|e| CliError::new("geometry", "with_spectrum", e))?;

    // analyses in dependency order: density feeds bounds-check reporting
    let mut measured_density: Option<f64> = None;
    if config.analysis.iter().any(|s| s == "density") {
        let dens = brute_density(&space, &support)
            .map_err(|e| CliError::new("support", "brute_density", e))?;
        measured_density = Some(dens);
        let passed = match requested_density {
            Some(d) => dens >= d,
            None => true,
        };
        checks.push(("density".into(), passed));
        let summary = serde_json::json!({
            "measured": if dens.is_finite() { serde_json::json!(dens) } else { serde_json::json!("inf") },
            "requested": requested_density,
            "passed": passed,
        });
        write_json(&cli.out.join("density.json"), &summary)?;
        artifacts.push("density.json".into());
    }

    if config.analysis.iter().any(|s| s == "connes") {
        let m = connes_connected(&geometry)?;
        save(
            "metric.csv",
            save_metric(&m, &cli.out.join("metric.csv"))
                .map_err(|e| CliError::new("connes", "save_metric", e)),
            &mut artifacts,
        )?;
        checks.push(("connes".into(), true));
    }

    if config.analysis.iter().any(|s| s == "dims") {
        let reference = cantor_spec.as_ref().map(hausdorff_reference);
        let (spectral, boxr) = dims_reports(&space, Some(&geometry), None, reference, true)?;
        if let Some(r) = &spectral {
            write_report(r, &cli.out, "spectral_report")?;
            artifacts.push("spectral_report.csv".into());
            artifacts.push("spectral_report.json".into());
        }
        if let Some(r) = &boxr {
            write_report(r, &cli.out, "box_report")?;
            artifacts.push("box_report.csv".into());
            artifacts.push("box_report.json".into());
        }
    }

    if config.analysis.iter().any(|s| s == "deform-convergence") {
        let passed = run_deform_convergence(cli, &geometry, &mut artifacts)?;
        checks.push(("deform-convergence".into(), passed));
    }

    if config.analysis.iter().any(|s| s == "bounds-check") {
        let dens = match measured_density {
            Some(d) => d,
            None => brute_density(&space, &support)
                .map_err(|e| CliError::new("support", "brute_density", e))?,
        };
        let passed = run_bounds_check(cli, &space, &support, dens, &mut artifacts)?;
        checks.push(("bounds-check".into(), passed));
    }

    // manifest: version, parameter echo, artifact list, check outcomes
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "timestamp": timestamp,
        "config": serde_json::to_value(&config).unwrap(),
        "artifacts": artifacts,
        "checks": checks.iter()
            .map(|(k, v)| (k.clone(), serde_json::json!(v)))
            .collect::<serde_json::Map<_, _>>(),
    });
    write_json(&cli.out.join("manifest.json"), &manifest)?;
    let all = checks.iter().all(|(_, p)| *p);
    for (name, p) in &checks {
        println!("{name} {}", if *p { "PASS" } else { "FAIL" });
    }
    Ok(all)
}

fn write_json(path: &Path, value: &serde_json::Value) -> CliResult<()> {
    let text = format!("{}\n", serde_json::to_string_pretty(value).unwrap());
    std::fs::write(path, text).map_err(|e| CliError::new("cli", "write_json", e))
}

/// Scaling sequence rho_i = (1 + 1/i) base, i = 1..20: uniform and
/// Lipschitz distances to the base must both decrease monotonically.
fn run_deform_convergence(
    cli: &Cli,
    geometry: &SpectralGeometry<f64>,
    artifacts: &mut Vec<String>,
) -> CliResult<bool> {
    let support = geometry.support();
    let base = MarkedSpectrum::base(support);
    let g0 = SpectralGeometry::with_spectrum(geometry.space_arc(), support.clone(), base.clone())
        .map_err(|e| CliError::new("geometry", "with_spectrum", e))?;
    let m0 = connes_connected(&g0)?;
    let mut rows = String::from("i,uniform,lipschitz\n");
    let mut prev_uni = f64::INFINITY;
    let mut prev_lip = f64::INFINITY;
    let mut passed = true;
    for i in 1..=20u32 {
        let lambda = 1.0 + 1.0 / f64::from(i);
        let rho = MarkedSpectrum::scaled(support, lambda);
        let uni = uniform_distance(support, &rho, &base)
            .map_err(|e| CliError::new("deformation", "uniform_distance", e))?;
        let gi = SpectralGeometry::with_spectrum(geometry.space_arc(), support.clone(), rho)
            .map_err(|e| CliError::new("geometry", "with_spectrum", e))?;
        let mi = connes_connected(&gi)?;
        let lip = lipschitz_distance(&m0, &mi)
            .map_err(|e| CliError::new("connes", "lipschitz_distance", e))?;
        passed &= uni < prev_uni && lip < prev_lip;
        prev_uni = uni;
        prev_lip = lip;
        rows.push_str(&format!("{i},{uni},{lip}\n"));
    }
    let path = cli.out.join("deform_convergence.csv");
    std::fs::write(&path, rows).map_err(|e| CliError::new("cli", "write_report", e))?;
    artifacts.push("deform_convergence.csv".into());
    Ok(passed)
}

/// Covering-radius bound on the level grid: for measured density D > 2,
/// delta(t) <= D t / (D - 2) at every base-length scale t.
fn run_bounds_check(
    cli: &Cli,
    space: &FiniteMetricSpace<f64>,
    support: &SupportSet<f64>,
    dens: f64,
    artifacts: &mut Vec<String>,
) -> CliResult<bool> {
    if !(dens > 2.0) {
        return Err(CliError::new(
            "support",
            "relative_bounding_radius",
            format!("bounds-check requires measured density > 2, got {dens}"),
        ));
    }
    let mut rows = String::from("t,delta,bound\n");
    let mut passed = true;
    for t in support.distinct_lens() {
        let delta = bounding_radius(space, support, t)
            .map_err(|e| CliError::new("support", "bounding_radius", e))?;
        let bound = if dens.is_finite() { dens * t / (dens - 2.0) } else { t };
        passed &= delta <= bound;
        rows.push_str(&format!("{t},{delta},{bound}\n"));
    }
    let path = cli.out.join("bounds_check.csv");
    std::fs::write(&path, rows).map_err(|e| CliError::new("cli", "write_report", e))?;
    artifacts.push("bounds_check.csv".into());
    Ok(passed)
}
