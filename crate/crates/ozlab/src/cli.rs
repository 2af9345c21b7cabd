//! Command-line orchestration: argument parsing, dispatch, output and
//! manifest writing.
//!
//! Exit codes: 0 on success, 1 on domain/data/resource/divergence
//! failures, 2 on usage errors.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::validate_config;
use crate::error::{Error, Result};
use crate::ising::{measure_correlation, oz_fit, CorrelationEstimate, WolffSampler};
use crate::lattice::{fmt_f64, DualVector, LatticePath, Point};
use crate::manifest::ManifestBuilder;
use crate::renewal::{direct_correlation, mass_gap_estimate, oz_extrapolate, renewal_residual, tilted_step_mass};
use crate::saw::enumerate_two_point;
use crate::skeleton::{break_points, build_skeleton, surcharge, surcharge_histogram};
use crate::weights::{check_finite_energy, check_mixing, check_splitting, saw_model};
use crate::wulff::{build_body, curvature, solve_boundary, WulffBody};

#[derive(Parser)]
#[command(
    name = "ozlab",
    version,
    about = "Lattice laboratory for Ornstein-Zernike asymptotics",
    disable_help_subcommand = true
)]
struct Cli {
    /// Worker-thread cap for subcommands with parallel chains.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact weighted self-avoiding-walk two-point table.
    SawEnumerate(SawEnumerateArgs),
    /// Factorize, verify the renewal identity, and report mass gaps.
    RenewalCheck(RenewalCheckArgs),
    /// Two-point predictions far beyond the enumeration horizon.
    OzExtrapolate(OzExtrapolateArgs),
    /// Skeletonize a path file and report surcharges and break points.
    Skeleton(SkeletonArgs),
    /// Reconstruct the correlation-length body and its curvature.
    Wulff(WulffArgs),
    /// Wolff-cluster Monte Carlo correlation measurement.
    IsingMc(IsingMcArgs),
    /// Fit the asymptotic decay form to measured correlations.
    OzFit(OzFitArgs),
    /// Certify the weight axioms for an enumerable model.
    Axioms(AxiomsArgs),
}

#[derive(Args)]
struct SawEnumerateArgs {
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    max_len: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RenewalCheckArgs {
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    max_len: u32,
    /// Decomposition dual, comma-separated components.
    #[arg(long)]
    t: String,
    /// Lattice direction for ray estimates; defaults to the dominant
    /// axis of the dual.
    #[arg(long)]
    direction: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OzExtrapolateArgs {
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    max_len: u32,
    /// Ray specification like "k*e1:20..200".
    #[arg(long)]
    targets: String,
    /// Decomposition dual; defaults to the unit vector of the ray axis.
    #[arg(long)]
    t: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SkeletonArgs {
    /// CSV of vertex coordinates with header x_1..x_d.
    #[arg(long)]
    path_file: PathBuf,
    /// Skeleton scale in the body norm.
    #[arg(long = "K")]
    k_scale: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    t: String,
    /// Body JSON produced by the wulff subcommand.
    #[arg(long)]
    body: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct WulffArgs {
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    max_len: u32,
    #[arg(long, default_value_t = 64)]
    resolution: usize,
    #[arg(long)]
    out: PathBuf,
    /// Optional curvature CSV (angle, kappa, err).
    #[arg(long)]
    curvature: Option<PathBuf>,
}

#[derive(Args)]
struct IsingMcArgs {
    /// Model JSON: {dim, couplings: [{v, J}], beta, extents, periodic}.
    #[arg(long)]
    config: PathBuf,
    /// Cluster updates per measured sample (thinning included below).
    #[arg(long)]
    sweeps: u64,
    #[arg(long, default_value_t = 1)]
    chains: u64,
    #[arg(long)]
    seed: u64,
    /// Cluster updates between measurements.
    #[arg(long, default_value_t = 8)]
    thin: u64,
    #[arg(long, default_value_t = 1000)]
    burn_in: u64,
    /// Displacement rays like "e1:0..32" (comma-separated list).
    #[arg(long)]
    displacements: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OzFitArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    direction: String,
    /// Fit window as "lo:hi" in lattice distance.
    #[arg(long)]
    window: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AxiomsArgs {
    #[arg(long, default_value = "saw")]
    model: String,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    max_len: usize,
    /// Mixing decay base for the vertex-distance sum.
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    /// Output JSON path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Entry point shared by the binary and the tests.
pub fn dispatch(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders help/version on stdout with success
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli, &argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run(cli: Cli, argv: &[String]) -> Result<()> {
    match cli.command {
        Command::SawEnumerate(args) => cmd_saw_enumerate(args, argv),
        Command::RenewalCheck(args) => cmd_renewal_check(args, argv),
        Command::OzExtrapolate(args) => cmd_oz_extrapolate(args, argv),
        Command::Skeleton(args) => cmd_skeleton(args, argv),
        Command::Wulff(args) => cmd_wulff(args, argv),
        Command::IsingMc(args) => cmd_ising_mc(args, argv, cli.threads),
        Command::OzFit(args) => cmd_oz_fit(args, argv),
        Command::Axioms(args) => cmd_axioms(args, argv),
    }
}

fn parse_dual(text: &str, dim: usize) -> Result<DualVector> {
    let components = text
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| Error::usage(format!("bad dual component '{p}': {e}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if components.len() != dim {
        return Err(Error::usage(format!(
            "dual '{text}' has {} components, expected {dim}",
            components.len()
        )));
    }
    Ok(DualVector(components))
}

fn parse_direction(text: &str, dim: usize) -> Result<Point> {
    let components = text
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<i64>()
                .map_err(|e| Error::usage(format!("bad direction component '{p}': {e}")))
        })
        .collect::<Result<Vec<i64>>>()?;
    if components.len() != dim {
        return Err(Error::usage(format!(
            "direction '{text}' has {} components, expected {dim}",
            components.len()
        )));
    }
    Ok(Point(components))
}

/// Parse "k*e<axis>:<lo>..<hi>" into a ray axis and a multiple range.
fn parse_ray(text: &str) -> Result<(usize, i64, i64)> {
    let err = || {
        Error::usage(format!(
            "bad ray specification '{text}'; expected k*e<axis>:<lo>..<hi>"
        ))
    };
    let rest = text.trim().strip_prefix("k*e").ok_or_else(err)?;
    let (axis_text, range_text) = rest.split_once(':').ok_or_else(err)?;
    let axis: usize = axis_text.parse().map_err(|_| err())?;
    if axis == 0 {
        return Err(err());
    }
    let (lo_text, hi_text) = range_text.split_once("..").ok_or_else(err)?;
    let lo: i64 = lo_text.parse().map_err(|_| err())?;
    let hi: i64 = hi_text.parse().map_err(|_| err())?;
    if lo < 1 || hi < lo {
        return Err(err());
    }
    Ok((axis - 1, lo, hi))
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    std::fs::write(path, contents)?;
    Ok(())
}

fn cmd_saw_enumerate(args: SawEnumerateArgs, argv: &[String]) -> Result<()> {
    let mut manifest = ManifestBuilder::new("saw-enumerate", argv);
    let model = saw_model(args.beta, args.dim)?;
    let table = enumerate_two_point(&model, args.max_len)?;
    let mut buf = Vec::new();
    table.series.write_csv(&mut buf)?;
    write_atomic(&args.out, &buf)?;
    manifest.record_output(&args.out);
    manifest.write(&args.out)
}

#[derive(Serialize)]
struct RayEstimateJson {
    value: f64,
    bracket: [f64; 2],
    monotone_decreasing: bool,
}

impl From<&crate::saw::RayDecayEstimate> for RayEstimateJson {
    fn from(e: &crate::saw::RayDecayEstimate) -> Self {
        RayEstimateJson {
            value: e.value,
            bracket: [e.bracket.0, e.bracket.1],
            monotone_decreasing: e.monotone_decreasing,
        }
    }
}

#[derive(Serialize)]
struct RenewalReport {
    dim: usize,
    beta: f64,
    max_len: u32,
    t: Vec<f64>,
    direction: Vec<i64>,
    residual: f64,
    boundary: BoundaryJson,
    mass_gap: MassGapJson,
    tilted_mass: TiltedMassJson,
    decay_certificate: DecayCertificateJson,
}

#[derive(Serialize)]
struct BoundaryJson {
    s: f64,
    t: Vec<f64>,
}

#[derive(Serialize)]
struct MassGapJson {
    xi_full: RayEstimateJson,
    xi_direct: Option<RayEstimateJson>,
    gap_infinite: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gap_lower: Option<f64>,
}

#[derive(Serialize)]
struct TiltedMassJson {
    at_input_dual: f64,
    at_boundary_dual: f64,
}

#[derive(Serialize)]
struct DecayCertificateJson {
    /// Smallest constant bounding g along the ray by exp(-xi * multiple).
    c1: f64,
    xi_per_multiple: f64,
}

fn cmd_renewal_check(args: RenewalCheckArgs, argv: &[String]) -> Result<()> {
    let mut manifest = ManifestBuilder::new("renewal-check", argv);
    let model = saw_model(args.beta, args.dim)?;
    let t = parse_dual(&args.t, args.dim)?;
    if t.is_zero() {
        return Err(Error::usage("dual t must be nonzero"));
    }
    let direction = match &args.direction {
        Some(d) => parse_direction(d, args.dim)?,
        None => {
            let axis = t
                .0
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .map(|(i, _)| i)
                .unwrap();
            let mut c = vec![0i64; args.dim];
            c[axis] = if t.0[axis] >= 0.0 { 1 } else { -1 };
            Point(c)
        }
    };

    let table = enumerate_two_point(&model, args.max_len)?;
    let dc = direct_correlation(&model, &t, args.max_len)?;
    let residual = renewal_residual(&table, &dc)?;
    let gap = mass_gap_estimate(&dc, &table, &direction)?;
    let boundary = solve_boundary(&dc, &t)?;
    let at_input = tilted_step_mass(&dc, &t)?;
    let at_boundary = tilted_step_mass(&dc, &boundary.t)?;

    // decay certificate along the requested ray with the solved rate
    let unit = boundary.t.scale(1.0 / boundary.t.norm().max(f64::MIN_POSITIVE));
    let xi_per_multiple = crate::lattice::inner(&unit, &direction)? * boundary.s
        / boundary.t.norm().max(f64::MIN_POSITIVE);
    let mut c1: f64 = 0.0;
    let reach = args.max_len as i64 / direction.l1_norm().max(1);
    for k in 1..=reach {
        let g = table.series.spatial_at(&direction.scale(k));
        if g > 0.0 {
            c1 = c1.max(g * (xi_per_multiple * k as f64).exp());
        }
    }

    let report = RenewalReport {
        dim: args.dim,
        beta: args.beta,
        max_len: args.max_len,
        t: t.0.clone(),
        direction: direction.0.clone(),
        residual,
        boundary: BoundaryJson {
            s: boundary.s,
            t: boundary.t.0.clone(),
        },
        mass_gap: MassGapJson {
            xi_full: (&gap.xi_full).into(),
            xi_direct: gap.xi_direct.as_ref().map(|e| e.into()),
            gap_infinite: gap.gap.is_infinite(),
            gap: gap.gap.is_finite().then_some(gap.gap),
            gap_lower: gap.gap_lower.is_finite().then_some(gap.gap_lower),
        },
        tilted_mass: TiltedMassJson {
            at_input_dual: at_input,
            at_boundary_dual: at_boundary,
        },
        decay_certificate: DecayCertificateJson {
            c1,
            xi_per_multiple,
        },
    };
    let text = serde_json::to_string_pretty(&report)? + "\n";
    write_atomic(&args.out, text.as_bytes())?;
    manifest.record_output(&args.out);
    manifest.write(&args.out)
}

fn cmd_oz_extrapolate(args: OzExtrapolateArgs, argv: &[String]) -> Result<()> {
    let mut manifest = ManifestBuilder::new("oz-extrapolate", argv);
    let model = saw_model(args.beta, args.dim)?;
    let (axis, lo, hi) = parse_ray(&args.targets)?;
    if axis >= args.dim {
        return Err(Error::usage(format!(
            "ray axis e{} exceeds dimension {}",
            axis + 1,
            args.dim
        )));
    }
    let t = match &args.t {
        Some(text) => parse_dual(text, args.dim)?,
        None => {
            let mut c = vec![0.0; args.dim];
            c[axis] = 1.0;
            DualVector(c)
        }
    };
    let dc = direct_correlation(&model, &t, args.max_len)?;
    let targets: Vec<Point> = (lo..=hi)
        .map(|k| Point::unit(args.dim, axis).scale(k))
        .collect();
    let predictions = oz_extrapolate(&dc, &targets)?;

    let mut buf = Vec::new();
    writeln!(buf, "k,g,ratio_log")?;
    let mut prev: Option<f64> = None;
    for k in lo..=hi {
        let g = predictions[&Point::unit(args.dim, axis).scale(k)];
        let ratio = match prev {
            Some(p) if p > 0.0 && g > 0.0 => fmt_f64((p / g).ln()),
            _ => String::new(),
        };
        writeln!(buf, "{k},{},{ratio}", fmt_f64(g))?;
        prev = Some(g);
    }
    write_atomic(&args.out, &buf)?;
    manifest.record_output(&args.out);
    manifest.write(&args.out)
}

#[derive(Serialize)]
struct SkeletonReport {
    k_scale: f64,
    delta: f64,
    t: Vec<f64>,
    points: Vec<Vec<i64>>,
    hop_surcharges: Vec<f64>,
    total_surcharge: f64,
    regeneration_points: Vec<usize>,
    break_points: Vec<usize>,
}

fn read_path_csv(path: &Path) -> Result<LatticePath> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::data("empty path file"))?;
    let dim = header.trim().split(',').count();
    let mut vertices = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let coords = line
            .trim()
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<i64>()
                    .map_err(|e| Error::data(format!("bad vertex '{line}': {e}")))
            })
            .collect::<Result<Vec<i64>>>()?;
        if coords.len() != dim {
            return Err(Error::data(format!(
                "vertex '{line}' has {} coordinates, header promises {dim}",
                coords.len()
            )));
        }
        vertices.push(Point(coords));
    }
    LatticePath::new(vertices)
}

fn cmd_skeleton(args: SkeletonArgs, argv: &[String]) -> Result<()> {
    let mut manifest = ManifestBuilder::new("skeleton", argv);
    manifest.record_input(&args.path_file)?;
    manifest.record_input(&args.body)?;
    let path = read_path_csv(&args.path_file)?;
    let body: WulffBody = serde_json::from_str(&std::fs::read_to_string(&args.body)?)?;
    let t = parse_dual(&args.t, path.dim())?;
    let skeleton = build_skeleton(&path, args.k_scale, &body)?;
    let report = surcharge(&skeleton, &t, &body)?;
    let breaks = break_points(&path, &t, args.k_scale, args.delta, &body)?;
    let regens = crate::renewal::regeneration_points(&path, &t)?;
    let out = SkeletonReport {
        k_scale: args.k_scale,
        delta: args.delta,
        t: t.0.clone(),
        points: skeleton.points.iter().map(|p| p.0.clone()).collect(),
        hop_surcharges: report.per_hop,
        total_surcharge: report.total,
        regeneration_points: regens,
        break_points: breaks,
    };
    let text = serde_json::to_string_pretty(&out)? + "\n";
    write_atomic(&args.out, text.as_bytes())?;
    manifest.record_output(&args.out);
    manifest.write(&args.out)
}

fn cmd_wulff(args: WulffArgs, argv: &[String]) -> Result<()> {
    let mut manifest = ManifestBuilder::new("wulff", argv);
    let model = saw_model(args.beta, args.dim)?;
    let body = build_body(&model, args.max_len, args.resolution)?;
    let text = serde_json::to_string_pretty(&body)? + "\n";
    write_atomic(&args.out, text.as_bytes())?;
    manifest.record_output(&args.out);
    if let Some(curvature_path) = &args.curvature {
        let report = curvature(&body)?;
        let mut buf = Vec::new();
        writeln!(buf, "angle,kappa,err")?;
        for ((a, k), e) in report.angles.iter().zip(&report.kappa).zip(&report.error) {
            writeln!(buf, "{},{},{}", fmt_f64(*a), fmt_f64(*k), fmt_f64(*e))?;
        }
        write_atomic(curvature_path, &buf)?;
        manifest.record_output(curvature_path);
    }
    manifest.write(&args.out)
}

fn parse_displacements(text: &str, dim: usize, extents: &[usize]) -> Result<Vec<Point>> {
    let mut out = Vec::new();
    for part in text.split(',') {
        let err = || {
            Error::usage(format!(
                "bad displacement ray '{part}'; expected e<axis>:<lo>..<hi>"
            ))
        };
        let rest = part.trim().strip_prefix('e').ok_or_else(err)?;
        let (axis_text, range_text) = rest.split_once(':').ok_or_else(err)?;
        let axis: usize = axis_text.parse().map_err(|_| err())?;
        if axis == 0 || axis > dim {
            return Err(err());
        }
        let (lo_text, hi_text) = range_text.split_once("..").ok_or_else(err)?;
        let lo: i64 = lo_text.parse().map_err(|_| err())?;
        let hi: i64 = hi_text.parse().map_err(|_| err())?;
        if lo < 0 || hi < lo || hi as usize >= extents[axis - 1] {
            return Err(err());
        }
        for k in lo..=hi {
            out.push(Point::unit(dim, axis - 1).scale(k));
        }
    }
    Ok(out)
}

fn cmd_ising_mc(args: IsingMcArgs, argv: &[String], threads: usize) -> Result<()> {
    let mut manifest = ManifestBuilder::new("ising-mc", argv);
    manifest.record_input(&args.config)?;
    manifest.record_seed(args.seed);
    let cfg = validate_config(&std::fs::read_to_string(&args.config)?)?;
    let displacements = match &args.displacements {
        Some(text) => parse_displacements(text, cfg.model.dim, &cfg.extents)?,
        None => {
            let quarter = (cfg.extents[0] / 4) as i64;
            (0..=quarter)
                .map(|k| Point::unit(cfg.model.dim, 0).scale(k))
                .collect()
        }
    };
    if args.chains == 0 {
        return Err(Error::usage("at least one chain is required"));
    }
    let samples_per_chain = args.sweeps / args.thin / args.chains;

    // independently seeded chains, merged in chain order
    let chain_ids: Vec<u64> = (0..args.chains).collect();
    let worker = |chain: u64| -> Result<Vec<CorrelationEstimate>> {
        let mut sampler =
            WolffSampler::new(cfg.model.clone(), &cfg.extents, args.seed.wrapping_add(chain))?;
        measure_correlation(
            &mut sampler,
            &displacements,
            samples_per_chain,
            args.thin,
            args.burn_in,
        )
    };
    let per_chain: Vec<Vec<CorrelationEstimate>> = if threads <= 1 || args.chains == 1 {
        chain_ids
            .iter()
            .map(|&c| worker(c))
            .collect::<Result<Vec<_>>>()?
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = chain_ids
                .iter()
                .map(|&c| scope.spawn(move || worker(c)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("chain worker panicked"))
                .collect::<Result<Vec<_>>>()
        })?
    };

    // associative merge over chains
    let n_chains = per_chain.len() as f64;
    let merged: Vec<CorrelationEstimate> = (0..displacements.len())
        .map(|i| {
            let mean = per_chain.iter().map(|c| c[i].mean).sum::<f64>() / n_chains;
            let var = per_chain
                .iter()
                .map(|c| c[i].stderr * c[i].stderr)
                .sum::<f64>()
                / (n_chains * n_chains);
            let tau = per_chain
                .iter()
                .map(|c| c[i].tau_int)
                .fold(0.0f64, f64::max);
            CorrelationEstimate {
                displacement: displacements[i].clone(),
                mean,
                stderr: var.sqrt(),
                tau_int: tau,
                n_samples: per_chain.iter().map(|c| c[i].n_samples).sum(),
            }
        })
        .collect();

    let mut buf = Vec::new();
    let mut header = String::new();
    for i in 1..=cfg.model.dim {
        header.push_str(&format!("x_{i},"));
    }
    header.push_str("mean,stderr,tau_int,n_samples");
    writeln!(buf, "{header}")?;
    for e in &merged {
        let mut row = String::new();
        for c in &e.displacement.0 {
            row.push_str(&format!("{c},"));
        }
        row.push_str(&format!(
            "{},{},{},{}",
            fmt_f64(e.mean),
            fmt_f64(e.stderr),
            fmt_f64(e.tau_int),
            e.n_samples
        ));
        writeln!(buf, "{row}")?;
    }
    write_atomic(&args.out, &buf)?;
    manifest.record_output(&args.out);
    manifest.write(&args.out)
}

fn read_corr_csv(path: &Path) -> Result<(usize, Vec<CorrelationEstimate>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::data("empty correlation file"))?;
    let cols: Vec<&str> = header.trim().split(',').collect();
    let dim = cols
        .iter()
        .take_while(|c| c.starts_with("x_"))
        .count();
    if dim == 0 || cols.len() != dim + 4 {
        return Err(Error::data(
            "correlation CSV header must be x_1..x_d,mean,stderr,tau_int,n_samples",
        ));
    }
    let mut out = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.trim().split(',').collect();
        if parts.len() != dim + 4 {
            return Err(Error::data(format!("bad correlation row: {line}")));
        }
        let coords = parts[..dim]
            .iter()
            .map(|p| p.parse::<i64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::data(format!("bad coordinate in '{line}': {e}")))?;
        let parse_f = |i: usize| -> Result<f64> {
            parts[dim + i]
                .parse::<f64>()
                .map_err(|e| Error::data(format!("bad number in '{line}': {e}")))
        };
        out.push(CorrelationEstimate {
            displacement: Point(coords),
            mean: parse_f(0)?,
            stderr: parse_f(1)?,
            tau_int: parse_f(2)?,
            n_samples: parts[dim + 3]
                .parse()
                .map_err(|e| Error::data(format!("bad sample count in '{line}': {e}")))?,
        });
    }
    Ok((dim, out))
}

fn cmd_oz_fit(args: OzFitArgs, argv: &[String]) -> Result<()> {
    let mut manifest = ManifestBuilder::new("oz-fit", argv);
    manifest.record_input(&args.input)?;
    let (dim, estimates) = read_corr_csv(&args.input)?;
    let direction = parse_direction(&args.direction, dim)?;
    let (lo_text, hi_text) = args
        .window
        .split_once(':')
        .ok_or_else(|| Error::usage(format!("bad window '{}'; expected lo:hi", args.window)))?;
    let window = (
        lo_text
            .parse::<f64>()
            .map_err(|e| Error::usage(format!("bad window low '{lo_text}': {e}")))?,
        hi_text
            .parse::<f64>()
            .map_err(|e| Error::usage(format!("bad window high '{hi_text}': {e}")))?,
    );
    let fit = oz_fit(&estimates, &direction, dim, window)?;
    let text = serde_json::to_string_pretty(&fit)? + "\n";
    write_atomic(&args.out, text.as_bytes())?;
    manifest.record_output(&args.out);
    manifest.write(&args.out)
}

fn cmd_axioms(args: AxiomsArgs, argv: &[String]) -> Result<()> {
    let mut manifest = ManifestBuilder::new("axioms", argv);
    if args.model != "saw" {
        return Err(Error::usage(format!(
            "unknown model '{}'; v1 ships \"saw\"",
            args.model
        )));
    }
    let model = saw_model(args.beta, 2)?;
    let reports = vec![
        check_finite_energy(&model, args.max_len),
        check_splitting(&model, args.max_len),
        check_mixing(&model, args.max_len, args.theta),
    ];
    let text = serde_json::to_string_pretty(&reports)? + "\n";
    match &args.out {
        Some(path) => {
            write_atomic(path, text.as_bytes())?;
            manifest.record_output(path);
            manifest.write(path)?;
        }
        None => {
            print!("{text}");
        }
    }
    Ok(())
}

/// Re-export for the histogram-driven diagnostics in examples and tests.
pub fn skeleton_histogram_fraction(
    beta: f64,
    target: &Point,
    n_max: u32,
    k_scale: f64,
    t: &DualVector,
    body: &WulffBody,
) -> Result<f64> {
    let model = saw_model(beta, target.dim())?;
    let hist = surcharge_histogram(&model, target, n_max, k_scale, t, body)?;
    Ok(hist.backtracking_fraction())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ray_parsing() {
        assert_eq!(parse_ray("k*e1:20..200").unwrap(), (0, 20, 200));
        assert_eq!(parse_ray("k*e2:5..9").unwrap(), (1, 5, 9));
        assert!(parse_ray("e1:20..200").is_err());
        assert!(parse_ray("k*e0:1..5").is_err());
        assert!(parse_ray("k*e1:9..5").is_err());
    }

    #[test]
    fn displacement_parsing() {
        let d = parse_displacements("e1:0..3", 2, &[16, 16]).unwrap();
        assert_eq!(d.len(), 4);
        assert_eq!(d[3], Point(vec![3, 0]));
        let both = parse_displacements("e1:0..2,e2:1..2", 2, &[16, 16]).unwrap();
        assert_eq!(both.len(), 5);
        assert!(parse_displacements("e3:0..2", 2, &[16, 16]).is_err());
        assert!(parse_displacements("e1:0..20", 2, &[16, 16]).is_err());
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        let code = dispatch(vec!["ozlab".into(), "frobnicate".into()]);
        assert_eq!(code, 2);
    }

    #[test]
    fn help_exits_zero() {
        let code = dispatch(vec!["ozlab".into(), "--help".into()]);
        assert_eq!(code, 0);
    }
}
