//! The `qrlab` command line: `ball`, `divergence`, `redirect`,
//! `check-surgery`, `plot`.
//!
//! Exit codes: 0 success, 1 domain error (named on stderr), 2 usage error.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use qr_core::divergence::{fit_growth, DivergenceParams, GrowthFit, PairStrategy, Profile};
use qr_core::group::GroupSpec;
use qr_core::oracle::has_closed_form;
use qr_core::redirect::{redirect_sweep, RaySpec, SweepOptions};
use qr_core::{parse_group_spec, DistanceOracle, DEFAULT_VERTEX_BUDGET};

use crate::parallel::parallel_divergence_profile;
use crate::plot::{render_svg, PlotKind, Series};
use crate::tables;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Domain(m) => m,
        }
    }
}

macro_rules! domain_from {
    ($($ty:ty),*) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Domain(e.to_string())
            }
        })*
    };
}

domain_from!(
    qr_core::GroupError,
    qr_core::BallError,
    qr_core::OracleError,
    qr_core::PathError,
    qr_core::divergence::DivergenceError,
    qr_core::redirect::RedirectError,
    qr_core::redirect::SweepError,
    qr_core::surgery::SurgeryError,
    tables::TableError,
    crate::plot::PlotError,
    std::io::Error
);

#[derive(Parser, Debug)]
#[command(name = "qrlab", version, about = "word metrics, divergence and redirecting experiments")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Grow a Cayley ball and report sphere sizes.
    Ball(BallArgs),
    /// Divergence profile over sphere radii.
    Divergence(DivergenceArgs),
    /// Redirecting sweep over increasing radii.
    Redirect(RedirectArgs),
    /// Randomized verification suites for the surgery constructions.
    CheckSurgery(CheckSurgeryArgs),
    /// Render an SVG chart from a CSV written by divergence/redirect.
    Plot(PlotArgs),
}

#[derive(Args, Debug)]
struct BallArgs {
    /// Group description, e.g. z^2, free:2, heis, sol:2,1,1,1, bs:1,2.
    #[arg(long)]
    group: String,
    #[arg(long)]
    radius: u32,
    /// Write a JSON dump {spec, radius, sphere_sizes, elements?}.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include the elements (breadth-first order) in the dump.
    #[arg(long)]
    elements: bool,
    /// Vertex budget override (also: QRLAB_BUDGET_VERTICES).
    #[arg(long)]
    budget: Option<usize>,
}

#[derive(Args, Debug)]
struct DivergenceArgs {
    #[arg(long)]
    group: String,
    /// Radii: inclusive range start:stop:step, or a comma list.
    #[arg(long)]
    radii: String,
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    #[arg(long, default_value_t = 2.0)]
    gamma: f64,
    /// Pair strategy: all | antipodal | sample:COUNT:SEED.
    #[arg(long, default_value = "all")]
    pairs: String,
    /// Search cap (path length and exploration); default 4 * max radius.
    #[arg(long)]
    cap: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    /// Render a div-vs-r chart.
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Worker threads (default: machine parallelism).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    budget: Option<usize>,
}

#[derive(Args, Debug)]
struct RedirectArgs {
    #[arg(long)]
    group: String,
    /// Ray spec: word:<letters> or toward:<element encoding>.
    #[arg(long)]
    alpha: String,
    #[arg(long)]
    beta: String,
    /// Comma list of radii, strictly increasing.
    #[arg(long)]
    s: String,
    /// Override the divergence constant C instead of estimating it.
    #[arg(long)]
    c_override: Option<f64>,
    /// Ray length margin past (1+C) * max(s).
    #[arg(long, default_value_t = 8)]
    margin: u32,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    /// Render a q-vs-s chart.
    #[arg(long)]
    plot: Option<PathBuf>,
    #[arg(long)]
    budget: Option<usize>,
}

#[derive(Args, Debug)]
struct CheckSurgeryArgs {
    #[arg(long, default_value = "z^2")]
    group: String,
    /// all | projection | shorten | annulus | redirect11.
    #[arg(long, default_value = "all")]
    op: String,
    #[arg(long, default_value_t = 200)]
    trials: u32,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    budget: Option<usize>,
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// div_vs_r | loglog | q_vs_s.
    #[arg(long)]
    kind: String,
    /// A CSV file written by the divergence or redirect command.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// Entry point used by main: parses argv and maps errors to exit codes.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap reserves 2 for usage problems and 0 for help/version.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ball(args) => cmd_ball(args),
        Command::Divergence(args) => cmd_divergence(args),
        Command::Redirect(args) => cmd_redirect(args),
        Command::CheckSurgery(args) => cmd_check_surgery(args),
        Command::Plot(args) => cmd_plot(args),
    }
}

fn budget_of(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var("QRLAB_BUDGET_VERTICES").ok().and_then(|v| v.parse::<usize>().ok())
    })
    .unwrap_or(DEFAULT_VERTEX_BUDGET)
}

fn parse_radii(text: &str) -> Result<Vec<u32>, CliError> {
    let bad = |m: &str| CliError::Usage(format!("bad radii {text:?}: {m}"));
    let mut out = Vec::new();
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected start:stop:step"));
        }
        let start: u32 = parts[0].parse().map_err(|_| bad("bad start"))?;
        let stop: u32 = parts[1].parse().map_err(|_| bad("bad stop"))?;
        let step: u32 = parts[2].parse().map_err(|_| bad("bad step"))?;
        if step == 0 || stop < start {
            return Err(bad("need step > 0 and stop >= start"));
        }
        let mut r = start;
        while r <= stop {
            out.push(r);
            r += step;
        }
    } else {
        for part in text.split(',') {
            out.push(part.trim().parse().map_err(|_| bad("bad entry"))?);
        }
    }
    if out.is_empty() {
        return Err(bad("empty"));
    }
    Ok(out)
}

fn parse_pairs(text: &str) -> Result<PairStrategy, CliError> {
    match text {
        "all" => Ok(PairStrategy::AllSpherePairs),
        "antipodal" => Ok(PairStrategy::AntipodalHeuristic),
        other => {
            let parts: Vec<&str> = other.split(':').collect();
            if parts.len() == 3 && parts[0] == "sample" {
                let count = parts[1]
                    .parse()
                    .map_err(|_| CliError::Usage(format!("bad sample count in {text:?}")))?;
                let seed = parts[2]
                    .parse()
                    .map_err(|_| CliError::Usage(format!("bad sample seed in {text:?}")))?;
                Ok(PairStrategy::Sample { count, seed })
            } else {
                Err(CliError::Usage(format!(
                    "bad pair strategy {text:?}: expected all | antipodal | sample:COUNT:SEED"
                )))
            }
        }
    }
}

fn parse_ray(spec: &GroupSpec, text: &str) -> Result<RaySpec, CliError> {
    if let Some(word) = text.strip_prefix("word:") {
        return Ok(RaySpec::PeriodicWord(word.to_string()));
    }
    if let Some(enc) = text.strip_prefix("toward:") {
        let elem = spec
            .parse_element(enc)
            .map_err(|e| CliError::Usage(format!("bad ray target {enc:?}: {e}")))?;
        return Ok(RaySpec::GeodesicToward(elem));
    }
    Err(CliError::Usage(format!(
        "bad ray spec {text:?}: expected word:<letters> or toward:<element>"
    )))
}

fn group_of(text: &str) -> Result<GroupSpec, CliError> {
    parse_group_spec(text).map_err(|e| CliError::Domain(format!("unknown group string: {e}")))
}

fn cmd_ball(args: BallArgs) -> Result<(), CliError> {
    let spec = group_of(&args.group)?;
    let budget = budget_of(args.budget);
    let ball = qr_core::grow_ball(&spec, args.radius, budget)?;
    println!("group {} radius {}: {} vertices", spec.to_spec_string(), ball.radius(), ball.len());
    let sizes = ball.sphere_sizes();
    let rendered: Vec<String> = sizes.iter().map(|s| s.to_string()).collect();
    println!("sphere sizes: {}", rendered.join(","));
    if let Some(path) = &args.out {
        let json = tables::ball_json(&ball, args.elements);
        std::fs::write(path, serde_json::to_string_pretty(&json).expect("json") + "\n")?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn fit_of(profile: &Profile) -> Option<GrowthFit> {
    fit_growth(&profile.values()).ok()
}

fn cmd_divergence(args: DivergenceArgs) -> Result<(), CliError> {
    let spec = group_of(&args.group)?;
    let radii = parse_radii(&args.radii)?;
    let strategy = parse_pairs(&args.pairs)?;
    let params = DivergenceParams::new(args.delta, args.gamma, strategy)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let budget = budget_of(args.budget);
    let max_r = *radii.iter().max().unwrap();
    let cap = args.cap.unwrap_or(4 * max_r);
    let threads = args
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));

    let oracle = if has_closed_form(&spec) {
        DistanceOracle::closed_form(spec.clone())?
    } else {
        DistanceOracle::grown(&spec, max_r, budget)?
    };

    // One radius at a time so per-radius wall time lands in the records.
    let mut profile = Profile { points: Vec::new(), params, cap, truncated: None };
    for &r in &radii {
        let started = Instant::now();
        let mut part = parallel_divergence_profile(&oracle, &[r], &params, cap, budget, threads)?;
        let elapsed = started.elapsed().as_secs_f64() * 1e3;
        for point in &mut part.points {
            point.best.wall_time_ms = Some(elapsed);
        }
        profile.points.extend(part.points);
        profile.truncated = profile.truncated.take().or(part.truncated);
    }

    for point in &profile.points {
        let value = match point.best.value.finite() {
            Some(v) => v.to_string(),
            None => "disconnected".to_string(),
        };
        println!(
            "r={} div={} witness={}..{}{}",
            point.r,
            value,
            point.best.a.encode(),
            point.best.b.encode(),
            if point.exact { "" } else { " (lower bound)" }
        );
    }
    let fit = fit_of(&profile);
    match &fit {
        Some(f) => {
            let exponent = f.exponent.map(|e| format!("{e:.4}")).unwrap_or_else(|| "n/a".into());
            let lc = f
                .linear_constant
                .map(|c| format!("{c:.4}"))
                .unwrap_or_else(|| "n/a".into());
            println!(
                "classification={} exponent={} linear_constant={} (thresholds: exponent <= {}, max ratio <= {} x median)",
                f.classification, exponent, lc, f.exponent_threshold, f.ratio_factor
            );
        }
        None => println!("classification=n/a (needs >= 3 finite radii)"),
    }
    if let Some(t) = &profile.truncated {
        println!("warning: {t}");
    }

    if let Some(path) = &args.out {
        tables::write_text(path, &tables::divergence_csv(&spec, &profile)?)?;
        println!("wrote {}", path.display());
    }
    if let Some(path) = &args.json {
        let json = tables::divergence_json(&spec, &profile, fit.as_ref());
        std::fs::write(path, serde_json::to_string_pretty(&json).expect("json") + "\n")?;
        println!("wrote {}", path.display());
    }
    if let Some(path) = &args.plot {
        let annotation = fit
            .as_ref()
            .and_then(|f| f.exponent.map(|e| format!("{}: exponent {e:.3}", f.classification)))
            .unwrap_or_default();
        let points: Vec<(f64, f64)> = profile
            .points
            .iter()
            .filter_map(|p| p.best.value.finite().map(|v| (p.r as f64, v as f64)))
            .collect();
        let series = Series {
            title: format!("divergence of {}", spec.to_spec_string()),
            x_label: "r".into(),
            y_label: "Div(r)".into(),
            points,
            annotation,
        };
        tables::write_text(path, &render_svg(&series)?)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_redirect(args: RedirectArgs) -> Result<(), CliError> {
    let spec = group_of(&args.group)?;
    let alpha = parse_ray(&spec, &args.alpha)?;
    let beta = parse_ray(&spec, &args.beta)?;
    let s_list = parse_radii(&args.s)?;
    let budget = budget_of(args.budget);

    let mut opts = SweepOptions { margin: args.margin, budget, ..SweepOptions::default() };

    // For families without a closed form the oracle is a ball that must
    // cover the whole pipeline, so the constant C is fixed first.
    let oracle = if has_closed_form(&spec) {
        opts.c_override = args.c_override;
        DistanceOracle::closed_form(spec.clone())?
    } else {
        let c = match args.c_override {
            Some(c) => c,
            None => {
                let prelim = DistanceOracle::grown(&spec, 16, budget)?;
                qr_core::redirect::estimate_c(&prelim, &opts.profile_radii, budget)?.0
            }
        };
        opts.c_override = Some(c);
        let max_s = *s_list.iter().max().unwrap();
        let radius = ((1.0 + c) * max_s as f64).ceil() as u32 + args.margin;
        DistanceOracle::grown(&spec, radius, budget)?
    };

    let outcome = redirect_sweep(&oracle, &alpha, &beta, &s_list, &opts)?;
    for report in &outcome.reports {
        println!(
            "s={} case={} q={:.4} Q={} prefix={} landing={} len_final={}",
            report.s,
            report.case,
            report.final_q,
            report.q_add,
            report.coincidence_prefix,
            report.landing_index,
            report.final_path.len_edges()
        );
    }
    println!(
        "C={:.4} ({}) q in [{:.4}, {:.4}]{}",
        outcome.verdict.c_used,
        if outcome.verdict.c_estimated { "estimated" } else { "fixed" },
        outcome.verdict.min_q,
        outcome.verdict.max_q,
        if outcome.verdict.mixed_cases { " mixed cases" } else { "" }
    );
    println!("{}", outcome.verdict.label());

    if let Some(path) = &args.out {
        tables::write_text(path, &tables::redirect_csv(&spec, &outcome.reports, &outcome.verdict)?)?;
    }
    if let Some(path) = &args.json {
        let json = tables::redirect_json(&spec, &outcome.reports, &outcome.verdict);
        std::fs::write(path, serde_json::to_string_pretty(&json).expect("json") + "\n")?;
    }
    if let Some(path) = &args.plot {
        let points: Vec<(f64, f64)> =
            outcome.reports.iter().map(|r| (r.s as f64, r.final_q)).collect();
        let series = Series {
            title: format!("redirecting constants for {}", spec.to_spec_string()),
            x_label: "s".into(),
            y_label: "measured q".into(),
            points,
            annotation: outcome.verdict.label().to_string(),
        };
        tables::write_text(path, &render_svg(&series)?)?;
    }
    Ok(())
}

fn cmd_check_surgery(args: CheckSurgeryArgs) -> Result<(), CliError> {
    let spec = group_of(&args.group)?;
    let budget = budget_of(args.budget);
    let oracle = DistanceOracle::best_for(&spec, 24, budget)?;
    let mut summaries = Vec::new();
    let want = |name: &str| args.op == "all" || args.op == name;
    let mut known = false;
    if want("projection") {
        known = true;
        summaries.push(qr_core::trials::projection_trials(&oracle, args.trials, args.seed, &[0.0, 2.0]));
    }
    if want("shorten") {
        known = true;
        summaries.push(qr_core::trials::shorten_trials(&oracle, args.trials, args.seed));
    }
    if want("annulus") {
        known = true;
        summaries.push(qr_core::trials::annulus_trials(&oracle, args.trials, args.seed));
    }
    if want("redirect11") {
        known = true;
        summaries.push(qr_core::trials::redirect_case1_trials(&oracle, args.trials, args.seed));
    }
    if !known {
        return Err(CliError::Usage(format!(
            "unknown op {:?}: expected all | projection | shorten | annulus | redirect11",
            args.op
        )));
    }
    let mut failed = false;
    for s in &summaries {
        println!(
            "{}: {} trials, {} failures (max measured q {:.4})",
            s.name, s.attempted, s.failures, s.max_q
        );
        if let Some(first) = &s.first_failure {
            println!("  first failure: {first}");
        }
        failed |= !s.passed();
    }
    if failed {
        return Err(CliError::Domain("surgery suite reported failures".into()));
    }
    Ok(())
}

fn cmd_plot(args: PlotArgs) -> Result<(), CliError> {
    let kind = PlotKind::parse(&args.kind).ok_or_else(|| {
        CliError::Usage(format!("bad kind {:?}: expected div_vs_r | loglog | q_vs_s", args.kind))
    })?;
    let text = std::fs::read_to_string(&args.input)?;
    let rows = tables::parse_csv(&text)?;
    if rows.is_empty() {
        return Err(CliError::Domain("no data rows in input".into()));
    }
    let series = series_from_rows(&rows, kind, &args.input)?;
    tables::write_text(&args.out, &render_svg(&series)?)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn series_from_rows(
    rows: &[tables::CsvRow],
    kind: PlotKind,
    input: &Path,
) -> Result<Series, CliError> {
    let family = rows[0].get("family").cloned().unwrap_or_default();
    let get_f64 = |row: &tables::CsvRow, key: &str| -> Option<f64> {
        row.get(key).and_then(|v| v.parse::<f64>().ok())
    };
    match kind {
        PlotKind::DivVsR | PlotKind::LogLog => {
            let mut points = Vec::new();
            for row in rows {
                if row.get("disconnected").map(|d| d == "true").unwrap_or(false) {
                    continue;
                }
                if let (Some(r), Some(div)) = (get_f64(row, "r"), get_f64(row, "div")) {
                    points.push((r, div));
                }
            }
            if kind == PlotKind::LogLog {
                let logged: Vec<(f64, f64)> =
                    points.iter().map(|&(r, d)| (r.ln(), d.max(1.0).ln())).collect();
                let records: Vec<(u32, qr_core::divergence::DivValue)> = points
                    .iter()
                    .map(|&(r, d)| (r as u32, qr_core::divergence::DivValue::Finite(d as u32)))
                    .collect();
                let annotation = fit_growth(&records)
                    .ok()
                    .and_then(|f| f.exponent)
                    .map(|e| format!("fitted exponent {e:.3}"))
                    .unwrap_or_default();
                Ok(Series {
                    title: format!("log-log divergence of {family}"),
                    x_label: "ln r".into(),
                    y_label: "ln Div(r)".into(),
                    points: logged,
                    annotation,
                })
            } else {
                Ok(Series {
                    title: format!("divergence of {family}"),
                    x_label: "r".into(),
                    y_label: "Div(r)".into(),
                    points,
                    annotation: String::new(),
                })
            }
        }
        PlotKind::QVsS => {
            let mut points = Vec::new();
            for row in rows {
                if let (Some(s), Some(q)) = (get_f64(row, "s"), get_f64(row, "q_measured")) {
                    points.push((s, q));
                }
            }
            if points.is_empty() {
                return Err(CliError::Domain(format!(
                    "{} has no redirect rows (expected the redirect CSV schema)",
                    input.display()
                )));
            }
            let annotation = rows[0].get("verdict").cloned().unwrap_or_default();
            Ok(Series {
                title: format!("redirecting constants for {family}"),
                x_label: "s".into(),
                y_label: "measured q".into(),
                points,
                annotation,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radii_parsing() {
        assert_eq!(parse_radii("4:24:4").unwrap(), vec![4, 8, 12, 16, 20, 24]);
        assert_eq!(parse_radii("4:8:4").unwrap(), vec![4, 8]);
        assert_eq!(parse_radii("36,72,144").unwrap(), vec![36, 72, 144]);
        assert_eq!(parse_radii("7").unwrap(), vec![7]);
        assert!(parse_radii("4:2:1").is_err());
        assert!(parse_radii("abc").is_err());
        assert!(parse_radii("4:8").is_err());
    }

    #[test]
    fn pair_strategy_parsing() {
        assert_eq!(parse_pairs("all").unwrap(), PairStrategy::AllSpherePairs);
        assert_eq!(parse_pairs("antipodal").unwrap(), PairStrategy::AntipodalHeuristic);
        assert_eq!(
            parse_pairs("sample:200:42").unwrap(),
            PairStrategy::Sample { count: 200, seed: 42 }
        );
        assert!(parse_pairs("sample:x:1").is_err());
        assert!(parse_pairs("everything").is_err());
    }

    #[test]
    fn ray_parsing() {
        let spec = parse_group_spec("z^2").unwrap();
        assert_eq!(parse_ray(&spec, "word:xy").unwrap(), RaySpec::PeriodicWord("xy".into()));
        match parse_ray(&spec, "toward:3;4").unwrap() {
            RaySpec::GeodesicToward(e) => assert_eq!(e.encode(), "3;4"),
            other => panic!("{other:?}"),
        }
        assert!(parse_ray(&spec, "spiral:x").is_err());
        assert!(parse_ray(&spec, "toward:nonsense").is_err());
    }
}
