//! `sc-caf`: command-line front end for the density-evolution toolkit.

mod selftest;

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use sc_caf::bpsim::{monte_carlo, McConfig, McResult};
use sc_caf::channel::{sir_threshold, BiAwgnChannel, ChannelKind, DegradedChannel, Scheme};
use sc_caf::codes::{sample_code, Ensemble, Protograph, RegularEnsemble};
use sc_caf::de::{run_de, write_trace_csv, DeConfig};
use sc_caf::threshold::{comparison_report, extrapolate, find_threshold, sweep_l, RateEntry, SearchConfig, SweepPoint};

const VERSION: &str = concat!("sc-caf ", env!("CARGO_PKG_VERSION"));

/// Reference operating point.
const DEFAULT_N: usize = 100_000;
const DEFAULT_T: usize = 2000;
/// `--fast` preset.
const FAST_N: usize = 10_000;
const FAST_T: usize = 500;

#[derive(Parser, Debug)]
#[command(name = "sc-caf", version, about = "Density evolution and BP thresholds for (SC-)LDPC codes on the compute-and-forward relay channel")]
struct Cli {
    /// Cap on worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Use N = 10^4, T = 500 unless given explicitly.
    #[arg(long, global = true)]
    fast: bool,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the result here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

/// Everything that determines a result. Embedded in every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RunConfig {
    #[serde(flatten)]
    command: Command,
    format: Format,
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
enum Command {
    /// Information rates and the noise levels where they meet a rate.
    Sir(SirArgs),
    /// One density-evolution run with its BER trace.
    DeRun(DeRunArgs),
    /// BP threshold by scan and bisection.
    Threshold(ThresholdArgs),
    /// Thresholds of (dl, dr, L) chains over several L.
    SweepL(SweepArgs),
    /// Fit sigma(L) = sigma_inf + a exp(-b L^c) to a sweep.
    Extrapolate(ExtrapolateArgs),
    /// CAF vs SD information-rate thresholds per rate.
    Compare(CompareArgs),
    /// Monte-Carlo BP decoding of a sampled code.
    BpSim(BpSimArgs),
    /// Quick invariant checks.
    Selftest(SelftestArgs),
    /// Re-run the configuration embedded in a result file.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EnsembleArgs {
    #[arg(long, default_value_t = 3)]
    dl: usize,
    #[arg(long, default_value_t = 6)]
    dr: usize,
    /// Chain length; omit for the uncoupled regular ensemble.
    #[arg(long = "L", alias = "length")]
    #[serde(rename = "L")]
    length: Option<usize>,
}

impl EnsembleArgs {
    fn ensemble(&self) -> Result<Ensemble> {
        Ok(match self.length {
            None => RegularEnsemble::new(self.dl, self.dr)?.into(),
            Some(l) => Protograph::coupled(self.dl, self.dr, l)?.into(),
        })
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DeArgs {
    /// Population size (default 10^5, or 10^4 with --fast).
    #[arg(long = "N", alias = "population")]
    #[serde(rename = "N")]
    population: Option<usize>,
    /// Maximum sweeps (default 2000, or 500 with --fast).
    #[arg(long = "T", alias = "max-sweeps")]
    #[serde(rename = "T")]
    max_sweeps: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    stop_ber: f64,
    /// Consecutive sweeps below stop_ber needed to stop early.
    #[arg(long, default_value_t = 10)]
    confirm_sweeps: usize,
    /// Give up when the BER trend over this many sweeps cannot finish in
    /// time (for coupled chains).
    #[arg(long)]
    stall_window: Option<usize>,
    #[arg(long, value_enum, default_value_t = ChannelArg::Degraded)]
    channel: ChannelArg,
}

impl DeArgs {
    fn resolve(&mut self, fast: bool) {
        let (n, t) = if fast { (FAST_N, FAST_T) } else { (DEFAULT_N, DEFAULT_T) };
        self.population.get_or_insert(n);
        self.max_sweeps.get_or_insert(t);
    }

    fn config(&self, workers: Option<usize>) -> DeConfig {
        DeConfig {
            population: self.population.unwrap_or(DEFAULT_N),
            max_sweeps: self.max_sweeps.unwrap_or(DEFAULT_T),
            seed: self.seed,
            stop_ber: self.stop_ber,
            confirm_sweeps: self.confirm_sweeps,
            workers,
            stall_window: self.stall_window,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ChannelArg {
    Degraded,
    BiAwgn,
}

impl From<ChannelArg> for ChannelKind {
    fn from(c: ChannelArg) -> Self {
        match c {
            ChannelArg::Degraded => ChannelKind::Degraded,
            ChannelArg::BiAwgn => ChannelKind::BiAwgn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum SchemeArg {
    Caf,
    Sd,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Caf => Scheme::Caf,
            SchemeArg::Sd => Scheme::Sd,
        }
    }
}

/// Accepts decimals or fractions such as `2/3`.
fn parse_rate(s: &str) -> std::result::Result<f64, String> {
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
            let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
            a / b
        }
        None => s.trim().parse().map_err(|e| format!("{e}"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not a finite number"))
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SirArgs {
    /// Scheme for --rate; both when omitted.
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    /// Per-user rate whose threshold noise level is wanted.
    #[arg(long, value_parser = parse_rate, conflicts_with = "sigma", required_unless_present = "sigma")]
    rate: Option<f64>,
    /// Evaluate both information rates at this noise level.
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DeRunArgs {
    #[command(flatten)]
    #[serde(flatten)]
    ensemble: EnsembleArgs,
    #[arg(long)]
    sigma: f64,
    #[command(flatten)]
    #[serde(flatten)]
    de: DeArgs,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ThresholdArgs {
    #[command(flatten)]
    #[serde(flatten)]
    ensemble: EnsembleArgs,
    #[arg(long, default_value_t = 0.005)]
    resolution: f64,
    #[command(flatten)]
    #[serde(flatten)]
    de: DeArgs,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SweepArgs {
    #[arg(long, default_value_t = 3)]
    dl: usize,
    #[arg(long, default_value_t = 6)]
    dr: usize,
    /// Chain lengths, comma separated.
    #[arg(long = "Ls", alias = "lengths", value_delimiter = ',', default_value = "5,10,15,20,25,30")]
    #[serde(rename = "Ls")]
    lengths: Vec<usize>,
    #[arg(long, default_value_t = 0.005)]
    resolution: f64,
    #[command(flatten)]
    #[serde(flatten)]
    de: DeArgs,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ExtrapolateArgs {
    /// A JSON result of `sweep-l`.
    #[arg(long, required_unless_present = "points", conflicts_with = "points")]
    input: Option<PathBuf>,
    /// Inline points `L:sigma`, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_point)]
    points: Option<Vec<(f64, f64)>>,
    /// Largest accepted RMS residual (default: the sweep resolution, else 0.005).
    #[arg(long)]
    max_residual: Option<f64>,
}

fn parse_point(s: &str) -> std::result::Result<(f64, f64), String> {
    let (l, v) = s.split_once(':').ok_or_else(|| format!("expected L:sigma, got `{s}`"))?;
    Ok((
        l.trim().parse().map_err(|e| format!("{e}"))?,
        v.trim().parse().map_err(|e| format!("{e}"))?,
    ))
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CompareArgs {
    /// Per-user rates, comma separated; fractions allowed.
    #[arg(long, value_delimiter = ',', value_parser = parse_rate, default_value = "1/3,1/2,2/3")]
    rates: Vec<f64>,
    /// Measured uncoupled BP thresholds, one per rate.
    #[arg(long, value_delimiter = ',')]
    uncoupled_bp: Vec<f64>,
    /// Extrapolated coupled BP thresholds, one per rate.
    #[arg(long, value_delimiter = ',')]
    coupled_bp: Vec<f64>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BpSimArgs {
    #[command(flatten)]
    #[serde(flatten)]
    ensemble: EnsembleArgs,
    /// Block length of a regular code, or the lift size of a coupled one.
    #[arg(long, alias = "lift")]
    n: usize,
    #[arg(long)]
    sigma: f64,
    #[arg(long, default_value_t = 100)]
    frames: usize,
    #[arg(long, default_value_t = 50)]
    max_iter: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    code_seed: u64,
    /// Also report the BER after every iteration.
    #[arg(long)]
    trace: bool,
    /// Write the sampled parity-check matrix here.
    #[arg(long)]
    code_out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SelftestArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ReplayArgs {
    /// Result file written by an earlier run.
    input: PathBuf,
    /// Compare against the file instead of printing; fail on any difference.
    #[arg(long)]
    check: bool,
}

/// Serialized output: a JSON document, or CSV text.
enum Rendered {
    Json(Value),
    Csv(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    if cli.workers == Some(0) {
        bail!("--workers must be >= 1");
    }
    if let Command::Replay(r) = &cli.command {
        return replay(r, cli.workers, cli.output.as_ref());
    }
    let mut command = cli.command;
    resolve_defaults(&mut command, cli.fast);
    let config = RunConfig {
        command,
        format: cli.format,
        output: cli.output.clone(),
    };
    let (text, ok) = execute(&config, cli.workers)?;
    emit(&text, cli.output.as_ref())?;
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn resolve_defaults(command: &mut Command, fast: bool) {
    match command {
        Command::DeRun(a) => a.de.resolve(fast),
        Command::Threshold(a) => a.de.resolve(fast),
        Command::SweepL(a) => a.de.resolve(fast),
        _ => {}
    }
}

fn emit(text: &str, output: Option<&PathBuf>) -> Result<()> {
    match output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn replay(args: &ReplayArgs, workers: Option<usize>, output: Option<&PathBuf>) -> Result<ExitCode> {
    let original = fs::read_to_string(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let config = embedded_config(&original).context("no embedded configuration found")?;
    let (text, ok) = execute(&config, workers)?;
    if args.check {
        if text != original {
            bail!("replay differs from {}", args.input.display());
        }
        eprintln!("replay identical to {}", args.input.display());
        return Ok(ExitCode::SUCCESS);
    }
    emit(&text, output)?;
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

/// JSON results carry a `config` field; CSV results a `# config=` line.
fn embedded_config(text: &str) -> Result<RunConfig> {
    if let Some(line) = text.lines().find_map(|l| l.strip_prefix("# config=")) {
        return Ok(serde_json::from_str(line)?);
    }
    let doc: Value = serde_json::from_str(text)?;
    Ok(serde_json::from_value(doc.get("config").cloned().context("missing `config`")?)?)
}

/// Run a configuration; returns the rendered output and whether the command
/// itself reported success.
fn execute(config: &RunConfig, workers: Option<usize>) -> Result<(String, bool)> {
    let (rendered, ok) = compute(&config.command, config.format, workers)?;
    let text = match rendered {
        Rendered::Json(result) => {
            let doc = serde_json::json!({
                "version": VERSION,
                "config": config,
                "result": result,
            });
            serde_json::to_string_pretty(&doc)? + "\n"
        }
        Rendered::Csv(body) => {
            format!("# version={VERSION}\n# config={}\n{body}", serde_json::to_string(config)?)
        }
    };
    Ok((text, ok))
}

fn compute(command: &Command, format: Format, workers: Option<usize>) -> Result<(Rendered, bool)> {
    let csv = format == Format::Csv;
    Ok(match command {
        Command::Sir(a) => (cmd_sir(a, csv)?, true),
        Command::DeRun(a) => (cmd_de_run(a, csv, workers)?, true),
        Command::Threshold(a) => (cmd_threshold(a, csv, workers)?, true),
        Command::SweepL(a) => (cmd_sweep(a, csv, workers)?, true),
        Command::Extrapolate(a) => (cmd_extrapolate(a, csv)?, true),
        Command::Compare(a) => (cmd_compare(a, csv)?, true),
        Command::BpSim(a) => (cmd_bp_sim(a, csv, workers)?, true),
        Command::Selftest(a) => {
            let report = selftest::run(a.seed, workers);
            let ok = report.iter().all(|c| c.passed);
            let out = if csv {
                let mut w = csv::Writer::from_writer(Vec::new());
                for c in &report {
                    w.serialize(c)?;
                }
                Rendered::Csv(String::from_utf8(w.into_inner()?)?)
            } else {
                Rendered::Json(serde_json::to_value(&report)?)
            };
            (out, ok)
        }
        Command::Replay(_) => bail!("replay cannot be nested"),
    })
}

fn csv_rows<T: Serialize>(rows: &[T]) -> Result<Rendered> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(Rendered::Csv(String::from_utf8(w.into_inner()?)?))
}

#[derive(Serialize)]
struct SirRow {
    scheme: &'static str,
    rate: f64,
    sigma: f64,
}

#[derive(Serialize)]
struct SirAtSigma {
    sigma: f64,
    sir_caf: f64,
    mi_sd: f64,
}

fn cmd_sir(a: &SirArgs, csv: bool) -> Result<Rendered> {
    if let Some(sigma) = a.sigma {
        let ch = DegradedChannel::new(sigma)?;
        let row = SirAtSigma {
            sigma,
            sir_caf: ch.sir_caf()?,
            mi_sd: ch.mi_sd()?,
        };
        return if csv { csv_rows(&[row]) } else { Ok(Rendered::Json(serde_json::to_value(row)?)) };
    }
    let rate = a.rate.context("either --rate or --sigma is required")?;
    let schemes = match a.scheme {
        Some(s) => vec![s],
        None => vec![SchemeArg::Caf, SchemeArg::Sd],
    };
    let rows = schemes
        .into_iter()
        .map(|s| {
            Ok(SirRow {
                scheme: if s == SchemeArg::Caf { "caf" } else { "sd" },
                rate,
                sigma: sir_threshold(s.into(), rate)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if csv {
        csv_rows(&rows)
    } else {
        Ok(Rendered::Json(serde_json::to_value(rows)?))
    }
}

fn cmd_de_run(a: &DeRunArgs, csv: bool, workers: Option<usize>) -> Result<Rendered> {
    let ensemble = a.ensemble.ensemble()?;
    let cfg = a.de.config(workers);
    cfg.validate()?;
    let run = match ChannelKind::from(a.de.channel) {
        ChannelKind::Degraded => run_de(&ensemble, DegradedChannel::new(a.sigma)?, &cfg)?,
        ChannelKind::BiAwgn => run_de(&ensemble, BiAwgnChannel::new(a.sigma)?, &cfg)?,
    };
    if csv {
        let mut out = Vec::new();
        write_trace_csv(&mut out, &run.trace, a.ensemble.length.is_some())?;
        Ok(Rendered::Csv(String::from_utf8(out)?))
    } else {
        Ok(Rendered::Json(serde_json::to_value(run)?))
    }
}

fn search_config(de: &DeArgs, resolution: f64, workers: Option<usize>) -> Result<SearchConfig> {
    let cfg = SearchConfig {
        de: de.config(workers),
        resolution,
        channel: de.channel.into(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_threshold(a: &ThresholdArgs, csv: bool, workers: Option<usize>) -> Result<Rendered> {
    let ensemble = a.ensemble.ensemble()?;
    let cfg = search_config(&a.de, a.resolution, workers)?;
    let result = find_threshold(&ensemble, &cfg)?;
    if csv {
        csv_rows(&result.verdicts)
    } else {
        Ok(Rendered::Json(serde_json::to_value(result)?))
    }
}

#[derive(Serialize)]
struct SweepRow {
    #[serde(rename = "L")]
    length: usize,
    design_rate: f64,
    sir_sigma: Option<f64>,
    sigma_bp: Option<f64>,
    sigma_decodable: Option<f64>,
    sigma_undecodable: Option<f64>,
    error: Option<String>,
}

fn cmd_sweep(a: &SweepArgs, csv: bool, workers: Option<usize>) -> Result<Rendered> {
    let cfg = search_config(&a.de, a.resolution, workers)?;
    let points = sweep_l(a.dl, a.dr, &a.lengths, &cfg)?;
    if csv {
        let rows: Vec<SweepRow> = points
            .iter()
            .map(|p| SweepRow {
                length: p.length,
                design_rate: p.design_rate,
                sir_sigma: p.sir_sigma,
                sigma_bp: p.threshold.as_ref().map(|t| t.sigma_bp),
                sigma_decodable: p.threshold.as_ref().map(|t| t.bracket.decodable),
                sigma_undecodable: p.threshold.as_ref().map(|t| t.bracket.undecodable),
                error: p.error.clone(),
            })
            .collect();
        csv_rows(&rows)
    } else {
        Ok(Rendered::Json(serde_json::to_value(points)?))
    }
}

fn cmd_extrapolate(a: &ExtrapolateArgs, csv: bool) -> Result<Rendered> {
    let (points, sweep_resolution) = match (&a.points, &a.input) {
        (Some(p), _) => (p.clone(), None),
        (None, Some(path)) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            sweep_points(&text).with_context(|| format!("{} is not a sweep-l result", path.display()))?
        }
        (None, None) => bail!("either --input or --points is required"),
    };
    let max_residual = a.max_residual.or(sweep_resolution).unwrap_or(0.005);
    let fit = extrapolate(&points, max_residual)?;
    if csv {
        #[derive(Serialize)]
        struct Row {
            sigma_inf: f64,
            a: f64,
            b: f64,
            c: f64,
            residual: f64,
        }
        csv_rows(&[Row {
            sigma_inf: fit.sigma_inf,
            a: fit.a,
            b: fit.b,
            c: fit.c,
            residual: fit.residual,
        }])
    } else {
        Ok(Rendered::Json(serde_json::to_value(fit)?))
    }
}

/// `(L, sigma_bp)` pairs and the search resolution from a sweep JSON file.
fn sweep_points(text: &str) -> Result<(Vec<(f64, f64)>, Option<f64>)> {
    let doc: Value = serde_json::from_str(text)?;
    let sweep: Vec<SweepPoint> = serde_json::from_value(doc.get("result").cloned().context("missing `result`")?)?;
    let resolution = doc
        .pointer("/config/resolution")
        .and_then(Value::as_f64);
    let points = sweep
        .iter()
        .filter_map(|p| p.threshold.as_ref().map(|t| (p.length as f64, t.sigma_bp)))
        .collect();
    Ok((points, resolution))
}

fn cmd_compare(a: &CompareArgs, csv: bool) -> Result<Rendered> {
    for (name, v) in [("--uncoupled-bp", &a.uncoupled_bp), ("--coupled-bp", &a.coupled_bp)] {
        if !v.is_empty() && v.len() != a.rates.len() {
            bail!("{name} needs one value per rate ({} rates, {} values)", a.rates.len(), v.len());
        }
    }
    let entries: Vec<RateEntry> = a
        .rates
        .iter()
        .enumerate()
        .map(|(i, &rate)| RateEntry {
            rate,
            uncoupled_bp: a.uncoupled_bp.get(i).copied(),
            coupled_bp: a.coupled_bp.get(i).copied(),
        })
        .collect();
    let rows = comparison_report(&entries)?;
    if csv {
        csv_rows(&rows)
    } else {
        Ok(Rendered::Json(serde_json::to_value(rows)?))
    }
}

fn cmd_bp_sim(a: &BpSimArgs, csv: bool, workers: Option<usize>) -> Result<Rendered> {
    let ensemble = a.ensemble.ensemble()?;
    let code = sample_code(&ensemble, a.n, a.code_seed)?;
    if let Some(path) = &a.code_out {
        fs::write(path, code.to_text()).with_context(|| format!("writing {}", path.display()))?;
    }
    let channel = DegradedChannel::new(a.sigma)?;
    let cfg = McConfig {
        frames: a.frames,
        max_iter: a.max_iter,
        seed: a.seed,
        workers,
        trace: a.trace,
    };
    let result = monte_carlo(&code, &channel, &cfg)?;
    if csv {
        let mut out = Vec::new();
        writeln!(out, "{}", McResult::CSV_HEADER)?;
        result.write_csv_row(&mut out)?;
        Ok(Rendered::Csv(String::from_utf8(out)?))
    } else {
        Ok(Rendered::Json(serde_json::json!({
            "code": code.origin(),
            "simulation": result,
        })))
    }
}
