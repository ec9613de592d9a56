//! Command-line front end: figure data as CSV, measure reports, Monte Carlo
//! ensembles and the acceptance checks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nmq_core::dephasing::{
    big_gamma, coherence_cn, rate_gamma, DephasingParams, RecoherenceParams,
};
use nmq_core::gaussian_noise::{
    ensemble_average, ou_path, InitialNoise, NoiseHamiltonianModel, OUParams,
};
use nmq_core::hybrid::{dephasing_chain_model, simulate_trajectories, TrajectoryEnsemble};
use nmq_core::measures::{
    default_witnesses, family_by_name, lambda_k, measure_mk, nmd_classify, FAMILY_NAMES,
};
use nmq_core::numerics::{ensemble_stats, RngStream, TimeGrid};
use nmq_core::random_unitary::example_rates;
use nmq_core::validation::{run_criterion, ValidationOptions, CRITERIA};
use nmq_core::DensityMatrix;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const DEFAULT_GAMMA: f64 = 1.0;
pub const DEFAULT_HORIZON: f64 = 10.0;
/// Horizon of `measure`, long enough for the coherence to return.
pub const DEFAULT_MEASURE_HORIZON: f64 = 40.0;
pub const DEFAULT_POINTS: usize = 1000;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_NTRAJ: usize = 10_000;
pub const DEFAULT_R: f64 = 0.5;
pub const DEFAULT_FIG4_N: [u32; 3] = [2, 10, 20];

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(#[from] nmq_core::Error),
    #[error("{0} validation criteria failed")]
    ValidationFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(nmq_core::Error::InvalidArgument(_)) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

#[derive(Debug, Parser)]
#[command(name = "nmq", version, about = "Non-Markovian qubit dephasing toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Rate γ(t) and integral Γ(t): `t,gamma_t,Gamma_t`.
    Fig1,
    /// Random-unitary rates: `t,gamma1,gamma2,gamma3`.
    Fig2,
    /// Recoherence curves: `t,c_2,c_10,c_20`.
    Fig4,
    /// M₁, divisibility and degree of a family; λ₁ samples as CSV.
    Measure,
    /// Collisional Monte Carlo: `t,coh_mc,stderr,coh_exact`.
    Trajectories,
    /// OU noise ensemble: `t,coh_mc,stderr,coh_cumulant_oracle`.
    Ou,
    /// Runs the acceptance checks.
    Validate,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Fig1 => "fig1",
            Command::Fig2 => "fig2",
            Command::Fig4 => "fig4",
            Command::Measure => "measure",
            Command::Trajectories => "trajectories",
            Command::Ou => "ou",
            Command::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// End of the time grid in units of 1/γ.
    #[arg(long, global = true)]
    pub horizon: Option<f64>,
    #[arg(long, global = true)]
    pub points: Option<usize>,
    /// Collision counts, comma separated (even).
    #[arg(long, global = true, value_delimiter = ',')]
    pub n: Option<Vec<u32>>,
    #[arg(long, global = true)]
    pub r: Option<f64>,
    #[arg(long, global = true)]
    pub ntraj: Option<usize>,
    #[arg(long, global = true, env = "NMQ_SEED")]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub diffusion: Option<f64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub family: Option<String>,
    /// key=value file; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Per-jump event log of `trajectories`.
    #[arg(long, global = true)]
    pub events: Option<PathBuf>,
    /// Lag-correlation table of `ou`.
    #[arg(long, global = true)]
    pub correlation_out: Option<PathBuf>,
    /// Subset of criteria for `validate`, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub criteria: Option<Vec<usize>>,
    /// Scales every validation tolerance; 0 forces failures.
    #[arg(long, global = true, hide = true)]
    pub tolerance_factor: Option<f64>,
}

/// Fully resolved run parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub gamma: f64,
    pub horizon: f64,
    pub points: usize,
    pub n: Vec<u32>,
    pub r: f64,
    pub ntraj: usize,
    pub seed: u64,
    pub diffusion: f64,
    pub out: Option<PathBuf>,
    pub family: String,
    pub events: Option<PathBuf>,
    pub correlation_out: Option<PathBuf>,
    pub criteria: Vec<usize>,
    pub tolerance_factor: f64,
}

const CONFIG_KEYS: [&str; 10] = [
    "gamma",
    "horizon",
    "points",
    "n",
    "r",
    "ntraj",
    "seed",
    "diffusion",
    "out",
    "family",
];

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_file(text: &str) -> CliResult<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return usage(format!("config line {}: expected key=value", lineno + 1));
        };
        let key = k.trim().to_string();
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return usage(format!("config line {}: unknown key '{key}'", lineno + 1));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

fn from_file<T: std::str::FromStr>(
    file: &BTreeMap<String, String>,
    key: &str,
) -> CliResult<Option<T>> {
    match file.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("config key '{key}': cannot parse '{v}'"))),
    }
}

fn positive(name: &str, v: f64) -> CliResult<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        usage(format!("--{name} must be positive, got {v}"))
    }
}

impl RunConfig {
    /// Flags, then the config file, then defaults.
    pub fn resolve(command: Command, flags: &Flags) -> CliResult<Self> {
        let file = match &flags.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|source| CliError::Io {
                    path: path.clone(),
                    source,
                })?;
                parse_config_file(&text)?
            }
            None => BTreeMap::new(),
        };
        let file_n = match file.get("n") {
            None => None,
            Some(v) => Some(
                v.split(',')
                    .map(|s| s.trim().parse::<u32>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| CliError::Usage(format!("config key 'n': cannot parse '{v}'")))?,
            ),
        };
        let default_horizon = if command == Command::Measure {
            DEFAULT_MEASURE_HORIZON
        } else {
            DEFAULT_HORIZON
        };
        let gamma = positive(
            "gamma",
            flags
                .gamma
                .or(from_file(&file, "gamma")?)
                .unwrap_or(DEFAULT_GAMMA),
        )?;
        let horizon = positive(
            "horizon",
            flags
                .horizon
                .or(from_file(&file, "horizon")?)
                .unwrap_or(default_horizon),
        )?;
        let points = flags
            .points
            .or(from_file(&file, "points")?)
            .unwrap_or(DEFAULT_POINTS);
        if points < 2 {
            return usage("--points must be at least 2");
        }
        let default_n = if command == Command::Fig4 {
            DEFAULT_FIG4_N.to_vec()
        } else {
            vec![2]
        };
        let n = flags.n.clone().or(file_n).unwrap_or(default_n);
        if n.is_empty() || n.iter().any(|&k| k < 2 || k % 2 != 0) {
            return usage(format!("--n values must be even and at least 2, got {n:?}"));
        }
        let r = flags.r.or(from_file(&file, "r")?).unwrap_or(DEFAULT_R);
        if !(0.0..=1.0).contains(&r) {
            return usage(format!("--r must lie in [0, 1], got {r}"));
        }
        let ntraj = flags
            .ntraj
            .or(from_file(&file, "ntraj")?)
            .unwrap_or(DEFAULT_NTRAJ);
        if ntraj == 0 {
            return usage("--ntraj must be at least 1");
        }
        let diffusion = positive(
            "diffusion",
            flags
                .diffusion
                .or(from_file(&file, "diffusion")?)
                .unwrap_or(gamma),
        )?;
        let family = flags
            .family
            .clone()
            .or(from_file(&file, "family")?)
            .unwrap_or_else(|| "dephasing".to_string());
        if !FAMILY_NAMES.contains(&family.as_str()) {
            return usage(format!(
                "unknown family '{family}', expected one of {}",
                FAMILY_NAMES.join(", ")
            ));
        }
        let criteria = flags
            .criteria
            .clone()
            .unwrap_or_else(|| (1..=CRITERIA).collect());
        if let Some(bad) = criteria.iter().find(|&&c| c == 0 || c > CRITERIA) {
            return usage(format!("criterion {bad} does not exist"));
        }
        let tolerance_factor = flags.tolerance_factor.unwrap_or(1.0);
        if !(tolerance_factor >= 0.0) {
            return usage("--tolerance-factor must be non-negative");
        }
        Ok(Self {
            command,
            gamma,
            horizon,
            points,
            n,
            r,
            ntraj,
            seed: flags
                .seed
                .or(from_file(&file, "seed")?)
                .unwrap_or(DEFAULT_SEED),
            diffusion,
            out: flags.out.clone().or(from_file(&file, "out")?),
            family,
            events: flags.events.clone(),
            correlation_out: flags.correlation_out.clone(),
            criteria,
            tolerance_factor,
        })
    }

    /// `points` times on `[0, horizon/γ]`.
    pub fn grid(&self) -> CliResult<TimeGrid> {
        Ok(TimeGrid::uniform(
            0.0,
            self.horizon / self.gamma,
            self.points,
        )?)
    }
}

/// A CSV table held in memory until written.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> CliResult<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format_value(*v)))?;
        }
        w.into_inner().map_err(|e| CliError::Io {
            path: PathBuf::from("<memory>"),
            source: e.into_error(),
        })
    }
}

/// Shortest representation that round-trips.
fn format_value(v: f64) -> String {
    format!("{v:?}")
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let io_err = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.flush().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// What a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    /// Main CSV, written to `--out` or standard output.
    pub table: Option<Table>,
    /// Extra files written alongside.
    pub extra: Vec<(PathBuf, Table)>,
    /// Human-readable report.
    pub report: Vec<String>,
    pub failed_criteria: usize,
}

impl Output {
    fn table(table: Table) -> Self {
        Self {
            table: Some(table),
            extra: Vec::new(),
            report: Vec::new(),
            failed_criteria: 0,
        }
    }
}

pub fn fig1(cfg: &RunConfig) -> CliResult<Table> {
    let p = DephasingParams::new(cfg.gamma)?;
    let mut t = Table::new(&["t", "gamma_t", "Gamma_t"]);
    for &time in cfg.grid()?.points() {
        t.push(vec![time, rate_gamma(time, &p)?, big_gamma(time, &p)?]);
    }
    Ok(t)
}

pub fn fig2(cfg: &RunConfig) -> CliResult<Table> {
    let mut t = Table::new(&["t", "gamma1", "gamma2", "gamma3"]);
    for &time in cfg.grid()?.points() {
        let r = example_rates(time, cfg.gamma)?.rates;
        t.push(vec![time, r[0], r[1], r[2]]);
    }
    Ok(t)
}

pub fn fig4(cfg: &RunConfig) -> CliResult<Table> {
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain(cfg.n.iter().map(|n| format!("c_{n}")))
        .collect();
    let params: Vec<RecoherenceParams> = cfg
        .n
        .iter()
        .map(|&n| RecoherenceParams::new(cfg.gamma, n))
        .collect::<Result<_, _>>()?;
    let mut t = Table {
        header,
        rows: Vec::new(),
    };
    for &time in cfg.grid()?.points() {
        let mut row = vec![time];
        for p in &params {
            row.push(coherence_cn(time, p)?);
        }
        t.push(row);
    }
    Ok(t)
}

pub fn measure(cfg: &RunConfig) -> CliResult<Output> {
    let family = family_by_name(&cfg.family, cfg.gamma, cfg.r)?;
    let horizon = cfg.horizon / cfg.gamma;
    let witnesses = default_witnesses(1)?;
    let report = measure_mk(family.as_ref(), 1, &witnesses, horizon)?;
    let verdict = nmd_classify(family.as_ref(), horizon)?;
    let mut lines = vec![
        format!("family: {}", family.name()),
        format!("gamma: {}  horizon: {}", cfg.gamma, horizon),
        format!("M1: {:.6}", report.m_k),
    ];
    for w in &report.witnesses {
        let ratio = w.ratio.map_or("skipped".to_string(), |r| format!("{r:.6}"));
        lines.push(format!(
            "  {}: N+ = {:.6e}  |N-| = {:.6e}  ratio = {ratio}",
            w.label, w.n_plus, w.n_minus
        ));
    }
    lines.push(format!("min indicator k=1: {:.6e}", verdict.min_k1));
    lines.push(format!("min indicator k=2: {:.6e}", verdict.min_k2));
    lines.push(format!(
        "divisible: {}",
        if verdict.min_k2 >= nmq_core::measures::VIOLATION_THRESHOLD {
            "yes"
        } else {
            "no"
        }
    ));
    lines.push(match verdict.degree {
        Some(d) => format!("NMD: {d}"),
        None => format!("NMD: indeterminate ({})", verdict.diagnostics),
    });

    let header: Vec<String> = std::iter::once("t".to_string())
        .chain(witnesses.iter().map(|w| format!("lambda_{}", w.label)))
        .collect();
    let mut table = Table {
        header,
        rows: Vec::new(),
    };
    for &t in cfg.grid()?.points() {
        let mut row = vec![t];
        for w in &witnesses {
            row.push(lambda_k(family.as_ref(), &w.op, t, 1)?.value);
        }
        table.push(row);
    }
    Ok(Output {
        table: cfg.out.is_some().then_some(table),
        extra: Vec::new(),
        report: lines,
        failed_criteria: 0,
    })
}

fn event_log(ens: &TrajectoryEnsemble) -> Table {
    let mut t = Table::new(&["trajectory", "stream_id", "time", "from_state", "to_state"]);
    for (i, rec) in ens.records.iter().enumerate() {
        for (j, &time) in rec.jump_times.iter().enumerate() {
            t.push(vec![
                i as f64,
                rec.stream_id as f64,
                time,
                rec.states[j] as f64,
                rec.states[j + 1] as f64,
            ]);
        }
    }
    t
}

pub fn trajectories(cfg: &RunConfig) -> CliResult<Output> {
    if cfg.n.len() != 1 {
        return usage("trajectories takes a single --n");
    }
    let n = cfg.n[0];
    let model = dephasing_chain_model(cfg.gamma, n as usize)?;
    let params = RecoherenceParams::new(cfg.gamma, n)?;
    let plus = DensityMatrix::from_bloch(1.0, 0.0, 0.0)?;
    let mut p0 = vec![0.0; model.n_states()];
    p0[0] = 1.0;
    let grid = cfg.grid()?;
    let ens = simulate_trajectories(&model, &plus, &p0, &grid, cfg.ntraj, cfg.seed)?;
    let mut table = Table::new(&["t", "coh_mc", "stderr", "coh_exact"]);
    let mut within = 0;
    for (k, &t) in grid.points().iter().enumerate() {
        let coh = 2.0 * ens.mean[k][(0, 1)].re;
        let se = 2.0 * ens.stderr[k][(0, 1)].re;
        let exact = coherence_cn(t, &params)?;
        if (coh - exact).abs() <= 3.0 * se || (coh - exact).abs() < 1e-12 {
            within += 1;
        }
        table.push(vec![t, coh, se, exact]);
    }
    let mut out = Output::table(table);
    out.report.push(format!(
        "{} trajectories, seed {}: {within}/{} rows within 3 standard errors",
        cfg.ntraj,
        cfg.seed,
        grid.len()
    ));
    if let Some(path) = &cfg.events {
        out.extra.push((path.clone(), event_log(&ens)));
    }
    Ok(out)
}

/// Lag step of the correlation table, in units of 1/γ.
pub const LAG_STEP: f64 = 0.25;
pub const LAG_COUNT: usize = 13;

/// Sample autocorrelation of stationary OU paths at lags `k·LAG_STEP/γ`.
pub fn ou_correlation_table(ou: &OUParams, ntraj: usize, seed: u64) -> CliResult<Table> {
    let dt = LAG_STEP / ou.gamma();
    let t_end = dt * (LAG_COUNT - 1) as f64;
    // Streams disjoint from those of the coherence ensemble.
    let offset = 1u64 << 40;
    let stats = ensemble_stats(ntraj, LAG_COUNT, |i| {
        let mut s = RngStream::new(seed, offset + i as u64);
        let path = ou_path(ou, InitialNoise::Stationary, dt, t_end, &mut s).expect("positive step");
        (0..LAG_COUNT)
            .map(|k| path.values[0] * path.values[k])
            .collect()
    });
    let mut t = Table::new(&["lag", "corr_mc", "stderr", "corr_exact"]);
    for k in 0..LAG_COUNT {
        let lag = k as f64 * dt;
        t.push(vec![
            lag,
            stats.mean[k],
            stats.stderr[k],
            ou.correlation(lag),
        ]);
    }
    Ok(t)
}

pub fn ou(cfg: &RunConfig) -> CliResult<Output> {
    let params = OUParams::new(cfg.gamma, cfg.diffusion)?;
    let model = NoiseHamiltonianModel::pure_dephasing(params);
    let plus = DensityMatrix::from_bloch(1.0, 0.0, 0.0)?;
    let grid = cfg.grid()?;
    let ens = ensemble_average(&model, &plus, &grid, cfg.ntraj, cfg.seed)?;
    let mut table = Table::new(&["t", "coh_mc", "stderr", "coh_cumulant_oracle"]);
    for (k, &t) in grid.points().iter().enumerate() {
        let coh = 2.0 * ens.mean[k][(0, 1)].re;
        let se = 2.0 * ens.stderr[k][(0, 1)].re;
        table.push(vec![
            t,
            coh,
            se,
            (-0.5 * params.integrated_variance(t)).exp(),
        ]);
    }
    let corr = ou_correlation_table(&params, cfg.ntraj, cfg.seed)?;
    let mut out = Output::table(table);
    out.report.push(format!(
        "stationary variance D/(2γ) = {:.6e}; lag correlations:",
        params.stationary_variance()
    ));
    for row in &corr.rows {
        out.report.push(format!(
            "  lag {:.3}: {:.6e} ± {:.1e} (exact {:.6e})",
            row[0], row[1], row[2], row[3]
        ));
    }
    if let Some(path) = &cfg.correlation_out {
        out.extra.push((path.clone(), corr));
    }
    Ok(out)
}

pub fn validate(cfg: &RunConfig) -> CliResult<Output> {
    let options = ValidationOptions {
        gamma: cfg.gamma,
        seed: cfg.seed,
        tolerance_factor: cfg.tolerance_factor,
    };
    let mut report = Vec::new();
    let mut failed = 0;
    for &id in &cfg.criteria {
        let outcome = run_criterion(id, &options).expect("criterion ids checked");
        if !outcome.passed {
            failed += 1;
        }
        report.push(outcome.summary_line());
    }
    report.push(format!(
        "summary passed={} failed={failed}",
        cfg.criteria.len() - failed
    ));
    Ok(Output {
        table: None,
        extra: Vec::new(),
        report,
        failed_criteria: failed,
    })
}

pub fn execute(cfg: &RunConfig) -> CliResult<Output> {
    match cfg.command {
        Command::Fig1 => fig1(cfg).map(Output::table),
        Command::Fig2 => fig2(cfg).map(Output::table),
        Command::Fig4 => fig4(cfg).map(Output::table),
        Command::Measure => measure(cfg),
        Command::Trajectories => trajectories(cfg),
        Command::Ou => ou(cfg),
        Command::Validate => validate(cfg),
    }
}

/// Runs a parsed command line and returns the process exit code. Data goes
/// to `--out` or `stdout`; reports go to `stdout` when the data has its own
/// file and to `stderr` otherwise.
pub fn run(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    match run_inner(cli, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn run_inner(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<i32> {
    let cfg = RunConfig::resolve(cli.command, &cli.flags)?;
    let out = execute(&cfg)?;
    let io_err = |source| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    };
    let mut report_to_stdout = true;
    if let Some(table) = &out.table {
        let bytes = table.to_csv()?;
        match &cfg.out {
            Some(path) => write_atomic(path, &bytes)?,
            None => {
                stdout.write_all(&bytes).map_err(io_err)?;
                report_to_stdout = false;
            }
        }
    }
    for (path, table) in &out.extra {
        write_atomic(path, &table.to_csv()?)?;
    }
    let sink: &mut dyn Write = if report_to_stdout { stdout } else { stderr };
    for line in &out.report {
        writeln!(sink, "{line}").map_err(io_err)?;
    }
    if out.failed_criteria > 0 {
        return Err(CliError::ValidationFailed(out.failed_criteria));
    }
    Ok(EXIT_OK)
}
