//! Command-line front end. Every command writes one CSV and a run manifest.

use crate::attackopt::maximize_crb;
use crate::config::{Config, WaterfillConfig};
use crate::dsa::{race_probability_exact, race_probability_mc, RaceSpec};
use crate::error::{Error, Result};
use crate::fisher::{crb_theta, fim_blocks_with, FimOptions};
use crate::model::Scenario;
use crate::outcome::DEFAULT_OUTCOME_CAP;
use crate::relax::{guarantee_report, waterfill_certified, Part, SensitivityTable};
use crate::simharness::mse_experiment;
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Bundled reference scenario used when `--config` is omitted.
pub const REFERENCE_CONFIG: &str = include_str!("../fixtures/reference.toml");

#[derive(Debug, Parser)]
#[command(name = "biot-crb", version, about = "CRB analysis of blockchain-stored sensor data under attack")]
pub struct Cli {
    /// TOML configuration (defaults to the bundled reference scenario).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// CSV destination; the manifest goes next to it. Stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Largest outcome space (or class count) to enumerate.
    #[arg(long, global = true)]
    pub cap: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// CRB and honest-data bound for the configured attack.
    Crb,
    /// Worst-case attack over xi and the fork point.
    Maximize,
    /// Relaxation guarantee.
    Bound,
    /// Water-filling on an explicit `[waterfill]` table.
    Waterfill,
    /// Double-spending success probabilities for every fork point.
    Dsa {
        /// Adversary share; overrides `dsa.alpha`.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        chain_length: Option<usize>,
        #[arg(long)]
        authentic_length: Option<usize>,
    },
    /// MLE Monte Carlo against the CRB.
    Simulate {
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Sweeps behind the comparison figures.
    Reproduce { figure: Figure },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    /// Chain length sweep.
    Fig2,
    /// Honest device count with one hijacked device.
    Fig3,
    /// Honest/hijacked split of a fixed device count.
    Fig4,
}

/// Header plus rows, every cell already formatted.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Shortest round-trip decimal.
pub fn fmt(v: f64) -> String {
    format!("{v}")
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| fmt(*x)).collect::<Vec<_>>().join(";")
}

pub struct Context {
    pub config: Config,
    pub config_source: String,
    pub seed: u64,
    pub cap: u64,
}

impl Context {
    pub fn load(config: Option<&Path>, seed: Option<u64>, cap: Option<u64>) -> Result<Self> {
        let (cfg, source) = match config {
            Some(p) => (Config::from_path(p)?, p.display().to_string()),
            None => (Config::parse(REFERENCE_CONFIG)?, "<bundled reference>".to_string()),
        };
        let seed = seed.or(cfg.seed).unwrap_or(0);
        let cap = cap.or(cfg.cap).unwrap_or(DEFAULT_OUTCOME_CAP);
        Ok(Self {
            config: cfg,
            config_source: source,
            seed,
            cap,
        })
    }

    fn fim(&self) -> FimOptions {
        FimOptions {
            cap: self.cap,
            ..FimOptions::factorized()
        }
    }
}

pub fn cmd_crb(ctx: &Context) -> Result<Table> {
    let c = &ctx.config;
    let s = c.scenario()?;
    let p = c.honest_pmf(s.theta)?;
    let attack = c.attack_spec(&s)?;
    let r = crb_theta(&fim_blocks_with(&s, &attack, &p, &ctx.fim())?)?;
    let mut t = Table::new(&["crb_theta", "bound", "schur_gap", "alignment_residual"]);
    t.rows.push(vec![
        fmt(r.crb_theta),
        fmt(r.bound),
        fmt(r.schur_gap),
        r.alignment_residual.map(fmt).unwrap_or_default(),
    ]);
    Ok(t)
}

pub fn cmd_maximize(ctx: &Context) -> Result<Table> {
    let c = &ctx.config;
    let s = c.scenario()?;
    let p = c.honest_pmf(s.theta)?;
    let fam = c.attack_family()?;
    let row = c.p_la_row(&s)?;
    let mut opts = c.opt_options(ctx.seed);
    opts.fim = ctx.fim();
    let r = maximize_crb(&s, &p, fam.as_ref(), &row, &opts)?;
    let mut t = Table::new(&["fork_point", "dsa_prob", "crb", "xi", "best", "honest_bound", "no_op"]);
    for fv in &r.per_fork_values {
        t.rows.push(vec![
            fv.fork_point.to_string(),
            fmt(row[fv.fork_point - 1]),
            fmt(fv.crb),
            fmt_vec(&fv.xi),
            (fv.fork_point == r.best_fork).to_string(),
            fmt(r.honest_bound),
            r.no_op.to_string(),
        ]);
    }
    Ok(t)
}

pub fn cmd_bound(ctx: &Context) -> Result<Table> {
    let c = &ctx.config;
    let s = c.scenario()?;
    let p = c.honest_pmf(s.theta)?;
    let row = c.p_la_row(&s).ok();
    let r = guarantee_report(&s, &p, row.as_deref(), ctx.cap, true)?;
    let mut t = Table::new(&["guarantee", "objective", "lambda_star", "honest_bound", "table_entries"]);
    t.rows.push(vec![
        fmt(r.guarantee),
        fmt(r.objective),
        fmt(r.lambda_star),
        fmt(r.honest_bound),
        r.table_entries.to_string(),
    ]);
    Ok(t)
}

pub fn cmd_waterfill(ctx: &Context) -> Result<Table> {
    let WaterfillConfig { x, w } = ctx
        .config
        .waterfill
        .clone()
        .ok_or_else(|| Error::Config("waterfill needs a [waterfill] table with x and w".into()))?;
    let table = SensitivityTable::from_parts(x, w)?;
    let s = waterfill_certified(&table)?;
    let count = |part| s.partition.iter().filter(|&&q| q == part).count().to_string();
    let mut t = Table::new(&["objective", "guarantee", "lambda_star", "y_star", "s1", "s2", "s3"]);
    t.rows.push(vec![
        fmt(s.objective),
        fmt(s.guarantee),
        fmt(s.lambda_star),
        fmt_vec(&s.y_star),
        count(Part::S1),
        count(Part::S2),
        count(Part::S3),
    ]);
    Ok(t)
}

pub fn cmd_dsa(
    ctx: &Context,
    alpha: Option<f64>,
    chain_length: Option<usize>,
    authentic_length: Option<usize>,
) -> Result<Table> {
    let c = &ctx.config;
    let alpha = alpha
        .or(c.dsa.alpha)
        .ok_or_else(|| Error::Config("dsa needs --alpha or dsa.alpha".into()))?;
    let l = chain_length.unwrap_or(c.scenario.chain_length);
    let l0 = authentic_length.unwrap_or(c.scenario.authentic_length);
    let mc = c.dsa.mc_trials;
    let mut t = Table::new(&[
        "fork_point",
        "counterfeit_needed",
        "honest_needed",
        "probability",
        "mc_estimate",
        "mc_stderr",
    ]);
    for la in 1..=l0 {
        let spec = RaceSpec::for_fork(alpha, l, l0, la)?;
        let (est, se) = if mc > 0 {
            let m = race_probability_mc(&spec, mc, ctx.seed)?;
            (fmt(m.estimate), fmt(m.standard_error))
        } else {
            (String::new(), String::new())
        };
        t.rows.push(vec![
            la.to_string(),
            spec.counterfeit_needed.to_string(),
            spec.honest_needed.to_string(),
            fmt(race_probability_exact(&spec)),
            est,
            se,
        ]);
    }
    Ok(t)
}

pub fn cmd_simulate(ctx: &Context, trials: Option<usize>) -> Result<Table> {
    let c = &ctx.config;
    let s = c.scenario()?;
    let attack = c.attack_spec(&s)?;
    let model = c.sim_model(&s, attack.dsa_prob)?;
    let trials = trials.unwrap_or(c.simulation.trials);
    let mut t = Table::new(&[
        "chains_per_estimate",
        "trials",
        "theta_mse",
        "xi_mse",
        "theta_bias",
        "crb_theta",
        "ratio",
        "ratio_stderr",
        "boundary_hits",
    ]);
    for &n in &c.simulation.chains_per_estimate {
        let r = mse_experiment(&model, s.theta, &c.attack.xi, n, trials, ctx.seed, &c.mle_options())?;
        t.rows.push(vec![
            n.to_string(),
            r.trials.to_string(),
            fmt(r.theta_mse),
            fmt(r.xi_mse),
            fmt(r.theta_bias),
            fmt(r.crb_theta),
            fmt(r.ratio),
            fmt(r.ratio_stderr),
            r.boundary_hits.to_string(),
        ]);
    }
    Ok(t)
}

/// One sweep point: worst-case CRB and relaxation guarantee.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub sweep_var: usize,
    pub worst_case_crb: f64,
    pub relaxation_guarantee: f64,
    pub honest_bound: f64,
    pub best_fork: usize,
    pub best_xi: Vec<f64>,
    /// `None` when computed, otherwise why the point was skipped.
    pub skipped: Option<String>,
}

fn sweep_point(ctx: &Context, var: usize, s: &Scenario, row: &[f64]) -> Result<SweepPoint> {
    let c = &ctx.config;
    let p = c.honest_pmf(s.theta)?;
    let fam = c.attack_family()?;
    let mut opts = c.opt_options(ctx.seed);
    opts.fim = ctx.fim();
    // the configured xi seeds the search alongside the generated starts
    opts.user_starts.insert(0, c.attack.xi.clone());
    let run = || -> Result<SweepPoint> {
        let best = maximize_crb(s, &p, fam.as_ref(), row, &opts)?;
        let g = guarantee_report(s, &p, Some(row), ctx.cap, true)?;
        Ok(SweepPoint {
            sweep_var: var,
            worst_case_crb: best.best_crb,
            relaxation_guarantee: g.guarantee,
            honest_bound: g.honest_bound,
            best_fork: best.best_fork,
            best_xi: best.best_xi,
            skipped: None,
        })
    };
    match run() {
        Err(e @ Error::OutcomeSpaceTooLarge { .. }) => Ok(SweepPoint {
            sweep_var: var,
            worst_case_crb: f64::NAN,
            relaxation_guarantee: f64::NAN,
            honest_bound: f64::NAN,
            best_fork: 0,
            best_xi: Vec::new(),
            skipped: Some(e.to_string()),
        }),
        other => other,
    }
}

/// Sweep points for one figure, in sweep order.
pub fn reproduce_points(ctx: &Context, figure: Figure) -> Result<Vec<SweepPoint>> {
    let c = &ctx.config;
    let sweep = c
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("reproduce needs a [sweep] table".into()))?;
    let base = c.scenario()?;
    let q = base.alphabet_size;
    let l0 = base.authentic_length;
    let theta = base.theta;
    let points: Vec<(usize, Scenario, Vec<f64>)> = match figure {
        Figure::Fig2 => sweep
            .chain_lengths
            .iter()
            .map(|&l| {
                let mut s = base.clone();
                s.chain_length = l;
                Ok((l, s, sweep.row_for(l)?.to_vec()))
            })
            .collect::<Result<_>>()?,
        Figure::Fig3 => {
            let row = sweep.row_for(base.chain_length)?.to_vec();
            sweep
                .honest_counts
                .iter()
                .map(|&h| {
                    let s = Scenario::with_malicious(h + 1, &[h], base.chain_length, l0, q, theta);
                    (h, s, row.clone())
                })
                .collect()
        }
        Figure::Fig4 => {
            let row = sweep.row_for(base.chain_length)?.to_vec();
            let n = sweep.fixed_devices;
            sweep
                .fixed_honest_counts
                .iter()
                .map(|&h| {
                    let mal: Vec<usize> = (h..n).collect();
                    let s = Scenario::with_malicious(n, &mal, base.chain_length, l0, q, theta);
                    (h, s, row.clone())
                })
                .collect()
        }
    };
    points
        .par_iter()
        .map(|(var, s, row)| sweep_point(ctx, *var, s, row))
        .collect()
}

pub fn cmd_reproduce(ctx: &Context, figure: Figure) -> Result<Table> {
    let pts = reproduce_points(ctx, figure)?;
    let mut t = Table::new(&[
        "sweep_var",
        "worst_case_crb",
        "relaxation_guarantee",
        "honest_bound",
        "best_fork",
        "best_xi",
        "status",
    ]);
    for p in pts {
        t.rows.push(vec![
            p.sweep_var.to_string(),
            fmt(p.worst_case_crb),
            fmt(p.relaxation_guarantee),
            fmt(p.honest_bound),
            p.best_fork.to_string(),
            fmt_vec(&p.best_xi),
            p.skipped.map_or_else(|| "ok".to_string(), |r| format!("skipped: {r}")),
        ]);
    }
    Ok(t)
}

pub fn execute(ctx: &Context, command: &Command) -> Result<Table> {
    match command {
        Command::Crb => cmd_crb(ctx),
        Command::Maximize => cmd_maximize(ctx),
        Command::Bound => cmd_bound(ctx),
        Command::Waterfill => cmd_waterfill(ctx),
        Command::Dsa {
            alpha,
            chain_length,
            authentic_length,
        } => cmd_dsa(ctx, *alpha, *chain_length, *authentic_length),
        Command::Simulate { trials } => cmd_simulate(ctx, *trials),
        Command::Reproduce { figure } => cmd_reproduce(ctx, *figure),
    }
}

fn command_name(c: &Command) -> String {
    match c {
        Command::Crb => "crb".into(),
        Command::Maximize => "maximize".into(),
        Command::Bound => "bound".into(),
        Command::Waterfill => "waterfill".into(),
        Command::Dsa { .. } => "dsa".into(),
        Command::Simulate { .. } => "simulate".into(),
        Command::Reproduce { figure } => format!("reproduce {}", figure.to_possible_value().unwrap().get_name()),
    }
}

/// Resolved config plus a `[manifest]` table. Feeding it back through
/// `--config` reproduces the run.
pub fn manifest(ctx: &Context, command: &Command) -> Result<String> {
    let mut cfg = ctx.config.clone();
    cfg.seed = Some(ctx.seed);
    cfg.cap = Some(ctx.cap);
    let mut m = toml::Table::new();
    m.insert("command".into(), command_name(command).into());
    m.insert("config_path".into(), ctx.config_source.clone().into());
    m.insert("tool_version".into(), env!("CARGO_PKG_VERSION").into());
    let ts = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    m.insert("timestamp".into(), toml::Value::Integer(ts as i64));
    cfg.manifest = Some(m);
    cfg.to_toml()
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.toml");
    out.with_file_name(name)
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_os_string();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Runs a parsed command line. Nothing is written unless the whole command
/// succeeds.
pub fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    }
    let ctx = Context::load(cli.config.as_deref(), cli.seed, cli.cap)?;
    let table = execute(&ctx, &cli.command)?;
    let csv = table.to_csv()?;
    let man = manifest(&ctx, &cli.command)?;
    match &cli.out {
        Some(out) => {
            write_atomic(out, &csv)?;
            write_atomic(&manifest_path(out), &man)?;
        }
        None => {
            std::io::stdout().write_all(csv.as_bytes())?;
            for line in man.lines() {
                eprintln!("# {line}");
            }
        }
    }
    Ok(())
}

/// Entry point for the binary: parse, run, map errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
