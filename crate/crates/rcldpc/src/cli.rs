//! The `rcldpc` command line.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rcldpc_core::channel::{self, EbnoLimit, LimitSearch};
use rcldpc_core::decoder::{CheckRule, DecodeConfig};
use rcldpc_core::exit::{measure_detector_exit, SurfaceSpec};
use rcldpc_core::jfun::JFunction;
use rcldpc_core::lifting::{girth_of, lift, LiftOrder, QcCode};
use rcldpc_core::rng::{child_seed, Purpose};
use rcldpc_core::search::{self, BaseSearchSpec, Objective, Prefilter, RcSearchSpec};
use rcldpc_core::sim::{self, Link, PointOptions, StopRule};
use rcldpc_core::{ChannelPoly, ExitSurface, Protomatrix, Runner, Trellis};
use serde::Serialize;
use serde_json::json;

use crate::formats::{self, Manifest, ResultRow, SimPlan, SirRow, ThresholdRow};
use crate::parallel::{available_workers, Parallel};

/// Exit status for domain errors (bad input data, failed analyses).
pub const EXIT_DOMAIN: i32 = 1;
/// Exit status for malformed command lines.
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "rcldpc", version, about = "Protograph LDPC design and simulation for ISI channels", arg_required_else_help = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// i.u.d. information rate: Eb/N0 limit at a rate, or an SIR sweep.
    Capacity(CapacityArgs),
    /// Measure a detector EXIT surface.
    ExitTable(ExitTableArgs),
    /// PEXIT thresholds of one or more codes.
    Threshold(ThresholdArgs),
    /// Search the 3x6 rate-1/2 base template.
    SearchBase(SearchBaseArgs),
    /// Greedy nested lengthening by new columns.
    ExtendNested(ExtendNestedArgs),
    /// Rate-compatible extension by new check rows.
    ExtendRc(ExtendRcArgs),
    /// Two-stage quasi-cyclic lifting.
    Lift(LiftArgs),
    /// Girth and short-cycle counts of a lifted code.
    Girth(GirthArgs),
    /// Monte-Carlo FER/BER sweep with turbo equalization.
    Simulate(SimulateArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Capacity(_) => "capacity",
            Command::ExitTable(_) => "exit-table",
            Command::Threshold(_) => "threshold",
            Command::SearchBase(_) => "search-base",
            Command::ExtendNested(_) => "extend-nested",
            Command::ExtendRc(_) => "extend-rc",
            Command::Lift(_) => "lift",
            Command::Girth(_) => "girth",
            Command::Simulate(_) => "simulate",
        }
    }

    fn flags(&self) -> serde_json::Value {
        let v = match self {
            Command::Capacity(a) => serde_json::to_value(a),
            Command::ExitTable(a) => serde_json::to_value(a),
            Command::Threshold(a) => serde_json::to_value(a),
            Command::SearchBase(a) => serde_json::to_value(a),
            Command::ExtendNested(a) => serde_json::to_value(a),
            Command::ExtendRc(a) => serde_json::to_value(a),
            Command::Lift(a) => serde_json::to_value(a),
            Command::Girth(a) => serde_json::to_value(a),
            Command::Simulate(a) => serde_json::to_value(a),
        };
        v.expect("flags serialize")
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Common {
    /// Master seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads [default: available cores].
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: Option<u64>,
    /// Write zero wall times so reruns are byte-identical.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SurfaceArgs {
    /// Surface CSV written by `exit-table`; measured on the fly when absent.
    #[arg(long)]
    pub surface: Option<PathBuf>,
    /// Eb/N0 grid of an on-the-fly surface.
    #[arg(long, default_value = "-1:8:0.25", value_parser = ebno_arg, allow_hyphen_values = true)]
    pub surface_ebno: String,
    /// Reference rate of an on-the-fly surface.
    #[arg(long, default_value = "1/2", value_parser = rate_arg)]
    pub surface_rate: String,
    /// Symbols per cell of an on-the-fly surface.
    #[arg(long, default_value_t = 200_000)]
    pub symbols: usize,
    /// Detector block length of an on-the-fly surface.
    #[arg(long, default_value_t = 10_000)]
    pub block: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CapacityArgs {
    #[arg(long, value_parser = channel_arg)]
    pub channel: String,
    /// Code rate.
    #[arg(long, default_value = "1/2", value_parser = rate_arg)]
    pub rate: String,
    /// Sweep the SIR over these points instead of searching for the limit.
    #[arg(long, value_parser = ebno_arg, allow_hyphen_values = true)]
    pub ebno: Option<String>,
    #[arg(long, default_value_t = 200_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 6_400_000)]
    pub max_samples: usize,
    #[arg(long, default_value_t = 0.005)]
    pub max_stderr: f64,
    /// Bisection bracket and resolution for the limit (dB).
    #[arg(long, default_value_t = -5.0, allow_negative_numbers = true)]
    pub lo: f64,
    #[arg(long, default_value_t = 15.0, allow_negative_numbers = true)]
    pub hi: f64,
    #[arg(long, default_value_t = 0.05)]
    pub resolution: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ExitTableArgs {
    #[arg(long, value_parser = channel_arg)]
    pub channel: String,
    #[arg(long, default_value = "-1:8:0.25", value_parser = ebno_arg, allow_hyphen_values = true)]
    pub ebno: String,
    /// Reference rate of the Eb/N0 axis.
    #[arg(long, default_value = "1/2", value_parser = rate_arg)]
    pub rate: String,
    /// A-priori information step.
    #[arg(long, default_value_t = 0.05)]
    pub ia_step: f64,
    #[arg(long, default_value_t = 200_000)]
    pub symbols: usize,
    #[arg(long, default_value_t = 10_000)]
    pub block: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ThresholdArgs {
    /// Builtin names or .pm paths, comma separated.
    #[arg(long, required = true, value_delimiter = ',')]
    pub code: Vec<String>,
    #[arg(long, value_parser = channel_arg)]
    pub channel: String,
    #[command(flatten)]
    pub surface: SurfaceArgs,
    /// Bisection resolution (dB).
    #[arg(long, default_value_t = 0.01)]
    pub resolution: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SearchBaseArgs {
    #[arg(long, value_parser = channel_arg)]
    pub channel: String,
    #[command(flatten)]
    pub surface: SurfaceArgs,
    /// Fraction of prefiltered candidates kept for full evaluation.
    #[arg(long, default_value_t = 0.05)]
    pub keep_fraction: f64,
    /// Fraction of discarded candidates re-checked at full resolution.
    #[arg(long, default_value_t = 0.01)]
    pub audit_fraction: f64,
    #[arg(long, default_value_t = 0.5)]
    pub prefilter_resolution: f64,
    #[arg(long, default_value_t = 200)]
    pub prefilter_max_iter: usize,
    #[arg(long, default_value_t = 0.05)]
    pub resolution: f64,
    /// Ranked candidates listed in the report.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ExtendNestedArgs {
    /// Parent protomatrix: builtin name or .pm path.
    #[arg(long)]
    pub code: String,
    #[arg(long, value_parser = channel_arg)]
    pub channel: String,
    #[command(flatten)]
    pub surface: SurfaceArgs,
    /// New columns per step.
    #[arg(long, default_value_t = 3)]
    pub cols: usize,
    #[arg(long, default_value_t = 1)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.05)]
    pub resolution: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ExtendRcArgs {
    #[arg(long)]
    pub code: String,
    #[arg(long, value_parser = channel_arg)]
    pub channel: String,
    #[command(flatten)]
    pub surface: SurfaceArgs,
    /// New check rows, one per step.
    #[arg(long, default_value_t = 1)]
    pub steps: usize,
    /// Candidate rows evaluated per step.
    #[arg(long, default_value_t = 200)]
    pub budget: usize,
    #[arg(long, default_value_t = 8)]
    pub batch: usize,
    #[arg(long, default_value_t = 2)]
    pub max_entry: u32,
    #[arg(long, default_value_t = 5)]
    pub min_weight: u32,
    #[arg(long, default_value_t = 12)]
    pub max_weight: u32,
    #[arg(long, default_value_t = 0.05)]
    pub resolution: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderArg {
    Degree,
    Prefix,
}

impl From<OrderArg> for LiftOrder {
    fn from(o: OrderArg) -> Self {
        match o {
            OrderArg::Degree => LiftOrder::Degree,
            OrderArg::Prefix => LiftOrder::Prefix,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckRuleArg {
    SumProduct,
    MinSum,
}

impl From<CheckRuleArg> for CheckRule {
    fn from(c: CheckRuleArg) -> Self {
        match c {
            CheckRuleArg::SumProduct => CheckRule::SumProduct,
            CheckRuleArg::MinSum => CheckRule::MinSum,
        }
    }
}

/// How a protomatrix becomes a lifted code.
#[derive(Args, Debug, Clone, Serialize)]
pub struct LiftSpecArgs {
    /// Lift this protomatrix instead and keep the code's leading block.
    #[arg(long)]
    pub parent: Option<String>,
    #[arg(long, default_value_t = 4)]
    pub n1: usize,
    /// Circulant size [default: 100, or the 16k-payload size with --long].
    #[arg(long)]
    pub n2: Option<usize>,
    /// PEG order [default: degree, or prefix for rc codes with --long].
    #[arg(long, value_enum)]
    pub order: Option<OrderArg>,
    #[arg(long, default_value_t = 1)]
    pub lift_seed: u64,
    /// 16k-payload lifting and the long stop rule.
    #[arg(long)]
    pub long: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct LiftArgs {
    #[arg(long)]
    pub code: String,
    #[command(flatten)]
    pub lift: LiftSpecArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GirthArgs {
    /// Builtin name, .pm path (lifted first) or .qc path.
    #[arg(long)]
    pub code: String,
    #[command(flatten)]
    pub lift: LiftSpecArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SimulateArgs {
    /// Replay a saved plan; code, channel, lifting and receiver flags are
    /// then taken from the plan.
    #[arg(long, conflicts_with_all = ["code", "channel", "ebno", "receiver"])]
    pub plan: Option<PathBuf>,
    /// Builtin name, .pm path or .qc path.
    #[arg(long, required_unless_present = "plan")]
    pub code: Option<String>,
    #[arg(long, value_parser = channel_arg, required_unless_present = "plan")]
    pub channel: Option<String>,
    #[arg(long, value_parser = ebno_arg, allow_hyphen_values = true, required_unless_present = "plan")]
    pub ebno: Option<String>,
    #[command(flatten)]
    pub lift: LiftSpecArgs,
    /// Frame errors per point [default: 50, or 100 with --long].
    #[arg(long)]
    pub min_errors: Option<u64>,
    /// Frame cap per point [default: 100000, or 1000000 with --long].
    #[arg(long)]
    pub max_frames: Option<u64>,
    #[arg(long, default_value_t = 10)]
    pub outer: usize,
    #[arg(long, default_value_t = 20)]
    pub bp: usize,
    #[arg(long, default_value_t = channel::LLR_MAX)]
    pub llr_clamp: f64,
    #[arg(long, value_enum, default_value_t = CheckRuleArg::SumProduct)]
    pub check_rule: CheckRuleArg,
    /// Receiver config JSON; overrides --outer, --bp, --llr-clamp, --check-rule.
    #[arg(long)]
    pub receiver: Option<PathBuf>,
    /// Stop the sweep after the first point with FER below this.
    #[arg(long)]
    pub fer_floor: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

fn channel_arg(s: &str) -> Result<String, String> {
    ChannelPoly::from_selector(s).map(|_| s.to_string()).map_err(|e| e.to_string())
}

fn ebno_arg(s: &str) -> Result<String, String> {
    formats::parse_ebno_list(s).map(|_| s.to_string()).map_err(|e| e.to_string())
}

fn rate_arg(s: &str) -> Result<String, String> {
    formats::parse_rate(s).map(|_| s.to_string()).map_err(|e| e.to_string())
}

/// A usage problem found after parsing; exits with [`EXIT_USAGE`].
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match dispatch(&cli.command, argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                EXIT_USAGE
            } else {
                EXIT_DOMAIN
            }
        }
    }
}

struct Ctx {
    subcommand: &'static str,
    argv: Vec<String>,
    flags: serde_json::Value,
    workers: usize,
    seeds: BTreeMap<String, u64>,
    inputs: Vec<formats::InputRecord>,
    outputs: Vec<String>,
}

impl Ctx {
    fn input(&mut self, p: &Path) {
        self.inputs.push(Manifest::input(p));
    }

    fn seed(&mut self, name: &str, v: u64) {
        self.seeds.insert(name.to_string(), v);
    }

    /// Records `file` under `dir` as an output and returns its path.
    fn output(&mut self, dir: &Path, file: &str) -> PathBuf {
        self.outputs.push(file.to_string());
        dir.join(file)
    }

    fn finish(&mut self, dir: &Path) -> anyhow::Result<()> {
        let m = Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: self.subcommand.to_string(),
            argv: self.argv.clone(),
            flags: self.flags.clone(),
            seeds: self.seeds.clone(),
            workers: self.workers,
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
        };
        formats::write_json(&formats::manifest_path(dir, self.subcommand), &m)?;
        Ok(())
    }
}

fn out_dir(out: &Option<PathBuf>) -> anyhow::Result<Option<&Path>> {
    if let Some(d) = out {
        fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    Ok(out.as_deref())
}

fn runner(common: &Common) -> anyhow::Result<Parallel> {
    let n = common.workers.map_or_else(available_workers, |w| w as usize);
    Ok(Parallel::new(n)?)
}

fn timer(no_timing: bool) -> impl Fn(Instant) -> f64 {
    move |t: Instant| if no_timing { 0.0 } else { t.elapsed().as_secs_f64() }
}

fn dispatch(cmd: &Command, argv: Vec<String>) -> anyhow::Result<()> {
    let workers = match cmd {
        Command::Capacity(a) => a.common.workers,
        Command::ExitTable(a) => a.common.workers,
        Command::Threshold(a) => a.common.workers,
        Command::SearchBase(a) => a.common.workers,
        Command::ExtendNested(a) => a.common.workers,
        Command::ExtendRc(a) => a.common.workers,
        Command::Simulate(a) => a.common.workers,
        Command::Lift(_) | Command::Girth(_) => Some(1),
    };
    let mut ctx = Ctx {
        subcommand: cmd.name(),
        argv,
        flags: cmd.flags(),
        workers: workers.map_or_else(available_workers, |w| w as usize),
        seeds: BTreeMap::new(),
        inputs: Vec::new(),
        outputs: Vec::new(),
    };
    match cmd {
        Command::Capacity(a) => capacity(a, &mut ctx)?,
        Command::ExitTable(a) => exit_table(a, &mut ctx)?,
        Command::Threshold(a) => threshold(a, &mut ctx)?,
        Command::SearchBase(a) => search_base(a, &mut ctx)?,
        Command::ExtendNested(a) => extend_nested(a, &mut ctx)?,
        Command::ExtendRc(a) => extend_rc(a, &mut ctx)?,
        Command::Lift(a) => lift_cmd(a, &mut ctx)?,
        Command::Girth(a) => girth_cmd(a, &mut ctx)?,
        Command::Simulate(a) => simulate(a, &mut ctx)?,
    }
    Ok(())
}

fn capacity(a: &CapacityArgs, ctx: &mut Ctx) -> anyhow::Result<()> {
    let h = ChannelPoly::from_selector(&a.channel)?;
    let t = Trellis::new(&h);
    let rate = formats::parse_rate(&a.rate)?;
    let cfg = LimitSearch {
        lo_db: a.lo,
        hi_db: a.hi,
        resolution_db: a.resolution,
        samples: a.samples,
        max_samples: a.max_samples,
        max_stderr: a.max_stderr,
        seed: a.common.seed,
    };
    ctx.seed("capacity", cfg.seed);
    let dir = out_dir(&a.common.out)?;
    if let Some(list) = &a.ebno {
        let points = formats::parse_ebno_list(list)?;
        let r = runner(&a.common)?;
        let probes = r.map(points.len(), |i| channel::sir_at(&t, points[i], rate, &cfg));
        let mut rows = Vec::with_capacity(points.len());
        for p in probes {
            let p = p?;
            println!("{:.4} {:.6} {:.6}", p.ebno_db, p.estimate.bits, p.estimate.stderr);
            rows.push(SirRow { ebno_db: p.ebno_db, sir_bits: p.estimate.bits, stderr: p.estimate.stderr });
        }
        if let Some(d) = dir {
            formats::write_sir(&ctx.output(d, "sir.csv"), &rows)?;
            ctx.finish(d)?;
        }
        return Ok(());
    }
    let EbnoLimit { ebno_db, probes } = channel::ebno_limit(&t, rate, &cfg)?;
    println!("{ebno_db:.2}");
    if let Some(d) = dir {
        let probes: Vec<_> = probes
            .iter()
            .map(|p| json!({"ebno_db": p.ebno_db, "sir_bits": p.estimate.bits, "stderr": p.estimate.stderr, "samples": p.samples}))
            .collect();
        let report = json!({"channel": a.channel, "rate": rate, "ebno_limit_db": ebno_db, "probes": probes});
        formats::write_json(&ctx.output(d, "capacity.json"), &report)?;
        ctx.finish(d)?;
    }
    Ok(())
}

fn ia_grid(step: f64) -> anyhow::Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        bail!(UsageError(format!("--ia-step must lie in (0, 1], got {step}")));
    }
    let n = (1.0 / step + 1e-9).floor() as usize;
    let mut g: Vec<f64> = (0..=n).map(|i| ((i as f64 * step) * 1e9).round() / 1e9).collect();
    if *g.last().unwrap() < 1.0 {
        g.push(1.0);
    }
    Ok(g)
}

fn exit_table(a: &ExitTableArgs, ctx: &mut Ctx) -> anyhow::Result<()> {
    let Some(d) = out_dir(&a.common.out)? else {
        bail!(UsageError("exit-table needs --out".into()));
    };
    let h = ChannelPoly::from_selector(&a.channel)?;
    let spec = SurfaceSpec {
        ebno_db: formats::parse_ebno_list(&a.ebno)?,
        ia: ia_grid(a.ia_step)?,
        reference_rate: formats::parse_rate(&a.rate)?,
        symbols: a.symbols,
        block: a.block,
        seed: a.common.seed,
    };
    ctx.seed("surface", spec.seed);
    let s = measure_detector_exit(&h, &spec, &JFunction::new(), &runner(&a.common)?)?;
    let path = ctx.output(d, "surface.csv");
    ctx.outputs.push("surface.json".into());
    formats::write_surface(&path, &s, spec.block)?;
    println!("{} x {} cells", spec.ebno_db.len(), spec.ia.len());
    ctx.finish(d)
}

/// Loads `--surface` or measures one with the standard `I_A` grid.
fn obtain_surface(h: &ChannelPoly, s: &SurfaceArgs, common: &Common, ctx: &mut Ctx) -> anyhow::Result<ExitSurface> {
    if let Some(p) = &s.surface {
        let (surf, meta) = formats::read_surface(p)?;
        ctx.input(p);
        ctx.input(&formats::sidecar_path(p));
        if meta.channel != h.name() {
            bail!("surface {} was measured on `{}`, not `{}`", p.display(), meta.channel, h.name());
        }
        return Ok(surf);
    }
    let spec = SurfaceSpec {
        ebno_db: formats::parse_ebno_list(&s.surface_ebno)?,
        ia: ia_grid(0.05)?,
        reference_rate: formats::parse_rate(&s.surface_rate)?,
        symbols: s.symbols,
        block: s.block,
        seed: common.seed,
    };
    ctx.seed("surface", spec.seed);
    eprintln!("measuring {} surface ({} cells)", h.name(), spec.ebno_db.len() * spec.ia.len());
    Ok(measure_detector_exit(h, &spec, &JFunction::new(), &runner(common)?)?)
}

fn objective<'a>(surface: &'a ExitSurface, j: &'a JFunction, resolution: f64) -> anyhow::Result<Objective<'a>> {
    if !(resolution > 0.0) {
        bail!(UsageError(format!("--resolution must be positive, got {resolution}")));
    }
    Ok(Objective { resolution_db: resolution, ..Objective::new(surface, j) })
}

fn threshold(a: &ThresholdArgs, ctx: &mut Ctx) -> anyhow::Result<()> {
    let h = ChannelPoly::from_selector(&a.channel)?;
    let codes: Vec<Protomatrix> = a.code.iter().map(|c| formats::load_protomatrix(c)).collect::<Result<_, _>>()?;
    for c in &a.code {
        if !rcldpc_core::builtin::by_name(c).is_ok() {
            ctx.input(Path::new(c));
        }
    }
    let surface = obtain_surface(&h, &a.surface, &a.common, ctx)?;
    let j = JFunction::new();
    let obj = objective(&surface, &j, a.resolution)?;
    let r = runner(&a.common)?;
    let th = r.map(codes.len(), |i| obj.threshold(&codes[i]));
    let mut rows = Vec::new();
    for (name, (p, t)) in a.code.iter().zip(codes.iter().zip(th)) {
        if !t.is_finite() {
            bail!("{name} does not converge inside the surface range at rate {:.4}", p.rate_f64()?);
        }
        let (lo, _) = surface.coverage(p.rate_f64()?);
        if t <= lo {
            eprintln!("warning: {name} already converges at the bottom of the surface range ({lo:.2} dB)");
        }
        if codes.len() == 1 {
            println!("{t:.2}");
        } else {
            println!("{name} {t:.2}");
        }
        rows.push(ThresholdRow { code: name.clone(), channel: a.channel.clone(), threshold_db: t });
    }
    if let Some(d) = out_dir(&a.common.out)? {
        formats::write_thresholds(&ctx.output(d, "thresholds.csv"), &rows)?;
        ctx.finish(d)?;
    }
    Ok(())
}

fn search_base(a: &SearchBaseArgs, ctx: &mut Ctx) -> anyhow::Result<()> {
    let start = Instant::now();
    let h = ChannelPoly::from_selector(&a.channel)?;
    let surface = obtain_surface(&h, &a.surface, &a.common, ctx)?;
    let j = JFunction::new();
    let obj = objective(&surface, &j, a.resolution)?;
    let spec = BaseSearchSpec {
        prefilter: Prefilter {
            keep_fraction: a.keep_fraction,
            resolution_db: a.prefilter_resolution,
            max_iter: a.prefilter_max_iter,
        },
        audit_fraction: a.audit_fraction,
        seed: a.common.seed,
        ..BaseSearchSpec::default()
    };
    ctx.seed("search", spec.seed);
    let res = search::search_base_rate_half(&spec, &obj, &runner(&a.common)?)?;
    let best = res.best();
    println!("{:.2}", best.threshold_db);
    print!("{}", best.matrix.to_pm_string());
    if let Some(d) = out_dir(&a.common.out)? {
        let report = json!({
            "spec": spec,
            "seed": spec.seed,
            "channel": a.channel,
            "feasible": res.feasible,
            "distinct": res.distinct,
            "candidates_evaluated": res.distinct,
            "fully_evaluated": res.fully_evaluated,
            "audit": res.audit,
            "top": res.ranked.iter().take(a.top).collect::<Vec<_>>(),
            "best": best.matrix.to_pm_string(),
            "threshold_db": best.threshold_db,
            "runtime_seconds": timer(a.common.no_timing)(start),
        });
        formats::write_json(&ctx.output(d, "search-base.json"), &report)?;
        formats::write_text(&ctx.output(d, "search-base.pm"), &best.matrix.to_pm_string())?;
        ctx.finish(d)?;
    }
    Ok(())
}

fn load_parent(code: &str, ctx: &mut Ctx) -> anyhow::Result<Protomatrix> {
    let p = formats::load_protomatrix(code)?;
    if rcldpc_core::builtin::by_name(code).is_err() {
        ctx.input(Path::new(code));
    }
    Ok(p)
}

fn extend_nested(a: &ExtendNestedArgs, ctx: &mut Ctx) -> anyhow::Result<()> {
    let start = Instant::now();
    let h = ChannelPoly::from_selector(&a.channel)?;
    let mut parent = load_parent(&a.code, ctx)?;
    let surface = obtain_surface(&h, &a.surface, &a.common, ctx)?;
    let j = JFunction::new();
    let obj = objective(&surface, &j, a.resolution)?;
    let r = runner(&a.common)?;
    let mut steps = Vec::new();
    let mut candidates = 0;
    for _ in 0..a.steps {
        let s = search::search_nested_step(&parent, &obj, a.cols, &r)?;
        candidates += s.distinct;
        println!("{} {:.2}", s.best.matrix.rate()?, s.best.threshold_db);
        steps.push(json!({
            "rate": s.best.matrix.rate()?.to_string(),
            "candidates": s.candidates,
            "distinct": s.distinct,
            "columns": s.extension.columns(),
            "best": s.best,
        }));
        parent = s.best.matrix;
    }
    write_extension_report(out_dir(&a.common.out)?, ctx, "extend-nested", &a.common, start, json!({
        "parent": a.code,
        "cols": a.cols,
        "steps": steps,
        "candidates_evaluated": candidates,
    }), &parent, &obj)
}

fn extend_rc(a: &ExtendRcArgs, ctx: &mut Ctx) -> anyhow::Result<()> {
    let start = Instant::now();
    let h = ChannelPoly::from_selector(&a.channel)?;
    let mut parent = load_parent(&a.code, ctx)?;
    let surface = obtain_surface(&h, &a.surface, &a.common, ctx)?;
    let j = JFunction::new();
    let obj = objective(&surface, &j, a.resolution)?;
    let r = runner(&a.common)?;
    let mut steps = Vec::new();
    let mut evaluated = 0;
    for step in 0..a.steps {
        let spec = RcSearchSpec {
            max_entry: a.max_entry,
            min_weight: a.min_weight,
            max_weight: a.max_weight,
            budget: a.budget,
            batch: a.batch,
            seed: child_seed(a.common.seed, Purpose::Search, step as u64),
        };
        ctx.seed(&format!("search-step-{step}"), spec.seed);
        let s = search::search_rc_step(&parent, &obj, &spec, &r)?;
        evaluated += s.evaluated;
        println!("{} {:.2}", s.best.matrix.rate()?, s.best.threshold_db);
        steps.push(json!({"spec": spec, "rate": s.best.matrix.rate()?.to_string(), "result": s}));
        parent = s.best.matrix;
    }
    write_extension_report(out_dir(&a.common.out)?, ctx, "extend-rc", &a.common, start, json!({
        "parent": a.code,
        "steps": steps,
        "candidates_evaluated": evaluated,
    }), &parent, &obj)
}

#[allow(clippy::too_many_arguments)]
fn write_extension_report(
    dir: Option<&Path>,
    ctx: &mut Ctx,
    name: &str,
    common: &Common,
    start: Instant,
    mut report: serde_json::Value,
    best: &Protomatrix,
    obj: &Objective<'_>,
) -> anyhow::Result<()> {
    let Some(d) = dir else { return Ok(()) };
    let o = report.as_object_mut().expect("report is an object");
    o.insert("seed".into(), json!(common.seed));
    o.insert("best".into(), json!(best.to_pm_string()));
    o.insert("threshold_db".into(), json!(obj.threshold(best)));
    o.insert("runtime_seconds".into(), json!(timer(common.no_timing)(start)));
    formats::write_json(&ctx.output(d, &format!("{name}.json")), &report)?;
    formats::write_text(&ctx.output(d, &format!("{name}.pm")), &best.to_pm_string())?;
    ctx.finish(d)
}

/// Circulant size of the 16k-payload profile, and the parent it is cut
/// from for rate-compatible codes.
pub fn long_profile(code: &str) -> anyhow::Result<(usize, Option<&'static str>, LiftOrder)> {
    const NESTED_N2: [usize; 9] = [1364, 683, 455, 342, 273, 227, 195, 171, 153];
    let p = rcldpc_core::builtin::by_name(code).map_err(|_| UsageError(format!("--long needs a builtin code, got `{code}`")))?;
    if code.starts_with("rc-") {
        return Ok((153, Some("rc-27/41"), LiftOrder::Prefix));
    }
    let n = p.cols() / 3 - 1;
    Ok((NESTED_N2[n - 1], None, LiftOrder::Degree))
}

/// Resolved lifting parameters: `(parent, n2, order)`.
fn resolve_lift(code: &str, l: &LiftSpecArgs, default_n2: Option<usize>) -> anyhow::Result<(Option<String>, usize, LiftOrder)> {
    let (n2, parent, order) = if l.long {
        let (n2, parent, order) = long_profile(code)?;
        (n2, parent.map(String::from), order)
    } else {
        let n2 = l.n2.or(default_n2).ok_or_else(|| UsageError("--n2 is required without --long".into()))?;
        (n2, None, LiftOrder::Degree)
    };
    let n2 = l.n2.unwrap_or(n2);
    let parent = l.parent.clone().or(parent);
    let order = l.order.map(LiftOrder::from).unwrap_or(order);
    Ok((parent, n2, order))
}

/// Lifts `code` (or cuts it from a lifted `parent`), or reads a `.qc` file.
pub fn build_code(code: &str, parent: Option<&str>, n1: usize, n2: usize, seed: u64, order: LiftOrder) -> anyhow::Result<QcCode> {
    if code.ends_with(".qc") {
        if parent.is_some() {
            bail!(UsageError("--parent does not apply to a .qc code".into()));
        }
        return Ok(formats::read_qc(Path::new(code))?);
    }
    let p = formats::load_protomatrix(code)?;
    if !p.punctured().is_empty() {
        bail!("{code}: punctured columns are not supported by lifting");
    }
    match parent {
        None => Ok(lift(&p, n1, n2, seed, order)?),
        Some(par) => {
            let pp = formats::load_protomatrix(par)?;
            if pp.rows() < p.rows() || pp.cols() < p.cols() || pp.leading_block(p.rows(), p.cols())? != p {
                bail!("{code} is not the leading block of {par}");
            }
            Ok(lift(&pp, n1, n2, seed, order)?.restrict(p.rows(), p.cols())?)
        }
    }
}

fn lift_cmd(a: &LiftArgs, ctx: &mut Ctx) -> anyhow::Result<()> {
    let (parent, n2, order) = resolve_lift(&a.code, &a.lift, None)?;
    ctx.seed("lift", a.lift.lift_seed);
    let q = build_code(&a.code, parent.as_deref(), a.lift.n1, n2, a.lift.lift_seed, order)?;
    let g = girth_of(&q);
    println!("n {} k {} girth {}", q.n(), q.k(), g.girth.map_or("none".into(), |v| v.to_string()));
    if let Some(d) = out_dir(&a.out)? {
        formats::write_text(&ctx.output(d, "code.qc"), &q.to_text())?;
        formats::write_text(&ctx.output(d, "code.alist"), &q.to_parity_matrix()?.to_alist())?;
        let report = json!({
            "code": a.code, "parent": parent, "n1": q.n1(), "n2": q.n2(), "order": order,
            "n": q.n(), "k": q.k(), "m": q.m(), "rate": q.rate(), "girth": g,
        });
        formats::write_json(&ctx.output(d, "lift.json"), &report)?;
        ctx.finish(d)?;
    }
    Ok(())
}

fn girth_cmd(a: &GirthArgs, ctx: &mut Ctx) -> anyhow::Result<()> {
    let q = if a.code.ends_with(".qc") {
        ctx.input(Path::new(&a.code));
        formats::read_qc(Path::new(&a.code))?
    } else {
        let (parent, n2, order) = resolve_lift(&a.code, &a.lift, None)?;
        ctx.seed("lift", a.lift.lift_seed);
        build_code(&a.code, parent.as_deref(), a.lift.n1, n2, a.lift.lift_seed, order)?
    };
    let g = girth_of(&q);
    println!("girth {}", g.girth.map_or("none".into(), |v| v.to_string()));
    println!("cycles4 {}", g.cycles4);
    println!("cycles6 {}", g.cycles6);
    if let Some(d) = out_dir(&a.out)? {
        formats::write_json(&ctx.output(d, "girth.json"), &g)?;
        ctx.finish(d)?;
    }
    Ok(())
}

/// The plan implied by the simulate flags.
fn plan_from_flags(a: &SimulateArgs) -> anyhow::Result<SimPlan> {
    let code = a.code.clone().expect("required without --plan");
    let (parent, n2, order) = resolve_lift(&code, &a.lift, Some(100))?;
    let stop = if a.lift.long { StopRule::DEFAULT } else { StopRule::DESK };
    let receiver = match &a.receiver {
        Some(p) => formats::read_json::<DecodeConfig>(p)?,
        None => DecodeConfig {
            outer_iters: a.outer,
            bp_iters: a.bp,
            llr_clamp: a.llr_clamp,
            check_rule: a.check_rule.into(),
        },
    };
    Ok(SimPlan {
        code,
        parent,
        channel: a.channel.clone().expect("required without --plan"),
        ebno_db: formats::parse_ebno_list(a.ebno.as_deref().expect("required without --plan"))?,
        n1: a.lift.n1,
        n2,
        lift_seed: a.lift.lift_seed,
        lift_order: order,
        stop: StopRule {
            min_frame_errors: a.min_errors.unwrap_or(stop.min_frame_errors),
            max_frames: a.max_frames.unwrap_or(stop.max_frames),
        },
        seed: a.common.seed,
        receiver,
        fer_floor: a.fer_floor,
    })
}

fn simulate(a: &SimulateArgs, ctx: &mut Ctx) -> anyhow::Result<()> {
    let plan = match &a.plan {
        Some(p) => {
            ctx.input(p);
            formats::read_json::<SimPlan>(p)?
        }
        None => {
            if let Some(p) = &a.receiver {
                ctx.input(p);
            }
            plan_from_flags(a)?
        }
    };
    plan.validate().map_err(|e| anyhow!("invalid plan: {e}"))?;
    ctx.seed("frames", plan.seed);
    ctx.seed("lift", plan.lift_seed);
    let h = ChannelPoly::from_selector(&plan.channel)?;
    let q = build_code(&plan.code, plan.parent.as_deref(), plan.n1, plan.n2, plan.lift_seed, plan.lift_order)?;
    let rate = if plan.code.ends_with(".qc") { q.rate() } else { formats::load_protomatrix(&plan.code)?.rate_f64()? };
    let link = Link::new(&q.to_parity_matrix()?, rate, &h)?;
    eprintln!("code {} n {} k {} rate {:.4} on {}", plan.code, link.n(), link.k(), rate, h.name());
    let opts = PointOptions { stop: plan.stop, receiver: plan.receiver, seed: plan.seed, fault_bits: 0 };
    let r = runner(&a.common)?;
    let clock = timer(a.common.no_timing);
    let mut t = Instant::now();
    let mut seconds = Vec::new();
    let sweep = sim::run_sweep(&link, &plan.ebno_db, &opts, plan.fer_floor, &r, |p| {
        seconds.push(clock(t));
        t = Instant::now();
        eprintln!("{:.3} dB: {} frames, {} frame errors, FER {:.3e}", p.ebno_db, p.frames, p.frame_errors, p.fer);
    })?;
    let rows: Vec<ResultRow> =
        sweep.points.iter().zip(&seconds).map(|(p, &s)| ResultRow { seconds: s, ..ResultRow::from(p) }).collect();
    for row in &rows {
        println!("{} {} {} {} {:e} {:e}", row.ebno_db, row.frames, row.bit_errors, row.frame_errors, row.ber, row.fer);
    }
    if !sweep.monotonicity_flags.is_empty() {
        eprintln!("warning: FER rises beyond binomial noise after points {:?}", sweep.monotonicity_flags);
    }
    if let Some(d) = out_dir(&a.common.out)? {
        formats::write_results(&ctx.output(d, "results.csv"), &rows)?;
        formats::write_json(&ctx.output(d, "plan.json"), &plan)?;
        let summary = json!({
            "plan": plan,
            "n": link.n(),
            "k": link.k(),
            "rate": rate,
            "points": sweep.points,
            "monotonicity_flags": sweep.monotonicity_flags,
            "stopped_at_floor": sweep.stopped_at_floor,
        });
        let mut summary = summary;
        if a.common.no_timing {
            for p in summary["points"].as_array_mut().expect("array") {
                p["seconds"] = json!(0.0);
            }
        } else {
            for (p, s) in summary["points"].as_array_mut().expect("array").iter_mut().zip(&seconds) {
                p["seconds"] = json!(s);
            }
        }
        formats::write_json(&ctx.output(d, "simulate.json"), &summary)?;
        ctx.finish(d)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn long_profile_sizes() {
        assert_eq!(long_profile("isi-1/2").unwrap().0, 1364);
        assert_eq!(long_profile("nested-9/10").unwrap().0, 153);
        assert_eq!(long_profile("nested-8/9").unwrap().0, 171);
        let (n2, parent, order) = long_profile("rc-27/33").unwrap();
        assert_eq!((n2, parent, order), (153, Some("rc-27/41"), LiftOrder::Prefix));
        assert!(long_profile("foo.pm").is_err());
    }

    #[test]
    fn ia_grid_ends_at_one() {
        assert_eq!(ia_grid(0.05).unwrap().len(), 21);
        assert_eq!(ia_grid(0.3).unwrap(), vec![0.0, 0.3, 0.6, 0.9, 1.0]);
        assert!(ia_grid(0.0).is_err());
    }
}
