//! Command line front end.
//!
//! Exit codes: 0 success, 2 input or validation error, 3 numerical tolerance
//! failure (truncation tail above `--tail-tol`, unreachable quantile).
//! Every JSON output carries a `metadata` block with the tool version, the
//! SHA-256 of the portfolio file and the effective configuration. No clock
//! values are written, so identical invocations give identical files.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::conditional::{
    expected_default_product, loss_given_one_default, loss_given_two_defaults,
    stressed_input_distribution, ConditionalError, ScenarioReport,
};
use crate::engine::{risk_report, EngineError, LossEngine, RiskReport};
use crate::model::{parse_portfolio_with, ModelError, ParseOptions, Portfolio};
use crate::pmf::{Pmf, PmfError};
use crate::simulate::{estimate_conditional, simulate, SimConfig, SimError};

#[derive(Debug, Parser)]
#[command(name = "crplus", version, about = "Credit portfolio loss distributions and default scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Unconditional loss distribution and risk measures.
    Dist(CommonArgs),
    /// Loss distribution conditional on the default of one or two obligors.
    Cond {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Monte Carlo simulation of the portfolio loss.
    Mc {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Analytic, Monte Carlo and stressed-input conditional distributions side by side.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        sim: SimArgs,
    },
}

#[derive(Debug, Args, Serialize)]
struct CommonArgs {
    /// Portfolio JSON file.
    #[arg(long)]
    portfolio: PathBuf,
    /// Truncation point of the loss grid, or `auto`.
    #[arg(long, default_value = "auto")]
    max_loss: MaxLoss,
    /// Largest acceptable probability mass beyond the grid.
    #[arg(long, default_value_t = crate::engine::DEFAULT_TAIL_TOLERANCE)]
    tail_tol: f64,
    /// Confidence levels for quantiles and expected shortfall.
    #[arg(long, value_delimiter = ',', default_value = "0.99,0.999")]
    theta: Vec<f64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    out: PathBuf,
    /// Rescale factor loadings that do not sum to one.
    #[arg(long)]
    renormalize_weights: bool,
}

#[derive(Debug, Args, Serialize)]
struct ScenarioArgs {
    /// Defaulted obligor id; give once or twice.
    #[arg(long = "obligor", required = true)]
    obligors: Vec<String>,
    /// Exclude the defaulted obligors' own losses.
    #[arg(long)]
    writeoff: bool,
}

#[derive(Debug, Args, Serialize)]
struct SimArgs {
    #[arg(long, default_value_t = 1_000_000)]
    draws: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Debug, Clone, Copy)]
enum MaxLoss {
    Auto,
    Fixed(usize),
}

impl FromStr for MaxLoss {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(Self::Auto);
        }
        s.parse()
            .map(Self::Fixed)
            .map_err(|_| format!("expected a non-negative integer or `auto`, got `{s}`"))
    }
}

impl fmt::Display for MaxLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Auto => f.write_str("auto"),
            Self::Fixed(l) => write!(f, "{l}"),
        }
    }
}

impl Serialize for MaxLoss {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            Self::Input(_) => 2,
            Self::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Input(m) | Self::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        Self::Input(e.to_string())
    }
}

impl From<PmfError> for CliError {
    fn from(e: PmfError) -> Self {
        match e {
            PmfError::QuantileUnreachable { .. } => Self::Numerical(e.to_string()),
            _ => Self::Input(e.to_string()),
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Truncation { .. } => Self::Numerical(e.to_string()),
            EngineError::Pmf(p) => p.into(),
            _ => Self::Input(e.to_string()),
        }
    }
}

impl From<ConditionalError> for CliError {
    fn from(e: ConditionalError) -> Self {
        match e {
            ConditionalError::Engine(e) => e.into(),
            ConditionalError::Pmf(e) => e.into(),
            _ => Self::Input(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Scenario(e) => e.into(),
            _ => Self::Input(e.to_string()),
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors are reported on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[derive(Serialize)]
struct Metadata<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    input_sha256: String,
    /// Grid limit in effect; absent for commands that use no grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    max_loss: Option<usize>,
    config: &'a C,
}

#[derive(Serialize)]
struct Output<'a, C: Serialize, B: Serialize> {
    metadata: &'a Metadata<'a, C>,
    #[serde(flatten)]
    body: B,
}

/// A loaded portfolio plus what every command needs from the common flags.
struct Context {
    portfolio: Portfolio,
    digest: String,
    out: PathBuf,
}

fn load(common: &CommonArgs) -> Result<Context, CliError> {
    if !(common.tail_tol > 0.0 && common.tail_tol < 1.0) {
        return Err(CliError::Input(format!(
            "--tail-tol must lie in (0, 1), got {}",
            common.tail_tol
        )));
    }
    if let Some(t) = common.theta.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(CliError::Input(format!("--theta values must lie in (0, 1), got {t}")));
    }
    let bytes = std::fs::read(&common.portfolio).map_err(|e| {
        CliError::Input(format!("cannot read portfolio {}: {e}", common.portfolio.display()))
    })?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| {
        CliError::Input(format!("portfolio {} is not UTF-8", common.portfolio.display()))
    })?;
    let portfolio = parse_portfolio_with(
        &text,
        ParseOptions {
            renormalize_weights: common.renormalize_weights,
        },
    )
    .map_err(|e| CliError::Input(format!("{}: {e}", common.portfolio.display())))?;
    std::fs::create_dir_all(&common.out).map_err(|e| {
        CliError::Input(format!("cannot create output directory {}: {e}", common.out.display()))
    })?;
    Ok(Context {
        portfolio,
        digest: hex::encode(Sha256::digest(&bytes)),
        out: common.out.clone(),
    })
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable output");
    text.push('\n');
    write(dir, name, &text)
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Dist(common) => cmd_dist(&common),
        Command::Cond { common, scenario } => cmd_cond(&common, &scenario),
        Command::Mc { common, sim } => cmd_mc(&common, &sim),
        Command::Compare {
            common,
            scenario,
            sim,
        } => cmd_compare(&common, &scenario, &sim),
    }
}

#[derive(Serialize)]
struct DistBody<'a> {
    pmf_csv: &'a str,
    report: &'a RiskReport,
}

fn engine_for(common: &CommonArgs, ctx: &Context) -> Result<(LossEngine, usize), CliError> {
    let engine = match common.max_loss {
        MaxLoss::Auto => LossEngine::with_auto_limit(&ctx.portfolio, common.tail_tol)?,
        MaxLoss::Fixed(l) => LossEngine::from_portfolio(&ctx.portfolio, l, common.tail_tol)?,
    };
    engine.base_distribution()?;
    let max_loss = engine.max_loss();
    Ok((engine, max_loss))
}

fn cmd_dist(common: &CommonArgs) -> Result<(), CliError> {
    let ctx = load(common)?;
    let (engine, max_loss) = engine_for(common, &ctx)?;
    let base = engine.base_distribution()?;
    let report = risk_report(&base, &common.theta, common.tail_tol)?;
    let meta = Metadata {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: "dist",
        input_sha256: ctx.digest.clone(),
        max_loss: Some(max_loss),
        config: common,
    };
    write(&ctx.out, "pmf.csv", &base.to_csv())?;
    write_json(
        &ctx.out,
        "report.json",
        &Output {
            metadata: &meta,
            body: DistBody {
                pmf_csv: "pmf.csv",
                report: &report,
            },
        },
    )
}

fn check_scenario(scenario: &ScenarioArgs, portfolio: &Portfolio) -> Result<(), CliError> {
    match scenario.obligors.as_slice() {
        [_] => {}
        [a, b] if a == b => {
            return Err(CliError::Input(format!("--obligor '{a}' given twice")));
        }
        [_, _] => {}
        _ => {
            return Err(CliError::Input(
                "--obligor must be given once or twice".to_string(),
            ))
        }
    }
    for id in &scenario.obligors {
        if portfolio.obligor(id).is_none() {
            return Err(CliError::Input(format!("unknown obligor '{id}'")));
        }
    }
    Ok(())
}

fn scenario_report(
    engine: &LossEngine,
    portfolio: &Portfolio,
    scenario: &ScenarioArgs,
    thetas: &[f64],
) -> Result<ScenarioReport, CliError> {
    Ok(match scenario.obligors.as_slice() {
        [a] => loss_given_one_default(engine, portfolio, a, scenario.writeoff, thetas)?,
        [a, b] => loss_given_two_defaults(engine, portfolio, a, b, scenario.writeoff, thetas)?,
        _ => unreachable!("checked by check_scenario"),
    })
}

#[derive(Serialize)]
struct CondConfig<'a> {
    #[serde(flatten)]
    common: &'a CommonArgs,
    #[serde(flatten)]
    scenario: &'a ScenarioArgs,
}

#[derive(Serialize)]
struct ScenarioBody<'a> {
    #[serde(flatten)]
    report: &'a ScenarioReport,
    pmf_csv: &'a str,
}

fn cmd_cond(common: &CommonArgs, scenario: &ScenarioArgs) -> Result<(), CliError> {
    let ctx = load(common)?;
    check_scenario(scenario, &ctx.portfolio)?;
    let (engine, max_loss) = engine_for(common, &ctx)?;
    let report = scenario_report(&engine, &ctx.portfolio, scenario, &common.theta)?;
    let base = engine.base_distribution()?;
    let unconditional = risk_report(&base, &common.theta, common.tail_tol)?;
    let config = CondConfig { common, scenario };
    let meta = Metadata {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: "cond",
        input_sha256: ctx.digest.clone(),
        max_loss: Some(max_loss),
        config: &config,
    };
    write(&ctx.out, "conditional_pmf.csv", &report.conditional_pmf.to_csv())?;
    write_json(
        &ctx.out,
        "scenario.json",
        &Output {
            metadata: &meta,
            body: ScenarioBody {
                report: &report,
                pmf_csv: "conditional_pmf.csv",
            },
        },
    )?;
    write(&ctx.out, "unconditional_pmf.csv", &base.to_csv())?;
    write_json(
        &ctx.out,
        "unconditional_report.json",
        &Output {
            metadata: &meta,
            body: DistBody {
                pmf_csv: "unconditional_pmf.csv",
                report: &unconditional,
            },
        },
    )
}

#[derive(Serialize)]
struct McConfig<'a> {
    #[serde(flatten)]
    common: &'a CommonArgs,
    #[serde(flatten)]
    sim: &'a SimArgs,
}

#[derive(Serialize)]
struct McBody<T: Serialize> {
    losses_csv: &'static str,
    summary: T,
}

fn cmd_mc(common: &CommonArgs, sim: &SimArgs) -> Result<(), CliError> {
    let ctx = load(common)?;
    let result = simulate(&ctx.portfolio, SimConfig::new(sim.draws, sim.seed))?;
    let config = McConfig { common, sim };
    let meta = Metadata {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: "mc",
        input_sha256: ctx.digest.clone(),
        max_loss: None,
        config: &config,
    };
    write(&ctx.out, "mc_losses.csv", &result.to_csv())?;
    write_json(
        &ctx.out,
        "mc_summary.json",
        &Output {
            metadata: &meta,
            body: McBody {
                losses_csv: "mc_losses.csv",
                summary: result.summary(&ctx.portfolio),
            },
        },
    )
}

#[derive(Serialize)]
struct CompareConfig<'a> {
    #[serde(flatten)]
    common: &'a CommonArgs,
    #[serde(flatten)]
    scenario: &'a ScenarioArgs,
    #[serde(flatten)]
    sim: &'a SimArgs,
}

#[derive(Serialize)]
struct ApproachMeasures {
    approach: &'static str,
    mean: f64,
    levels: Vec<LevelDeviation>,
}

#[derive(Serialize)]
struct LevelDeviation {
    theta: f64,
    quantile: usize,
    expected_shortfall: f64,
    quantile_deviation: i64,
    expected_shortfall_deviation: f64,
}

#[derive(Serialize)]
struct CompareBody {
    compare_csv: &'static str,
    /// Buckets whose expected weighted Monte Carlo count is at least 25.
    checked_buckets: usize,
    /// Share of those buckets where the Monte Carlo estimate lies within
    /// three standard errors of the analytic value.
    mc_within_3se: f64,
    max_abs_deviation_mc: f64,
    max_abs_deviation_stressed_input: f64,
    approaches: Vec<ApproachMeasures>,
}

/// Expected weighted count below which a bucket is left out of the Monte
/// Carlo agreement rate.
const MIN_EXPECTED_COUNT: f64 = 25.0;

fn measures(
    approach: &'static str,
    pmf: &Pmf,
    reference: &RiskReport,
    thetas: &[f64],
) -> Result<ApproachMeasures, CliError> {
    let report = risk_report(pmf, thetas, f64::INFINITY)?;
    Ok(ApproachMeasures {
        approach,
        mean: report.mean,
        levels: report
            .levels
            .iter()
            .zip(&reference.levels)
            .map(|(l, r)| LevelDeviation {
                theta: l.theta,
                quantile: l.quantile,
                expected_shortfall: l.expected_shortfall,
                quantile_deviation: l.quantile as i64 - r.quantile as i64,
                expected_shortfall_deviation: l.expected_shortfall - r.expected_shortfall,
            })
            .collect(),
    })
}

fn cmd_compare(common: &CommonArgs, scenario: &ScenarioArgs, sim: &SimArgs) -> Result<(), CliError> {
    let ctx = load(common)?;
    check_scenario(scenario, &ctx.portfolio)?;
    let ids: Vec<&str> = scenario.obligors.iter().map(String::as_str).collect();
    let (engine, max_loss) = engine_for(common, &ctx)?;
    let analytic = scenario_report(&engine, &ctx.portfolio, scenario, &common.theta)?;
    let stressed = stressed_input_distribution(&engine, &ctx.portfolio, &ids, scenario.writeoff)?;
    let estimate = estimate_conditional(
        &ctx.portfolio,
        &ids,
        scenario.writeoff,
        SimConfig::new(sim.draws, sim.seed),
    )?;
    let normalizer = expected_default_product(&ctx.portfolio, &ids)?;

    // The Monte Carlo estimate on the same grid; mass above it goes to the tail.
    let mut mc_probs = vec![0.0; max_loss + 1];
    for (x, b) in estimate.buckets.iter().enumerate().take(max_loss + 1) {
        mc_probs[x] = b.probability;
    }
    let mc_total: f64 = estimate.buckets.iter().map(|b| b.probability).sum();
    let mc_pmf = Pmf::from_probs(mc_probs.iter().map(|p| p / mc_total.max(1.0)).collect())?;

    let mut csv = String::from(
        "x,analytic,mc,mc_std_error,stressed_input,mc_deviation,stressed_input_deviation\n",
    );
    let (mut checked, mut within, mut max_mc, mut max_si) = (0usize, 0usize, 0.0f64, 0.0f64);
    for x in 0..=max_loss {
        let a = analytic.conditional_pmf.prob(x);
        let b = estimate.buckets.get(x).copied();
        let (m, se) = b.map_or((0.0, 0.0), |b| (b.probability, b.std_error));
        let s = stressed.prob(x);
        csv.push_str(&format!("{x},{a:e},{m:e},{se:e},{s:e},{:e},{:e}\n", m - a, s - a));
        max_mc = max_mc.max((m - a).abs());
        max_si = max_si.max((s - a).abs());
        if sim.draws as f64 * normalizer * a >= MIN_EXPECTED_COUNT {
            checked += 1;
            if (m - a).abs() <= 3.0 * se {
                within += 1;
            }
        }
    }

    let reference = &analytic.risk;
    let body = CompareBody {
        compare_csv: "compare.csv",
        checked_buckets: checked,
        mc_within_3se: if checked == 0 {
            1.0
        } else {
            within as f64 / checked as f64
        },
        max_abs_deviation_mc: max_mc,
        max_abs_deviation_stressed_input: max_si,
        approaches: vec![
            measures("analytic", &analytic.conditional_pmf, reference, &common.theta)?,
            measures("monte_carlo", &mc_pmf, reference, &common.theta)?,
            measures("stressed_input", &stressed, reference, &common.theta)?,
        ],
    };
    let config = CompareConfig {
        common,
        scenario,
        sim,
    };
    let meta = Metadata {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: "compare",
        input_sha256: ctx.digest.clone(),
        max_loss: Some(max_loss),
        config: &config,
    };
    write(&ctx.out, "compare.csv", &csv)?;
    write_json(
        &ctx.out,
        "compare.json",
        &Output {
            metadata: &meta,
            body,
        },
    )
}
