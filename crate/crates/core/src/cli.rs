//! Command-line front end. Every subcommand writes its effective config,
//! metrics, checkpoints and a ledger into the output directory.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::agent::{Algorithm, DqnAgent, ReplayBuffer, Transition};
use crate::analysis::checkpoint::Checkpoint;
use crate::analysis::config::ExperimentConfig;
use crate::analysis::landscape::{curvature, lambda_grid, scan, LandscapeScan, TdObjective};
use crate::analysis::metrics::{aggregate_rounds, read_jsonl, write_jsonl, MetricsRow, StepRecord};
use crate::analysis::plots::{bar_chart, landscape_chart, rounds_chart, Metric};
use crate::env::{ActionCodec, SlicingEnv};
use crate::orchestrator::{
    collect_data, dataset_from_records, derive_seed, distill, rollout, run_algorithm1, run_offline,
    state_pool, summarize, EvalSummary, RunLedger, EVAL_STREAM,
};
use crate::par::Exec;
use crate::{Error, Result};

const COLLECT_STREAM: u64 = 8;
const POOL_STREAM: u64 = 9;
const DISTILL_STREAM: u64 = 10;

#[derive(Parser, Debug)]
#[command(
    name = "slicetwin",
    version,
    about = "Digital-twin enhanced DRL for RAN slicing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Experiment config (TOML); omitted sections take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `io.out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Algo {
    Dqn,
    Ddqn,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Policy {
    Random,
    Ckpt,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train with the two-loop procedure (or plainly with `--twin off`).
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        algo: Option<Algo>,
        #[arg(long, value_enum)]
        twin: Option<Switch>,
    },
    /// Batch training on a recorded transition log.
    Offline {
        #[command(flatten)]
        common: Common,
        /// Transition log written by `collect` or `train`.
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        upsilon: Option<f64>,
        #[arg(long, value_enum)]
        twin: Option<Switch>,
    },
    /// Distil an agent checkpoint into a small student network.
    Distill {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        teacher: PathBuf,
        /// Comma-separated hidden widths, e.g. `16,16`.
        #[arg(long, value_delimiter = ',')]
        hidden: Option<Vec<usize>>,
        #[arg(long)]
        budget: Option<usize>,
        /// State pool source; collected with the teacher when omitted.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Loss along the normalized gradient direction of an agent checkpoint.
    Landscape {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        lambda_min: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        lambda_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        batch: Option<usize>,
        /// Batch source; collected with the agent when omitted.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Record real-environment transitions.
    Collect {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        steps: usize,
        #[arg(long, value_enum, default_value = "random")]
        policy: Policy,
        #[arg(long, required_if_eq("policy", "ckpt"))]
        ckpt: Option<PathBuf>,
    },
    /// Figures and data tables from finished runs.
    Plot {
        #[arg(long, num_args = 1.., required = true)]
        metrics: Vec<PathBuf>,
        #[arg(long, num_args = 1..)]
        landscape: Vec<PathBuf>,
        /// `distill.json` reports to show as agreement bars.
        #[arg(long, num_args = 1..)]
        agreement: Vec<PathBuf>,
        #[arg(long, default_value = "plots")]
        out: PathBuf,
    },
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code: 0 on success, 2 on usage errors, 1 otherwise.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Train { common, algo, twin } => train(&common, algo, twin),
        Command::Offline {
            common,
            dataset,
            upsilon,
            twin,
        } => offline(&common, &dataset, upsilon, twin),
        Command::Distill {
            common,
            teacher,
            hidden,
            budget,
            dataset,
        } => distill_cmd(&common, &teacher, hidden, budget, dataset.as_deref()),
        Command::Landscape {
            common,
            ckpt,
            lambda_min,
            lambda_max,
            points,
            batch,
            dataset,
        } => landscape(
            &common,
            &ckpt,
            lambda_min,
            lambda_max,
            points,
            batch,
            dataset.as_deref(),
        ),
        Command::Collect {
            common,
            steps,
            policy,
            ckpt,
        } => collect(&common, steps, policy, ckpt.as_deref()),
        Command::Plot {
            metrics,
            landscape,
            agreement,
            out,
        } => plot(&metrics, &landscape, &agreement, &out),
    }
}

/// Loads the config, applies overrides, validates it and prepares the run directory.
fn prepare(
    common: &Common,
    edit: impl FnOnce(&mut ExperimentConfig),
) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.io.out_dir = o.clone();
    }
    edit(&mut cfg);
    cfg.validate()?;
    let out = cfg.io.out_dir.clone();
    fs::create_dir_all(&out)?;
    fs::write(out.join("config.toml"), cfg.to_toml_string()?)?;
    Ok((cfg, out))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Schema(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_jsonl(&mut w, items)?;
    std::io::Write::flush(&mut w)?;
    Ok(())
}

fn read_lines<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    read_jsonl(BufReader::new(File::open(path)?))
}

fn load_agent(path: &Path) -> Result<DqnAgent> {
    Checkpoint::load(path)?.to_agent()
}

fn check_width(agent: &DqnAgent, cfg: &ExperimentConfig) -> Result<()> {
    let codec = ActionCodec::new(cfg.env.units, cfg.env.num_slices())?;
    if agent.spec().input_width() != cfg.env.num_slices() || agent.num_actions() != codec.count() {
        return Err(Error::Config(format!(
            "checkpoint network {:?} does not fit an environment with {} slices and {} actions",
            agent.spec().widths,
            cfg.env.num_slices(),
            codec.count()
        )));
    }
    Ok(())
}

fn to_transitions(records: &[StepRecord]) -> Vec<Transition> {
    records
        .iter()
        .map(|r| Transition {
            s: r.obs.clone(),
            a: r.action_index,
            r: r.reward,
            s_next: r.next_obs.clone(),
        })
        .collect()
}

/// Real transitions from `agent` with a fixed exploration rate.
fn gather(
    cfg: &ExperimentConfig,
    agent: &mut DqnAgent,
    steps: usize,
    explore: f64,
) -> Result<Vec<StepRecord>> {
    let mut env = SlicingEnv::new(cfg.env.clone())?;
    env.reset(derive_seed(cfg.seed, COLLECT_STREAM));
    collect_data(
        &mut env,
        agent,
        steps,
        Some(explore),
        0,
        &mut RunLedger::default(),
    )
}

fn eval_rows(
    cfg: &ExperimentConfig,
    policy: impl FnMut(&[f64]) -> Result<usize>,
) -> Result<(Vec<MetricsRow>, EvalSummary)> {
    let oc = &cfg.orchestrator;
    let records = rollout(
        &cfg.env,
        derive_seed(cfg.seed, EVAL_STREAM),
        oc.eval_rounds * oc.round_size,
        policy,
    )?;
    Ok((
        aggregate_rounds(&records, oc.round_size)?,
        summarize(&records)?,
    ))
}

fn train(common: &Common, algo: Option<Algo>, twin: Option<Switch>) -> Result<()> {
    let (cfg, out) = prepare(common, |c| {
        if let Some(a) = algo {
            c.agent.algorithm = match a {
                Algo::Dqn => Algorithm::Dqn,
                Algo::Ddqn => Algorithm::Ddqn,
            };
        }
        if let Some(t) = twin {
            c.orchestrator.twin = matches!(t, Switch::On);
        }
    })?;
    let run = run_algorithm1(&cfg.run_config())?;
    write_lines(&out.join("metrics.jsonl"), &run.ledger.rounds)?;
    if cfg.io.write_transitions {
        write_lines(&out.join("transitions.jsonl"), &run.records)?;
    }
    Checkpoint::from_agent(&run.agent1).save(&out.join("agent1.json"))?;
    if let Some(t) = &run.twin {
        Checkpoint::from_agent(&run.agent2).save(&out.join("agent2.json"))?;
        Checkpoint::from_twin(t).save(&out.join("twin.json"))?;
    }
    write_json(&out.join("ledger.json"), &run.ledger)
}

#[derive(Serialize)]
struct OfflineReport<'a> {
    epoch_loss: &'a [f64],
    eval: EvalSummary,
    ledger: &'a RunLedger,
}

fn offline(
    common: &Common,
    dataset: &Path,
    upsilon: Option<f64>,
    twin: Option<Switch>,
) -> Result<()> {
    let (cfg, out) = prepare(common, |c| {
        if let Some(u) = upsilon {
            c.orchestrator.upsilon = u;
        }
        if let Some(t) = twin {
            c.orchestrator.twin = matches!(t, Switch::On);
        }
    })?;
    let records: Vec<StepRecord> = read_lines(dataset)?;
    let codec = ActionCodec::new(cfg.env.units, cfg.env.num_slices())?;
    let data = dataset_from_records(&records, &codec)?;
    let res = run_offline(&cfg.run_config(), &data)?;
    let (rows, summary) = eval_rows(&cfg, |s| res.agent.greedy(s))?;
    write_lines(&out.join("metrics.jsonl"), &rows)?;
    Checkpoint::from_agent(&res.agent).save(&out.join("agent.json"))?;
    if let Some(t) = &res.twin {
        Checkpoint::from_twin(t).save(&out.join("twin.json"))?;
    }
    write_json(
        &out.join("ledger.json"),
        &OfflineReport {
            epoch_loss: &res.epoch_loss,
            eval: summary,
            ledger: &res.ledger,
        },
    )
}

#[derive(Serialize)]
struct DistillReport<'a> {
    agreement: f64,
    holdout: usize,
    loss: &'a [f64],
    eval: EvalSummary,
}

fn distill_cmd(
    common: &Common,
    teacher_path: &Path,
    hidden: Option<Vec<usize>>,
    budget: Option<usize>,
    dataset: Option<&Path>,
) -> Result<()> {
    let (cfg, out) = prepare(common, |c| {
        if let Some(h) = hidden {
            c.orchestrator.student_hidden = h;
        }
        if let Some(b) = budget {
            c.orchestrator.distill_budget = b;
        }
    })?;
    let oc = &cfg.orchestrator;
    let mut teacher = load_agent(teacher_path)?;
    check_width(&teacher, &cfg)?;
    let records = match dataset {
        Some(p) => read_lines(p)?,
        None => {
            let explore = teacher.config().explore_end;
            gather(&cfg, &mut teacher, oc.distill_pool, explore)?
        }
    };
    let mut buffer = ReplayBuffer::new(records.len().max(1));
    for t in to_transitions(&records) {
        buffer.push(t);
    }
    let pool = state_pool(&buffer, oc.distill_pool, derive_seed(cfg.seed, POOL_STREAM))?;
    let res = distill(
        &teacher,
        &pool,
        &oc.student_hidden,
        oc.distill_budget,
        oc.distill_batch,
        oc.distill_lr,
        cfg.twin.holdout_fraction,
        derive_seed(cfg.seed, DISTILL_STREAM),
    )?;
    let (rows, summary) = eval_rows(&cfg, |s| res.student.greedy(s))?;
    write_lines(&out.join("metrics.jsonl"), &rows)?;
    Checkpoint::from_student(&res.student).save(&out.join("student.json"))?;
    let report = DistillReport {
        agreement: res.agreement,
        holdout: res.holdout,
        loss: &res.loss,
        eval: summary,
    };
    write_json(&out.join("distill.json"), &report)?;
    write_json(&out.join("ledger.json"), &report)
}

#[derive(Serialize)]
struct LandscapeReport<'a> {
    scan: &'a LandscapeScan,
    curvature: Option<f64>,
    batch: usize,
    checkpoint_unchanged: bool,
}

#[derive(Serialize)]
struct LandscapeRow {
    lambda: f64,
    loss: f64,
}

#[allow(clippy::too_many_arguments)]
fn landscape(
    common: &Common,
    ckpt: &Path,
    lambda_min: Option<f64>,
    lambda_max: Option<f64>,
    points: Option<usize>,
    batch: Option<usize>,
    dataset: Option<&Path>,
) -> Result<()> {
    let (cfg, out) = prepare(common, |c| {
        let a = &mut c.analysis;
        a.lambda_min = lambda_min.unwrap_or(a.lambda_min);
        a.lambda_max = lambda_max.unwrap_or(a.lambda_max);
        a.points = points.unwrap_or(a.points);
        a.landscape_batch = batch.unwrap_or(a.landscape_batch);
    })?;
    let a = &cfg.analysis;
    let before = fs::read(ckpt)?;
    let agent = load_agent(ckpt)?;
    check_width(&agent, &cfg)?;
    let records = match dataset {
        Some(p) => read_lines(p)?.into_iter().take(a.landscape_batch).collect(),
        None => {
            let explore = agent.config().explore_end;
            gather(&cfg, &mut agent.clone(), a.landscape_batch, explore)?
        }
    };
    let transitions = to_transitions(&records);
    let objective = TdObjective::new(&agent, transitions.iter().collect())?;
    let grid = lambda_grid(a.lambda_min, a.lambda_max, a.points)?;
    let result = scan(&objective, &agent.online().flatten(), &grid, Exec::Parallel)?;
    if result.degenerate {
        eprintln!("warning: zero gradient, the scan is a constant curve");
    }
    let rows: Vec<LandscapeRow> = result
        .lambdas
        .iter()
        .zip(&result.losses)
        .map(|(&lambda, &loss)| LandscapeRow { lambda, loss })
        .collect();
    write_lines(&out.join("metrics.jsonl"), &rows)?;
    let report = LandscapeReport {
        scan: &result,
        curvature: curvature(&result),
        batch: transitions.len(),
        checkpoint_unchanged: fs::read(ckpt)? == before,
    };
    write_json(&out.join("landscape.json"), &report)?;
    write_json(&out.join("ledger.json"), &report)?;
    landscape_chart(&out.join("landscape.svg"), &[("scan", &result)])
}

fn collect(common: &Common, steps: usize, policy: Policy, ckpt: Option<&Path>) -> Result<()> {
    let (cfg, out) = prepare(common, |_| {})?;
    let (mut agent, explore) = match (policy, ckpt) {
        (Policy::Ckpt, Some(p)) => {
            let a = load_agent(p)?;
            check_width(&a, &cfg)?;
            let x = a.config().explore_end;
            (a, x)
        }
        _ => {
            let codec = ActionCodec::new(cfg.env.units, cfg.env.num_slices())?;
            let a = DqnAgent::new(
                cfg.agent.clone(),
                cfg.env.num_slices(),
                codec.count(),
                derive_seed(cfg.seed, COLLECT_STREAM),
            )?;
            (a, 1.0)
        }
    };
    let mut env = SlicingEnv::new(cfg.env.clone())?;
    env.reset(derive_seed(cfg.seed, COLLECT_STREAM));
    let mut ledger = RunLedger::default();
    let records = collect_data(&mut env, &mut agent, steps, Some(explore), 0, &mut ledger)?;
    ledger.rounds = aggregate_rounds(&records, cfg.orchestrator.round_size)?;
    write_lines(&out.join("transitions.jsonl"), &records)?;
    write_lines(&out.join("metrics.jsonl"), &ledger.rounds)?;
    write_json(&out.join("ledger.json"), &ledger)
}

/// Legend label of a run file: the name of its directory, else its stem.
fn label_of(path: &Path) -> String {
    path.parent()
        .and_then(Path::file_name)
        .or_else(|| path.file_stem())
        .map_or_else(
            || path.display().to_string(),
            |s| s.to_string_lossy().into_owned(),
        )
}

fn plot(
    metrics: &[PathBuf],
    landscapes: &[PathBuf],
    agreements: &[PathBuf],
    out: &Path,
) -> Result<()> {
    fs::create_dir_all(out)?;
    let runs: Vec<(String, Vec<MetricsRow>)> = metrics
        .iter()
        .map(|p| Ok((label_of(p), read_lines(p)?)))
        .collect::<Result<_>>()?;
    if runs.iter().all(|(_, rows)| rows.is_empty()) {
        return Err(Error::Validation("metrics files contain no rounds".into()));
    }
    let refs: Vec<(&str, &[MetricsRow])> = runs
        .iter()
        .map(|(l, r)| (l.as_str(), r.as_slice()))
        .collect();
    rounds_chart(&out.join("reward.svg"), Metric::Reward, &refs)?;
    rounds_chart(&out.join("utility.svg"), Metric::Utility, &refs)?;

    if !landscapes.is_empty() {
        #[derive(serde::Deserialize)]
        struct Stored {
            scan: LandscapeScan,
        }
        let scans: Vec<(String, LandscapeScan)> = landscapes
            .iter()
            .map(|p| {
                let text = fs::read_to_string(p)?;
                let s: Stored = serde_json::from_str(&text)
                    .map_err(|e| Error::parse_at(&text, e.line(), e.column(), e.to_string()))?;
                Ok((label_of(p), s.scan))
            })
            .collect::<Result<_>>()?;
        let refs: Vec<(&str, &LandscapeScan)> =
            scans.iter().map(|(l, s)| (l.as_str(), s)).collect();
        landscape_chart(&out.join("landscape.svg"), &refs)?;
    }

    if !agreements.is_empty() {
        let bars: Vec<(String, f64)> = agreements
            .iter()
            .map(|p| {
                let text = fs::read_to_string(p)?;
                let v: serde_json::Value = serde_json::from_str(&text)
                    .map_err(|e| Error::parse_at(&text, e.line(), e.column(), e.to_string()))?;
                let a = v["agreement"].as_f64().ok_or_else(|| {
                    Error::Schema(format!("{} has no numeric `agreement`", p.display()))
                })?;
                Ok((label_of(p), a))
            })
            .collect::<Result<_>>()?;
        let refs: Vec<(&str, f64)> = bars.iter().map(|(l, v)| (l.as_str(), *v)).collect();
        bar_chart(&out.join("agreement.svg"), "greedy-action agreement", &refs)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["slicetwin", "train", "--algo", "bogus"]), 2);
        assert_eq!(run(["slicetwin", "frobnicate"]), 2);
        assert_eq!(run(["slicetwin", "train", "--nope"]), 2);
    }

    #[test]
    fn runtime_errors_exit_one() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("missing.json");
        let code = run([
            "slicetwin".as_ref(),
            "landscape".as_ref(),
            "--ckpt".as_ref(),
            missing.as_os_str(),
            "--out".as_ref(),
            dir.path().as_os_str(),
        ]);
        assert_eq!(code, 1);
    }

    #[test]
    fn labels() {
        assert_eq!(label_of(Path::new("runs/dt/metrics.jsonl")), "dt");
        assert_eq!(label_of(Path::new("metrics.jsonl")), "metrics");
    }
}
