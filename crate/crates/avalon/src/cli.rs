//! Command-line surface. Exit codes: 0 ok, 1 domain error, 2 usage error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use avalon_core::analytics::{build_report, render_table, BackendJudge, Judge, RuleJudge};
use avalon_core::log::GameLog;
use avalon_core::rules::Side;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{Ablation, OpponentKind, SeriesConfig};
use crate::exchange::read_exchanges;
use crate::replay::replay_game;
use crate::series::{
    configured_factory, game_setup, play_game, run_series, sibling_exchange_path, Resources,
};
use crate::store::load_store;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "avalon",
    version,
    about = "Six-player Avalon games between language-model agents"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Play one game.
    Run(RunArgs),
    /// Play a series of games and compute metrics.
    Series(SeriesArgs),
    /// Compute metrics over recorded game logs.
    Analyze(AnalyzeArgs),
    /// Re-drive a recorded game from its exchange log.
    Replay(ReplayArgs),
    /// Check a configuration file and, optionally, game logs.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SideArg {
    Good,
    Evil,
}

impl From<SideArg> for Side {
    fn from(s: SideArg) -> Side {
        match s {
            SideArg::Good => Side::Good,
            SideArg::Evil => Side::Evil,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OpponentArg {
    Bot,
    Pipeline,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum JudgeArg {
    Rule,
    Backend,
}

#[derive(Debug, Args)]
struct Common {
    /// Series configuration (JSON); flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Side whose seats run the agent pipeline.
    #[arg(long, value_enum)]
    side: Option<SideArg>,
    /// Agent kind for the other side's seats.
    #[arg(long, value_enum)]
    opponents: Option<OpponentArg>,
    /// Module to switch off; repeat or separate with commas.
    #[arg(long = "ablate", value_delimiter = ',', value_parser = parse_ablation)]
    ablations: Vec<Ablation>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Strategy store whose learned experience the agents start with.
    #[arg(long)]
    store: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SeriesArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    games: Option<u32>,
    #[arg(long, value_enum)]
    learning: Option<Switch>,
    #[arg(long)]
    checkpoint_interval: Option<u32>,
    /// Parallel games; used only with learning off.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Directory of game logs, or a series directory with a games/ subdirectory.
    #[arg(long)]
    logs: PathBuf,
    #[arg(long, value_enum, default_value = "rule")]
    judge: JudgeArg,
    /// Configuration supplying the backend for the backend judge.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print a plain-text table instead of JSON.
    #[arg(long)]
    table: bool,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    /// Recorded game log.
    #[arg(long)]
    game: PathBuf,
    /// Exchange log; defaults to the one beside the game's directory.
    #[arg(long)]
    exchanges: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Game log to check against the rules engine; repeatable.
    #[arg(long = "log")]
    logs: Vec<PathBuf>,
}

fn parse_ablation(s: &str) -> Result<Ablation, String> {
    Ablation::parse(s).ok_or_else(|| {
        let names: Vec<String> = Ablation::ALL.iter().map(|a| format!("{a:?}")).collect();
        format!(
            "unknown ablation {s:?}; expected one of {}",
            names.join(", ")
        )
    })
}

fn base_config(path: Option<&Path>) -> anyhow::Result<SeriesConfig> {
    Ok(match path {
        Some(p) => SeriesConfig::load(p)?,
        None => SeriesConfig::default(),
    })
}

fn apply_common(config: &mut SeriesConfig, c: &Common) {
    if let Some(s) = c.seed {
        config.seed = s;
    }
    if let Some(s) = c.side {
        config.side_under_test = s.into();
    }
    if let Some(o) = c.opponents {
        config.opponents = match o {
            OpponentArg::Bot => OpponentKind::Bot,
            OpponentArg::Pipeline => OpponentKind::Pipeline,
        };
    }
    config.ablations.extend(c.ablations.iter().copied());
}

fn cmd_run(args: RunArgs, out: &mut dyn Write) -> anyhow::Result<i32> {
    let mut config = base_config(args.common.config.as_deref())?;
    apply_common(&mut config, &args.common);
    config.games = 1;
    if args.store.is_none() {
        config
            .ablations
            .retain(|a| !matches!(a, Ablation::IS | Ablation::AO));
    }
    config.validate()?;
    let res = Resources::load(&config)?;
    let store = args.store.as_deref().map(load_store).transpose()?;
    let setup = game_setup(&config, &res, 0, store.as_ref());
    let factory = configured_factory(&config)?;
    let mut backend = factory(&setup);
    let played = play_game(&args.common.out, &setup, &mut *backend)?;
    writeln!(
        out,
        "game {} -> {}",
        setup.game_id,
        crate::series::log_path(&args.common.out, &setup.game_id).display()
    )?;
    match (played.log.winner(), played.abort_reason) {
        (Some(w), _) => {
            writeln!(out, "winner: {w:?}")?;
            Ok(EXIT_OK)
        }
        (None, reason) => bail!("game aborted: {}", reason.unwrap_or_default()),
    }
}

fn cmd_series(args: SeriesArgs, out: &mut dyn Write) -> anyhow::Result<i32> {
    let mut config = base_config(args.common.config.as_deref())?;
    apply_common(&mut config, &args.common);
    if let Some(g) = args.games {
        config.games = g;
    }
    if let Some(l) = args.learning {
        config.learning = matches!(l, Switch::On);
    }
    if let Some(c) = args.checkpoint_interval {
        config.checkpoint_interval = c;
    }
    if let Some(w) = args.workers {
        config.workers = w;
    }
    config.validate()?;
    let factory = configured_factory(&config)?;
    let outcome = run_series(&config, &args.common.out, &*factory)?;
    let m = &outcome.manifest;
    writeln!(
        out,
        "{} games ({} aborted) -> {}",
        m.games.len(),
        m.aborted_games,
        args.common.out.display()
    )?;
    for cp in &m.checkpoints {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
        writeln!(
            out,
            "after {:>3} games: {:?} winning rate {} (window {})",
            cp.after_games,
            m.side_under_test,
            fmt(cp.cumulative_winning_rate),
            fmt(cp.window_winning_rate)
        )?;
    }
    if let Some(v) = m.final_store_version {
        writeln!(out, "strategy store version {v}")?;
    }
    if let Some(r) = &outcome.report {
        writeln!(out)?;
        write!(out, "{}", render_table(r))?;
    }
    Ok(EXIT_OK)
}

/// Game logs under `dir` (or `dir/games`), in file-name order.
pub fn load_logs(dir: &Path) -> anyhow::Result<Vec<GameLog>> {
    let games = dir.join("games");
    let dir = if games.is_dir() {
        games
    } else {
        dir.to_path_buf()
    };
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
        .with_context(|| format!("cannot list {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .jsonl game logs in {}", dir.display());
    }
    paths
        .iter()
        .map(|p| {
            let text =
                fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            GameLog::from_jsonl(&text).with_context(|| format!("{}", p.display()))
        })
        .collect()
}

fn cmd_analyze(args: AnalyzeArgs, out: &mut dyn Write) -> anyhow::Result<i32> {
    let logs = load_logs(&args.logs)?;
    let report = match args.judge {
        JudgeArg::Rule => build_report(&logs, &mut RuleJudge)?,
        JudgeArg::Backend => {
            let config = base_config(args.config.as_deref())?;
            config.validate()?;
            let factory = configured_factory(&config)?;
            let setup = avalon_core::host::GameSetup::new(
                "judge",
                avalon_core::rules::GameConfig::new(config.seed),
            );
            let mut judge = BackendJudge::new(factory(&setup));
            judge.model = config.model.clone();
            judge.prompts = Resources::load(&config)?.prompts;
            build_report(&logs, &mut judge as &mut dyn Judge)?
        }
    };
    if args.table {
        write!(out, "{}", render_table(&report))?;
    } else {
        writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
    }
    Ok(EXIT_OK)
}

fn cmd_replay(args: ReplayArgs, out: &mut dyn Write) -> anyhow::Result<i32> {
    let xpath = match args.exchanges {
        Some(p) => p,
        None => sibling_exchange_path(&args.game)
            .ok_or_else(|| anyhow!("cannot derive an exchange log path"))?,
    };
    let text = fs::read_to_string(&args.game)
        .with_context(|| format!("cannot read {}", args.game.display()))?;
    if !xpath.is_file() {
        bail!(
            "replay mismatch: exchange log {} is missing",
            xpath.display()
        );
    }
    let exchanges = read_exchanges(&xpath)?
        .into_iter()
        .map(|r| r.exchange)
        .collect();
    let summary = replay_game(&text, exchanges)?;
    writeln!(
        out,
        "replay ok: {} ({} events, {} exchanges) byte-identical",
        summary.game_id, summary.events, summary.exchanges
    )?;
    Ok(EXIT_OK)
}

fn cmd_validate(args: ValidateArgs, out: &mut dyn Write) -> anyhow::Result<i32> {
    if args.config.is_none() && args.logs.is_empty() {
        bail!("nothing to validate; pass --config and/or --log");
    }
    let mut failed = false;
    if let Some(path) = &args.config {
        let config = SeriesConfig::load(path)?;
        let problems = config.problems();
        if problems.is_empty() {
            writeln!(out, "{}: ok", path.display())?;
        } else {
            failed = true;
            for p in problems {
                writeln!(out, "{}: {p}", path.display())?;
            }
        }
    }
    for path in &args.logs {
        let text =
            fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let result = GameLog::from_jsonl(&text).and_then(|log| log.validate().map(|_| log));
        match result {
            Ok(log) => writeln!(
                out,
                "{}: ok ({} events, {})",
                path.display(),
                log.events.len(),
                if log.is_complete() {
                    "complete"
                } else {
                    "incomplete"
                }
            )?,
            Err(e) => {
                failed = true;
                writeln!(out, "{}: {e}", path.display())?;
            }
        }
    }
    Ok(if failed { EXIT_DOMAIN } else { EXIT_OK })
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn main_with(argv: Vec<OsString>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().ansi().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return if code == 0 { EXIT_OK } else { EXIT_USAGE };
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a, out),
        Command::Series(a) => cmd_series(a, out),
        Command::Analyze(a) => cmd_analyze(a, out),
        Command::Replay(a) => cmd_replay(a, out),
        Command::Validate(a) => cmd_validate(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_DOMAIN
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let argv = std::iter::once("avalon")
            .chain(args.iter().copied())
            .map(OsString::from)
            .collect();
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = main_with(argv, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(&["run", "--bogus"]).0, EXIT_USAGE);
        assert_eq!(run(&[]).0, EXIT_USAGE);
        let (code, _, err) = run(&["series", "--ablate", "XYZ"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("unknown ablation"));
    }

    #[test]
    fn help_exits_0() {
        let (code, out, _) = run(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("replay"));
    }

    #[test]
    fn domain_errors_exit_1() {
        assert_eq!(run(&["analyze", "--logs", "/nonexistent"]).0, EXIT_DOMAIN);
        assert_eq!(run(&["validate"]).0, EXIT_DOMAIN);
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let (code, _, err) = run(&[
            "series",
            "--learning",
            "off",
            "--ablate",
            "IS",
            "--out",
            out,
        ]);
        assert_eq!(code, EXIT_DOMAIN);
        assert!(err.contains("IS requires learning"));
    }
}
