//! Single games and multi-game series on disk.
//!
//! Output layout under the series directory:
//!
//! ```text
//! games/<id>.jsonl                 one GameEvent per line
//! exchanges/<id>.jsonl             backend exchanges made while playing
//! exchanges/<id>.learning.jsonl    backend exchanges made while learning
//! strategy/store.json              latest strategy store
//! strategy/store.v<N>.json         store after N learning steps
//! manifest.json                    ids, seeds, versions, rolling winning rates
//! report.json, report.txt          metrics over the completed games
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use avalon_core::agent::{default_profiles, RoleProfile};
use avalon_core::analytics::{build_report, render_table, MetricsReport, RuleJudge};
use avalon_core::backend::{Backend, BackendKind, Recorder};
use avalon_core::experience::{learn_from_game, LearningContext, StrategyStore};
use avalon_core::extraction::Demonstrations;
use avalon_core::host::{run_game, GameSetup, SeatKind};
use avalon_core::log::GameLog;
use avalon_core::prompts::{PromptSet, TemplateId};
use avalon_core::rules::{assign_roles, GameConfig, Role, Side};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{BackendSpec, ConfigError, OpponentKind, SeriesConfig};
use crate::data::{DataError, DataOverrides};
use crate::exchange::{Clock, FileSink};
use crate::http::{api_key, HttpBackend, InFlightLimit};
use crate::store::{save_versioned, StoreError};

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("game {game_id} could not start: {message}")]
    Setup { game_id: String, message: String },
    #[error("live backend unavailable: {0}")]
    Backend(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SeriesError + '_ {
    move |source| SeriesError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Builds the backend for one game.
pub type BackendFactory<'a> = dyn Fn(&GameSetup) -> Box<dyn Backend + Send> + Sync + 'a;

/// Factory for the configured backend kind.
pub fn configured_factory(
    config: &SeriesConfig,
) -> Result<Box<BackendFactory<'static>>, SeriesError> {
    match &config.backend {
        BackendSpec::Canned => Ok(Box::new(|_: &GameSetup| {
            Box::new(crate::canned::canned_backend()) as Box<dyn Backend + Send>
        })),
        BackendSpec::Live(settings) => {
            let key = api_key().map_err(SeriesError::Backend)?;
            let limit = InFlightLimit::new(settings.max_in_flight);
            let settings = settings.clone();
            Ok(Box::new(move |_: &GameSetup| {
                Box::new(HttpBackend::new(
                    key.clone(),
                    settings.clone(),
                    limit.clone(),
                )) as Box<dyn Backend + Send>
            }))
        }
    }
}

/// Prompts, profiles and demonstrations shared by every game of a series.
#[derive(Debug, Clone, PartialEq)]
pub struct Resources {
    pub prompts: PromptSet,
    pub profiles: BTreeMap<Role, RoleProfile>,
    pub demonstrations: Option<Demonstrations>,
    pub overrides: BTreeMap<TemplateId, String>,
}

impl Default for Resources {
    fn default() -> Self {
        Resources {
            prompts: PromptSet::default(),
            profiles: default_profiles(),
            demonstrations: None,
            overrides: BTreeMap::new(),
        }
    }
}

impl Resources {
    pub fn load(config: &SeriesConfig) -> Result<Resources, SeriesError> {
        let Some(dir) = &config.data_dir else {
            return Ok(Resources::default());
        };
        let data = DataOverrides::load(dir)?;
        let prompts =
            PromptSet::with_overrides(&data.templates).map_err(|e| DataError::Invalid {
                path: dir.clone(),
                message: e.to_string(),
            })?;
        Ok(Resources {
            prompts,
            profiles: data.profiles.unwrap_or_else(default_profiles),
            demonstrations: data.demonstrations,
            overrides: data.templates,
        })
    }
}

pub fn game_seed(config: &SeriesConfig, index: u32) -> u64 {
    config.seed.wrapping_add(u64::from(index))
}

pub fn game_id(index: u32, seed: u64) -> String {
    format!("g{index:03}-{seed:016x}")
}

/// Setup for game `index`: seats holding the tested side's roles run the
/// pipeline, the rest follow `config.opponents`.
pub fn game_setup(
    config: &SeriesConfig,
    res: &Resources,
    index: u32,
    store: Option<&StrategyStore>,
) -> GameSetup {
    let seed = game_seed(config, index);
    let assignment = assign_roles(seed);
    let mut seat_kinds = [SeatKind::Bot; 6];
    for (seat, role) in assignment.iter() {
        let tested = role.side() == config.side_under_test;
        seat_kinds[usize::from(seat.index() - 1)] = match (tested, config.opponents) {
            (true, _) | (false, OpponentKind::Pipeline) => SeatKind::Pipeline,
            (false, OpponentKind::Bot) => SeatKind::Bot,
        };
    }
    let mut setup = GameSetup::new(game_id(index, seed), GameConfig::new(seed));
    setup.seat_kinds = seat_kinds;
    setup.pipeline = config.pipeline_settings();
    setup.model = config.model.clone();
    setup.extractor_model = config.extractor_model;
    setup.prompt_overrides = res.overrides.clone();
    setup.demonstrations = res.demonstrations.clone();
    match store {
        Some(store) => {
            setup.profiles = store.apply_to(&res.profiles);
            setup.experience = store.experience_blocks(&res.prompts);
            setup.strategy_version = store.version;
        }
        None => setup.profiles = res.profiles.clone(),
    }
    setup
}

fn clock_for(kind: BackendKind) -> Clock {
    match kind {
        BackendKind::LiveHttp => Clock::Wall,
        BackendKind::Scripted | BackendKind::Replay => Clock::Logical(0),
    }
}

fn create_dirs(out: &Path) -> Result<(), SeriesError> {
    for sub in ["games", "exchanges", "strategy"] {
        let p = out.join(sub);
        fs::create_dir_all(&p).map_err(io_err(&p))?;
    }
    Ok(())
}

pub fn log_path(out: &Path, game_id: &str) -> PathBuf {
    out.join("games").join(format!("{game_id}.jsonl"))
}

pub fn exchange_path(out: &Path, game_id: &str) -> PathBuf {
    out.join("exchanges").join(format!("{game_id}.jsonl"))
}

/// Exchange log that belongs to a game log: `../exchanges/<stem>.jsonl`.
pub fn sibling_exchange_path(game_log: &Path) -> Option<PathBuf> {
    let stem = game_log.file_stem()?.to_str()?;
    let games_dir = game_log.parent()?;
    let root = games_dir.parent().unwrap_or(Path::new("."));
    Some(root.join("exchanges").join(format!("{stem}.jsonl")))
}

/// One played game as written to disk.
#[derive(Debug, Clone)]
pub struct PlayedGame {
    pub setup: GameSetup,
    pub log: GameLog,
    pub abort_reason: Option<String>,
}

/// Plays one game, recording its log and exchanges under `out`.
pub fn play_game(
    out: &Path,
    setup: &GameSetup,
    backend: &mut dyn Backend,
) -> Result<PlayedGame, SeriesError> {
    create_dirs(out)?;
    let xpath = exchange_path(out, &setup.game_id);
    let sink = FileSink::create(&xpath, clock_for(backend.kind())).map_err(io_err(&xpath))?;
    let mut recorder = Recorder::new(backend, sink);
    let record = run_game(setup, &mut recorder).map_err(|e| SeriesError::Setup {
        game_id: setup.game_id.clone(),
        message: e.to_string(),
    })?;
    let lpath = log_path(out, &setup.game_id);
    fs::write(&lpath, record.log.to_jsonl()).map_err(io_err(&lpath))?;
    Ok(PlayedGame {
        setup: setup.clone(),
        log: record.log,
        abort_reason: record.failure.map(|e| e.to_string()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameEntry {
    pub index: u32,
    pub game_id: String,
    pub seed: u64,
    /// Store version the game was played with.
    pub strategy_version: u64,
    pub complete: bool,
    pub winner: Option<Side>,
    pub abort_reason: Option<String>,
    /// Store version after learning from this game, when learning ran.
    pub store_version_after: Option<u64>,
    /// Roles whose suggestion reply could not be parsed; the previous set was kept.
    pub flagged_roles: Vec<Role>,
    pub learning_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub after_games: u32,
    pub completed: u32,
    /// Over every completed game so far.
    pub cumulative_winning_rate: Option<f64>,
    /// Over the completed games since the previous checkpoint.
    pub window_winning_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesManifest {
    pub config_digest: String,
    pub config: SeriesConfig,
    pub side_under_test: Side,
    pub games: Vec<GameEntry>,
    pub aborted_games: usize,
    pub checkpoints: Vec<Checkpoint>,
    pub final_store_version: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct SeriesOutcome {
    pub manifest: SeriesManifest,
    pub logs: Vec<GameLog>,
    pub report: Option<MetricsReport>,
    pub store: Option<StrategyStore>,
}

fn rate(wins: u32, n: u32) -> Option<f64> {
    (n > 0).then(|| f64::from(wins) / f64::from(n))
}

/// Rolling winning rate of `side` every `interval` games.
pub fn checkpoints(entries: &[GameEntry], side: Side, interval: u32) -> Vec<Checkpoint> {
    let interval = interval.max(1) as usize;
    let mut out = Vec::new();
    let (mut wins, mut done) = (0u32, 0u32);
    for (i, chunk) in entries.chunks(interval).enumerate() {
        let (mut w, mut d) = (0u32, 0u32);
        for e in chunk.iter().filter(|e| e.complete) {
            d += 1;
            w += u32::from(e.winner == Some(side));
        }
        wins += w;
        done += d;
        if chunk.len() == interval {
            out.push(Checkpoint {
                after_games: ((i + 1) * interval) as u32,
                completed: done,
                cumulative_winning_rate: rate(wins, done),
                window_winning_rate: rate(w, d),
            });
        }
    }
    out
}

fn entry(index: u32, played: &PlayedGame) -> GameEntry {
    GameEntry {
        index,
        game_id: played.setup.game_id.clone(),
        seed: played.setup.config.seed,
        strategy_version: played.setup.strategy_version,
        complete: played.log.is_complete(),
        winner: played.log.winner(),
        abort_reason: played.abort_reason.clone(),
        store_version_after: None,
        flagged_roles: Vec::new(),
        learning_error: None,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), SeriesError> {
    let mut text = serde_json::to_string_pretty(value).unwrap_or_default();
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn run_learning(
    config: &SeriesConfig,
    res: &Resources,
    out: &Path,
    factory: &BackendFactory<'_>,
) -> Result<(Vec<GameEntry>, Vec<GameLog>, StrategyStore), SeriesError> {
    let mut store = StrategyStore::from_profiles(&res.profiles);
    save_versioned(&out.join("strategy"), &store)?;
    let (mut entries, mut logs) = (Vec::new(), Vec::new());
    for index in 0..config.games {
        let setup = game_setup(config, res, index, Some(&store));
        let mut backend = factory(&setup);
        let played = play_game(out, &setup, &mut *backend)?;
        let mut e = entry(index, &played);
        if e.complete {
            let path = out
                .join("exchanges")
                .join(format!("{}.learning.jsonl", setup.game_id));
            let sink = FileSink::create(&path, clock_for(backend.kind())).map_err(io_err(&path))?;
            let mut recorder = Recorder::new(&mut *backend, sink);
            let ctx = LearningContext {
                prompts: &res.prompts,
                model: &config.model,
                profiles: &res.profiles,
                retry_budget: config.pipeline.retry_budget,
            };
            match learn_from_game(
                &mut store,
                &played.log,
                config.learning_switches(),
                &ctx,
                &mut recorder,
            ) {
                Ok(report) => {
                    e.flagged_roles = report.flagged_roles;
                    e.store_version_after = Some(store.version);
                    save_versioned(&out.join("strategy"), &store)?;
                }
                Err(err) => e.learning_error = Some(err.to_string()),
            }
        }
        entries.push(e);
        logs.push(played.log);
    }
    Ok((entries, logs, store))
}

fn run_independent(
    config: &SeriesConfig,
    res: &Resources,
    out: &Path,
    factory: &BackendFactory<'_>,
) -> Result<(Vec<GameEntry>, Vec<GameLog>), SeriesError> {
    let n = config.games as usize;
    let slots: Mutex<Vec<Option<Result<PlayedGame, SeriesError>>>> =
        Mutex::new((0..n).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let work = || loop {
        let i = next.fetch_add(1, Ordering::SeqCst);
        if i >= n {
            break;
        }
        let setup = game_setup(config, res, i as u32, None);
        let mut backend = factory(&setup);
        let result = play_game(out, &setup, &mut *backend);
        slots.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(result);
    };
    std::thread::scope(|s| {
        for _ in 1..config.workers.min(n.max(1)) {
            s.spawn(work);
        }
        work();
    });
    let (mut entries, mut logs) = (Vec::new(), Vec::new());
    let slots = slots.into_inner().unwrap_or_else(|e| e.into_inner());
    for (i, slot) in slots.into_iter().enumerate() {
        let played = slot.expect("every slot is filled")?;
        entries.push(entry(i as u32, &played));
        logs.push(played.log);
    }
    Ok((entries, logs))
}

/// Plays the whole series and writes every artifact under `out`.
pub fn run_series(
    config: &SeriesConfig,
    out: &Path,
    factory: &BackendFactory<'_>,
) -> Result<SeriesOutcome, SeriesError> {
    config.validate()?;
    let res = Resources::load(config)?;
    create_dirs(out)?;
    let (entries, logs, store) = if config.learning {
        let (e, l, s) = run_learning(config, &res, out, factory)?;
        (e, l, Some(s))
    } else {
        let (e, l) = run_independent(config, &res, out, factory)?;
        (e, l, None)
    };
    let report = build_report(&logs, &mut RuleJudge).ok();
    if let Some(r) = &report {
        write_json(&out.join("report.json"), r)?;
        let path = out.join("report.txt");
        fs::write(&path, render_table(r)).map_err(io_err(&path))?;
    }
    let manifest = SeriesManifest {
        config_digest: config.digest(),
        config: config.clone(),
        side_under_test: config.side_under_test,
        aborted_games: entries.iter().filter(|e| !e.complete).count(),
        checkpoints: checkpoints(&entries, config.side_under_test, config.checkpoint_interval),
        final_store_version: store.as_ref().map(|s| s.version),
        games: entries,
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(SeriesOutcome {
        manifest,
        logs,
        report,
        store,
    })
}
