//! Population self-play: a bootstrap model trained on scripted or random
//! games, then iterations in which the newest model plays ArgmaxVal*
//! against imitation players drawn from recent models.

mod dataset;
mod learner;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{ConfigError, GameConfig, GameError, GameState, NUM_PLAYERS};
use crate::model::{GenerativeModel, ModelError, OutcomeSpace, OutcomeValueFn};
use crate::neural::{NeuralError, TrainLog};
use crate::policy::{
    play_deal, Agent, ModelAgent, PolicyError, PolicyKind, ScriptedAgent, UniformAgent,
};
use crate::seeds::derive_seed;
use crate::tokenizer::{verify_history, ObservationHistory, Verdict};

pub use dataset::{Dataset, DatasetRecord};
pub use learner::{Learner, NeuralShape, TrainedModel};

#[derive(Debug, Error)]
pub enum SelfPlayError {
    #[error("invalid self-play configuration: {0}")]
    Config(String),
    #[error("game {game} (seed {seed}): {source}")]
    Game {
        game: usize,
        seed: u64,
        source: PolicyError,
    },
    #[error("game {game} produced an illegal history for seat {seat}")]
    IllegalHistory { game: usize, seat: usize },
    #[error("training failed in iteration {iteration}: {source}")]
    Training {
        iteration: usize,
        source: NeuralError,
    },
    #[error("dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<ConfigError> for SelfPlayError {
    fn from(e: ConfigError) -> SelfPlayError {
        SelfPlayError::Config(e.to_string())
    }
}

impl From<GameError> for SelfPlayError {
    fn from(e: GameError) -> SelfPlayError {
        SelfPlayError::Config(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bootstrap {
    UniformRandom,
    ScriptedPolicy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeatScheme {
    /// One seat plays ArgmaxVal* on the newest model and only its history
    /// is kept; the others sample from a model drawn from the population.
    OneGreedyRestSampled,
    /// Every seat plays ArgmaxVal* on the newest model; all histories kept.
    AllGreedy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IterationConfig {
    pub bootstrap_games: usize,
    pub games_per_iteration: usize,
    pub num_iterations: usize,
    /// Most recent models the imitation seats draw from.
    pub population_window: usize,
    pub bootstrap: Bootstrap,
    /// Seating of the first generation after the bootstrap.
    pub first_seat_scheme: SeatScheme,
    /// Seating of every later generation.
    pub seat_scheme: SeatScheme,
    /// ArgmaxVal* probability threshold of the greedy seats.
    pub lambda: f64,
    /// Imitation sampling temperature.
    pub temperature: f64,
    pub learner: Learner,
    pub seed: u64,
}

impl Default for IterationConfig {
    fn default() -> IterationConfig {
        IterationConfig {
            bootstrap_games: 50_000,
            games_per_iteration: 20_000,
            num_iterations: 3,
            population_window: 10,
            bootstrap: Bootstrap::UniformRandom,
            first_seat_scheme: SeatScheme::AllGreedy,
            seat_scheme: SeatScheme::OneGreedyRestSampled,
            lambda: 0.05,
            temperature: 1.0,
            learner: Learner::default(),
            seed: 0,
        }
    }
}

impl IterationConfig {
    pub fn validate(&self) -> Result<(), SelfPlayError> {
        let bad = |m: &str| Err(SelfPlayError::Config(m.to_string()));
        if self.bootstrap_games == 0 || self.games_per_iteration == 0 {
            return bad("game counts must be at least 1");
        }
        if self.population_window == 0 {
            return bad("population_window must be at least 1");
        }
        if !(0.0..1.0).contains(&self.lambda) {
            return bad("lambda must lie in [0, 1)");
        }
        if !(self.temperature > 0.0) {
            return bad("temperature must be positive");
        }
        Ok(())
    }
}

fn check_legal(
    records: &[(usize, Vec<u16>)],
    game: &GameConfig,
    index: usize,
) -> Result<(), SelfPlayError> {
    for (seat, tokens) in records {
        let h = ObservationHistory::new(*seat, tokens.clone());
        match verify_history(&h, game) {
            Ok(Verdict::Legal) => {}
            _ => {
                return Err(SelfPlayError::IllegalHistory {
                    game: index,
                    seat: *seat,
                })
            }
        }
    }
    Ok(())
}

/// Plays `n` games with per-seat agents chosen by `seat_agents` and keeps
/// the histories of the seats it marks as recorded.
fn generate<F>(
    game: &GameConfig,
    n: usize,
    iteration: usize,
    seed: u64,
    seat_agents: F,
) -> Result<Dataset, SelfPlayError>
where
    F: Fn(usize, &mut ChaCha8Rng) -> ([Box<dyn Agent>; NUM_PLAYERS], [bool; NUM_PLAYERS], bool)
        + Sync,
{
    let outcomes = OutcomeSpace::new(game);
    let games: Vec<Vec<DatasetRecord>> = (0..n)
        .into_par_iter()
        .map(|g| {
            let deal_seed = derive_seed(seed, &[iteration as u64, g as u64]);
            let deal = GameState::new_deal_indexed(game.clone(), deal_seed, g as u32)?;
            let mut setup_rng = ChaCha8Rng::seed_from_u64(derive_seed(deal_seed, &[0]));
            let (agents, recorded, greedy) = seat_agents(g, &mut setup_rng);
            let mut rngs: [ChaCha8Rng; NUM_PLAYERS] = std::array::from_fn(|p| {
                ChaCha8Rng::seed_from_u64(derive_seed(deal_seed, &[1, p as u64]))
            });
            let refs: [&dyn Agent; NUM_PLAYERS] = std::array::from_fn(|p| agents[p].as_ref());
            let played =
                play_deal(&deal, refs, &mut rngs).map_err(|source| SelfPlayError::Game {
                    game: g,
                    seed: deal_seed,
                    source,
                })?;
            let outcome = outcomes
                .id(&played.outcome)
                .expect("simulator outcomes are in the manifest");
            let kept: Vec<(usize, Vec<u16>)> = (0..NUM_PLAYERS)
                .filter(|&p| recorded[p])
                .map(|p| (p, played.histories[p].tokens().to_vec()))
                .collect();
            check_legal(&kept, game, g)?;
            Ok(kept
                .into_iter()
                .map(|(_, tokens)| DatasetRecord {
                    iteration: iteration as u32,
                    greedy,
                    outcome,
                    tokens,
                })
                .collect())
        })
        .collect::<Result<_, SelfPlayError>>()?;
    Ok(Dataset {
        game: game.clone(),
        records: games.into_iter().flatten().collect(),
    })
}

/// Games where every seat follows the bootstrap policy; all four histories
/// are kept.
pub fn generate_bootstrap(
    game: &GameConfig,
    bootstrap: Bootstrap,
    n: usize,
    seed: u64,
) -> Result<Dataset, SelfPlayError> {
    generate(game, n, 0, seed, |_, _| {
        let agents = std::array::from_fn(|_| -> Box<dyn Agent> {
            match bootstrap {
                Bootstrap::UniformRandom => Box::new(UniformAgent),
                Bootstrap::ScriptedPolicy => Box::new(ScriptedAgent),
            }
        });
        (agents, [true; NUM_PLAYERS], false)
    })
}

/// Games for one iteration. `population` lists the models the imitation
/// seats may use, oldest first; the last one is the newest and drives the
/// greedy seats. The greedy seat rotates with the game number.
pub fn generate_games(
    game: &GameConfig,
    population: &[Arc<TrainedModel>],
    config: &IterationConfig,
    iteration: usize,
) -> Result<Dataset, SelfPlayError> {
    let latest = population
        .last()
        .ok_or_else(|| SelfPlayError::Config("empty population".into()))?;
    let window = &population[population.len().saturating_sub(config.population_window)..];
    let v = OutcomeValueFn::for_config(game);
    let greedy_agent = |m: &Arc<TrainedModel>| -> Box<dyn Agent> {
        let model: Arc<dyn GenerativeModel> = m.clone();
        Box::new(ModelAgent::new(
            model,
            PolicyKind::ArgmaxValStar {
                lambda: config.lambda,
            },
            v.clone(),
            game,
        ))
    };
    let imitation_agent = |m: &Arc<TrainedModel>| -> Box<dyn Agent> {
        let model: Arc<dyn GenerativeModel> = m.clone();
        Box::new(ModelAgent::new(
            model,
            PolicyKind::SampleImitation {
                temperature: config.temperature,
            },
            v.clone(),
            game,
        ))
    };
    let scheme = if iteration == 1 {
        config.first_seat_scheme
    } else {
        config.seat_scheme
    };
    generate(
        game,
        config.games_per_iteration,
        iteration,
        config.seed,
        |g, rng| match scheme {
            SeatScheme::AllGreedy => (
                std::array::from_fn(|_| greedy_agent(latest)),
                [true; NUM_PLAYERS],
                true,
            ),
            SeatScheme::OneGreedyRestSampled => {
                let greedy_seat = g % NUM_PLAYERS;
                let agents = std::array::from_fn(|p| {
                    if p == greedy_seat {
                        greedy_agent(latest)
                    } else {
                        imitation_agent(&window[rng.random_range(0..window.len())])
                    }
                });
                let mut recorded = [false; NUM_PLAYERS];
                recorded[greedy_seat] = true;
                (agents, recorded, true)
            }
        },
    )
}

/// Summary of one finished iteration.
#[derive(Clone, Debug)]
pub struct IterationReport {
    pub iteration: usize,
    pub records: usize,
    pub train_log: Option<TrainLog>,
    pub resumed: bool,
}

fn model_path(dir: &Path, iteration: usize) -> PathBuf {
    dir.join(format!("model_{iteration:03}.bin"))
}

fn dataset_path(dir: &Path, iteration: usize) -> PathBuf {
    dir.join(format!("dataset_{iteration:03}.txt"))
}

/// Runs the bootstrap and `num_iterations` self-play iterations, returning
/// every model in order. With `out_dir`, each iteration's dataset and model
/// are written there, and iterations whose model file already exists are
/// loaded instead of recomputed, so an interrupted series resumes where it
/// stopped and reproduces the same files.
pub fn run_selfplay(
    game: &GameConfig,
    config: &IterationConfig,
    out_dir: Option<&Path>,
    report: &mut dyn FnMut(&IterationReport),
) -> Result<Vec<Arc<TrainedModel>>, SelfPlayError> {
    config.validate()?;
    game.validate()?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
    }
    let mut series: Vec<Arc<TrainedModel>> = Vec::new();
    for iteration in 0..=config.num_iterations {
        if let Some(dir) = out_dir {
            let path = model_path(dir, iteration);
            if path.exists() {
                let model = TrainedModel::load_file(&path)?;
                if model.game() != game {
                    return Err(SelfPlayError::Config(format!(
                        "{} was trained for a different game",
                        path.display()
                    )));
                }
                series.push(Arc::new(model));
                report(&IterationReport {
                    iteration,
                    records: 0,
                    train_log: None,
                    resumed: true,
                });
                continue;
            }
        }
        let data = if iteration == 0 {
            generate_bootstrap(game, config.bootstrap, config.bootstrap_games, config.seed)?
        } else {
            generate_games(game, &series, config, iteration)?
        };
        let warm = series.last().map(|m| m.as_ref());
        let seed = derive_seed(config.seed, &[iteration as u64, 0x7a11]);
        let (model, train_log) = config
            .learner
            .fit(game, &data.labeled(), warm, seed)
            .map_err(|source| SelfPlayError::Training { iteration, source })?;
        if let Some(dir) = out_dir {
            data.save_file(&dataset_path(dir, iteration))?;
            model.save_file(&model_path(dir, iteration))?;
        }
        report(&IterationReport {
            iteration,
            records: data.len(),
            train_log,
            resumed: false,
        });
        series.push(Arc::new(model));
    }
    Ok(series)
}
