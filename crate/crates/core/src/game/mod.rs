//! Rules engine for Hearts and its small MiniHearts variant.

mod card;
mod config;
mod replay;
mod state;

pub use card::{Card, CardSet, ParseCardError, Suit};
pub use config::{ConfigError, ConfigId, GameConfig, PassDirection, NUM_PLAYERS, PASS_COUNT};
pub use replay::{Replay, ReplayError};
pub use state::{outcome_from_taken, Action, GameError, GameState, Outcome, Phase, RuleViolation};
