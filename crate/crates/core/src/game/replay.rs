use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::card::Card;
use super::config::GameConfig;
use super::state::{Action, GameError, GameState};

/// One recorded deal: `seed;config-id;action,action,...`.
///
/// A non-zero deal index (which selects the pass direction) is written as
/// `seed/index` in the first field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Replay {
    pub seed: u64,
    pub deal_index: u32,
    pub config: GameConfig,
    pub actions: Vec<Action>,
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("malformed replay line: {0}")]
    Format(String),
    #[error("action {index} of the replay: {source}")]
    Game { index: usize, source: GameError },
    #[error(transparent)]
    Deal(#[from] GameError),
}

impl Replay {
    pub fn new(config: GameConfig, seed: u64, deal_index: u32) -> Replay {
        Replay {
            seed,
            deal_index,
            config,
            actions: Vec::new(),
        }
    }

    pub fn initial_state(&self) -> Result<GameState, GameError> {
        GameState::new_deal_indexed(self.config.clone(), self.seed, self.deal_index)
    }

    /// Replays every action, returning each intermediate state (the first
    /// is the fresh deal).
    pub fn states(&self) -> Result<Vec<GameState>, ReplayError> {
        let mut state = self.initial_state()?;
        let mut out = Vec::with_capacity(self.actions.len() + 1);
        out.push(state.clone());
        for (index, &a) in self.actions.iter().enumerate() {
            state = state
                .apply_action(a)
                .map_err(|source| ReplayError::Game { index, source })?;
            out.push(state.clone());
        }
        Ok(out)
    }

    pub fn final_state(&self) -> Result<GameState, ReplayError> {
        let mut state = self.initial_state()?;
        for (index, &a) in self.actions.iter().enumerate() {
            state
                .apply_in_place(a)
                .map_err(|source| ReplayError::Game { index, source })?;
        }
        Ok(state)
    }
}

impl fmt::Display for Replay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.deal_index == 0 {
            write!(f, "{}", self.seed)?;
        } else {
            write!(f, "{}/{}", self.seed, self.deal_index)?;
        }
        write!(f, ";{};", self.config.id())?;
        for (i, a) in self.actions.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

impl FromStr for Replay {
    type Err = ReplayError;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let bad = |why: &str| ReplayError::Format(format!("{why}: {line:?}"));
        let mut fields = line.trim().splitn(3, ';');
        let seed_field = fields.next().ok_or_else(|| bad("missing seed"))?;
        let config_field = fields.next().ok_or_else(|| bad("missing config"))?;
        let actions_field = fields.next().ok_or_else(|| bad("missing actions"))?;
        let (seed, deal_index) = match seed_field.split_once('/') {
            Some((s, i)) => (s, i.parse().map_err(|_| bad("bad deal index"))?),
            None => (seed_field, 0),
        };
        let seed = seed.parse().map_err(|_| bad("bad seed"))?;
        let config = config_field
            .parse::<GameConfig>()
            .map_err(|e| ReplayError::Format(e.to_string()))?;
        let actions = if actions_field.is_empty() {
            Vec::new()
        } else {
            actions_field
                .split(',')
                .map(|t| {
                    t.parse::<Card>()
                        .map_err(|e| ReplayError::Format(e.to_string()))
                })
                .collect::<Result<_, _>>()?
        };
        Ok(Replay {
            seed,
            deal_index,
            config,
            actions,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_prints() {
        let line = "42;mini3;2C,3C,4C";
        let r: Replay = line.parse().unwrap();
        assert_eq!(r.seed, 42);
        assert_eq!(r.actions.len(), 3);
        assert_eq!(r.to_string(), line);
        let r: Replay = "7/2;hearts;".parse().unwrap();
        assert_eq!(r.deal_index, 2);
        assert!(r.actions.is_empty());
        assert_eq!(r.to_string(), "7/2;hearts;");
        assert!("x;mini3;".parse::<Replay>().is_err());
        assert!("1;mini3;ZZ".parse::<Replay>().is_err());
    }
}
