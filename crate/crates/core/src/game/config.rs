use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::card::{Card, Suit};

pub const NUM_PLAYERS: usize = 4;
/// Cards each player passes when a passing round applies.
pub const PASS_COUNT: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PassDirection {
    Left,
    Right,
    Across,
    None,
}

impl PassDirection {
    pub const ALL: [PassDirection; 4] = [
        PassDirection::Left,
        PassDirection::Right,
        PassDirection::Across,
        PassDirection::None,
    ];

    pub fn index(self) -> usize {
        match self {
            PassDirection::Left => 0,
            PassDirection::Right => 1,
            PassDirection::Across => 2,
            PassDirection::None => 3,
        }
    }

    /// Seat that receives the cards passed by `from`. Seats are numbered
    /// clockwise, so the player on the left is the next seat.
    pub fn target(self, from: usize) -> usize {
        match self {
            PassDirection::Left => (from + 1) % NUM_PLAYERS,
            PassDirection::Right => (from + 3) % NUM_PLAYERS,
            PassDirection::Across => (from + 2) % NUM_PLAYERS,
            PassDirection::None => from,
        }
    }

    /// Seat whose cards `to` receives.
    pub fn source(self, to: usize) -> usize {
        match self {
            PassDirection::Left => (to + 3) % NUM_PLAYERS,
            PassDirection::Right => (to + 1) % NUM_PLAYERS,
            PassDirection::Across => (to + 2) % NUM_PLAYERS,
            PassDirection::None => to,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("only 4-player games are supported, got {0}")]
    Players(usize),
    #[error("ranks per suit must be in 1..=13, got {0}")]
    Ranks(u8),
    #[error("passing needs at least {PASS_COUNT} cards per hand")]
    PassingHandTooSmall,
    #[error("pass direction cycle is empty")]
    EmptyCycle,
    #[error("penalty spade rank {0} is outside the deck")]
    PenaltyRank(u8),
    #[error("unknown config id {0:?}")]
    UnknownId(String),
}

/// Rule parameters for a Hearts-family game.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GameConfig {
    pub num_players: usize,
    pub ranks_per_suit: u8,
    pub passing_enabled: bool,
    pub pass_direction_cycle: Vec<PassDirection>,
    pub moon_rule_enabled: bool,
    /// Rank of the spade that carries a penalty (the queen in Hearts).
    pub penalty_spade_rank: u8,
    pub penalty_spade_points: i32,
}

impl GameConfig {
    /// Standard 52-card Hearts with passing (right, left, across, none).
    pub fn hearts() -> GameConfig {
        GameConfig {
            num_players: NUM_PLAYERS,
            ranks_per_suit: 13,
            passing_enabled: true,
            pass_direction_cycle: vec![
                PassDirection::Right,
                PassDirection::Left,
                PassDirection::Across,
                PassDirection::None,
            ],
            moon_rule_enabled: true,
            penalty_spade_rank: 10,
            penalty_spade_points: 13,
        }
    }

    pub fn hearts_no_pass() -> GameConfig {
        GameConfig {
            passing_enabled: false,
            ..GameConfig::hearts()
        }
    }

    /// Small variant: `ranks` cards per suit, no passing, hearts worth one
    /// point each and the top spade worth `ranks` points.
    pub fn mini(ranks: u8) -> GameConfig {
        GameConfig {
            num_players: NUM_PLAYERS,
            ranks_per_suit: ranks,
            passing_enabled: false,
            pass_direction_cycle: vec![PassDirection::None],
            moon_rule_enabled: true,
            penalty_spade_rank: ranks.saturating_sub(1),
            penalty_spade_points: ranks as i32,
        }
    }

    pub fn mini_with_passing(ranks: u8) -> GameConfig {
        GameConfig {
            passing_enabled: true,
            pass_direction_cycle: GameConfig::hearts().pass_direction_cycle,
            ..GameConfig::mini(ranks)
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.num_players != NUM_PLAYERS {
            return Err(ConfigError::Players(self.num_players));
        }
        if self.ranks_per_suit == 0 || self.ranks_per_suit > 13 {
            return Err(ConfigError::Ranks(self.ranks_per_suit));
        }
        if self.passing_enabled {
            if self.pass_direction_cycle.is_empty() {
                return Err(ConfigError::EmptyCycle);
            }
            if self.hand_size() < PASS_COUNT {
                return Err(ConfigError::PassingHandTooSmall);
            }
        }
        if self.penalty_spade_rank >= self.ranks_per_suit {
            return Err(ConfigError::PenaltyRank(self.penalty_spade_rank));
        }
        Ok(())
    }

    pub fn deck_size(&self) -> usize {
        4 * self.ranks_per_suit as usize
    }

    pub fn hand_size(&self) -> usize {
        self.deck_size() / self.num_players
    }

    pub fn lowest_club(&self) -> Card {
        Card::new(Suit::Clubs, 0)
    }

    pub fn penalty_spade(&self) -> Card {
        Card::new(Suit::Spades, self.penalty_spade_rank)
    }

    pub fn card_points(&self, card: Card) -> i32 {
        if card.suit == Suit::Hearts {
            1
        } else if card == self.penalty_spade() {
            self.penalty_spade_points
        } else {
            0
        }
    }

    pub fn is_point_card(&self, card: Card) -> bool {
        self.card_points(card) != 0
    }

    /// Points available in one deal (26 in Hearts).
    pub fn total_points(&self) -> i32 {
        self.ranks_per_suit as i32 + self.penalty_spade_points
    }

    pub fn pass_direction(&self, deal_index: u32) -> PassDirection {
        if !self.passing_enabled {
            return PassDirection::None;
        }
        let cycle = &self.pass_direction_cycle;
        cycle[deal_index as usize % cycle.len()]
    }

    /// Short identifier used in replay lines and file headers.
    pub fn id(&self) -> ConfigId {
        ConfigId(self.clone())
    }
}

/// Named configurations: `hearts`, `hearts-nopass`, `mini<R>` and
/// `mini<R>-pass`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigId(pub GameConfig);

impl fmt::Display for ConfigId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.0;
        if *c == GameConfig::hearts() {
            write!(f, "hearts")
        } else if *c == GameConfig::hearts_no_pass() {
            write!(f, "hearts-nopass")
        } else if *c == GameConfig::mini(c.ranks_per_suit) {
            write!(f, "mini{}", c.ranks_per_suit)
        } else if *c == GameConfig::mini_with_passing(c.ranks_per_suit) {
            write!(f, "mini{}-pass", c.ranks_per_suit)
        } else {
            write!(
                f,
                "custom-r{}-p{}-m{}-s{}x{}",
                c.ranks_per_suit,
                c.passing_enabled as u8,
                c.moon_rule_enabled as u8,
                c.penalty_spade_rank,
                c.penalty_spade_points
            )
        }
    }
}

impl FromStr for GameConfig {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || ConfigError::UnknownId(s.to_string());
        let config = match s {
            "hearts" => GameConfig::hearts(),
            "hearts-nopass" => GameConfig::hearts_no_pass(),
            _ => {
                let rest = s.strip_prefix("mini").ok_or_else(unknown)?;
                let (ranks, passing) = match rest.strip_suffix("-pass") {
                    Some(r) => (r, true),
                    None => (rest, false),
                };
                let ranks: u8 = ranks.parse().map_err(|_| unknown())?;
                if passing {
                    GameConfig::mini_with_passing(ranks)
                } else {
                    GameConfig::mini(ranks)
                }
            }
        };
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hearts_totals() {
        let c = GameConfig::hearts();
        assert_eq!(c.total_points(), 26);
        assert_eq!(c.card_points("QS".parse().unwrap()), 13);
        assert_eq!(c.card_points("5H".parse().unwrap()), 1);
        assert_eq!(c.card_points("KS".parse().unwrap()), 0);
        assert_eq!(c.pass_direction(0), PassDirection::Right);
        assert_eq!(c.pass_direction(3), PassDirection::None);
        assert_eq!(c.pass_direction(5), PassDirection::Left);
    }

    #[test]
    fn mini_defaults() {
        let c = GameConfig::mini(3);
        c.validate().unwrap();
        assert_eq!(c.total_points(), 6);
        assert_eq!(c.penalty_spade().to_string(), "4S");
        assert_eq!(c.hand_size(), 3);
        assert!(!c.passing_enabled);
    }

    #[test]
    fn ids_round_trip() {
        for c in [
            GameConfig::hearts(),
            GameConfig::hearts_no_pass(),
            GameConfig::mini(3),
            GameConfig::mini(2),
            GameConfig::mini_with_passing(4),
        ] {
            let id = c.id().to_string();
            assert_eq!(id.parse::<GameConfig>().unwrap(), c, "{id}");
        }
        assert!("mini2-pass".parse::<GameConfig>().is_err());
        assert!("poker".parse::<GameConfig>().is_err());
    }

    #[test]
    fn pass_targets_invert() {
        for d in PassDirection::ALL {
            for p in 0..4 {
                assert_eq!(d.source(d.target(p)), p);
            }
        }
    }
}
