use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::game::{Card, GameConfig, PassDirection, NUM_PLAYERS, PASS_COUNT};

pub type Token = u16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TokenKind {
    Card(Card),
    Position(u8),
    Direction(PassDirection),
    EndOfSequence,
    Invalid,
}

/// Token ids for one deck size: cards first, then the four seat positions,
/// the four pass directions, and a reserved end-of-sequence id.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    ranks_per_suit: u8,
    passing: bool,
}

impl Vocabulary {
    pub fn new(config: &GameConfig) -> Vocabulary {
        Vocabulary {
            ranks_per_suit: config.ranks_per_suit,
            passing: config.passing_enabled,
        }
    }

    pub fn deck_size(&self) -> usize {
        4 * self.ranks_per_suit as usize
    }

    /// Observation tokens, excluding the end-of-sequence id.
    pub fn observation_tokens(&self) -> usize {
        self.deck_size() + 2 * NUM_PLAYERS
    }

    /// Full id space including end-of-sequence.
    pub fn size(&self) -> usize {
        self.observation_tokens() + 1
    }

    pub fn card(&self, card: Card) -> Token {
        card.index(self.ranks_per_suit) as Token
    }

    pub fn position(&self, seat: usize) -> Token {
        (self.deck_size() + seat) as Token
    }

    pub fn direction(&self, dir: PassDirection) -> Token {
        (self.deck_size() + NUM_PLAYERS + dir.index()) as Token
    }

    pub fn end_of_sequence(&self) -> Token {
        self.observation_tokens() as Token
    }

    pub fn kind(&self, token: Token) -> TokenKind {
        let t = token as usize;
        let deck = self.deck_size();
        if t < deck {
            TokenKind::Card(Card::from_index(t, self.ranks_per_suit).expect("index < deck"))
        } else if t < deck + NUM_PLAYERS {
            TokenKind::Position((t - deck) as u8)
        } else if t < deck + 2 * NUM_PLAYERS {
            TokenKind::Direction(PassDirection::ALL[t - deck - NUM_PLAYERS])
        } else if t == deck + 2 * NUM_PLAYERS {
            TokenKind::EndOfSequence
        } else {
            TokenKind::Invalid
        }
    }

    pub fn as_card(&self, token: Token) -> Option<Card> {
        match self.kind(token) {
            TokenKind::Card(c) => Some(c),
            _ => None,
        }
    }

    /// Longest possible history for this game (74 for Hearts).
    pub fn max_history_len(&self) -> usize {
        let hand = self.deck_size() / NUM_PLAYERS;
        let passing = if self.passing { 1 + 2 * PASS_COUNT } else { 0 };
        1 + passing + hand + 1 + self.deck_size()
    }

    /// Model context length: the longest history plus end-of-sequence.
    pub fn context_length(&self) -> usize {
        self.max_history_len() + 1
    }

    pub fn name(&self, token: Token) -> String {
        match self.kind(token) {
            TokenKind::Card(c) => c.to_string(),
            TokenKind::Position(p) => format!("P{p}"),
            TokenKind::Direction(d) => format!("{d:?}"),
            TokenKind::EndOfSequence => "EOS".to_string(),
            TokenKind::Invalid => format!("?{token}"),
        }
    }

    /// Text manifest, one `id<TAB>tag<TAB>name` line per token.
    pub fn manifest(&self) -> String {
        let mut out = format!("# gomcts-tokens v1 ranks={}\n", self.ranks_per_suit);
        for id in 0..self.size() as Token {
            let tag = match self.kind(id) {
                TokenKind::Card(_) => "card",
                TokenKind::Position(_) => "position",
                TokenKind::Direction(_) => "direction",
                TokenKind::EndOfSequence => "eos",
                TokenKind::Invalid => unreachable!(),
            };
            writeln!(out, "{id}\t{tag}\t{}", self.name(id)).unwrap();
        }
        out
    }

    pub fn manifest_hash(&self) -> [u8; 32] {
        Sha256::digest(self.manifest().as_bytes()).into()
    }
}
