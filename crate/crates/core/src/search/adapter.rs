use crate::game::{outcome_from_taken, GameConfig, NUM_PLAYERS};
use crate::model::OutcomeValueFn;
use crate::tokenizer::{analyze, verify_history, Analysis, ObservationHistory, Token, Vocabulary};

/// Whose turn it is after a history, from the search player's side.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Turn {
    /// The search player chooses among these action tokens.
    Player(Vec<Token>),
    /// Someone else acts or chance reveals something; the model decides.
    Other,
    Terminal,
    /// The tokens no longer describe a possible deal.
    Broken,
}

/// What the search needs from the rules: turn order, the search player's
/// legal moves, terminal values and the final legality check. A cursor
/// follows a history token by token.
pub trait GameAdapter: Send + Sync {
    type Cursor: Clone;

    fn start(&self, h: &ObservationHistory) -> Self::Cursor;

    fn push(&self, cursor: &mut Self::Cursor, token: Token);

    fn turn(&self, cursor: &Self::Cursor) -> Turn;

    /// Value of a finished history for `player`.
    fn terminal_value(&self, cursor: &Self::Cursor, v: &OutcomeValueFn, player: usize) -> f64;

    /// Whether a finished history could have happened under the rules.
    fn is_legal(&self, h: &ObservationHistory) -> bool;
}

/// Rules adapter for Hearts and MiniHearts histories.
#[derive(Clone, Debug)]
pub struct HeartsAdapter {
    config: GameConfig,
    vocab: Vocabulary,
}

impl HeartsAdapter {
    pub fn new(config: &GameConfig) -> HeartsAdapter {
        HeartsAdapter {
            config: config.clone(),
            vocab: Vocabulary::new(config),
        }
    }

    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }
}

impl GameAdapter for HeartsAdapter {
    type Cursor = Analysis;

    fn start(&self, h: &ObservationHistory) -> Analysis {
        analyze(h.tokens(), &self.config)
    }

    fn push(&self, cursor: &mut Analysis, token: Token) {
        if token as usize >= self.vocab.size() {
            cursor.next =
                crate::tokenizer::Next::Broken(crate::tokenizer::Broken::BadToken(cursor.len));
            return;
        }
        cursor.push(token, &self.config);
    }

    fn turn(&self, cursor: &Analysis) -> Turn {
        if cursor.is_broken() {
            Turn::Broken
        } else if cursor.is_terminal() {
            Turn::Terminal
        } else if cursor.is_viewer_turn() {
            let legal = cursor.viewer_legal(&self.config);
            Turn::Player(legal.into_iter().map(|c| self.vocab.card(c)).collect())
        } else {
            Turn::Other
        }
    }

    fn terminal_value(&self, cursor: &Analysis, v: &OutcomeValueFn, player: usize) -> f64 {
        let mut taken = [0; NUM_PLAYERS];
        for trick in cursor.plays.chunks(NUM_PLAYERS) {
            let led = trick[0].1.suit;
            let winner = trick
                .iter()
                .filter(|(_, c)| c.suit == led)
                .max_by_key(|(_, c)| c.rank)
                .map_or(trick[0].0, |&(p, _)| p);
            let points: i32 = trick.iter().map(|&(_, c)| self.config.card_points(c)).sum();
            taken[winner as usize] += points;
        }
        let outcome = outcome_from_taken(&self.config, taken);
        v.value(&outcome.card_points, player)
    }

    fn is_legal(&self, h: &ObservationHistory) -> bool {
        matches!(verify_history(h, &self.config), Ok(v) if v.is_legal())
    }
}
