use thiserror::Error;

use crate::game::{Action, Card, CardSet, GameError, GameState, PassDirection, Phase, NUM_PLAYERS};

use super::vocab::{Token, Vocabulary};

/// One player's view of a deal as a token sequence.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObservationHistory {
    tokens: Vec<Token>,
    viewer: u8,
}

impl ObservationHistory {
    pub fn new(viewer: usize, tokens: Vec<Token>) -> ObservationHistory {
        ObservationHistory {
            tokens,
            viewer: viewer as u8,
        }
    }

    pub fn viewer(&self) -> usize {
        self.viewer as usize
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn push(&mut self, token: Token) {
        self.tokens.push(token);
    }

    pub fn pop(&mut self) -> Option<Token> {
        self.tokens.pop()
    }

    pub fn truncate(&mut self, len: usize) {
        self.tokens.truncate(len);
    }

    /// Copy with one more token appended.
    pub fn with(&self, token: Token) -> ObservationHistory {
        let mut tokens = Vec::with_capacity(self.tokens.len() + 1);
        tokens.extend_from_slice(&self.tokens);
        tokens.push(token);
        ObservationHistory {
            tokens,
            viewer: self.viewer,
        }
    }

    pub fn into_tokens(self) -> Vec<Token> {
        self.tokens
    }
}

/// Something that happens during a deal, possibly visible to a viewer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Event {
    Seat { player: u8 },
    PassDirection(PassDirection),
    Deal { player: u8, cards: CardSet },
    PassPick { player: u8, card: Card },
    PassReceive { player: u8, cards: CardSet },
    Lead { leader: u8 },
    Play { player: u8, card: Card },
}

#[derive(Debug, Error)]
pub enum HistoryError {
    #[error("action {index}: {source}")]
    IllegalAction { index: usize, source: GameError },
    #[error("build_history needs a freshly dealt state")]
    NotFreshDeal,
}

/// Tokens `viewer` receives for `event`.
///
/// `state_before` supplies the deck size; the event carries everything
/// else, so hidden events (another player's hand or pass picks) yield no
/// tokens.
pub fn observe(state_before: &GameState, event: &Event, viewer: usize) -> Vec<Token> {
    let vocab = Vocabulary::new(state_before.config());
    let viewer = viewer as u8;
    match *event {
        Event::Seat { player } if player == viewer => vec![vocab.position(player as usize)],
        Event::PassDirection(dir) => vec![vocab.direction(dir)],
        Event::Deal { player, cards } if player == viewer => {
            cards.iter().map(|c| vocab.card(c)).collect()
        }
        Event::PassPick { player, card } if player == viewer => vec![vocab.card(card)],
        Event::PassReceive { player, cards } if player == viewer => {
            cards.iter().map(|c| vocab.card(c)).collect()
        }
        Event::Lead { leader } => vec![vocab.position(leader as usize)],
        Event::Play { card, .. } => vec![vocab.card(card)],
        _ => Vec::new(),
    }
}

/// Events of a fresh deal, in emission order.
pub fn deal_events(deal: &GameState) -> Vec<Event> {
    let mut events: Vec<Event> = (0..NUM_PLAYERS as u8)
        .map(|player| Event::Seat { player })
        .collect();
    if deal.config().passing_enabled {
        events.push(Event::PassDirection(deal.pass_direction()));
    }
    for player in 0..NUM_PLAYERS {
        events.push(Event::Deal {
            player: player as u8,
            cards: deal.hand(player),
        });
    }
    if deal.phase() == Phase::Cardplay && deal.plays().is_empty() {
        events.push(Event::Lead {
            leader: deal.trick_leader() as u8,
        });
    }
    events
}

/// Events produced by applying `action` to `before`, yielding `after`.
pub fn action_events(before: &GameState, action: Action, after: &GameState) -> Vec<Event> {
    let player = before.to_move() as u8;
    match before.phase() {
        Phase::Passing => {
            let mut events = vec![Event::PassPick {
                player,
                card: action,
            }];
            if after.phase() != Phase::Passing {
                let dir = after.pass_direction();
                for p in 0..NUM_PLAYERS {
                    let cards = after.passed_cards(dir.source(p)).iter().copied().collect();
                    events.push(Event::PassReceive {
                        player: p as u8,
                        cards,
                    });
                }
                events.push(Event::Lead {
                    leader: after.trick_leader() as u8,
                });
            }
            events
        }
        _ => vec![Event::Play {
            player,
            card: action,
        }],
    }
}

/// Tokens of the fresh deal as seen by `viewer`.
pub fn deal_history(deal: &GameState, viewer: usize) -> ObservationHistory {
    let mut h = ObservationHistory::new(viewer, Vec::new());
    for e in deal_events(deal) {
        h.tokens.extend(observe(deal, &e, viewer));
    }
    h
}

/// Replays `actions` from a fresh deal and collects `viewer`'s tokens.
pub fn build_history(
    deal: &GameState,
    actions: &[Action],
    viewer: usize,
) -> Result<ObservationHistory, HistoryError> {
    let fresh =
        deal.plays().is_empty() && (0..NUM_PLAYERS).all(|p| deal.passed_cards(p).is_empty());
    if !fresh {
        return Err(HistoryError::NotFreshDeal);
    }
    let mut h = deal_history(deal, viewer);
    let mut state = deal.clone();
    for (index, &a) in actions.iter().enumerate() {
        let next = state
            .apply_action(a)
            .map_err(|source| HistoryError::IllegalAction { index, source })?;
        for e in action_events(&state, a, &next) {
            h.tokens.extend(observe(&state, &e, viewer));
        }
        state = next;
    }
    Ok(h)
}

/// Keeps every seat's history up to date while a deal is played.
#[derive(Clone, Debug)]
pub struct HistoryRecorder {
    histories: Vec<ObservationHistory>,
}

impl HistoryRecorder {
    pub fn new(deal: &GameState) -> HistoryRecorder {
        HistoryRecorder {
            histories: (0..NUM_PLAYERS).map(|p| deal_history(deal, p)).collect(),
        }
    }

    pub fn record(&mut self, before: &GameState, action: Action, after: &GameState) {
        for e in action_events(before, action, after) {
            for (p, h) in self.histories.iter_mut().enumerate() {
                h.tokens.extend(observe(before, &e, p));
            }
        }
    }

    pub fn history(&self, player: usize) -> &ObservationHistory {
        &self.histories[player]
    }

    pub fn into_histories(self) -> Vec<ObservationHistory> {
        self.histories
    }
}
