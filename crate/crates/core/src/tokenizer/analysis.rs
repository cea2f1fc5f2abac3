use arrayvec::ArrayVec;

use crate::game::{Card, CardSet, GameConfig, PassDirection, Suit, NUM_PLAYERS, PASS_COUNT};

use super::vocab::{Token, TokenKind, Vocabulary};

/// What the next token of a history must describe.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Next {
    Seat,
    Direction,
    Hand,
    /// The viewer chooses a card to pass.
    ViewerPick,
    Incoming,
    Lead,
    Play(u8),
    Terminal,
    Broken(Broken),
}

/// Why a token sequence cannot be read as a deal from the viewer's seat.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Broken {
    /// Token of the wrong class (or out of range) at this position.
    BadToken(usize),
    /// Card appears twice in the viewer's private cards.
    DuplicatePrivate(usize),
    /// The viewer passed or played a card they do not hold.
    NotHeld(usize),
    /// Tokens continue after the last play.
    TooLong,
}

/// Incremental reading of an observation history: the viewer's cards, the
/// public trick state and whose turn it is.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub viewer: u8,
    pub direction: PassDirection,
    pub dealt: CardSet,
    pub picks: ArrayVec<Card, PASS_COUNT>,
    pub incoming: ArrayVec<Card, PASS_COUNT>,
    /// Viewer's current hand.
    pub hand: CardSet,
    pub leader: Option<u8>,
    pub plays: Vec<(u8, Card)>,
    pub trick: ArrayVec<(u8, Card), NUM_PLAYERS>,
    pub trick_leader: u8,
    pub hearts_broken: bool,
    pub tricks_completed: u8,
    pub next: Next,
    /// Index of the first play token, once known.
    pub play_start: Option<usize>,
    /// Tokens consumed so far.
    pub len: usize,
}

impl Analysis {
    pub fn is_viewer_turn(&self) -> bool {
        match self.next {
            Next::ViewerPick => true,
            Next::Play(p) => p == self.viewer,
            _ => false,
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.next == Next::Terminal
    }

    pub fn is_broken(&self) -> bool {
        matches!(self.next, Next::Broken(_))
    }

    /// Length a complete history with this header would have.
    pub fn terminal_len(&self, config: &GameConfig) -> usize {
        let passing = if config.passing_enabled { 1 } else { 0 };
        let exchange = if self.direction == PassDirection::None {
            0
        } else {
            2 * PASS_COUNT
        };
        1 + passing + config.hand_size() + exchange + 1 + config.deck_size()
    }

    /// The viewer's legal moves under the rules, from the viewer's own
    /// knowledge. Empty unless it is the viewer's turn.
    pub fn viewer_legal(&self, config: &GameConfig) -> Vec<Card> {
        match self.next {
            Next::ViewerPick => self.hand.to_vec(),
            Next::Play(p) if p == self.viewer => legal_plays(
                config,
                self.hand,
                &self.trick,
                self.hearts_broken,
                self.tricks_completed == 0,
            ),
            _ => Vec::new(),
        }
    }
}

/// Cardplay legality for a hand in a given public situation.
pub fn legal_plays(
    config: &GameConfig,
    hand: CardSet,
    trick: &[(u8, Card)],
    hearts_broken: bool,
    first_trick: bool,
) -> Vec<Card> {
    match trick.first() {
        None => {
            if first_trick {
                let club = config.lowest_club();
                return if hand.contains(club) {
                    vec![club]
                } else {
                    hand.to_vec()
                };
            }
            let only_hearts = hand.of_suit(Suit::Hearts) == hand;
            hand.iter()
                .filter(|c| hearts_broken || only_hearts || c.suit != Suit::Hearts)
                .collect()
        }
        Some(&(_, led)) => {
            let follow = hand.of_suit(led.suit);
            if !follow.is_empty() {
                return follow.to_vec();
            }
            if first_trick {
                let safe: Vec<Card> = hand.iter().filter(|&c| !config.is_point_card(c)).collect();
                if !safe.is_empty() {
                    return safe;
                }
            }
            hand.to_vec()
        }
    }
}

/// Reads `tokens` as the history of the viewer whose seat token leads it.
pub fn analyze(tokens: &[Token], config: &GameConfig) -> Analysis {
    let mut a = Analysis::new();
    for &t in tokens {
        a.push(t, config);
    }
    a
}

impl Analysis {
    /// State before any token.
    pub fn new() -> Analysis {
        Analysis {
            viewer: 0,
            direction: PassDirection::None,
            dealt: CardSet::EMPTY,
            picks: ArrayVec::new(),
            incoming: ArrayVec::new(),
            hand: CardSet::EMPTY,
            leader: None,
            plays: Vec::new(),
            trick: ArrayVec::new(),
            trick_leader: 0,
            hearts_broken: false,
            tricks_completed: 0,
            next: Next::Seat,
            play_start: None,
            len: 0,
        }
    }

    /// Consumes one more token. Once broken, further tokens are ignored.
    pub fn push(&mut self, t: Token, config: &GameConfig) {
        let i = self.len;
        self.len += 1;
        let kind = Vocabulary::new(config).kind(t);
        match self.next {
            Next::Seat => match kind {
                TokenKind::Position(p) => {
                    self.viewer = p;
                    self.next = if config.passing_enabled {
                        Next::Direction
                    } else {
                        Next::Hand
                    };
                }
                _ => self.next = Next::Broken(Broken::BadToken(i)),
            },
            Next::Direction => match kind {
                TokenKind::Direction(d) => {
                    self.direction = d;
                    self.next = Next::Hand;
                }
                _ => self.next = Next::Broken(Broken::BadToken(i)),
            },
            Next::Hand => match kind {
                TokenKind::Card(c) => {
                    if !self.dealt.insert(c) {
                        self.next = Next::Broken(Broken::DuplicatePrivate(i));
                        return;
                    }
                    if self.dealt.len() == config.hand_size() {
                        self.hand = self.dealt;
                        self.next = if self.direction == PassDirection::None {
                            Next::Lead
                        } else {
                            Next::ViewerPick
                        };
                    }
                }
                _ => self.next = Next::Broken(Broken::BadToken(i)),
            },
            Next::ViewerPick => match kind {
                TokenKind::Card(c) => {
                    if !self.hand.remove(c) {
                        self.next = Next::Broken(Broken::NotHeld(i));
                        return;
                    }
                    self.picks.push(c);
                    if self.picks.is_full() {
                        self.next = Next::Incoming;
                    }
                }
                _ => self.next = Next::Broken(Broken::BadToken(i)),
            },
            Next::Incoming => match kind {
                TokenKind::Card(c) => {
                    if self.hand.contains(c)
                        || self.picks.contains(&c)
                        || self.incoming.contains(&c)
                    {
                        self.next = Next::Broken(Broken::DuplicatePrivate(i));
                        return;
                    }
                    self.incoming.push(c);
                    self.hand.insert(c);
                    if self.incoming.is_full() {
                        self.next = Next::Lead;
                    }
                }
                _ => self.next = Next::Broken(Broken::BadToken(i)),
            },
            Next::Lead => match kind {
                TokenKind::Position(p) => {
                    self.leader = Some(p);
                    self.trick_leader = p;
                    self.play_start = Some(i + 1);
                    self.next = Next::Play(p);
                }
                _ => self.next = Next::Broken(Broken::BadToken(i)),
            },
            Next::Play(p) => match kind {
                TokenKind::Card(c) => {
                    if p == self.viewer && !self.hand.remove(c) {
                        self.next = Next::Broken(Broken::NotHeld(i));
                        return;
                    }
                    self.play(p, c, config);
                }
                _ => self.next = Next::Broken(Broken::BadToken(i)),
            },
            Next::Terminal => self.next = Next::Broken(Broken::TooLong),
            Next::Broken(_) => {}
        }
    }
}

impl Default for Analysis {
    fn default() -> Analysis {
        Analysis::new()
    }
}

impl Analysis {
    fn play(&mut self, player: u8, card: Card, config: &GameConfig) {
        self.plays.push((player, card));
        self.trick.push((player, card));
        if card.suit == Suit::Hearts {
            self.hearts_broken = true;
        }
        if !self.trick.is_full() {
            self.next = Next::Play((player + 1) % NUM_PLAYERS as u8);
            return;
        }
        let led = self.trick[0].1.suit;
        let winner = self
            .trick
            .iter()
            .filter(|(_, c)| c.suit == led)
            .max_by_key(|(_, c)| c.rank)
            .map(|&(p, _)| p)
            .unwrap_or(self.trick[0].0);
        self.trick.clear();
        self.tricks_completed += 1;
        self.trick_leader = winner;
        self.next = if self.plays.len() >= config.deck_size() {
            Next::Terminal
        } else {
            Next::Play(winner)
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::GameState;
    use crate::tokenizer::build_history;

    #[test]
    fn tracks_turns_like_the_engine() {
        for (config, seed) in [(GameConfig::hearts(), 3), (GameConfig::mini(3), 8)] {
            let deal = GameState::new_deal(config.clone(), seed).unwrap();
            let mut s = deal.clone();
            let mut actions = Vec::new();
            while !s.is_terminal() {
                let legal = s.legal_actions().unwrap();
                let a = legal[actions.len() % legal.len()];
                for viewer in 0..4 {
                    let h = build_history(&deal, &actions, viewer).unwrap();
                    let an = analyze(h.tokens(), &config);
                    let viewer_moves = s.to_move() == viewer;
                    // Other seats' picks are hidden, so during passing only
                    // the viewer's own turn is identifiable.
                    if s.phase() == crate::game::Phase::Passing {
                        if viewer_moves {
                            assert!(an.is_viewer_turn());
                        }
                    } else {
                        assert_eq!(an.is_viewer_turn(), viewer_moves);
                    }
                    if viewer_moves {
                        assert_eq!(an.viewer_legal(&config), legal);
                    }
                }
                actions.push(a);
                s = s.apply_action(a).unwrap();
            }
            let h = build_history(&deal, &actions, 1).unwrap();
            assert!(analyze(h.tokens(), &config).is_terminal());
        }
    }

    #[test]
    fn garbage_is_broken_not_a_panic() {
        let config = GameConfig::mini(3);
        let vocab = Vocabulary::new(&config);
        let an = analyze(&[vocab.card(Card::new(Suit::Clubs, 0))], &config);
        assert_eq!(an.next, Next::Broken(Broken::BadToken(0)));
        let an = analyze(&[vocab.position(1), 200, 3], &config);
        assert_eq!(an.next, Next::Broken(Broken::BadToken(1)));
    }
}
