use rand::Rng;
use thiserror::Error;

use crate::game::{Card, CardSet, GameConfig, GameError, GameState, RuleViolation, NUM_PLAYERS};

use super::analysis::{analyze, Broken, Next};
use super::history::ObservationHistory;
use super::vocab::Vocabulary;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IllegalReason {
    /// Tokens continue past the end of the deal.
    Length,
    /// A token of the wrong class, or a private card that makes no sense
    /// (held twice, passed without being held).
    BadToken {
        position: usize,
    },
    Duplicate(Card),
    /// The viewer's plays do not match the viewer's cards.
    HandMismatch,
    /// The receiver of the viewer's pass never played those cards.
    PassMismatch,
    /// Cards are played out of turn order.
    TurnOrder {
        play: usize,
    },
    /// The play at this index breaks a rule given the reconstructed hands.
    Rule {
        play: usize,
        violation: RuleViolation,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Legal,
    Illegal(IllegalReason),
}

impl Verdict {
    pub fn is_legal(self) -> bool {
        self == Verdict::Legal
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum VerifyError {
    #[error("history has {len} tokens but a finished deal needs {expected}")]
    NotTerminal { len: usize, expected: usize },
}

/// Reconstructs the deal behind a finished history and checks every play
/// against the rules.
///
/// All plays are public, so each player's hand after passing is exactly the
/// set of cards they go on to play. Any pre-pass assignment works for the
/// other seats once the pass receiver is seen to hold the viewer's passed
/// cards.
pub fn verify_history(
    history: &ObservationHistory,
    config: &GameConfig,
) -> Result<Verdict, VerifyError> {
    let tokens = history.tokens();
    let vocab = Vocabulary::new(config);
    if tokens.len() > vocab.context_length() {
        return Ok(Verdict::Illegal(IllegalReason::Length));
    }
    let analysis = analyze(tokens, config);
    let expected = analysis.terminal_len(config);
    match analysis.next {
        Next::Terminal => {}
        Next::Broken(Broken::TooLong) => return Ok(Verdict::Illegal(IllegalReason::Length)),
        Next::Broken(b) => {
            if tokens.len() < expected {
                return Err(VerifyError::NotTerminal {
                    len: tokens.len(),
                    expected,
                });
            }
            if tokens.len() > expected {
                return Ok(Verdict::Illegal(IllegalReason::Length));
            }
            let position = match b {
                Broken::BadToken(i) | Broken::DuplicatePrivate(i) | Broken::NotHeld(i) => i,
                Broken::TooLong => unreachable!(),
            };
            return Ok(Verdict::Illegal(IllegalReason::BadToken { position }));
        }
        _ => {
            return Err(VerifyError::NotTerminal {
                len: tokens.len(),
                expected,
            })
        }
    }

    let mut hands = [CardSet::EMPTY; NUM_PLAYERS];
    for &(p, c) in &analysis.plays {
        if hands.iter().any(|h| h.contains(c)) {
            return Ok(Verdict::Illegal(IllegalReason::Duplicate(c)));
        }
        hands[p as usize].insert(c);
    }
    let viewer = analysis.viewer as usize;
    let mut own = analysis.dealt;
    for c in &analysis.picks {
        own.remove(*c);
    }
    for c in &analysis.incoming {
        own.insert(*c);
    }
    if own != hands[viewer] {
        return Ok(Verdict::Illegal(IllegalReason::HandMismatch));
    }
    let receiver = analysis.direction.target(viewer);
    if analysis.picks.iter().any(|&c| !hands[receiver].contains(c)) {
        return Ok(Verdict::Illegal(IllegalReason::PassMismatch));
    }

    let cardplay = GameConfig {
        passing_enabled: false,
        ..config.clone()
    };
    let mut state = match GameState::from_hands(cardplay, 0, hands) {
        Ok(s) => s,
        Err(_) => return Ok(Verdict::Illegal(IllegalReason::HandMismatch)),
    };
    for (play, &(p, c)) in analysis.plays.iter().enumerate() {
        if state.to_move() != p as usize {
            let reason = if play == 0 {
                IllegalReason::Rule {
                    play,
                    violation: RuleViolation::MustLeadLowestClub(config.lowest_club()),
                }
            } else {
                IllegalReason::TurnOrder { play }
            };
            return Ok(Verdict::Illegal(reason));
        }
        match state.apply_in_place(c) {
            Ok(()) => {}
            Err(GameError::Illegal { violation, .. }) => {
                return Ok(Verdict::Illegal(IllegalReason::Rule { play, violation }))
            }
            Err(_) => return Ok(Verdict::Illegal(IllegalReason::TurnOrder { play })),
        }
    }
    Ok(Verdict::Legal)
}

/// Builds a follow-suit violation from a legal finished history by
/// swapping two of one player's cards: a card that followed the led suit
/// moves to a later trick, and an off-suit card from that later trick takes
/// its place. Only swaps that leave every trick winner unchanged are used,
/// so the rest of the reconstruction is unaffected. Returns `None` when the
/// history offers no such swap.
pub fn follow_suit_corruption<R: Rng + ?Sized>(
    history: &ObservationHistory,
    config: &GameConfig,
    rng: &mut R,
) -> Option<ObservationHistory> {
    let analysis = analyze(history.tokens(), config);
    if !analysis.is_terminal() {
        return None;
    }
    let start = analysis.play_start?;
    let plays = &analysis.plays;
    let n = NUM_PLAYERS;
    let winners = trick_winners(plays);
    let mut candidates = Vec::new();
    for i in 0..plays.len() {
        if i % n == 0 {
            continue;
        }
        let (p, c) = plays[i];
        let led = plays[i - i % n].1.suit;
        if c.suit != led {
            continue;
        }
        for j in (i - i % n + n..plays.len()).filter(|&j| plays[j].0 == p) {
            let d = plays[j].1;
            if d.suit == led {
                continue;
            }
            let mut swapped = plays.clone();
            swapped[i].1 = d;
            swapped[j].1 = c;
            if trick_winners(&swapped) == winners {
                candidates.push((i, j));
            }
        }
    }
    if candidates.is_empty() {
        return None;
    }
    let (i, j) = candidates[rng.random_range(0..candidates.len())];
    let mut tokens = history.tokens().to_vec();
    tokens.swap(start + i, start + j);
    Some(ObservationHistory::new(history.viewer(), tokens))
}

fn trick_winners(plays: &[(u8, Card)]) -> Vec<u8> {
    plays
        .chunks(NUM_PLAYERS)
        .map(|trick| {
            let led = trick[0].1.suit;
            trick
                .iter()
                .filter(|(_, c)| c.suit == led)
                .max_by_key(|(_, c)| c.rank)
                .map(|&(p, _)| p)
                .unwrap_or(trick[0].0)
        })
        .collect()
}
