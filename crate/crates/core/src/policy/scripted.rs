use rand::RngCore;

use crate::game::{Action, Card, GameState, Phase, Suit};
use crate::tokenizer::ObservationHistory;

use super::agent::{Agent, PolicyError};

/// A simple rule-of-thumb player used to bootstrap self-play: passes its
/// most dangerous cards, ducks under the winning card when following, dumps
/// points when void and leads its lowest safe card.
#[derive(Clone, Copy, Debug, Default)]
pub struct ScriptedAgent;

fn danger(state: &GameState, c: Card) -> (i32, u8) {
    (state.config().card_points(c), c.rank)
}

impl Agent for ScriptedAgent {
    fn act(
        &self,
        state: &GameState,
        _history: &ObservationHistory,
        _rng: &mut dyn RngCore,
    ) -> Result<Action, PolicyError> {
        let legal = state.legal_actions()?;
        if legal.len() == 1 {
            return Ok(legal[0]);
        }
        if state.phase() == Phase::Passing {
            let spade = state.config().penalty_spade();
            return Ok(*legal
                .iter()
                .max_by_key(|&&c| {
                    (
                        c == spade,
                        c.suit == Suit::Spades && c.rank > spade.rank,
                        c.rank,
                        c.suit == Suit::Hearts,
                    )
                })
                .expect("nonempty"));
        }
        let trick = state.current_trick();
        let Some(&(_, led)) = trick.first() else {
            // Lead low, preferring suits other than hearts.
            return Ok(*legal
                .iter()
                .min_by_key(|c| (c.suit == Suit::Hearts, c.rank))
                .expect("nonempty"));
        };
        let winning = trick
            .iter()
            .filter(|(_, c)| c.suit == led.suit)
            .map(|&(_, c)| c.rank)
            .max()
            .expect("leader follows own suit");
        if legal[0].suit == led.suit {
            let under = legal
                .iter()
                .filter(|c| c.rank < winning)
                .max_by_key(|c| c.rank);
            let last = trick.len() == 3;
            let no_points = trick
                .iter()
                .all(|&(_, c)| state.config().card_points(c) == 0);
            return Ok(match under {
                Some(&c) if !(last && no_points) => c,
                _ if last && no_points => *legal.iter().max_by_key(|c| c.rank).expect("nonempty"),
                _ => *legal.iter().min_by_key(|c| c.rank).expect("nonempty"),
            });
        }
        Ok(*legal
            .iter()
            .max_by_key(|&&c| danger(state, c))
            .expect("nonempty"))
    }
}
