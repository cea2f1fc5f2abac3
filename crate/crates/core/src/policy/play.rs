use std::time::{Duration, Instant};

use rand_chacha::ChaCha8Rng;

use crate::game::{GameState, Outcome, NUM_PLAYERS};
use crate::tokenizer::{HistoryRecorder, ObservationHistory};

use super::{Agent, PolicyError};

/// A finished deal: the final state, every seat's history, and time spent
/// per seat on decisions with more than one legal action.
#[derive(Clone, Debug)]
pub struct PlayedDeal {
    pub final_state: GameState,
    pub histories: Vec<ObservationHistory>,
    pub outcome: Outcome,
    pub think_time: [Duration; NUM_PLAYERS],
    pub decisions: [u32; NUM_PLAYERS],
}

/// Plays `deal` to the end with one agent per seat, each drawing from its
/// own rng. Actions are checked against the rules before they are applied.
pub fn play_deal(
    deal: &GameState,
    agents: [&dyn Agent; NUM_PLAYERS],
    rngs: &mut [ChaCha8Rng; NUM_PLAYERS],
) -> Result<PlayedDeal, PolicyError> {
    let mut state = deal.clone();
    let mut rec = HistoryRecorder::new(deal);
    let mut think_time = [Duration::ZERO; NUM_PLAYERS];
    let mut decisions = [0; NUM_PLAYERS];
    while !state.is_terminal() {
        let p = state.to_move();
        let legal = state.legal_actions()?;
        let a = if legal.len() == 1 {
            legal[0]
        } else {
            let start = Instant::now();
            let a = agents[p].act(&state, rec.history(p), &mut rngs[p])?;
            think_time[p] += start.elapsed();
            decisions[p] += 1;
            a
        };
        if !legal.contains(&a) {
            state.check_action(a)?;
            return Err(PolicyError::Invalid(format!(
                "seat {p} chose {a} outside the legal set"
            )));
        }
        let next = state.apply_action(a)?;
        rec.record(&state, a, &next);
        state = next;
    }
    let outcome = state.outcome()?;
    Ok(PlayedDeal {
        final_state: state,
        histories: rec.into_histories(),
        outcome,
        think_time,
        decisions,
    })
}
