//! Independent best-response oracle over the viewer's observation MDP.
#![allow(dead_code)]

use std::collections::BTreeMap;

use gomcts::game::{Action, Card, CardSet, GameConfig, GameState, NUM_PLAYERS};
use gomcts::model::OutcomeValueFn;

/// Every split of the unseen cards, replayed through the public plays with
/// uniform-random opponents; weights are the probabilities of the observed
/// opponent plays.
pub fn consistent_worlds(
    config: &GameConfig,
    deal: &GameState,
    plays: &[Action],
    viewer: usize,
) -> Vec<(GameState, f64)> {
    let unseen: Vec<Card> = CardSet::full_deck(config.ranks_per_suit)
        .difference(deal.hand(viewer))
        .to_vec();
    let k = config.hand_size();
    let others: Vec<usize> = (0..NUM_PLAYERS).filter(|&p| p != viewer).collect();
    let mut movers = Vec::new();
    let mut truth = deal.clone();
    for &a in plays {
        movers.push(truth.to_move());
        truth.apply_in_place(a).unwrap();
    }
    let mut worlds = Vec::new();
    let n = unseen.len();
    // Assign each unseen card an owner index 0..3 with k cards each.
    let mut owner = vec![0usize; n];
    fn go(
        i: usize,
        owner: &mut Vec<usize>,
        counts: &mut [usize; 3],
        k: usize,
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if i == owner.len() {
            visit(owner);
            return;
        }
        for o in 0..3 {
            if counts[o] < k {
                counts[o] += 1;
                owner[i] = o;
                go(i + 1, owner, counts, k, visit);
                counts[o] -= 1;
            }
        }
    }
    let mut visit = |owner: &[usize]| {
        let mut hands = [CardSet::EMPTY; NUM_PLAYERS];
        hands[viewer] = deal.hand(viewer);
        for (c, &o) in unseen.iter().zip(owner) {
            hands[others[o]].insert(*c);
        }
        let mut s = GameState::from_hands(config.clone(), 0, hands).unwrap();
        let mut w = 1.0;
        for (&a, &mover) in plays.iter().zip(&movers) {
            let legal = s.legal_actions().unwrap();
            if s.to_move() != mover || !legal.contains(&a) {
                return;
            }
            if s.to_move() != viewer {
                w /= legal.len() as f64;
            }
            s.apply_in_place(a).unwrap();
        }
        worlds.push((s, w));
    };
    go(0, &mut owner, &mut [0; 3], k, &mut visit);
    worlds
}

/// Weighted value sum of the best response from these worlds, where the
/// viewer chooses using only what it observes.
pub fn best_response(worlds: &[(GameState, f64)], viewer: usize, v: &OutcomeValueFn) -> f64 {
    let Some((s0, _)) = worlds.first() else {
        return 0.0;
    };
    if s0.is_terminal() {
        return worlds
            .iter()
            .map(|(s, w)| w * v.value(&s.outcome().unwrap().card_points, viewer))
            .sum();
    }
    if s0.to_move() == viewer {
        s0.legal_actions()
            .unwrap()
            .into_iter()
            .map(|a| best_response(&advance(worlds, a), viewer, v))
            .fold(f64::NEG_INFINITY, f64::max)
    } else {
        let mut groups: BTreeMap<Card, Vec<(GameState, f64)>> = BTreeMap::new();
        for (s, w) in worlds {
            let legal = s.legal_actions().unwrap();
            let q = w / legal.len() as f64;
            for a in legal {
                groups
                    .entry(a)
                    .or_default()
                    .push((s.apply_action(a).unwrap(), q));
            }
        }
        groups.values().map(|g| best_response(g, viewer, v)).sum()
    }
}

fn advance(worlds: &[(GameState, f64)], a: Action) -> Vec<(GameState, f64)> {
    worlds
        .iter()
        .map(|(s, w)| (s.apply_action(a).unwrap(), *w))
        .collect()
}

/// Best-response value of each of the viewer's actions at a decision point.
pub fn action_values(
    worlds: &[(GameState, f64)],
    viewer: usize,
    v: &OutcomeValueFn,
) -> Vec<(Action, f64)> {
    let total: f64 = worlds.iter().map(|(_, w)| w).sum();
    worlds[0]
        .0
        .legal_actions()
        .unwrap()
        .into_iter()
        .map(|a| (a, best_response(&advance(worlds, a), viewer, v) / total))
        .collect()
}
