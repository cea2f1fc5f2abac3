use arrayvec::ArrayVec;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore};

use crate::game::{
    Action, Card, CardSet, GameConfig, GameState, PassDirection, Phase, Suit, NUM_PLAYERS,
    PASS_COUNT,
};
use crate::model::OutcomeValueFn;

use super::SearchError;

/// Attempts before `sample_world` gives up.
const MAX_ATTEMPTS: usize = 200_000;

/// Everything one player knows about a deal in progress.
#[derive(Clone, Debug)]
pub struct PlayerView {
    masked: GameState,
    viewer: usize,
    buffer_lens: [usize; NUM_PLAYERS],
}

impl PlayerView {
    pub fn new(state: &GameState, viewer: usize) -> PlayerView {
        PlayerView {
            masked: state.masked(viewer),
            viewer,
            buffer_lens: std::array::from_fn(|p| state.pass_buffer(p).len()),
        }
    }

    pub fn viewer(&self) -> usize {
        self.viewer
    }

    /// The state with hidden cards removed.
    pub fn public_state(&self) -> &GameState {
        &self.masked
    }

    pub fn legal_actions(&self) -> Result<Vec<Action>, SearchError> {
        if self.masked.to_move() != self.viewer {
            return Err(SearchError::NotPlayerTurn);
        }
        Ok(self.masked.legal_actions()?)
    }
}

/// Suits each player is known to lack, from failures to follow suit.
fn voids(plays: &[(u8, Card)]) -> [u8; NUM_PLAYERS] {
    let mut out = [0u8; NUM_PLAYERS];
    for trick in plays.chunks(NUM_PLAYERS) {
        let led = trick[0].1.suit;
        for &(p, c) in &trick[1..] {
            if c.suit != led {
                out[p as usize] |= 1 << led.index();
            }
        }
    }
    out
}

fn respects_voids(hand: CardSet, void: u8) -> bool {
    Suit::ALL
        .iter()
        .all(|&s| void & (1 << s.index()) == 0 || !hand.has_suit(s))
}

/// Replays the public plays from the implied post-pass hands.
fn replays(config: &GameConfig, hands: &[CardSet; NUM_PLAYERS], plays: &[(u8, Card)]) -> bool {
    let mut start = *hands;
    for &(p, c) in plays {
        start[p as usize].insert(c);
    }
    let cardplay = GameConfig {
        passing_enabled: false,
        ..config.clone()
    };
    let Ok(mut s) = GameState::from_hands(cardplay, 0, start) else {
        return false;
    };
    plays
        .iter()
        .all(|&(p, c)| s.to_move() == p as usize && s.apply_in_place(c).is_ok())
}

/// Deals the cards the viewer cannot see uniformly among the consistent
/// worlds: hand sizes, the receiver of the viewer's pass, suits shown void,
/// and legality of every public play are enforced by rejection.
pub fn sample_world<R: Rng + ?Sized>(
    view: &PlayerView,
    rng: &mut R,
) -> Result<GameState, SearchError> {
    let s = &view.masked;
    let config = s.config();
    let viewer = view.viewer;
    let k = config.hand_size();
    let plays = s.plays();
    let played = s.played_cards();
    let passing = s.phase() == Phase::Passing;

    let mut unseen = CardSet::full_deck(config.ranks_per_suit)
        .difference(s.hand(viewer))
        .difference(played);
    for &c in s.pass_buffer(viewer) {
        unseen.remove(c);
    }
    let mut forced = [CardSet::EMPTY; NUM_PLAYERS];
    if !passing && s.pass_direction() != PassDirection::None {
        let target = s.pass_direction().target(viewer);
        for &c in s.passed_cards(viewer) {
            if !played.contains(c) {
                forced[target].insert(c);
                unseen.remove(c);
            }
        }
    }
    let mut need = [0usize; NUM_PLAYERS];
    for p in (0..NUM_PLAYERS).filter(|&p| p != viewer) {
        let played_by = plays.iter().filter(|&&(q, _)| q as usize == p).count();
        need[p] = k - played_by - forced[p].len();
    }
    if need.iter().sum::<usize>() != unseen.len() {
        return Err(SearchError::NoConsistentWorld(0));
    }
    let void = voids(plays);
    let mut cards = unseen.to_vec();
    for _ in 0..MAX_ATTEMPTS {
        cards.shuffle(rng);
        let mut hands = [CardSet::EMPTY; NUM_PLAYERS];
        hands[viewer] = s.hand(viewer);
        let mut rest = cards.as_slice();
        for p in (0..NUM_PLAYERS).filter(|&p| p != viewer) {
            let (mine, tail) = rest.split_at(need[p]);
            rest = tail;
            hands[p] = forced[p].union(mine.iter().copied().collect());
        }
        if !(0..NUM_PLAYERS).all(|p| respects_voids(hands[p], void[p])) {
            continue;
        }
        let mut buffers: [ArrayVec<Card, PASS_COUNT>; NUM_PLAYERS] = Default::default();
        if passing {
            for p in (0..NUM_PLAYERS).filter(|&p| p != viewer) {
                let mut held = hands[p].to_vec();
                held.shuffle(rng);
                for &c in held.iter().take(view.buffer_lens[p]) {
                    hands[p].remove(c);
                    buffers[p].push(c);
                }
            }
        } else if !replays(config, &hands, plays) {
            continue;
        }
        return Ok(s.with_hidden(hands, buffers));
    }
    Err(SearchError::NoConsistentWorld(MAX_ATTEMPTS))
}

/// Values of the legal actions of the player to move in a fully known
/// state.
pub trait PerfectInfoEvaluator: Send + Sync {
    fn action_values(
        &self,
        state: &GameState,
        v: &OutcomeValueFn,
        rng: &mut dyn RngCore,
    ) -> Vec<(Action, f64)>;
}

/// Exhaustive search where the player to move at the root maximizes and
/// every other player plays uniformly at random. Exact for small decks.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExpectimaxEvaluator;

impl ExpectimaxEvaluator {
    pub fn value(&self, s: &GameState, v: &OutcomeValueFn, player: usize) -> f64 {
        if s.is_terminal() {
            return v.value(&s.outcome().expect("terminal").card_points, player);
        }
        let legal = s.legal_actions().expect("not terminal");
        let values = legal
            .iter()
            .map(|&a| self.value(&s.apply_action(a).expect("legal"), v, player));
        if s.to_move() == player {
            values.fold(f64::NEG_INFINITY, f64::max)
        } else {
            values.sum::<f64>() / legal.len() as f64
        }
    }
}

impl PerfectInfoEvaluator for ExpectimaxEvaluator {
    fn action_values(
        &self,
        state: &GameState,
        v: &OutcomeValueFn,
        _rng: &mut dyn RngCore,
    ) -> Vec<(Action, f64)> {
        let player = state.to_move();
        state
            .legal_actions()
            .unwrap_or_default()
            .into_iter()
            .map(|a| {
                (
                    a,
                    self.value(&state.apply_action(a).expect("legal"), v, player),
                )
            })
            .collect()
    }
}

/// Fixed-budget UCT on a fully known state, every player maximizing their
/// own value, with uniform random playouts.
#[derive(Clone, Copy, Debug)]
pub struct UctEvaluator {
    pub iterations: usize,
    pub exploration_c: f64,
}

impl Default for UctEvaluator {
    fn default() -> UctEvaluator {
        UctEvaluator {
            iterations: 10_000,
            exploration_c: 0.4,
        }
    }
}

struct UctNode {
    state: GameState,
    untried: Vec<Action>,
    children: Vec<(Action, usize)>,
    visits: f64,
    /// Value sums from every player's seat.
    sums: [f64; NUM_PLAYERS],
}

impl UctNode {
    fn new(state: GameState) -> UctNode {
        UctNode {
            untried: state.legal_actions().unwrap_or_default(),
            state,
            children: Vec::new(),
            visits: 0.0,
            sums: [0.0; NUM_PLAYERS],
        }
    }
}

impl PerfectInfoEvaluator for UctEvaluator {
    fn action_values(
        &self,
        state: &GameState,
        v: &OutcomeValueFn,
        rng: &mut dyn RngCore,
    ) -> Vec<(Action, f64)> {
        let mut nodes = vec![UctNode::new(state.clone())];
        for _ in 0..self.iterations.max(1) {
            let mut path = vec![0];
            let mut n = 0;
            loop {
                if !nodes[n].untried.is_empty() {
                    let i = rng.random_range(0..nodes[n].untried.len());
                    let a = nodes[n].untried.swap_remove(i);
                    let next = nodes[n].state.apply_action(a).expect("legal");
                    nodes.push(UctNode::new(next));
                    let id = nodes.len() - 1;
                    nodes[n].children.push((a, id));
                    path.push(id);
                    n = id;
                    break;
                }
                if nodes[n].children.is_empty() {
                    break;
                }
                let mover = nodes[n].state.to_move();
                let ln_total = nodes[n].visits.ln();
                let mut best = nodes[n].children[0].1;
                let mut best_score = f64::NEG_INFINITY;
                for &(_, c) in &nodes[n].children {
                    let child = &nodes[c];
                    let score = child.sums[mover] / child.visits
                        + self.exploration_c * (ln_total / child.visits).sqrt();
                    if score > best_score {
                        best = c;
                        best_score = score;
                    }
                }
                n = best;
                path.push(n);
            }
            let mut s = nodes[n].state.clone();
            while !s.is_terminal() {
                let legal = s.legal_actions().expect("not terminal");
                s.apply_in_place(legal[rng.random_range(0..legal.len())])
                    .expect("legal");
            }
            let points = s.outcome().expect("terminal").card_points;
            let values: [f64; NUM_PLAYERS] = std::array::from_fn(|p| v.value(&points, p));
            for &id in &path {
                nodes[id].visits += 1.0;
                for p in 0..NUM_PLAYERS {
                    nodes[id].sums[p] += values[p];
                }
            }
        }
        let player = state.to_move();
        nodes[0]
            .children
            .iter()
            .map(|&(a, c)| (a, nodes[c].sums[player] / nodes[c].visits))
            .collect()
    }
}

/// Samples `n` worlds consistent with the view, adds up the evaluator's
/// action values in each, and returns the best action (first in card order
/// on ties).
pub fn pimc<E: PerfectInfoEvaluator + ?Sized>(
    view: &PlayerView,
    n: usize,
    evaluator: &E,
    v: &OutcomeValueFn,
    rng: &mut dyn RngCore,
) -> Result<Action, SearchError> {
    let legal = view.legal_actions()?;
    if legal.len() == 1 {
        return Ok(legal[0]);
    }
    let mut sums = vec![0.0; legal.len()];
    for _ in 0..n.max(1) {
        let world = sample_world(view, rng)?;
        for (a, value) in evaluator.action_values(&world, v, rng) {
            if let Some(i) = legal.iter().position(|&b| b == a) {
                sums[i] += value;
            }
        }
    }
    let mut best = 0;
    for i in 1..legal.len() {
        if sums[i] > sums[best] {
            best = i;
        }
    }
    Ok(legal[best])
}
