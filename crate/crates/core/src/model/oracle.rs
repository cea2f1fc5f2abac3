use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::game::{Action, Card, CardSet, GameConfig, GameState, NUM_PLAYERS};
use crate::tokenizer::{analyze, Analysis, Next, ObservationHistory, Token, Vocabulary};

use super::{
    check_context, GenerativeModel, ModelError, NextObsDistribution, OutcomeDistribution,
    OutcomeSpace,
};

/// A player's behavior as a function of the full game state.
pub trait StatePolicy: Send + Sync {
    /// Probability of each action in `state`; the values sum to 1.
    fn action_probs(&self, state: &GameState) -> Vec<(Action, f64)>;
}

/// Uniform over the legal actions.
#[derive(Clone, Copy, Debug, Default)]
pub struct UniformStatePolicy;

impl StatePolicy for UniformStatePolicy {
    fn action_probs(&self, state: &GameState) -> Vec<(Action, f64)> {
        let legal = state.legal_actions().unwrap_or_default();
        let p = 1.0 / legal.len() as f64;
        legal.into_iter().map(|a| (a, p)).collect()
    }
}

/// Enumerations above this many visited states are refused.
const STATE_LIMIT: f64 = 1e10;
/// Caches are dropped once they hold this many worlds in total.
const CACHE_WORLDS: usize = 4_000_000;

struct Belief {
    /// Deals consistent with the history, advanced to its end, with
    /// normalized posterior weights.
    worlds: Vec<(GameState, f64)>,
}

#[derive(Default)]
struct Cache {
    beliefs: HashMap<Vec<Token>, Arc<Belief>>,
    next: HashMap<Vec<Token>, NextObsDistribution>,
    outcome: HashMap<Vec<Token>, OutcomeDistribution>,
    worlds: usize,
}

/// Posterior-predictive model obtained by enumerating every deal consistent
/// with a history, weighting it by how likely the other players' policies
/// were to produce the observed plays.
///
/// All four seats need a policy: the viewer's own future plays drive the
/// outcome distribution and the prediction of the viewer's next token. The
/// viewer's past plays carry no information about hidden cards and are not
/// weighted.
pub struct ExactOracle {
    config: Arc<GameConfig>,
    vocab: Vocabulary,
    outcomes: OutcomeSpace,
    policies: [Arc<dyn StatePolicy>; NUM_PLAYERS],
    cache: Mutex<Cache>,
}

/// Builds the oracle after checking that enumeration is feasible.
pub fn build_exact_oracle(
    config: &GameConfig,
    policies: [Arc<dyn StatePolicy>; NUM_PLAYERS],
) -> Result<ExactOracle, ModelError> {
    if config.passing_enabled {
        return Err(ModelError::Unsupported(
            "exact oracle for deals with passing",
        ));
    }
    let estimate = worlds_at_lead(config) * leaves_per_world(config);
    if estimate > STATE_LIMIT {
        return Err(ModelError::ScaleRefusal { estimate });
    }
    Ok(ExactOracle {
        config: Arc::new(config.clone()),
        vocab: Vocabulary::new(config),
        outcomes: OutcomeSpace::new(config),
        policies,
        cache: Mutex::new(Cache::default()),
    })
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).map(|i| (n - i) as f64 / (i + 1) as f64).product()
}

/// Ways to deal the unseen cards to the three other players.
fn worlds_at_lead(config: &GameConfig) -> f64 {
    let h = config.hand_size();
    factorial(3 * h) / factorial(h).powi(3)
}

/// Upper bound on play sequences from one deal.
fn leaves_per_world(config: &GameConfig) -> f64 {
    factorial(config.hand_size()).powi(NUM_PLAYERS as i32)
}

fn subsets(cards: &[Card], k: usize) -> Vec<CardSet> {
    fn go(cards: &[Card], k: usize, start: usize, cur: &mut CardSet, out: &mut Vec<CardSet>) {
        if cur.len() == k {
            out.push(*cur);
            return;
        }
        for i in start..cards.len() {
            if cards.len() - i < k - cur.len() {
                break;
            }
            cur.insert(cards[i]);
            go(cards, k, i + 1, cur, out);
            cur.remove(cards[i]);
        }
    }
    let mut out = Vec::new();
    let mut cur = CardSet::EMPTY;
    go(cards, k, 0, &mut cur, &mut out);
    out
}

fn normalize(worlds: &mut [(GameState, f64)]) {
    let total: f64 = worlds.iter().map(|(_, w)| w).sum();
    if total > 0.0 {
        for (_, w) in worlds.iter_mut() {
            *w /= total;
        }
    }
}

impl ExactOracle {
    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    pub fn clear_cache(&self) {
        *self.cache.lock().unwrap() = Cache::default();
    }

    /// Posterior over deals consistent with `h`, each advanced to the end of
    /// `h`. Empty when `h` is impossible.
    pub fn worlds(&self, h: &ObservationHistory) -> Result<Vec<(GameState, f64)>, ModelError> {
        let a = self.read(h)?;
        let start = a
            .play_start
            .ok_or(ModelError::Unsupported("worlds before the lead"))?;
        Ok(self.belief(h.tokens(), start)?.worlds.clone())
    }

    /// Analysis of `h`, rejecting anything no deal can produce.
    fn read(&self, h: &ObservationHistory) -> Result<Analysis, ModelError> {
        let tokens = h.tokens();
        for &t in tokens {
            if t as usize >= self.vocab.size() {
                return Err(ModelError::BadToken {
                    token: t,
                    vocab_size: self.vocab.size(),
                });
            }
        }
        let a = analyze(tokens, &self.config);
        if a.is_broken() || (!tokens.is_empty() && a.viewer as usize != h.viewer()) {
            return Err(ModelError::DistributionUndefined);
        }
        let hand_tokens =
            &tokens[1.min(tokens.len())..(1 + self.config.hand_size()).min(tokens.len())];
        if hand_tokens.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ModelError::DistributionUndefined);
        }
        Ok(a)
    }

    fn belief(&self, tokens: &[Token], start: usize) -> Result<Arc<Belief>, ModelError> {
        let viewer = self.vocab.kind(tokens[0]);
        let viewer = match viewer {
            crate::tokenizer::TokenKind::Position(p) => p as usize,
            _ => return Err(ModelError::DistributionUndefined),
        };
        let cached = {
            let cache = self.cache.lock().unwrap();
            (start..=tokens.len())
                .rev()
                .find_map(|n| cache.beliefs.get(&tokens[..n]).map(|b| (n, b.clone())))
        };
        let (mut n, mut belief) = match cached {
            Some(found) => found,
            None => {
                let b = Arc::new(self.initial_belief(&tokens[..start]));
                self.store_belief(&tokens[..start], &b);
                (start, b)
            }
        };
        while n < tokens.len() {
            belief = Arc::new(self.advance(&belief, tokens[n], viewer));
            n += 1;
            self.store_belief(&tokens[..n], &belief);
        }
        Ok(belief)
    }

    fn store_belief(&self, tokens: &[Token], belief: &Arc<Belief>) {
        let mut cache = self.cache.lock().unwrap();
        if cache.worlds > CACHE_WORLDS {
            *cache = Cache::default();
        }
        cache.worlds += belief.worlds.len();
        cache.beliefs.insert(tokens.to_vec(), belief.clone());
    }

    /// Every split of the unseen cards whose lowest-club holder matches the
    /// announced leader.
    fn initial_belief(&self, header: &[Token]) -> Belief {
        let a = analyze(header, &self.config);
        let viewer = a.viewer as usize;
        let leader = a.leader.unwrap_or(0) as usize;
        let unseen: Vec<Card> = CardSet::full_deck(self.config.ranks_per_suit)
            .difference(a.hand)
            .to_vec();
        let others: Vec<usize> = (0..NUM_PLAYERS).filter(|&p| p != viewer).collect();
        let k = self.config.hand_size();
        let club = self.config.lowest_club();
        let mut worlds = Vec::new();
        for first in subsets(&unseen, k) {
            let rest: Vec<Card> = unseen
                .iter()
                .copied()
                .filter(|&c| !first.contains(c))
                .collect();
            for second in subsets(&rest, k) {
                let third: CardSet = rest
                    .iter()
                    .copied()
                    .filter(|&c| !second.contains(c))
                    .collect();
                let mut hands = [CardSet::EMPTY; NUM_PLAYERS];
                hands[viewer] = a.hand;
                hands[others[0]] = first;
                hands[others[1]] = second;
                hands[others[2]] = third;
                if !hands[leader].contains(club) {
                    continue;
                }
                if let Ok(s) = GameState::from_hands(self.config.clone(), 0, hands) {
                    worlds.push((s, 1.0));
                }
            }
        }
        normalize(&mut worlds);
        Belief { worlds }
    }

    fn advance(&self, belief: &Belief, token: Token, viewer: usize) -> Belief {
        let Some(card) = self.vocab.as_card(token) else {
            return Belief { worlds: Vec::new() };
        };
        let mut worlds = Vec::with_capacity(belief.worlds.len());
        for (s, w) in &belief.worlds {
            if s.is_terminal() {
                continue;
            }
            let p = s.to_move();
            let weight = if p == viewer {
                *w
            } else {
                let q = self.policies[p]
                    .action_probs(s)
                    .into_iter()
                    .find(|&(a, _)| a == card)
                    .map_or(0.0, |(_, q)| q);
                w * q
            };
            if weight <= 0.0 {
                continue;
            }
            if let Ok(next) = s.apply_action(card) {
                worlds.push((next, weight));
            }
        }
        normalize(&mut worlds);
        Belief { worlds }
    }

    fn hand_dist(&self, a: &Analysis) -> Result<NextObsDistribution, ModelError> {
        let deck = self.config.deck_size();
        let k = self.config.hand_size();
        let j = a.dealt.len();
        let above = |idx: Option<usize>| deck - idx.map_or(0, |i| i + 1);
        let last = a
            .dealt
            .iter()
            .last()
            .map(|c| c.index(self.config.ranks_per_suit));
        let denom = binomial(above(last), k - j);
        let mut weights = vec![0.0; self.vocab.size()];
        let first = last.map_or(0, |i| i + 1);
        for idx in first..deck {
            let card = Card::from_index(idx, self.config.ranks_per_suit).expect("index in deck");
            weights[self.vocab.card(card) as usize] = binomial(above(Some(idx)), k - j - 1) / denom;
        }
        NextObsDistribution::from_weights(weights)
    }

    fn lead_dist(&self, a: &Analysis) -> Result<NextObsDistribution, ModelError> {
        let mut weights = vec![0.0; self.vocab.size()];
        if a.hand.contains(self.config.lowest_club()) {
            weights[self.vocab.position(a.viewer as usize) as usize] = 1.0;
        } else {
            for p in (0..NUM_PLAYERS).filter(|&p| p != a.viewer as usize) {
                weights[self.vocab.position(p) as usize] = 1.0;
            }
        }
        NextObsDistribution::from_weights(weights)
    }

    fn play_dist(
        &self,
        h: &ObservationHistory,
        start: usize,
    ) -> Result<NextObsDistribution, ModelError> {
        if let Some(d) = self.cache.lock().unwrap().next.get(h.tokens()) {
            return Ok(d.clone());
        }
        let belief = self.belief(h.tokens(), start)?;
        let mut weights = vec![0.0; self.vocab.size()];
        for (s, w) in &belief.worlds {
            for (a, q) in self.policies[s.to_move()].action_probs(s) {
                weights[self.vocab.card(a) as usize] += w * q;
            }
        }
        let d = NextObsDistribution::from_weights(weights)?;
        self.cache
            .lock()
            .unwrap()
            .next
            .insert(h.tokens().to_vec(), d.clone());
        Ok(d)
    }

    fn accumulate(&self, s: &GameState, p: f64, out: &mut [f64]) {
        if s.is_terminal() {
            let o = s.outcome().expect("terminal state has an outcome");
            out[self
                .outcomes
                .id(&o)
                .expect("outcome space covers every allocation")] += p;
            return;
        }
        for (a, q) in self.policies[s.to_move()].action_probs(s) {
            if q > 0.0 {
                let next = s.apply_action(a).expect("policies return legal actions");
                self.accumulate(&next, p * q, out);
            }
        }
    }

    fn play_outcome(
        &self,
        h: &ObservationHistory,
        start: usize,
    ) -> Result<OutcomeDistribution, ModelError> {
        if let Some(d) = self.cache.lock().unwrap().outcome.get(h.tokens()) {
            return Ok(d.clone());
        }
        let belief = self.belief(h.tokens(), start)?;
        let mut weights = vec![0.0; self.outcomes.len()];
        for (s, w) in &belief.worlds {
            self.accumulate(s, *w, &mut weights);
        }
        let d = OutcomeDistribution::from_weights(weights)?;
        self.cache
            .lock()
            .unwrap()
            .outcome
            .insert(h.tokens().to_vec(), d.clone());
        Ok(d)
    }
}

impl GenerativeModel for ExactOracle {
    fn vocab_size(&self) -> usize {
        self.vocab.size()
    }

    fn context_length(&self) -> usize {
        self.vocab.context_length()
    }

    fn outcomes(&self) -> &OutcomeSpace {
        &self.outcomes
    }

    fn next_obs_dist(&self, h: &ObservationHistory) -> Result<NextObsDistribution, ModelError> {
        check_context(h, self.context_length())?;
        let a = self.read(h)?;
        match a.next {
            Next::Seat => Ok(NextObsDistribution::point_mass(
                self.vocab.size(),
                self.vocab.position(h.viewer()),
            )),
            Next::Hand => self.hand_dist(&a),
            Next::Lead => self.lead_dist(&a),
            Next::Play(_) => self.play_dist(h, a.play_start.expect("plays follow the lead")),
            Next::Terminal => Err(ModelError::Terminal),
            Next::Broken(_) => Err(ModelError::DistributionUndefined),
            Next::Direction | Next::ViewerPick | Next::Incoming => Err(ModelError::Unsupported(
                "exact oracle for deals with passing",
            )),
        }
    }

    fn outcome_dist(&self, h: &ObservationHistory) -> Result<OutcomeDistribution, ModelError> {
        if h.len() > self.context_length() {
            return Err(ModelError::ContextOverflow {
                len: h.len(),
                max: self.context_length(),
            });
        }
        let a = self.read(h)?;
        match a.next {
            Next::Play(_) | Next::Terminal => {
                self.play_outcome(h, a.play_start.expect("plays follow the lead"))
            }
            Next::Lead => {
                let next = self.lead_dist(&a)?;
                let mut weights = vec![0.0; self.outcomes.len()];
                for (t, p) in next.support() {
                    let d = self.play_outcome(&h.with(t), h.len() + 1)?;
                    for (w, q) in weights.iter_mut().zip(d.probs()) {
                        *w += p * q;
                    }
                }
                OutcomeDistribution::from_weights(weights)
            }
            Next::Broken(_) => Err(ModelError::DistributionUndefined),
            Next::Seat | Next::Hand => {
                let k = self.config.hand_size();
                let hands = binomial(self.config.deck_size() - a.dealt.len(), k - a.dealt.len());
                let estimate =
                    hands * worlds_at_lead(&self.config) * leaves_per_world(&self.config);
                Err(ModelError::ScaleRefusal { estimate })
            }
            Next::Direction | Next::ViewerPick | Next::Incoming => Err(ModelError::Unsupported(
                "exact oracle for deals with passing",
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::state_value;
    use crate::model::OutcomeValueFn;
    use crate::tokenizer::build_history;

    fn uniform() -> [Arc<dyn StatePolicy>; NUM_PLAYERS] {
        std::array::from_fn(|_| Arc::new(UniformStatePolicy) as Arc<dyn StatePolicy>)
    }

    #[test]
    fn refuses_large_configs() {
        assert!(matches!(
            build_exact_oracle(&GameConfig::hearts_no_pass(), uniform()),
            Err(ModelError::ScaleRefusal { .. })
        ));
        assert!(matches!(
            build_exact_oracle(&GameConfig::mini_with_passing(3), uniform()),
            Err(ModelError::Unsupported(_))
        ));
    }

    #[test]
    fn forced_lowest_club_lead_is_a_point_mass() {
        let config = GameConfig::mini(3);
        let oracle = build_exact_oracle(&config, uniform()).unwrap();
        let deal = GameState::new_deal(config.clone(), 4).unwrap();
        let leader = deal.to_move();
        let vocab = Vocabulary::new(&config);
        for viewer in 0..NUM_PLAYERS {
            let h = build_history(&deal, &[], viewer).unwrap();
            let d = oracle.next_obs_dist(&h).unwrap();
            assert_eq!(d.prob(vocab.card(config.lowest_club())), 1.0);
            // Before the lead token, the holder of the club knows it leads.
            let before = ObservationHistory::new(viewer, h.tokens()[..h.len() - 1].to_vec());
            let lead = oracle.next_obs_dist(&before).unwrap();
            if viewer == leader {
                assert_eq!(lead.prob(vocab.position(viewer)), 1.0);
            } else {
                assert!((lead.prob(vocab.position(leader)) - 1.0 / 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn impossible_history_is_undefined() {
        let config = GameConfig::mini(3);
        let oracle = build_exact_oracle(&config, uniform()).unwrap();
        let vocab = Vocabulary::new(&config);
        let deal = GameState::new_deal(config.clone(), 9).unwrap();
        let h = build_history(&deal, &[], 0).unwrap();
        // Claim someone else leads while the viewer holds the lowest club,
        // or the reverse.
        let mut tokens = h.tokens().to_vec();
        let last = tokens.len() - 1;
        let actual = tokens[last];
        tokens[last] = (0..4)
            .map(|p| vocab.position(p))
            .find(|&t| t != actual)
            .unwrap();
        let bad = ObservationHistory::new(0, tokens);
        let leader_is_viewer = deal.to_move() == 0;
        let wrong_is_viewer = bad.tokens()[last] == vocab.position(0);
        if leader_is_viewer || wrong_is_viewer {
            assert!(matches!(
                oracle.next_obs_dist(&bad),
                Err(ModelError::DistributionUndefined)
            ));
        }
        // A first play other than the lowest club is impossible.
        let mut tokens = h.tokens().to_vec();
        let held: Vec<_> = deal.hand(0).iter().collect();
        let not_club = (0..config.deck_size())
            .map(|i| crate::game::Card::from_index(i, 3).unwrap())
            .find(|c| *c != config.lowest_club() && !held.contains(c))
            .unwrap();
        tokens.push(vocab.card(not_club));
        let bad = ObservationHistory::new(0, tokens);
        if deal.to_move() != 0 {
            assert!(matches!(
                oracle.next_obs_dist(&bad),
                Err(ModelError::DistributionUndefined)
            ));
        }
    }

    #[test]
    fn terminal_history_outcome_is_realized() {
        let config = GameConfig::mini(3);
        let oracle = build_exact_oracle(&config, uniform()).unwrap();
        let deal = GameState::new_deal(config.clone(), 2).unwrap();
        let mut s = deal.clone();
        let mut actions = Vec::new();
        while !s.is_terminal() {
            let a = s.legal_actions().unwrap()[0];
            actions.push(a);
            s = s.apply_action(a).unwrap();
        }
        let h = build_history(&deal, &actions, 2).unwrap();
        let d = oracle.outcome_dist(&h).unwrap();
        let id = oracle.outcomes().id(&s.outcome().unwrap()).unwrap();
        assert_eq!(d.prob(id), 1.0);
        assert!(matches!(
            oracle.next_obs_dist(&h),
            Err(ModelError::Terminal)
        ));
        let v = OutcomeValueFn::for_config(&config);
        let expected = v.value(&s.outcome().unwrap().card_points, 2);
        assert!((state_value(&oracle, &h, &v).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn hand_tokens_follow_sorted_deal_combinatorics() {
        let config = GameConfig::mini(2);
        let oracle = build_exact_oracle(&config, uniform()).unwrap();
        let vocab = Vocabulary::new(&config);
        let h = ObservationHistory::new(1, vec![vocab.position(1)]);
        let d = oracle.next_obs_dist(&h).unwrap();
        // Smallest of a random 2-subset of 8 cards: P(i) = (7 - i) / 28.
        for i in 0..8 {
            let card = crate::game::Card::from_index(i, 2).unwrap();
            assert!((d.prob(vocab.card(card)) - (7 - i) as f64 / 28.0).abs() < 1e-12);
        }
    }
}
