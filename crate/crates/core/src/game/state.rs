use std::sync::Arc;

use arrayvec::ArrayVec;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::card::{Card, CardSet, Suit};
use super::config::{ConfigError, GameConfig, PassDirection, NUM_PLAYERS, PASS_COUNT};

/// A player's move: a pass pick during passing, a card play otherwise.
pub type Action = Card;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    Passing,
    Cardplay,
    Terminal,
}

/// The rule an attempted action breaks.
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum RuleViolation {
    #[error("card is not in the mover's hand")]
    NotInHand,
    #[error("the first trick must be opened with {0}")]
    MustLeadLowestClub(Card),
    #[error("must follow suit {0}")]
    MustFollowSuit(Suit),
    #[error("hearts cannot be led before they are broken")]
    HeartsNotBroken,
    #[error("point cards cannot be played on the first trick")]
    PointsOnFirstTrick,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error("the hand is already over")]
    Terminal,
    #[error("the hand is not over yet")]
    NotTerminal,
    #[error("illegal action {card}: {violation}")]
    Illegal {
        card: Card,
        violation: RuleViolation,
    },
    #[error("cards do not form a valid deal: {0}")]
    BadDeal(&'static str),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Final per-player card points, after the moon adjustment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Outcome {
    pub card_points: [i32; NUM_PLAYERS],
}

/// Ground-truth state of one deal.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GameState {
    config: Arc<GameConfig>,
    deal_index: u32,
    pass_direction: PassDirection,
    hands: [CardSet; NUM_PLAYERS],
    phase: Phase,
    pass_buffers: [ArrayVec<Card, PASS_COUNT>; NUM_PLAYERS],
    passed: [ArrayVec<Card, PASS_COUNT>; NUM_PLAYERS],
    current_trick: ArrayVec<(u8, Card), NUM_PLAYERS>,
    hearts_broken: bool,
    taken_points: [i32; NUM_PLAYERS],
    to_move: u8,
    trick_leader: u8,
    tricks_completed: u8,
    plays: ArrayVec<(u8, Card), 52>,
}

impl GameState {
    /// Shuffles and deals the first hand of a series.
    pub fn new_deal(config: impl Into<Arc<GameConfig>>, seed: u64) -> Result<GameState, GameError> {
        GameState::new_deal_indexed(config, seed, 0)
    }

    /// Shuffles and deals; `deal_index` selects the pass direction.
    pub fn new_deal_indexed(
        config: impl Into<Arc<GameConfig>>,
        seed: u64,
        deal_index: u32,
    ) -> Result<GameState, GameError> {
        let config = config.into();
        config.validate()?;
        let mut deck = CardSet::full_deck(config.ranks_per_suit).to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        deck.shuffle(&mut rng);
        let n = config.hand_size();
        let mut hands = [CardSet::EMPTY; NUM_PLAYERS];
        for (p, hand) in hands.iter_mut().enumerate() {
            *hand = CardSet::from_cards(deck[p * n..(p + 1) * n].iter().copied());
        }
        GameState::from_hands(config, deal_index, hands)
    }

    /// Starts a deal from explicit hands.
    pub fn from_hands(
        config: impl Into<Arc<GameConfig>>,
        deal_index: u32,
        hands: [CardSet; NUM_PLAYERS],
    ) -> Result<GameState, GameError> {
        let config = config.into();
        config.validate()?;
        let deck = CardSet::full_deck(config.ranks_per_suit);
        let mut seen = CardSet::EMPTY;
        for hand in &hands {
            if hand.len() != config.hand_size() {
                return Err(GameError::BadDeal("hand size"));
            }
            if !seen.intersection(*hand).is_empty() {
                return Err(GameError::BadDeal("duplicate card"));
            }
            seen = seen.union(*hand);
        }
        if seen != deck {
            return Err(GameError::BadDeal("cards outside the deck"));
        }
        let pass_direction = config.pass_direction(deal_index);
        let mut state = GameState {
            config,
            deal_index,
            pass_direction,
            hands,
            phase: Phase::Passing,
            pass_buffers: Default::default(),
            passed: Default::default(),
            current_trick: ArrayVec::new(),
            hearts_broken: false,
            taken_points: [0; NUM_PLAYERS],
            to_move: 0,
            trick_leader: 0,
            tricks_completed: 0,
            plays: ArrayVec::new(),
        };
        if pass_direction == PassDirection::None {
            state.start_cardplay();
        }
        Ok(state)
    }

    fn start_cardplay(&mut self) {
        let club = self.config.lowest_club();
        let leader = (0..NUM_PLAYERS)
            .find(|&p| self.hands[p].contains(club))
            .expect("lowest club is always dealt") as u8;
        self.phase = Phase::Cardplay;
        self.trick_leader = leader;
        self.to_move = leader;
    }

    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    pub fn shared_config(&self) -> Arc<GameConfig> {
        Arc::clone(&self.config)
    }

    pub fn deal_index(&self) -> u32 {
        self.deal_index
    }

    pub fn pass_direction(&self) -> PassDirection {
        self.pass_direction
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn is_terminal(&self) -> bool {
        self.phase == Phase::Terminal
    }

    pub fn hand(&self, player: usize) -> CardSet {
        self.hands[player]
    }

    pub fn hands(&self) -> &[CardSet; NUM_PLAYERS] {
        &self.hands
    }

    pub fn pass_buffer(&self, player: usize) -> &[Card] {
        &self.pass_buffers[player]
    }

    /// Cards `player` chose to pass this deal, kept after the exchange.
    pub fn passed_cards(&self, player: usize) -> &[Card] {
        &self.passed[player]
    }

    pub fn current_trick(&self) -> &[(u8, Card)] {
        &self.current_trick
    }

    pub fn hearts_broken(&self) -> bool {
        self.hearts_broken
    }

    pub fn taken_points(&self) -> [i32; NUM_PLAYERS] {
        self.taken_points
    }

    pub fn to_move(&self) -> usize {
        self.to_move as usize
    }

    pub fn trick_leader(&self) -> usize {
        self.trick_leader as usize
    }

    pub fn tricks_completed(&self) -> usize {
        self.tricks_completed as usize
    }

    /// Every card played so far, in order, with its player.
    pub fn plays(&self) -> &[(u8, Card)] {
        &self.plays
    }

    pub fn played_cards(&self) -> CardSet {
        self.plays.iter().map(|&(_, c)| c).collect()
    }

    pub fn led_suit(&self) -> Option<Suit> {
        self.current_trick.first().map(|&(_, c)| c.suit)
    }

    /// Checks `card` against the rules for the player to move.
    pub fn check_action(&self, card: Action) -> Result<(), GameError> {
        let violation = |violation| GameError::Illegal { card, violation };
        let p = self.to_move as usize;
        let hand = self.hands[p];
        match self.phase {
            Phase::Terminal => Err(GameError::Terminal),
            Phase::Passing => {
                if hand.contains(card) {
                    Ok(())
                } else {
                    Err(violation(RuleViolation::NotInHand))
                }
            }
            Phase::Cardplay => {
                if !hand.contains(card) {
                    return Err(violation(RuleViolation::NotInHand));
                }
                let first_trick = self.tricks_completed == 0;
                match self.led_suit() {
                    None => {
                        let club = self.config.lowest_club();
                        if first_trick && card != club {
                            return Err(violation(RuleViolation::MustLeadLowestClub(club)));
                        }
                        if card.suit == Suit::Hearts
                            && !self.hearts_broken
                            && hand.of_suit(Suit::Hearts) != hand
                        {
                            return Err(violation(RuleViolation::HeartsNotBroken));
                        }
                        Ok(())
                    }
                    Some(led) => {
                        if card.suit != led && hand.has_suit(led) {
                            return Err(violation(RuleViolation::MustFollowSuit(led)));
                        }
                        if first_trick
                            && self.config.is_point_card(card)
                            && hand.iter().any(|c| !self.config.is_point_card(c))
                        {
                            return Err(violation(RuleViolation::PointsOnFirstTrick));
                        }
                        Ok(())
                    }
                }
            }
        }
    }

    /// Legal actions for the player to move, in canonical card order.
    pub fn legal_actions(&self) -> Result<Vec<Action>, GameError> {
        if self.is_terminal() {
            return Err(GameError::Terminal);
        }
        Ok(self.hands[self.to_move as usize]
            .iter()
            .filter(|&c| self.check_action(c).is_ok())
            .collect())
    }

    pub fn apply_action(&self, card: Action) -> Result<GameState, GameError> {
        let mut next = self.clone();
        next.apply_in_place(card)?;
        Ok(next)
    }

    /// Mutating form of [`GameState::apply_action`]; leaves the state
    /// untouched on error.
    pub fn apply_in_place(&mut self, card: Action) -> Result<(), GameError> {
        self.check_action(card)?;
        let p = self.to_move as usize;
        self.hands[p].remove(card);
        match self.phase {
            Phase::Passing => {
                self.pass_buffers[p].push(card);
                self.passed[p].push(card);
                match (0..NUM_PLAYERS).find(|&q| self.pass_buffers[q].len() < PASS_COUNT) {
                    Some(q) => self.to_move = q as u8,
                    None => self.exchange_passes(),
                }
            }
            Phase::Cardplay => self.play_card(p, card),
            Phase::Terminal => unreachable!("checked above"),
        }
        Ok(())
    }

    fn exchange_passes(&mut self) {
        for from in 0..NUM_PLAYERS {
            let to = self.pass_direction.target(from);
            let cards = std::mem::take(&mut self.pass_buffers[from]);
            for c in cards {
                self.hands[to].insert(c);
            }
        }
        self.start_cardplay();
    }

    fn play_card(&mut self, player: usize, card: Card) {
        self.current_trick.push((player as u8, card));
        self.plays.push((player as u8, card));
        if card.suit == Suit::Hearts {
            self.hearts_broken = true;
        }
        if self.current_trick.len() < NUM_PLAYERS {
            self.to_move = ((player + 1) % NUM_PLAYERS) as u8;
            return;
        }
        let led = self.current_trick[0].1.suit;
        let (winner, _) = self
            .current_trick
            .iter()
            .filter(|(_, c)| c.suit == led)
            .max_by_key(|(_, c)| c.rank)
            .copied()
            .expect("leader follows own suit");
        let points: i32 = self
            .current_trick
            .iter()
            .map(|&(_, c)| self.config.card_points(c))
            .sum();
        self.taken_points[winner as usize] += points;
        self.tricks_completed += 1;
        self.current_trick.clear();
        self.trick_leader = winner;
        self.to_move = winner;
        if self.hands.iter().all(|h| h.is_empty()) {
            self.phase = Phase::Terminal;
        }
    }

    pub fn outcome(&self) -> Result<Outcome, GameError> {
        if !self.is_terminal() {
            return Err(GameError::NotTerminal);
        }
        Ok(outcome_from_taken(&self.config, self.taken_points))
    }

    /// The state with everything `viewer` cannot see removed: other
    /// players' hands and pass buffers, and passed cards the viewer neither
    /// sent nor received.
    pub(crate) fn masked(&self, viewer: usize) -> GameState {
        let mut m = self.clone();
        let exchanged = self.phase != Phase::Passing;
        let source = self.pass_direction.source(viewer);
        for p in (0..NUM_PLAYERS).filter(|&p| p != viewer) {
            m.hands[p] = CardSet::EMPTY;
            m.pass_buffers[p].clear();
            if !(exchanged && p == source) {
                m.passed[p].clear();
            }
        }
        m
    }

    /// Fills hidden hands and pass buffers into a masked state.
    pub(crate) fn with_hidden(
        &self,
        hands: [CardSet; NUM_PLAYERS],
        buffers: [ArrayVec<Card, PASS_COUNT>; NUM_PLAYERS],
    ) -> GameState {
        let mut s = self.clone();
        s.hands = hands;
        for (p, b) in buffers.into_iter().enumerate() {
            if !b.is_empty() {
                s.passed[p] = b.clone();
                s.pass_buffers[p] = b;
            }
        }
        s
    }
}

/// Applies the moon rule to raw taken points.
pub fn outcome_from_taken(config: &GameConfig, taken: [i32; NUM_PLAYERS]) -> Outcome {
    let total = config.total_points();
    if config.moon_rule_enabled {
        if let Some(shooter) = taken.iter().position(|&t| t == total) {
            let mut card_points = [0; NUM_PLAYERS];
            card_points[shooter] = -total;
            return Outcome { card_points };
        }
    }
    Outcome { card_points: taken }
}
