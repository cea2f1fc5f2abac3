use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Suits in canonical order: clubs < diamonds < spades < hearts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Suit {
    Clubs = 0,
    Diamonds = 1,
    Spades = 2,
    Hearts = 3,
}

impl Suit {
    pub const ALL: [Suit; 4] = [Suit::Clubs, Suit::Diamonds, Suit::Spades, Suit::Hearts];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Suit> {
        Suit::ALL.get(i).copied()
    }

    pub fn symbol(self) -> char {
        match self {
            Suit::Clubs => 'C',
            Suit::Diamonds => 'D',
            Suit::Spades => 'S',
            Suit::Hearts => 'H',
        }
    }
}

impl fmt::Display for Suit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

const RANK_CHARS: &[u8; 13] = b"23456789TJQKA";

/// A playing card. Rank 0 is the lowest card of its suit (the two in a
/// full deck).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Card {
    pub suit: Suit,
    pub rank: u8,
}

impl Card {
    pub const fn new(suit: Suit, rank: u8) -> Card {
        Card { suit, rank }
    }

    /// Position in a 52-bit set, independent of the deck size in use.
    pub fn bit(self) -> u32 {
        self.suit as u32 * 13 + self.rank as u32
    }

    fn from_bit(bit: u32) -> Card {
        Card {
            suit: Suit::ALL[(bit / 13) as usize],
            rank: (bit % 13) as u8,
        }
    }

    /// Dense index into a deck with `ranks_per_suit` ranks.
    pub fn index(self, ranks_per_suit: u8) -> usize {
        self.suit.index() * ranks_per_suit as usize + self.rank as usize
    }

    pub fn from_index(index: usize, ranks_per_suit: u8) -> Option<Card> {
        let r = ranks_per_suit as usize;
        if r == 0 || index >= 4 * r {
            return None;
        }
        Some(Card::new(Suit::ALL[index / r], (index % r) as u8))
    }
}

impl fmt::Display for Card {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = RANK_CHARS
            .get(self.rank as usize)
            .map(|&c| c as char)
            .unwrap_or('?');
        write!(f, "{}{}", r, self.suit.symbol())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("cannot parse card {0:?}")]
pub struct ParseCardError(pub String);

impl FromStr for Card {
    type Err = ParseCardError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseCardError(s.to_string());
        let bytes = s.trim().as_bytes();
        if bytes.len() != 2 {
            return Err(err());
        }
        let rank = RANK_CHARS
            .iter()
            .position(|&c| c == bytes[0].to_ascii_uppercase())
            .ok_or_else(err)? as u8;
        let suit = match bytes[1].to_ascii_uppercase() {
            b'C' => Suit::Clubs,
            b'D' => Suit::Diamonds,
            b'S' => Suit::Spades,
            b'H' => Suit::Hearts,
            _ => return Err(err()),
        };
        Ok(Card::new(suit, rank))
    }
}

/// A set of cards stored as a bitmask. Iteration yields canonical order.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CardSet(u64);

impl CardSet {
    pub const EMPTY: CardSet = CardSet(0);

    pub fn from_cards<I: IntoIterator<Item = Card>>(cards: I) -> CardSet {
        let mut set = CardSet::EMPTY;
        for c in cards {
            set.insert(c);
        }
        set
    }

    /// Every card of a deck with `ranks_per_suit` ranks.
    pub fn full_deck(ranks_per_suit: u8) -> CardSet {
        let suit_bits = (1u64 << ranks_per_suit) - 1;
        let mut bits = 0;
        for s in 0..4 {
            bits |= suit_bits << (13 * s);
        }
        CardSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn insert(&mut self, card: Card) -> bool {
        let had = self.contains(card);
        self.0 |= 1 << card.bit();
        !had
    }

    pub fn remove(&mut self, card: Card) -> bool {
        let had = self.contains(card);
        self.0 &= !(1 << card.bit());
        had
    }

    pub fn contains(self, card: Card) -> bool {
        self.0 & (1 << card.bit()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn of_suit(self, suit: Suit) -> CardSet {
        CardSet(self.0 & (0x1fff << (13 * suit as u32)))
    }

    pub fn has_suit(self, suit: Suit) -> bool {
        !self.of_suit(suit).is_empty()
    }

    pub fn union(self, other: CardSet) -> CardSet {
        CardSet(self.0 | other.0)
    }

    pub fn intersection(self, other: CardSet) -> CardSet {
        CardSet(self.0 & other.0)
    }

    pub fn difference(self, other: CardSet) -> CardSet {
        CardSet(self.0 & !other.0)
    }

    pub fn iter(self) -> CardSetIter {
        CardSetIter(self.0)
    }

    pub fn to_vec(self) -> Vec<Card> {
        self.iter().collect()
    }
}

impl fmt::Debug for CardSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set()
            .entries(self.iter().map(|c| c.to_string()))
            .finish()
    }
}

impl FromIterator<Card> for CardSet {
    fn from_iter<T: IntoIterator<Item = Card>>(iter: T) -> Self {
        CardSet::from_cards(iter)
    }
}

pub struct CardSetIter(u64);

impl Iterator for CardSetIter {
    type Item = Card;

    fn next(&mut self) -> Option<Card> {
        if self.0 == 0 {
            return None;
        }
        let bit = self.0.trailing_zeros();
        self.0 &= self.0 - 1;
        Some(Card::from_bit(bit))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for CardSetIter {}

impl IntoIterator for CardSet {
    type Item = Card;
    type IntoIter = CardSetIter;

    fn into_iter(self) -> CardSetIter {
        self.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn card_names_round_trip() {
        for index in 0..52 {
            let card = Card::from_index(index, 13).unwrap();
            let parsed: Card = card.to_string().parse().unwrap();
            assert_eq!(parsed, card);
            assert_eq!(card.index(13), index);
        }
        assert_eq!("QS".parse::<Card>().unwrap(), Card::new(Suit::Spades, 10));
        assert!("1X".parse::<Card>().is_err());
    }

    #[test]
    fn set_iterates_in_canonical_order() {
        let set = CardSet::from_cards([
            Card::new(Suit::Hearts, 5),
            Card::new(Suit::Clubs, 0),
            Card::new(Suit::Spades, 10),
            Card::new(Suit::Clubs, 12),
        ]);
        let names: Vec<String> = set.iter().map(|c| c.to_string()).collect();
        assert_eq!(names, ["2C", "AC", "QS", "7H"]);
        assert_eq!(set.of_suit(Suit::Clubs).len(), 2);
        assert!(!set.has_suit(Suit::Diamonds));
    }

    #[test]
    fn full_deck_sizes() {
        assert_eq!(CardSet::full_deck(13).len(), 52);
        assert_eq!(CardSet::full_deck(3).len(), 12);
        assert!(CardSet::full_deck(3).contains(Card::new(Suit::Hearts, 2)));
        assert!(!CardSet::full_deck(3).contains(Card::new(Suit::Hearts, 3)));
    }
}
