use std::collections::HashMap;

use crate::tokenizer::Token;

/// Running statistics of one action edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChildStats {
    pub value_sum: f64,
    pub visits: u64,
}

impl ChildStats {
    pub fn mean(&self) -> f64 {
        self.value_sum / self.visits as f64
    }
}

/// A decision point of the search player, with its expanded actions in
/// action order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SearchNode {
    pub children: Vec<(Token, ChildStats)>,
}

impl SearchNode {
    pub fn child(&self, action: Token) -> Option<&ChildStats> {
        self.children
            .iter()
            .find(|(a, _)| *a == action)
            .map(|(_, s)| s)
    }

    pub fn child_mut(&mut self, action: Token) -> Option<&mut ChildStats> {
        self.children
            .iter_mut()
            .find(|(a, _)| *a == action)
            .map(|(_, s)| s)
    }

    pub fn total_visits(&self) -> u64 {
        self.children.iter().map(|(_, s)| s.visits).sum()
    }

    /// Highest mean value, then most visits, then first in action order.
    pub fn best(&self) -> Option<Token> {
        let mut best: Option<(Token, ChildStats)> = None;
        for &(a, s) in &self.children {
            let better = match best {
                None => true,
                Some((_, b)) => {
                    s.mean() > b.mean() || (s.mean() == b.mean() && s.visits > b.visits)
                }
            };
            if better {
                best = Some((a, s));
            }
        }
        best.map(|(a, _)| a)
    }
}

/// Search statistics keyed by the search player's observation history.
#[derive(Clone, Debug, Default)]
pub struct SearchTree {
    nodes: HashMap<Vec<Token>, SearchNode>,
}

impl SearchTree {
    pub fn new() -> SearchTree {
        SearchTree::default()
    }

    pub fn get(&self, h: &[Token]) -> Option<&SearchNode> {
        self.nodes.get(h)
    }

    pub fn get_mut(&mut self, h: &[Token]) -> Option<&mut SearchNode> {
        self.nodes.get_mut(h)
    }

    pub fn contains(&self, h: &[Token]) -> bool {
        self.nodes.contains_key(h)
    }

    pub fn insert(&mut self, h: Vec<Token>, node: SearchNode) {
        self.nodes.insert(h, node);
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes in history order, for stable output.
    pub fn sorted(&self) -> Vec<(&Vec<Token>, &SearchNode)> {
        let mut v: Vec<_> = self.nodes.iter().collect();
        v.sort_by(|a, b| a.0.cmp(b.0));
        v
    }
}
