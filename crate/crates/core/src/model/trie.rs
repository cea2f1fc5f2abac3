use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use smallvec::SmallVec;

use crate::binio;
use crate::game::GameConfig;
use crate::tokenizer::{ObservationHistory, Token, Vocabulary};

use super::{
    check_context, GenerativeModel, ModelError, NextObsDistribution, OutcomeDistribution,
    OutcomeSpace,
};

const MAGIC: &[u8; 8] = b"GOMCTRIE";
const VERSION: u32 = 1;

/// A finished history with the id of the outcome it ended in.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LabeledHistory {
    pub tokens: Vec<Token>,
    pub outcome: usize,
}

/// Sorted `(key, count)` pairs; most nodes hold a single entry.
type Counts = SmallVec<[(u16, u32); 1]>;

fn bump(counts: &mut Counts, key: u16) {
    match counts.binary_search_by_key(&key, |&(k, _)| k) {
        Ok(i) => counts[i].1 += 1,
        Err(i) => counts.insert(i, (key, 1)),
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
struct Node {
    /// Child context extended by one more preceding token.
    children: Counts,
    next: Counts,
    outcomes: Counts,
    next_total: u32,
    outcome_total: u32,
}

/// Suffix-context count model.
///
/// Each node stands for a context (the last `d` tokens of a history, where
/// the end-of-sequence id stands in before the first token) and
/// counts which token followed it and which outcome the game ended in.
/// Predictions interpolate from the empty context down to the longest
/// stored match, mixing each level's count ratio with the shorter-context
/// estimate by weight `c / (c + smoothing)`, starting from uniform.
#[derive(Clone, Debug)]
pub struct TrieModel {
    config: GameConfig,
    vocab: Vocabulary,
    outcomes: OutcomeSpace,
    smoothing: f64,
    max_context: usize,
    nodes: Vec<Node>,
}

/// Counts every context suffix of length up to `max_context` over the
/// dataset.
pub fn fit_trie(
    config: &GameConfig,
    dataset: &[LabeledHistory],
    smoothing: f64,
    max_context: usize,
) -> Result<TrieModel, ModelError> {
    if dataset.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let mut model = TrieModel {
        config: config.clone(),
        vocab: Vocabulary::new(config),
        outcomes: OutcomeSpace::new(config),
        smoothing,
        max_context,
        nodes: vec![Node::default()],
    };
    model.extend(dataset)?;
    Ok(model)
}

impl TrieModel {
    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn max_context(&self) -> usize {
        self.max_context
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn set_smoothing(&mut self, smoothing: f64) {
        self.smoothing = smoothing;
    }

    /// Adds more histories to the counts.
    pub fn extend(&mut self, dataset: &[LabeledHistory]) -> Result<(), ModelError> {
        for record in dataset {
            self.check(record)?;
        }
        for record in dataset {
            self.insert(record);
        }
        Ok(())
    }

    /// Drops every context seen fewer than `min_count` times. A context is
    /// never seen more often than its shorter parent, so the kept nodes stay
    /// connected to the root.
    pub fn prune(&mut self, min_count: u32) {
        if min_count <= 1 {
            return;
        }
        let mut remap = vec![u32::MAX; self.nodes.len()];
        let mut order = vec![0usize];
        remap[0] = 0;
        let mut i = 0;
        while i < order.len() {
            for &(_, c) in &self.nodes[order[i]].children {
                if self.nodes[c as usize].outcome_total >= min_count {
                    remap[c as usize] = order.len() as u32;
                    order.push(c as usize);
                }
            }
            i += 1;
        }
        let mut nodes = Vec::with_capacity(order.len());
        for &old in &order {
            let mut node = std::mem::take(&mut self.nodes[old]);
            node.children.retain(|e| remap[e.1 as usize] != u32::MAX);
            for e in node.children.iter_mut() {
                e.1 = remap[e.1 as usize];
            }
            nodes.push(node);
        }
        self.nodes = nodes;
    }

    fn check(&self, record: &LabeledHistory) -> Result<(), ModelError> {
        if record.outcome >= self.outcomes.len() {
            return Err(ModelError::BadLabel {
                label: record.outcome,
                num_outcomes: self.outcomes.len(),
            });
        }
        if let Some(&token) = record
            .tokens
            .iter()
            .find(|&&t| t as usize >= self.vocab.size())
        {
            return Err(ModelError::BadToken {
                token,
                vocab_size: self.vocab.size(),
            });
        }
        if record.tokens.len() > self.vocab.context_length() {
            return Err(ModelError::ContextOverflow {
                len: record.tokens.len(),
                max: self.vocab.context_length(),
            });
        }
        Ok(())
    }

    fn child_or_insert(&mut self, node: usize, token: Token) -> usize {
        let children = &self.nodes[node].children;
        if let Ok(i) = children.binary_search_by_key(&token, |&(k, _)| k) {
            return children[i].1 as usize;
        }
        let id = self.nodes.len();
        self.nodes.push(Node::default());
        let children = &mut self.nodes[node].children;
        let pos = children
            .binary_search_by_key(&token, |&(k, _)| k)
            .unwrap_err();
        children.insert(pos, (token, id as u32));
        id
    }

    fn child(&self, node: usize, token: Token) -> Option<usize> {
        let children = &self.nodes[node].children;
        children
            .binary_search_by_key(&token, |&(k, _)| k)
            .ok()
            .map(|i| children[i].1 as usize)
    }

    /// Token `d` places before position `n`, with the start marker at -1.
    fn context_token(&self, tokens: &[Token], n: usize, d: usize) -> Token {
        if d > n {
            self.vocab.end_of_sequence()
        } else {
            tokens[n - d]
        }
    }

    fn insert(&mut self, record: &LabeledHistory) {
        let tokens = &record.tokens;
        let label = record.outcome as u16;
        for n in 0..=tokens.len() {
            let mut node = 0;
            let depth = (n + 1).min(self.max_context);
            for d in 0..=depth {
                if d > 0 {
                    let t = self.context_token(tokens, n, d);
                    node = self.child_or_insert(node, t);
                }
                let entry = &mut self.nodes[node];
                bump(&mut entry.outcomes, label);
                entry.outcome_total += 1;
                if n < tokens.len() {
                    bump(&mut entry.next, tokens[n]);
                    entry.next_total += 1;
                }
            }
        }
    }

    /// Nodes matching ever longer suffixes of `tokens`, starting at the root.
    fn path(&self, tokens: &[Token]) -> Vec<usize> {
        let mut path = vec![0];
        let mut node = 0;
        for d in 1..=(tokens.len() + 1).min(self.max_context) {
            match self.child(node, self.context_token(tokens, tokens.len(), d)) {
                Some(c) => {
                    node = c;
                    path.push(c);
                }
                None => break,
            }
        }
        path
    }

    fn interpolate<F>(&self, path: &[usize], size: usize, counts: F) -> Vec<f64>
    where
        F: Fn(&Node) -> (&Counts, u32),
    {
        let mut p = vec![1.0 / size as f64; size];
        for &n in path {
            let (entries, total) = counts(&self.nodes[n]);
            if total == 0 {
                continue;
            }
            let total = total as f64;
            let lambda = if self.smoothing > 0.0 {
                total / (total + self.smoothing)
            } else {
                1.0
            };
            for x in p.iter_mut() {
                *x *= 1.0 - lambda;
            }
            for &(k, c) in entries {
                p[k as usize] += lambda * c as f64 / total;
            }
        }
        p
    }

    pub fn save<W: Write>(&self, w: &mut W) -> Result<(), ModelError> {
        binio::write_header(w, MAGIC, VERSION)?;
        binio::write_config(w, &self.config)?;
        w.write_all(&self.vocab.manifest_hash())?;
        w.write_all(&self.outcomes.manifest_hash())?;
        w.write_f64::<LE>(self.smoothing)?;
        w.write_u32::<LE>(self.max_context as u32)?;
        w.write_u32::<LE>(self.nodes.len() as u32)?;
        for node in &self.nodes {
            for counts in [&node.children, &node.next, &node.outcomes] {
                w.write_u32::<LE>(counts.len() as u32)?;
                for &(k, c) in counts.iter() {
                    w.write_u16::<LE>(k)?;
                    w.write_u32::<LE>(c)?;
                }
            }
        }
        Ok(())
    }

    pub fn load<R: Read>(r: &mut R) -> Result<TrieModel, ModelError> {
        let version = binio::read_header(r, MAGIC).map_err(ModelError::Format)?;
        if version != VERSION {
            return Err(ModelError::Format(format!(
                "unsupported trie version {version}"
            )));
        }
        let config = binio::read_config(r).map_err(ModelError::Format)?;
        let vocab = Vocabulary::new(&config);
        let outcomes = OutcomeSpace::new(&config);
        if binio::read_hash(r)? != vocab.manifest_hash() {
            return Err(ModelError::ManifestMismatch("token"));
        }
        if binio::read_hash(r)? != outcomes.manifest_hash() {
            return Err(ModelError::ManifestMismatch("outcome"));
        }
        let smoothing = r.read_f64::<LE>()?;
        let max_context = r.read_u32::<LE>()? as usize;
        let count = r.read_u32::<LE>()? as usize;
        let mut nodes = Vec::with_capacity(count.min(1 << 24));
        for _ in 0..count {
            let mut node = Node::default();
            for (slot, limit) in [(0, count), (1, vocab.size()), (2, outcomes.len())] {
                let n = r.read_u32::<LE>()? as usize;
                let mut counts = Counts::new();
                for _ in 0..n {
                    let k = r.read_u16::<LE>()?;
                    let c = r.read_u32::<LE>()?;
                    let bound = if slot == 0 { vocab.size() } else { limit };
                    if k as usize >= bound || (slot == 0 && c as usize >= count) {
                        return Err(ModelError::Format("count entry out of range".into()));
                    }
                    counts.push((k, c));
                }
                match slot {
                    0 => node.children = counts,
                    1 => {
                        node.next_total = counts.iter().map(|&(_, c)| c).sum();
                        node.next = counts;
                    }
                    _ => {
                        node.outcome_total = counts.iter().map(|&(_, c)| c).sum();
                        node.outcomes = counts;
                    }
                }
            }
            nodes.push(node);
        }
        if nodes.is_empty() {
            return Err(ModelError::Format("trie without a root".into()));
        }
        Ok(TrieModel {
            config,
            vocab,
            outcomes,
            smoothing,
            max_context,
            nodes,
        })
    }

    pub fn save_file(&self, path: &Path) -> Result<(), ModelError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.save(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load_file(path: &Path) -> Result<TrieModel, ModelError> {
        TrieModel::load(&mut BufReader::new(File::open(path)?))
    }
}

impl PartialEq for TrieModel {
    fn eq(&self, other: &TrieModel) -> bool {
        self.config == other.config
            && self.smoothing == other.smoothing
            && self.max_context == other.max_context
            && self.nodes == other.nodes
    }
}

impl GenerativeModel for TrieModel {
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
        let path = self.path(h.tokens());
        let p = self.interpolate(&path, self.vocab.size(), |n| (&n.next, n.next_total));
        NextObsDistribution::from_weights(p)
    }

    fn outcome_dist(&self, h: &ObservationHistory) -> Result<OutcomeDistribution, ModelError> {
        if h.len() > self.context_length() {
            return Err(ModelError::ContextOverflow {
                len: h.len(),
                max: self.context_length(),
            });
        }
        let path = self.path(h.tokens());
        let p = self.interpolate(&path, self.outcomes.len(), |n| {
            (&n.outcomes, n.outcome_total)
        });
        OutcomeDistribution::from_weights(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> GameConfig {
        GameConfig::mini(3)
    }

    #[test]
    fn empty_dataset_is_an_error() {
        assert!(matches!(
            fit_trie(&config(), &[], 1.0, 8),
            Err(ModelError::EmptyDataset)
        ));
    }

    #[test]
    fn single_history_replays_without_smoothing() {
        let tokens: Vec<Token> = vec![12, 0, 4, 9, 13, 0, 1, 2, 3];
        let data = [LabeledHistory {
            tokens: tokens.clone(),
            outcome: 7,
        }];
        let m = fit_trie(&config(), &data, 0.0, 20).unwrap();
        for n in 0..tokens.len() {
            let h = ObservationHistory::new(0, tokens[..n].to_vec());
            assert_eq!(m.next_obs_dist(&h).unwrap().prob(tokens[n]), 1.0);
            assert_eq!(m.outcome_dist(&h).unwrap().prob(7), 1.0);
        }
    }

    #[test]
    fn count_ratio_under_heavy_context_weight() {
        let mut data = Vec::new();
        for i in 0..100 {
            let next = if i < 90 { 3 } else { 4 };
            data.push(LabeledHistory {
                tokens: vec![1, 2, next],
                outcome: 0,
            });
        }
        let m = fit_trie(&config(), &data, 1e-6, 4).unwrap();
        let p = m
            .next_obs_dist(&ObservationHistory::new(0, vec![1, 2]))
            .unwrap();
        assert!((p.prob(3) - 0.9).abs() < 1e-6);
    }

    #[test]
    fn unseen_context_backs_off_to_unigram() {
        let data = [LabeledHistory {
            tokens: vec![1, 2, 3, 1, 5],
            outcome: 0,
        }];
        let m = fit_trie(&config(), &data, 0.0, 4).unwrap();
        let unseen = m
            .next_obs_dist(&ObservationHistory::new(0, vec![7]))
            .unwrap();
        assert_eq!(unseen.prob(1), 0.4);
        assert_eq!(unseen.prob(5), 0.2);
        let first = m
            .next_obs_dist(&ObservationHistory::new(0, vec![]))
            .unwrap();
        assert_eq!(first.prob(1), 1.0);
        // A seen one-token suffix uses its own counts.
        let after_one = m
            .next_obs_dist(&ObservationHistory::new(0, vec![9, 9, 1]))
            .unwrap();
        assert_eq!(after_one.prob(2), 0.5);
        assert_eq!(after_one.prob(5), 0.5);
    }

    #[test]
    fn smoothing_keeps_every_token_possible() {
        let data = [LabeledHistory {
            tokens: vec![1, 2, 3],
            outcome: 0,
        }];
        let m = fit_trie(&config(), &data, 1.0, 4).unwrap();
        let p = m
            .next_obs_dist(&ObservationHistory::new(0, vec![1, 2]))
            .unwrap();
        assert!(p.probs().iter().all(|&x| x > 0.0));
        assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pruning_keeps_shared_contexts_only() {
        let mut data = vec![
            LabeledHistory {
                tokens: vec![1, 2, 3],
                outcome: 0,
            };
            3
        ];
        data.push(LabeledHistory {
            tokens: vec![1, 2, 4],
            outcome: 1,
        });
        let full = fit_trie(&config(), &data, 0.0, 4).unwrap();
        let mut pruned = full.clone();
        pruned.prune(2);
        assert!(pruned.num_nodes() < full.num_nodes());
        let shared = ObservationHistory::new(0, vec![1, 2]);
        assert_eq!(
            pruned.next_obs_dist(&shared).unwrap(),
            full.next_obs_dist(&shared).unwrap()
        );
        assert_eq!(
            pruned.outcome_dist(&shared).unwrap(),
            full.outcome_dist(&shared).unwrap()
        );
        let mut unchanged = full.clone();
        unchanged.prune(1);
        assert_eq!(unchanged, full);
    }

    #[test]
    fn save_load_round_trip() {
        let data = [
            LabeledHistory {
                tokens: vec![12, 0, 4, 9, 13, 0],
                outcome: 3,
            },
            LabeledHistory {
                tokens: vec![13, 1, 2, 3, 12, 1],
                outcome: 5,
            },
        ];
        let m = fit_trie(&config(), &data, 0.5, 6).unwrap();
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        let back = TrieModel::load(&mut buf.as_slice()).unwrap();
        assert_eq!(m, back);
        buf[20] ^= 0xff;
        assert!(TrieModel::load(&mut buf.as_slice()).is_err());
    }
}
