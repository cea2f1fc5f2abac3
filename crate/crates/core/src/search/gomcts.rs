use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{legal_probs, GenerativeModel, ModelError, OutcomeValueFn};
use crate::tokenizer::{ObservationHistory, Token};

use super::adapter::{GameAdapter, Turn};
use super::tree::{ChildStats, SearchNode, SearchTree};
use super::{SearchError, SearchParams};

/// How a run's walk stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunEnd {
    Terminal,
    /// Rollout budget or context exhausted before the end of the deal.
    Cutoff,
    /// The generated tokens stopped describing a possible deal, or the
    /// model had no distribution for them.
    Broken,
}

/// How a run was scored.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunKind {
    Legal,
    Illegal,
    Cutoff,
}

impl fmt::Display for RunKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunKind::Legal => "legal",
            RunKind::Illegal => "illegal",
            RunKind::Cutoff => "cutoff",
        })
    }
}

/// One line of the search trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord {
    pub run: usize,
    pub kind: RunKind,
    /// Value backed up, or the penalty subtracted for illegal runs.
    pub leaf_value: f64,
    /// Tokens generated past the root.
    pub depth: usize,
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{};{};{};{}",
            self.run, self.kind, self.leaf_value, self.depth
        )
    }
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    pub action: Token,
    pub root: Vec<Token>,
    pub tree: SearchTree,
    pub trace: Vec<TraceRecord>,
    /// Runs stopped because the history reached the model's context.
    pub overflow_runs: usize,
}

impl SearchResult {
    pub fn root_node(&self) -> Option<&SearchNode> {
        self.tree.get(&self.root)
    }

    pub fn count(&self, kind: RunKind) -> usize {
        self.trace.iter().filter(|r| r.kind == kind).count()
    }
}

/// Mean value plus `c * sqrt(ln(total_visits) / visits)`.
pub fn uct_score(s: &ChildStats, total_visits: u64, c: f64) -> f64 {
    s.mean() + c * ((total_visits as f64).ln() / s.visits as f64).sqrt()
}

/// The child with the highest [`uct_score`]; ties go to the first child in
/// action order.
pub fn select_uct(node: &SearchNode, c: f64) -> Token {
    let total = node.total_visits();
    let mut best = None;
    let mut best_score = f64::NEG_INFINITY;
    for (a, s) in &node.children {
        let score = uct_score(s, total, c);
        if best.is_none() || score > best_score {
            best = Some(*a);
            best_score = score;
        }
    }
    best.expect("selection needs at least one child")
}

/// Adds the decision point `h` to the tree with one child per legal action
/// whose legal-normalized probability exceeds `threshold`, each starting at
/// (predicted value after the action, 1 visit). When nothing passes, the
/// root keeps every legal action and other nodes keep the most probable.
#[allow(clippy::too_many_arguments)]
pub fn expand<M: GenerativeModel + ?Sized>(
    tree: &mut SearchTree,
    h: &ObservationHistory,
    legal: &[Token],
    model: &M,
    threshold: f64,
    values: &[f64],
    is_root: bool,
) -> Result<(), ModelError> {
    let dist = model.next_obs_dist(h)?;
    let p = legal_probs(dist.probs(), legal);
    let mut chosen: Vec<Token> = legal
        .iter()
        .zip(&p)
        .filter(|(_, &q)| q > threshold)
        .map(|(&a, _)| a)
        .collect();
    if chosen.is_empty() {
        if is_root {
            chosen = legal.to_vec();
        } else {
            let mut best = 0;
            for i in 1..legal.len() {
                if p[i] > p[best] {
                    best = i;
                }
            }
            chosen.push(legal[best]);
        }
    }
    let mut node = SearchNode::default();
    for a in chosen {
        let value = model.outcome_dist(&h.with(a))?.expect(values);
        node.children.push((
            a,
            ChildStats {
                value_sum: value,
                visits: 1,
            },
        ));
    }
    tree.insert(h.tokens().to_vec(), node);
    Ok(())
}

fn sample_next<M, G, R>(
    h: &mut ObservationHistory,
    cursor: &mut G::Cursor,
    model: &M,
    game: &G,
    rng: &mut R,
) -> Result<Option<RunEnd>, ModelError>
where
    M: GenerativeModel + ?Sized,
    G: GameAdapter,
    R: Rng + ?Sized,
{
    if h.len() >= model.context_length() {
        return Ok(Some(RunEnd::Cutoff));
    }
    match model.next_obs_dist(h) {
        Ok(d) => {
            let t = d.sample(rng);
            h.push(t);
            game.push(cursor, t);
            Ok(None)
        }
        Err(ModelError::DistributionUndefined) | Err(ModelError::Terminal) => {
            Ok(Some(RunEnd::Broken))
        }
        Err(ModelError::ContextOverflow { .. }) => Ok(Some(RunEnd::Cutoff)),
        Err(e) => Err(e),
    }
}

/// Samples tokens from the model, including the search player's own
/// moves, until the deal ends or the player has come to move `n_steps`
/// more times.
pub fn rollout<M, G, R>(
    h: &mut ObservationHistory,
    cursor: &mut G::Cursor,
    model: &M,
    game: &G,
    n_steps: usize,
    rng: &mut R,
) -> Result<RunEnd, ModelError>
where
    M: GenerativeModel + ?Sized,
    G: GameAdapter,
    R: Rng + ?Sized,
{
    let mut steps = n_steps;
    loop {
        match game.turn(cursor) {
            Turn::Terminal => return Ok(RunEnd::Terminal),
            Turn::Broken => return Ok(RunEnd::Broken),
            _ => {}
        }
        if steps == 0 {
            return Ok(RunEnd::Cutoff);
        }
        if let Some(end) = sample_next(h, cursor, model, game, rng)? {
            return Ok(end);
        }
        if matches!(game.turn(cursor), Turn::Player(_)) {
            steps -= 1;
        }
    }
}

/// Scores a finished run and updates the traversed edges. Legal terminal
/// runs add their outcome value, cutoffs add the model's predicted value,
/// and illegal runs subtract `mu` without counting a visit.
#[allow(clippy::too_many_arguments)]
pub fn backup<M, G>(
    tree: &mut SearchTree,
    path: &[(Vec<Token>, Token)],
    end: RunEnd,
    h: &ObservationHistory,
    cursor: &G::Cursor,
    model: &M,
    mu: f64,
    player: usize,
    game: &G,
    v: &OutcomeValueFn,
    values: &[f64],
) -> Result<(RunKind, f64), ModelError>
where
    M: GenerativeModel + ?Sized,
    G: GameAdapter,
{
    let scored = match end {
        RunEnd::Terminal if game.is_legal(h) => {
            Some((RunKind::Legal, game.terminal_value(cursor, v, player)))
        }
        RunEnd::Terminal | RunEnd::Broken => None,
        RunEnd::Cutoff => match model.outcome_dist(h) {
            Ok(d) => Some((RunKind::Cutoff, d.expect(values))),
            Err(ModelError::DistributionUndefined) => None,
            Err(e) => return Err(e),
        },
    };
    for (key, a) in path {
        let stats = tree
            .get_mut(key)
            .and_then(|n| n.child_mut(*a))
            .expect("path edges are in the tree");
        match scored {
            Some((_, value)) => {
                stats.value_sum += value;
                stats.visits += 1;
            }
            None => stats.value_sum -= mu,
        }
    }
    Ok(scored.unwrap_or((RunKind::Illegal, -mu)))
}

/// Searches from `root` for its viewer and returns the action with the
/// best mean value.
pub fn go_mcts<M, G>(
    root: &ObservationHistory,
    model: &M,
    game: &G,
    params: &SearchParams,
    v: &OutcomeValueFn,
) -> Result<SearchResult, SearchError>
where
    M: GenerativeModel + ?Sized,
    G: GameAdapter,
{
    params.validate()?;
    let player = root.viewer();
    let root_cursor = game.start(root);
    let legal = match game.turn(&root_cursor) {
        Turn::Player(legal) => legal,
        _ => return Err(SearchError::NotPlayerTurn),
    };
    let mut tree = SearchTree::new();
    if legal.is_empty() {
        return Err(SearchError::NoLegalAction);
    }
    if legal.len() == 1 {
        return Ok(SearchResult {
            action: legal[0],
            root: root.tokens().to_vec(),
            tree,
            trace: Vec::new(),
            overflow_runs: 0,
        });
    }
    let values = model.outcomes().values(v, player);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    expand(
        &mut tree,
        root,
        &legal,
        model,
        params.expand_threshold,
        &values,
        true,
    )?;
    let mut trace = Vec::with_capacity(params.n_runs);
    let mut overflow_runs = 0;
    for run in 0..params.n_runs {
        let mut h = root.clone();
        let mut cursor = root_cursor.clone();
        let mut path: Vec<(Vec<Token>, Token)> = Vec::new();
        let end = loop {
            match game.turn(&cursor) {
                Turn::Terminal => break RunEnd::Terminal,
                Turn::Broken => break RunEnd::Broken,
                Turn::Other => {
                    if let Some(end) = sample_next(&mut h, &mut cursor, model, game, &mut rng)? {
                        break end;
                    }
                }
                Turn::Player(legal) => match tree.get(h.tokens()) {
                    Some(node) => {
                        let a = select_uct(node, params.exploration_c);
                        path.push((h.tokens().to_vec(), a));
                        h.push(a);
                        game.push(&mut cursor, a);
                    }
                    None => {
                        let ok = expand(
                            &mut tree,
                            &h,
                            &legal,
                            model,
                            params.expand_threshold,
                            &values,
                            false,
                        );
                        match ok {
                            Ok(()) => {}
                            Err(ModelError::DistributionUndefined) => break RunEnd::Broken,
                            Err(ModelError::ContextOverflow { .. }) => break RunEnd::Cutoff,
                            Err(e) => return Err(e.into()),
                        }
                        break rollout(
                            &mut h,
                            &mut cursor,
                            model,
                            game,
                            params.n_rollout_steps,
                            &mut rng,
                        )?;
                    }
                },
            }
        };
        if end == RunEnd::Cutoff && h.len() >= model.context_length() {
            overflow_runs += 1;
        }
        let (kind, leaf_value) = backup(
            &mut tree,
            &path,
            end,
            &h,
            &cursor,
            model,
            params.illegal_penalty_mu,
            player,
            game,
            v,
            &values,
        )?;
        trace.push(TraceRecord {
            run,
            kind,
            leaf_value,
            depth: h.len() - root.len(),
        });
    }
    let action = tree
        .get(root.tokens())
        .and_then(SearchNode::best)
        .expect("root was expanded");
    Ok(SearchResult {
        action,
        root: root.tokens().to_vec(),
        tree,
        trace,
        overflow_runs,
    })
}
