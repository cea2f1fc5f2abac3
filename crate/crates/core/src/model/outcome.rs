use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::game::{outcome_from_taken, GameConfig, Outcome, NUM_PLAYERS};

/// Every final point allocation a deal can end in, with stable ids.
///
/// Hearts each carry one point and the penalty spade goes to one player,
/// so the raw allocations are the compositions of the heart count into four
/// parts times the spade owner. The moon rule rewrites the all-points
/// allocations, and identical point vectors share one id.
#[derive(Clone, Debug)]
pub struct OutcomeSpace {
    points: Vec<[i32; NUM_PLAYERS]>,
    index: HashMap<[i32; NUM_PLAYERS], usize>,
}

impl OutcomeSpace {
    pub fn new(config: &GameConfig) -> OutcomeSpace {
        let hearts = config.ranks_per_suit as i32;
        let mut all = BTreeSet::new();
        for owner in 0..NUM_PLAYERS {
            for a in 0..=hearts {
                for b in 0..=hearts - a {
                    for c in 0..=hearts - a - b {
                        let mut taken = [a, b, c, hearts - a - b - c];
                        taken[owner] += config.penalty_spade_points;
                        all.insert(outcome_from_taken(config, taken).card_points);
                    }
                }
            }
        }
        let points: Vec<_> = all.into_iter().collect();
        let index = points.iter().enumerate().map(|(i, p)| (*p, i)).collect();
        OutcomeSpace { points, index }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self, id: usize) -> [i32; NUM_PLAYERS] {
        self.points[id]
    }

    pub fn id(&self, outcome: &Outcome) -> Option<usize> {
        self.index.get(&outcome.card_points).copied()
    }

    pub fn id_of_points(&self, points: [i32; NUM_PLAYERS]) -> Option<usize> {
        self.index.get(&points).copied()
    }

    /// Text manifest, one `id<TAB>points` line per outcome.
    pub fn manifest(&self) -> String {
        let mut out = String::from("# gomcts-outcomes v1\n");
        for (i, p) in self.points.iter().enumerate() {
            let _ = writeln!(out, "{i}\t{},{},{},{}", p[0], p[1], p[2], p[3]);
        }
        out
    }

    pub fn manifest_hash(&self) -> [u8; 32] {
        Sha256::digest(self.manifest().as_bytes()).into()
    }

    /// Value of every outcome for `player`.
    pub fn values(&self, v: &OutcomeValueFn, player: usize) -> Vec<f64> {
        self.points.iter().map(|p| v.value(p, player)).collect()
    }
}

/// Scalar value of a final point allocation for one player.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum OutcomeValueFn {
    /// Own points against the opponents' mean, divided by `divisor`. When
    /// `minimize` is set (Hearts) fewer points are better.
    Differential { divisor: f64, minimize: bool },
    /// 1 when the player did at least as well as every opponent, else 0.
    Binary { minimize: bool },
    /// `scale * inner + offset`.
    Affine {
        inner: Box<OutcomeValueFn>,
        scale: f64,
        offset: f64,
    },
}

impl OutcomeValueFn {
    /// Differential value normalized by the deal's total points (26 in
    /// Hearts).
    pub fn for_config(config: &GameConfig) -> OutcomeValueFn {
        OutcomeValueFn::Differential {
            divisor: config.total_points() as f64,
            minimize: true,
        }
    }

    pub fn affine(self, scale: f64, offset: f64) -> OutcomeValueFn {
        OutcomeValueFn::Affine {
            inner: Box::new(self),
            scale,
            offset,
        }
    }

    pub fn value(&self, points: &[i32; NUM_PLAYERS], player: usize) -> f64 {
        match self {
            OutcomeValueFn::Differential { divisor, minimize } => {
                let own = points[player] as f64;
                let others: f64 = (0..NUM_PLAYERS)
                    .filter(|&p| p != player)
                    .map(|p| points[p] as f64)
                    .sum::<f64>()
                    / (NUM_PLAYERS - 1) as f64;
                let d = if *minimize {
                    others - own
                } else {
                    own - others
                };
                d / divisor
            }
            OutcomeValueFn::Binary { minimize } => {
                let own = points[player];
                let ok = (0..NUM_PLAYERS).filter(|&p| p != player).all(|p| {
                    if *minimize {
                        own <= points[p]
                    } else {
                        own >= points[p]
                    }
                });
                if ok {
                    1.0
                } else {
                    0.0
                }
            }
            OutcomeValueFn::Affine {
                inner,
                scale,
                offset,
            } => scale * inner.value(points, player) + offset,
        }
    }
}
