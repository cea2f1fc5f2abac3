use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::game::{GameConfig, GameState, NUM_PLAYERS};
use crate::policy::{play_deal, Agent};
use crate::seeds::derive_seed;

/// Seat masks with both sides present: bit `s` set means seat `s` is A.
pub const ASSIGNMENTS: [u8; 14] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14];

pub fn is_a(mask: u8, seat: usize) -> bool {
    mask >> seat & 1 == 1
}

/// Number of A seats in an assignment.
pub fn a_count(mask: u8) -> usize {
    mask.count_ones() as usize
}

/// One deal played under all fourteen assignments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchResult {
    pub index: u32,
    pub deal_seed: u64,
    /// Final points per seat, one row per entry of `ASSIGNMENTS`.
    pub points: [[i32; NUM_PLAYERS]; 14],
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Timing {
    pub total: Duration,
    pub decisions: u64,
}

impl Timing {
    pub fn mean_ms(&self) -> Option<f64> {
        (self.decisions > 0).then(|| self.total.as_secs_f64() * 1e3 / self.decisions as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TournamentResult {
    pub game: GameConfig,
    pub seed: u64,
    pub matches: Vec<MatchResult>,
    /// Matches that failed, with the reason; they are left out of the
    /// statistics.
    pub failures: Vec<(u32, String)>,
    /// Per-decision wall-clock time for A and B, when measured.
    pub timing: Option<[Timing; 2]>,
}

/// Plays `num_matches` deals, each under the fourteen mixed seatings of
/// agents A and B. Every assignment of a match starts from the same deal;
/// seat rngs depend only on the seed, match, assignment and seat.
pub fn run_tournament(
    game: &GameConfig,
    a: &dyn Agent,
    b: &dyn Agent,
    num_matches: usize,
    seed: u64,
    measure_time: bool,
) -> TournamentResult {
    type Played = Result<(MatchResult, [Timing; 2]), String>;
    let outcomes: Vec<Played> = (0..num_matches)
        .into_par_iter()
        .map(|m| {
            let deal_seed = derive_seed(seed, &[m as u64]);
            let deal = GameState::new_deal_indexed(game.clone(), deal_seed, m as u32)
                .map_err(|e| e.to_string())?;
            let mut points = [[0; NUM_PLAYERS]; 14];
            let mut timing = [Timing::default(); 2];
            for (k, &mask) in ASSIGNMENTS.iter().enumerate() {
                let agents: [&dyn Agent; NUM_PLAYERS] =
                    std::array::from_fn(|s| if is_a(mask, s) { a } else { b });
                let mut rngs = std::array::from_fn(|s| {
                    ChaCha8Rng::seed_from_u64(derive_seed(deal_seed, &[mask as u64, s as u64]))
                });
                let played = play_deal(&deal, agents, &mut rngs)
                    .map_err(|e| format!("assignment {mask:04b}: {e}"))?;
                points[k] = played.outcome.card_points;
                for s in 0..NUM_PLAYERS {
                    let side = if is_a(mask, s) { 0 } else { 1 };
                    timing[side].total += played.think_time[s];
                    timing[side].decisions += played.decisions[s] as u64;
                }
            }
            Ok((
                MatchResult {
                    index: m as u32,
                    deal_seed,
                    points,
                },
                timing,
            ))
        })
        .collect();
    let mut result = TournamentResult {
        game: game.clone(),
        seed,
        matches: Vec::new(),
        failures: Vec::new(),
        timing: measure_time.then(|| [Timing::default(); 2]),
    };
    for (m, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok((r, t)) => {
                result.matches.push(r);
                if let Some(total) = &mut result.timing {
                    for side in 0..2 {
                        total[side].total += t[side].total;
                        total[side].decisions += t[side].decisions;
                    }
                }
            }
            Err(e) => result.failures.push((m as u32, e)),
        }
    }
    result
}

/// Which assignments a statistic covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    All,
    /// Assignments with this many A seats (3, 2 or 1).
    ACount(usize),
}

impl Split {
    pub const COLUMNS: [Split; 4] = [
        Split::All,
        Split::ACount(3),
        Split::ACount(2),
        Split::ACount(1),
    ];

    pub fn contains(self, mask: u8) -> bool {
        match self {
            Split::All => true,
            Split::ACount(n) => a_count(mask) == n,
        }
    }

    pub fn label(self) -> String {
        match self {
            Split::All => "All".to_string(),
            Split::ACount(n) => format!("{n}A/{}B", NUM_PLAYERS - n),
        }
    }
}

impl TournamentResult {
    /// Mean points per seat-game for A and B over the assignments in
    /// `split`.
    pub fn side_means(&self, split: Split) -> (f64, f64) {
        let (mut sa, mut na, mut sb, mut nb) = (0i64, 0u64, 0i64, 0u64);
        for m in &self.matches {
            for (k, &mask) in ASSIGNMENTS.iter().enumerate() {
                if !split.contains(mask) {
                    continue;
                }
                for s in 0..NUM_PLAYERS {
                    let p = m.points[k][s] as i64;
                    if is_a(mask, s) {
                        sa += p;
                        na += 1;
                    } else {
                        sb += p;
                        nb += 1;
                    }
                }
            }
        }
        let mean = |s: i64, n: u64| {
            if n == 0 {
                f64::NAN
            } else {
                s as f64 / n as f64
            }
        };
        (mean(sa, na), mean(sb, nb))
    }

    /// Per deal, the mean over assignments of (mean A points minus mean B
    /// points). Negative favours A, since points are bad. Sums are kept in
    /// integers scaled by 6 (divisible by every side size), so a deal on
    /// which both sides fare the same gives exactly zero.
    pub fn deal_deltas(&self) -> Vec<f64> {
        self.matches
            .iter()
            .map(|m| {
                let total: i64 = ASSIGNMENTS
                    .iter()
                    .enumerate()
                    .map(|(k, &mask)| {
                        let na = a_count(mask) as i64;
                        let (mut pa, mut pb) = (0i64, 0i64);
                        for s in 0..NUM_PLAYERS {
                            if is_a(mask, s) {
                                pa += m.points[k][s] as i64;
                            } else {
                                pb += m.points[k][s] as i64;
                            }
                        }
                        6 * pa / na - 6 * pb / (NUM_PLAYERS as i64 - na)
                    })
                    .sum();
                total as f64 / (6 * ASSIGNMENTS.len()) as f64
            })
            .collect()
    }

    pub fn mean_delta(&self) -> f64 {
        let d = self.deal_deltas();
        d.iter().sum::<f64>() / d.len() as f64
    }

    pub fn wilcoxon(&self) -> super::WilcoxonResult {
        super::wilcoxon_signed_rank(&self.deal_deltas())
    }
}
