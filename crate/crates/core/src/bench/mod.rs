//! Seating-permutation tournaments and paired significance testing.

mod result;
mod tournament;
mod wilcoxon;

pub use tournament::{
    a_count, is_a, run_tournament, MatchResult, Split, Timing, TournamentResult, ASSIGNMENTS,
};
pub use wilcoxon::{
    signed_ranks, wilcoxon_signed_rank, WilcoxonMethod, WilcoxonResult, EXACT_LIMIT,
};
