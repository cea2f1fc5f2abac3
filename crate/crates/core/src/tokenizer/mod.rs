//! Observation tokens from one player's seat, history construction and
//! retrospective legality checks of finished histories.

mod analysis;
mod history;
mod verify;
mod vocab;

pub use analysis::{analyze, legal_plays, Analysis, Broken, Next};
pub use history::{
    action_events, build_history, deal_events, deal_history, observe, Event, HistoryError,
    HistoryRecorder, ObservationHistory,
};
pub use verify::{follow_suit_corruption, verify_history, IllegalReason, Verdict, VerifyError};
pub use vocab::{Token, TokenKind, Vocabulary};
