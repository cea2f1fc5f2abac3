//! Generative observation Monte Carlo tree search for trick-taking card
//! games, with the supporting rules engines, tokenizer, generative models,
//! self-play training and tournament tooling.

pub mod bench;
pub(crate) mod binio;
pub mod game;
pub mod model;
pub mod neural;
pub mod policy;
pub mod search;
pub mod seeds;
pub mod selfplay;
pub mod tokenizer;
