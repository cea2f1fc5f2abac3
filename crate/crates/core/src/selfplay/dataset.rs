use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::game::GameConfig;
use crate::model::{LabeledHistory, OutcomeSpace};
use crate::tokenizer::{ObservationHistory, Token, TokenKind, Vocabulary};

use super::SelfPlayError;

const HEADER: &str = "# gomcts-dataset v1";

/// One finished history from a generated game.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetRecord {
    pub iteration: u32,
    /// Whether the history belongs to the seat playing ArgmaxVal*.
    pub greedy: bool,
    pub outcome: usize,
    pub tokens: Vec<Token>,
}

impl DatasetRecord {
    /// The history, with the viewer read from its leading seat token.
    pub fn history(&self, game: &GameConfig) -> ObservationHistory {
        let viewer = match self.tokens.first().map(|&t| Vocabulary::new(game).kind(t)) {
            Some(TokenKind::Position(p)) => p as usize,
            _ => 0,
        };
        ObservationHistory::new(viewer, self.tokens.clone())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub game: GameConfig,
    pub records: Vec<DatasetRecord>,
}

fn format_err(line: usize, msg: impl std::fmt::Display) -> SelfPlayError {
    SelfPlayError::Dataset(format!("line {line}: {msg}"))
}

impl Dataset {
    pub fn new(game: &GameConfig) -> Dataset {
        Dataset {
            game: game.clone(),
            records: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labeled(&self) -> Vec<LabeledHistory> {
        self.records
            .iter()
            .map(|r| LabeledHistory {
                tokens: r.tokens.clone(),
                outcome: r.outcome,
            })
            .collect()
    }

    pub fn shuffle(&mut self, seed: u64) {
        self.records.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }

    /// Text format: a header with the game and manifest hashes, then one
    /// `iteration<TAB>greedy<TAB>outcome<TAB>tokens` line per record.
    pub fn write<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(
            w,
            "{HEADER} game={} tokens={} outcomes={}",
            self.game.id(),
            hex::encode(Vocabulary::new(&self.game).manifest_hash()),
            hex::encode(OutcomeSpace::new(&self.game).manifest_hash()),
        )?;
        for r in &self.records {
            let tokens: Vec<String> = r.tokens.iter().map(|t| t.to_string()).collect();
            writeln!(
                w,
                "{}\t{}\t{}\t{}",
                r.iteration,
                u8::from(r.greedy),
                r.outcome,
                tokens.join(" ")
            )?;
        }
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<Dataset, SelfPlayError> {
        let mut lines = BufReader::new(r).lines();
        let header = lines.next().ok_or_else(|| format_err(1, "empty file"))??;
        let fields: Vec<&str> = header
            .strip_prefix(HEADER)
            .ok_or_else(|| format_err(1, "not a dataset file"))?
            .split_whitespace()
            .collect();
        let field = |key: &str| {
            fields
                .iter()
                .find_map(|f| f.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
                .ok_or_else(|| format_err(1, format!("missing {key}")))
        };
        let game: GameConfig = field("game")?.parse().map_err(|e| format_err(1, e))?;
        let vocab = Vocabulary::new(&game);
        let outcomes = OutcomeSpace::new(&game);
        if field("tokens")? != hex::encode(vocab.manifest_hash()) {
            return Err(format_err(1, "token manifest mismatch"));
        }
        if field("outcomes")? != hex::encode(outcomes.manifest_hash()) {
            return Err(format_err(1, "outcome manifest mismatch"));
        }
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            let n = i + 2;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            if parts.len() != 4 {
                return Err(format_err(n, "expected four tab-separated fields"));
            }
            let iteration = parts[0].parse().map_err(|e| format_err(n, e))?;
            let greedy = match parts[1] {
                "0" => false,
                "1" => true,
                other => return Err(format_err(n, format!("greedy flag {other:?}"))),
            };
            let outcome: usize = parts[2].parse().map_err(|e| format_err(n, e))?;
            if outcome >= outcomes.len() {
                return Err(format_err(
                    n,
                    format!("outcome {outcome} outside the manifest"),
                ));
            }
            let tokens = parts[3]
                .split_whitespace()
                .map(|t| match t.parse::<Token>() {
                    Ok(t) if (t as usize) < vocab.size() => Ok(t),
                    _ => Err(format_err(n, format!("bad token {t:?}"))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            records.push(DatasetRecord {
                iteration,
                greedy,
                outcome,
                tokens,
            });
        }
        Ok(Dataset { game, records })
    }

    pub fn save_file(&self, path: &Path) -> Result<(), SelfPlayError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load_file(path: &Path) -> Result<Dataset, SelfPlayError> {
        Dataset::read(File::open(path)?)
    }
}
