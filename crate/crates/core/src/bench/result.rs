use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::time::Duration;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::tournament::{MatchResult, Split, Timing, TournamentResult};
use crate::binio;
use crate::game::NUM_PLAYERS;

const MAGIC: &[u8; 8] = b"GOMCTRES";
const VERSION: u32 = 1;

impl TournamentResult {
    pub fn write<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        binio::write_header(w, MAGIC, VERSION)?;
        binio::write_config(w, &self.game)?;
        w.write_u64::<LE>(self.seed)?;
        w.write_u32::<LE>(self.matches.len() as u32)?;
        for m in &self.matches {
            w.write_u32::<LE>(m.index)?;
            w.write_u64::<LE>(m.deal_seed)?;
            for row in &m.points {
                for &p in row {
                    w.write_i32::<LE>(p)?;
                }
            }
        }
        w.write_u32::<LE>(self.failures.len() as u32)?;
        for (i, msg) in &self.failures {
            w.write_u32::<LE>(*i)?;
            binio::write_str(w, msg)?;
        }
        match &self.timing {
            None => w.write_u8(0)?,
            Some(t) => {
                w.write_u8(1)?;
                for side in t {
                    w.write_u64::<LE>(side.total.as_nanos() as u64)?;
                    w.write_u64::<LE>(side.decisions)?;
                }
            }
        }
        Ok(())
    }

    pub fn read<R: Read>(r: &mut R) -> Result<TournamentResult, String> {
        let version = binio::read_header(r, MAGIC)?;
        if version != VERSION {
            return Err(format!("unsupported result version {version}"));
        }
        let io = |e: std::io::Error| e.to_string();
        let game = binio::read_config(r)?;
        let seed = r.read_u64::<LE>().map_err(io)?;
        let n = r.read_u32::<LE>().map_err(io)? as usize;
        let mut matches = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            let index = r.read_u32::<LE>().map_err(io)?;
            let deal_seed = r.read_u64::<LE>().map_err(io)?;
            let mut points = [[0; NUM_PLAYERS]; 14];
            for row in &mut points {
                for p in row.iter_mut() {
                    *p = r.read_i32::<LE>().map_err(io)?;
                }
            }
            matches.push(MatchResult {
                index,
                deal_seed,
                points,
            });
        }
        let nf = r.read_u32::<LE>().map_err(io)? as usize;
        let mut failures = Vec::with_capacity(nf.min(1 << 20));
        for _ in 0..nf {
            let i = r.read_u32::<LE>().map_err(io)?;
            failures.push((i, binio::read_str(r).map_err(io)?));
        }
        let timing = match r.read_u8().map_err(io)? {
            0 => None,
            1 => {
                let mut t = [Timing::default(); 2];
                for side in &mut t {
                    side.total = Duration::from_nanos(r.read_u64::<LE>().map_err(io)?);
                    side.decisions = r.read_u64::<LE>().map_err(io)?;
                }
                Some(t)
            }
            other => return Err(format!("bad timing flag {other}")),
        };
        Ok(TournamentResult {
            game,
            seed,
            matches,
            failures,
            timing,
        })
    }

    pub fn save_file(&self, path: &Path) -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()
    }

    pub fn load_file(path: &Path) -> Result<TournamentResult, String> {
        let f = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
        TournamentResult::read(&mut BufReader::new(f))
    }

    /// Mean points of both sides overall and per seating composition, the
    /// paired deal statistics, and decision times when measured.
    pub fn report(&self, name_a: &str, name_b: &str) -> String {
        let mut out = String::new();
        let w = 10;
        let label = 14;
        write!(out, "{:label$}", "").unwrap();
        for s in Split::COLUMNS {
            write!(out, "{:>w$}", s.label()).unwrap();
        }
        out.push('\n');
        let means: Vec<(f64, f64)> = Split::COLUMNS.iter().map(|&s| self.side_means(s)).collect();
        for (name, pick) in [(name_a, 0), (name_b, 1)] {
            write!(out, "{:label$}", truncate(name, label - 1)).unwrap();
            for m in &means {
                let v = if pick == 0 { m.0 } else { m.1 };
                write!(out, "{v:>w$.3}").unwrap();
            }
            out.push('\n');
        }
        write!(out, "{:label$}", "A - B").unwrap();
        for m in &means {
            write!(out, "{:>w$.3}", m.0 - m.1).unwrap();
        }
        out.push('\n');
        let wx = self.wilcoxon();
        writeln!(
            out,
            "matches {} (failed {}), mean deal delta {:.4}, Wilcoxon signed-rank p = {:.3e} ({:?}, n = {})",
            self.matches.len(),
            self.failures.len(),
            self.mean_delta(),
            wx.p_value,
            wx.method,
            wx.n
        )
        .unwrap();
        if let Some(t) = &self.timing {
            for (name, side) in [(name_a, &t[0]), (name_b, &t[1])] {
                match side.mean_ms() {
                    Some(ms) => writeln!(
                        out,
                        "{name}: {ms:.3} ms per decision over {}",
                        side.decisions
                    )
                    .unwrap(),
                    None => writeln!(out, "{name}: no decisions").unwrap(),
                }
            }
        }
        out
    }
}

fn truncate(s: &str, n: usize) -> String {
    s.chars().take(n).collect()
}
