use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Mutex;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::net::forward;
use super::{Layout, ModelConfig, NeuralError, Params};
use crate::binio;
use crate::game::GameConfig;
use crate::model::{
    check_context, GenerativeModel, ModelError, NextObsDistribution, OutcomeDistribution,
    OutcomeSpace,
};
use crate::tokenizer::{ObservationHistory, Token, Vocabulary};

const MAGIC: &[u8; 8] = b"GOMCTNET";
const VERSION: u32 = 1;
const CACHE_LIMIT: usize = 200_000;

type Heads = (Vec<f64>, Vec<f64>);

/// A trained transformer answering model queries for one game. Queries
/// are memoized per history.
pub struct NeuralModel {
    game: GameConfig,
    params: Params<f32>,
    layout: Layout,
    outcomes: OutcomeSpace,
    cache: Mutex<HashMap<Vec<Token>, Heads>>,
}

impl NeuralModel {
    pub fn new(game: &GameConfig, params: Params<f32>) -> Result<NeuralModel, NeuralError> {
        params.config.validate()?;
        params.config.fits_game(game)?;
        Ok(NeuralModel {
            game: game.clone(),
            layout: params.layout(),
            params,
            outcomes: OutcomeSpace::new(game),
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn params(&self) -> &Params<f32> {
        &self.params
    }

    pub fn game(&self) -> &GameConfig {
        &self.game
    }

    fn heads(&self, h: &ObservationHistory) -> Result<Heads, ModelError> {
        check_context(h, self.context_length())?;
        if let Some(hit) = self.cache.lock().expect("cache lock").get(h.tokens()) {
            return Ok(hit.clone());
        }
        let c = &self.params.config;
        let mut input = Vec::with_capacity(h.len() + 1);
        input.push(c.vocab_size - 1);
        for &t in h.tokens() {
            if t as usize >= c.vocab_size {
                return Err(ModelError::BadToken {
                    token: t,
                    vocab_size: c.vocab_size,
                });
            }
            input.push(t as usize);
        }
        let tape = forward(&self.params.data, &self.layout, c, &input, false, None);
        let to64 = |v: &[f32]| v.iter().map(|&x| x as f64).collect::<Vec<_>>();
        let heads = (to64(tape.lm_logits()), to64(tape.val_logits()));
        let mut cache = self.cache.lock().expect("cache lock");
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(h.tokens().to_vec(), heads.clone());
        Ok(heads)
    }

    /// Writes the checkpoint: header, game, manifest hashes, model shape and
    /// every named tensor.
    pub fn save<W: Write>(&self, w: &mut W) -> Result<(), ModelError> {
        write_checkpoint(w, &self.game, &self.params)
    }

    pub fn load<R: Read>(r: &mut R) -> Result<NeuralModel, ModelError> {
        let (game, params) = read_checkpoint(r)?;
        NeuralModel::new(&game, params).map_err(|e| ModelError::Format(e.to_string()))
    }

    pub fn save_file(&self, path: &Path) -> Result<(), ModelError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.save(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load_file(path: &Path) -> Result<NeuralModel, ModelError> {
        NeuralModel::load(&mut BufReader::new(File::open(path)?))
    }
}

impl GenerativeModel for NeuralModel {
    fn vocab_size(&self) -> usize {
        self.params.config.vocab_size
    }

    fn context_length(&self) -> usize {
        self.params.config.context_length
    }

    fn outcomes(&self) -> &OutcomeSpace {
        &self.outcomes
    }

    fn next_obs_dist(&self, h: &ObservationHistory) -> Result<NextObsDistribution, ModelError> {
        Ok(NextObsDistribution::from_logits(&self.heads(h)?.0))
    }

    fn outcome_dist(&self, h: &ObservationHistory) -> Result<OutcomeDistribution, ModelError> {
        Ok(OutcomeDistribution::from_logits(&self.heads(h)?.1))
    }
}

fn write_checkpoint<W: Write>(
    w: &mut W,
    game: &GameConfig,
    params: &Params<f32>,
) -> Result<(), ModelError> {
    let c = &params.config;
    binio::write_header(w, MAGIC, VERSION)?;
    binio::write_config(w, game)?;
    w.write_all(&Vocabulary::new(game).manifest_hash())?;
    w.write_all(&OutcomeSpace::new(game).manifest_hash())?;
    for n in [
        c.vocab_size,
        c.context_length,
        c.embed_dim,
        c.num_heads,
        c.num_layers,
        c.inner_dim,
        c.num_outcome_labels,
    ] {
        w.write_u32::<LE>(n as u32)?;
    }
    for x in [
        c.embed_dropout,
        c.resid_dropout,
        c.attn_dropout,
        c.initializer_range,
    ] {
        w.write_f64::<LE>(x)?;
    }
    let layout = params.layout();
    w.write_u32::<LE>(layout.tensors.len() as u32)?;
    for t in &layout.tensors {
        binio::write_str(w, &t.name)?;
        w.write_u32::<LE>(t.shape.len() as u32)?;
        for &s in &t.shape {
            w.write_u32::<LE>(s as u32)?;
        }
        for &x in &params.data[t.range()] {
            w.write_f32::<LE>(x)?;
        }
    }
    Ok(())
}

fn read_checkpoint<R: Read>(r: &mut R) -> Result<(GameConfig, Params<f32>), ModelError> {
    let version = binio::read_header(r, MAGIC).map_err(ModelError::Format)?;
    if version != VERSION {
        return Err(ModelError::Format(format!(
            "unsupported network version {version}"
        )));
    }
    let game = binio::read_config(r).map_err(ModelError::Format)?;
    if binio::read_hash(r)? != Vocabulary::new(&game).manifest_hash() {
        return Err(ModelError::ManifestMismatch("token"));
    }
    if binio::read_hash(r)? != OutcomeSpace::new(&game).manifest_hash() {
        return Err(ModelError::ManifestMismatch("outcome"));
    }
    let mut n = [0usize; 7];
    for x in &mut n {
        *x = r.read_u32::<LE>()? as usize;
    }
    let mut f = [0f64; 4];
    for x in &mut f {
        *x = r.read_f64::<LE>()?;
    }
    let config = ModelConfig {
        vocab_size: n[0],
        context_length: n[1],
        embed_dim: n[2],
        num_heads: n[3],
        num_layers: n[4],
        inner_dim: n[5],
        num_outcome_labels: n[6],
        embed_dropout: f[0],
        resid_dropout: f[1],
        attn_dropout: f[2],
        initializer_range: f[3],
    };
    config
        .validate()
        .map_err(|e| ModelError::Format(e.to_string()))?;
    let layout = Layout::new(&config);
    if r.read_u32::<LE>()? as usize != layout.tensors.len() {
        return Err(ModelError::Format(
            "tensor count does not match the model shape".into(),
        ));
    }
    let mut data = vec![0f32; layout.total];
    for t in &layout.tensors {
        let name = binio::read_str(r)?;
        let ndim = r.read_u32::<LE>()? as usize;
        let shape = (0..ndim.min(8))
            .map(|_| r.read_u32::<LE>().map(|s| s as usize))
            .collect::<Result<Vec<_>, _>>()?;
        if name != t.name || shape != t.shape {
            return Err(ModelError::Format(format!(
                "expected tensor {} {:?}, found {name} {shape:?}",
                t.name, t.shape
            )));
        }
        r.read_f32_into::<LE>(&mut data[t.range()])?;
    }
    Ok((game, Params { config, data }))
}
