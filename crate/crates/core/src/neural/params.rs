use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{ModelConfig, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    /// Subject to weight decay (matrices, not biases or norm parameters).
    pub decay: bool,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct BlockLayout {
    pub ln1_g: usize,
    pub ln1_b: usize,
    pub qkv_w: usize,
    pub qkv_b: usize,
    pub proj_w: usize,
    pub proj_b: usize,
    pub ln2_g: usize,
    pub ln2_b: usize,
    pub fc_w: usize,
    pub fc_b: usize,
    pub out_w: usize,
    pub out_b: usize,
}

/// Offsets of every tensor inside the flat parameter vector.
#[derive(Clone, Debug)]
pub struct Layout {
    pub tensors: Vec<TensorSpec>,
    inits: Vec<Init>,
    pub(crate) wte: usize,
    pub(crate) wpe: usize,
    pub(crate) blocks: Vec<BlockLayout>,
    pub(crate) lnf_g: usize,
    pub(crate) lnf_b: usize,
    pub(crate) lm_hidden: usize,
    pub(crate) lm_out: usize,
    pub(crate) val_hidden: usize,
    pub(crate) val_out: usize,
    pub total: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Init {
    Normal,
    /// Residual output projections, scaled down by depth.
    Scaled,
    Zero,
    One,
}

impl Layout {
    pub fn new(c: &ModelConfig) -> Layout {
        let mut tensors: Vec<(TensorSpec, Init)> = Vec::new();
        let mut total = 0;
        let mut add = |name: String, shape: Vec<usize>, init: Init| {
            let offset = total;
            let decay = shape.len() == 2;
            let spec = TensorSpec {
                name,
                shape,
                offset,
                decay,
            };
            total += spec.len();
            tensors.push((spec, init));
            offset
        };
        let (d, i) = (c.embed_dim, c.inner_dim);
        let wte = add("wte".into(), vec![c.vocab_size, d], Init::Normal);
        let wpe = add("wpe".into(), vec![c.context_length, d], Init::Normal);
        let blocks = (0..c.num_layers)
            .map(|l| {
                let mut t =
                    |n: &str, shape: Vec<usize>, init| add(format!("h{l}.{n}"), shape, init);
                BlockLayout {
                    ln1_g: t("ln1.g", vec![d], Init::One),
                    ln1_b: t("ln1.b", vec![d], Init::Zero),
                    qkv_w: t("attn.qkv.w", vec![d, 3 * d], Init::Normal),
                    qkv_b: t("attn.qkv.b", vec![3 * d], Init::Zero),
                    proj_w: t("attn.proj.w", vec![d, d], Init::Scaled),
                    proj_b: t("attn.proj.b", vec![d], Init::Zero),
                    ln2_g: t("ln2.g", vec![d], Init::One),
                    ln2_b: t("ln2.b", vec![d], Init::Zero),
                    fc_w: t("mlp.fc.w", vec![d, i], Init::Normal),
                    fc_b: t("mlp.fc.b", vec![i], Init::Zero),
                    out_w: t("mlp.proj.w", vec![i, d], Init::Scaled),
                    out_b: t("mlp.proj.b", vec![d], Init::Zero),
                }
            })
            .collect();
        let lnf_g = add("lnf.g".into(), vec![d], Init::One);
        let lnf_b = add("lnf.b".into(), vec![d], Init::Zero);
        let lm_hidden = add("lm_head.hidden.w".into(), vec![d, d], Init::Normal);
        let lm_out = add("lm_head.out.w".into(), vec![d, c.vocab_size], Init::Normal);
        let val_hidden = add("val_head.hidden.w".into(), vec![d, d], Init::Normal);
        let val_out = add(
            "val_head.out.w".into(),
            vec![d, c.num_outcome_labels],
            Init::Normal,
        );
        let (tensors, inits) = tensors.into_iter().unzip();
        Layout {
            tensors,
            inits,
            wte,
            wpe,
            blocks,
            lnf_g,
            lnf_b,
            lm_hidden,
            lm_out,
            val_hidden,
            val_out,
            total,
        }
    }
}

/// Flat parameter vector of one model.
#[derive(Clone, Debug, PartialEq)]
pub struct Params<S> {
    pub config: ModelConfig,
    pub data: Vec<S>,
}

impl<S: Scalar> Params<S> {
    /// Normal weights with standard deviation `initializer_range`, residual
    /// projections scaled by `1 / sqrt(2 * layers)`, zero biases and unit
    /// norm gains.
    pub fn init(config: &ModelConfig, seed: u64) -> Params<S> {
        let layout = Layout::new(config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let std = config.initializer_range;
        let normal = Normal::new(0.0, std).expect("positive std");
        let scaled = Normal::new(0.0, std / (2.0 * config.num_layers.max(1) as f64).sqrt())
            .expect("positive std");
        let mut data = vec![S::zero(); layout.total];
        for (spec, init) in layout.tensors.iter().zip(&layout.inits) {
            for x in &mut data[spec.range()] {
                *x = match *init {
                    Init::Normal => S::of(normal.sample(&mut rng)),
                    Init::Scaled => S::of(scaled.sample(&mut rng)),
                    Init::Zero => S::zero(),
                    Init::One => S::one(),
                };
            }
        }
        Params {
            config: config.clone(),
            data,
        }
    }

    pub fn layout(&self) -> Layout {
        Layout::new(&self.config)
    }

    pub fn cast<T: Scalar>(&self) -> Params<T> {
        Params {
            config: self.config.clone(),
            data: self.data.iter().map(|&x| T::of(x.f64())).collect(),
        }
    }

    pub fn tensor(&self, name: &str) -> Option<&[S]> {
        let layout = self.layout();
        let spec = layout.tensors.iter().find(|t| t.name == name)?;
        Some(&self.data[spec.range()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::GameConfig;

    #[test]
    fn layout_is_contiguous_and_complete() {
        let c = ModelConfig::desk(&GameConfig::hearts());
        let layout = Layout::new(&c);
        let mut next = 0;
        for t in &layout.tensors {
            assert_eq!(t.offset, next, "{}", t.name);
            next += t.len();
        }
        assert_eq!(next, layout.total);
        let d = c.embed_dim;
        let per_block =
            2 * d + 3 * d * d + 3 * d + d * d + d + 2 * d + 2 * d * c.inner_dim + c.inner_dim + d;
        let expected = (c.vocab_size + c.context_length) * d
            + c.num_layers * per_block
            + 2 * d
            + 2 * d * d
            + d * (c.vocab_size + c.num_outcome_labels);
        assert_eq!(layout.total, expected);
    }

    #[test]
    fn init_is_seeded() {
        let c = ModelConfig::tiny(&GameConfig::mini(3));
        let a = Params::<f32>::init(&c, 1);
        assert_eq!(a, Params::init(&c, 1));
        assert_ne!(a, Params::init(&c, 2));
        assert!(a.tensor("h0.ln1.g").unwrap().iter().all(|&g| g == 1.0));
        assert!(a.tensor("h1.mlp.fc.b").unwrap().iter().all(|&b| b == 0.0));
        let w = a.tensor("wte").unwrap();
        let var = w.iter().map(|&x| (x as f64).powi(2)).sum::<f64>() / w.len() as f64;
        assert!((var.sqrt() - 0.02).abs() < 0.005);
    }
}
