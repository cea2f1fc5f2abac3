use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::net::{backward, forward, Tape};
use super::{Layout, ModelConfig, NeuralError, Params, Scalar, TrainConfig};
use crate::model::LabeledHistory;

/// Weight of the next-token loss; the outcome loss gets the rest.
pub const LM_WEIGHT: f64 = 0.9;

/// Model input and next-token targets for one history: the start marker
/// followed by the history, predicting the history followed by the end
/// marker.
pub fn sequence(tokens: &[u16], marker: usize) -> (Vec<usize>, Vec<usize>) {
    let mut input = Vec::with_capacity(tokens.len() + 1);
    input.push(marker);
    input.extend(tokens.iter().map(|&t| t as usize));
    let mut targets: Vec<usize> = input[1..].to_vec();
    targets.push(marker);
    (input, targets)
}

/// Summed cross-entropies over the positions of one or more sequences.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossSums {
    pub next_token: f64,
    pub outcome: f64,
    pub positions: usize,
}

impl LossSums {
    pub fn add(&mut self, o: LossSums) {
        self.next_token += o.next_token;
        self.outcome += o.outcome;
        self.positions += o.positions;
    }

    pub fn next_token_ce(&self) -> f64 {
        self.next_token / self.positions as f64
    }

    pub fn outcome_ce(&self) -> f64 {
        self.outcome / self.positions as f64
    }

    /// `(outcome + 9 * next_token) / 10`, averaged over positions.
    pub fn loss(&self) -> f64 {
        LM_WEIGHT * self.next_token_ce() + (1.0 - LM_WEIGHT) * self.outcome_ce()
    }
}

/// Cross-entropy of each row against its target, with the gradient
/// `weight * (softmax - onehot)` written back into `logits`.
fn softmax_ce<S: Scalar>(logits: &mut [S], n: usize, targets: &[usize], weight: S) -> f64 {
    let mut total = 0.0;
    for (row, &y) in logits.chunks_exact_mut(n).zip(targets) {
        let max = row.iter().copied().fold(S::neg_infinity(), S::max);
        let sum: S = row.iter().map(|&v| (v - max).exp()).sum();
        let log_z = max + sum.ln();
        total += (log_z - row[y]).f64();
        for (j, v) in row.iter_mut().enumerate() {
            let p = (*v - log_z).exp();
            *v = weight * (if j == y { p - S::one() } else { p });
        }
    }
    total
}

fn check_example(c: &ModelConfig, ex: &LabeledHistory) -> Result<(), NeuralError> {
    if ex.tokens.len() + 1 > c.context_length {
        return Err(NeuralError::BadExample(format!(
            "history of {} tokens exceeds context {}",
            ex.tokens.len(),
            c.context_length
        )));
    }
    if let Some(&t) = ex.tokens.iter().find(|&&t| t as usize >= c.vocab_size - 1) {
        return Err(NeuralError::BadExample(format!(
            "token {t} outside the observation vocabulary"
        )));
    }
    if ex.outcome >= c.num_outcome_labels {
        return Err(NeuralError::BadExample(format!(
            "outcome label {}",
            ex.outcome
        )));
    }
    Ok(())
}

/// Loss sums of one example and, when `grads` is given, the gradient of
/// `scale * (weighted summed loss)` added to it.
pub(crate) fn example_loss<S: Scalar>(
    params: &Params<S>,
    layout: &Layout,
    ex: &LabeledHistory,
    scale: f64,
    grads: Option<&mut [S]>,
    rng: Option<&mut dyn RngCore>,
) -> LossSums {
    let c = &params.config;
    let (input, targets) = sequence(&ex.tokens, c.vocab_size - 1);
    let tape: Tape<S> = forward(&params.data, layout, c, &input, true, rng);
    let mut dlm = tape.lm_logits().to_vec();
    let mut dval = tape.val_logits().to_vec();
    let labels = vec![ex.outcome; input.len()];
    let next_token = softmax_ce(&mut dlm, c.vocab_size, &targets, S::of(scale * LM_WEIGHT));
    let outcome = softmax_ce(
        &mut dval,
        c.num_outcome_labels,
        &labels,
        S::of(scale * (1.0 - LM_WEIGHT)),
    );
    if let Some(grads) = grads {
        backward(&params.data, layout, c, &tape, &dlm, &dval, grads);
    }
    LossSums {
        next_token,
        outcome,
        positions: input.len(),
    }
}

/// Mean weighted loss over a batch and its gradient.
pub fn loss_and_grad<S: Scalar>(params: &Params<S>, batch: &[LabeledHistory]) -> (f64, Vec<S>) {
    let layout = params.layout();
    let positions: usize = batch.iter().map(|e| e.tokens.len() + 1).sum();
    let mut grads = vec![S::zero(); layout.total];
    let mut sums = LossSums::default();
    for ex in batch {
        sums.add(example_loss(
            params,
            &layout,
            ex,
            1.0 / positions as f64,
            Some(&mut grads),
            None,
        ));
    }
    (sums.loss(), grads)
}

/// Loss sums of a dataset without dropout.
pub fn evaluate<S: Scalar>(params: &Params<S>, data: &[LabeledHistory]) -> LossSums {
    let layout = params.layout();
    let mut sums = LossSums::default();
    for ex in data {
        sums.add(example_loss(params, &layout, ex, 1.0, None, None));
    }
    sums
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean weighted loss over the epoch's training batches.
    pub loss: f64,
    pub next_token_ce: f64,
    pub outcome_ce: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochStats>,
}

struct AdamW {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

/// Trains from `init` (or a fresh seeded initialization) with AdamW and a
/// learning rate decaying linearly to zero. Examples are shuffled every
/// epoch. Aborts on a non-finite loss.
pub fn train<S: Scalar>(
    data: &[LabeledHistory],
    model_config: &ModelConfig,
    tc: &TrainConfig,
    init: Option<&Params<S>>,
) -> Result<(Params<S>, TrainLog), NeuralError> {
    model_config.validate()?;
    tc.validate()?;
    if data.is_empty() {
        return Err(NeuralError::EmptyDataset);
    }
    for ex in data {
        check_example(model_config, ex)?;
    }
    let mut params = match init {
        Some(p) if &p.config != model_config => {
            return Err(NeuralError::Config(
                "warm start from a different model shape".into(),
            ))
        }
        Some(p) => p.clone(),
        None => Params::init(model_config, tc.seed),
    };
    let layout = params.layout();
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed ^ 0x5eed_7a11);
    let steps_per_epoch = data.len().div_ceil(tc.batch_size);
    let total_steps = steps_per_epoch * tc.epochs;
    let mut opt = AdamW {
        m: vec![0.0; layout.total],
        v: vec![0.0; layout.total],
        step: 0,
    };
    let decay: Vec<bool> = {
        let mut d = vec![false; layout.total];
        for t in layout.tensors.iter().filter(|t| t.decay) {
            d[t.range()].iter_mut().for_each(|x| *x = true);
        }
        d
    };
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = TrainLog::default();
    let mut grads = vec![S::zero(); layout.total];
    for epoch in 0..tc.epochs {
        order.shuffle(&mut rng);
        let mut epoch_sums = LossSums::default();
        let mut epoch_loss = 0.0;
        for (i, batch) in order.chunks(tc.batch_size).enumerate() {
            let positions: usize = batch.iter().map(|&j| data[j].tokens.len() + 1).sum();
            grads.iter_mut().for_each(|g| *g = S::zero());
            let mut sums = LossSums::default();
            for &j in batch {
                let s = example_loss(
                    &params,
                    &layout,
                    &data[j],
                    1.0 / positions as f64,
                    Some(&mut grads),
                    Some(&mut rng),
                );
                sums.add(s);
            }
            let loss = sums.loss();
            let global_step = epoch * steps_per_epoch + i;
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(NeuralError::Diverged {
                    epoch,
                    step: global_step,
                });
            }
            epoch_sums.add(sums);
            epoch_loss += loss;
            let lr = tc.learning_rate * (1.0 - global_step as f64 / total_steps as f64);
            adamw_step(&mut params.data, &grads, &mut opt, &decay, lr, tc);
        }
        log.epochs.push(EpochStats {
            epoch,
            loss: epoch_loss / steps_per_epoch as f64,
            next_token_ce: epoch_sums.next_token_ce(),
            outcome_ce: epoch_sums.outcome_ce(),
        });
    }
    Ok((params, log))
}

fn adamw_step<S: Scalar>(
    p: &mut [S],
    g: &[S],
    opt: &mut AdamW,
    decay: &[bool],
    lr: f64,
    tc: &TrainConfig,
) {
    let clip = if tc.max_grad_norm > 0.0 {
        let norm = g.iter().map(|&x| x.f64() * x.f64()).sum::<f64>().sqrt();
        if norm > tc.max_grad_norm {
            tc.max_grad_norm / (norm + 1e-6)
        } else {
            1.0
        }
    } else {
        1.0
    };
    opt.step += 1;
    let bc1 = 1.0 - tc.beta1.powi(opt.step);
    let bc2 = 1.0 - tc.beta2.powi(opt.step);
    for i in 0..p.len() {
        let gi = g[i].f64() * clip;
        opt.m[i] = tc.beta1 * opt.m[i] + (1.0 - tc.beta1) * gi;
        opt.v[i] = tc.beta2 * opt.v[i] + (1.0 - tc.beta2) * gi * gi;
        if lr == 0.0 {
            continue;
        }
        let mut x = p[i].f64();
        if decay[i] {
            x -= lr * tc.weight_decay * x;
        }
        x -= lr * (opt.m[i] / bc1) / ((opt.v[i] / bc2).sqrt() + tc.epsilon);
        p[i] = S::of(x);
    }
}
