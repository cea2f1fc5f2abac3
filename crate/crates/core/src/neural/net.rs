//! Forward and backward passes of the dual-head transformer for one
//! sequence.

use rand::{Rng, RngCore};

use super::scalar::{gemm, Mat, MatMut};
use super::{Layout, ModelConfig, Scalar};

const LN_EPS: f64 = 1e-5;

struct LnCache<S> {
    xhat: Vec<S>,
    rstd: Vec<S>,
}

fn layer_norm<S: Scalar>(x: &[S], d: usize, g: &[S], b: &[S], out: &mut [S]) -> LnCache<S> {
    let t = x.len() / d;
    let mut xhat = vec![S::zero(); x.len()];
    let mut rstd = vec![S::zero(); t];
    let n = S::of(d as f64);
    for r in 0..t {
        let row = &x[r * d..(r + 1) * d];
        let mean = row.iter().copied().sum::<S>() / n;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<S>() / n;
        let rs = S::one() / (var + S::of(LN_EPS)).sqrt();
        rstd[r] = rs;
        for j in 0..d {
            let h = (row[j] - mean) * rs;
            xhat[r * d + j] = h;
            out[r * d + j] = h * g[j] + b[j];
        }
    }
    LnCache { xhat, rstd }
}

/// Adds the input gradient to `dx` and the parameter gradients to `dg`, `db`.
fn layer_norm_backward<S: Scalar>(
    dy: &[S],
    cache: &LnCache<S>,
    g: &[S],
    d: usize,
    dx: &mut [S],
    dg: &mut [S],
    db: &mut [S],
) {
    let n = S::of(d as f64);
    let mut dxhat = vec![S::zero(); d];
    for (r, &rs) in cache.rstd.iter().enumerate() {
        let dy = &dy[r * d..(r + 1) * d];
        let xhat = &cache.xhat[r * d..(r + 1) * d];
        let (mut m1, mut m2) = (S::zero(), S::zero());
        for j in 0..d {
            dg[j] += dy[j] * xhat[j];
            db[j] += dy[j];
            dxhat[j] = dy[j] * g[j];
            m1 += dxhat[j];
            m2 += dxhat[j] * xhat[j];
        }
        m1 /= n;
        m2 /= n;
        for j in 0..d {
            dx[r * d + j] += rs * (dxhat[j] - m1 - xhat[j] * m2);
        }
    }
}

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

/// Tanh approximation of GELU, used inside the blocks.
fn gelu_tanh<S: Scalar>(x: S) -> S {
    let c = S::of(SQRT_2_OVER_PI);
    let k = S::of(0.044715);
    S::of(0.5) * x * (S::one() + (c * (x + k * x * x * x)).tanh())
}

fn gelu_tanh_grad<S: Scalar>(x: S) -> S {
    let c = S::of(SQRT_2_OVER_PI);
    let k = S::of(0.044715);
    let th = (c * (x + k * x * x * x)).tanh();
    let half = S::of(0.5);
    half * (S::one() + th)
        + half * x * (S::one() - th * th) * c * (S::one() + S::of(3.0) * k * x * x)
}

/// Exact GELU, used in the two output heads.
fn gelu_erf<S: Scalar>(x: S) -> S {
    let v = x.f64();
    S::of(0.5 * v * (1.0 + statrs::function::erf::erf(v / std::f64::consts::SQRT_2)))
}

fn gelu_erf_grad<S: Scalar>(x: S) -> S {
    let v = x.f64();
    let cdf = 0.5 * (1.0 + statrs::function::erf::erf(v / std::f64::consts::SQRT_2));
    let pdf = (-0.5 * v * v).exp() / (2.0 * std::f64::consts::PI).sqrt();
    S::of(cdf + v * pdf)
}

/// `out = x * w (+ b)` for row-major `x: [rows, n_in]`, `w: [n_in, n_out]`.
fn linear<S: Scalar>(x: &[S], n_in: usize, w: &[S], b: Option<&[S]>, n_out: usize, out: &mut [S]) {
    let rows = x.len() / n_in;
    let beta = match b {
        Some(b) => {
            for r in 0..rows {
                out[r * n_out..(r + 1) * n_out].copy_from_slice(b);
            }
            S::one()
        }
        None => S::zero(),
    };
    gemm(
        S::one(),
        Mat::new(x, rows, n_in),
        Mat::new(w, n_in, n_out),
        beta,
        MatMut::new(out, rows, n_out),
    );
}

/// Accumulates `dw += x^T dy` and returns `dx = dy w^T`.
fn linear_backward<S: Scalar>(
    x: &[S],
    n_in: usize,
    w: &[S],
    dy: &[S],
    n_out: usize,
    dw: &mut [S],
) -> Vec<S> {
    let rows = x.len() / n_in;
    gemm(
        S::one(),
        Mat::new(x, rows, n_in).t(),
        Mat::new(dy, rows, n_out),
        S::one(),
        MatMut::new(dw, n_in, n_out),
    );
    let mut dx = vec![S::zero(); rows * n_in];
    gemm(
        S::one(),
        Mat::new(dy, rows, n_out),
        Mat::new(w, n_in, n_out).t(),
        S::zero(),
        MatMut::new(&mut dx, rows, n_in),
    );
    dx
}

fn bias_backward<S: Scalar>(dy: &[S], n: usize, db: &mut [S]) {
    for row in dy.chunks_exact(n) {
        for (g, &v) in db.iter_mut().zip(row) {
            *g += v;
        }
    }
}

/// Inverted dropout scales, or `None` when nothing is dropped.
fn dropout_mask<S: Scalar>(rng: &mut Option<&mut dyn RngCore>, n: usize, p: f64) -> Option<Vec<S>> {
    let rng = rng.as_mut()?;
    if p == 0.0 {
        return None;
    }
    let keep = S::of(1.0 / (1.0 - p));
    Some(
        (0..n)
            .map(|_| {
                if rng.random::<f64>() < p {
                    S::zero()
                } else {
                    keep
                }
            })
            .collect(),
    )
}

fn apply_mask<S: Scalar>(x: &mut [S], mask: &Option<Vec<S>>) {
    if let Some(m) = mask {
        for (v, &k) in x.iter_mut().zip(m) {
            *v *= k;
        }
    }
}

struct BlockTape<S> {
    x_in: Vec<S>,
    ln1: LnCache<S>,
    ln1_out: Vec<S>,
    qkv: Vec<S>,
    /// Attention probabilities, `[head, query, key]`, before dropout.
    probs: Vec<S>,
    attn_mask: Option<Vec<S>>,
    attn_out: Vec<S>,
    proj_mask: Option<Vec<S>>,
    ln2: LnCache<S>,
    ln2_out: Vec<S>,
    fc_pre: Vec<S>,
    fc_act: Vec<S>,
    mlp_mask: Option<Vec<S>>,
}

struct HeadTape<S> {
    pre: Vec<S>,
    act: Vec<S>,
    logits: Vec<S>,
}

/// Everything the backward pass needs from one forward pass.
pub(crate) struct Tape<S> {
    tokens: Vec<usize>,
    /// First position whose head outputs were computed.
    first: usize,
    emb_mask: Option<Vec<S>>,
    blocks: Vec<BlockTape<S>>,
    lnf: LnCache<S>,
    hidden: Vec<S>,
    lm: HeadTape<S>,
    val: HeadTape<S>,
}

impl<S: Scalar> Tape<S> {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn lm_logits(&self) -> &[S] {
        &self.lm.logits
    }

    pub fn val_logits(&self) -> &[S] {
        &self.val.logits
    }
}

fn head_forward<S: Scalar>(h: &[S], d: usize, w1: &[S], w2: &[S], n_out: usize) -> HeadTape<S> {
    let rows = h.len() / d;
    let mut pre = vec![S::zero(); rows * d];
    linear(h, d, w1, None, d, &mut pre);
    let act: Vec<S> = pre.iter().map(|&x| gelu_erf(x)).collect();
    let mut logits = vec![S::zero(); rows * n_out];
    linear(&act, d, w2, None, n_out, &mut logits);
    HeadTape { pre, act, logits }
}

/// Adds parameter gradients and returns the gradient for the head input.
fn head_backward<S: Scalar>(
    tape: &HeadTape<S>,
    h: &[S],
    d: usize,
    p: &[S],
    w1: usize,
    w2: usize,
    n_out: usize,
    dlogits: &[S],
    grads: &mut [S],
) -> Vec<S> {
    let mut dact = linear_backward(
        &tape.act,
        d,
        &p[w2..w2 + d * n_out],
        dlogits,
        n_out,
        &mut grads[w2..w2 + d * n_out],
    );
    for (g, &x) in dact.iter_mut().zip(&tape.pre) {
        *g *= gelu_erf_grad(x);
    }
    linear_backward(
        h,
        d,
        &p[w1..w1 + d * d],
        &dact,
        d,
        &mut grads[w1..w1 + d * d],
    )
}

/// Runs the network on `tokens`. Head outputs are computed for every
/// position when `all_positions` is set, otherwise only for the last.
/// Passing an rng enables dropout.
pub(crate) fn forward<S: Scalar>(
    p: &[S],
    layout: &Layout,
    c: &ModelConfig,
    tokens: &[usize],
    all_positions: bool,
    mut rng: Option<&mut dyn RngCore>,
) -> Tape<S> {
    let (t, d, nh, hd, inner) = (
        tokens.len(),
        c.embed_dim,
        c.num_heads,
        c.head_dim(),
        c.inner_dim,
    );
    assert!(t > 0 && t <= c.context_length, "sequence length {t}");
    let mut x = vec![S::zero(); t * d];
    for (pos, &tok) in tokens.iter().enumerate() {
        assert!(tok < c.vocab_size, "token {tok}");
        let e = &p[layout.wte + tok * d..layout.wte + (tok + 1) * d];
        let q = &p[layout.wpe + pos * d..layout.wpe + (pos + 1) * d];
        for j in 0..d {
            x[pos * d + j] = e[j] + q[j];
        }
    }
    let emb_mask = dropout_mask(&mut rng, t * d, c.embed_dropout);
    apply_mask(&mut x, &emb_mask);

    let scale = S::of(1.0 / (hd as f64).sqrt());
    let mut blocks = Vec::with_capacity(layout.blocks.len());
    for b in &layout.blocks {
        let x_in = x.clone();
        let mut ln1_out = vec![S::zero(); t * d];
        let ln1 = layer_norm(
            &x_in,
            d,
            &p[b.ln1_g..b.ln1_g + d],
            &p[b.ln1_b..b.ln1_b + d],
            &mut ln1_out,
        );
        let mut qkv = vec![S::zero(); t * 3 * d];
        linear(
            &ln1_out,
            d,
            &p[b.qkv_w..b.qkv_w + 3 * d * d],
            Some(&p[b.qkv_b..b.qkv_b + 3 * d]),
            3 * d,
            &mut qkv,
        );
        let mut probs = vec![S::zero(); nh * t * t];
        for h in 0..nh {
            let q = Mat::strided(&qkv[h * hd..], t, hd, 3 * d, 1);
            let k = Mat::strided(&qkv[d + h * hd..], t, hd, 3 * d, 1);
            let pr = &mut probs[h * t * t..(h + 1) * t * t];
            gemm(scale, q, k.t(), S::zero(), MatMut::new(pr, t, t));
            for i in 0..t {
                let row = &mut pr[i * t..(i + 1) * t];
                let max = row[..=i].iter().copied().fold(S::neg_infinity(), S::max);
                let mut sum = S::zero();
                for v in &mut row[..=i] {
                    *v = (*v - max).exp();
                    sum += *v;
                }
                for v in &mut row[..=i] {
                    *v /= sum;
                }
                for v in &mut row[i + 1..] {
                    *v = S::zero();
                }
            }
        }
        let attn_mask = dropout_mask(&mut rng, nh * t * t, c.attn_dropout);
        let mut dropped = probs.clone();
        apply_mask(&mut dropped, &attn_mask);
        let mut attn_out = vec![S::zero(); t * d];
        for h in 0..nh {
            let v = Mat::strided(&qkv[2 * d + h * hd..], t, hd, 3 * d, 1);
            gemm(
                S::one(),
                Mat::new(&dropped[h * t * t..(h + 1) * t * t], t, t),
                v,
                S::zero(),
                MatMut::strided(&mut attn_out[h * hd..], t, hd, d, 1),
            );
        }
        let mut proj = vec![S::zero(); t * d];
        linear(
            &attn_out,
            d,
            &p[b.proj_w..b.proj_w + d * d],
            Some(&p[b.proj_b..b.proj_b + d]),
            d,
            &mut proj,
        );
        let proj_mask = dropout_mask(&mut rng, t * d, c.resid_dropout);
        apply_mask(&mut proj, &proj_mask);
        for (a, &v) in x.iter_mut().zip(&proj) {
            *a += v;
        }

        let mut ln2_out = vec![S::zero(); t * d];
        let ln2 = layer_norm(
            &x,
            d,
            &p[b.ln2_g..b.ln2_g + d],
            &p[b.ln2_b..b.ln2_b + d],
            &mut ln2_out,
        );
        let mut fc_pre = vec![S::zero(); t * inner];
        linear(
            &ln2_out,
            d,
            &p[b.fc_w..b.fc_w + d * inner],
            Some(&p[b.fc_b..b.fc_b + inner]),
            inner,
            &mut fc_pre,
        );
        let fc_act: Vec<S> = fc_pre.iter().map(|&v| gelu_tanh(v)).collect();
        let mut mlp = vec![S::zero(); t * d];
        linear(
            &fc_act,
            inner,
            &p[b.out_w..b.out_w + inner * d],
            Some(&p[b.out_b..b.out_b + d]),
            d,
            &mut mlp,
        );
        let mlp_mask = dropout_mask(&mut rng, t * d, c.resid_dropout);
        apply_mask(&mut mlp, &mlp_mask);
        for (a, &v) in x.iter_mut().zip(&mlp) {
            *a += v;
        }
        blocks.push(BlockTape {
            x_in,
            ln1,
            ln1_out,
            qkv,
            probs,
            attn_mask,
            attn_out,
            proj_mask,
            ln2,
            ln2_out,
            fc_pre,
            fc_act,
            mlp_mask,
        });
    }

    let mut hidden = vec![S::zero(); t * d];
    let lnf = layer_norm(
        &x,
        d,
        &p[layout.lnf_g..layout.lnf_g + d],
        &p[layout.lnf_b..layout.lnf_b + d],
        &mut hidden,
    );
    let first = if all_positions { 0 } else { t - 1 };
    let h = &hidden[first * d..];
    let lm = head_forward(
        h,
        d,
        &p[layout.lm_hidden..layout.lm_hidden + d * d],
        &p[layout.lm_out..layout.lm_out + d * c.vocab_size],
        c.vocab_size,
    );
    let val = head_forward(
        h,
        d,
        &p[layout.val_hidden..layout.val_hidden + d * d],
        &p[layout.val_out..layout.val_out + d * c.num_outcome_labels],
        c.num_outcome_labels,
    );
    Tape {
        tokens: tokens.to_vec(),
        first,
        emb_mask,
        blocks,
        lnf,
        hidden,
        lm,
        val,
    }
}

/// Accumulates into `grads` the gradient of a loss whose derivatives with
/// respect to the head logits are `dlm` and `dval` (rows as in the tape).
pub(crate) fn backward<S: Scalar>(
    p: &[S],
    layout: &Layout,
    c: &ModelConfig,
    tape: &Tape<S>,
    dlm: &[S],
    dval: &[S],
    grads: &mut [S],
) {
    let (t, d, nh, hd, inner) = (
        tape.len(),
        c.embed_dim,
        c.num_heads,
        c.head_dim(),
        c.inner_dim,
    );
    let first = tape.first;
    let h = &tape.hidden[first * d..];
    let mut dhidden = vec![S::zero(); t * d];
    for (head, w1, w2, n_out, dlogits) in [
        (&tape.lm, layout.lm_hidden, layout.lm_out, c.vocab_size, dlm),
        (
            &tape.val,
            layout.val_hidden,
            layout.val_out,
            c.num_outcome_labels,
            dval,
        ),
    ] {
        let dh = head_backward(head, h, d, p, w1, w2, n_out, dlogits, grads);
        for (a, &v) in dhidden[first * d..].iter_mut().zip(&dh) {
            *a += v;
        }
    }

    let mut dx = vec![S::zero(); t * d];
    {
        let (dg, db) = split_pair(grads, layout.lnf_g, layout.lnf_b, d);
        layer_norm_backward(
            &dhidden,
            &tape.lnf,
            &p[layout.lnf_g..layout.lnf_g + d],
            d,
            &mut dx,
            dg,
            db,
        );
    }

    let scale = S::of(1.0 / (hd as f64).sqrt());
    for (b, bt) in layout.blocks.iter().zip(&tape.blocks).rev() {
        // Residual MLP branch.
        let mut dmlp = dx.clone();
        apply_mask(&mut dmlp, &bt.mlp_mask);
        bias_backward(&dmlp, d, &mut grads[b.out_b..b.out_b + d]);
        let mut dact = linear_backward(
            &bt.fc_act,
            inner,
            &p[b.out_w..b.out_w + inner * d],
            &dmlp,
            d,
            &mut grads[b.out_w..b.out_w + inner * d],
        );
        for (g, &x) in dact.iter_mut().zip(&bt.fc_pre) {
            *g *= gelu_tanh_grad(x);
        }
        bias_backward(&dact, inner, &mut grads[b.fc_b..b.fc_b + inner]);
        let dln2 = linear_backward(
            &bt.ln2_out,
            d,
            &p[b.fc_w..b.fc_w + d * inner],
            &dact,
            inner,
            &mut grads[b.fc_w..b.fc_w + d * inner],
        );
        {
            let (dg, db) = split_pair(grads, b.ln2_g, b.ln2_b, d);
            layer_norm_backward(&dln2, &bt.ln2, &p[b.ln2_g..b.ln2_g + d], d, &mut dx, dg, db);
        }

        // Residual attention branch.
        let mut dproj = dx.clone();
        apply_mask(&mut dproj, &bt.proj_mask);
        bias_backward(&dproj, d, &mut grads[b.proj_b..b.proj_b + d]);
        let dattn = linear_backward(
            &bt.attn_out,
            d,
            &p[b.proj_w..b.proj_w + d * d],
            &dproj,
            d,
            &mut grads[b.proj_w..b.proj_w + d * d],
        );
        let mut dqkv = vec![S::zero(); t * 3 * d];
        let mut dp = vec![S::zero(); t * t];
        for hh in 0..nh {
            let probs = &bt.probs[hh * t * t..(hh + 1) * t * t];
            let dropped: Vec<S> = match &bt.attn_mask {
                Some(m) => probs
                    .iter()
                    .zip(&m[hh * t * t..])
                    .map(|(&a, &k)| a * k)
                    .collect(),
                None => probs.to_vec(),
            };
            let dout = Mat::strided(&dattn[hh * hd..], t, hd, d, 1);
            let v = Mat::strided(&bt.qkv[2 * d + hh * hd..], t, hd, 3 * d, 1);
            // dV = P^T dOut
            gemm(
                S::one(),
                Mat::new(&dropped, t, t).t(),
                dout,
                S::zero(),
                MatMut::strided(&mut dqkv[2 * d + hh * hd..], t, hd, 3 * d, 1),
            );
            // dP = dOut V^T, then through dropout and softmax.
            gemm(S::one(), dout, v.t(), S::zero(), MatMut::new(&mut dp, t, t));
            if let Some(m) = &bt.attn_mask {
                for (g, &k) in dp.iter_mut().zip(&m[hh * t * t..]) {
                    *g *= k;
                }
            }
            for i in 0..t {
                let pr = &probs[i * t..(i + 1) * t];
                let row = &mut dp[i * t..(i + 1) * t];
                let dot: S = (0..=i).map(|j| pr[j] * row[j]).sum();
                for j in 0..t {
                    row[j] = if j <= i {
                        pr[j] * (row[j] - dot) * scale
                    } else {
                        S::zero()
                    };
                }
            }
            let q = Mat::strided(&bt.qkv[hh * hd..], t, hd, 3 * d, 1);
            let k = Mat::strided(&bt.qkv[d + hh * hd..], t, hd, 3 * d, 1);
            gemm(
                S::one(),
                Mat::new(&dp, t, t),
                k,
                S::zero(),
                MatMut::strided(&mut dqkv[hh * hd..], t, hd, 3 * d, 1),
            );
            gemm(
                S::one(),
                Mat::new(&dp, t, t).t(),
                q,
                S::zero(),
                MatMut::strided(&mut dqkv[d + hh * hd..], t, hd, 3 * d, 1),
            );
        }
        bias_backward(&dqkv, 3 * d, &mut grads[b.qkv_b..b.qkv_b + 3 * d]);
        let dln1 = linear_backward(
            &bt.ln1_out,
            d,
            &p[b.qkv_w..b.qkv_w + 3 * d * d],
            &dqkv,
            3 * d,
            &mut grads[b.qkv_w..b.qkv_w + 3 * d * d],
        );
        let (dg, db) = split_pair(grads, b.ln1_g, b.ln1_b, d);
        layer_norm_backward(&dln1, &bt.ln1, &p[b.ln1_g..b.ln1_g + d], d, &mut dx, dg, db);
        debug_assert_eq!(bt.x_in.len(), dx.len());
    }

    apply_mask(&mut dx, &tape.emb_mask);
    for (pos, &tok) in tape.tokens.iter().enumerate() {
        for j in 0..d {
            let g = dx[pos * d + j];
            grads[layout.wte + tok * d + j] += g;
            grads[layout.wpe + pos * d + j] += g;
        }
    }
}

/// Two disjoint `len`-long slices at offsets `a < b`.
fn split_pair<S>(v: &mut [S], a: usize, b: usize, len: usize) -> (&mut [S], &mut [S]) {
    assert!(a + len <= b);
    let (lo, hi) = v.split_at_mut(b);
    (&mut lo[a..a + len], &mut hi[..len])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gelu_derivatives_match_finite_differences() {
        for &x in &[-3.0f64, -0.7, 0.0, 0.4, 2.5] {
            let e = 1e-6;
            let fd = (gelu_tanh(x + e) - gelu_tanh(x - e)) / (2.0 * e);
            assert!((fd - gelu_tanh_grad(x)).abs() < 1e-8);
            let fd = (gelu_erf(x + e) - gelu_erf(x - e)) / (2.0 * e);
            assert!((fd - gelu_erf_grad(x)).abs() < 1e-8);
        }
        // statrs erf is good to about 1e-11.
        let g = gelu_erf(1.0f64);
        assert!((g - 0.841_344_746_068_542_9).abs() < 1e-10, "{g}");
    }
}
