use statrs::distribution::{ContinuousCDF, Normal};

/// Largest sample (after dropping zeros) that gets an exact p-value.
pub const EXACT_LIMIT: usize = 25;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WilcoxonMethod {
    Exact,
    Normal,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WilcoxonResult {
    /// Nonzero differences used.
    pub n: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    pub method: WilcoxonMethod,
}

/// Average ranks of `|d|` (1-based), with tied magnitudes sharing the mean
/// of their positions.
pub fn signed_ranks(diffs: &[f64]) -> Vec<(f64, bool)> {
    let mut idx: Vec<usize> = (0..diffs.len()).collect();
    idx.sort_by(|&a, &b| diffs[a].abs().total_cmp(&diffs[b].abs()));
    let mut ranks = vec![(0.0, false); diffs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && diffs[idx[j + 1]].abs() == diffs[idx[i]].abs() {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = (rank, diffs[k] > 0.0);
        }
        i = j + 1;
    }
    ranks
}

/// Wilcoxon signed-rank test of zero median. Zero differences are
/// dropped. Up to 25 remaining values the p-value comes from the exact
/// null distribution of the (tie-averaged) ranks under random signs;
/// beyond that from the normal approximation with the tie-corrected
/// variance. Two-sided: twice the smaller tail, capped at 1.
pub fn wilcoxon_signed_rank(diffs: &[f64]) -> WilcoxonResult {
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
    let n = nonzero.len();
    let ranks = signed_ranks(&nonzero);
    let w_plus: f64 = ranks.iter().filter(|r| r.1).map(|r| r.0).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;
    if n == 0 {
        return WilcoxonResult {
            n,
            w_plus,
            w_minus,
            p_value: 1.0,
            method: WilcoxonMethod::Exact,
        };
    }
    if n <= EXACT_LIMIT {
        // Doubled ranks are integers even with ties.
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r.0).round() as usize).collect();
        let max: usize = doubled.iter().sum();
        let mut counts = vec![0f64; max + 1];
        counts[0] = 1.0;
        for &r in &doubled {
            for s in (r..=max).rev() {
                counts[s] += counts[s - r];
            }
        }
        let all = 2f64.powi(n as i32);
        let w2 = (2.0 * w_plus).round() as usize;
        let lower: f64 = counts[..=w2].iter().sum::<f64>() / all;
        let upper: f64 = counts[w2..].iter().sum::<f64>() / all;
        return WilcoxonResult {
            n,
            w_plus,
            w_minus,
            p_value: (2.0 * lower.min(upper)).min(1.0),
            method: WilcoxonMethod::Exact,
        };
    }
    let p_value = normal_p_value(&ranks, w_plus);
    WilcoxonResult {
        n,
        w_plus,
        w_minus,
        p_value,
        method: WilcoxonMethod::Normal,
    }
}

fn normal_p_value(ranks: &[(f64, bool)], w_plus: f64) -> f64 {
    let nf = ranks.len() as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut sorted: Vec<f64> = ranks.iter().map(|r| r.0).collect();
    sorted.sort_by(f64::total_cmp);
    let tie_term: f64 = sorted
        .chunk_by(|a, b| a == b)
        .map(|g| {
            let t = g.len() as f64;
            t * t * t - t
        })
        .sum();
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = (w_plus - mean) / var.sqrt();
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * (1.0 - std.cdf(z.abs()))).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_positive_ten() {
        let d: Vec<f64> = (1..=10).map(|x| x as f64).collect();
        let r = wilcoxon_signed_rank(&d);
        assert_eq!(r.w_minus, 0.0);
        assert!((r.p_value - 2.0 / 1024.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_differences_give_one() {
        let r = wilcoxon_signed_rank(&[1.0, -1.0, 2.0, -2.0, 3.0, -3.0]);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(wilcoxon_signed_rank(&[0.0, 0.0]).p_value, 1.0);
    }

    #[test]
    fn ties_share_average_ranks() {
        let r = signed_ranks(&[-2.0, 1.0, 2.0, 3.0]);
        assert_eq!(r, vec![(2.5, false), (1.0, true), (2.5, true), (4.0, true)]);
    }

    #[test]
    fn normal_approximation_is_close_to_exact_at_the_boundary() {
        let d: Vec<f64> = (1..=25)
            .map(|x| if x % 3 == 0 { -(x as f64) } else { x as f64 })
            .collect();
        let exact = wilcoxon_signed_rank(&d);
        assert_eq!(exact.method, WilcoxonMethod::Exact);
        let approx = normal_p_value(&signed_ranks(&d), exact.w_plus);
        assert!(
            (exact.p_value - approx).abs() < 0.01,
            "{} vs {approx}",
            exact.p_value
        );
        let mut more = d.clone();
        more.push(26.0);
        assert_eq!(wilcoxon_signed_rank(&more).method, WilcoxonMethod::Normal);
    }
}
