//! Scalar and vector primitives: GELU, sigsoftmax, the warmup learning-rate
//! schedule, the label-smoothed KL loss, and sinusoidal position encodings.

use ndarray::{Array2, ArrayView1};

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// x · Φ(x) with Φ the standard normal CDF (exact erf-based form).
pub fn gelu(x: f64) -> f64 {
    gelu_scalar(x)
}

pub(crate) fn gelu_scalar(x: f64) -> f64 {
    x * normal_cdf(x)
}

pub(crate) fn gelu_scalar_grad(x: f64) -> f64 {
    normal_cdf(x) + x * normal_pdf(x)
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// pᵢ = exp(ẑᵢ)·sigmoid(ẑᵢ) / Σⱼ exp(ẑⱼ)·sigmoid(ẑⱼ), with ẑ = z − max(z).
/// Applying the formula to the stabilized logits makes constant shifts
/// exact no-ops while keeping the output strictly positive and normalized.
pub fn sigsoftmax(logits: &[f64]) -> Vec<f64> {
    assert!(!logits.is_empty(), "sigsoftmax over an empty vector");
    let m = logits.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
    let mut out: Vec<f64> = logits
        .iter()
        .map(|z| {
            let zhat = z - m;
            zhat.exp() * sigmoid(zhat)
        })
        .collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}

/// d^(−0.5) · min(step^(−0.5), step · warmup^(−1.5)); rises linearly over
/// the warmup then decays with the inverse square root of the step.
pub fn lr_schedule(step: usize, d: usize, warmup: usize) -> f64 {
    assert!(step >= 1 && warmup >= 1);
    let step = step as f64;
    let warmup = warmup as f64;
    (d as f64).powf(-0.5) * (step.powf(-0.5)).min(step * warmup.powf(-1.5))
}

/// The smoothed target row: 1 − smoothing on the gold symbol, the smoothing
/// mass spread uniformly over the remaining non-padding vocabulary.
pub fn smoothed_target_row(gold: usize, vocab: usize, pad: usize, smoothing: f64) -> Vec<f64> {
    assert!(gold != pad, "gold symbol may not be the padding symbol");
    assert!(vocab >= 3, "need at least gold, pad, and one other symbol");
    let rest = (vocab - 2) as f64;
    (0..vocab)
        .map(|j| {
            if j == gold {
                1.0 - smoothing
            } else if j == pad {
                0.0
            } else {
                smoothing / rest
            }
        })
        .collect()
}

/// KL divergence from the smoothed gold distribution to each predicted row,
/// averaged over unmasked positions.
pub fn loss_kl_smoothed(
    pred: &Array2<f64>,
    gold: &[usize],
    mask: &[bool],
    smoothing: f64,
    pad: usize,
) -> f64 {
    assert_eq!(pred.nrows(), gold.len());
    assert_eq!(pred.nrows(), mask.len());
    let vocab = pred.ncols();
    let mut total = 0.0;
    let mut count = 0usize;
    for ((row, &g), &keep) in pred.rows().into_iter().zip(gold).zip(mask) {
        if !keep {
            continue;
        }
        total += kl_row(row, &smoothed_target_row(g, vocab, pad, smoothing));
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

fn kl_row(p: ArrayView1<f64>, q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(_, qi)| **qi > 0.0)
        .map(|(pi, qi)| qi * (qi.ln() - pi.ln()))
        .sum()
}

/// Fixed sinusoidal position encodings, `len × d`.
pub fn positional_encoding(len: usize, d: usize) -> Array2<f64> {
    let mut pe = Array2::zeros((len, d));
    for pos in 0..len {
        for i in 0..d {
            let exponent = (2 * (i / 2)) as f64 / d as f64;
            let angle = pos as f64 / 10000f64.powf(exponent);
            pe[[pos, i]] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    pe
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn gelu_reference_points() {
        assert_eq!(gelu(0.0), 0.0);
        // Φ(1) from an independent numerical evaluation of the normal CDF
        assert!((gelu(1.0) - 0.8413447460685429).abs() < 1e-12);
        // asymptote: gelu(x) → x as x → +∞
        assert!((gelu(20.0) - 20.0).abs() < 1e-12);
        assert!(gelu(-20.0).abs() < 1e-12);
    }

    #[test]
    fn sigsoftmax_reference_points() {
        let p = sigsoftmax(&[0.0, 0.0]);
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);

        assert_eq!(sigsoftmax(&[3.7]), vec![1.0]);

        // independent scalar evaluation of the formula on ẑ = [0, -1]:
        // e⁰σ(0) = 0.5, e⁻¹σ(−1) = 0.09894774298...
        let p = sigsoftmax(&[1.0, 0.0]);
        assert!((p[0] - 0.8348109211129292).abs() < 1e-12, "{p:?}");
        assert!((p[1] - 0.16518907888707074).abs() < 1e-12);
    }

    #[test]
    fn sigsoftmax_shift_invariance_is_exact() {
        let z = [1.3, -0.2, 0.7, 2.9];
        let p0 = sigsoftmax(&z);
        for shift in [-250.0, -3.0, 11.0, 500.0] {
            let shifted: Vec<f64> = z.iter().map(|v| v + shift).collect();
            let p1 = sigsoftmax(&shifted);
            for (a, b) in p0.iter().zip(&p1) {
                // the only drift left is the rounding of the shifted inputs
                assert!((a - b).abs() <= 1e-9, "shift {shift}: {a} vs {b}");
            }
        }
        // exactly representable inputs shift bitwise
        let z = [1.0, 0.0, -2.0];
        assert_eq!(
            sigsoftmax(&z),
            sigsoftmax(&z.iter().map(|v| v + 8.0).collect::<Vec<_>>())
        );
    }

    #[test]
    fn sigsoftmax_rows_are_distributions() {
        let p = sigsoftmax(&[-4.0, 2.0, 0.3, -0.1, 9.0]);
        assert!(p.iter().all(|v| *v > 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn lr_schedule_reference_points() {
        // branch intersection at step = warmup
        let peak = lr_schedule(400, 128, 400);
        assert!((peak - (128f64).powf(-0.5) * (400f64).powf(-0.5)).abs() < 1e-15);
        // independent evaluation of the formula
        assert!((lr_schedule(1, 128, 400) - 1.1048543456039806e-5).abs() < 1e-18);
        // strictly increasing before warmup, strictly decreasing after
        for s in 1..399 {
            assert!(lr_schedule(s, 128, 400) < lr_schedule(s + 1, 128, 400));
        }
        for s in 400..800 {
            assert!(lr_schedule(s, 128, 400) > lr_schedule(s + 1, 128, 400));
        }
    }

    #[test]
    fn kl_loss_zero_at_the_smoothed_target() {
        let vocab = 6;
        let target = smoothed_target_row(2, vocab, 0, 0.2);
        let pred = Array2::from_shape_vec((1, vocab), target.clone()).unwrap();
        let loss = loss_kl_smoothed(&pred, &[2], &[true], 0.2, 0);
        assert!(loss.abs() < 1e-12);
    }

    #[test]
    fn kl_loss_without_smoothing_is_nll() {
        let pred = array![[0.0, 0.1, 0.6, 0.3]];
        let loss = loss_kl_smoothed(&pred, &[2], &[true], 0.0, 0);
        assert!((loss - (-(0.6f64).ln())).abs() < 1e-12);
    }

    #[test]
    fn kl_loss_hand_fixture() {
        // q = [0, 0.8 on gold, 0.2/3 elsewhere], p as below; value evaluated
        // by hand: Σ q (ln q − ln p) = 0.35397409154445303
        let pred = array![[0.0, 0.4, 0.3, 0.2, 0.1]];
        let loss = loss_kl_smoothed(&pred, &[1], &[true], 0.2, 0);
        assert!((loss - 0.35397409154445303).abs() < 1e-12, "{loss}");
    }

    #[test]
    fn kl_loss_ignores_masked_positions() {
        let pred = array![[0.0, 0.5, 0.25, 0.25], [0.0, 0.1, 0.1, 0.8]];
        let masked = loss_kl_smoothed(&pred, &[1, 3], &[true, false], 0.2, 0);
        let only_first = loss_kl_smoothed(&pred.slice(ndarray::s![0..1, ..]).to_owned(), &[1], &[true], 0.2, 0);
        assert_eq!(masked, only_first);
    }

    #[test]
    fn positional_encoding_shape_and_range() {
        let pe = positional_encoding(7, 10);
        assert_eq!(pe.dim(), (7, 10));
        assert!(pe.iter().all(|v| v.abs() <= 1.0));
        // position 0: sin(0) = 0 on even, cos(0) = 1 on odd
        assert_eq!(pe[[0, 0]], 0.0);
        assert_eq!(pe[[0, 1]], 1.0);
    }
}
