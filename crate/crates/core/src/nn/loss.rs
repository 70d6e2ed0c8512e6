//! Cross-entropy and logit-matching losses.
//!
//! Models emit raw logits; softmax is applied only here (and in metrics),
//! never inside the network.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &Tensor) -> Tensor {
    let (b, k) = (logits.shape()[0], logits.shape()[1]);
    let mut out = logits.clone();
    let d = out.data_mut();
    for row in d.chunks_exact_mut(k) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    debug_assert_eq!(d.len(), b * k);
    out
}

fn check_labels(logits: &Tensor, labels: &[u8]) -> Result<()> {
    let (b, k) = (logits.shape()[0], logits.shape()[1]);
    if labels.len() != b {
        return Err(Error::shape_mismatch("loss labels", b, labels.len()));
    }
    if let Some(bad) = labels.iter().find(|&&l| (l as usize) >= k) {
        return Err(Error::Data(format!("label {bad} out of range (classes {k})")));
    }
    Ok(())
}

/// Mean over the batch of `-log softmax(logits)[label]`, computed via
/// log-sum-exp so saturated logits do not overflow.
pub fn loss_ce(logits: &Tensor, labels: &[u8]) -> Result<f64> {
    check_labels(logits, labels)?;
    let (b, k) = (logits.shape()[0], logits.shape()[1]);
    let d = logits.data();
    let mut total = 0.0;
    for (bi, &label) in labels.iter().enumerate() {
        let row = &d[bi * k..(bi + 1) * k];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - row[label as usize];
    }
    let loss = total / b as f64;
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::NonFinite {
            context: "loss_ce".into(),
        })
    }
}

/// Mean squared difference over all `B x K` entries.
pub fn loss_distill(logits: &Tensor, targets: &Tensor) -> Result<f64> {
    if logits.shape() != targets.shape() {
        return Err(Error::shape_mismatch(
            "loss_distill",
            logits.shape(),
            targets.shape(),
        ));
    }
    let n = logits.len() as f64;
    let loss = logits
        .data()
        .iter()
        .zip(targets.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::NonFinite {
            context: "loss_distill".into(),
        })
    }
}

/// Combined objective `CE + lambda * distill`, with either term optional.
pub fn total_loss(
    logits: &Tensor,
    labels: Option<&[u8]>,
    targets: Option<&Tensor>,
    lambda: f64,
) -> Result<f64> {
    let mut loss = 0.0;
    if let Some(labels) = labels {
        loss += loss_ce(logits, labels)?;
    }
    if let Some(targets) = targets {
        loss += lambda * loss_distill(logits, targets)?;
    }
    Ok(loss)
}

/// Loss value plus its exact gradient with respect to the logits:
/// `(softmax - onehot) / B` for cross-entropy, `lambda * (f - target) / B`
/// for the mean-squared logit term (`2 (f - target) / (B K)` with `K = 2`).
pub fn loss_and_dlogits(
    logits: &Tensor,
    labels: Option<&[u8]>,
    targets: Option<&Tensor>,
    lambda: f64,
) -> Result<(f64, Tensor)> {
    let (b, k) = (logits.shape()[0], logits.shape()[1]);
    let mut dlogits = Tensor::zeros(logits.shape());
    let mut loss = 0.0;

    if let Some(labels) = labels {
        loss += loss_ce(logits, labels)?;
        let probs = softmax_rows(logits);
        let pd = probs.data();
        let dd = dlogits.data_mut();
        let inv_b = 1.0 / b as f64;
        for (bi, &label) in labels.iter().enumerate() {
            for j in 0..k {
                let indicator = if j == label as usize { 1.0 } else { 0.0 };
                dd[bi * k + j] += (pd[bi * k + j] - indicator) * inv_b;
            }
        }
    }

    if let Some(targets) = targets {
        loss += lambda * loss_distill(logits, targets)?;
        let scale = lambda * 2.0 / logits.len() as f64;
        let dd = dlogits.data_mut();
        for ((d, a), t) in dd.iter_mut().zip(logits.data()).zip(targets.data()) {
            *d += scale * (a - t);
        }
    }

    Ok((loss, dlogits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn t(shape: &[usize], data: Vec<f64>) -> Tensor {
        Tensor::from_vec(shape, data).unwrap()
    }

    #[test]
    fn uniform_logits_cost_ln2() {
        let logits = t(&[1, 2], vec![0.0, 0.0]);
        for label in [0u8, 1] {
            let loss = loss_ce(&logits, &[label]).unwrap();
            assert_relative_eq!(loss, std::f64::consts::LN_2, max_relative = 1e-15);
        }
    }

    #[test]
    fn saturated_logits_do_not_overflow() {
        let logits = t(&[1, 2], vec![1000.0, 0.0]);
        let loss = loss_ce(&logits, &[0]).unwrap();
        assert!(loss >= 0.0 && loss < 1e-12, "got {loss}");
    }

    #[test]
    fn ce_matches_scalar_oracle_on_asymmetric_logits() {
        // loss for logits [1, -1] with label 1 is ln(1 + e^2)
        let logits = t(&[1, 2], vec![1.0, -1.0]);
        let oracle = (1.0 + 2.0f64.exp()).ln();
        assert_relative_eq!(loss_ce(&logits, &[1]).unwrap(), oracle, max_relative = 1e-15);
        assert_relative_eq!(oracle, 2.126928, max_relative = 1e-6);
    }

    #[test]
    fn distill_zero_for_identical_and_arithmetic_case() {
        let a = t(&[1, 2], vec![0.3, -0.7]);
        assert_eq!(loss_distill(&a, &a).unwrap(), 0.0);

        let f = t(&[1, 2], vec![1.0, 0.0]);
        let g = t(&[1, 2], vec![0.0, 1.0]);
        assert_eq!(loss_distill(&f, &g).unwrap(), 1.0);
    }

    #[test]
    fn distill_gradient_matches_finite_differences() {
        let f = t(&[2, 2], vec![0.4, -0.2, 1.1, 0.9]);
        let target = t(&[2, 2], vec![0.1, 0.3, -0.5, 0.7]);
        let (_, grad) = loss_and_dlogits(&f, None, Some(&target), 1.0).unwrap();
        let h = 1e-6;
        for i in 0..f.len() {
            let mut plus = f.clone();
            plus.data_mut()[i] += h;
            let mut minus = f.clone();
            minus.data_mut()[i] -= h;
            let numeric = (loss_distill(&plus, &target).unwrap()
                - loss_distill(&minus, &target).unwrap())
                / (2.0 * h);
            assert_relative_eq!(grad.data()[i], numeric, max_relative = 1e-6, epsilon = 1e-9);
            // analytic form: 2 (f - target) / (B * K)
            let analytic = 2.0 * (f.data()[i] - target.data()[i]) / f.len() as f64;
            assert_relative_eq!(grad.data()[i], analytic, max_relative = 1e-12);
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = t(&[1, 2], vec![0.0, 0.0]);
        let b = t(&[2, 2], vec![0.0; 4]);
        assert!(loss_distill(&a, &b).is_err());
        assert!(loss_ce(&a, &[0, 1]).is_err());
    }

    #[test]
    fn softmax_rows_sum_to_one_and_ce_nonnegative() {
        let mut state = 0x1234u64;
        for _ in 0..200 {
            state = crate::rng::splitmix64(state);
            let raw: Vec<f64> = (0..8)
                .map(|i| {
                    let x = crate::rng::splitmix64(state ^ i) as f64
                        / u64::MAX as f64;
                    (x - 0.5) * 30.0
                })
                .collect();
            let logits = t(&[4, 2], raw);
            let probs = softmax_rows(&logits);
            for row in probs.data().chunks_exact(2) {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            let labels = [0u8, 1, 0, 1];
            assert!(loss_ce(&logits, &labels).unwrap() >= 0.0);
        }
    }
}
