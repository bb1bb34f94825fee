use super::NnError;

/// Softmax with max subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-log softmax(logits)[label]`, evaluated as `logsumexp(z - max) - (z_label - max)`.
pub fn cross_entropy(logits: &[f64], label: usize) -> Result<f64, NnError> {
    if label >= logits.len() {
        return Err(NnError::OutOfRangeLabel { label, class_count: logits.len() });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse: f64 = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    Ok(lse - (logits[label] - max))
}

/// Loss and its gradient w.r.t. the logits: `softmax - onehot(label)`.
pub fn cross_entropy_with_grad(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>), NnError> {
    let loss = cross_entropy(logits, label)?;
    let mut grad = softmax(logits);
    grad[label] -= 1.0;
    Ok((loss, grad))
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_log_class_count() {
        let loss = cross_entropy(&[0.25; 43], 7).unwrap();
        assert!((loss - 43f64.ln()).abs() < 1e-12);
        assert!((loss - 3.76120).abs() < 1e-5);
    }

    #[test]
    fn saturated_logits() {
        let mut z = vec![0.0; 5];
        z[2] = 1000.0;
        assert!(cross_entropy(&z, 2).unwrap() < 1e-6);
        assert!(cross_entropy(&z, 0).unwrap().is_finite());
    }

    #[test]
    fn out_of_range_label() {
        assert!(matches!(cross_entropy(&[0.0, 1.0], 2), Err(NnError::OutOfRangeLabel { label: 2, class_count: 2 })));
    }

    #[test]
    fn gradient_sums_to_zero() {
        let (_, g) = cross_entropy_with_grad(&[0.3, -1.2, 2.0, 0.0], 1).unwrap();
        assert!(g.iter().sum::<f64>().abs() < 1e-12);
        assert!(g[1] < 0.0);
    }
}
