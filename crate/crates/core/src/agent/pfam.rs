//! Parameter-free attention over the feature axis of a `[batch, features]`
//! activation.

use crate::autodiff::{AdError, Tape, Var};

/// Default energy regularizer.
pub const OMEGA: f64 = 1e-4;

/// Reweights each feature by `sigmoid(1/e)` with
/// `e = 4(σ̂²+ω) / ((x−μ̂)² + 2σ̂² + 2ω)`, where μ̂ and σ̂² are the per-sample
/// mean and population variance. Gradients flow through the statistics.
pub fn pfam(tape: &mut Tape, x: Var, omega: f64) -> Result<Var, AdError> {
    let shape = tape.value(x).shape().to_vec();
    if shape.len() != 2 || shape[1] < 2 {
        return Err(AdError::Domain { op: "pfam", msg: format!("need [batch, features >= 2], got {shape:?}") });
    }
    let mu = tape.mean_axis(x, 1);
    let var = tape.var_axis(x, 1);
    let centered = tape.sub(x, mu);
    let dev = tape.square(centered);
    let two_var = tape.scale(var, 2.0);
    let spread = tape.add(dev, two_var);
    let denom = tape.add_scalar(spread, 2.0 * omega);
    let var_reg = tape.add_scalar(var, omega);
    let num = tape.scale(var_reg, 4.0);
    let inv_energy = tape.div(denom, num);
    let weight = tape.sigmoid(inv_energy);
    Ok(tape.mul(weight, x))
}

/// Scalar reference for one feature vector.
pub fn pfam_reference(x: &[f64], omega: f64) -> Vec<f64> {
    let n = x.len() as f64;
    let mu = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
    x.iter()
        .map(|&t| {
            let e = 4.0 * (var + omega) / ((t - mu).powi(2) + 2.0 * var + 2.0 * omega);
            crate::autodiff::sigmoid(1.0 / e) * t
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::gradcheck::{gradcheck, project, randn, GradCase};
    use crate::autodiff::{sigmoid, Tensor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn run(rows: &[&[f64]], omega: f64) -> Tensor {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_rows(rows).unwrap());
        let y = pfam(&mut tape, x, omega).unwrap();
        tape.check().unwrap();
        tape.value(y).clone()
    }

    #[test]
    fn two_feature_example() {
        let y = run(&[&[1.0, 3.0]], 1e-4);
        let w = sigmoid(3.0002 / 4.0004);
        assert!((y.data()[0] - w).abs() < 1e-12);
        assert!((y.data()[1] - 3.0 * w).abs() < 1e-12);
        assert!((y.data()[0] - 0.6792).abs() < 1e-4);
        assert!((y.data()[1] - 2.0376).abs() < 1e-4);
    }

    #[test]
    fn constant_input_scales_uniformly() {
        let y = run(&[&[2.5; 6], &[-1.0; 6]], OMEGA);
        let s = sigmoid(0.5);
        for (i, v) in y.data().iter().enumerate() {
            let x = if i < 6 { 2.5 } else { -1.0 };
            assert!((v - s * x).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_reference_and_keeps_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = randn(&mut rng, &[5, 7], 2.0);
        let mut tape = Tape::new();
        let v = tape.leaf(x.clone());
        let y = pfam(&mut tape, v, OMEGA).unwrap();
        assert_eq!(tape.value(y).shape(), &[5, 7]);
        for r in 0..5 {
            let want = pfam_reference(x.row(r), OMEGA);
            for (a, b) in tape.value(y).row(r).iter().zip(&want) {
                assert!((a - b).abs() < 1e-12);
            }
            for (o, i) in tape.value(y).row(r).iter().zip(x.row(r)) {
                let w = o / i;
                assert!(w > 0.0 && w < 1.0);
            }
        }
    }

    #[test]
    fn rejects_single_feature() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::new(vec![3, 1], vec![1.0, 2.0, 3.0]).unwrap());
        assert!(matches!(pfam(&mut tape, x, OMEGA), Err(AdError::Domain { .. })));
    }

    #[test]
    fn gradient_flows_through_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = randn(&mut rng, &[4, 6], 1.0);
        let case = GradCase::new("pfam", vec![randn(&mut rng, &[4, 6], 1.0)], move |t, v| {
            let y = pfam(t, v[0], OMEGA).unwrap();
            project(t, y, &w)
        });
        let entry = gradcheck(&case, 1e-4).unwrap();
        assert!(entry.passed, "{entry:?}");
    }
}
