//! Central finite-difference checks of the tape's backward rules.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{AdError, Tape, Tensor, Var};

/// Finite-difference step.
pub const STEP: f64 = 1e-5;
/// Gradients smaller than this in magnitude are compared absolutely.
const FLOOR: f64 = 1e-6;

pub type Builder = Box<dyn Fn(&mut Tape, &[Var]) -> Var>;

/// A differentiable scalar function of some input tensors.
pub struct GradCase {
    pub label: String,
    pub inputs: Vec<Tensor>,
    pub build: Builder,
}

impl GradCase {
    pub fn new(label: impl Into<String>, inputs: Vec<Tensor>, build: impl Fn(&mut Tape, &[Var]) -> Var + 'static) -> Self {
        Self { label: label.into(), inputs, build: Box::new(build) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckEntry {
    pub label: String,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradcheckReport {
    pub entries: Vec<GradcheckEntry>,
}

impl GradcheckReport {
    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &GradcheckEntry> {
        self.entries.iter().filter(|e| !e.passed)
    }
}

impl fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            let status = if e.passed { "ok" } else { "FAIL" };
            writeln!(f, "{status:4} {:<28} max rel err {:.3e} (tol {:.0e})", e.label, e.max_rel_error, e.tolerance)?;
        }
        Ok(())
    }
}

fn evaluate(case: &GradCase, inputs: &[Tensor]) -> Result<f64, AdError> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = (case.build)(&mut tape, &vars);
    tape.check()?;
    Ok(tape.value(out).item())
}

/// Compares analytic gradients of every input element against central
/// differences.
pub fn gradcheck(case: &GradCase, tolerance: f64) -> Result<GradcheckEntry, AdError> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = case.inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = (case.build)(&mut tape, &vars);
    let grads = tape.backward(out)?;

    let mut worst = 0.0f64;
    let mut perturbed = case.inputs.clone();
    for (k, input) in case.inputs.iter().enumerate() {
        let analytic = grads.get_or_zeros(vars[k], input.shape());
        for i in 0..input.len() {
            let x = input.data()[i];
            perturbed[k].data_mut()[i] = x + STEP;
            let up = evaluate(case, &perturbed)?;
            perturbed[k].data_mut()[i] = x - STEP;
            let down = evaluate(case, &perturbed)?;
            perturbed[k].data_mut()[i] = x;
            let numeric = (up - down) / (2.0 * STEP);
            let a = analytic.data()[i];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
            worst = worst.max(err);
        }
    }
    Ok(GradcheckEntry { label: case.label.clone(), max_rel_error: worst, tolerance, passed: worst <= tolerance })
}

pub fn run_cases(cases: &[GradCase], tolerance: f64) -> Result<GradcheckReport, AdError> {
    let entries = cases.iter().map(|c| gradcheck(c, tolerance)).collect::<Result<_, _>>()?;
    Ok(GradcheckReport { entries })
}

pub fn randn<R: Rng>(rng: &mut R, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| scale * Distribution::<f64>::sample(&StandardNormal, rng)).collect::<Vec<f64>>();
    Tensor::new(shape.to_vec(), data).expect("randn shape")
}

/// Uniform values in `[lo, hi)`.
pub fn uniform<R: Rng>(rng: &mut R, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(lo..hi)).collect::<Vec<f64>>();
    Tensor::new(shape.to_vec(), data).expect("uniform shape")
}

/// Reduces `out` to a scalar through a fixed random projection so every
/// output element carries a distinct weight.
pub fn project(tape: &mut Tape, out: Var, weights: &Tensor) -> Var {
    let w = tape.leaf(weights.clone());
    let prod = tape.mul(out, w);
    tape.sum(prod)
}

/// Values bounded away from zero, for relu/clamp/minimum kinks.
fn away_from<R: Rng>(rng: &mut R, shape: &[usize], kink: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let mag = rng.random_range(0.1..1.5);
            if rng.random_bool(0.5) {
                kink + mag
            } else {
                kink - mag
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).expect("shape")
}

/// One randomized case per primitive op kind.
pub fn primitive_cases<R: Rng>(rng: &mut R) -> Vec<GradCase> {
    let (b, f) = (3, 4);
    let mut cases = Vec::new();
    macro_rules! case {
        ($label:expr, $inputs:expr, $out_shape:expr, |$tape:ident, $v:ident| $body:expr) => {{
            let w = randn(rng, &$out_shape, 1.0);
            cases.push(GradCase::new($label, $inputs, move |$tape: &mut Tape, $v: &[Var]| {
                let out = $body;
                project($tape, out, &w)
            }));
        }};
    }
    case!("add (broadcast row)", vec![randn(rng, &[b, f], 1.0), randn(rng, &[f], 1.0)], [b, f], |t, v| t.add(v[0], v[1]));
    case!("sub (broadcast col)", vec![randn(rng, &[b, f], 1.0), randn(rng, &[b, 1], 1.0)], [b, f], |t, v| t.sub(v[0], v[1]));
    case!("mul (broadcast)", vec![randn(rng, &[b, f], 1.0), randn(rng, &[b, 1], 1.0)], [b, f], |t, v| t.mul(v[0], v[1]));
    case!("div", vec![randn(rng, &[b, f], 1.0), uniform(rng, &[b, f], 0.5, 2.0)], [b, f], |t, v| t.div(v[0], v[1]));
    case!("div (broadcast col)", vec![randn(rng, &[b, f], 1.0), uniform(rng, &[b, 1], 0.5, 2.0)], [b, f], |t, v| t.div(v[0], v[1]));
    case!("neg", vec![randn(rng, &[b, f], 1.0)], [b, f], |t, v| t.neg(v[0]));
    case!("scale", vec![randn(rng, &[b, f], 1.0)], [b, f], |t, v| t.scale(v[0], -1.7));
    case!("add_scalar", vec![randn(rng, &[b, f], 1.0)], [b, f], |t, v| t.add_scalar(v[0], 0.3));
    case!("affine", vec![randn(rng, &[b, 5], 1.0), randn(rng, &[5, f], 0.5), randn(rng, &[f], 0.5)], [b, f], |t, v| t.affine(v[0], v[1], v[2]));
    case!("matmul", vec![randn(rng, &[b, 5], 1.0), randn(rng, &[5, f], 0.5)], [b, f], |t, v| t.matmul(v[0], v[1]));
    case!("relu", vec![away_from(rng, &[b, f], 0.0)], [b, f], |t, v| t.relu(v[0]));
    case!("tanh", vec![randn(rng, &[b, f], 1.0)], [b, f], |t, v| t.tanh(v[0]));
    case!("sigmoid", vec![randn(rng, &[b, f], 2.0)], [b, f], |t, v| t.sigmoid(v[0]));
    case!("exp", vec![randn(rng, &[b, f], 1.0)], [b, f], |t, v| t.exp(v[0]));
    case!("log", vec![uniform(rng, &[b, f], 0.2, 3.0)], [b, f], |t, v| t.log(v[0]));
    case!("square", vec![randn(rng, &[b, f], 1.0)], [b, f], |t, v| t.square(v[0]));
    case!("clamp", vec![away_from(rng, &[b, f], 0.0)], [b, f], |t, v| t.clamp(v[0], -0.05, 0.05));
    case!("clamp (interior)", vec![uniform(rng, &[b, f], -0.9, 0.9)], [b, f], |t, v| t.clamp(v[0], -1.0, 1.0));
    case!("minimum", vec![randn(rng, &[b, f], 1.0), randn(rng, &[b, f], 1.0)], [b, f], |t, v| t.minimum(v[0], v[1]));
    case!("sum", vec![randn(rng, &[b, f], 1.0)], [], |t, v| t.sum(v[0]));
    case!("mean", vec![randn(rng, &[b, f], 1.0)], [], |t, v| t.mean(v[0]));
    case!("sum_axis 0", vec![randn(rng, &[b, f], 1.0)], [1, f], |t, v| t.sum_axis(v[0], 0));
    case!("mean_axis 1", vec![randn(rng, &[b, f], 1.0)], [b, 1], |t, v| t.mean_axis(v[0], 1));
    case!("var_axis 1", vec![randn(rng, &[b, f], 1.0)], [b, 1], |t, v| t.var_axis(v[0], 1));
    case!("var_axis 0", vec![randn(rng, &[b, f], 1.0)], [1, f], |t, v| t.var_axis(v[0], 0));
    case!("concat_cols", vec![randn(rng, &[b, 2], 1.0), randn(rng, &[b, 3], 1.0)], [b, 5], |t, v| t.concat_cols(v[0], v[1]));
    cases
}

/// Single dense layer, the linear reference case.
pub fn linear_case<R: Rng>(rng: &mut R) -> GradCase {
    let w = randn(rng, &[4, 3], 1.0);
    GradCase::new(
        "linear layer",
        vec![randn(rng, &[4, 6], 1.0), randn(rng, &[6, 3], 0.4), randn(rng, &[3], 0.4)],
        move |t, v| {
            let y = t.affine(v[0], v[1], v[2]);
            project(t, y, &w)
        },
    )
}

/// Four stacked tanh layers.
pub fn tanh_chain_case<R: Rng>(rng: &mut R) -> GradCase {
    let width = 5;
    let mut inputs = vec![randn(rng, &[3, width], 1.0)];
    for _ in 0..4 {
        inputs.push(randn(rng, &[width, width], 0.6));
        inputs.push(randn(rng, &[width], 0.3));
    }
    let w = randn(rng, &[3, width], 1.0);
    GradCase::new("tanh chain depth 4", inputs, move |t, v| {
        let mut h = v[0];
        for l in 0..4 {
            let z = t.affine(h, v[1 + 2 * l], v[2 + 2 * l]);
            h = t.tanh(z);
        }
        project(t, h, &w)
    })
}

#[cfg(test)]
mod tests {
    use std::rc::Rc;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn every_primitive_passes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let report = run_cases(&primitive_cases(&mut rng), 1e-4).unwrap();
        assert!(report.all_passed(), "{report}");
    }

    #[test]
    fn reference_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        assert!(gradcheck(&linear_case(&mut rng), 1e-6).unwrap().passed);
        assert!(gradcheck(&tanh_chain_case(&mut rng), 1e-4).unwrap().passed);
    }

    #[test]
    fn corrupted_backward_is_caught() {
        // x² with a backward rule of x instead of 2x.
        let case = GradCase::new("broken square", vec![Tensor::vector(vec![0.5, -1.2, 2.0])], |t, v| {
            let x = t.value(v[0]).clone();
            let y = x.map(|a| a * a);
            let out = t.custom(&[v[0]], y, Rc::new(|g, inputs, _| vec![g.zip_map(inputs[0], |g, x| g * x)]));
            t.sum(out)
        });
        let entry = gradcheck(&case, 1e-4).unwrap();
        assert!(!entry.passed);
        assert!(entry.max_rel_error > 0.1);
    }
}
