//! Central finite-difference check of reverse-mode gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Tape, Tensor, TensorError, Var};

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub step: f64,
    pub tol: f64,
    /// Denominator floor of the relative error, so that near-zero gradients
    /// are compared in absolute terms.
    pub floor: f64,
    /// Check at most this many randomly chosen coordinates per input.
    pub max_coords_per_input: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { step: 1e-5, tol: 1e-4, floor: 1e-6, max_coords_per_input: None, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(input index, flat coordinate)` of the worst disagreement.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
    /// Coordinates whose perturbation crossed a ReLU or max switch; the
    /// function is not differentiable across them, so they are not scored.
    pub skipped_kinks: usize,
    pub passed: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum GradCheckError {
    #[error("non-finite value encountered during gradient check")]
    NonFinite,
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Compares the reverse-mode gradient of a scalar function against central
/// differences.
///
/// `f` receives a fresh tape and one leaf per entry of `inputs`, and returns
/// the scalar output node.
pub fn grad_check<F>(f: F, inputs: &[Tensor], opts: GradCheckOptions) -> Result<GradCheckReport, GradCheckError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, TensorError>,
{
    let eval = |values: &[Tensor]| -> Result<(f64, u64), GradCheckError> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|v| tape.leaf(v.clone())).collect();
        let out = f(&mut tape, &vars)?;
        let y = tape.value(out).item();
        if !y.is_finite() {
            return Err(GradCheckError::NonFinite);
        }
        Ok((y, tape.branch_signature()))
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|v| tape.leaf(v.clone())).collect();
    let out = f(&mut tape, &vars)?;
    if !tape.value(out).item().is_finite() {
        return Err(GradCheckError::NonFinite);
    }
    let base_signature = tape.branch_signature();
    let grads = tape.backward(out)?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut work: Vec<Tensor> = inputs.to_vec();
    let mut report = GradCheckReport { max_rel_error: 0.0, worst: None, checked: 0, skipped_kinks: 0, passed: true };

    for (k, input) in inputs.iter().enumerate() {
        let analytic = grads.get(vars[k]).cloned().unwrap_or_else(|| Tensor::zeros(input.rows(), input.cols()));
        if !analytic.all_finite() {
            return Err(GradCheckError::NonFinite);
        }
        let coords: Vec<usize> = match opts.max_coords_per_input {
            Some(limit) if limit < input.len() => {
                let mut picked = sample(&mut rng, input.len(), limit).into_vec();
                picked.sort_unstable();
                picked
            }
            _ => (0..input.len()).collect(),
        };
        for idx in coords {
            let original = input.data()[idx];
            work[k].data_mut()[idx] = original + opts.step;
            let (plus, sig_plus) = eval(&work)?;
            work[k].data_mut()[idx] = original - opts.step;
            let (minus, sig_minus) = eval(&work)?;
            work[k].data_mut()[idx] = original;
            if sig_plus != base_signature || sig_minus != base_signature {
                report.skipped_kinks += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * opts.step);
            let a = analytic.data()[idx];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(opts.floor);
            report.checked += 1;
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((k, idx));
            }
        }
    }
    report.passed = report.max_rel_error <= opts.tol;
    Ok(report)
}
