//! Central finite-difference verification of tape gradients.

use super::tape::{Tape, TapeError, Var};
use super::tensor::Tensor;

/// Per-parameter outcome of a gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckEntry {
    pub name: String,
    pub max_rel_err: f64,
    /// Flat indices whose relative error exceeded the tolerance.
    pub flagged: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
    pub max_rel_err: f64,
    /// The function produced a non-finite output at some evaluation point.
    pub nonfinite_output: bool,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        !self.nonfinite_output && self.entries.iter().all(|e| e.flagged.is_empty())
    }
}

/// Relative error with a `max(1, ..)` denominator so near-zero gradients do
/// not blow the ratio up.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / 1.0f64.max(analytic.abs()).max(numeric.abs())
}

/// Compare the tape gradient of `f` against central differences, entrywise.
///
/// `f` must build a single-element output from the parameter vars it is
/// handed, in the order of `params`. Each evaluation runs on a fresh tape.
pub fn grad_check<F>(
    f: F,
    params: &[(String, Tensor)],
    h: f64,
    tol: f64,
) -> Result<GradCheckReport, TapeError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, TapeError>,
{
    assert!(h > 0.0, "finite-difference step must be positive");

    let eval = |tensors: &[Tensor]| -> Result<f64, TapeError> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = tensors
            .iter()
            .map(|t| tape.param(t.clone()))
            .collect::<Result<_, _>>()?;
        let root = f(&mut tape, &vars)?;
        Ok(tape.value(root).item())
    };

    // Analytic pass.
    let mut tape = Tape::new();
    let vars: Vec<Var> = params
        .iter()
        .map(|(_, t)| tape.param(t.clone()))
        .collect::<Result<_, _>>()?;
    let root = f(&mut tape, &vars)?;
    let mut nonfinite_output = !tape.value(root).item().is_finite();
    let grads = tape.backward(root)?;

    let mut tensors: Vec<Tensor> = params.iter().map(|(_, t)| t.clone()).collect();
    let mut entries = Vec::with_capacity(params.len());
    let mut max_rel_err: f64 = 0.0;

    for (pi, (name, _)) in params.iter().enumerate() {
        let analytic = grads.wrt(vars[pi]).expect("param gradient").clone();
        let mut entry = GradCheckEntry {
            name: name.clone(),
            max_rel_err: 0.0,
            flagged: Vec::new(),
        };
        for ei in 0..analytic.numel() {
            let orig = tensors[pi].data()[ei];
            tensors[pi].data_mut()[ei] = orig + h;
            let plus = eval(&tensors)?;
            tensors[pi].data_mut()[ei] = orig - h;
            let minus = eval(&tensors)?;
            tensors[pi].data_mut()[ei] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                nonfinite_output = true;
                entry.flagged.push(ei);
                continue;
            }
            let numeric = (plus - minus) / (2.0 * h);
            let e = rel_err(analytic.data()[ei], numeric);
            if e > entry.max_rel_err {
                entry.max_rel_err = e;
            }
            if e > tol {
                entry.flagged.push(ei);
            }
        }
        max_rel_err = max_rel_err.max(entry.max_rel_err);
        entries.push(entry);
    }

    Ok(GradCheckReport {
        entries,
        max_rel_err,
        nonfinite_output,
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_is_exact() {
        // f(w) = w . x is linear, so central differences are exact up to rounding.
        let x = Tensor::matrix(3, 1, vec![0.4, -1.1, 2.3]).unwrap();
        let params = vec![(
            "w".to_string(),
            Tensor::matrix(1, 3, vec![0.2, 0.5, -0.9]).unwrap(),
        )];
        let report = grad_check(
            move |tape, vars| {
                let xv = tape.input(x.clone())?;
                let y = tape.matmul(vars[0], xv)?;
                tape.sum(y)
            },
            &params,
            1e-5,
            1e-10,
        )
        .unwrap();
        assert!(report.passed(), "max rel err {}", report.max_rel_err);
        assert!(report.max_rel_err < 1e-10);
    }

    #[test]
    fn mean_tanh_matmul_matches_differences() {
        let w = Tensor::matrix(
            4,
            3,
            vec![
                0.31, -0.52, 0.17, 0.88, -0.21, 0.05, -0.73, 0.44, 0.62, 0.09, -0.36, 0.27,
            ],
        )
        .unwrap();
        let v = Tensor::matrix(3, 1, vec![0.5, -0.8, 1.2]).unwrap();
        let params = vec![("w".to_string(), w)];
        let report = grad_check(
            move |tape, vars| {
                let vv = tape.input(v.clone())?;
                let prod = tape.matmul(vars[0], vv)?;
                let t = tape.tanh(prod)?;
                tape.mean(t)
            },
            &params,
            1e-5,
            1e-6,
        )
        .unwrap();
        assert!(report.passed(), "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn corrupted_gradient_is_flagged() {
        // Negative control: an analytic gradient with one backward rule scaled
        // by 2 must not slip past the comparison.
        let mut tape = Tape::new();
        let w = tape.param(Tensor::vector(vec![1.3])).unwrap();
        let y = tape.square(w).unwrap();
        let s = tape.sum(y).unwrap();
        let grads = tape.backward(s).unwrap();
        let corrupted = grads.wrt(w).unwrap().data()[0] * 2.0;
        let h = 1e-5;
        let numeric = (((1.3 + h) * (1.3 + h)) - ((1.3 - h) * (1.3 - h))) / (2.0 * h);
        assert!(rel_err(corrupted, numeric) > 1e-6);
        assert!(rel_err(corrupted / 2.0, numeric) < 1e-6);
    }

    #[test]
    fn nonfinite_output_is_reported() {
        let params = vec![("w".to_string(), Tensor::vector(vec![700.0]))];
        let report = grad_check(
            |tape, vars| {
                // 700^256 overflows f64: the checker must report it.
                let mut v = vars[0];
                for _ in 0..8 {
                    v = tape.square(v)?;
                }
                tape.sum(v)
            },
            &params,
            1e-5,
            1e-6,
        )
        .unwrap();
        assert!(report.nonfinite_output);
        assert!(!report.passed());
    }
}
