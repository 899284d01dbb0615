use alloc::string::String;

use super::{Graph, Tensor, TensorError, Var};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GradCheckError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("non-finite {what} at coordinate {coordinate}")]
    NonFinite { coordinate: usize, what: String },
}

/// Compares the autodiff gradient of a scalar function against central
/// finite differences with step `h`, returning the largest
/// `|analytic - numeric| / max(1, |analytic|, |numeric|)` over coordinates.
///
/// `f` receives a fresh graph and the recorded input each time it is called.
pub fn grad_check<F>(f: F, x: &Tensor, h: f64) -> Result<f64, GradCheckError>
where
    F: Fn(&mut Graph, Var) -> Result<Var, TensorError>,
{
    let eval = |t: Tensor| -> Result<f64, TensorError> {
        let mut g = Graph::new();
        let v = g.constant(t);
        let out = f(&mut g, v)?;
        Ok(g.value(out).values()[0])
    };

    let mut g = Graph::new();
    let v = g.param(x.clone());
    let out = f(&mut g, v)?;
    let base = g.value(out).values()[0];
    if !base.is_finite() {
        return Err(GradCheckError::NonFinite { coordinate: 0, what: "function value".into() });
    }
    g.backward(out)?;
    let zeros;
    let analytic = match g.grad(v) {
        Some(a) => a,
        None => {
            zeros = alloc::vec![0.0; x.len()];
            &zeros
        }
    };

    let mut worst = 0.0f64;
    for (i, &a) in analytic.iter().enumerate() {
        let mut plus = x.clone();
        plus.values_mut()[i] += h;
        let mut minus = x.clone();
        minus.values_mut()[i] -= h;
        let fp = eval(plus)?;
        let fm = eval(minus)?;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(GradCheckError::NonFinite { coordinate: i, what: "perturbed value".into() });
        }
        let numeric = (fp - fm) / (2.0 * h);
        if !a.is_finite() {
            return Err(GradCheckError::NonFinite { coordinate: i, what: "analytic gradient".into() });
        }
        let err = (a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs());
        worst = worst.max(err);
    }
    Ok(worst)
}
