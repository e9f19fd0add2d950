use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Compares tape gradients of a scalar function against central differences.
///
/// `f` records the function on a fresh tape given one `Var` per input
/// tensor. Returns the maximum over all coordinates of
/// `|analytic − numeric| / max(1, |numeric|)`.
pub fn finite_difference_check<F>(f: F, point: &[Tensor], eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |inputs: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
        let out = f(&mut tape, &vars)?;
        let v = tape.value(out)[0];
        if !v.is_finite() {
            return Err(Error::NonFinite(
                "function value during finite differences".into(),
            ));
        }
        Ok(v)
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = point.iter().map(|t| tape.param(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    if !tape.value(out)[0].is_finite() {
        return Err(Error::NonFinite("function value at the check point".into()));
    }
    tape.backward(out)?;
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .map(|&v| tape.grad(v).map(<[f64]>::to_vec).unwrap_or_default())
        .collect();

    let mut worst = 0.0f64;
    let mut probe: Vec<Tensor> = point.to_vec();
    for (ti, t) in point.iter().enumerate() {
        for j in 0..t.numel() {
            let x0 = t.data()[j];
            probe[ti].data_mut()[j] = x0 + eps;
            let up = eval(&probe)?;
            probe[ti].data_mut()[j] = x0 - eps;
            let down = eval(&probe)?;
            probe[ti].data_mut()[j] = x0;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic[ti].get(j).copied().unwrap_or(0.0);
            worst = worst.max((a - numeric).abs() / numeric.abs().max(1.0));
        }
    }
    Ok(worst)
}
