use super::{Tape, Tensor, TensorError, Var};

/// Compares tape gradients of a scalar function against central differences.
///
/// Returns the largest componentwise `|analytic − numeric| / max(|analytic|, |numeric|, 1e-8)`.
pub fn check_gradient<F, E>(f: F, x: &Tensor, h: f64) -> Result<f64, E>
where
    F: Fn(&mut Tape, Var) -> Result<Var, E>,
    E: From<TensorError>,
{
    if !(h > 0.0) {
        return Err(TensorError::invalid("check_gradient", "step must be positive").into());
    }
    let mut tape = Tape::new();
    let xv = tape.param(x.clone());
    let root = f(&mut tape, xv)?;
    let analytic = tape.backward(root)?.wrt(xv).to_vec();

    let eval = |data: Vec<f64>| -> Result<f64, E> {
        let mut tape = Tape::new();
        let v = tape.constant(Tensor::new(x.shape().to_vec(), data)?);
        let root = f(&mut tape, v)?;
        Ok(tape.value(root).item())
    };

    let mut worst = 0.0f64;
    for (i, a) in analytic.iter().enumerate() {
        let mut plus = x.data().to_vec();
        plus[i] += h;
        let mut minus = x.data().to_vec();
        minus[i] -= h;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * h);
        let denom = a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}
