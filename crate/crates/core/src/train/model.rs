use rand::Rng;

use crate::tensor::{Tape, Tensor, Var};
use crate::{Error, Result};

/// Fully connected ReLU network whose penultimate activations are the latent representation.
///
/// Parameters are stored as `[W₀, b₀, W₁, b₁, …]` with `Wₗ` of shape in×out.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    widths: Vec<usize>,
    dropout_prob: f64,
    params: Vec<Tensor>,
}

/// Outputs of one forward traversal.
#[derive(Debug, Clone, Copy)]
pub struct Forward {
    pub logits: Var,
    pub latents: Var,
}

impl MlpModel {
    /// `widths` runs input → hidden… → latent → classes, so at least three entries.
    pub fn new<R: Rng>(widths: &[usize], dropout_prob: f64, rng: &mut R) -> Result<Self> {
        if widths.len() < 3 {
            return Err(Error::Config(format!(
                "model needs input, latent and output widths, got {widths:?}"
            )));
        }
        if widths.contains(&0) {
            return Err(Error::Config(format!("zero layer width in {widths:?}")));
        }
        if *widths.last().unwrap() < 2 {
            return Err(Error::Config("classifier needs at least 2 outputs".into()));
        }
        if !(0.0..1.0).contains(&dropout_prob) {
            return Err(Error::Config(format!("dropout probability {dropout_prob} outside [0, 1)")));
        }
        let mut params = Vec::new();
        for w in widths.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            let weights = (0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)).collect();
            params.push(Tensor::matrix(fan_in, fan_out, weights)?);
            params.push(Tensor::vector(vec![0.0; fan_out])?);
        }
        Ok(MlpModel { widths: widths.to_vec(), dropout_prob, params })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn dropout_prob(&self) -> f64 {
        self.dropout_prob
    }

    /// Layer index (into `widths`) whose activations are the latent representation.
    pub fn latent_tap(&self) -> usize {
        self.widths.len() - 2
    }

    pub fn latent_dim(&self) -> usize {
        self.widths[self.latent_tap()]
    }

    pub fn num_classes(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vec<Tensor>) {
        assert_eq!(params.len(), self.params.len());
        self.params = params;
    }

    /// Puts every parameter on `tape` as a differentiable leaf.
    pub fn register(&self, tape: &mut Tape) -> Vec<Var> {
        self.params.iter().map(|p| tape.param(p.clone())).collect()
    }

    /// One traversal yielding logits (N×C) and latents (N×d).
    ///
    /// With `dropout` set, inverted dropout is applied to every hidden
    /// activation before it feeds the next layer; the latent tap itself is
    /// read before its dropout mask.
    pub fn forward<R: Rng>(
        &self,
        tape: &mut Tape,
        params: &[Var],
        input: Var,
        mut dropout: Option<&mut R>,
    ) -> Result<Forward> {
        if tape.value(input).cols() != self.widths[0] {
            return Err(Error::InvalidInput(format!(
                "model expects {} features, got {:?}",
                self.widths[0],
                tape.value(input).shape()
            )));
        }
        let layers = self.widths.len() - 1;
        let mut h = input;
        let mut latents = input;
        for l in 0..layers {
            let z = tape.matmul(h, params[2 * l])?;
            h = tape.add_row(z, params[2 * l + 1])?;
            if l + 1 == layers {
                break;
            }
            h = tape.relu(h)?;
            if l + 1 == self.latent_tap() {
                latents = h;
            }
            if let Some(rng) = dropout.as_deref_mut() {
                if self.dropout_prob > 0.0 {
                    let keep = 1.0 - self.dropout_prob;
                    let mask = (0..tape.value(h).len())
                        .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                        .collect();
                    h = tape.apply_mask(h, mask)?;
                }
            }
        }
        Ok(Forward { logits: h, latents })
    }

    /// Evaluation-mode logits and latents for a feature matrix.
    pub fn predict(&self, features: &Tensor) -> Result<(Tensor, Tensor)> {
        let mut tape = Tape::new();
        let params: Vec<Var> = self.params.iter().map(|p| tape.constant(p.clone())).collect();
        let x = tape.constant(features.clone());
        let out = self.forward::<rand_chacha::ChaCha8Rng>(&mut tape, &params, x, None)?;
        Ok((tape.value(out.logits).clone(), tape.value(out.latents).clone()))
    }
}
