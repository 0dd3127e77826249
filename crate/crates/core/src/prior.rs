//! Variational prior over source sets.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::SeedVector;
use crate::numeric::{Activation, Gradients, MlpParams, MlpVars, Tape, Var, PROB_EPS};

pub const DEFAULT_LATENT_DIM: usize = 8;
/// Hidden widths of the encoder; the decoder mirrors them.
pub const PRIOR_HIDDEN: [usize; 2] = [64, 32];
/// Bound on the encoded log-variance.
pub const LOGVAR_LIMIT: f64 = 30.0;

/// Encoder `q(z | s)`, decoder `p(s | z)` and the mean training posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct VaePrior {
    encoder: MlpParams,
    decoder: MlpParams,
    latent_dim: usize,
    /// Mean posterior mean over the training seeds; `None` until trained.
    pub z_bar: Option<Vec<f64>>,
}

/// Tape leaves of one prior registration.
#[derive(Debug, Clone)]
pub struct PriorVars {
    encoder: MlpVars,
    decoder: MlpVars,
}

impl PriorVars {
    pub fn gradient_into(&self, grads: &Gradients, out: &mut Vec<f64>) {
        self.encoder.gradient_into(grads, out);
        self.decoder.gradient_into(grads, out);
    }

    /// Decoder-only gradient.
    pub fn decoder_gradient_into(&self, grads: &Gradients, out: &mut Vec<f64>) {
        self.decoder.gradient_into(grads, out);
    }
}

impl VaePrior {
    pub fn new<R: Rng + ?Sized>(n_nodes: usize, latent_dim: usize, rng: &mut R) -> Self {
        let [h1, h2] = PRIOR_HIDDEN;
        let encoder = MlpParams::glorot(
            &[n_nodes, h1, h2, 2 * latent_dim],
            &[Activation::Tanh, Activation::Tanh, Activation::Identity],
            rng,
        );
        let decoder = MlpParams::glorot(
            &[latent_dim, h2, h1, n_nodes],
            &[Activation::Tanh, Activation::Tanh, Activation::Sigmoid],
            rng,
        );
        Self { encoder, decoder, latent_dim, z_bar: None }
    }

    pub fn from_parts(encoder: MlpParams, decoder: MlpParams, z_bar: Option<Vec<f64>>) -> Result<Self> {
        let d = decoder.input_dim();
        if encoder.output_dim() != 2 * d || encoder.input_dim() != decoder.output_dim() {
            return Err(Error::shape(format!(
                "encoder {} -> {} does not pair with decoder {} -> {}",
                encoder.input_dim(),
                encoder.output_dim(),
                d,
                decoder.output_dim()
            )));
        }
        if z_bar.as_ref().is_some_and(|z| z.len() != d) {
            return Err(Error::shape("mean latent has the wrong length"));
        }
        Ok(Self { encoder, decoder, latent_dim: d, z_bar })
    }

    pub fn encoder(&self) -> &MlpParams {
        &self.encoder
    }

    pub fn decoder(&self) -> &MlpParams {
        &self.decoder
    }

    pub fn encoder_mut(&mut self) -> &mut MlpParams {
        &mut self.encoder
    }

    pub fn decoder_mut(&mut self) -> &mut MlpParams {
        &mut self.decoder
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn n_nodes(&self) -> usize {
        self.decoder.output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count()
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        self.encoder.flatten_into(out);
        self.decoder.flatten_into(out);
    }

    pub fn assign(&mut self, flat: &[f64]) -> Result<usize> {
        let a = self.encoder.assign(flat)?;
        let b = self.decoder.assign(&flat[a..])?;
        Ok(a + b)
    }

    /// Posterior mean and standard deviation of `q(z | s)`.
    pub fn encode(&self, s: &SeedVector) -> Result<(Vec<f64>, Vec<f64>)> {
        let out = self.encoder.forward(&s.to_f64())?;
        let (mu, logvar) = out.split_at(self.latent_dim);
        let sigma = logvar.iter().map(|lv| (0.5 * lv.clamp(-LOGVAR_LIMIT, LOGVAR_LIMIT)).exp()).collect();
        Ok((mu.to_vec(), sigma))
    }

    /// Per-node source probabilities, clamped into `[1e-7, 1 - 1e-7]`.
    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.latent_dim {
            return Err(Error::shape(format!("latent of length {} for dimension {}", z.len(), self.latent_dim)));
        }
        Ok(self.decoder.forward(z)?.into_iter().map(|p| p.clamp(PROB_EPS, 1.0 - PROB_EPS)).collect())
    }

    pub fn register(&self, tape: &mut Tape) -> PriorVars {
        PriorVars { encoder: self.encoder.register(tape), decoder: self.decoder.register(tape) }
    }

    /// Records the clamped decoder output for latent `z`.
    pub fn record_decode(&self, tape: &mut Tape, vars: &PriorVars, z: Var) -> Result<Var> {
        let p = self.decoder.record(tape, &vars.decoder, z)?;
        Ok(tape.clamp(p, PROB_EPS, 1.0 - PROB_EPS))
    }

    /// Records `-ELBO(s)` with a fixed standard-normal `noise`; also returns
    /// the posterior-mean node.
    pub fn record_neg_elbo(
        &self,
        tape: &mut Tape,
        vars: &PriorVars,
        s: &SeedVector,
        noise: &[f64],
    ) -> Result<(Var, Var)> {
        let d = self.latent_dim;
        if noise.len() != d {
            return Err(Error::shape("noise length differs from latent dimension"));
        }
        if s.len() != self.encoder.input_dim() {
            return Err(Error::shape(format!(
                "seed vector of length {} for a prior over {} nodes",
                s.len(),
                self.encoder.input_dim()
            )));
        }
        let x = tape.constant(s.to_f64());
        let out = self.encoder.record(tape, &vars.encoder, x)?;
        let mu = tape.slice(out, 0, d)?;
        let logvar = tape.slice(out, d, d)?;
        let logvar = tape.clamp(logvar, -LOGVAR_LIMIT, LOGVAR_LIMIT);
        let half = tape.affine(logvar, 0.5, 0.0);
        let sigma = tape.exp(half);
        let eps = tape.constant(noise.to_vec());
        let spread = tape.mul(sigma, eps)?;
        let z = tape.add(mu, spread)?;
        let p = self.record_decode(tape, vars, z)?;
        let recon = record_bernoulli_loglik(tape, p, &s.to_f64())?;

        // KL(q || N(0, I)) = 1/2 sum(mu^2 + sigma^2 - 1 - log sigma^2)
        let mu2 = tape.mul(mu, mu)?;
        let var = tape.exp(logvar);
        let a = tape.add(mu2, var)?;
        let b = tape.sub(a, logvar)?;
        let b = tape.sum(b);
        let kl = tape.affine(b, 0.5, -0.5 * d as f64);

        let elbo = tape.sub(recon, kl)?;
        Ok((tape.affine(elbo, -1.0, 0.0), mu))
    }
}

/// `sum_i t_i log p_i + (1 - t_i) log(1 - p_i)` for constant targets `t`.
pub fn record_bernoulli_loglik(tape: &mut Tape, p: Var, targets: &[f64]) -> Result<Var> {
    let logp = tape.log(p);
    let q = tape.affine(p, -1.0, 1.0);
    let logq = tape.log(q);
    let t = tape.constant(targets.to_vec());
    let nt = tape.constant(targets.iter().map(|x| 1.0 - x).collect());
    let a = tape.dot(t, logp)?;
    let b = tape.dot(nt, logq)?;
    tape.add(a, b)
}

pub fn reparameterize(mu: &[f64], sigma: &[f64], noise: &[f64]) -> Result<Vec<f64>> {
    if mu.len() != sigma.len() || mu.len() != noise.len() {
        return Err(Error::shape("reparameterize: lengths differ"));
    }
    Ok(mu.iter().zip(sigma).zip(noise).map(|((m, s), e)| m + s * e).collect())
}

/// `KL(N(mu, diag(sigma^2)) || N(0, I))`.
pub fn kl_std_normal(mu: &[f64], sigma: &[f64]) -> f64 {
    mu.iter()
        .zip(sigma)
        .map(|(m, s)| {
            let var = s * s;
            0.5 * (m * m + var - 1.0 - var.ln())
        })
        .sum()
}

/// ELBO value and its gradient (encoder then decoder parameters).
pub fn elbo(prior: &VaePrior, s: &SeedVector, noise: &[f64]) -> Result<(f64, Vec<f64>)> {
    let mut tape = Tape::new();
    let vars = prior.register(&mut tape);
    let (neg, _) = prior.record_neg_elbo(&mut tape, &vars, s, noise)?;
    let grads = tape.backward(neg, &[-1.0])?;
    let mut flat = Vec::with_capacity(prior.param_count());
    vars.gradient_into(&grads, &mut flat);
    Ok((-tape.scalar(neg), flat))
}
