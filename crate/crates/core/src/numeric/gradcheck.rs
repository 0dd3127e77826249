use crate::error::{Error, Result};

/// Maximum relative error between `analytic` and central finite differences
/// of `loss` around `params`.
///
/// The relative error for a coordinate is
/// `|a - fd| / max(|a|, |fd|, 1e-8)`.
pub fn gradient_check<F>(mut loss: F, params: &[f64], analytic: &[f64], perturbation: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    Ok(gradient_check_report(&mut loss, params, analytic, perturbation)?.max_rel_error)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: Option<usize>,
    pub checked: usize,
}

pub fn gradient_check_report<F>(
    loss: &mut F,
    params: &[f64],
    analytic: &[f64],
    perturbation: f64,
) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if params.len() != analytic.len() {
        return Err(Error::shape("analytic gradient length differs from parameters"));
    }
    if !(perturbation > 0.0) {
        return Err(Error::Usage("perturbation must be positive".into()));
    }
    let mut theta = params.to_vec();
    let mut report = GradCheckReport { max_rel_error: 0.0, worst_index: None, checked: 0 };
    for i in 0..theta.len() {
        let orig = theta[i];
        theta[i] = orig + perturbation;
        let up = finite(loss(&theta)?)?;
        theta[i] = orig - perturbation;
        let down = finite(loss(&theta)?)?;
        theta[i] = orig;
        let fd = (up - down) / (2.0 * perturbation);
        let a = analytic[i];
        let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-8);
        if report.worst_index.is_none() || rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_index = Some(i);
        }
        report.checked += 1;
    }
    Ok(report)
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric("loss evaluated to a non-finite value".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{Activation, MlpParams, Tape};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quadratic_is_exact() {
        let err = gradient_check(|t| Ok(0.5 * t[0] * t[0]), &[3.0], &[3.0], 1e-5).unwrap();
        assert!(err <= 1e-8, "{err}");
    }

    #[test]
    fn wrong_gradient_detected() {
        let err = gradient_check(|t| Ok(0.5 * t[0] * t[0]), &[3.0], &[-3.0], 1e-5).unwrap();
        assert!(err > 1.0);
    }

    #[test]
    fn non_finite_loss_is_error() {
        let r = gradient_check(|_| Ok(f64::INFINITY), &[1.0], &[0.0], 1e-5);
        assert!(matches!(r, Err(Error::Numeric(_))));
    }

    #[test]
    fn two_layer_mlp_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mlp = MlpParams::glorot(&[3, 5, 2], &[Activation::Tanh, Activation::Sigmoid], &mut rng);
        let x = [0.4, -1.1, 0.7];
        let target = [0.2, 0.9];
        let loss_of = |m: &MlpParams| -> Result<(f64, Vec<f64>)> {
            let mut tape = Tape::new();
            let vars = m.register(&mut tape);
            let xv = tape.constant(x.to_vec());
            let y = m.record(&mut tape, &vars, xv)?;
            let t = tape.constant(target.to_vec());
            let d = tape.sub(y, t)?;
            let sq = tape.mul(d, d)?;
            let l = tape.sum(sq);
            let g = tape.backward(l, &[1.0])?;
            let mut flat = Vec::new();
            vars.gradient_into(&g, &mut flat);
            Ok((tape.scalar(l), flat))
        };
        let (_, analytic) = loss_of(&mlp).unwrap();
        let mut flat = Vec::new();
        mlp.flatten_into(&mut flat);
        let err = gradient_check(
            |p| {
                let mut m = mlp.clone();
                m.assign(p)?;
                Ok(loss_of(&m)?.0)
            },
            &flat,
            &analytic,
            1e-5,
        )
        .unwrap();
        assert!(err <= 1e-4, "{err}");
    }
}
