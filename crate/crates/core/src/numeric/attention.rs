use super::matrix::dot;
use super::tape::{softmax, Tape, Var};
use crate::error::{Error, Result};

/// Scaled dot-product attention of one query over a set of keys.
///
/// Returns the softmax(q.k / sqrt(scale_dim))-weighted sum of `values`.
pub fn attention_fuse(query: &[f64], keys: &[&[f64]], values: &[&[f64]], scale_dim: usize) -> Result<Vec<f64>> {
    Ok(attention_weights_and_output(query, keys, values, scale_dim)?.1)
}

/// Like [`attention_fuse`] but also returns the attention weights.
pub fn attention_weights_and_output(
    query: &[f64],
    keys: &[&[f64]],
    values: &[&[f64]],
    scale_dim: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check(query.len(), keys.iter().map(|k| k.len()), keys.len(), values, scale_dim)?;
    let scale = (scale_dim as f64).sqrt();
    let logits: Vec<f64> = keys.iter().map(|k| dot(query, k) / scale).collect();
    let weights = softmax(&logits);
    let mut out = vec![0.0; values[0].len()];
    for (w, v) in weights.iter().zip(values) {
        for (o, x) in out.iter_mut().zip(v.iter()) {
            *o += w * x;
        }
    }
    Ok((weights, out))
}

fn check(
    qdim: usize,
    key_dims: impl Iterator<Item = usize>,
    n_keys: usize,
    values: &[&[f64]],
    scale_dim: usize,
) -> Result<()> {
    if scale_dim == 0 {
        return Err(Error::shape("attention scale dimension must be positive"));
    }
    if n_keys == 0 || n_keys != values.len() {
        return Err(Error::shape("attention needs one value per key and at least one key"));
    }
    let mut key_dims = key_dims;
    if key_dims.any(|d| d != qdim) {
        return Err(Error::shape("query and key dimensions differ"));
    }
    let vdim = values[0].len();
    if values.iter().any(|v| v.len() != vdim) {
        return Err(Error::shape("values differ in length"));
    }
    Ok(())
}

/// Tape version of [`attention_fuse`].
pub fn record_attention(tape: &mut Tape, query: Var, keys: &[Var], values: &[Var], scale_dim: usize) -> Result<Var> {
    if scale_dim == 0 || keys.is_empty() || keys.len() != values.len() {
        return Err(Error::shape("attention needs one value per key and at least one key"));
    }
    let scale = 1.0 / (scale_dim as f64).sqrt();
    let mut logits = Vec::with_capacity(keys.len());
    for &k in keys {
        let d = tape.dot(query, k)?;
        logits.push(tape.affine(d, scale, 0.0));
    }
    let logits = tape.concat(&logits);
    let weights = tape.softmax(logits);
    tape.mix(weights, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_key_returns_value() {
        let out = attention_fuse(&[3.0, -1.0], &[&[0.5, 9.0]], &[&[1.0, 2.0, 3.0]], 2).unwrap();
        assert_eq!(out, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn orthogonal_query_averages() {
        let out = attention_fuse(&[1.0, 0.0], &[&[0.0, 2.0], &[0.0, -2.0]], &[&[4.0], &[0.0]], 2).unwrap();
        assert!((out[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn sharp_logits() {
        let (w, out) =
            attention_weights_and_output(&[1.0, 0.0], &[&[10.0, 0.0], &[-10.0, 0.0]], &[&[1.0], &[0.0]], 2).unwrap();
        let a = 10.0 / 2f64.sqrt();
        let expected = 1.0 / (1.0 + (-2.0 * a).exp());
        assert!((w[0] - expected).abs() < 1e-15);
        assert!((out[0] - 0.99999).abs() < 1e-5);
    }

    #[test]
    fn shape_errors() {
        assert!(attention_fuse(&[1.0], &[&[1.0, 2.0]], &[&[1.0]], 1).is_err());
        assert!(attention_fuse(&[1.0], &[&[1.0]], &[&[1.0]], 0).is_err());
        assert!(attention_fuse(&[1.0], &[], &[], 1).is_err());
    }

    proptest! {
        #[test]
        fn weights_are_a_distribution(
            q in prop::collection::vec(-50.0f64..50.0, 3),
            keys in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 3), 1..6),
        ) {
            let key_refs: Vec<&[f64]> = keys.iter().map(Vec::as_slice).collect();
            let vals: Vec<Vec<f64>> = (0..keys.len()).map(|i| vec![i as f64]).collect();
            let val_refs: Vec<&[f64]> = vals.iter().map(Vec::as_slice).collect();
            let (w, _) = attention_weights_and_output(&q, &key_refs, &val_refs, 3).unwrap();
            prop_assert!(w.iter().all(|x| *x >= 0.0));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
