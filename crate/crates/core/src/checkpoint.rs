//! Text checkpoint format for a [`ModelState`].
//!
//! ```text
//! dipt-checkpoint v1
//! nodes <n>
//! features <F>
//! influence <learned|cosine>
//! latent_dim <d>
//! mean_seed_count <x>
//! z_bar none | z_bar <z_1> ... <z_d>
//! mlp <name> <n_layers>          # influence_encoder, influence_scorer
//! layer <in> <out> <activation>  # (learned only), prior_encoder,
//! w <in * out values, row-major> # prior_decoder
//! b <out values>
//! ```
//! Floats are written in shortest round-trip form, so save/load is exact.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::influence::{Influence, InfluenceNet};
use crate::model::{InfluenceKind, ModelState};
use crate::numeric::{Activation, DenseMatrix, Layer, MlpParams};
use crate::prior::VaePrior;

const MAGIC: &str = "dipt-checkpoint v1";
const MAX_LAYER_ENTRIES: usize = 1 << 24;

fn write_floats(out: &mut String, key: &str, values: &[f64]) {
    out.push_str(key);
    for v in values {
        write!(out, " {v}").unwrap();
    }
    out.push('\n');
}

fn write_mlp(out: &mut String, name: &str, mlp: &MlpParams) {
    writeln!(out, "mlp {name} {}", mlp.layers().len()).unwrap();
    for layer in mlp.layers() {
        writeln!(out, "layer {} {} {}", layer.inputs(), layer.outputs(), layer.activation.name()).unwrap();
        write_floats(out, "w", layer.weight.data());
        write_floats(out, "b", &layer.bias);
    }
}

pub fn write_checkpoint(model: &ModelState) -> String {
    let mut out = format!("{MAGIC}\n");
    writeln!(out, "nodes {}", model.n_nodes()).unwrap();
    writeln!(out, "features {}", model.feature_dim().unwrap_or(0)).unwrap();
    writeln!(out, "influence {}", model.kind().name()).unwrap();
    writeln!(out, "latent_dim {}", model.prior.latent_dim()).unwrap();
    writeln!(out, "mean_seed_count {}", model.mean_seed_count).unwrap();
    match &model.prior.z_bar {
        Some(z) => write_floats(&mut out, "z_bar", z),
        None => out.push_str("z_bar none\n"),
    }
    if let Influence::Learned(net) = &model.influence {
        write_mlp(&mut out, "influence_encoder", net.encoder());
        write_mlp(&mut out, "influence_scorer", net.scorer());
    }
    write_mlp(&mut out, "prior_encoder", model.prior.encoder());
    write_mlp(&mut out, "prior_decoder", model.prior.decoder());
    out
}

struct Reader<'a> {
    lines: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>,
    last: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        let it: Box<dyn Iterator<Item = (usize, &'a str)>> = Box::new(
            text.lines()
                .enumerate()
                .map(|(i, l)| (i + 1, l.trim()))
                .filter(|(_, l)| !l.is_empty() && !l.starts_with('#')),
        );
        Self { lines: it.peekable(), last: 0 }
    }

    /// Next line, split, with its first token required to be `key`.
    fn record(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (ln, line) =
            self.lines.next().ok_or_else(|| Error::parse(self.last + 1, format!("missing `{key}` record")))?;
        self.last = ln;
        let mut toks = line.split_whitespace();
        let head = toks.next().unwrap_or("");
        if head != key {
            return Err(Error::parse(ln, format!("expected `{key}`, found `{head}`")));
        }
        Ok((ln, toks.collect()))
    }

    fn single<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (ln, toks) = self.record(key)?;
        match toks.as_slice() {
            [t] => t.parse().map_err(|_| Error::parse(ln, format!("invalid `{key}` value `{t}`"))),
            _ => Err(Error::parse(ln, format!("`{key}` takes one value"))),
        }
    }

    fn floats(&mut self, key: &str, expected: usize) -> Result<Vec<f64>> {
        let (ln, toks) = self.record(key)?;
        if toks.len() != expected {
            return Err(Error::parse(ln, format!("`{key}` needs {expected} values, found {}", toks.len())));
        }
        toks.iter()
            .map(|t| match t.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::parse(ln, format!("invalid number `{t}`"))),
            })
            .collect()
    }

    fn mlp(&mut self, name: &str) -> Result<MlpParams> {
        let (ln, toks) = self.record("mlp")?;
        if toks.len() != 2 || toks[0] != name {
            return Err(Error::parse(ln, format!("expected `mlp {name} <layers>`")));
        }
        let n_layers: usize = toks[1].parse().map_err(|_| Error::parse(ln, "invalid layer count"))?;
        if n_layers == 0 || n_layers > 64 {
            return Err(Error::parse(ln, "layer count must be in 1..=64"));
        }
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let (ln, toks) = self.record("layer")?;
            if toks.len() != 3 {
                return Err(Error::parse(ln, "layer line must be `layer <in> <out> <activation>`"));
            }
            let inputs: usize = toks[0].parse().map_err(|_| Error::parse(ln, "invalid input width"))?;
            let outputs: usize = toks[1].parse().map_err(|_| Error::parse(ln, "invalid output width"))?;
            let act = Activation::from_name(toks[2])
                .ok_or_else(|| Error::parse(ln, format!("unknown activation `{}`", toks[2])))?;
            if inputs.checked_mul(outputs).is_none_or(|c| c > MAX_LAYER_ENTRIES) {
                return Err(Error::parse(ln, "layer too large"));
            }
            let w = self.floats("w", inputs * outputs)?;
            let b = self.floats("b", outputs)?;
            let layer = Layer::new(DenseMatrix::new(outputs, inputs, w)?, b, act)
                .map_err(|e| Error::parse(ln, e.to_string()))?;
            layers.push(layer);
        }
        MlpParams::new(layers).map_err(|e| Error::parse(ln, e.to_string()))
    }
}

pub fn parse_checkpoint(text: &str) -> Result<ModelState> {
    let mut r = Reader::new(text);
    match r.lines.next() {
        Some((_, MAGIC)) => {}
        Some((ln, _)) => return Err(Error::parse(ln, format!("first line must be `{MAGIC}`"))),
        None => return Err(Error::parse(1, "empty checkpoint")),
    }
    let nodes: usize = r.single("nodes")?;
    let features: usize = r.single("features")?;
    let kind = match r.single::<String>("influence")?.as_str() {
        "learned" => InfluenceKind::Learned,
        "cosine" => InfluenceKind::Cosine,
        other => return Err(Error::parse(r.last, format!("unknown influence `{other}`"))),
    };
    let latent_dim: usize = r.single("latent_dim")?;
    let mean_seed_count: f64 = r.single("mean_seed_count")?;
    if !mean_seed_count.is_finite() || mean_seed_count < 0.0 {
        return Err(Error::parse(r.last, "mean_seed_count must be finite and nonnegative"));
    }
    let z_bar = {
        let (ln, toks) = r.record("z_bar")?;
        if toks == ["none"] {
            None
        } else {
            if toks.len() != latent_dim {
                return Err(Error::parse(ln, format!("z_bar needs {latent_dim} values")));
            }
            let z = toks
                .iter()
                .map(|t| t.parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::parse(ln, "invalid z_bar value"))?;
            Some(z)
        }
    };
    let influence = match kind {
        InfluenceKind::Learned => {
            let enc = r.mlp("influence_encoder")?;
            let sc = r.mlp("influence_scorer")?;
            let net = InfluenceNet::from_parts(enc, sc).map_err(|e| Error::parse(r.last, e.to_string()))?;
            if net.feature_dim() != features {
                return Err(Error::parse(r.last, "influence encoder width differs from `features`"));
            }
            Influence::Learned(net)
        }
        InfluenceKind::Cosine => Influence::Cosine,
    };
    let enc = r.mlp("prior_encoder")?;
    let dec = r.mlp("prior_decoder")?;
    let prior = VaePrior::from_parts(enc, dec, z_bar).map_err(|e| Error::parse(r.last, e.to_string()))?;
    if prior.n_nodes() != nodes || prior.latent_dim() != latent_dim {
        return Err(Error::parse(r.last, "prior dimensions differ from the header"));
    }
    if let Some((ln, _)) = r.lines.next() {
        return Err(Error::parse(ln, "trailing content after the last mlp"));
    }
    Ok(ModelState { influence, prior, mean_seed_count })
}

pub fn load_checkpoint(path: &Path) -> Result<ModelState> {
    parse_checkpoint(&std::fs::read_to_string(path)?)
}

pub fn save_checkpoint(path: &Path, model: &ModelState) -> Result<()> {
    std::fs::write(path, write_checkpoint(model))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for kind in [InfluenceKind::Learned, InfluenceKind::Cosine] {
            let mut m = ModelState::init(6, 3, 4, kind, &mut rng);
            m.mean_seed_count = 1.5;
            m.prior.z_bar = Some(vec![0.1, -0.25, 1e-300, 3.0]);
            let text = write_checkpoint(&m);
            assert_eq!(parse_checkpoint(&text).unwrap(), m);
            m.prior.z_bar = None;
            assert_eq!(parse_checkpoint(&write_checkpoint(&m)).unwrap(), m);
        }
    }

    #[test]
    fn corrupted_checkpoints_name_the_line() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = ModelState::init(4, 2, 2, InfluenceKind::Learned, &mut rng);
        let text = write_checkpoint(&m);
        let bad = text.replacen("nodes 4", "nodes 5", 1);
        assert!(parse_checkpoint(&bad).is_err());
        let bad = text.replacen("latent_dim 2", "latent_dim x", 1);
        assert_eq!(parse_checkpoint(&bad).unwrap_err(), Error::parse(5, "invalid `latent_dim` value `x`"));
        let truncated: String = text.lines().take(12).collect::<Vec<_>>().join("\n");
        assert!(matches!(parse_checkpoint(&truncated), Err(Error::Parse { .. })));
        assert!(parse_checkpoint("").is_err());
    }
}
