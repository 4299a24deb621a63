//! Versioned JSON checkpoints. Floats are written in shortest round-trip
//! form and parsed with correct rounding, so save/load is exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mlp::{Activation, Layer, Mlp};
use super::model::{AutoencoderModel, Normalization};
use crate::error::{Error, Result};

pub const FORMAT: &str = "morals-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRecord {
    inputs: usize,
    outputs: usize,
    /// `weights[i][o]` connects input `i` to output `o`.
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MlpRecord {
    sizes: Vec<usize>,
    hidden_activation: Activation,
    output_activation: Activation,
    layers: Vec<LayerRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointRecord {
    format: String,
    version: u32,
    input_dim: usize,
    latent_dim: usize,
    seed: u64,
    normalization: Normalization,
    encoder: MlpRecord,
    decoder: MlpRecord,
    dynamics: MlpRecord,
}

fn mlp_record(m: &Mlp) -> MlpRecord {
    MlpRecord {
        sizes: m.sizes(),
        hidden_activation: m.hidden,
        output_activation: m.output,
        layers: m
            .layers
            .iter()
            .map(|l| LayerRecord {
                inputs: l.inputs,
                outputs: l.outputs,
                weights: l.weights.chunks(l.outputs).map(<[f64]>::to_vec).collect(),
                bias: l.bias.clone(),
            })
            .collect(),
    }
}

fn mlp_from_record(rec: MlpRecord, name: &str, path: &Path) -> Result<Mlp> {
    let err = |field: String, msg: String| Error::parse(path, field, msg);
    if rec.sizes.len() != rec.layers.len() + 1 || rec.layers.is_empty() {
        return Err(err(
            format!("{name}.sizes"),
            format!("{} sizes for {} layers", rec.sizes.len(), rec.layers.len()),
        ));
    }
    let mut layers = Vec::with_capacity(rec.layers.len());
    for (k, l) in rec.layers.into_iter().enumerate() {
        let at = |f: &str| format!("{name}.layers[{k}].{f}");
        if l.inputs != rec.sizes[k] || l.outputs != rec.sizes[k + 1] || l.outputs == 0 {
            return Err(err(
                at("inputs"),
                "layer shape does not chain with sizes".into(),
            ));
        }
        if l.weights.len() != l.inputs || l.weights.iter().any(|r| r.len() != l.outputs) {
            return Err(err(
                at("weights"),
                format!("expected {}x{} array", l.inputs, l.outputs),
            ));
        }
        if l.bias.len() != l.outputs {
            return Err(err(at("bias"), format!("expected {} entries", l.outputs)));
        }
        let weights: Vec<f64> = l.weights.into_iter().flatten().collect();
        if weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
            return Err(err(at("weights"), "non-finite parameter".into()));
        }
        layers.push(Layer {
            inputs: l.inputs,
            outputs: l.outputs,
            weights,
            bias: l.bias,
        });
    }
    Ok(Mlp {
        layers,
        hidden: rec.hidden_activation,
        output: rec.output_activation,
    })
}

pub fn to_json(model: &AutoencoderModel) -> String {
    let rec = CheckpointRecord {
        format: FORMAT.into(),
        version: VERSION,
        input_dim: model.input_dim,
        latent_dim: model.latent_dim,
        seed: model.seed,
        normalization: model.normalization.clone(),
        encoder: mlp_record(&model.encoder),
        decoder: mlp_record(&model.decoder),
        dynamics: mlp_record(&model.dynamics),
    };
    let mut s = serde_json::to_string_pretty(&rec).expect("checkpoint serializes");
    s.push('\n');
    s
}

pub fn from_json(text: &str, path: &Path) -> Result<AutoencoderModel> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let rec: CheckpointRecord = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        Error::parse(path, field, e.into_inner().to_string())
    })?;
    if rec.format != FORMAT {
        return Err(Error::parse(
            path,
            "format",
            format!("expected `{FORMAT}`, found `{}`", rec.format),
        ));
    }
    if rec.version != VERSION {
        return Err(Error::parse(
            path,
            "version",
            format!("unsupported version {}", rec.version),
        ));
    }
    let (n, d) = (rec.input_dim, rec.latent_dim);
    if rec.normalization.mean.len() != n || rec.normalization.scale.len() != n {
        return Err(Error::parse(
            path,
            "normalization",
            format!("expected {n} entries per axis"),
        ));
    }
    if rec
        .normalization
        .scale
        .iter()
        .any(|s| !(s.is_finite() && *s > 0.0))
    {
        return Err(Error::parse(
            path,
            "normalization.scale",
            "scales must be positive",
        ));
    }
    let encoder = mlp_from_record(rec.encoder, "encoder", path)?;
    let decoder = mlp_from_record(rec.decoder, "decoder", path)?;
    let dynamics = mlp_from_record(rec.dynamics, "dynamics", path)?;
    let shape_ok = [(&encoder, n, d), (&decoder, d, n), (&dynamics, d, d)]
        .iter()
        .all(|(m, i, o)| m.input_dim() == *i && m.output_dim() == *o);
    if !shape_ok || d == 0 || d >= n {
        return Err(Error::parse(
            path,
            "latent_dim",
            format!("network shapes inconsistent with input_dim {n}, latent_dim {d}"),
        ));
    }
    Ok(AutoencoderModel {
        encoder,
        decoder,
        dynamics,
        input_dim: n,
        latent_dim: d,
        normalization: rec.normalization,
        seed: rec.seed,
    })
}

pub fn save_checkpoint(model: &AutoencoderModel, path: &Path) -> Result<()> {
    fs::write(path, to_json(model)).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load_checkpoint(path: &Path) -> Result<AutoencoderModel> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    from_json(&text, path)
}

/// Loads a checkpoint and checks it against the configured latent dimension.
pub fn load_checkpoint_expecting(path: &Path, latent_dim: usize) -> Result<AutoencoderModel> {
    let model = load_checkpoint(path)?;
    if model.latent_dim != latent_dim {
        return Err(Error::LatentDimMismatch {
            expected: latent_dim,
            found: model.latent_dim,
        });
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model() -> AutoencoderModel {
        let norm = Normalization {
            mean: vec![0.1, -0.2, 0.3, 1.0 / 3.0],
            scale: vec![1.0, 2.0, 0.5, 7.0],
        };
        AutoencoderModel::new(4, 2, &[8, 8], norm, 99).unwrap()
    }

    #[test]
    fn round_trip_preserves_outputs() {
        let m = model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        save_checkpoint(&m, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back, m);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
            assert_eq!(m.encode(&x).unwrap(), back.encode(&x).unwrap());
        }
    }

    #[test]
    fn truncated_file_is_parse_error() {
        let text = to_json(&model());
        let cut = &text[..text.len() / 2];
        let err = from_json(cut, Path::new("ck.json")).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }

    #[test]
    fn bad_field_is_named() {
        let text = to_json(&model()).replacen("\"seed\": 99", "\"seed\": \"x\"", 1);
        let err = from_json(&text, Path::new("ck.json")).unwrap_err();
        match err {
            Error::Parse { field, .. } => assert_eq!(field, "seed"),
            other => panic!("{other}"),
        }
        let mut text = to_json(&model());
        let at = text.find("\"bias\": [").unwrap();
        text.insert_str(at + "\"bias\": [".len(), "1.0, ");
        let err = from_json(&text, Path::new("ck.json")).unwrap_err();
        assert!(err.to_string().contains("encoder.layers[0].bias"), "{err}");
    }

    #[test]
    fn wrong_version_rejected() {
        let text = to_json(&model()).replacen("\"version\": 1", "\"version\": 2", 1);
        let err = from_json(&text, Path::new("ck.json")).unwrap_err();
        assert!(err.to_string().contains("version"));
    }

    #[test]
    fn latent_dim_mismatch_is_explicit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        save_checkpoint(&model(), &path).unwrap();
        assert!(matches!(
            load_checkpoint_expecting(&path, 1),
            Err(Error::LatentDimMismatch {
                expected: 1,
                found: 2
            })
        ));
        assert!(load_checkpoint_expecting(&path, 2).is_ok());
    }
}
