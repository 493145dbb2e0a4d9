//! JSON model files:
//! `{"latent_dim": int, "layers": [{"kind", "rows", "cols", "weight", "bias", "leak"}]}`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Layer, LayerKind, LayeredGenerator, DEFAULT_LEAK};
use crate::error::{Error, Result};
use crate::numkit::Matrix;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    latent_dim: usize,
    layers: Vec<LayerRecord>,
}

#[derive(Serialize, Deserialize)]
struct LayerRecord {
    kind: String,
    rows: usize,
    cols: usize,
    weight: Vec<f64>,
    bias: Option<Vec<f64>>,
    leak: Option<f64>,
}

impl LayeredGenerator {
    pub fn to_json(&self) -> String {
        let file = ModelFile {
            latent_dim: self.latent_dim,
            layers: self
                .layers
                .iter()
                .map(|l| {
                    let (kind, leak) = match l.kind {
                        LayerKind::Linear => ("linear", None),
                        LayerKind::DenseLeakyRelu { leak } => ("dense_leakyrelu", Some(leak)),
                    };
                    LayerRecord {
                        kind: kind.to_string(),
                        rows: l.weight.rows(),
                        cols: l.weight.cols(),
                        weight: l.weight.as_slice().to_vec(),
                        bias: (!l.bias.is_empty()).then(|| l.bias.clone()),
                        leak,
                    }
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            location: format!("line {}, column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        let mut layers = Vec::with_capacity(file.layers.len());
        for (i, rec) in file.layers.into_iter().enumerate() {
            let at = |field: &str| format!("layers[{i}].{field}");
            if rec.weight.len() != rec.rows * rec.cols {
                return Err(Error::Parse {
                    location: at("weight"),
                    message: format!(
                        "{} entries for a {}x{} weight",
                        rec.weight.len(),
                        rec.rows,
                        rec.cols
                    ),
                });
            }
            let kind = match rec.kind.as_str() {
                "linear" => LayerKind::Linear,
                "dense_leakyrelu" => LayerKind::DenseLeakyRelu {
                    leak: rec.leak.unwrap_or(DEFAULT_LEAK),
                },
                other => {
                    return Err(Error::Parse {
                        location: at("kind"),
                        message: format!("unknown layer kind {other:?}"),
                    })
                }
            };
            let weight = Matrix::from_vec(rec.rows, rec.cols, rec.weight)?;
            let layer = Layer::new(kind, weight, rec.bias.unwrap_or_default()).map_err(|e| {
                Error::Parse {
                    location: format!("layers[{i}]"),
                    message: e.to_string(),
                }
            })?;
            layers.push(layer);
        }
        LayeredGenerator::new(file.latent_dim, layers).map_err(|e| Error::Parse {
            location: "layers".into(),
            message: e.to_string(),
        })
    }
}

pub fn save_model(g: &LayeredGenerator, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, g.to_json())?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<LayeredGenerator> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    LayeredGenerator::from_json(&text).map_err(|e| match e {
        Error::Parse { location, message } => Error::Parse {
            location: format!("{}: {location}", path.display()),
            message,
        },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::LatentAssignment;
    use crate::numkit::RandomStream;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut s = RandomStream::new(11, 0);
        let g = LayeredGenerator::random_mlp(3, &[7, 5], 9, 0.2, &mut s).unwrap();
        let back = LayeredGenerator::from_json(&g.to_json()).unwrap();
        assert_eq!(back, g);
        let bits =
            |g: &LayeredGenerator| g.params().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&g));
    }

    #[test]
    fn truncated_file_reports_location() {
        let mut s = RandomStream::new(12, 0);
        let g = LayeredGenerator::random_mlp(2, &[3], 2, 0.2, &mut s).unwrap();
        let text = g.to_json();
        let err = LayeredGenerator::from_json(&text[..text.len() / 2]).unwrap_err();
        match err {
            Error::Parse { location, .. } => assert!(location.starts_with("line ")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn minimal_fixture_evaluates() {
        let text = r#"{"latent_dim": 2, "layers": [
            {"kind": "linear", "rows": 2, "cols": 2, "weight": [1.0, 2.0, 3.0, 4.0], "bias": null, "leak": null}
        ]}"#;
        let g = LayeredGenerator::from_json(text).unwrap();
        let out = g.forward(&LatentAssignment::new(vec![1.0, -1.0])).unwrap();
        assert_eq!(out, vec![-1.0, -1.0]);
    }

    #[test]
    fn inconsistent_dims_name_the_field() {
        let text = r#"{"latent_dim": 2, "layers": [
            {"kind": "linear", "rows": 2, "cols": 2, "weight": [1.0, 2.0, 3.0], "bias": null, "leak": null}
        ]}"#;
        match LayeredGenerator::from_json(text).unwrap_err() {
            Error::Parse { location, .. } => assert_eq!(location, "layers[0].weight"),
            other => panic!("unexpected {other:?}"),
        }
        let chained = r#"{"latent_dim": 3, "layers": [
            {"kind": "linear", "rows": 2, "cols": 2, "weight": [1.0, 2.0, 3.0, 4.0], "bias": null, "leak": null}
        ]}"#;
        assert!(LayeredGenerator::from_json(chained).is_err());
        let kind = r#"{"latent_dim": 2, "layers": [
            {"kind": "conv", "rows": 2, "cols": 2, "weight": [1.0, 2.0, 3.0, 4.0], "bias": null, "leak": null}
        ]}"#;
        assert!(LayeredGenerator::from_json(kind).is_err());
    }
}
