//! JSON checkpoints: `{"layers":[{"w":[[...]],"b":[...]}],"meta":{...}}`,
//! with `w` stored row-major as `out × in`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::{Layer, MlpModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerJson {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointJson {
    layers: Vec<LayerJson>,
    #[serde(default)]
    meta: serde_json::Map<String, serde_json::Value>,
}

pub fn to_json(model: &MlpModel, meta: serde_json::Map<String, serde_json::Value>) -> Result<String> {
    let layers = model.layers().iter().map(|l| LayerJson { w: l.rows(), b: l.bias().to_vec() }).collect();
    Ok(serde_json::to_string_pretty(&CheckpointJson { layers, meta })?)
}

pub fn from_json(s: &str) -> Result<(MlpModel, serde_json::Map<String, serde_json::Value>)> {
    let c: CheckpointJson = serde_json::from_str(s)?;
    let layers = c.layers.into_iter().map(|l| Layer::from_rows(&l.w, l.b)).collect::<Result<Vec<_>>>()?;
    Ok((MlpModel::new(layers)?, c.meta))
}

pub fn save(path: impl AsRef<Path>, model: &MlpModel, meta: serde_json::Map<String, serde_json::Value>) -> Result<()> {
    let p = path.as_ref();
    std::fs::write(p, to_json(model, meta)?).map_err(|e| Error::io(p, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<(MlpModel, serde_json::Map<String, serde_json::Value>)> {
    let p = path.as_ref();
    from_json(&std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::Init;
    use crate::rng::seeded;

    #[test]
    fn roundtrip_is_exact() {
        let m = MlpModel::init_with_bias(&[3, 4, 2], Init::He, 0.3, &mut seeded(5)).unwrap();
        let mut meta = serde_json::Map::new();
        meta.insert("seed".into(), 5.into());
        let (back, meta2) = from_json(&to_json(&m, meta.clone()).unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(meta2, meta);
    }

    #[test]
    fn field_names_are_fixed() {
        let s = r#"{"layers":[{"w":[[1.0,2.0]],"b":[0.5]}],"meta":{}}"#;
        let (m, _) = from_json(s).unwrap();
        assert_eq!(m.forward(&[1.0, 1.0]).unwrap(), vec![3.5]);
        assert!(from_json(r#"{"layers":[{"weights":[[1.0]],"b":[0.0]}]}"#).is_err());
        assert!(from_json(r#"{"layers":[{"w":[[1.0],[2.0]],"b":[0.0]}]}"#).is_err());
    }
}
