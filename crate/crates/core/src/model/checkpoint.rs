use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};
use crate::numerics::{Matrix, ParamGroup, ParamStore};
use crate::scalar::{Precision, Scalar};

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    group: ParamGroup,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Serialized model: config, scalar precision and every named parameter.
///
/// Values are stored as f64 with round-trip float formatting, which is
/// lossless for both f32 and f64 models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub precision: Precision,
    pub config: ModelConfig,
    tensors: Vec<TensorRecord>,
}

impl Checkpoint {
    pub fn from_model<T: Scalar>(model: &Model<T>) -> Self {
        let tensors = model
            .params
            .iter()
            .map(|p| TensorRecord {
                name: p.name.clone(),
                group: p.group,
                rows: p.value.rows(),
                cols: p.value.cols(),
                data: p.value.data().iter().map(|v| v.as_f64()).collect(),
            })
            .collect();
        Checkpoint {
            version: FORMAT_VERSION,
            precision: T::PRECISION,
            config: model.config.clone(),
            tensors,
        }
    }

    pub fn into_model<T: Scalar>(self) -> Result<Model<T>> {
        if self.version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {}", self.version)));
        }
        if self.precision != T::PRECISION {
            return Err(Error::Checkpoint(format!(
                "checkpoint holds f{} parameters, requested f{}",
                self.precision,
                T::PRECISION
            )));
        }
        let mut store = ParamStore::new();
        for t in self.tensors {
            if t.data.len() != t.rows * t.cols {
                return Err(Error::Checkpoint(format!(
                    "tensor {} has {} values for {}x{}",
                    t.name,
                    t.data.len(),
                    t.rows,
                    t.cols
                )));
            }
            let value = Matrix::from_vec(t.rows, t.cols, t.data.into_iter().map(T::of).collect())?;
            store.add(t.name, t.group, value)?;
        }
        Model::from_params(self.config, store)
    }
}

/// Writes atomically: the file appears only once fully written.
pub fn save_checkpoint<T: Scalar>(model: &Model<T>, path: &Path) -> Result<()> {
    let json = serde_json::to_string(&Checkpoint::from_model(model))?;
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, json).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Model<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ckpt: Checkpoint = serde_json::from_str(&text)?;
    ckpt.into_model()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> ModelConfig {
        ModelConfig {
            hidden: 4,
            lm_dim: 6,
            layers: 2,
            num_relations: 3,
            ..Default::default()
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let m32 = Model::<f32>::new(small(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        save_checkpoint(&m32, &path).unwrap();
        let back: Model<f32> = load_checkpoint(&path).unwrap();
        assert_eq!(back.params.iter().count(), m32.params.iter().count());
        for (a, b) in m32.params.iter().zip(back.params.iter()) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.value, b.value);
        }

        let m64 = Model::<f64>::new(small(), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        save_checkpoint(&m64, &path).unwrap();
        let back: Model<f64> = load_checkpoint(&path).unwrap();
        for (a, b) in m64.params.iter().zip(back.params.iter()) {
            assert_eq!(a.value, b.value);
        }
        assert_eq!(back.config, small());
    }

    #[test]
    fn precision_mismatch_rejected() {
        let m = Model::<f64>::new(small(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let err = Checkpoint::from_model(&m).into_model::<f32>().unwrap_err();
        assert!(err.to_string().contains("f64"), "{err}");
    }
}
