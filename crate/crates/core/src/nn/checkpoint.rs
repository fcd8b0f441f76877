//! Parameter checkpoints: a JSON index plus one f64 tensor file per
//! parameter, in registration order.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{read_tensor, write_tensor, DType, TensorBlob};
use crate::tape::ParamStore;

pub const INDEX_FILE: &str = "checkpoint.json";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: [usize; 2],
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointIndex<M> {
    pub version: u32,
    pub init_seed: u64,
    pub meta: M,
    pub params: Vec<ParamEntry>,
}

pub fn save_checkpoint<M: Serialize>(dir: impl AsRef<Path>, store: &ParamStore, meta: &M) -> Result<()> {
    let dir = dir.as_ref();
    let params_dir = dir.join("params");
    fs::create_dir_all(&params_dir).map_err(|e| Error::io(&params_dir, e))?;
    let mut params = Vec::with_capacity(store.len());
    for (i, (name, value)) in store.iter().enumerate() {
        let file = format!("params/{i:05}.frt");
        let (rows, cols) = value.dim();
        if rows == 0 || cols == 0 {
            return Err(Error::Checkpoint(format!("parameter {name} is empty")));
        }
        write_tensor(&TensorBlob::from_array_f64(value), dir.join(&file))?;
        params.push(ParamEntry {
            name: name.to_string(),
            shape: [rows, cols],
            file,
        });
    }
    let index = CheckpointIndex {
        version: FORMAT_VERSION,
        init_seed: store.seed(),
        meta,
        params,
    };
    let path = dir.join(INDEX_FILE);
    let json = serde_json::to_string_pretty(&index)?;
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
}

pub fn load_checkpoint<M: DeserializeOwned>(dir: impl AsRef<Path>) -> Result<(ParamStore, M)> {
    let dir = dir.as_ref();
    let path = dir.join(INDEX_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let index: CheckpointIndex<M> = serde_json::from_str(&text)?;
    if index.version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version {}", index.version)));
    }
    let mut store = ParamStore::new(index.init_seed);
    for entry in &index.params {
        let blob = read_tensor(dir.join(&entry.file))?;
        if blob.dtype() != DType::F64 || blob.dims() != entry.shape {
            return Err(Error::Checkpoint(format!(
                "parameter {}: stored {:?} {:?}, index says f64 {:?}",
                entry.name,
                blob.dtype(),
                blob.dims(),
                entry.shape
            )));
        }
        store.add(entry.name.clone(), blob.to_array2());
    }
    Ok((store, index.meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = ParamStore::new(42);
        store.add("a", array![[1.0, -0.0, f64::MIN_POSITIVE]]);
        store.add("b", array![[std::f64::consts::PI], [1e-300]]);
        store.glorot("c", 3, 5);
        save_checkpoint(dir.path(), &store, &"meta".to_string()).unwrap();
        let (loaded, meta): (ParamStore, String) = load_checkpoint(dir.path()).unwrap();
        assert_eq!(meta, "meta");
        assert_eq!(loaded.seed(), 42);
        let a: Vec<_> = store.iter().collect();
        let b: Vec<_> = loaded.iter().collect();
        assert_eq!(a.len(), b.len());
        for ((na, va), (nb, vb)) in a.iter().zip(&b) {
            assert_eq!(na, nb);
            let bits_a: Vec<u64> = va.iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = vb.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
    }

    #[test]
    fn shape_disagreement_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = ParamStore::new(1);
        store.add("a", array![[1.0, 2.0]]);
        save_checkpoint(dir.path(), &store, &()).unwrap();
        let path = dir.path().join(INDEX_FILE);
        let text = fs::read_to_string(&path).unwrap().replace("[\n        1,\n        2\n      ]", "[2, 1]");
        fs::write(&path, text).unwrap();
        assert!(matches!(load_checkpoint::<()>(dir.path()), Err(Error::Checkpoint(_))));
    }
}
