use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ParamStore, Tensor};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "textorder-params";
pub const CHECKPOINT_VERSION: u32 = 1;

/// JSON map from parameter name to `{shape, values}`. Values are written
/// with shortest round-trip formatting, so save then load is bit-exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamCheckpoint {
    pub format: String,
    pub version: u32,
    pub params: BTreeMap<String, Tensor>,
}

impl ParamCheckpoint {
    pub fn from_store(store: &ParamStore) -> Self {
        ParamCheckpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            params: store
                .iter()
                .map(|(_, name, t)| (name.to_string(), t.clone()))
                .collect(),
        }
    }

    /// Overwrites every parameter of `store` by name; names and shapes must
    /// match exactly.
    pub fn load_into(&self, store: &mut ParamStore) -> Result<()> {
        self.check_header()?;
        if self.params.len() != store.len() {
            return Err(Error::Format {
                line: 0,
                message: format!(
                    "checkpoint has {} parameters, model has {}",
                    self.params.len(),
                    store.len()
                ),
            });
        }
        for (name, t) in &self.params {
            let id = store.id(name).ok_or_else(|| Error::Format {
                line: 0,
                message: format!("unknown parameter {name}"),
            })?;
            if store.get(id).shape() != t.shape() || t.data().len() != t.shape().iter().product::<usize>() {
                return Err(Error::dim(
                    "checkpoint",
                    format!("{name}: {:?} vs {:?}", t.shape(), store.get(id).shape()),
                ));
            }
            *store.get_mut(id) = t.clone();
        }
        Ok(())
    }

    fn check_header(&self) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::Format {
                line: 0,
                message: format!("unsupported checkpoint {} v{}", self.format, self.version),
            });
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: ParamCheckpoint = serde_json::from_str(&text)?;
        ck.check_header()?;
        Ok(ck)
    }
}
