use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use super::model::ReducedModel;

const METADATA: &str = "model.json";
const BASIS: &str = "basis.bin";

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

impl ReducedModel {
    /// Writes `model.json` and the basis as little-endian `f64` columns.
    pub fn save(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let meta = serde_json::to_string_pretty(self).map_err(|e| invalid(e.to_string()))?;
        fs::write(dir.join(METADATA), meta)?;
        let mut out = io::BufWriter::new(fs::File::create(dir.join(BASIS))?);
        for v in &self.basis {
            for x in v {
                out.write_all(&x.to_le_bytes())?;
            }
        }
        out.flush()
    }

    pub fn load(dir: &Path) -> io::Result<Self> {
        let meta = fs::read_to_string(dir.join(METADATA))?;
        let mut model: ReducedModel = serde_json::from_str(&meta).map_err(|e| invalid(e.to_string()))?;
        let mut bytes = Vec::new();
        fs::File::open(dir.join(BASIS))?.read_to_end(&mut bytes)?;
        let n = model.n_basis();
        if bytes.len() != 8 * n * model.n_truth {
            return Err(invalid(format!(
                "{BASIS} holds {} bytes, expected {} basis vectors of length {}",
                bytes.len(),
                n,
                model.n_truth
            )));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        model.basis = values.chunks(model.n_truth.max(1)).take(n).map(<[f64]>::to_vec).collect();
        Ok(model)
    }
}
