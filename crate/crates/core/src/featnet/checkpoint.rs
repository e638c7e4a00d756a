use std::fs;
use std::path::Path;

use super::{init_params, FeatNetConfig, FeatNetParams};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"FNET";

/// Writes `FNET`, the u32 length of the JSON config, the config, then every
/// tensor as little-endian f32 in declaration order.
pub fn save_checkpoint(path: &Path, cfg: &FeatNetConfig, params: &FeatNetParams) -> Result<()> {
    let json = serde_json::to_vec(cfg).map_err(|e| Error::invalid(e.to_string()))?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for t in params.tensors() {
        for &v in t.data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(FeatNetConfig, FeatNetParams)> {
    let ctx = path.display().to_string();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(Error::parse(ctx, "not an FNET checkpoint"));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let json = bytes.get(8..8 + n).ok_or_else(|| Error::parse(&ctx, "truncated config"))?;
    let cfg: FeatNetConfig = serde_json::from_slice(json).map_err(|e| Error::parse(&ctx, e.to_string()))?;
    let mut params = init_params(&cfg, 0).map_err(|e| Error::parse(&ctx, e.to_string()))?;
    let blob = &bytes[8 + n..];
    let expected: usize = params.tensors().iter().map(|t| t.data.len() * 4).sum();
    if blob.len() != expected {
        return Err(Error::parse(&ctx, format!("tensor blob has {} bytes, expected {expected}", blob.len())));
    }
    let mut vals = blob.chunks_exact(4).map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())));
    for t in params.all_tensors_mut() {
        for v in t.iter_mut() {
            *v = vals.next().unwrap();
        }
    }
    if params.bn.running_var.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::parse(&ctx, "batch-norm running variance must be positive"));
    }
    Ok((cfg, params))
}
