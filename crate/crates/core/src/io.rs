//! Flat little-endian `f64` blocks with a TOML sidecar descriptor.

use crate::error::{Error, Result};
use crate::rough::{ControlledPath, Grid, RoughPath};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

/// One named block of the flat file, in order of appearance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub len: usize,
    /// Row-major shape of the block.
    pub shape: Vec<usize>,
}

/// Sidecar describing a flat file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub kind: String,
    pub grid: Grid,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holder_exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    pub blocks: Vec<Block>,
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Writes `<prefix>.bin` and `<prefix>.toml`.
pub fn write_blocks(prefix: &Path, descriptor: &Descriptor, blocks: &[&[f64]]) -> Result<()> {
    if blocks.len() != descriptor.blocks.len()
        || blocks.iter().zip(&descriptor.blocks).any(|(b, d)| b.len() != d.len)
    {
        return Err(Error::shape("blocks matching the descriptor", "mismatched blocks"));
    }
    let total: usize = blocks.iter().map(|b| b.len()).sum();
    let mut bytes = Vec::with_capacity(total * 8);
    for b in blocks {
        for v in *b {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    if let Some(dir) = prefix.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(with_ext(prefix, "bin"), bytes)?;
    let text = toml::to_string(descriptor).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(with_ext(prefix, "toml"), text)?;
    Ok(())
}

/// Reads the descriptor and the blocks written by [`write_blocks`].
pub fn read_blocks(prefix: &Path) -> Result<(Descriptor, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(with_ext(prefix, "toml"))?;
    let descriptor: Descriptor = toml::from_str(&text).map_err(|e| Error::Io(e.to_string()))?;
    let bytes = fs::read(with_ext(prefix, "bin"))?;
    let total: usize = descriptor.blocks.iter().map(|b| b.len).sum();
    if bytes.len() != total * 8 {
        return Err(Error::shape(format!("{} bytes", total * 8), bytes.len()));
    }
    let mut floats = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")));
    let blocks = descriptor
        .blocks
        .iter()
        .map(|b| floats.by_ref().take(b.len).collect())
        .collect();
    Ok((descriptor, blocks))
}

pub fn write_rough_path(prefix: &Path, rp: &RoughPath) -> Result<()> {
    let m = rp.grid().cells();
    let d = rp.dim();
    let descriptor = Descriptor {
        kind: "rough_path".into(),
        grid: *rp.grid(),
        dim: d,
        value_dim: None,
        holder_exponent: Some(rp.holder_exponent()),
        reference: Some(rp.token().to_string()),
        blocks: vec![
            Block {
                name: "values".into(),
                len: (m + 1) * d,
                shape: vec![m + 1, d],
            },
            Block {
                name: "cell_areas".into(),
                len: m * d * d,
                shape: vec![m, d, d],
            },
        ],
    };
    write_blocks(prefix, &descriptor, &[rp.values(), rp.cell_areas()])
}

pub fn read_rough_path(prefix: &Path) -> Result<RoughPath> {
    let (desc, mut blocks) = read_blocks(prefix)?;
    if desc.kind != "rough_path" || blocks.len() != 2 {
        return Err(Error::Io(format!("{} is not a rough path file", prefix.display())));
    }
    let areas = blocks.pop().expect("two blocks");
    let values = blocks.pop().expect("two blocks");
    let rp = RoughPath::build(
        desc.grid,
        desc.dim,
        values,
        crate::rough::AreaMode::Supplied(areas),
    )?;
    match desc.holder_exponent {
        Some(a) => rp.with_holder_exponent(a),
        None => Ok(rp),
    }
}

pub fn write_controlled_path(prefix: &Path, cp: &ControlledPath) -> Result<()> {
    let nodes = cp.grid().num_nodes();
    let (m, d) = (cp.dim(), cp.ref_dim());
    let descriptor = Descriptor {
        kind: "controlled_path".into(),
        grid: *cp.grid(),
        dim: d,
        value_dim: Some(m),
        holder_exponent: None,
        reference: Some(cp.reference().to_string()),
        blocks: vec![
            Block {
                name: "values".into(),
                len: nodes * m,
                shape: vec![nodes, m],
            },
            Block {
                name: "derivative".into(),
                len: nodes * m * d,
                shape: vec![nodes, m, d],
            },
        ],
    };
    write_blocks(prefix, &descriptor, &[cp.values(), cp.derivative()])
}

/// Reads a controlled path and binds it to `rp`, which must carry the
/// recorded reference token.
pub fn read_controlled_path(prefix: &Path, rp: &RoughPath) -> Result<ControlledPath> {
    let (desc, mut blocks) = read_blocks(prefix)?;
    if desc.kind != "controlled_path" || blocks.len() != 2 {
        return Err(Error::Io(format!("{} is not a controlled path file", prefix.display())));
    }
    if desc.reference.as_deref() != Some(rp.token().to_string().as_str()) {
        return Err(Error::Contract(format!(
            "stored path is controlled by {:?}, not {}",
            desc.reference,
            rp.token()
        )));
    }
    let derivative = blocks.pop().expect("two blocks");
    let values = blocks.pop().expect("two blocks");
    ControlledPath::new(rp, desc.value_dim.unwrap_or(1), values, derivative)
}
