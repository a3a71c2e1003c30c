//! Binary cache of built resolvent grids.
//!
//! Building the family is the dominant cost of a run, so grids can be
//! persisted keyed by a content hash of the operators *as sampled on the
//! grid* (principal operator at every node, kernel on a coarse node
//! subgrid) together with the node set itself. File layout: a fixed header
//! (magic, dimension, node count, key hash) followed by the node vector and
//! the two lower-triangular block arrays, all little-endian 64-bit floats.

use std::io::{Read, Write};
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use crate::config::hex_string;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::problem::{OperatorStructure, ProblemSpec};
use crate::resolvent::{build_resolvent_grid, ResolventGrid};

const MAGIC: &[u8; 8] = b"RESGRID1";
const KEY_SUBGRID: usize = 64;

/// Directory-backed cache.
pub struct ResolventCache {
    dir: PathBuf,
}

impl ResolventCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(ResolventCache { dir })
    }

    /// Content key of `(spec operators sampled on grid, grid nodes)`.
    pub fn key(spec: &ProblemSpec, grid: &TimeGrid) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update(MAGIC);
        hasher.update((spec.state_dim as u64).to_le_bytes());
        hasher.update(match spec.structure {
            OperatorStructure::Dense => [0u8],
            OperatorStructure::Diagonal => [1u8],
        });
        for &t in grid.nodes() {
            hasher.update(t.to_le_bytes());
        }
        for &t in grid.nodes() {
            let a = (spec.a_op)(t);
            for v in a.iter() {
                hasher.update(v.to_le_bytes());
            }
        }
        match &spec.kernel {
            None => hasher.update([0u8]),
            Some(kernel) => {
                hasher.update([1u8]);
                let n = grid.nodes().len();
                let count = n.min(KEY_SUBGRID);
                let idx: Vec<usize> = (0..count).map(|k| k * (n - 1) / count.max(1)).collect();
                for (a, &i) in idx.iter().enumerate() {
                    for &j in idx.iter().take(a + 1) {
                        let z = kernel(grid.node(i), grid.node(j));
                        for v in z.iter() {
                            hasher.update(v.to_le_bytes());
                        }
                    }
                }
            }
        }
        hasher.finalize().into()
    }

    fn path_for(&self, key: &[u8; 32]) -> PathBuf {
        self.dir.join(format!("{}.resolvent", hex_string(key)))
    }

    pub fn store(&self, spec: &ProblemSpec, res: &ResolventGrid) -> Result<PathBuf> {
        let key = Self::key(spec, res.grid());
        let path = self.path_for(&key);
        let mut file = std::fs::File::create(&path)?;
        file.write_all(MAGIC)?;
        file.write_all(&(res.dim() as u64).to_le_bytes())?;
        file.write_all(&(res.grid().nodes().len() as u64).to_le_bytes())?;
        file.write_all(&[match res.structure() {
            OperatorStructure::Dense => 0u8,
            OperatorStructure::Diagonal => 1u8,
        }])?;
        file.write_all(&key)?;
        let mut buf = Vec::with_capacity(8 * res.grid().nodes().len());
        for &t in res.grid().nodes() {
            buf.extend_from_slice(&t.to_le_bytes());
        }
        file.write_all(&buf)?;
        write_f64_slice(&mut file, res.raw_r())?;
        write_f64_slice(&mut file, res.raw_ds_r())?;
        Ok(path)
    }

    /// Load the grid for `(spec, grid)` if a file with a matching key and
    /// identical node set exists.
    pub fn load(&self, spec: &ProblemSpec, grid: &TimeGrid) -> Result<Option<ResolventGrid>> {
        let key = Self::key(spec, grid);
        let path = self.path_for(&key);
        if !path.exists() {
            return Ok(None);
        }
        let mut file = std::fs::File::open(&path)?;
        let mut magic = [0u8; 8];
        file.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Config(format!(
                "{} is not a resolvent cache file",
                path.display()
            )));
        }
        let dim = read_u64(&mut file)? as usize;
        let n_nodes = read_u64(&mut file)? as usize;
        let mut tag = [0u8; 1];
        file.read_exact(&mut tag)?;
        let structure = if tag[0] == 1 {
            OperatorStructure::Diagonal
        } else {
            OperatorStructure::Dense
        };
        let mut stored_key = [0u8; 32];
        file.read_exact(&mut stored_key)?;
        if dim != spec.state_dim || n_nodes != grid.nodes().len() || stored_key != key {
            return Ok(None);
        }
        let nodes = read_f64_vec(&mut file, n_nodes)?;
        if nodes != grid.nodes() {
            return Ok(None);
        }
        let pairs = n_nodes * (n_nodes + 1) / 2;
        let blk = dim * dim;
        let r = read_f64_vec(&mut file, pairs * blk)?;
        let dsr = read_f64_vec(&mut file, pairs * blk)?;
        Ok(Some(ResolventGrid::from_raw(
            grid.clone(),
            dim,
            structure,
            r,
            dsr,
        )))
    }
}

fn write_f64_slice(file: &mut std::fs::File, data: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(data.len() * 8);
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    file.write_all(&buf)?;
    Ok(())
}

fn read_u64(file: &mut std::fs::File) -> Result<u64> {
    let mut b = [0u8; 8];
    file.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64_vec(file: &mut std::fs::File, len: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; len * 8];
    file.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Build the resolvent grid, going through `cache` when one is provided.
pub fn build_resolvent_grid_cached(
    spec: &ProblemSpec,
    grid: &TimeGrid,
    cache: Option<&ResolventCache>,
) -> Result<ResolventGrid> {
    if let Some(cache) = cache {
        if let Some(res) = cache.load(spec, grid)? {
            return Ok(res);
        }
        let res = build_resolvent_grid(spec, grid)?;
        cache.store(spec, &res)?;
        return Ok(res);
    }
    build_resolvent_grid(spec, grid)
}
