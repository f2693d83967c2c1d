use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Sorted set of retained pixel indices on a square grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoiIndexSet {
    pub indices: Vec<usize>,
    pub side_pixels: usize,
}

impl RoiIndexSet {
    pub fn new(mut indices: Vec<usize>, side_pixels: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() {
            return Err(Error::EmptyRoi("no pixel selected".into()));
        }
        let n = side_pixels * side_pixels;
        if let Some(&bad) = indices.iter().find(|&&p| p >= n) {
            return Err(Error::invalid(format!("pixel {bad} outside a grid of {n} pixels")));
        }
        Ok(Self { indices, side_pixels })
    }

    pub fn full(side_pixels: usize) -> Self {
        Self { indices: (0..side_pixels * side_pixels).collect(), side_pixels }
    }

    pub fn from_mask(mask: &[bool], side_pixels: usize) -> Result<Self> {
        if mask.len() != side_pixels * side_pixels {
            return Err(Error::dim(format!("mask of {} entries for a {side_pixels}^2 grid", mask.len())));
        }
        Self::new((0..mask.len()).filter(|&p| mask[p]).collect(), side_pixels)
    }

    /// Square window of side `len` whose lower-left pixel is `(row0, col0)`.
    pub fn square(side_pixels: usize, row0: usize, col0: usize, len: usize) -> Result<Self> {
        if len == 0 || row0 + len > side_pixels || col0 + len > side_pixels {
            return Err(Error::invalid(format!(
                "square {len} at ({row0}, {col0}) does not fit a {side_pixels}-pixel grid"
            )));
        }
        let idx = (row0..row0 + len).flat_map(|r| (col0..col0 + len).map(move |c| r * side_pixels + c)).collect();
        Self::new(idx, side_pixels)
    }

    /// Number of retained pixels, `P`.
    pub fn p(&self) -> usize {
        self.indices.len()
    }

    pub fn n(&self) -> usize {
        self.side_pixels * self.side_pixels
    }

    pub fn contains(&self, p: usize) -> bool {
        self.indices.binary_search(&p).is_ok()
    }

    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.n()];
        for &p in &self.indices {
            m[p] = true;
        }
        m
    }

    /// Position of each pixel inside the ROI, `None` outside.
    pub fn positions(&self) -> Vec<Option<usize>> {
        let mut pos = vec![None; self.n()];
        for (i, &p) in self.indices.iter().enumerate() {
            pos[p] = Some(i);
        }
        pos
    }

    /// Hex SHA-256 of the index list.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.side_pixels as u64).to_le_bytes());
        for &p in &self.indices {
            h.update((p as u64).to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Plain PGM (`P2`) mask, 1 inside. The first text row is the top of the
    /// grid (largest `y`).
    pub fn to_pgm(&self) -> String {
        let s = self.side_pixels;
        let mask = self.mask();
        let mut out = format!("P2\n{s} {s}\n1\n");
        for row in (0..s).rev() {
            let line: Vec<&str> = (0..s).map(|c| if mask[row * s + c] { "1" } else { "0" }).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    /// One 0-based pixel index per row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("pixel\n");
        for p in &self.indices {
            let _ = writeln!(out, "{p}");
        }
        out
    }

    pub fn from_csv(text: &str, side_pixels: usize) -> Result<Self> {
        let idx = text
            .lines()
            .skip(1)
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().parse::<usize>().map_err(|e| Error::Format(format!("bad pixel index '{l}': {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(idx, side_pixels)
    }
}
