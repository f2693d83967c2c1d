use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::rng::{complex_gaussian, stream, Purpose};

/// Pilot matrices `X_k` (`N_t x T`) for every tone.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotBook {
    pub x: Vec<CMat>,
    pub slots: usize,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct PilotHeader {
    n_t: usize,
    slots: usize,
    tones: usize,
    seed: u64,
}

/// Random complex Gaussian pilots with unit-norm columns. Slot `t` of tone
/// `k` comes from its own stream, so books for different `K` share prefixes.
pub fn make_pilots(n_t: usize, slots: usize, tones: usize, seed: u64) -> Result<PilotBook> {
    if slots == 0 || n_t == 0 {
        return Err(Error::invalid("pilots need T >= 1 and N_t >= 1"));
    }
    let x = (0..tones)
        .map(|k| {
            let mut m = Mat::zeros(n_t, slots);
            for t in 0..slots {
                let mut rng = stream(seed, Purpose::Pilots, k, t);
                let col: Vec<_> = (0..n_t).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
                let norm = crate::linalg::vec_norm(&col);
                for (i, z) in col.into_iter().enumerate() {
                    m[(i, t)] = z / norm;
                }
            }
            m
        })
        .collect();
    Ok(PilotBook { x, slots, seed })
}

impl PilotBook {
    pub fn n_t(&self) -> usize {
        self.x.first().map_or(0, |m| m.nrows())
    }

    pub fn tones(&self) -> usize {
        self.x.len()
    }

    pub fn header_json(&self) -> String {
        serde_json::to_string(&PilotHeader { n_t: self.n_t(), slots: self.slots, tones: self.tones(), seed: self.seed })
            .expect("plain struct serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn deterministic_and_unit_norm() {
        let a = make_pilots(60, 8, 4, 11).unwrap();
        let b = make_pilots(60, 8, 4, 11).unwrap();
        assert_eq!(a, b);
        for x in &a.x {
            for t in 0..8 {
                let n: f64 = (0..60).map(|i| x[(i, t)].norm_sqr()).sum::<f64>().sqrt();
                assert!((n - 1.0).abs() < 1e-12);
            }
        }
        assert_ne!(make_pilots(60, 8, 4, 12).unwrap(), a);
    }

    #[test]
    fn tones_are_uncorrelated() {
        let book = make_pilots(60, 8, 32, 3).unwrap();
        // |<x, x'>|^2 for independent unit vectors in C^60 has mean 1/60.
        let mut acc = 0.0;
        let mut count = 0;
        for k in 0..31 {
            for t in 0..8 {
                let ip: Complex64 = (0..60).map(|i| book.x[k][(i, t)].conj() * book.x[k + 1][(i, t)]).sum();
                acc += ip.norm_sqr();
                count += 1;
            }
        }
        let mean = acc / count as f64;
        assert!(mean < 3.0 / 60.0, "mean squared cross-tone correlation {mean}");
    }
}
