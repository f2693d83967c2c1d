use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{total_fields, ChannelPair, PilotBook};
use crate::em::ContrastMap;
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::rng::{complex_gaussian, stream, Purpose};

/// Additive noise model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseSpec {
    None,
    /// Total noise energy over the whole stack is `10^(-snr/10)` times the
    /// total noiseless energy.
    SnrDb(f64),
    /// Fixed variance `E|n|^2` per complex entry.
    Variance(f64),
}

impl NoiseSpec {
    fn variance(self, signal_energy: f64, entries: usize) -> Result<f64> {
        match self {
            NoiseSpec::None => Ok(0.0),
            NoiseSpec::SnrDb(db) if db.is_infinite() && db > 0.0 => Ok(0.0),
            NoiseSpec::SnrDb(db) if db.is_finite() => {
                Ok(signal_energy / entries as f64 * 10f64.powf(-db / 10.0))
            }
            NoiseSpec::Variance(v) if v >= 0.0 && v.is_finite() => Ok(v),
            other => Err(Error::invalid(format!("unusable noise specification {other:?}"))),
        }
    }

    pub fn snr_db(self) -> Option<f64> {
        match self {
            NoiseSpec::SnrDb(db) => Some(db),
            _ => None,
        }
    }
}

/// Per-tone observation stacks `y_k` (length `T N_r`, slot-major).
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub y: Vec<Vec<Complex64>>,
    pub slots: usize,
    pub n_r: usize,
    pub snr_db: Option<f64>,
    pub noise_var: f64,
    pub seed: u64,
}

impl Observation {
    /// Tone-major stack `Y` of length `K T N_r`.
    pub fn stacked(&self) -> Vec<Complex64> {
        self.y.iter().flatten().copied().collect()
    }

    pub fn tones(&self) -> usize {
        self.y.len()
    }
}

/// `H2 diag(chi) E_t X_k` as an `N_r x T` matrix.
fn scattered_slots(chi: &ContrastMap, ch: &ChannelPair, x: &CMat) -> Result<CMat> {
    let fields = total_fields(&chi.chi, &ch.domain, &ch.h1)?;
    let mut z = &fields.e_t * x;
    for t in 0..z.ncols() {
        for (i, c) in chi.chi.iter().enumerate() {
            z[(i, t)] *= c;
        }
    }
    Ok(&ch.h2 * &z)
}

/// Noiseless `y_k` per tone.
pub fn noiseless_response(chi: &ContrastMap, channels: &[ChannelPair], pilots: &PilotBook) -> Result<Vec<Vec<Complex64>>> {
    if pilots.tones() < channels.len() {
        return Err(Error::dim(format!("{} pilot tones for {} channels", pilots.tones(), channels.len())));
    }
    channels
        .iter()
        .zip(&pilots.x)
        .map(|(ch, x)| {
            let m = scattered_slots(chi, ch, x)?;
            Ok((0..m.ncols()).flat_map(|t| (0..m.nrows()).map(move |r| (t, r))).map(|(t, r)| m[(r, t)]).collect())
        })
        .collect()
}

/// Synthesizes noisy observations. Noise of tone `k`, slot `t` comes from
/// its own random stream.
pub fn simulate_observations(
    chi: &ContrastMap,
    channels: &[ChannelPair],
    pilots: &PilotBook,
    noise: NoiseSpec,
    seed: u64,
) -> Result<Observation> {
    let mut y = noiseless_response(chi, channels, pilots)?;
    let n_r = channels.first().map_or(0, |c| c.h2.nrows());
    let entries: usize = y.iter().map(Vec::len).sum();
    let energy: f64 = y.iter().flatten().map(|z| z.norm_sqr()).sum();
    let noise_var = noise.variance(energy, entries)?;
    if noise_var > 0.0 {
        for (k, yk) in y.iter_mut().enumerate() {
            for (t, slot) in yk.chunks_mut(n_r).enumerate() {
                let mut rng = stream(seed, Purpose::ObservationNoise, k, t);
                for z in slot {
                    *z += complex_gaussian(&mut rng, noise_var);
                }
            }
        }
    }
    Ok(Observation { y, slots: pilots.slots, n_r, snr_db: noise.snr_db(), noise_var, seed })
}

/// Slot-stacked multi-static response `U_k` (`T N_r x N_t`).
///
/// Column `m` is `1_T (x) h_m` with `h_m` the scattered response to Tx `m`
/// alone; each of the `T` copies gets independent noise at the same SNR rule
/// applied to this matrix.
pub fn multistatic_response(
    chi: &ContrastMap,
    ch: &ChannelPair,
    tone: usize,
    slots: usize,
    noise: NoiseSpec,
    seed: u64,
) -> Result<CMat> {
    let n_t = ch.h1.ncols();
    let eye = Mat::from_fn(n_t, n_t, |i, j| if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) });
    let h = scattered_slots(chi, ch, &eye)?;
    let n_r = h.nrows();
    let mut u = Mat::from_fn(slots * n_r, n_t, |i, m| h[(i % n_r, m)]);
    let energy: f64 = (0..n_t).flat_map(|m| (0..slots * n_r).map(move |i| (i, m))).map(|(i, m)| u[(i, m)].norm_sqr()).sum();
    let var = noise.variance(energy, slots * n_r * n_t)?;
    if var > 0.0 {
        for t in 0..slots {
            let mut rng = stream(seed, Purpose::ResponseNoise, tone, t);
            for m in 0..n_t {
                for r in 0..n_r {
                    u[(t * n_r + r, m)] += complex_gaussian(&mut rng, var);
                }
            }
        }
    }
    Ok(u)
}
