//! On-disk layout for observations and operators.
//!
//! Each object is a pair of files sharing a stem: `<stem>.json` holds the
//! header and `<stem>.bin` the complex payload as interleaved little-endian
//! `f64` pairs `(re, im)`. A CSV with one complex value per row can be
//! written alongside for inspection.
//!
//! Observation payload: `Y` in tone-major, slot-major, Rx-minor order.
//! Operator payload: for each tone, `u` (`T x N`) then `v` (`N_r x N`), both
//! column-major.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Observation, OperatorBundle, ToneOperator};
use crate::error::{Error, Result};
use crate::linalg::CMat;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationHeader {
    pub kind: String,
    pub tones_hz: Vec<f64>,
    pub slots: usize,
    pub n_r: usize,
    pub seed: u64,
    pub snr_db: Option<f64>,
    pub noise_var: f64,
    pub values: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorHeader {
    pub kind: String,
    pub tones: usize,
    pub slots: usize,
    pub n_r: usize,
    pub n: usize,
    pub born_only: bool,
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn encode(values: impl Iterator<Item = Complex64>) -> Vec<u8> {
    let mut out = Vec::new();
    for z in values {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

fn decode(bytes: &[u8], expected: usize) -> Result<Vec<Complex64>> {
    if bytes.len() != expected * 16 {
        return Err(Error::Format(format!("payload has {} bytes, expected {}", bytes.len(), expected * 16)));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect())
}

fn read_header<T: for<'de> Deserialize<'de>>(stem: &Path, kind: &str) -> Result<T> {
    let text = fs::read_to_string(with_ext(stem, "json"))?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
    if v.get("kind").and_then(|k| k.as_str()) != Some(kind) {
        return Err(Error::Format(format!("header is not of kind '{kind}'")));
    }
    serde_json::from_value(v).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_observation(stem: &Path, obs: &Observation, tones_hz: &[f64]) -> Result<()> {
    if tones_hz.len() != obs.tones() {
        return Err(Error::dim(format!("{} tone frequencies for {} tones", tones_hz.len(), obs.tones())));
    }
    let y = obs.stacked();
    let header = ObservationHeader {
        kind: "observation".into(),
        tones_hz: tones_hz.to_vec(),
        slots: obs.slots,
        n_r: obs.n_r,
        seed: obs.seed,
        snr_db: obs.snr_db,
        noise_var: obs.noise_var,
        values: y.len(),
    };
    fs::write(with_ext(stem, "json"), serde_json::to_string_pretty(&header).expect("header serializes"))?;
    fs::write(with_ext(stem, "bin"), encode(y.iter().copied()))?;
    let mut csv = String::from("tone,slot,rx,re,im\n");
    for (k, yk) in obs.y.iter().enumerate() {
        for (i, z) in yk.iter().enumerate() {
            csv.push_str(&format!("{k},{},{},{:e},{:e}\n", i / obs.n_r, i % obs.n_r, z.re, z.im));
        }
    }
    fs::write(with_ext(stem, "csv"), csv)?;
    Ok(())
}

pub fn read_observation(stem: &Path) -> Result<(Observation, ObservationHeader)> {
    let h: ObservationHeader = read_header(stem, "observation")?;
    let y = decode(&fs::read(with_ext(stem, "bin"))?, h.values)?;
    let per = h.slots * h.n_r;
    if per == 0 || y.len() != per * h.tones_hz.len() {
        return Err(Error::Format("payload length does not match header dimensions".into()));
    }
    let obs = Observation {
        y: y.chunks(per).map(<[Complex64]>::to_vec).collect(),
        slots: h.slots,
        n_r: h.n_r,
        snr_db: h.snr_db,
        noise_var: h.noise_var,
        seed: h.seed,
    };
    Ok((obs, h))
}

fn column_major(m: &CMat) -> impl Iterator<Item = Complex64> + '_ {
    (0..m.ncols()).flat_map(move |j| (0..m.nrows()).map(move |i| m[(i, j)]))
}

pub fn write_operator(stem: &Path, op: &OperatorBundle) -> Result<()> {
    let first = op.tones.first().ok_or_else(|| Error::invalid("operator has no tones"))?;
    let header = OperatorHeader {
        kind: "operator".into(),
        tones: op.tones.len(),
        slots: first.u.nrows(),
        n_r: first.v.nrows(),
        n: op.n(),
        born_only: op.born_only,
    };
    fs::write(with_ext(stem, "json"), serde_json::to_string_pretty(&header).expect("header serializes"))?;
    let payload = op.tones.iter().flat_map(|t| column_major(&t.u).chain(column_major(&t.v)));
    fs::write(with_ext(stem, "bin"), encode(payload))?;
    let mut csv = fs::File::create(with_ext(stem, "csv"))?;
    writeln!(csv, "tone,factor,row,col,re,im")?;
    for (k, t) in op.tones.iter().enumerate() {
        for (name, m) in [("u", &t.u), ("v", &t.v)] {
            for j in 0..m.ncols() {
                for i in 0..m.nrows() {
                    writeln!(csv, "{k},{name},{i},{j},{:e},{:e}", m[(i, j)].re, m[(i, j)].im)?;
                }
            }
        }
    }
    Ok(())
}

pub fn read_operator(stem: &Path) -> Result<OperatorBundle> {
    let h: OperatorHeader = read_header(stem, "operator")?;
    let per_tone = (h.slots + h.n_r) * h.n;
    let data = decode(&fs::read(with_ext(stem, "bin"))?, per_tone * h.tones)?;
    let tones = data
        .chunks(per_tone)
        .map(|c| {
            let (u, v) = c.split_at(h.slots * h.n);
            ToneOperator {
                u: Mat::from_fn(h.slots, h.n, |i, j| u[j * h.slots + i]),
                v: Mat::from_fn(h.n_r, h.n, |i, j| v[j * h.n_r + i]),
            }
        })
        .collect();
    Ok(OperatorBundle::from_tones(tones, h.born_only))
}
