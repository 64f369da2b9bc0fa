//! Model file container.
//!
//! An ASCII header of `key value` lines, starting with the magic line and
//! ending with `end_header`, followed by a little-endian binary body:
//!
//! ```text
//! GREENPCO-SAAB
//! version 1
//! hops 2
//! input_channels 3
//! coefficients <retained coefficient count>
//! training_scans <n>
//! seed <u64>
//! end_header
//! per hop:      u32 k_neighbors, f64 energy_threshold, u32 channel_count
//! per channel:  u32 source, f64 bias, u32 m,
//!               m × 8 f64 kernels (kernel by kernel, DC first), m f64 energies
//! ```

use super::saab::{Octants, SaabChannelFilter, OCTANTS};
use super::{FeatureError, Hop, HopChannel, ModelMetadata, SaabModel, HOP_COUNT, INPUT_CHANNELS};

pub const MODEL_MAGIC: &str = "GREENPCO-SAAB";
pub const MODEL_VERSION: u32 = 1;

pub fn write_model(model: &SaabModel) -> Vec<u8> {
    let meta = model.metadata();
    let mut out = format!(
        "{MODEL_MAGIC}\nversion {MODEL_VERSION}\nhops {}\ninput_channels {INPUT_CHANNELS}\ncoefficients {}\ntraining_scans {}\nseed {}\nend_header\n",
        model.hops().len(),
        model.coefficient_count(),
        meta.training_scans,
        meta.seed
    )
    .into_bytes();
    let u32le = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
    for hop in model.hops() {
        u32le(&mut out, hop.k_neighbors);
        out.extend_from_slice(&hop.energy_threshold.to_le_bytes());
        u32le(&mut out, hop.channels.len());
        for ch in &hop.channels {
            let f = &ch.filter;
            u32le(&mut out, ch.source);
            out.extend_from_slice(&f.bias().to_le_bytes());
            u32le(&mut out, f.output_count());
            for k in f.kernels() {
                for v in k {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            for e in f.energies() {
                out.extend_from_slice(&e.to_le_bytes());
            }
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], FeatureError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| FeatureError::ModelFormat("truncated body".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize, FeatureError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn f64(&mut self) -> Result<f64, FeatureError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn read_model(bytes: &[u8]) -> Result<SaabModel, FeatureError> {
    let bad = |m: &str| FeatureError::ModelFormat(m.to_string());
    const END: &[u8] = b"end_header\n";
    let header_end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| bad("missing end_header"))?;
    let header = std::str::from_utf8(&bytes[..header_end]).map_err(|_| bad("header is not UTF-8"))?;
    let mut lines = header.lines();
    if lines.next() != Some(MODEL_MAGIC) {
        return Err(bad("bad magic"));
    }
    let mut meta = ModelMetadata::default();
    let mut hops = None;
    for line in lines {
        let (key, value) = line.split_once(' ').ok_or_else(|| bad("bad header line"))?;
        let num = || value.trim().parse::<u64>().map_err(|_| bad("bad header value"));
        match key {
            "version" if num()? != MODEL_VERSION as u64 => {
                return Err(FeatureError::ModelFormat(format!("unsupported version {value}")))
            }
            "hops" => hops = Some(num()? as usize),
            "input_channels" if num()? != INPUT_CHANNELS as u64 => {
                return Err(FeatureError::ModelMismatch(format!("{value} input channels")))
            }
            "training_scans" => meta.training_scans = num()? as u32,
            "seed" => meta.seed = num()?,
            _ => {}
        }
    }
    let hop_count = hops.ok_or_else(|| bad("missing hops"))?;
    if hop_count != HOP_COUNT {
        return Err(FeatureError::ModelMismatch(format!("{hop_count} hops")));
    }

    let mut cur = Cursor {
        bytes,
        pos: header_end + END.len(),
    };
    let mut out = Vec::with_capacity(hop_count);
    for _ in 0..hop_count {
        let k_neighbors = cur.u32()?;
        let energy_threshold = cur.f64()?;
        let n_channels = cur.u32()?;
        let mut channels = Vec::with_capacity(n_channels.min(4096));
        for _ in 0..n_channels {
            let source = cur.u32()?;
            let bias = cur.f64()?;
            let m = cur.u32()?;
            if m == 0 || m > OCTANTS {
                return Err(bad("bad kernel count"));
            }
            let mut kernels = Vec::with_capacity(m);
            for _ in 0..m {
                let mut k: Octants = [0.0; OCTANTS];
                for v in k.iter_mut() {
                    *v = cur.f64()?;
                }
                kernels.push(k);
            }
            let energies = (0..m).map(|_| cur.f64()).collect::<Result<Vec<_>, _>>()?;
            channels.push(HopChannel {
                source,
                filter: SaabChannelFilter::from_parts(kernels, bias, energies)?,
            });
        }
        out.push(Hop {
            k_neighbors,
            energy_threshold,
            channels,
        });
    }
    if cur.pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    SaabModel::from_hops(out, meta)
}
