//! Matrix tuple files: a JSON header followed by float64 payload, either
//! base64-embedded (`to_json`) or raw little-endian bytes after a newline
//! (`write_binary`).

use std::io::{BufRead, Write};

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{CMatrix, MatrixTuple};
use crate::error::{Error, Result};

pub const LAYOUT: &str = "row-major interleaved re,im";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixTupleHeader {
    pub k: usize,
    pub n: usize,
    pub selfadjoint: bool,
    pub layout: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
}

impl MatrixTuple {
    fn header(&self) -> MatrixTupleHeader {
        MatrixTupleHeader {
            k: self.k(),
            n: self.n(),
            selfadjoint: self.selfadjoint(),
            layout: LAYOUT.to_string(),
            payload: None,
        }
    }

    fn payload_bytes(&self) -> Vec<u8> {
        let k = self.k();
        let mut out = Vec::with_capacity(self.n() * k * k * 16);
        for m in self.coords() {
            for i in 0..k {
                for j in 0..k {
                    let z = m[(i, j)];
                    out.extend_from_slice(&z.re.to_le_bytes());
                    out.extend_from_slice(&z.im.to_le_bytes());
                }
            }
        }
        out
    }

    fn from_payload(h: &MatrixTupleHeader, bytes: &[u8]) -> Result<Self> {
        if h.layout != LAYOUT {
            return Err(Error::Parse(format!("unsupported layout {:?}", h.layout)));
        }
        let per = h.k * h.k * 16;
        if bytes.len() != h.n * per {
            return Err(Error::Parse(format!(
                "payload has {} bytes, header implies {}",
                bytes.len(),
                h.n * per
            )));
        }
        let f = |off: usize| f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        let mats = (0..h.n)
            .map(|c| {
                CMatrix::from_fn(h.k, h.k, |i, j| {
                    let off = c * per + (i * h.k + j) * 16;
                    Complex64::new(f(off), f(off + 8))
                })
            })
            .collect();
        MatrixTuple::new(mats, h.selfadjoint)
    }

    pub fn to_json(&self) -> String {
        let mut h = self.header();
        h.payload = Some(STANDARD.encode(self.payload_bytes()));
        serde_json::to_string(&h).expect("header serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let h: MatrixTupleHeader = serde_json::from_str(s)?;
        let payload = h
            .payload
            .as_deref()
            .ok_or_else(|| Error::Parse("missing base64 payload".into()))?;
        let bytes = STANDARD
            .decode(payload)
            .map_err(|e| Error::Parse(format!("bad base64 payload: {e}")))?;
        Self::from_payload(&h, &bytes)
    }

    /// Header JSON on one line, then the raw payload.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, &self.header())?;
        w.write_all(b"\n")?;
        w.write_all(&self.payload_bytes())?;
        Ok(())
    }

    pub fn read_binary<R: BufRead>(mut r: R) -> Result<Self> {
        let mut line = String::new();
        r.read_line(&mut line)?;
        let h: MatrixTupleHeader = serde_json::from_str(line.trim_end())?;
        if h.payload.is_some() {
            return Err(Error::Parse("binary form carries no inline payload".into()));
        }
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_payload(&h, &bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrices::{sample_gue, RngStream};

    fn fixture() -> MatrixTuple {
        let mut rng = RngStream::new(5).rng();
        let a = sample_gue(3, 1.0, &mut rng).unwrap();
        let b = sample_gue(3, 0.5, &mut rng).unwrap();
        MatrixTuple::new(vec![a, b], true).unwrap()
    }

    #[test]
    fn json_round_trip_is_exact() {
        let t = fixture();
        let s = t.to_json();
        assert!(s.contains("\"layout\":\"row-major interleaved re,im\""));
        assert_eq!(MatrixTuple::from_json(&s).unwrap(), t);
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let t = fixture();
        let mut buf = Vec::new();
        t.write_binary(&mut buf).unwrap();
        let back = MatrixTuple::read_binary(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let t = fixture();
        let mut buf = Vec::new();
        t.write_binary(&mut buf).unwrap();
        buf.truncate(buf.len() - 8);
        assert!(MatrixTuple::read_binary(std::io::Cursor::new(buf)).is_err());
    }
}
