//! Versioned binary container for model parameters.
//!
//! Layout: 8-byte magic, `u32` version, `u32` header length, a UTF-8 JSON
//! header, then each tensor as little-endian `f64` values in header order.
//! Parameters round-trip bit-exactly.

use std::path::Path;

use serde_json::{json, Value};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"KGCLMDL\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub header: Value,
    pub tensors: Vec<(String, Vec<f64>)>,
}

impl TensorFile {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut header = self.header.clone();
        let shapes: Vec<Value> = self
            .tensors
            .iter()
            .map(|(name, t)| json!([name, t.len()]))
            .collect();
        header["tensors"] = Value::Array(shapes);
        let header = serde_json::to_vec(&header).expect("json header serializes");

        let total: usize = self.tensors.iter().map(|(_, t)| t.len() * 8).sum();
        let mut out = Vec::with_capacity(16 + header.len() + total);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for (_, t) in &self.tensors {
            for v in t {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], origin: &str) -> Result<Self> {
        let bad = |m: &str| Error::format(origin, 0, m.to_string());
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("not a model file"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(bad(&format!("unsupported model file version {version}")));
        }
        let header_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let body = &bytes[16..];
        if body.len() < header_len {
            return Err(bad("truncated header"));
        }
        let mut header: Value =
            serde_json::from_slice(&body[..header_len]).map_err(|e| bad(&format!("header: {e}")))?;
        let shapes = header
            .as_object_mut()
            .and_then(|o| o.remove("tensors"))
            .and_then(|t| t.as_array().cloned())
            .ok_or_else(|| bad("header lacks tensor table"))?;

        let mut data = &body[header_len..];
        let mut tensors = Vec::with_capacity(shapes.len());
        for shape in shapes {
            let (Some(name), Some(len)) = (shape[0].as_str(), shape[1].as_u64()) else {
                return Err(bad("malformed tensor table entry"));
            };
            let nbytes = len as usize * 8;
            if data.len() < nbytes {
                return Err(bad(&format!("tensor `{name}` truncated")));
            }
            let values = data[..nbytes]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensors.push((name.to_string(), values));
            data = &data[nbytes..];
        }
        if !data.is_empty() {
            return Err(bad("trailing bytes after tensors"));
        }
        Ok(Self { header, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, &path.display().to_string())
    }

    pub fn kind(&self) -> Option<&str> {
        self.header.get("kind").and_then(Value::as_str)
    }

    /// Removes and returns the named tensor, checking its length.
    pub fn take(&mut self, name: &str, len: usize) -> Result<Vec<f64>> {
        let pos = self
            .tensors
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::format("model", 0, format!("missing tensor `{name}`")))?;
        let (_, t) = self.tensors.remove(pos);
        if t.len() != len {
            return Err(Error::format(
                "model",
                0,
                format!("tensor `{name}` has {} values, expected {len}", t.len()),
            ));
        }
        Ok(t)
    }

    pub fn header_field<T: serde::de::DeserializeOwned>(&self, key: &str) -> Result<T> {
        let v = self
            .header
            .get(key)
            .cloned()
            .ok_or_else(|| Error::format("model", 0, format!("header lacks `{key}`")))?;
        serde_json::from_value(v).map_err(|e| Error::format("model", 0, format!("header `{key}`: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_exact_round_trip() {
        let file = TensorFile {
            header: json!({"kind": "test", "lr": 0.1}),
            tensors: vec![
                ("a".into(), vec![0.1, -0.0, f64::MIN_POSITIVE, 1.0 / 3.0]),
                ("b".into(), vec![]),
            ],
        };
        let back = TensorFile::from_bytes(&file.to_bytes(), "mem").unwrap();
        assert_eq!(back.header, file.header);
        for ((_, x), (_, y)) in back.tensors.iter().zip(&file.tensors) {
            let xb: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
            let yb: Vec<u64> = y.iter().map(|v| v.to_bits()).collect();
            assert_eq!(xb, yb);
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(TensorFile::from_bytes(b"hello", "mem").is_err());
        let mut bytes = TensorFile {
            header: json!({}),
            tensors: vec![("a".into(), vec![1.0])],
        }
        .to_bytes();
        bytes.pop();
        assert!(TensorFile::from_bytes(&bytes, "mem").is_err());
    }
}
