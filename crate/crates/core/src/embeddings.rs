//! Word and concept vectors in the word2vec text format.
//!
//! Lookup is total: keys missing from the table get a deterministic
//! pseudo-random vector derived from the key and the table's OOV seed.

use std::borrow::Cow;
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const DEFAULT_OOV_RANGE: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    index: HashMap<String, usize>,
    keys: Vec<String>,
    data: Vec<f64>,
    pub oov_seed: u64,
    pub oov_range: f64,
}

/// 64-bit FNV-1a; stable across platforms and releases.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self {
            dim,
            index: HashMap::new(),
            keys: Vec::new(),
            data: Vec::new(),
            oov_seed: 0,
            oov_range: DEFAULT_OOV_RANGE,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn contains(&self, key: &str) -> bool {
        self.index.contains_key(key)
    }

    pub fn insert(&mut self, key: &str, vector: &[f64]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Config(format!(
                "vector for `{key}` has {} components, expected {}",
                vector.len(),
                self.dim
            )));
        }
        if self.index.contains_key(key) {
            return Err(Error::Config(format!("duplicate embedding key `{key}`")));
        }
        self.index.insert(key.to_string(), self.keys.len());
        self.keys.push(key.to_string());
        self.data.extend_from_slice(vector);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&[f64]> {
        self.index
            .get(key)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    /// Stored vector, or the key's deterministic OOV vector.
    pub fn lookup(&self, key: &str) -> Cow<'_, [f64]> {
        match self.get(key) {
            Some(v) => Cow::Borrowed(v),
            None => Cow::Owned(self.oov_vector(key)),
        }
    }

    fn oov_vector(&self, key: &str) -> Vec<f64> {
        let seed = fnv1a(key.as_bytes()) ^ self.oov_seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = self.oov_range;
        (0..self.dim).map(|_| rng.gen_range(-r..=r)).collect()
    }

    pub fn read_word2vec_text<R: BufRead>(reader: R, origin: &str) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format(origin, 1, "missing `<count> <dim>` header"))?
            .map_err(|e| Error::io(origin, e))?;
        let mut parts = header.split_whitespace();
        let parse_usize = |s: Option<&str>| s.and_then(|v| v.parse::<usize>().ok());
        let (Some(count), Some(dim), None) = (parse_usize(parts.next()), parse_usize(parts.next()), parts.next())
        else {
            return Err(Error::format(origin, 1, "malformed `<count> <dim>` header"));
        };
        if dim == 0 {
            return Err(Error::format(origin, 1, "dimension must be positive"));
        }
        let mut table = EmbeddingTable::new(dim);
        let mut vector = Vec::with_capacity(dim);
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line.map_err(|e| Error::io(origin, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let key = fields.next().unwrap_or_default();
            vector.clear();
            for f in fields {
                let v: f64 = f
                    .parse()
                    .map_err(|_| Error::format(origin, line_no, format!("invalid number `{f}`")))?;
                vector.push(v);
            }
            if vector.len() != dim {
                return Err(Error::format(
                    origin,
                    line_no,
                    format!("expected {dim} values for `{key}`, found {}", vector.len()),
                ));
            }
            if table.contains(key) {
                return Err(Error::format(origin, line_no, format!("duplicate token `{key}`")));
            }
            table.insert(key, &vector)?;
        }
        if table.len() != count {
            return Err(Error::format(
                origin,
                1,
                format!("header declares {count} entries, found {}", table.len()),
            ));
        }
        Ok(table)
    }

    pub fn write_word2vec_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.len(), self.dim)?;
        for (i, key) in self.keys.iter().enumerate() {
            write!(w, "{key}")?;
            for v in &self.data[i * self.dim..(i + 1) * self.dim] {
                write!(w, " {v:.6}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Loads a word2vec text file; `.gz` files are decompressed on the fly.
pub fn load_word2vec_text(path: &Path) -> Result<EmbeddingTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let origin = path.display().to_string();
    if path.extension().is_some_and(|e| e == "gz") {
        EmbeddingTable::read_word2vec_text(BufReader::new(GzDecoder::new(file)), &origin)
    } else {
        EmbeddingTable::read_word2vec_text(BufReader::new(file), &origin)
    }
}

pub fn save_word2vec_text(table: &EmbeddingTable, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    table
        .write_word2vec_text(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}
