use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Source of token and context vectors standing in for a pre-trained
/// language model.
pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;

    /// Output width (d_lm).
    fn dim(&self) -> usize;

    fn deterministic(&self) -> bool;

    /// Embedding of a single normalized token.
    fn token(&self, token: &str) -> Result<Vec<f64>>;

    /// Context vector for a full `[CLS] q [SEP] a` key.
    fn context(&self, key: &str) -> Result<Vec<f64>>;
}

/// Seeded pseudo-random unit vectors keyed by string.
#[derive(Debug, Clone)]
pub struct HashProvider {
    dim: usize,
    seed: u64,
}

impl HashProvider {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashProvider { dim, seed }
    }

    fn unit_vector(&self, domain: &str, key: &str) -> Vec<f64> {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(domain.as_bytes());
        hasher.update([0u8]);
        hasher.update(key.as_bytes());
        let digest: [u8; 32] = hasher.finalize().into();
        let mut rng = ChaCha8Rng::from_seed(digest);
        loop {
            let v: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                return v.into_iter().map(|x| x / norm).collect();
            }
        }
    }
}

impl EmbeddingProvider for HashProvider {
    fn name(&self) -> &str {
        "hash"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn token(&self, token: &str) -> Result<Vec<f64>> {
        Ok(self.unit_vector("token", token))
    }

    fn context(&self, key: &str) -> Result<Vec<f64>> {
        Ok(self.unit_vector("context", key))
    }
}

/// Precomputed vectors read from a `dim=<d>` headed, tab-separated file.
/// Token and context keys share one table.
#[derive(Debug, Clone)]
pub struct FileProvider {
    dim: usize,
    table: HashMap<String, Vec<f64>>,
}

impl FileProvider {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: path.display().to_string(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate();
        let dim = match lines.next() {
            Some((_, header)) => header
                .trim()
                .strip_prefix("dim=")
                .and_then(|d| d.parse::<usize>().ok())
                .filter(|&d| d > 0)
                .ok_or_else(|| parse_err(1, format!("expected `dim=<d>` header, found `{header}`")))?,
            None => return Err(parse_err(1, "empty embedding file".into())),
        };
        let mut table = HashMap::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let (key, values) = line
                .split_once('\t')
                .ok_or_else(|| parse_err(i + 1, "expected `key<TAB>values`".into()))?;
            let v: Vec<f64> = values
                .split_whitespace()
                .map(|x| x.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| parse_err(i + 1, e.to_string()))?;
            if v.len() != dim {
                return Err(parse_err(i + 1, format!("expected {dim} values, found {}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(parse_err(i + 1, "non-finite value".into()));
            }
            table.insert(key.to_string(), v);
        }
        Ok(FileProvider { dim, table })
    }

    pub fn from_table(dim: usize, table: HashMap<String, Vec<f64>>) -> Result<Self> {
        if let Some((k, _)) = table.iter().find(|(_, v)| v.len() != dim) {
            return Err(Error::Validation(format!("embedding `{k}` has wrong width")));
        }
        Ok(FileProvider { dim, table })
    }

    fn lookup(&self, key: &str) -> Result<Vec<f64>> {
        self.table.get(key).cloned().ok_or_else(|| Error::Lookup(key.to_string()))
    }
}

impl EmbeddingProvider for FileProvider {
    fn name(&self) -> &str {
        "file"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn token(&self, token: &str) -> Result<Vec<f64>> {
        self.lookup(token)
    }

    fn context(&self, key: &str) -> Result<Vec<f64>> {
        self.lookup(key)
    }
}
