use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{
    normalize_text, stable_hash64, EmbedError, EmbeddingBatch, EmbeddingProvider,
    EmbeddingVector, DEFAULT_DIMENSION,
};

pub const MOCK_MODEL_ID: &str = "mock-gaussian-v1";

/// Uniformly random unit vector drawn from a seeded ChaCha8 stream.
pub fn random_unit(seed: u64, dim: usize) -> EmbeddingVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    EmbeddingVector::normalized(&values).expect("gaussian draw is nonzero")
}

pub fn mock_embed_dim(text: &str, dim: usize) -> EmbeddingVector {
    random_unit(stable_hash64(text.as_bytes()), dim)
}

/// Deterministic stand-in embedding at the default dimension.
pub fn mock_embed(text: &str) -> EmbeddingVector {
    mock_embed_dim(text, DEFAULT_DIMENSION)
}

/// `base` perturbed by a random direction of length `noise`, renormalized.
/// For unit `base` the expected cosine to the original is `1 / sqrt(1 + noise²)`.
pub fn noisy_copy(base: &EmbeddingVector, noise: f64, seed: u64) -> EmbeddingVector {
    let direction = random_unit(seed, base.dim());
    let values: Vec<f64> = base
        .values()
        .iter()
        .zip(direction.values())
        .map(|(&b, &d)| f64::from(b) + noise * f64::from(d))
        .collect();
    EmbeddingVector::normalized(&values).expect("noisy copy is nonzero")
}

/// Makes a text embed near a shared anchor instead of its own hash. Texts that
/// share anchors become synthetic translations of each other; a text anchored to
/// `a+b` looks like the merge of texts anchored to `a` and to `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct MockAlias {
    pub anchors: Vec<String>,
    pub noise: f64,
}

/// Hash-seeded Gaussian embeddings, optionally steered by an alias table.
#[derive(Debug, Clone)]
pub struct MockProvider {
    model_id: String,
    dimension: usize,
    aliases: HashMap<String, MockAlias>,
}

impl Default for MockProvider {
    fn default() -> Self {
        MockProvider::new(DEFAULT_DIMENSION)
    }
}

impl MockProvider {
    pub fn new(dimension: usize) -> Self {
        MockProvider {
            model_id: MOCK_MODEL_ID.to_string(),
            dimension,
            aliases: HashMap::new(),
        }
    }

    pub fn with_alias(mut self, text: &str, alias: MockAlias) -> Self {
        self.aliases.insert(normalize_text(text), alias);
        self
    }

    /// Reads an alias table: `text<TAB>anchor[+anchor...][<TAB>noise]` per line,
    /// `#` comments allowed. Noise defaults to 0.1. The model id gains a digest of
    /// the table, so caches filled under a different table are not reused.
    pub fn load_aliases(mut self, path: &Path) -> Result<Self, EmbedError> {
        let table = fs::read_to_string(path)?;
        self.model_id = format!("{MOCK_MODEL_ID}+{:016x}", stable_hash64(table.as_bytes()));
        for (n, line) in table.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t');
            let (Some(text), Some(anchors)) = (fields.next(), fields.next()) else {
                return Err(EmbedError::Protocol(format!(
                    "alias table line {}: expected text and anchors",
                    n + 1
                )));
            };
            let noise = match fields.next() {
                Some(v) => v.trim().parse::<f64>().map_err(|e| {
                    EmbedError::Protocol(format!("alias table line {}: {e}", n + 1))
                })?,
                None => 0.1,
            };
            let anchors = anchors
                .split('+')
                .map(|a| a.trim().to_string())
                .filter(|a| !a.is_empty())
                .collect();
            self = self.with_alias(text, MockAlias { anchors, noise });
        }
        Ok(self)
    }

    pub fn alias_count(&self) -> usize {
        self.aliases.len()
    }

    fn anchor(&self, name: &str) -> EmbeddingVector {
        random_unit(stable_hash64(format!("anchor:{name}").as_bytes()), self.dimension)
    }

    pub fn embed_one(&self, text: &str) -> EmbeddingVector {
        let Some(alias) = self.aliases.get(&normalize_text(text)) else {
            return mock_embed_dim(text, self.dimension);
        };
        let mut sum = vec![0.0f64; self.dimension];
        for a in &alias.anchors {
            for (s, v) in sum.iter_mut().zip(self.anchor(a).values()) {
                *s += f64::from(*v);
            }
        }
        let base = EmbeddingVector::normalized(&sum)
            .unwrap_or_else(|_| mock_embed_dim(text, self.dimension));
        if alias.noise == 0.0 {
            base
        } else {
            noisy_copy(&base, alias.noise, stable_hash64(text.as_bytes()))
        }
    }
}

impl EmbeddingProvider for MockProvider {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, batch: &EmbeddingBatch) -> Result<Vec<EmbeddingVector>, EmbedError> {
        Ok(batch.texts.iter().map(|t| self.embed_one(t)).collect())
    }
}
