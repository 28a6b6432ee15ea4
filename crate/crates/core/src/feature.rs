//! Quantized image feature vectors and the similarity measures defined on them.
//!
//! Every image carries two byte vectors: a 64-byte semantic descriptor that
//! drives graph construction, and a 50-byte low-level visual descriptor that
//! only participates in grid sorting. Each byte is the quantization of a real
//! in `[0, 1]`.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

/// Length of the semantic descriptor in bytes.
pub const SEMANTIC_DIMS: usize = 64;
/// Length of the visual descriptor in bytes.
pub const VISUAL_DIMS: usize = 50;
/// Reserved image id marking an unused neighbor slot.
pub const NULL_ID: u32 = 0xFFFF_FFFF;

const LEVELS: f64 = 255.0;
const LEVELS_SQ: u64 = 255 * 255;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("component {index} = {value} lies outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("{requested} records exceed the id space")]
    TooLarge { requested: u64 },
    #[error("image id {0:#x} is reserved")]
    ReservedId(u32),
    #[error("invalid generator parameters: {0}")]
    InvalidParameters(&'static str),
}

/// Similarity in `[0, 1]`, 1 meaning identical.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, serde::Serialize)]
pub struct Score(f64);

impl Score {
    pub const ZERO: Score = Score(0.0);
    pub const ONE: Score = Score(1.0);

    /// Clamps into `[0, 1]`; NaN maps to 0.
    pub fn new(value: f64) -> Self {
        if value.is_nan() {
            Score(0.0)
        } else {
            Score(value.clamp(0.0, 1.0))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<Score> for f64 {
    fn from(s: Score) -> f64 {
        s.0
    }
}

macro_rules! byte_feature {
    ($name:ident, $dims:expr, $doc:literal) => {
        #[doc = $doc]
        #[derive(Clone, Copy, PartialEq, Eq, Hash)]
        pub struct $name([u8; $dims]);

        impl $name {
            pub const DIMS: usize = $dims;

            pub fn new(bytes: [u8; $dims]) -> Self {
                Self(bytes)
            }

            pub fn from_slice(bytes: &[u8]) -> Result<Self, FeatureError> {
                let arr: [u8; $dims] =
                    bytes
                        .try_into()
                        .map_err(|_| FeatureError::DimensionMismatch {
                            expected: $dims,
                            actual: bytes.len(),
                        })?;
                Ok(Self(arr))
            }

            /// Quantizes a real vector of exactly `DIMS` components.
            pub fn from_reals(values: &[f64]) -> Result<Self, FeatureError> {
                if values.len() != $dims {
                    return Err(FeatureError::DimensionMismatch {
                        expected: $dims,
                        actual: values.len(),
                    });
                }
                Self::from_slice(&quantize(values)?)
            }

            pub fn splat(byte: u8) -> Self {
                Self([byte; $dims])
            }

            pub fn as_bytes(&self) -> &[u8; $dims] {
                &self.0
            }

            pub fn to_reals(&self) -> Vec<f64> {
                dequantize(&self.0)
            }

            pub fn similarity(&self, other: &Self) -> Score {
                score_from_sq_dist(sq_dist(&self.0, &other.0), $dims)
            }
        }

        impl std::fmt::Debug for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                write!(f, "{}(", stringify!($name))?;
                for b in &self.0[..4] {
                    write!(f, "{b:02x}")?;
                }
                write!(f, "…)")
            }
        }
    };
}

byte_feature!(
    SemanticFeature,
    SEMANTIC_DIMS,
    "64-byte semantic descriptor; similarity on it shapes the graph."
);
byte_feature!(
    VisualFeature,
    VISUAL_DIMS,
    "50-byte low-level appearance descriptor."
);

/// Anything that exposes an image id plus both descriptors.
pub trait HasFeatures {
    fn image_id(&self) -> u32;
    fn semantic(&self) -> &SemanticFeature;
    fn visual(&self) -> &VisualFeature;
}

impl<T: HasFeatures + ?Sized> HasFeatures for &T {
    fn image_id(&self) -> u32 {
        (**self).image_id()
    }
    fn semantic(&self) -> &SemanticFeature {
        (**self).semantic()
    }
    fn visual(&self) -> &VisualFeature {
        (**self).visual()
    }
}

/// Resolves an image id to its descriptors.
pub trait FeatureLookup {
    fn features(&self, id: u32) -> Option<(&SemanticFeature, &VisualFeature)>;
}

impl<T: HasFeatures> FeatureLookup for [T] {
    fn features(&self, id: u32) -> Option<(&SemanticFeature, &VisualFeature)> {
        self.iter()
            .find(|r| r.image_id() == id)
            .map(|r| (r.semantic(), r.visual()))
    }
}

impl<T: HasFeatures> FeatureLookup for Vec<T> {
    fn features(&self, id: u32) -> Option<(&SemanticFeature, &VisualFeature)> {
        self.as_slice().features(id)
    }
}

impl<T: HasFeatures> FeatureLookup for std::collections::HashMap<u32, T> {
    fn features(&self, id: u32) -> Option<(&SemanticFeature, &VisualFeature)> {
        self.get(&id).map(|r| (r.semantic(), r.visual()))
    }
}

impl<T: HasFeatures> FeatureLookup for std::collections::BTreeMap<u32, T> {
    fn features(&self, id: u32) -> Option<(&SemanticFeature, &VisualFeature)> {
        self.get(&id).map(|r| (r.semantic(), r.visual()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureRecord {
    pub image_id: u32,
    pub semantic: SemanticFeature,
    pub visual: VisualFeature,
    /// Lowercase keywords.
    pub keywords: BTreeSet<String>,
}

impl FeatureRecord {
    pub fn new(
        image_id: u32,
        semantic: SemanticFeature,
        visual: VisualFeature,
    ) -> Result<Self, FeatureError> {
        if image_id == NULL_ID {
            return Err(FeatureError::ReservedId(image_id));
        }
        Ok(Self {
            image_id,
            semantic,
            visual,
            keywords: BTreeSet::new(),
        })
    }

    pub fn with_keywords<I, S>(mut self, keywords: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.keywords
            .extend(keywords.into_iter().map(|k| k.as_ref().to_lowercase()));
        self
    }
}

impl HasFeatures for FeatureRecord {
    fn image_id(&self) -> u32 {
        self.image_id
    }
    fn semantic(&self) -> &SemanticFeature {
        &self.semantic
    }
    fn visual(&self) -> &VisualFeature {
        &self.visual
    }
}

/// Maps reals in `[0, 1]` to bytes, rounding half up.
pub fn quantize(values: &[f64]) -> Result<Vec<u8>, FeatureError> {
    values
        .iter()
        .enumerate()
        .map(|(index, &value)| {
            if !(0.0..=1.0).contains(&value) {
                return Err(FeatureError::OutOfRange { index, value });
            }
            Ok((value * LEVELS + 0.5).floor() as u8)
        })
        .collect()
}

pub fn dequantize(bytes: &[u8]) -> Vec<f64> {
    bytes.iter().map(|&b| f64::from(b) / LEVELS).collect()
}

/// Sum of squared byte differences. Exact, so comparisons between sums of
/// edge costs never suffer from rounding.
#[inline]
pub fn sq_dist(a: &[u8], b: &[u8]) -> u32 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = i32::from(x) - i32::from(y);
            (d * d) as u32
        })
        .sum()
}

/// Converts an integer squared byte distance over `dims` components into a score.
#[inline]
pub fn score_from_sq_dist(dist: u32, dims: usize) -> Score {
    Score::new(1.0 - f64::from(dist) / (LEVELS_SQ as f64 * dims as f64))
}

/// `1 - ||a - b||² / D` on the dequantized vectors.
pub fn similarity(a: &[u8], b: &[u8]) -> Result<Score, FeatureError> {
    if a.len() != b.len() {
        return Err(FeatureError::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.is_empty() {
        return Ok(Score::ONE);
    }
    Ok(score_from_sq_dist(sq_dist(a, b), a.len()))
}

/// Relative weights of the two descriptors in [`combined_distance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombinedWeights {
    pub semantic: f64,
    pub visual: f64,
}

impl Default for CombinedWeights {
    fn default() -> Self {
        Self {
            semantic: 0.7,
            visual: 0.3,
        }
    }
}

impl CombinedWeights {
    pub fn distance<A: HasFeatures + ?Sized, B: HasFeatures + ?Sized>(&self, a: &A, b: &B) -> f64 {
        let s = 1.0 - a.semantic().similarity(b.semantic()).value();
        let v = 1.0 - a.visual().similarity(b.visual()).value();
        self.semantic * s + self.visual * v
    }
}

/// Weighted distance over both descriptors with the default 0.7 / 0.3 weights.
pub fn combined_distance<A: HasFeatures + ?Sized, B: HasFeatures + ?Sized>(a: &A, b: &B) -> f64 {
    CombinedWeights::default().distance(a, b)
}

/// Clustered random records for tests and demos.
///
/// Cluster centers are uniform in the unit cube; members are Gaussian
/// perturbations (σ = 0.05) of their center, clamped to `[0, 1]`. Ids are
/// sequential from 1 in cluster order.
pub fn generate_synthetic(
    clusters: usize,
    per_cluster: usize,
    keyword_per_cluster: bool,
    seed: u64,
) -> Result<Vec<FeatureRecord>, FeatureError> {
    if clusters == 0 || per_cluster == 0 {
        return Err(FeatureError::InvalidParameters(
            "clusters and per_cluster must be at least 1",
        ));
    }
    let total = (clusters as u64).saturating_mul(per_cluster as u64);
    if total > u64::from(u32::MAX) - 1 {
        return Err(FeatureError::TooLarge { requested: total });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.05).expect("valid sigma");
    let mut records = Vec::with_capacity(total as usize);
    let mut next_id = 1u32;
    let mut sem = [0u8; SEMANTIC_DIMS];
    let mut vis = [0u8; VISUAL_DIMS];

    for c in 0..clusters {
        let sem_center: Vec<f64> = (0..SEMANTIC_DIMS).map(|_| rng.random()).collect();
        let vis_center: Vec<f64> = (0..VISUAL_DIMS).map(|_| rng.random()).collect();
        let keyword = format!("kw{c}");
        for _ in 0..per_cluster {
            for (out, &m) in sem.iter_mut().zip(&sem_center) {
                *out = perturb(m, &noise, &mut rng);
            }
            for (out, &m) in vis.iter_mut().zip(&vis_center) {
                *out = perturb(m, &noise, &mut rng);
            }
            let mut rec = FeatureRecord::new(next_id, SemanticFeature(sem), VisualFeature(vis))?;
            if keyword_per_cluster {
                rec.keywords.insert(keyword.clone());
            }
            records.push(rec);
            next_id += 1;
        }
    }
    Ok(records)
}

fn perturb(center: f64, noise: &Normal<f64>, rng: &mut ChaCha8Rng) -> u8 {
    let v = (center + noise.sample(rng)).clamp(0.0, 1.0);
    (v * LEVELS + 0.5).floor() as u8
}
