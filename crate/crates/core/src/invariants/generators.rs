use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::word::{enumerate_words, TraceWord};
use crate::algebra::{LinOperator, SplitSpace};
use crate::error::{Error, Result};

/// Number of random operators at which independence is certified.
pub const SAMPLE_POINTS: usize = 3;
/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_THRESHOLD: f64 = 1e-8;
/// Relative agreement used when comparing invariant values.
pub const VALUE_TOL: f64 = 1e-8;

/// Number of algebraically independent invariants of the
/// `O(g_F) × O(g_B)` action on `End T`: `N² − dim O(g_F) − dim O(g_B)`.
pub fn target_rank(n: usize, m: usize) -> usize {
    n * (n + 1) / 2 + m * (m + 1) / 2 + 2 * m * n
}

/// A set of trace words whose gradients are linearly independent at generic
/// points, together with the certification data.
#[derive(Debug, Clone)]
pub struct GeneratorSet {
    pub words: Vec<TraceWord>,
    pub target_rank: usize,
    pub achieved_rank: usize,
    pub sample_points: Vec<LinOperator>,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct GeneratorSetJson {
    words: Vec<String>,
    target_rank: usize,
    achieved_rank: usize,
    seed: u64,
}

impl GeneratorSet {
    /// A hand-picked set; ranks are left at the word count.
    pub fn from_words(words: Vec<TraceWord>) -> Self {
        let k = words.len();
        Self {
            words,
            target_rank: k,
            achieved_rank: k,
            sample_points: Vec::new(),
            seed: 0,
        }
    }

    /// True when the target rank was reached.
    pub fn is_complete(&self) -> bool {
        self.achieved_rank == self.target_rank
    }

    pub fn values(&self, a: &LinOperator, space: &SplitSpace) -> Result<Vec<f64>> {
        self.words.iter().map(|w| w.eval(a, space)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let j = GeneratorSetJson {
            words: self.words.iter().map(|w| w.to_string()).collect(),
            target_rank: self.target_rank,
            achieved_rank: self.achieved_rank,
            seed: self.seed,
        };
        Ok(serde_json::to_string_pretty(&j)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: GeneratorSetJson = serde_json::from_str(s)?;
        let words = j
            .words
            .iter()
            .map(|w| w.parse())
            .collect::<Result<Vec<TraceWord>>>()?;
        Ok(Self {
            words,
            target_rank: j.target_rank,
            achieved_rank: j.achieved_rank,
            sample_points: Vec::new(),
            seed: j.seed,
        })
    }
}

/// Greedy selection of independent generators among the enumerated words.
///
/// A word is kept when it raises the numerical rank of the gradient matrix at
/// every sample point. Ranks are measured point by point: concatenating the
/// gradients of several points into one row would overstate the rank of
/// algebraically dependent functions (e.g. `x` and `x²`).
pub fn independent_generators(
    space: &SplitSpace,
    max_degree: usize,
    seed: u64,
) -> Result<GeneratorSet> {
    let target = target_rank(space.n(), space.m());
    let words = enumerate_words(max_degree, space.m() > 0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<LinOperator> = (0..SAMPLE_POINTS)
        .map(|_| space.random_operator(&mut rng))
        .collect();
    let n2 = space.dim() * space.dim();

    let mut chosen = Vec::new();
    let mut rows: Vec<Vec<Vec<f64>>> = vec![Vec::new(); SAMPLE_POINTS];
    for word in words {
        if chosen.len() == target {
            break;
        }
        let grads = samples
            .iter()
            .map(|a| word.gradient(a, space).map(|g| g.to_row_vec()))
            .collect::<Result<Vec<_>>>()?;
        let increases = grads.iter().zip(&rows).all(|(g, existing)| {
            let mut trial = existing.clone();
            trial.push(g.clone());
            numerical_rank(&trial, n2) == trial.len()
        });
        if increases {
            for (r, g) in rows.iter_mut().zip(grads) {
                r.push(g);
            }
            chosen.push(word);
        }
    }
    let achieved = chosen.len();
    Ok(GeneratorSet {
        words: chosen,
        target_rank: target,
        achieved_rank: achieved,
        sample_points: samples,
        seed,
    })
}

/// Rank of a stack of row vectors by SVD with a relative threshold.
pub fn numerical_rank(rows: &[Vec<f64>], width: usize) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(rows.len(), width, |i, j| rows[i][j]);
    let sv = m.singular_values();
    let top = sv.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s >= RANK_THRESHOLD * top).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Separation {
    SameInvariants,
    Separated,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeparationReport {
    pub verdict: Separation,
    /// Largest scaled gap `|P(A) − P(B)| / (1 + max(|P(A)|, |P(B)|))`.
    pub max_gap: f64,
    /// Largest scaled gap between `P(A)` and `P(QAQ*)` over the sampled `Q`.
    pub invariance_gap: f64,
}

/// Probabilistic orbit comparison through the generator values.
pub fn orbit_separation_check(
    a: &LinOperator,
    b: &LinOperator,
    gens: &GeneratorSet,
    space: &SplitSpace,
    trials: usize,
    seed: u64,
) -> Result<SeparationReport> {
    space.check(a)?;
    space.check(b)?;
    if gens.words.is_empty() {
        return Err(Error::Config("generator set is empty".into()));
    }
    let va = gens.values(a, space)?;
    let vb = gens.values(b, space)?;
    let max_gap = max_scaled_gap(&va, &vb);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut invariance_gap: f64 = 0.0;
    for _ in 0..trials {
        let q = space.random_group_element_with(&mut rng);
        let vq = gens.values(&space.conjugate(&q, a)?, space)?;
        invariance_gap = invariance_gap.max(max_scaled_gap(&va, &vq));
    }
    let verdict = if max_gap <= VALUE_TOL {
        Separation::SameInvariants
    } else {
        Separation::Separated
    };
    Ok(SeparationReport {
        verdict,
        max_gap,
        invariance_gap,
    })
}

fn max_scaled_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / (1.0 + x.abs().max(y.abs())))
        .fold(0.0, f64::max)
}
