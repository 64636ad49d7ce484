use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::algebra::{LinOperator, SplitSpace};
use crate::error::{Error, Result};

/// Default ceiling on the degree accepted by [`enumerate_words`].
pub const DEFAULT_DEGREE_CAP: usize = 6;

/// One letter of a trace word. The derived order (`A < Astar < PiV`) is the
/// lexicographic order used for canonical forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Letter {
    A,
    AStar,
    PiV,
}

impl Letter {
    pub fn as_str(self) -> &'static str {
        match self {
            Letter::A => "A",
            Letter::AStar => "Astar",
            Letter::PiV => "PiV",
        }
    }
}

/// A word in `A`, `A*` and `Π_V`, kept in canonical cyclic form.
///
/// The invariant it encodes is `Tr(L₁ L₂ ⋯ L_k)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TraceWord {
    letters: Vec<Letter>,
}

impl TraceWord {
    /// Canonicalises an arbitrary letter sequence: cyclically adjacent `PiV`
    /// letters collapse, then the lexicographically least rotation is chosen.
    pub fn new(letters: Vec<Letter>) -> Result<Self> {
        let Some(start) = letters.iter().position(|&l| l != Letter::PiV) else {
            return Err(Error::InvalidWord(
                "word must contain at least one A or Astar".into(),
            ));
        };
        let k = letters.len();
        let mut collapsed = Vec::with_capacity(k);
        for idx in 0..k {
            let l = letters[(start + idx) % k];
            if l == Letter::PiV && collapsed.last() == Some(&Letter::PiV) {
                continue;
            }
            collapsed.push(l);
        }
        let best = (0..collapsed.len())
            .map(|r| rotate(&collapsed, r))
            .min()
            .expect("nonempty");
        Ok(Self { letters: best })
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    /// Number of `A` and `Astar` letters.
    pub fn degree(&self) -> usize {
        self.letters.iter().filter(|&&l| l != Letter::PiV).count()
    }

    pub fn contains_projector(&self) -> bool {
        self.letters.contains(&Letter::PiV)
    }

    /// Evaluates `Tr` of the letter product at `a`.
    pub fn eval(&self, a: &LinOperator, space: &SplitSpace) -> Result<f64> {
        let mats = LetterMatrices::new(a, space)?;
        let mut acc = mats.get(self.letters[0]).clone();
        for &l in &self.letters[1..] {
            acc *= mats.get(l);
        }
        Ok(acc.trace())
    }

    /// Gradient `G` with respect to the pairing: `d/dt P(A + tH) = ⟨G, H⟩`.
    ///
    /// Each `A` occurrence contributes the adjoint of its cyclic remainder,
    /// each `A*` occurrence the remainder itself.
    pub fn gradient(&self, a: &LinOperator, space: &SplitSpace) -> Result<LinOperator> {
        let mats = LetterMatrices::new(a, space)?;
        let n = space.dim();
        let mut g = DMatrix::zeros(n, n);
        for (i, &l) in self.letters.iter().enumerate() {
            if l == Letter::PiV {
                continue;
            }
            let rest = self.remainder(i, &mats, None);
            match l {
                Letter::A => g += space.adjoint(&LinOperator(rest))?.0,
                Letter::AStar => g += rest,
                Letter::PiV => unreachable!(),
            }
        }
        Ok(LinOperator(g))
    }

    /// Directional derivative of [`Self::gradient`] along `h`.
    pub fn gradient_derivative(
        &self,
        a: &LinOperator,
        h: &LinOperator,
        space: &SplitSpace,
    ) -> Result<LinOperator> {
        let mats = LetterMatrices::new(a, space)?;
        space.check(h)?;
        let h_star = space.adjoint(h)?.0;
        let n = space.dim();
        let mut g = DMatrix::zeros(n, n);
        for (i, &l) in self.letters.iter().enumerate() {
            if l == Letter::PiV {
                continue;
            }
            let mut d_rest = DMatrix::zeros(n, n);
            for (j, &lj) in self.letters.iter().enumerate() {
                if j == i {
                    continue;
                }
                let replacement = match lj {
                    Letter::A => &h.0,
                    Letter::AStar => &h_star,
                    Letter::PiV => continue,
                };
                d_rest += self.remainder(i, &mats, Some((j, replacement)));
            }
            match l {
                Letter::A => g += space.adjoint(&LinOperator(d_rest))?.0,
                Letter::AStar => g += d_rest,
                Letter::PiV => unreachable!(),
            }
        }
        Ok(LinOperator(g))
    }

    /// Product `L_{i+1} ⋯ L_k L_1 ⋯ L_{i-1}`, optionally with letter `j` replaced.
    fn remainder(
        &self,
        i: usize,
        mats: &LetterMatrices,
        replace: Option<(usize, &DMatrix<f64>)>,
    ) -> DMatrix<f64> {
        let k = self.letters.len();
        let n = mats.a.nrows();
        let mut acc = DMatrix::identity(n, n);
        for step in 1..k {
            let j = (i + step) % k;
            let m = match replace {
                Some((rj, r)) if rj == j => r,
                _ => mats.get(self.letters[j]),
            };
            acc *= m;
        }
        acc
    }
}

fn rotate(v: &[Letter], r: usize) -> Vec<Letter> {
    v[r..].iter().chain(&v[..r]).copied().collect()
}

struct LetterMatrices {
    a: DMatrix<f64>,
    a_star: DMatrix<f64>,
    pi_v: DMatrix<f64>,
}

impl LetterMatrices {
    fn new(a: &LinOperator, space: &SplitSpace) -> Result<Self> {
        let a_star = space.adjoint(a)?;
        Ok(Self {
            a: a.0.clone(),
            a_star: a_star.0,
            pi_v: space.projector_v().0,
        })
    }

    fn get(&self, l: Letter) -> &DMatrix<f64> {
        match l {
            Letter::A => &self.a,
            Letter::AStar => &self.a_star,
            Letter::PiV => &self.pi_v,
        }
    }
}

impl fmt::Display for TraceWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.letters.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(l.as_str())?;
        }
        Ok(())
    }
}

impl FromStr for TraceWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let letters = s
            .split_whitespace()
            .map(|tok| match tok {
                "A" => Ok(Letter::A),
                "Astar" | "A*" | "A'" => Ok(Letter::AStar),
                "PiV" | "P" => Ok(Letter::PiV),
                other => Err(Error::InvalidWord(format!("unknown letter `{other}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if letters.is_empty() {
            return Err(Error::InvalidWord("empty word".into()));
        }
        TraceWord::new(letters)
    }
}

/// All canonical words of degree `1..=max_degree`, ordered by degree and then
/// lexicographically. Only cyclic rotation and `Π_V² = Π_V` are used for
/// deduplication; a word and its transpose are kept as distinct entries.
pub fn enumerate_words(max_degree: usize, with_projector: bool) -> Result<Vec<TraceWord>> {
    enumerate_words_capped(max_degree, with_projector, DEFAULT_DEGREE_CAP)
}

pub fn enumerate_words_capped(
    max_degree: usize,
    with_projector: bool,
    cap: usize,
) -> Result<Vec<TraceWord>> {
    if max_degree == 0 {
        return Err(Error::Config("max_degree must be at least 1".into()));
    }
    if max_degree > cap {
        return Err(Error::DegreeTooLarge {
            requested: max_degree,
            cap,
        });
    }
    let mut out = Vec::new();
    for degree in 1..=max_degree {
        let mut seen = BTreeSet::new();
        let proj_masks = if with_projector { 1u32 << degree } else { 1 };
        for star_mask in 0..(1u32 << degree) {
            for proj_mask in 0..proj_masks {
                let mut letters = Vec::with_capacity(2 * degree);
                for p in 0..degree {
                    letters.push(if star_mask >> p & 1 == 1 {
                        Letter::AStar
                    } else {
                        Letter::A
                    });
                    if proj_mask >> p & 1 == 1 {
                        letters.push(Letter::PiV);
                    }
                }
                seen.insert(TraceWord::new(letters)?);
            }
        }
        out.extend(seen);
    }
    Ok(out)
}
