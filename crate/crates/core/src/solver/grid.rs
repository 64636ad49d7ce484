use serde::Serialize;

use crate::error::{Error, Result};

/// Smallest number of nodes per axis.
pub const MIN_NODES: usize = 8;

/// Uniform periodic grid over a box; nodes sit at `lo + i·h`, last axis
/// fastest in the flat node index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    sizes: Vec<usize>,
    domain: Vec<[f64; 2]>,
    spacing: Vec<f64>,
    #[serde(skip)]
    strides: Vec<usize>,
}

impl Grid {
    pub fn new(sizes: Vec<usize>, domain: Vec<[f64; 2]>) -> Result<Self> {
        if sizes.len() != domain.len() {
            return Err(Error::DimensionMismatch {
                expected: domain.len(),
                got: sizes.len(),
            });
        }
        if let Some(&n) = sizes.iter().find(|&&n| n < MIN_NODES) {
            return Err(Error::Config(format!(
                "grid needs at least {MIN_NODES} nodes per axis, got {n}"
            )));
        }
        let spacing = sizes
            .iter()
            .zip(&domain)
            .map(|(&n, [lo, hi])| (hi - lo) / n as f64)
            .collect();
        let mut strides = vec![1; sizes.len()];
        for a in (0..sizes.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * sizes[a + 1];
        }
        Ok(Self {
            sizes,
            domain,
            spacing,
            strides,
        })
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn domain(&self) -> &[[f64; 2]] {
        &self.domain
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn len(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinate cell volume `Π h_a`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn index(&self, node: usize, axis: usize) -> usize {
        (node / self.strides[axis]) % self.sizes[axis]
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        (0..self.dim())
            .map(|a| self.domain[a][0] + self.index(node, a) as f64 * self.spacing[a])
            .collect()
    }

    /// Periodic neighbour `node ± e_axis`.
    pub fn neighbor(&self, node: usize, axis: usize, forward: bool) -> usize {
        let i = self.index(node, axis);
        let n = self.sizes[axis];
        let j = if forward { (i + 1) % n } else { (i + n - 1) % n };
        node + j * self.strides[axis] - i * self.strides[axis]
    }

    /// Second-order central difference of `f` along `axis` at `node`.
    #[inline]
    pub fn diff<F: Fn(usize) -> f64>(&self, f: F, node: usize, axis: usize) -> f64 {
        (f(self.neighbor(node, axis, true)) - f(self.neighbor(node, axis, false)))
            / (2.0 * self.spacing[axis])
    }
}
