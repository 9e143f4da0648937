//! The Gaussian variational family `q(w) = N(mu, L L^T)`, the fixed latent
//! sample sets that define the finite-sample bound, and the prior/noise
//! precisions.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg;

/// Seed for an independent random stream derived from a user seed.
///
/// Every source of randomness in a fit (initial mean, training draws,
/// holdout draws, restarts) takes its own stream so that changing one
/// setting does not perturb the others.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Gaussian posterior approximation `N(mu, L L^T)`.
///
/// `L` is a general square matrix. A posterior may be block-diagonal (one
/// block per independent factor, e.g. one per class or one per data point);
/// entries outside the blocks are kept at exactly zero and are not free
/// parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalPosterior {
    mu: DVector<f64>,
    l: DMatrix<f64>,
    blocks: Vec<usize>,
}

impl VariationalPosterior {
    /// Posterior with a dense factor.
    pub fn new(mu: DVector<f64>, l: DMatrix<f64>) -> Result<Self> {
        let m = mu.len();
        Self::with_blocks(mu, l, vec![m])
    }

    /// Posterior whose factor is block-diagonal with the given block sizes.
    pub fn with_blocks(mu: DVector<f64>, l: DMatrix<f64>, blocks: Vec<usize>) -> Result<Self> {
        let m = mu.len();
        if l.nrows() != m || l.ncols() != m {
            return Err(Error::dim(m, l.nrows().max(l.ncols()), "factor L must be M x M"));
        }
        validate_blocks(&blocks, m)?;
        let post = VariationalPosterior { mu, l, blocks };
        for (r, c) in post.off_block_positions() {
            if post.l[(r, c)] != 0.0 {
                return Err(Error::InvalidPosterior(format!(
                    "factor entry ({r}, {c}) lies outside the block structure"
                )));
            }
        }
        if !linalg::all_finite_vec(&post.mu) || !linalg::all_finite_mat(&post.l) {
            return Err(Error::InvalidPosterior("non-finite entries".into()));
        }
        Ok(post)
    }

    /// Block-diagonal posterior assembled from per-block factors.
    pub fn from_block_factors(mu: DVector<f64>, factors: &[DMatrix<f64>]) -> Result<Self> {
        let blocks: Vec<usize> = factors.iter().map(|f| f.nrows()).collect();
        let m: usize = blocks.iter().sum();
        if mu.len() != m {
            return Err(Error::dim(m, mu.len(), "mean length vs block factors"));
        }
        let mut l = DMatrix::zeros(m, m);
        let mut start = 0;
        for f in factors {
            if !f.is_square() {
                return Err(Error::InvalidPosterior("block factor is not square".into()));
            }
            l.view_mut((start, start), f.shape()).copy_from(f);
            start += f.nrows();
        }
        Self::with_blocks(mu, l, blocks)
    }

    /// `N(mu, c^2 I)` with the requested block structure.
    pub fn isotropic(mu: DVector<f64>, scale: f64, blocks: Vec<usize>) -> Result<Self> {
        let m = mu.len();
        Self::with_blocks(mu, DMatrix::identity(m, m) * scale, blocks)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    /// `(offset, size)` of every diagonal block.
    pub fn block_ranges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.blocks.iter().scan(0usize, |start, &b| {
            let r = (*start, b);
            *start += b;
            Some(r)
        })
    }

    pub fn set_mu(&mut self, mu: DVector<f64>) -> Result<()> {
        if mu.len() != self.dim() {
            return Err(Error::dim(self.dim(), mu.len(), "mean length"));
        }
        self.mu = mu;
        Ok(())
    }

    /// Replace the factor; entries outside the block structure must be zero.
    pub fn set_l(&mut self, l: DMatrix<f64>) -> Result<()> {
        let next = Self::with_blocks(self.mu.clone(), l, self.blocks.clone())?;
        self.l = next.l;
        Ok(())
    }

    /// Replace the factor without re-checking the block pattern; `l` must
    /// come from [`unpack_l`](Self::unpack_l) on this posterior.
    pub(crate) fn set_l_unchecked(&mut self, l: DMatrix<f64>) {
        debug_assert_eq!(l.shape(), self.l.shape());
        self.l = l;
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        &self.l * self.l.transpose()
    }

    /// `ln |det L|` and the sign of `det L`, computed block by block.
    pub fn log_abs_det_l(&self) -> Result<(f64, f64)> {
        let mut total = 0.0;
        let mut sign = 1.0;
        for (start, size) in self.block_ranges() {
            let block = self.l.view((start, start), (size, size)).into_owned();
            let (ld, s) = linalg::log_abs_det(&block).ok_or_else(|| {
                Error::InvalidPosterior(format!("factor block at {start} is singular"))
            })?;
            total += ld;
            sign *= s;
        }
        Ok((total, sign))
    }

    /// `(L^+)^T`, block by block, zero outside the blocks.
    pub fn pinv_l_transpose(&self) -> DMatrix<f64> {
        let m = self.dim();
        let mut out = DMatrix::zeros(m, m);
        for (start, size) in self.block_ranges() {
            let block = self.l.view((start, start), (size, size)).into_owned();
            out.view_mut((start, start), (size, size))
                .copy_from(&linalg::pinv(&block).transpose());
        }
        out
    }

    /// Reparameterised draw `mu + L z`.
    pub fn transform(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut w = self.mu.clone();
        if self.blocks.len() == 1 {
            w.gemv(1.0, &self.l, z, 1.0);
            return w;
        }
        for (start, size) in self.block_ranges() {
            let lb = self.l.view((start, start), (size, size));
            let zb = z.rows(start, size);
            let mut wb = w.rows_mut(start, size);
            wb.gemv(1.0, &lb, &zb, 1.0);
        }
        w
    }

    /// `mu + L z` for every column `z` of `zs`.
    pub fn transform_batch(&self, zs: &DMatrix<f64>) -> DMatrix<f64> {
        let mut w = if self.blocks.len() == 1 {
            &self.l * zs
        } else {
            let mut w = DMatrix::zeros(zs.nrows(), zs.ncols());
            for (start, size) in self.block_ranges() {
                let lb = self.l.view((start, start), (size, size));
                w.rows_mut(start, size).gemm(1.0, &lb, &zs.rows(start, size), 0.0);
            }
            w
        };
        for mut col in w.column_iter_mut() {
            col += &self.mu;
        }
        w
    }

    /// Number of free entries of `L` (the sum of squared block sizes).
    pub fn n_free_l(&self) -> usize {
        self.blocks.iter().map(|b| b * b).sum()
    }

    /// Free entries of `L`, block by block, each block row-major.
    pub fn pack_l(&self) -> DVector<f64> {
        pack_blocks(&self.l, &self.blocks)
    }

    /// Inverse of [`pack_l`](Self::pack_l).
    pub fn unpack_l(&self, packed: &DVector<f64>) -> Result<DMatrix<f64>> {
        if packed.len() != self.n_free_l() {
            return Err(Error::dim(self.n_free_l(), packed.len(), "packed factor length"));
        }
        Ok(unpack_blocks(packed, &self.blocks))
    }

    fn off_block_positions(&self) -> Vec<(usize, usize)> {
        if self.blocks.len() == 1 {
            return Vec::new();
        }
        let m = self.dim();
        let mut owner = vec![0usize; m];
        for (k, (start, size)) in self.block_ranges().enumerate() {
            owner[start..start + size].iter_mut().for_each(|o| *o = k);
        }
        let mut out = Vec::new();
        for r in 0..m {
            for c in 0..m {
                if owner[r] != owner[c] {
                    out.push((r, c));
                }
            }
        }
        out
    }
}

fn validate_blocks(blocks: &[usize], m: usize) -> Result<()> {
    if blocks.iter().any(|&b| b == 0) {
        return Err(Error::Config("block sizes must be positive".into()));
    }
    let total: usize = blocks.iter().sum();
    if total != m {
        return Err(Error::dim(m, total, "sum of block sizes"));
    }
    Ok(())
}

/// Flatten the diagonal blocks of `l` (row-major within each block).
pub fn pack_blocks(l: &DMatrix<f64>, blocks: &[usize]) -> DVector<f64> {
    let n: usize = blocks.iter().map(|b| b * b).sum();
    let mut out = DVector::zeros(n);
    let mut k = 0;
    let mut start = 0;
    for &b in blocks {
        for r in 0..b {
            for c in 0..b {
                out[k] = l[(start + r, start + c)];
                k += 1;
            }
        }
        start += b;
    }
    out
}

pub fn unpack_blocks(packed: &DVector<f64>, blocks: &[usize]) -> DMatrix<f64> {
    let m: usize = blocks.iter().sum();
    let mut l = DMatrix::zeros(m, m);
    let mut k = 0;
    let mut start = 0;
    for &b in blocks {
        for r in 0..b {
            for c in 0..b {
                l[(start + r, start + c)] = packed[k];
                k += 1;
            }
        }
        start += b;
    }
    l
}

/// A fixed set of standard-normal latent draws `z_1..z_S`.
///
/// Generated once from a seed and never redrawn; the finite-sample bound is
/// a deterministic function of the variational parameters given this set.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    draws: Vec<DVector<f64>>,
    /// The same draws as the columns of an `M x S` matrix.
    matrix: DMatrix<f64>,
    seed: u64,
}

impl SampleSet {
    pub fn draw(count: usize, dim: usize, seed: u64) -> Result<Self> {
        if count == 0 {
            return Err(Error::Config("a sample set needs at least one draw".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws = (0..count)
            .map(|_| DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng)))
            .collect();
        Self::from_draws(draws, seed)
    }

    /// Wrap explicit draws (all of the same length).
    pub fn from_draws(draws: Vec<DVector<f64>>, seed: u64) -> Result<Self> {
        let first = draws
            .first()
            .ok_or_else(|| Error::Config("a sample set needs at least one draw".into()))?;
        let m = first.len();
        if let Some(bad) = draws.iter().find(|d| d.len() != m) {
            return Err(Error::dim(m, bad.len(), "sample draw length"));
        }
        let matrix = DMatrix::from_columns(&draws);
        Ok(SampleSet { draws, matrix, seed })
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.draws[0].len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn draws(&self) -> &[DVector<f64>] {
        &self.draws
    }

    /// Draws as the columns of an `M x S` matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn iter(&self) -> std::slice::Iter<'_, DVector<f64>> {
        self.draws.iter()
    }
}

/// Prior precision `alpha` and, for Gaussian-noise likelihoods, noise
/// precision `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparameters {
    pub alpha: f64,
    pub beta: Option<f64>,
}

impl Hyperparameters {
    pub fn new(alpha: f64, beta: Option<f64>) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be positive, got {alpha}")));
        }
        if let Some(b) = beta {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::Config(format!("beta must be positive, got {b}")));
            }
        }
        Ok(Hyperparameters { alpha, beta })
    }

    pub fn alpha(alpha: f64) -> Result<Self> {
        Self::new(alpha, None)
    }
}
