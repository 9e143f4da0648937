use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Mass each density must place on the grid.
const MIN_COVERAGE: f64 = 1.0 - 1e-6;

/// Rectangular lattice with trapezoidal weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    lower: [f64; 2],
    upper: [f64; 2],
    resolution: [usize; 2],
    xs: Vec<f64>,
    ys: Vec<f64>,
    wx: Vec<f64>,
    wy: Vec<f64>,
}

fn axis(lo: f64, hi: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let h = (hi - lo) / (n - 1) as f64;
    let nodes = (0..n).map(|i| lo + h * i as f64).collect();
    let weights = (0..n)
        .map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h })
        .collect();
    (nodes, weights)
}

impl Grid2D {
    pub const MIN_RESOLUTION: usize = 64;

    pub fn new(lower: [f64; 2], upper: [f64; 2], resolution: [usize; 2]) -> Result<Self> {
        for k in 0..2 {
            if resolution[k] < Self::MIN_RESOLUTION {
                return Err(Error::Config(format!(
                    "grid resolution {} below {}",
                    resolution[k],
                    Self::MIN_RESOLUTION
                )));
            }
            if !(upper[k] > lower[k]) || !lower[k].is_finite() || !upper[k].is_finite() {
                return Err(Error::Config(format!("bad grid bounds [{}, {}]", lower[k], upper[k])));
            }
        }
        let (xs, wx) = axis(lower[0], upper[0], resolution[0]);
        let (ys, wy) = axis(lower[1], upper[1], resolution[1]);
        Ok(Grid2D {
            lower,
            upper,
            resolution,
            xs,
            ys,
            wx,
            wy,
        })
    }

    /// Square grid `[-half, half]^2`.
    pub fn square(half: f64, resolution: usize) -> Result<Self> {
        Self::new([-half, -half], [half, half], [resolution, resolution])
    }

    /// `[-8, 8]^2` at 256 nodes per axis.
    pub fn standard() -> Self {
        Self::square(8.0, 256).expect("valid constants")
    }

    pub fn lower(&self) -> [f64; 2] {
        self.lower
    }

    pub fn upper(&self) -> [f64; 2] {
        self.upper
    }

    pub fn resolution(&self) -> [usize; 2] {
        self.resolution
    }

    pub fn area(&self) -> f64 {
        (self.upper[0] - self.lower[0]) * (self.upper[1] - self.lower[1])
    }

    /// `(x, y, weight)` for every node.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.xs.iter().zip(&self.wx).flat_map(move |(&x, &wx)| {
            self.ys.iter().zip(&self.wy).map(move |(&y, &wy)| (x, y, wx * wy))
        })
    }

    /// Quadrature of `exp(log_density)`.
    pub fn mass<F: Fn(f64, f64) -> f64>(&self, log_density: F) -> f64 {
        self.nodes().map(|(x, y, w)| w * log_density(x, y).exp()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `KL(p || q) = int p ln(p / q)`.
    PToQ,
    /// `KL(q || p) = int q ln(q / p)`.
    QToP,
}

/// KL divergence between two normalised 2-D densities by trapezoidal
/// quadrature. Both are renormalised on the grid before integrating; each
/// must have at least `1 - 1e-6` of its mass on the grid.
pub fn kld_numerical_2d<P, Q>(log_p: P, log_q: Q, grid: &Grid2D, direction: Direction) -> Result<f64>
where
    P: Fn(f64, f64) -> f64,
    Q: Fn(f64, f64) -> f64,
{
    let nodes: Vec<(f64, f64, f64)> = grid.nodes().map(|(x, y, w)| (w, log_p(x, y), log_q(x, y))).collect();
    let mass_p: f64 = nodes.iter().map(|(w, lp, _)| w * lp.exp()).sum();
    let mass_q: f64 = nodes.iter().map(|(w, _, lq)| w * lq.exp()).sum();
    if !(mass_p >= MIN_COVERAGE) || !(mass_q >= MIN_COVERAGE) || !mass_p.is_finite() || !mass_q.is_finite() {
        return Err(Error::Coverage { mass_p, mass_q });
    }
    let (ln_zp, ln_zq) = (mass_p.ln(), mass_q.ln());
    let mut total = 0.0;
    for &(w, lp, lq) in &nodes {
        let (la, lb) = match direction {
            Direction::PToQ => (lp - ln_zp, lq - ln_zq),
            Direction::QToP => (lq - ln_zq, lp - ln_zp),
        };
        let a = la.exp();
        if a == 0.0 {
            continue;
        }
        total += w * a * (la - lb);
    }
    Ok(total)
}

/// Closed-form `KL(N(m0, S0) || N(m1, S1))`.
pub fn gaussian_kld(m0: &DVector<f64>, s0: &DMatrix<f64>, m1: &DVector<f64>, s1: &DMatrix<f64>) -> Result<f64> {
    let k = m0.len() as f64;
    let c0 = Cholesky::new(s0.clone()).ok_or_else(|| Error::InvalidPosterior("S0 not positive definite".into()))?;
    let c1 = Cholesky::new(s1.clone()).ok_or_else(|| Error::InvalidPosterior("S1 not positive definite".into()))?;
    let ld0: f64 = 2.0 * c0.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    let ld1: f64 = 2.0 * c1.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    let trace = c1.solve(s0).trace();
    let d = m1 - m0;
    let quad = d.dot(&c1.solve(&d));
    Ok(0.5 * (trace + quad - k + ld1 - ld0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn std_normal(x: f64, y: f64) -> f64 {
        -(2.0 * PI).ln() - 0.5 * (x * x + y * y)
    }

    #[test]
    fn weights_sum_to_area() {
        let g = Grid2D::new([-1.0, 2.0], [3.0, 2.5], [64, 100]).unwrap();
        let total: f64 = g.nodes().map(|(_, _, w)| w).sum();
        assert!((total - g.area()).abs() < 1e-9);
    }

    #[test]
    fn identical_densities_have_zero_divergence() {
        let g = Grid2D::standard();
        for dir in [Direction::PToQ, Direction::QToP] {
            assert!(kld_numerical_2d(std_normal, std_normal, &g, dir).unwrap().abs() < 1e-8);
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        assert!(matches!(Grid2D::square(8.0, 32), Err(Error::Config(_))));
    }

    #[test]
    fn narrow_domain_fails_coverage() {
        let g = Grid2D::square(2.0, 64).unwrap();
        assert!(matches!(
            kld_numerical_2d(std_normal, std_normal, &g, Direction::PToQ),
            Err(Error::Coverage { .. })
        ));
    }

    #[test]
    fn closed_form_gaussian_kld_basic() {
        let i = DMatrix::identity(2, 2);
        let m = DVector::from_vec(vec![1.0, 0.0]);
        let v = gaussian_kld(&DVector::zeros(2), &i, &m, &i).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }
}
