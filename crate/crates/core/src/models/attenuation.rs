//! A synthetic point-source spectral model with per-source stress
//! parameters, geometric spreading, anelastic attenuation and near-surface
//! attenuation. It serves as a nonlinear, flat-prior regression test bed.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::Regressor;
use crate::error::{Error, Result};

/// Number of sources in the stand-in setup.
pub const SOURCES: usize = 8;
/// Parameter count: one log stress parameter per source, then spreading
/// exponent, log quality factor and kappa.
pub const ATTENUATION_PARAMS: usize = SOURCES + 3;

const SHEAR_VELOCITY: f64 = 3.5; // km/s
const BRUNE_CONSTANT: f64 = 4.906e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttenuationRecord {
    pub source: usize,
    pub magnitude: f64,
    /// Hypocentral distance in km.
    pub distance: f64,
    /// Frequency in Hz.
    pub frequency: f64,
}

impl AttenuationRecord {
    fn log_moment(&self) -> f64 {
        // dyne-cm
        (1.5 * self.magnitude + 16.05) * std::f64::consts::LN_10
    }

    /// `(f / f_c)^2` for a log stress parameter.
    fn corner_ratio_sq(&self, log_stress: f64) -> f64 {
        let ln_fc = (BRUNE_CONSTANT * SHEAR_VELOCITY).ln() + (log_stress - self.log_moment()) / 3.0;
        (2.0 * (self.frequency.ln() - ln_fc)).exp()
    }

    /// Log Fourier acceleration amplitude, up to an additive constant.
    pub fn log_amplitude(&self, w: &DVector<f64>) -> f64 {
        let (eta, log_q, kappa) = (w[SOURCES], w[SOURCES + 1], w[SOURCES + 2]);
        let f = self.frequency;
        let u = self.corner_ratio_sq(w[self.source]);
        (self.log_moment() - 50.0) + 2.0 * (2.0 * PI * f).ln() - u.ln_1p() - eta * self.distance.ln()
            - PI * f * self.distance * (-log_q).exp() / SHEAR_VELOCITY
            - PI * kappa * f
    }
}

/// Per-record quantities that do not depend on the parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
struct RecordTerms {
    source: usize,
    /// Moment and frequency terms of the log amplitude.
    offset: f64,
    /// `ln f - ln f_c` at zero log stress.
    corner: f64,
    ln_distance: f64,
    /// Anelastic attenuation at `Q = 1`.
    path: f64,
    pi_f: f64,
}

impl RecordTerms {
    fn new(r: &AttenuationRecord) -> Self {
        let f = r.frequency;
        RecordTerms {
            source: r.source,
            offset: (r.log_moment() - 50.0) + 2.0 * (2.0 * PI * f).ln(),
            corner: f.ln() - (BRUNE_CONSTANT * SHEAR_VELOCITY).ln() + r.log_moment() / 3.0,
            ln_distance: r.distance.ln(),
            path: PI * f * r.distance / SHEAR_VELOCITY,
            pi_f: PI * f,
        }
    }

    /// `(f / f_c)^2`.
    fn corner_ratio_sq(&self, log_stress: f64) -> f64 {
        (2.0 * (self.corner - log_stress / 3.0)).exp()
    }

    /// Log amplitude given `exp(-ln Q)`.
    fn log_amplitude(&self, w: &[f64], inv_q: f64) -> f64 {
        let u = self.corner_ratio_sq(w[self.source]);
        self.offset - u.ln_1p() - w[SOURCES] * self.ln_distance - self.path * inv_q - w[SOURCES + 2] * self.pi_f
    }

    fn gradient_into(&self, w: &[f64], inv_q: f64, scale: f64, out: &mut [f64]) {
        let u = self.corner_ratio_sq(w[self.source]);
        out[self.source] += scale * (2.0 / 3.0) * u / (1.0 + u);
        out[SOURCES] -= scale * self.ln_distance;
        out[SOURCES + 1] += scale * self.path * inv_q;
        out[SOURCES + 2] -= scale * self.pi_f;
    }
}

/// Records plus observed log amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct AttenuationModel {
    records: Vec<AttenuationRecord>,
    terms: Vec<RecordTerms>,
    targets: DVector<f64>,
}

impl AttenuationModel {
    pub fn new(records: Vec<AttenuationRecord>, targets: DVector<f64>) -> Result<Self> {
        if records.len() != targets.len() {
            return Err(Error::dim(records.len(), targets.len(), "targets vs records"));
        }
        if let Some(r) = records.iter().find(|r| r.source >= SOURCES) {
            return Err(Error::Config(format!("source index {} out of range", r.source)));
        }
        Ok(Self::from_parts(records, targets))
    }

    fn from_parts(records: Vec<AttenuationRecord>, targets: DVector<f64>) -> Self {
        let terms = records.iter().map(RecordTerms::new).collect();
        AttenuationModel { records, terms, targets }
    }

    /// Parameters used to simulate data: stress 20..200 bar, spreading 1,
    /// Q = 250, kappa = 0.03.
    pub fn reference_params() -> DVector<f64> {
        let mut w = DVector::zeros(ATTENUATION_PARAMS);
        for e in 0..SOURCES {
            let stress = 20.0 * 10f64.powf(e as f64 / (SOURCES - 1) as f64);
            w[e] = stress.ln();
        }
        w[SOURCES] = 1.0;
        w[SOURCES + 1] = 250f64.ln();
        w[SOURCES + 2] = 0.03;
        w
    }

    /// `n` random records with Gaussian noise of standard deviation
    /// `noise_sd` on the log amplitude. Each source has a fixed magnitude.
    pub fn simulate(n: usize, params: &DVector<f64>, noise_sd: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, noise_sd).map_err(|e| Error::Config(e.to_string()))?;
        let magnitudes: Vec<f64> = (0..SOURCES).map(|e| 4.5 + 2.0 * e as f64 / (SOURCES - 1) as f64).collect();
        let records: Vec<AttenuationRecord> = (0..n)
            .map(|_| {
                let source = rng.random_range(0..SOURCES);
                AttenuationRecord {
                    source,
                    magnitude: magnitudes[source],
                    distance: rng.random_range(10f64.ln()..150f64.ln()).exp(),
                    frequency: rng.random_range(0.3f64.ln()..25f64.ln()).exp(),
                }
            })
            .collect();
        let targets = DVector::from_iterator(
            n,
            records.iter().map(|r| r.log_amplitude(params) + noise.sample(&mut rng)),
        );
        Self::new(records, targets)
    }

    pub fn records(&self) -> &[AttenuationRecord] {
        &self.records
    }

    /// Subset of records (and targets) by index.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self::from_parts(
            idx.iter().map(|&i| self.records[i]).collect(),
            DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.targets[i])),
        )
    }

    fn predict_into(&self, w: &[f64], out: &mut [f64]) {
        let inv_q = (-w[SOURCES + 1]).exp();
        for (o, t) in out.iter_mut().zip(&self.terms) {
            *o = t.log_amplitude(w, inv_q);
        }
    }

    fn vjp_into(&self, w: &[f64], r: &[f64], out: &mut [f64]) {
        let inv_q = (-w[SOURCES + 1]).exp();
        for (t, &ri) in self.terms.iter().zip(r) {
            t.gradient_into(w, inv_q, ri, out);
        }
    }
}

impl Regressor for AttenuationModel {
    fn dim(&self) -> usize {
        ATTENUATION_PARAMS
    }

    fn targets(&self) -> &DVector<f64> {
        &self.targets
    }

    fn predict(&self, w: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.terms.len());
        self.predict_into(w.as_slice(), out.as_mut_slice());
        out
    }

    fn vjp(&self, w: &DVector<f64>, r: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(ATTENUATION_PARAMS);
        self.vjp_into(w.as_slice(), r.as_slice(), out.as_mut_slice());
        out
    }

    fn predict_batch(&self, ws: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.terms.len(), ws.ncols());
        for (w, mut o) in ws.column_iter().zip(out.column_iter_mut()) {
            self.predict_into(w.as_slice(), o.as_mut_slice());
        }
        out
    }

    fn vjp_batch(&self, ws: &DMatrix<f64>, rs: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(ATTENUATION_PARAMS, ws.ncols());
        for ((w, r), mut o) in ws.column_iter().zip(rs.column_iter()).zip(out.column_iter_mut()) {
            self.vjp_into(w.as_slice(), r.as_slice(), o.as_mut_slice());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobian_matches_central_differences() {
        let model = AttenuationModel::simulate(30, &AttenuationModel::reference_params(), 0.3, 4).unwrap();
        let w = AttenuationModel::reference_params();
        let r = DVector::from_fn(30, |i, _| (i as f64 * 0.37).sin());
        let g = model.vjp(&w, &r);
        for k in 0..ATTENUATION_PARAMS {
            let h = 1e-6 * (1.0 + w[k].abs());
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[k] += h;
            wm[k] -= h;
            let fd = (model.predict(&wp) - model.predict(&wm)).dot(&r) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-6 * (1.0 + g[k].abs()), "param {k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn precomputed_terms_match_the_record_formula() {
        let model = AttenuationModel::simulate(25, &AttenuationModel::reference_params(), 0.3, 2).unwrap();
        let mut w = AttenuationModel::reference_params();
        w[3] += 0.4;
        w[SOURCES + 1] -= 0.2;
        let pred = model.predict(&w);
        for (p, rec) in pred.iter().zip(model.records()) {
            assert!((p - rec.log_amplitude(&w)).abs() < 1e-12);
        }
    }

    #[test]
    fn corner_frequency_is_plausible() {
        let rec = AttenuationRecord {
            source: 0,
            magnitude: 5.0,
            distance: 20.0,
            frequency: 1.0,
        };
        // f_c for 50 bar at Mw 5 is a little below 1 Hz
        let u = rec.corner_ratio_sq(50f64.ln());
        assert!(u > 1.0 && u < 2.0, "{u}");
    }
}
