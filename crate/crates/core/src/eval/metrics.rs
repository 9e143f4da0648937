use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax_lowest(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Fraction of rows of `probabilities` (observations by classes) whose
/// argmax equals the label.
pub fn accuracy(probabilities: &DMatrix<f64>, labels: &[usize]) -> Result<f64> {
    if probabilities.nrows() != labels.len() {
        return Err(Error::LengthMismatch {
            left: probabilities.nrows(),
            right: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::InsufficientData("no labels to score".into()));
    }
    let correct = probabilities
        .row_iter()
        .zip(labels)
        .filter(|(row, &y)| argmax_lowest(row.iter().cloned()) == y)
        .count();
    Ok(correct as f64 / labels.len() as f64)
}

/// Mean squared error.
pub fn mse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: targets.len(),
        });
    }
    if targets.is_empty() {
        return Err(Error::InsufficientData("no targets to score".into()));
    }
    let sum: f64 = predictions.iter().zip(targets).map(|(p, t)| (p - t).powi(2)).sum();
    Ok(sum / targets.len() as f64)
}

/// `|original - reconstructed|^2 / |original|^2`.
pub fn reconstruction_error(original: &[f64], reconstructed: &[f64]) -> Result<f64> {
    if original.len() != reconstructed.len() {
        return Err(Error::LengthMismatch {
            left: original.len(),
            right: reconstructed.len(),
        });
    }
    let norm: f64 = original.iter().map(|x| x * x).sum();
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let diff: f64 = original.iter().zip(reconstructed).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(diff / norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let p = DMatrix::from_row_slice(3, 2, &[0.9, 0.1, 0.2, 0.8, 0.6, 0.4]);
        assert_eq!(accuracy(&p, &[0, 1, 0]).unwrap(), 1.0);
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(reconstruction_error(&[1.0, -2.0], &[1.0, -2.0]).unwrap(), 0.0);
    }

    #[test]
    fn zero_reconstruction_has_unit_error() {
        assert_eq!(reconstruction_error(&[3.0, 4.0], &[0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn ties_break_to_lowest_index() {
        assert_eq!(argmax_lowest([0.5, 0.5]), 0);
        assert_eq!(argmax_lowest([0.2, 0.4, 0.4]), 1);
    }

    #[test]
    fn errors() {
        assert!(matches!(mse(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(reconstruction_error(&[0.0], &[1.0]), Err(Error::ZeroNorm)));
    }
}
