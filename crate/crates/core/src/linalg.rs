use nalgebra::{DMatrix, DVector};

/// Per-column affine map to zero mean and unit variance. Constant columns
/// keep scale 1 so they map to zero instead of dividing by zero.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let p = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; p];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; p];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let scale = var
            .into_iter()
            .zip(&mean)
            .map(|(v, m)| {
                let sd = v.sqrt();
                if sd > 1e-12 * (1.0 + m.abs()) {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect()
    }

    /// Convert weights on standardized features (intercept first) into
    /// weights on raw features (intercept first).
    pub fn unscale_weights(&self, w_std: &[f64]) -> Vec<f64> {
        let mut raw = vec![0.0; w_std.len()];
        let mut intercept = w_std[0];
        for j in 0..self.mean.len() {
            raw[j + 1] = w_std[j + 1] / self.scale[j];
            intercept -= raw[j + 1] * self.mean[j];
        }
        raw[0] = intercept;
        raw
    }
}

/// Least squares with an intercept column prepended. Falls back to a tiny
/// ridge term when the normal equations are singular. Returns the weights
/// and whether the ridge was needed.
pub(crate) fn least_squares(rows: &[Vec<f64>], target: &[f64]) -> (Vec<f64>, bool) {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len) + 1;
    let x = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { rows[i][j - 1] });
    let y = DVector::from_column_slice(target);
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * y;
    if let Some(chol) = xtx.clone().cholesky() {
        let w = chol.solve(&xty);
        if w.iter().all(|v| v.is_finite()) {
            return (w.iter().copied().collect(), false);
        }
    }
    let lambda = 1e-8 * xtx.trace() / p as f64;
    let ridged = xtx + DMatrix::identity(p, p) * lambda.max(1e-12);
    let w = match ridged.clone().cholesky() {
        Some(c) => c.solve(&xty),
        None => ridged.lu().solve(&xty).unwrap_or_else(|| DVector::zeros(p)),
    };
    (w.iter().copied().collect(), true)
}
