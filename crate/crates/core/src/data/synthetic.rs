use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{build_lag_features, DataError, Dataset, RawSeries};
use crate::dispatch::ResourceFleet;
use crate::linalg::least_squares;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub days: usize,
    pub slots_per_day: usize,
    /// Multiplier on the stochastic components; 0 gives a purely periodic
    /// series.
    pub noise_scale: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self { seed: 7, days: 300, slots_per_day: 24, noise_scale: 1.0 }
    }
}

const WIND_PERSISTENCE: f64 = 0.95;
const MARGIN: f64 = 0.05;

/// Net demand = daily profile - wind + noise, in kW scaled to the fleet's DA
/// capacity. The wind term is an AR(1) process over consecutive slots, the
/// noise is Gaussian, and both get larger through the day. If any
/// realization, or any least-squares lag forecast, comes within 5% of the DA
/// capacity of the feasible box, the stochastic part is shrunk by 20% and
/// the same draws are reused.
pub fn generate_series(spec: &SyntheticSpec, fleet: &ResourceFleet) -> Result<RawSeries, DataError> {
    if spec.days < 10 {
        return Err(DataError::InsufficientHistory { needed: 10, found: spec.days });
    }
    if spec.slots_per_day == 0 || !(spec.noise_scale >= 0.0 && spec.noise_scale.is_finite()) {
        return Err(DataError::Invalid("slots_per_day must be positive and noise_scale nonnegative".into()));
    }
    let cap = fleet.total_da();
    let t_max = spec.slots_per_day;
    let n = spec.days * t_max;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut wind = Vec::with_capacity(n);
    let mut w = 0.0;
    let innovation = (1.0 - WIND_PERSISTENCE * WIND_PERSISTENCE).sqrt();
    for _ in 0..n {
        let e: f64 = StandardNormal.sample(&mut rng);
        w = WIND_PERSISTENCE * w + innovation * e;
        wind.push(w);
    }
    let noise: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();

    let profile: Vec<f64> = (0..t_max)
        .map(|t| {
            let phase = std::f64::consts::TAU * t as f64 / t_max as f64;
            cap * (0.5 - 0.18 * phase.cos() + 0.04 * (2.0 * phase).sin())
        })
        .collect();

    let mut amplitude = spec.noise_scale;
    for _ in 0..60 {
        let y: Vec<Vec<f64>> = (0..spec.days)
            .map(|d| {
                (0..t_max)
                    .map(|t| {
                        let k = d * t_max + t;
                        let spread = 0.75 + 0.5 * t as f64 / t_max as f64;
                        profile[t] - amplitude * spread * cap * (0.07 * wind[k] - 0.025 * noise[k])
                    })
                    .collect()
            })
            .collect();
        let series = RawSeries::new(y)?;
        if within_margin(&series, fleet)? {
            return Ok(series);
        }
        amplitude *= 0.8;
    }
    Err(DataError::Invalid("could not fit the synthetic series inside the feasible box".into()))
}

pub fn generate_synthetic(spec: &SyntheticSpec, fleet: &ResourceFleet) -> Result<Dataset, DataError> {
    build_lag_features(&generate_series(spec, fleet)?)
}

fn within_margin(series: &RawSeries, fleet: &ResourceFleet) -> Result<bool, DataError> {
    let cap = fleet.total_da();
    let m = MARGIN * cap;
    if series.y.iter().flatten().any(|&y| y < m || y > cap - m) {
        return Ok(false);
    }
    let data = build_lag_features(series)?;
    let (w, _) = least_squares(&data.contexts(), &data.targets());
    Ok(data.samples.iter().all(|s| {
        let y_hat = w[0] + s.features.iter().zip(&w[1..]).map(|(a, b)| a * b).sum::<f64>();
        match fleet.forecast_range(s.y) {
            Some((lo, hi)) => y_hat >= lo + m && y_hat <= hi - m,
            None => false,
        }
    }))
}
