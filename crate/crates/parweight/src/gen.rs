//! Deterministic test-field generators.  Everything seeded goes through a
//! counter-based ChaCha stream so identical parameters reproduce identical
//! fields byte for byte.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{Grid, ScalarField};

/// Constant field `w = c`.
pub fn constant(grid: Grid, value: f64) -> Result<ScalarField> {
    if !value.is_finite() {
        return Err(Error::bad_param("constant value must be finite"));
    }
    ScalarField::constant(grid, value)
}

/// `w = e^(rate * t)` sampled at cell midpoints.
pub fn exp_time(grid: Grid, rate: f64) -> Result<ScalarField> {
    if !rate.is_finite() {
        return Err(Error::bad_param("rate must be finite"));
    }
    let t_axis = grid.n();
    ScalarField::from_fn(grid, |z| (rate * z[t_axis]).exp())
}

/// `w = (1 + t - t_min)^rate` sampled at cell midpoints; positive on the
/// whole domain for any real `rate`.
pub fn power_time(grid: Grid, rate: f64) -> Result<ScalarField> {
    if !rate.is_finite() {
        return Err(Error::bad_param("rate must be finite"));
    }
    let t_axis = grid.n();
    let t_min = grid.origin()[t_axis];
    ScalarField::from_fn(grid, |z| (1.0 + (z[t_axis] - t_min)).powf(rate))
}

/// Positive field nondecreasing in time along every spatial column:
/// per-column cumulative sums of `step`-scaled half-normal increments.
pub fn monotone_random(grid: Grid, seed: u64, step: f64) -> Result<ScalarField> {
    if !(step > 0.0) {
        return Err(Error::bad_param("step must be positive"));
    }
    let mt = *grid.shape().last().unwrap();
    let columns = grid.cell_count() / mt;
    let mut values = Vec::with_capacity(grid.cell_count());
    for col in 0..columns {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (col as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let mut level = 0.5 + rng.gen_range(0.0..1.0);
        for _ in 0..mt {
            level += step * rng.gen_range(0.0..1.0);
            values.push(level);
        }
    }
    ScalarField::new(grid, values)
}

/// Two-valued field alternating with the parity of the cell index sum.
pub fn checkerboard(grid: Grid, lo: f64, hi: f64) -> Result<ScalarField> {
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::bad_param("checkerboard levels must be finite"));
    }
    let shape = grid.shape().to_vec();
    let mut values = Vec::with_capacity(grid.cell_count());
    let mut idx = vec![0usize; shape.len()];
    loop {
        let parity: usize = idx.iter().sum::<usize>() % 2;
        values.push(if parity == 0 { lo } else { hi });
        if !crate::field::increment(&mut idx, &shape) {
            break;
        }
    }
    ScalarField::new(grid, values)
}

/// Background field with `count` seeded spike cells of the given amplitude.
pub fn spike(grid: Grid, amplitude: f64, background: f64, count: usize, seed: u64) -> Result<ScalarField> {
    if !(amplitude.is_finite() && background.is_finite()) || background < 0.0 {
        return Err(Error::bad_param("spike needs finite amplitude and background >= 0"));
    }
    if count == 0 || count > grid.cell_count() {
        return Err(Error::bad_param("spike count must be in 1..=cells"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![background; grid.cell_count()];
    let mut placed = 0usize;
    while placed < count {
        let at = rng.gen_range(0..values.len());
        if values[at] != amplitude {
            values[at] = amplitude;
            placed += 1;
        }
    }
    ScalarField::new(grid, values)
}

/// Log-normal field `exp(mu + sigma * N(0,1))`, strictly positive.
pub fn log_normal(grid: Grid, mu: f64, sigma: f64, seed: u64) -> Result<ScalarField> {
    if !(sigma >= 0.0) || !mu.is_finite() {
        return Err(Error::bad_param("log-normal needs finite mu and sigma >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.cell_count();
    let values = (0..n)
        .map(|_| {
            // Box-Muller from two uniform draws.
            let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            (mu + sigma * z).exp()
        })
        .collect();
    ScalarField::new(grid, values)
}
