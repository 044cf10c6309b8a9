//! Finite rectangle families.
//!
//! The class constants of the continuum theory take suprema over every
//! parabolic rectangle in space-time.  On a bounded grid the honest finite
//! surrogate is an explicit family: a geometric ladder of scales crossed with
//! a center lattice per scale, clipped so every rectangle's lagged parts stay
//! inside the domain.  All reported constants are therefore certified lower
//! bounds of the continuum ones, and every report records the family spec so
//! results are reproducible and comparable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Grid;
use crate::geometry::{Lag, ParabolicRectangle};

/// Parameters of a deterministic rectangle family.
///
/// Scales form the ladder `L_k = l_min * ratio^k`, `k = 0 .. num_scales`.
/// Centers sit on a lattice with spatial step `stride_x * L` and temporal
/// step `stride_t * (1 - gamma) * L^p` per scale.  Enumeration order is
/// scale-major, then lexicographic in the center coordinates (time fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub p: f64,
    pub gamma: f64,
    pub l_min: f64,
    pub ratio: f64,
    pub num_scales: usize,
    pub stride_x: f64,
    pub stride_t: f64,
}

impl FamilySpec {
    pub fn new(
        p: f64,
        gamma: f64,
        l_min: f64,
        ratio: f64,
        num_scales: usize,
        stride_x: f64,
        stride_t: f64,
    ) -> Result<Self> {
        if !(p >= 1.0) {
            return Err(Error::bad_param(format!("exponent must be >= 1, got {p}")));
        }
        Lag::new(gamma)?;
        if !(l_min > 0.0) {
            return Err(Error::bad_param("l_min must be positive"));
        }
        if !(ratio > 1.0) {
            return Err(Error::bad_param("scale ratio must exceed 1"));
        }
        if num_scales == 0 {
            return Err(Error::bad_param("need at least one scale"));
        }
        if !(stride_x > 0.0 && stride_x <= 1.0) || !(stride_t > 0.0 && stride_t <= 1.0) {
            return Err(Error::bad_param("strides must lie in (0, 1]"));
        }
        Ok(FamilySpec {
            p,
            gamma,
            l_min,
            ratio,
            num_scales,
            stride_x,
            stride_t,
        })
    }

    /// Half-overlap defaults: time lengths double per scale
    /// (`ratio = 2^(1/p)`), strides `1/2`, ladder fitted from the largest
    /// rectangle the domain admits.
    pub fn fitted(grid: &Grid, gamma: f64, num_scales: usize) -> Result<Self> {
        let p = grid.p;
        let ratio = 2f64.powf(1.0 / p);
        let dom = grid.domain();
        let mut l_max = f64::INFINITY;
        for k in 0..grid.n() {
            let (lo, hi) = dom.spatial[k];
            l_max = l_max.min((hi - lo) / 2.0);
        }
        let t_span = dom.time.1 - dom.time.0;
        l_max = l_max.min((t_span / 2.0).powf(1.0 / p));
        // Shave a hair so the top scale survives rounding in L^p.
        l_max *= 1.0 - 1e-12;
        if !(l_max > 0.0) || !l_max.is_finite() {
            return Err(Error::EmptyFamily);
        }
        let l_min = l_max / ratio.powi(num_scales as i32 - 1);
        FamilySpec::new(p, gamma, l_min, ratio, num_scales, 0.5, 0.5)
    }

    pub fn lag(&self) -> Lag {
        Lag::new(self.gamma).expect("validated at construction")
    }

    /// The scale ladder `l_min * ratio^k`.
    pub fn scales(&self) -> Vec<f64> {
        (0..self.num_scales)
            .map(|k| self.l_min * self.ratio.powi(k as i32))
            .collect()
    }

    /// One refinement step: halve both strides and extend the ladder by one
    /// larger scale.  The original lattice is a subset of the refined one
    /// (bit for bit), so family suprema can only grow.
    pub fn refined(&self) -> FamilySpec {
        FamilySpec {
            num_scales: self.num_scales + 1,
            stride_x: self.stride_x * 0.5,
            stride_t: self.stride_t * 0.5,
            ..self.clone()
        }
    }
}

/// An enumerated family of parabolic rectangles over a grid.
#[derive(Debug, Clone)]
pub struct RectangleFamily {
    spec: FamilySpec,
    rects: Vec<ParabolicRectangle>,
}

impl RectangleFamily {
    /// Enumerates every rectangle of the spec whose upper and lower parts
    /// (and hence the full rectangle) lie inside the grid domain.
    pub fn enumerate(grid: &Grid, spec: FamilySpec) -> Result<Self> {
        let dom = grid.domain();
        let lag = spec.lag();
        let mut rects = Vec::new();
        for l in spec.scales() {
            let half_t = l.powf(spec.p);
            // Candidate center positions per axis; the final containment
            // filter below makes the fit decision, the counts only bound the
            // lattice walk.
            let mut axis_centers: Vec<Vec<f64>> = Vec::with_capacity(grid.n());
            let mut fits = true;
            for k in 0..grid.n() {
                let (lo, hi) = dom.spatial[k];
                let step = spec.stride_x * l;
                match lattice(lo, hi, l, step) {
                    Some(c) => axis_centers.push(c),
                    None => {
                        fits = false;
                        break;
                    }
                }
            }
            if !fits {
                continue;
            }
            let step_t = spec.stride_t * (1.0 - spec.gamma) * half_t;
            let t_centers = match lattice(dom.time.0, dom.time.1, half_t, step_t) {
                Some(c) => c,
                None => continue,
            };

            let mut idx = vec![0usize; grid.n()];
            loop {
                let center_x: Vec<f64> = idx.iter().enumerate().map(|(k, &i)| axis_centers[k][i]).collect();
                for &t in &t_centers {
                    let r = ParabolicRectangle::new(center_x.clone(), t, l, spec.p)?;
                    if dom.contains(&r.upper_part(lag)) && dom.contains(&r.lower_part(lag)) {
                        rects.push(r);
                    }
                }
                if !advance(&mut idx, &axis_centers) {
                    break;
                }
            }
        }
        if rects.is_empty() {
            return Err(Error::EmptyFamily);
        }
        Ok(RectangleFamily { spec, rects })
    }

    pub fn spec(&self) -> &FamilySpec {
        &self.spec
    }

    pub fn rects(&self) -> &[ParabolicRectangle] {
        &self.rects
    }

    pub fn len(&self) -> usize {
        self.rects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rects.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ParabolicRectangle> {
        self.rects.iter()
    }

    /// The family reflected about the grid's temporal midpoint, in the same
    /// order.  Used to conjugate the forward and backward maximal operators.
    pub fn time_reflected(&self, grid: &Grid) -> RectangleFamily {
        let t_axis = grid.n();
        let mid = grid.edge(t_axis, 0) + 0.5 * (grid.shape()[t_axis] as f64) * grid.spacing()[t_axis];
        let rects = self.rects.iter().map(|r| r.time_reflected(mid)).collect();
        RectangleFamily {
            spec: self.spec.clone(),
            rects,
        }
    }
}

/// Center positions `lo + half + i * step` for extents `2 * half` fitting in
/// `[lo, hi]`; `None` if not even one fits.
fn lattice(lo: f64, hi: f64, half: f64, step: f64) -> Option<Vec<f64>> {
    let span = hi - lo;
    if span < 2.0 * half {
        return None;
    }
    // Small forward slack so an exactly-fitting extent yields its full count;
    // the containment filter discards any overshoot.
    let count = ((span - 2.0 * half) / step + 1e-9).floor() as usize + 1;
    let first = lo + half;
    Some((0..count).map(|i| first + (i as f64) * step).collect())
}

fn advance(idx: &mut [usize], axis_centers: &[Vec<f64>]) -> bool {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < axis_centers[k].len() {
            return true;
        }
        idx[k] = 0;
    }
    idx.is_empty()
}
