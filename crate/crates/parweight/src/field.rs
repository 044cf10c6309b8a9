//! Piecewise-constant scalar fields on a space-time grid.
//!
//! The field model is deliberately simple: one value per cell, constant on
//! the cell.  Every integral, essential infimum and level-set measure is then
//! exact up to floating-point rounding, which lets property tests assert
//! algebraic identities at tight tolerances instead of discretization-error
//! bounds.
//!
//! Boxes handed to the integral operations must lie inside the grid domain;
//! there is no extension or padding mode.  Restricting every rectangle to the
//! domain keeps each reported constant a certified lower bound of the
//! continuum constant rather than a boundary artifact.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::geometry::SpaceTimeBox;

/// Relative slack (per axis, in units of the axis extent) tolerated when a
/// box is checked against the domain.  Composed geometry such as reflected
/// rectangles can protrude by a few ulps; anything inside this slack is
/// clamped, anything beyond is an error.
const DOMAIN_SLACK: f64 = 1e-12;

/// Uniform axis-aligned grid on an `(n+1)`-dimensional space-time box.
///
/// Axes are ordered `x_1, .., x_n, t`; cell values are stored row-major with
/// the time axis last (time index varies fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    shape: Vec<usize>,
    spacing: Vec<f64>,
    origin: Vec<f64>,
    /// Scaling exponent attached to the grid for rectangle-family generation.
    pub p: f64,
}

impl Grid {
    pub fn new(shape: Vec<usize>, spacing: Vec<f64>, origin: Vec<f64>, p: f64) -> Result<Self> {
        if shape.len() < 2 {
            return Err(Error::bad_param(
                "grid needs at least one spatial axis plus the time axis",
            ));
        }
        if shape.len() != spacing.len() || shape.len() != origin.len() {
            return Err(Error::bad_param("shape, spacing and origin lengths differ"));
        }
        if shape.contains(&0) {
            return Err(Error::bad_param("every axis needs at least one cell"));
        }
        if spacing.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
            return Err(Error::bad_param("spacings must be positive and finite"));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::bad_param("origin must be finite"));
        }
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::bad_param(format!("exponent must be >= 1, got {p}")));
        }
        Ok(Grid {
            shape,
            spacing,
            origin,
            p,
        })
    }

    /// Number of spatial dimensions.
    pub fn n(&self) -> usize {
        self.shape.len() - 1
    }

    /// Total number of axes (`n + 1`).
    pub fn axes(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn cell_count(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Edge coordinate `i` of `axis` (`i` ranges over `0..=shape[axis]`).
    #[inline]
    pub fn edge(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + (i as f64) * self.spacing[axis]
    }

    /// Midpoint coordinates of the cell with the given multi-index.
    pub fn cell_midpoint(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .enumerate()
            .map(|(k, &i)| self.origin[k] + (i as f64 + 0.5) * self.spacing[k])
            .collect()
    }

    /// The full domain as a space-time box.
    pub fn domain(&self) -> SpaceTimeBox {
        let spatial = (0..self.n())
            .map(|k| (self.edge(k, 0), self.edge(k, self.shape[k])))
            .collect();
        let t = self.n();
        SpaceTimeBox {
            spatial,
            time: (self.edge(t, 0), self.edge(t, self.shape[t])),
        }
    }

    /// Row-major strides, time axis last (stride 1).
    pub fn strides(&self) -> Vec<usize> {
        let a = self.axes();
        let mut s = vec![1usize; a];
        for k in (0..a - 1).rev() {
            s[k] = s[k + 1] * self.shape[k + 1];
        }
        s
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let strides = self.strides();
        idx.iter().zip(&strides).map(|(&i, &s)| i * s).sum()
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let strides = self.strides();
        strides
            .iter()
            .map(|&s| {
                let i = flat / s;
                flat %= s;
                i
            })
            .collect()
    }

    /// Checks that `b` lies inside the domain (up to `DOMAIN_SLACK` per axis)
    /// and matches the grid's spatial dimension.
    pub fn validate_box(&self, b: &SpaceTimeBox) -> Result<()> {
        if b.spatial_dim() != self.n() {
            return Err(Error::GridMismatch);
        }
        for axis in 0..self.axes() {
            let (lo, hi) = b.axis_bounds(axis);
            let dom_lo = self.edge(axis, 0);
            let dom_hi = self.edge(axis, self.shape[axis]);
            let tol = DOMAIN_SLACK * (dom_hi - dom_lo);
            if lo < dom_lo - tol || hi > dom_hi + tol {
                return Err(Error::BoxOutsideDomain {
                    axis,
                    lo,
                    hi,
                    dom_lo,
                    dom_hi,
                });
            }
        }
        Ok(())
    }

    /// Index of the cell whose half-open interval `[edge(i), edge(i+1))`
    /// holds `y`, clamped to the axis.
    #[inline]
    fn cell_of(&self, axis: usize, y: f64) -> usize {
        let m = self.shape[axis] as isize;
        let mut i = ((y - self.origin[axis]) / self.spacing[axis]).floor() as isize;
        i = i.clamp(0, m - 1);
        while i > 0 && y < self.edge(axis, i as usize) {
            i -= 1;
        }
        while i + 1 < m && y >= self.edge(axis, i as usize + 1) {
            i += 1;
        }
        i as usize
    }

    /// Index of the last cell with positive overlap against an interval
    /// ending at `y` (i.e. the cell with `edge(i) < y <= edge(i+1)`).
    #[inline]
    fn last_cell_of(&self, axis: usize, y: f64) -> usize {
        let m = self.shape[axis] as isize;
        let mut i = ((y - self.origin[axis]) / self.spacing[axis]).ceil() as isize - 1;
        i = i.clamp(0, m - 1);
        while i > 0 && y <= self.edge(axis, i as usize) {
            i -= 1;
        }
        while i + 1 < m && y > self.edge(axis, i as usize + 1) {
            i += 1;
        }
        i as usize
    }

    /// Calls `f(flat_index, overlap_volume)` for every cell whose overlap
    /// with `b` has positive volume.
    pub(crate) fn for_each_overlap(&self, b: &SpaceTimeBox, f: &mut dyn FnMut(usize, f64)) {
        let axes = self.axes();
        let strides = self.strides();
        let mut ranges = Vec::with_capacity(axes);
        for axis in 0..axes {
            let (lo, hi) = b.axis_bounds(axis);
            let m = self.shape[axis] as isize;
            // One cell of margin each side: the exact overlap test below is
            // the decision, division rounding must not pre-filter it.
            let i0 = (((lo - self.origin[axis]) / self.spacing[axis]).floor() as isize - 1)
                .clamp(0, m - 1);
            let i1 = (((hi - self.origin[axis]) / self.spacing[axis]).ceil() as isize + 1)
                .clamp(0, m - 1);
            ranges.push((i0 as usize, i1 as usize));
        }
        self.overlap_rec(b, &ranges, &strides, 0, 0, 1.0, f);
    }

    #[allow(clippy::too_many_arguments)]
    fn overlap_rec(
        &self,
        b: &SpaceTimeBox,
        ranges: &[(usize, usize)],
        strides: &[usize],
        axis: usize,
        base: usize,
        vol: f64,
        f: &mut dyn FnMut(usize, f64),
    ) {
        if axis == self.axes() {
            f(base, vol);
            return;
        }
        let (lo, hi) = b.axis_bounds(axis);
        for i in ranges[axis].0..=ranges[axis].1 {
            let ov = hi.min(self.edge(axis, i + 1)) - lo.max(self.edge(axis, i));
            if ov > 0.0 {
                self.overlap_rec(b, ranges, strides, axis + 1, base + i * strides[axis], vol * ov, f);
            }
        }
    }
}

/// A scalar field constant on each grid cell.
#[derive(Debug, Serialize, Deserialize)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
    #[serde(skip)]
    prefix: OnceLock<PrefixTable>,
}

impl Clone for ScalarField {
    fn clone(&self) -> Self {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.clone(),
            prefix: OnceLock::new(),
        }
    }
}

impl PartialEq for ScalarField {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.values == other.values
    }
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::bad_param(format!(
                "expected {} cell values, got {}",
                grid.cell_count(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::bad_param(format!("non-finite cell value {v}")));
        }
        Ok(ScalarField {
            grid,
            values,
            prefix: OnceLock::new(),
        })
    }

    /// Builds a field by sampling `f` at cell midpoints.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.cell_count());
        let mut idx = vec![0usize; grid.axes()];
        loop {
            values.push(f(&grid.cell_midpoint(&idx)));
            if !increment(&mut idx, grid.shape()) {
                break;
            }
        }
        ScalarField::new(grid, values)
    }

    pub fn constant(grid: Grid, c: f64) -> Result<Self> {
        let n = grid.cell_count();
        ScalarField::new(grid, vec![c; n])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, flat: usize) -> f64 {
        self.values[flat]
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Errors with the offending cell if any value is not strictly positive.
    pub fn ensure_positive(&self) -> Result<()> {
        match self.values.iter().position(|&v| !(v > 0.0)) {
            Some(index) => Err(Error::NonpositiveWeight {
                index,
                value: self.values[index],
            }),
            None => Ok(()),
        }
    }

    /// Replaces every value below `eps` by `eps`.
    pub fn clamped_min(&self, eps: f64) -> ScalarField {
        let values = self.values.iter().map(|&v| v.max(eps)).collect();
        ScalarField {
            grid: self.grid.clone(),
            values,
            prefix: OnceLock::new(),
        }
    }

    /// The lazily built prefix table of this field.
    pub fn prefix(&self) -> &PrefixTable {
        self.prefix.get_or_init(|| PrefixTable::build(self))
    }

    /// Exact integral of the field over `b` (see [`PrefixTable::box_integral`]).
    pub fn box_integral(&self, b: &SpaceTimeBox) -> Result<f64> {
        self.grid.validate_box(b)?;
        Ok(self.prefix().box_integral_unchecked(&self.grid, b))
    }

    /// Integral average over `b`.
    pub fn box_average(&self, b: &SpaceTimeBox) -> Result<f64> {
        Ok(self.box_integral(b)? / b.volume())
    }

    /// Essential infimum over `b`: the minimum over cells whose overlap with
    /// `b` has positive volume.  Boundary-touching cells do not count.
    pub fn box_min(&self, b: &SpaceTimeBox) -> Result<f64> {
        self.grid.validate_box(b)?;
        let mut m = f64::INFINITY;
        self.grid.for_each_overlap(b, &mut |flat, _vol| {
            if self.values[flat] < m {
                m = self.values[flat];
            }
        });
        if m.is_infinite() {
            return Err(Error::DegenerateBox);
        }
        Ok(m)
    }

    /// Applies a pointwise transform, producing a field on the same grid.
    pub fn map(&self, t: Transform) -> Result<ScalarField> {
        let mut values = Vec::with_capacity(self.values.len());
        for (index, &v) in self.values.iter().enumerate() {
            let out = t.apply(v).ok_or(Error::NonpositiveWeight { index, value: v })?;
            values.push(out);
        }
        ScalarField::new(self.grid.clone(), values)
    }

    /// Pointwise maximum of two fields on the same grid.
    pub fn zip_max(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_with(other, f64::max)
    }

    /// Pointwise minimum of two fields on the same grid.
    pub fn zip_min(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_with(other, f64::min)
    }

    fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        ScalarField::new(self.grid.clone(), values)
    }

    /// Pointwise sum on the same grid.
    pub fn zip_add(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_with(other, |a, b| a + b)
    }

    /// Pointwise product on the same grid.
    pub fn zip_mul(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_with(other, |a, b| a * b)
    }

    /// Flips the cell ordering along the time axis.  The grid is unchanged;
    /// applying the reversal twice is the identity, bit for bit.
    pub fn time_reversed(&self) -> ScalarField {
        let mt = *self.grid.shape().last().unwrap();
        let mut values = Vec::with_capacity(self.values.len());
        for line in self.values.chunks(mt) {
            values.extend(line.iter().rev());
        }
        ScalarField {
            grid: self.grid.clone(),
            values,
            prefix: OnceLock::new(),
        }
    }
}

/// Pointwise transforms accepted by [`ScalarField::map`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    Identity,
    /// `v -> v^e`.  Rejected on values `<= 0` unless `e` is a nonnegative
    /// integer; `e = -1` is computed as a plain reciprocal.
    Power(f64),
    /// `v -> c * v`.
    Scale(f64),
    /// Negative part below a level: `v -> max(c - v, 0)`, i.e. `(v - c)^-`.
    NegPartBelow(f64),
    Abs,
}

impl Transform {
    fn apply(self, v: f64) -> Option<f64> {
        match self {
            Transform::Identity => Some(v),
            Transform::Power(e) => {
                if e == 1.0 {
                    Some(v)
                } else if v > 0.0 {
                    if e == -1.0 {
                        Some(1.0 / v)
                    } else {
                        Some(v.powf(e))
                    }
                } else if v == 0.0 && e > 0.0 {
                    Some(0.0)
                } else if e >= 0.0 && e.fract() == 0.0 {
                    Some(v.powi(e as i32))
                } else {
                    None
                }
            }
            Transform::Scale(c) => Some(c * v),
            Transform::NegPartBelow(c) => Some((c - v).max(0.0)),
            Transform::Abs => Some(v.abs()),
        }
    }
}

/// Cumulative sums of cell integrals (`value * cell volume`) with one layer
/// of zero padding, stored in compensated double-double precision.
///
/// Whole-cell box sums come out of `2^(n+1)`-corner inclusion-exclusion.  A
/// box with fractional boundaries splits per axis into at most three
/// segments (left partial cell, interior whole cells, right partial cell);
/// each segment combination is a whole-cell block sum scaled by the covered
/// width fractions of its partial axes, so boundary contributions stay
/// accurate relative to their own size instead of the domain total.
#[derive(Debug)]
pub struct PrefixTable {
    padded: Vec<usize>,
    entries: Vec<Dd>,
}

/// One per-axis segment of a box decomposition: an inclusive cell range and
/// the covered width fraction (1 for interior segments).
#[derive(Clone, Copy)]
struct Segment {
    start: usize,
    end: usize,
    weight: f64,
}

impl PrefixTable {
    pub fn build(field: &ScalarField) -> PrefixTable {
        let grid = field.grid();
        let axes = grid.axes();
        let padded: Vec<usize> = grid.shape().iter().map(|&m| m + 1).collect();
        let mut pstrides = vec![1usize; axes];
        for k in (0..axes - 1).rev() {
            pstrides[k] = pstrides[k + 1] * padded[k + 1];
        }
        let total: usize = padded.iter().product();
        let mut entries = vec![Dd::ZERO; total];

        // Seed interior entries (offset by one along every axis) with the
        // exact cell integrals.
        let vol = grid.cell_volume();
        let mut idx = vec![0usize; axes];
        let mut flat = 0usize;
        loop {
            let pflat: usize = idx
                .iter()
                .zip(&pstrides)
                .map(|(&i, &s)| (i + 1) * s)
                .sum();
            entries[pflat] = Dd::from_product(field.values()[flat], vol);
            flat += 1;
            if !increment(&mut idx, grid.shape()) {
                break;
            }
        }

        // Cumulative sum along each axis in turn.
        for axis in 0..axes {
            let stride = pstrides[axis];
            let m = padded[axis];
            // Iterate over all lines along `axis`.
            let line_count = total / m;
            for line in 0..line_count {
                // Decompose `line` into the coordinates of the other axes.
                let mut rem = line;
                let mut base = 0usize;
                for k in 0..axes {
                    if k == axis {
                        continue;
                    }
                    let extent = padded[k];
                    let coord = rem % extent;
                    rem /= extent;
                    base += coord * pstrides[k];
                }
                let mut acc = Dd::ZERO;
                for i in 0..m {
                    let e = base + i * stride;
                    acc = acc.add(entries[e]);
                    entries[e] = acc;
                }
            }
        }

        PrefixTable { padded, entries }
    }

    fn pstrides(&self) -> Vec<usize> {
        let axes = self.padded.len();
        let mut s = vec![1usize; axes];
        for k in (0..axes - 1).rev() {
            s[k] = s[k + 1] * self.padded[k + 1];
        }
        s
    }

    /// Whole-cell block sum over the inclusive cell ranges `seg[k].start ..=
    /// seg[k].end`, by corner inclusion-exclusion on the padded table.
    fn block_sum(&self, segs: &[Segment], pstrides: &[usize]) -> Dd {
        let axes = self.padded.len();
        let mut acc = Dd::ZERO;
        for mask in 0..(1usize << axes) {
            let mut sign_neg = false;
            let mut off = 0usize;
            for k in 0..axes {
                if mask & (1 << k) != 0 {
                    off += (segs[k].end + 1) * pstrides[k];
                } else {
                    off += segs[k].start * pstrides[k];
                    sign_neg = !sign_neg;
                }
            }
            acc = if sign_neg {
                acc.sub(self.entries[off])
            } else {
                acc.add(self.entries[off])
            };
        }
        acc
    }

    /// Integral of the field over `b`; the caller has validated `b` against
    /// the grid.
    pub(crate) fn box_integral_unchecked(&self, grid: &Grid, b: &SpaceTimeBox) -> f64 {
        let axes = grid.axes();
        let pstrides = self.pstrides();

        // Per axis: up to three segments (left partial, interior, right
        // partial) with their covered-width fractions.
        let mut axis_segs: Vec<Vec<Segment>> = Vec::with_capacity(axes);
        for k in 0..axes {
            let (lo, hi) = b.axis_bounds(k);
            let h = grid.spacing()[k];
            let i0 = grid.cell_of(k, lo);
            let i1 = grid.last_cell_of(k, hi);
            let mut segs = Vec::with_capacity(3);
            if i0 >= i1 {
                segs.push(Segment {
                    start: i0,
                    end: i0,
                    weight: (hi - lo) / h,
                });
            } else {
                segs.push(Segment {
                    start: i0,
                    end: i0,
                    weight: (grid.edge(k, i0 + 1) - lo) / h,
                });
                if i1 > i0 + 1 {
                    segs.push(Segment {
                        start: i0 + 1,
                        end: i1 - 1,
                        weight: 1.0,
                    });
                }
                segs.push(Segment {
                    start: i1,
                    end: i1,
                    weight: (hi - grid.edge(k, i1)) / h,
                });
            }
            axis_segs.push(segs);
        }

        // Sum over all segment combinations.
        let mut acc = Dd::ZERO;
        let mut pick = vec![0usize; axes];
        let mut segs = vec![
            Segment {
                start: 0,
                end: 0,
                weight: 0.0
            };
            axes
        ];
        'combos: loop {
            let mut weight = 1.0f64;
            for k in 0..axes {
                segs[k] = axis_segs[k][pick[k]];
                weight *= segs[k].weight;
            }
            if weight != 0.0 {
                acc = acc.add(self.block_sum(&segs, &pstrides).mul_f64(weight));
            }
            for k in (0..axes).rev() {
                pick[k] += 1;
                if pick[k] < axis_segs[k].len() {
                    continue 'combos;
                }
                pick[k] = 0;
                if k == 0 {
                    break 'combos;
                }
            }
        }
        acc.to_f64()
    }
}

/// Level-set predicate evaluated against cell values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevelPred {
    /// `v < lambda`
    Below(f64),
    /// `v >= lambda`
    AtLeast(f64),
    /// `v > lambda`
    Above(f64),
    /// `v < beta * scale`
    BelowScaled { beta: f64, scale: f64 },
}

impl LevelPred {
    pub fn holds(&self, v: f64) -> bool {
        match *self {
            LevelPred::Below(l) => v < l,
            LevelPred::AtLeast(l) => v >= l,
            LevelPred::Above(l) => v > l,
            LevelPred::BelowScaled { beta, scale } => v < beta * scale,
        }
    }

    fn threshold_finite(&self) -> bool {
        match *self {
            LevelPred::Below(l) | LevelPred::AtLeast(l) | LevelPred::Above(l) => l.is_finite(),
            LevelPred::BelowScaled { beta, scale } => (beta * scale).is_finite(),
        }
    }
}

/// A level-set query: a box and a predicate on cell values.
#[derive(Debug, Clone)]
pub struct LevelQuery {
    pub region: SpaceTimeBox,
    pub pred: LevelPred,
}

impl LevelQuery {
    pub fn new(region: SpaceTimeBox, pred: LevelPred) -> Result<Self> {
        if !pred.threshold_finite() {
            return Err(Error::bad_param("level threshold must be finite"));
        }
        Ok(LevelQuery { region, pred })
    }
}

/// Lebesgue measure of `{ cells of f satisfying the predicate }` intersected
/// with the query box, exact via per-cell overlap volumes.
pub fn level_measure(f: &ScalarField, q: &LevelQuery) -> Result<f64> {
    f.grid().validate_box(&q.region)?;
    let mut acc = Dd::ZERO;
    f.grid().for_each_overlap(&q.region, &mut |flat, vol| {
        if q.pred.holds(f.value(flat)) {
            acc = acc.add(Dd::from_f64(vol));
        }
    });
    Ok(acc.to_f64())
}

/// `w`-measure of the same set: integral of `w` over the portion of the box
/// whose cells (of `pred_field`) satisfy the predicate.
pub fn weighted_level_measure(
    w: &ScalarField,
    pred_field: &ScalarField,
    q: &LevelQuery,
) -> Result<f64> {
    if w.grid() != pred_field.grid() {
        return Err(Error::GridMismatch);
    }
    w.grid().validate_box(&q.region)?;
    let mut acc = Dd::ZERO;
    w.grid().for_each_overlap(&q.region, &mut |flat, vol| {
        if q.pred.holds(pred_field.value(flat)) {
            acc = acc.add(Dd::from_product(w.value(flat), vol));
        }
    });
    Ok(acc.to_f64())
}

/// Advances a row-major multi-index; returns `false` after the last cell.
pub(crate) fn increment(idx: &mut [usize], shape: &[usize]) -> bool {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < shape[k] {
            return true;
        }
        idx[k] = 0;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SpaceTimeBox;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid1(nx: usize, nt: usize) -> Grid {
        Grid::new(vec![nx, nt], vec![1.0, 1.0], vec![0.0, 0.0], 2.0).unwrap()
    }

    /// Independent oracle: direct per-cell overlap scan with pairwise
    /// summation, no prefix table.
    fn direct_integral(f: &ScalarField, b: &SpaceTimeBox) -> f64 {
        let grid = f.grid();
        let axes = grid.axes();
        let mut terms = Vec::new();
        let mut idx = vec![0usize; axes];
        loop {
            let mut vol = 1.0;
            for k in 0..axes {
                let (lo, hi) = b.axis_bounds(k);
                let ov = hi.min(grid.edge(k, idx[k] + 1)) - lo.max(grid.edge(k, idx[k]));
                vol *= ov.max(0.0);
            }
            if vol > 0.0 {
                terms.push(f.value(grid.flat_index(&idx)) * vol);
            }
            if !increment(&mut idx, grid.shape()) {
                break;
            }
        }
        pairwise_sum(&terms)
    }

    fn pairwise_sum(v: &[f64]) -> f64 {
        match v.len() {
            0 => 0.0,
            1 => v[0],
            n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
        }
    }

    #[test]
    fn constant_field_integral() {
        let f = ScalarField::constant(grid1(4, 4), 3.0).unwrap();
        let b = SpaceTimeBox::new(vec![(0.5, 2.5)], (1.0, 3.5)).unwrap();
        let v = b.volume();
        assert!((f.box_integral(&b).unwrap() - 3.0 * v).abs() < 1e-12);
        assert!((f.box_average(&b).unwrap() - 3.0).abs() < 1e-13);
    }

    #[test]
    fn half_and_half_cells() {
        // Two unit cells (values 1 and 5) along x, one time cell; the box
        // covers the right half of the first and the left half of the second.
        let g = grid1(2, 1);
        let f = ScalarField::new(g, vec![1.0, 5.0]).unwrap();
        let b = SpaceTimeBox::new(vec![(0.5, 1.5)], (0.0, 1.0)).unwrap();
        let expect = 1.0 * 0.5 + 5.0 * 0.5;
        assert!((f.box_integral(&b).unwrap() - expect).abs() < 1e-14);
        assert!((f.box_average(&b).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn full_domain_is_total_sum() {
        let g = grid1(3, 5);
        let vals: Vec<f64> = (0..15).map(|i| (i as f64) * 0.25 + 0.5).collect();
        let total: f64 = vals.iter().sum();
        let f = ScalarField::new(g.clone(), vals).unwrap();
        let d = g.domain();
        assert!((f.box_integral(&d).unwrap() - total).abs() < 1e-12);
    }

    #[test]
    fn box_outside_domain_rejected() {
        let f = ScalarField::constant(grid1(4, 4), 1.0).unwrap();
        let b = SpaceTimeBox::new(vec![(-0.5, 2.0)], (0.0, 1.0)).unwrap();
        assert!(matches!(
            f.box_integral(&b),
            Err(Error::BoxOutsideDomain { .. })
        ));
    }

    #[test]
    fn box_min_ignores_touching_cells() {
        let g = grid1(2, 1);
        let f = ScalarField::new(g, vec![1.0, 5.0]).unwrap();
        // Positive overlap with both cells.
        let b = SpaceTimeBox::new(vec![(0.5, 1.5)], (0.0, 1.0)).unwrap();
        assert_eq!(f.box_min(&b).unwrap(), 1.0);
        // Only touches cell 0 on its right face: excluded.
        let b = SpaceTimeBox::new(vec![(1.0, 2.0)], (0.0, 1.0)).unwrap();
        assert_eq!(f.box_min(&b).unwrap(), 5.0);
    }

    #[test]
    fn level_measure_matches_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = grid1(6, 7);
        let vals: Vec<f64> = (0..42).map(|_| rng.gen_range(0.1..4.0)).collect();
        let f = ScalarField::new(g.clone(), vals.clone()).unwrap();
        let b = SpaceTimeBox::new(vec![(0.3, 5.2)], (1.1, 6.9)).unwrap();
        for lambda in [0.5, 1.0, 2.0, 3.9] {
            let q = LevelQuery::new(b.clone(), LevelPred::Below(lambda)).unwrap();
            let got = level_measure(&f, &q).unwrap();
            // cell-scan oracle
            let mut expect = 0.0;
            g.for_each_overlap(&b, &mut |flat, vol| {
                if vals[flat] < lambda {
                    expect += vol;
                }
            });
            assert!((got - expect).abs() <= 1e-12 * (1.0 + expect));
        }
    }

    #[test]
    fn level_partition_is_exact() {
        let g = grid1(5, 4);
        let vals: Vec<f64> = (0..20).map(|i| (i % 7) as f64 * 0.5 + 0.25).collect();
        let f = ScalarField::new(g, vals).unwrap();
        let b = SpaceTimeBox::new(vec![(0.25, 4.75)], (0.5, 3.5)).unwrap();
        let lambda = 1.5;
        let below = level_measure(&f, &LevelQuery::new(b.clone(), LevelPred::Below(lambda)).unwrap()).unwrap();
        let at_least =
            level_measure(&f, &LevelQuery::new(b.clone(), LevelPred::AtLeast(lambda)).unwrap()).unwrap();
        // Same summation path with an always-true predicate (values > 0).
        let all = level_measure(&f, &LevelQuery::new(b.clone(), LevelPred::AtLeast(0.0)).unwrap()).unwrap();
        assert_eq!(below + at_least, all);
        assert!((all - b.volume()).abs() <= 1e-12 * b.volume());
    }

    #[test]
    fn weighted_level_measure_reduces_to_level_measure() {
        let g = grid1(4, 4);
        let w = ScalarField::constant(g.clone(), 1.0).unwrap();
        let vals: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let f = ScalarField::new(g.clone(), vals).unwrap();
        let b = g.domain();
        let q = LevelQuery::new(b, LevelPred::Below(8.0)).unwrap();
        let a = weighted_level_measure(&w, &f, &q).unwrap();
        let b2 = level_measure(&f, &q).unwrap();
        assert!((a - b2).abs() < 1e-12);
    }

    #[test]
    fn weighted_level_measure_matches_cell_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let g = grid1(6, 7);
        let w_vals: Vec<f64> = (0..42).map(|_| rng.gen_range(0.2..3.0)).collect();
        let f_vals: Vec<f64> = (0..42).map(|_| rng.gen_range(0.0..5.0)).collect();
        let w = ScalarField::new(g.clone(), w_vals.clone()).unwrap();
        let f = ScalarField::new(g.clone(), f_vals.clone()).unwrap();
        let b = SpaceTimeBox::new(vec![(0.4, 5.6)], (0.9, 6.3)).unwrap();
        for lambda in [1.0, 2.5, 4.0] {
            let q = LevelQuery::new(b.clone(), LevelPred::Above(lambda)).unwrap();
            let got = weighted_level_measure(&w, &f, &q).unwrap();
            let mut expect = 0.0;
            g.for_each_overlap(&b, &mut |flat, vol| {
                if f_vals[flat] > lambda {
                    expect += w_vals[flat] * vol;
                }
            });
            assert!((got - expect).abs() <= 1e-12 * (1.0 + expect));
        }
    }

    #[test]
    fn transforms() {
        let g = grid1(2, 2);
        let f = ScalarField::new(g, vec![1.0, 2.0, 4.0, 5.0]).unwrap();
        assert_eq!(f.map(Transform::Identity).unwrap(), f);
        let r = f.map(Transform::NegPartBelow(2.0)).unwrap();
        assert_eq!(r.values(), &[1.0, 0.0, 0.0, 0.0]);
        // (w - 2)^- of w = 5 is 0
        let c5 = ScalarField::constant(grid1(2, 2), 5.0).unwrap();
        assert_eq!(
            c5.map(Transform::NegPartBelow(2.0)).unwrap().values(),
            &[0.0; 4]
        );
        // fractional power of a nonpositive value is rejected
        let neg = ScalarField::new(grid1(2, 1), vec![1.0, -1.0]).unwrap();
        assert!(matches!(
            neg.map(Transform::Power(0.5)),
            Err(Error::NonpositiveWeight { index: 1, .. })
        ));
    }

    #[test]
    fn time_reversal_is_involutive() {
        let g = grid1(3, 4);
        let vals: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let f = ScalarField::new(g, vals).unwrap();
        let rev = f.time_reversed();
        assert_ne!(f, rev);
        assert_eq!(f, rev.time_reversed());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn prefix_matches_direct_oracle(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = if seed % 2 == 0 { 1 } else { 2 };
            let mut shape: Vec<usize> = (0..n).map(|_| rng.gen_range(2..12)).collect();
            shape.push(rng.gen_range(2..16));
            let spacing: Vec<f64> = (0..=n).map(|_| rng.gen_range(0.3..1.7)).collect();
            let origin: Vec<f64> = (0..=n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let g = Grid::new(shape.clone(), spacing, origin, 2.0).unwrap();
            let vals: Vec<f64> = (0..g.cell_count()).map(|_| rng.gen_range(0.0..10.0)).collect();
            let f = ScalarField::new(g.clone(), vals).unwrap();
            let d = g.domain();
            for _ in 0..8 {
                let mut spatial = Vec::new();
                for k in 0..n {
                    let (lo, hi) = d.axis_bounds(k);
                    let a = rng.gen_range(lo..hi);
                    let b = rng.gen_range(a..hi);
                    spatial.push((a, (bistable(a, b, hi))));
                }
                let (tlo, thi) = d.time;
                let a = rng.gen_range(tlo..thi);
                let b = rng.gen_range(a..thi);
                let bx = match SpaceTimeBox::new(spatial, (a, bistable(a, b, thi))) {
                    Ok(b) => b,
                    Err(_) => continue,
                };
                let fast = f.box_integral(&bx).unwrap();
                let slow = direct_integral(&f, &bx);
                let scale = slow.abs().max(1e-9);
                prop_assert!((fast - slow).abs() <= 1e-12 * scale,
                    "fast {} vs direct {}", fast, slow);
            }
        }

        #[test]
        fn integral_additive_over_time_split(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            let g = grid1(5, 8);
            let vals: Vec<f64> = (0..40).map(|_| rng.gen_range(0.0..5.0)).collect();
            let f = ScalarField::new(g, vals).unwrap();
            let b = SpaceTimeBox::new(vec![(0.7, 4.3)], (0.5, 7.5)).unwrap();
            let mid = rng.gen_range(0.6..7.4);
            let left = SpaceTimeBox::new(vec![(0.7, 4.3)], (0.5, mid)).unwrap();
            let right = SpaceTimeBox::new(vec![(0.7, 4.3)], (mid, 7.5)).unwrap();
            let whole = f.box_integral(&b).unwrap();
            let parts = f.box_integral(&left).unwrap() + f.box_integral(&right).unwrap();
            prop_assert!((whole - parts).abs() <= 1e-12 * whole.abs().max(1.0));
        }

        #[test]
        fn average_between_min_and_max(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x77);
            let g = grid1(6, 6);
            let vals: Vec<f64> = (0..36).map(|_| rng.gen_range(0.5..9.0)).collect();
            let f = ScalarField::new(g.clone(), vals.clone()).unwrap();
            let b = SpaceTimeBox::new(vec![(0.21, 5.7)], (1.3, 5.9)).unwrap();
            let avg = f.box_average(&b).unwrap();
            let lo = f.box_min(&b).unwrap();
            let mut hi = f64::NEG_INFINITY;
            g.for_each_overlap(&b, &mut |flat, _| hi = hi.max(vals[flat]));
            prop_assert!(avg >= lo - 1e-12 && avg <= hi + 1e-12);
        }
    }

    /// Keep generated box bounds strictly increasing; collapses to the upper
    /// domain bound if rounding made them equal.
    fn bistable(a: f64, b: f64, hi: f64) -> f64 {
        if b > a {
            b
        } else {
            hi
        }
    }
}
