//! Uncentered forward/backward parabolic maximal operators over a finite
//! rectangle family.
//!
//! The backward operator at a point takes the supremum, over every family
//! rectangle whose upper (future) part contains the point, of the average of
//! `|f|` over the rectangle's lower (past) part.  The forward operator swaps
//! the two roles.  "Contains" means the part and the open cell interior
//! overlap with positive volume; boundary contact does not count, since
//! measure-zero contact cannot move a continuum supremum.
//!
//! Cells near the temporal domain boundary may sit in no admissible part at
//! all.  They are flagged as uncovered, never zero-filled: silent zeros would
//! corrupt every ratio statistic built downstream.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::family::RectangleFamily;
use crate::field::{Grid, ScalarField, Transform};
use crate::geometry::Lag;

/// Which operator to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Average the future part, point in the past part (`M^{gamma+}`).
    Forward,
    /// Average the past part, point in the future part (`M^{gamma-}`).
    Backward,
}

/// Per-cell maximal values with the argmax rectangle as a witness.
#[derive(Debug, Clone)]
pub struct MaximalResult {
    grid: Grid,
    values: Vec<f64>,
    witness: Vec<Option<u32>>,
}

impl MaximalResult {
    fn uncovered(grid: Grid) -> Self {
        let n = grid.cell_count();
        MaximalResult {
            grid,
            values: vec![f64::NAN; n],
            witness: vec![None; n],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// The maximal value at a covered cell, `None` otherwise.
    pub fn value(&self, flat: usize) -> Option<f64> {
        self.witness[flat].map(|_| self.values[flat])
    }

    /// Raw per-cell values with NaN marking uncovered cells.
    pub fn values_raw(&self) -> &[f64] {
        &self.values
    }

    /// Index of the witness rectangle in the family, if the cell is covered.
    pub fn witness(&self, flat: usize) -> Option<usize> {
        self.witness[flat].map(|w| w as usize)
    }

    pub fn is_covered(&self, flat: usize) -> bool {
        self.witness[flat].is_some()
    }

    pub fn covered_count(&self) -> usize {
        self.witness.iter().filter(|w| w.is_some()).count()
    }

    pub fn cell_count(&self) -> usize {
        self.values.len()
    }

    /// Maximum over covered cells; `None` if nothing is covered.
    pub fn max_value(&self) -> Option<f64> {
        let mut best = None;
        for i in 0..self.values.len() {
            if let Some(v) = self.value(i) {
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        }
        best
    }

    /// Minimum over covered cells; `None` if nothing is covered.
    pub fn min_value(&self) -> Option<f64> {
        let mut best = None;
        for i in 0..self.values.len() {
            if let Some(v) = self.value(i) {
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
        best
    }

    fn scatter(&mut self, flat: usize, value: f64, rect: u32) {
        match self.witness[flat] {
            Some(_) if value <= self.values[flat] => {}
            _ => {
                self.values[flat] = value;
                self.witness[flat] = Some(rect);
            }
        }
    }

    /// Flips cells along the time axis (values and witnesses alike).
    pub fn time_reversed(&self) -> MaximalResult {
        let mt = *self.grid.shape().last().unwrap();
        let mut values = Vec::with_capacity(self.values.len());
        let mut witness = Vec::with_capacity(self.witness.len());
        for line in self.values.chunks(mt) {
            values.extend(line.iter().rev());
        }
        for line in self.witness.chunks(mt) {
            witness.extend(line.iter().rev());
        }
        MaximalResult {
            grid: self.grid.clone(),
            values,
            witness,
        }
    }

    /// The values as a total field, uncovered cells replaced by the matching
    /// cell of `fill`.
    pub fn to_field_with_fallback(&self, fill: &ScalarField) -> Result<ScalarField> {
        if fill.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let values = (0..self.values.len())
            .map(|i| self.value(i).unwrap_or_else(|| fill.value(i)))
            .collect();
        ScalarField::new(self.grid.clone(), values)
    }
}

/// Backward maximal operator `M^{gamma-} f`: per covered cell, the largest
/// past-part average among family rectangles whose future part meets the
/// cell.
pub fn maximal_backward(f: &ScalarField, lag: Lag, fam: &RectangleFamily) -> Result<MaximalResult> {
    scatter_max(f, lag, fam, Direction::Backward)
}

/// Forward maximal operator `M^{gamma+} f`, realized as the time-reversal
/// conjugate of the backward operator.  The identity
/// `M^{gamma+} f = reverse(M^{gamma-}(reverse f))` (with the family reflected
/// about the temporal midpoint) is the reflection symmetry of the operator
/// definition, and holds here cell by cell, bit for bit, by construction.
pub fn maximal_forward(f: &ScalarField, lag: Lag, fam: &RectangleFamily) -> Result<MaximalResult> {
    let reflected = fam.time_reflected(f.grid());
    let res = scatter_max(&f.time_reversed(), lag, &reflected, Direction::Backward)?;
    Ok(res.time_reversed())
}

/// Fast path: one prefix-table average per rectangle, scattered by max into
/// the cells its containment part overlaps.
fn scatter_max(
    f: &ScalarField,
    lag: Lag,
    fam: &RectangleFamily,
    dir: Direction,
) -> Result<MaximalResult> {
    if fam.is_empty() {
        return Err(Error::EmptyFamily);
    }
    if fam.len() > u32::MAX as usize {
        return Err(Error::bad_param("family too large"));
    }
    let absf = f.map(Transform::Abs)?;
    // Force the prefix build before the parallel map.
    let _ = absf.prefix();
    let averages: Vec<f64> = fam
        .rects()
        .par_iter()
        .map(|r| {
            let avg_part = match dir {
                Direction::Backward => r.lower_part(lag),
                Direction::Forward => r.upper_part(lag),
            };
            absf.box_average(&avg_part)
        })
        .collect::<Result<_>>()?;

    let mut out = MaximalResult::uncovered(f.grid().clone());
    for (i, r) in fam.rects().iter().enumerate() {
        let contain_part = match dir {
            Direction::Backward => r.upper_part(lag),
            Direction::Forward => r.lower_part(lag),
        };
        let value = averages[i];
        f.grid().for_each_overlap(&contain_part, &mut |flat, _vol| {
            out.scatter(flat, value, i as u32);
        });
    }
    Ok(out)
}

/// Reference implementation: a direct per-cell loop over the whole family
/// with plain compensated summation and no prefix tables or pruning.  Same
/// contract as the fast operators; exists so they can be checked against it.
pub fn maximal_oracle(
    f: &ScalarField,
    lag: Lag,
    fam: &RectangleFamily,
    dir: Direction,
) -> Result<MaximalResult> {
    if fam.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let grid = f.grid().clone();
    let axes = grid.axes();

    // Direct averages, one per rectangle, by scanning every overlapped cell.
    let mut averages = Vec::with_capacity(fam.len());
    for r in fam.iter() {
        let part = match dir {
            Direction::Backward => r.lower_part(lag),
            Direction::Forward => r.upper_part(lag),
        };
        let mut terms: Vec<f64> = Vec::new();
        grid.for_each_overlap(&part, &mut |flat, vol| {
            terms.push(f.value(flat).abs() * vol);
        });
        averages.push(pairwise_sum(&terms) / part.volume());
    }

    let mut values = vec![f64::NAN; grid.cell_count()];
    let mut witness: Vec<Option<u32>> = vec![None; grid.cell_count()];
    let mut idx = vec![0usize; axes];
    let mut flat = 0usize;
    loop {
        for (i, r) in fam.iter().enumerate() {
            let part = match dir {
                Direction::Backward => r.upper_part(lag),
                Direction::Forward => r.lower_part(lag),
            };
            // positive-volume overlap of the cell with the part, per axis
            let mut inside = true;
            for (k, &ik) in idx.iter().enumerate().take(axes) {
                let (lo, hi) = part.axis_bounds(k);
                let c_lo = grid.edge(k, ik);
                let c_hi = grid.edge(k, ik + 1);
                if !(hi.min(c_hi) - lo.max(c_lo) > 0.0) {
                    inside = false;
                    break;
                }
            }
            if inside {
                let v = averages[i];
                match witness[flat] {
                    Some(_) if v <= values[flat] => {}
                    _ => {
                        values[flat] = v;
                        witness[flat] = Some(i as u32);
                    }
                }
            }
        }
        flat += 1;
        if !crate::field::increment(&mut idx, grid.shape()) {
            break;
        }
    }
    Ok(MaximalResult {
        grid,
        values,
        witness,
    })
}

/// Total-field variant used by the weight-factory iterations: uncovered
/// cells fall back to the cell's own `|f|` value.  The fallback keeps the
/// operator pointwise sublinear, positively homogeneous and monotone, so the
/// factorization certificates argued on covered cells remain valid; on
/// covered cells it agrees with the flagged operator exactly.
pub(crate) fn maximal_with_fallback(
    f: &ScalarField,
    lag: Lag,
    fam: &RectangleFamily,
    dir: Direction,
) -> Result<ScalarField> {
    let res = match dir {
        Direction::Backward => maximal_backward(f, lag, fam)?,
        Direction::Forward => maximal_forward(f, lag, fam)?,
    };
    let absf = f.map(Transform::Abs)?;
    res.to_field_with_fallback(&absf)
}

fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}
