//! Class constants and duality.
//!
//! A positive field `w` has the one-sided constant
//!
//! ```text
//!     sup_R  (avg_{R-} w) * (avg_{R+} w^{1/(1-q)})^(q-1)
//! ```
//!
//! over a rectangle family, with the past part `R-` and the lagged future
//! part `R+`.  The `minus` variants run with the time roles swapped, which is
//! the same as reversing the time axis.  For `q = 1` the dual average is
//! replaced by the essential infimum over the future part.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::RectangleFamily;
use crate::field::{ScalarField, Transform};
use crate::geometry::{Lag, ParabolicRectangle, SpaceTimeBox};
use crate::maximal::maximal_backward;
use crate::report::{CheckReport, ConstantReport, FamilySummary, Witness};
use crate::weights::FP_SLACK;

/// An exponent together with its conjugate `q' = q / (q - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub q: f64,
    pub q_prime: f64,
}

impl Exponents {
    pub fn conjugate(q: f64) -> Result<Self> {
        if !(q > 1.0) || !q.is_finite() {
            return Err(Error::ExponentRange {
                msg: format!("conjugate exponent needs q > 1, got {q}"),
            });
        }
        Ok(Exponents {
            q,
            q_prime: q / (q - 1.0),
        })
    }

    /// Exponent of the dual weight, `1 / (1 - q) = 1 - q'`.
    pub fn dual_power(&self) -> f64 {
        1.0 / (1.0 - self.q)
    }
}

/// The dual weight `w^{1/(1-q)}`.  Membership dualizes: `w` lies in the
/// forward class with exponent `q` exactly when the dual weight lies in the
/// backward class with exponent `q'`.
pub fn dual_weight(w: &ScalarField, q: f64) -> Result<ScalarField> {
    let e = Exponents::conjugate(q)?;
    w.ensure_positive()?;
    w.map(Transform::Power(e.dual_power()))
}

/// Evaluates dual-weight averages either through a prefix table, or by a
/// direct scan when some dual value overflowed to infinity.  The direct path
/// never subtracts, so infinities propagate to an infinite average instead of
/// producing NaN; an infinite family constant is reported, not an error.
enum SigmaAvg<'a> {
    Prefix(ScalarField),
    Direct { w: &'a ScalarField, values: Vec<f64> },
}

impl<'a> SigmaAvg<'a> {
    fn build(w: &'a ScalarField, dual_power: f64) -> Result<Self> {
        let mut values = Vec::with_capacity(w.values().len());
        for (index, &v) in w.values().iter().enumerate() {
            if !(v > 0.0) {
                return Err(Error::NonpositiveWeight { index, value: v });
            }
            values.push(v.powf(dual_power));
        }
        if values.iter().all(|v| v.is_finite()) {
            Ok(SigmaAvg::Prefix(ScalarField::new(w.grid().clone(), values)?))
        } else {
            Ok(SigmaAvg::Direct { w, values })
        }
    }

    fn average(&self, b: &SpaceTimeBox) -> Result<f64> {
        match self {
            SigmaAvg::Prefix(f) => f.box_average(b),
            SigmaAvg::Direct { w, values } => {
                w.grid().validate_box(b)?;
                let mut sum = 0.0f64;
                w.grid().for_each_overlap(b, &mut |flat, vol| {
                    sum += values[flat] * vol;
                });
                Ok(sum / b.volume())
            }
        }
    }
}

fn argmax_report(fam: &RectangleFamily, values: &[f64]) -> ConstantReport {
    let mut best = 0usize;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    ConstantReport {
        value: values[best],
        witness: Witness::new(best, &fam.rects()[best]),
        family: FamilySummary::new(fam),
    }
}

/// Per-rectangle forward functional values
/// `(avg_{R-} w) * (avg_{R+} w^{1/(1-q)})^(q-1)`.
pub fn aq_plus_per_rectangle(
    w: &ScalarField,
    q: f64,
    lag: Lag,
    fam: &RectangleFamily,
) -> Result<Vec<f64>> {
    aq_per_rectangle(w, q, lag, fam, false)
}

/// Per-rectangle backward functional values (time roles swapped).
pub fn aq_minus_per_rectangle(
    w: &ScalarField,
    q: f64,
    lag: Lag,
    fam: &RectangleFamily,
) -> Result<Vec<f64>> {
    aq_per_rectangle(w, q, lag, fam, true)
}

fn aq_per_rectangle(
    w: &ScalarField,
    q: f64,
    lag: Lag,
    fam: &RectangleFamily,
    reversed: bool,
) -> Result<Vec<f64>> {
    let e = Exponents::conjugate(q)?;
    if fam.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let sigma = SigmaAvg::build(w, e.dual_power())?;
    let _ = w.prefix();
    fam.rects()
        .par_iter()
        .map(|r| {
            let (past, future) = parts(r, lag, reversed);
            let a = w.box_average(&past)?;
            let b = sigma.average(&future)?;
            Ok(a * b.powf(q - 1.0))
        })
        .collect()
}

fn parts(r: &ParabolicRectangle, lag: Lag, reversed: bool) -> (SpaceTimeBox, SpaceTimeBox) {
    if reversed {
        (r.upper_part(lag), r.lower_part(lag))
    } else {
        (r.lower_part(lag), r.upper_part(lag))
    }
}

/// Forward Muckenhoupt constant over the family, with the attaining
/// rectangle as witness.
pub fn aq_plus_constant(
    w: &ScalarField,
    q: f64,
    lag: Lag,
    fam: &RectangleFamily,
) -> Result<ConstantReport> {
    Ok(argmax_report(fam, &aq_plus_per_rectangle(w, q, lag, fam)?))
}

/// Backward Muckenhoupt constant (time axis reversed).
pub fn aq_minus_constant(
    w: &ScalarField,
    q: f64,
    lag: Lag,
    fam: &RectangleFamily,
) -> Result<ConstantReport> {
    Ok(argmax_report(fam, &aq_minus_per_rectangle(w, q, lag, fam)?))
}

fn a1_per_rectangle(
    w: &ScalarField,
    lag: Lag,
    fam: &RectangleFamily,
    reversed: bool,
) -> Result<Vec<f64>> {
    if fam.is_empty() {
        return Err(Error::EmptyFamily);
    }
    w.ensure_positive()?;
    let _ = w.prefix();
    fam.rects()
        .par_iter()
        .map(|r| {
            let (past, future) = parts(r, lag, reversed);
            let a = w.box_average(&past)?;
            let m = w.box_min(&future)?;
            Ok(a / m)
        })
        .collect()
}

/// Forward `A_1` constant: `sup_R (avg_{R-} w) / (essinf_{R+} w)`.
pub fn a1_plus_constant(w: &ScalarField, lag: Lag, fam: &RectangleFamily) -> Result<ConstantReport> {
    Ok(argmax_report(fam, &a1_per_rectangle(w, lag, fam, false)?))
}

/// Backward `A_1` constant (time roles swapped).
pub fn a1_minus_constant(w: &ScalarField, lag: Lag, fam: &RectangleFamily) -> Result<ConstantReport> {
    Ok(argmax_report(fam, &a1_per_rectangle(w, lag, fam, true)?))
}

/// `A_1` constant through the maximal characterization: the largest ratio
/// `M^{gamma-} w / w` over covered cells.  Never exceeds [`a1_plus_constant`]
/// on the same family; the witness is the argmax cell's rectangle.
pub fn a1_via_maximal(w: &ScalarField, lag: Lag, fam: &RectangleFamily) -> Result<ConstantReport> {
    w.ensure_positive()?;
    let m = maximal_backward(w, lag, fam)?;
    let mut best: Option<(f64, usize)> = None;
    for i in 0..m.cell_count() {
        if let Some(v) = m.value(i) {
            let ratio = v / w.value(i);
            if best.map_or(true, |(b, _)| ratio > b) {
                best = Some((ratio, i));
            }
        }
    }
    let (value, cell) = best.ok_or(Error::UncoveredGrid)?;
    let rect_index = m.witness(cell).expect("covered cell has a witness");
    Ok(ConstantReport {
        value,
        witness: Witness::new(rect_index, &fam.rects()[rect_index]),
        family: FamilySummary::new(fam),
    })
}

/// Closure of the class under pointwise maximum and minimum: per rectangle,
/// the functional of `max(w, v)` (and of `min(w, v)`) is at most the sum of
/// the functionals of `w` and `v`.  The sum bound is per-rectangle algebra,
/// so it is asserted rectangle by rectangle, not through family suprema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClosureReport {
    pub max_part: CheckReport,
    pub min_part: CheckReport,
}

/// Checks the closure bounds for exponent `q >= 1` (`q = 1` uses the
/// essential-infimum functional).
pub fn closure_check(
    w: &ScalarField,
    v: &ScalarField,
    q: f64,
    lag: Lag,
    fam: &RectangleFamily,
) -> Result<ClosureReport> {
    if w.grid() != v.grid() {
        return Err(Error::GridMismatch);
    }
    let wv_max = w.zip_max(v)?;
    let wv_min = w.zip_min(v)?;
    let (fw, fv, fmax, fmin) = if q == 1.0 {
        (
            a1_per_rectangle(w, lag, fam, false)?,
            a1_per_rectangle(v, lag, fam, false)?,
            a1_per_rectangle(&wv_max, lag, fam, false)?,
            a1_per_rectangle(&wv_min, lag, fam, false)?,
        )
    } else {
        (
            aq_plus_per_rectangle(w, q, lag, fam)?,
            aq_plus_per_rectangle(v, q, lag, fam)?,
            aq_plus_per_rectangle(&wv_max, q, lag, fam)?,
            aq_plus_per_rectangle(&wv_min, q, lag, fam)?,
        )
    };
    let mut max_part = CheckReport::empty();
    let mut min_part = CheckReport::empty();
    for i in 0..fam.len() {
        let bound = fw[i] + fv[i];
        max_part.record(fam, i, fmax[i], bound, FP_SLACK, "functional(max) vs sum");
        min_part.record(fam, i, fmin[i], bound, FP_SLACK, "functional(min) vs sum");
    }
    Ok(ClosureReport { max_part, min_part })
}
