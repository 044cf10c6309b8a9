//! Reverse Holder inequality checks and the exponent self-improvement they
//! drive.
//!
//! A weight in a one-sided class satisfies, for some `eps > 0` and `c > 0`,
//!
//! ```text
//!     (avg_{R-} w^{1+eps})^(1/(1+eps)) <= c * avg_{R+} w
//! ```
//!
//! over every parabolic rectangle, with the plain (lag-free) parts.  The
//! checks here evaluate that inequality on a family; the search mode finds
//! the largest passing exponent for each constant of a ladder by bisection,
//! which is valid because the left side is nondecreasing in `eps` (power
//! mean inequality).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::RectangleFamily;
use crate::field::{ScalarField, Transform};
use crate::geometry::Lag;
use crate::report::Witness;
use crate::weights::constants::aq_plus_constant;
use crate::weights::FP_SLACK;

/// Outcome of one reverse Holder check at fixed `(eps, c)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RhiReport {
    pub eps: f64,
    pub c: f64,
    pub passed: bool,
    /// Worst `lhs / (c * rhs)` over the rectangles checked.
    pub worst_ratio: f64,
    pub worst_rect: Option<Witness>,
    pub checked: usize,
}

/// Checks the reverse Holder inequality with lag-free parts on every family
/// rectangle.
pub fn reverse_holder_check(
    w: &ScalarField,
    eps: f64,
    c: f64,
    fam: &RectangleFamily,
) -> Result<RhiReport> {
    if !(eps > 0.0) || !(c > 0.0) {
        return Err(Error::bad_param("reverse Holder needs eps > 0 and c > 0"));
    }
    w.ensure_positive()?;
    if fam.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let powered = w.map(Transform::Power(1.0 + eps))?;
    let _ = powered.prefix();
    let _ = w.prefix();
    let ratios: Vec<f64> = fam
        .rects()
        .par_iter()
        .map(|r| {
            let lhs = powered
                .box_average(&r.lower_part(Lag::ZERO))?
                .powf(1.0 / (1.0 + eps));
            let rhs = w.box_average(&r.upper_part(Lag::ZERO))?;
            Ok(lhs / (c * rhs))
        })
        .collect::<Result<_>>()?;
    Ok(summarize(eps, c, fam, &ratios))
}

/// Lagged, translated variant: the `(1+eps)`-mean over the lagged lower part
/// against the mean over the lower part shifted forward by
/// `tau (1 - alpha) L^p`.  Rectangles whose translated part leaves the
/// domain are skipped.
pub fn reverse_holder_translated(
    w: &ScalarField,
    eps: f64,
    c: f64,
    alpha: Lag,
    tau: f64,
    fam: &RectangleFamily,
) -> Result<RhiReport> {
    if !(eps > 0.0) || !(c > 0.0) {
        return Err(Error::bad_param("reverse Holder needs eps > 0 and c > 0"));
    }
    w.ensure_positive()?;
    let powered = w.map(Transform::Power(1.0 + eps))?;
    let dom = w.grid().domain();
    let mut ratios = Vec::new();
    let mut indices = Vec::new();
    for (i, r) in fam.iter().enumerate() {
        let shifted = r.translated_upper(alpha, tau)?;
        if !dom.contains(&shifted) {
            continue;
        }
        let lhs = powered
            .box_average(&r.lower_part(alpha))?
            .powf(1.0 / (1.0 + eps));
        let rhs = w.box_average(&shifted)?;
        ratios.push(lhs / (c * rhs));
        indices.push(i);
    }
    if ratios.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let mut rep = RhiReport {
        eps,
        c,
        passed: true,
        worst_ratio: 0.0,
        worst_rect: None,
        checked: ratios.len(),
    };
    for (ratio, &i) in ratios.iter().zip(&indices) {
        if *ratio > rep.worst_ratio {
            rep.worst_ratio = *ratio;
            rep.worst_rect = Some(Witness::new(i, &fam.rects()[i]));
        }
    }
    rep.passed = rep.worst_ratio <= 1.0 + FP_SLACK;
    Ok(rep)
}

fn summarize(eps: f64, c: f64, fam: &RectangleFamily, ratios: &[f64]) -> RhiReport {
    let mut rep = RhiReport {
        eps,
        c,
        passed: true,
        worst_ratio: 0.0,
        worst_rect: None,
        checked: ratios.len(),
    };
    for (i, &ratio) in ratios.iter().enumerate() {
        if ratio > rep.worst_ratio {
            rep.worst_ratio = ratio;
            rep.worst_rect = Some(Witness::new(i, &fam.rects()[i]));
        }
    }
    rep.passed = rep.worst_ratio <= 1.0 + FP_SLACK;
    rep
}

/// One point of the `(c, eps)` frontier.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RhiFrontier {
    pub c: f64,
    /// Largest exponent passing on the family, if any exponent at or above
    /// the probe floor passes.
    pub max_eps: Option<f64>,
}

/// For each constant of the ladder, bisects the largest passing exponent in
/// `[eps_floor, eps_hi]`.  Returns an error only if every ladder point fails
/// outright.
pub fn reverse_holder_search(
    w: &ScalarField,
    fam: &RectangleFamily,
    c_ladder: &[f64],
    eps_floor: f64,
    eps_hi: f64,
    bisection_steps: usize,
) -> Result<Vec<RhiFrontier>> {
    if c_ladder.is_empty() {
        return Err(Error::bad_param("constant ladder must be nonempty"));
    }
    if !(eps_floor > 0.0 && eps_hi > eps_floor) {
        return Err(Error::bad_param("need 0 < eps_floor < eps_hi"));
    }
    let mut out = Vec::with_capacity(c_ladder.len());
    let mut any = false;
    for &c in c_ladder {
        let point = if !reverse_holder_check(w, eps_floor, c, fam)?.passed {
            RhiFrontier { c, max_eps: None }
        } else if reverse_holder_check(w, eps_hi, c, fam)?.passed {
            any = true;
            RhiFrontier {
                c,
                max_eps: Some(eps_hi),
            }
        } else {
            let (mut lo, mut hi) = (eps_floor, eps_hi);
            for _ in 0..bisection_steps {
                let mid = 0.5 * (lo + hi);
                if reverse_holder_check(w, mid, c, fam)?.passed {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            any = true;
            RhiFrontier { c, max_eps: Some(lo) }
        };
        out.push(point);
    }
    if !any {
        return Err(Error::RhiSearchFailed);
    }
    Ok(out)
}

/// Exponent table for the self-improvement corollary: the class constant at
/// `q - eps` for each grid exponent, and the largest drop that stays below a
/// configurable ceiling.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelfImprovementReport {
    pub q: f64,
    pub ceiling: f64,
    /// `(eps, constant at q - eps)` in grid order.
    pub table: Vec<(f64, f64)>,
    pub best_eps: Option<f64>,
}

/// Measures the class constant across an exponent-drop grid.  Constants are
/// nondecreasing in the drop (power mean inequality per rectangle), so the
/// best drop is the largest one whose constant stays finite and below the
/// ceiling.
pub fn self_improvement(
    w: &ScalarField,
    q: f64,
    lag: Lag,
    fam: &RectangleFamily,
    eps_grid: &[f64],
    ceiling: f64,
) -> Result<SelfImprovementReport> {
    if !(q > 1.0) {
        return Err(Error::ExponentRange {
            msg: format!("self-improvement needs q > 1, got {q}"),
        });
    }
    if eps_grid.iter().any(|&e| !(e > 0.0 && e < q - 1.0)) {
        return Err(Error::ExponentRange {
            msg: "every exponent drop must lie in (0, q - 1)".to_string(),
        });
    }
    let mut table = Vec::with_capacity(eps_grid.len());
    let mut best_eps = None;
    for &eps in eps_grid {
        let c = aq_plus_constant(w, q - eps, lag, fam)?.value;
        if c.is_finite() && c <= ceiling {
            match best_eps {
                Some(b) if b >= eps => {}
                _ => best_eps = Some(eps),
            }
        }
        table.push((eps, c));
    }
    Ok(SelfImprovementReport {
        q,
        ceiling,
        table,
        best_eps,
    })
}
