//! Parabolic rectangles and their lagged upper/lower parts.
//!
//! A parabolic rectangle with center `(x, t)`, half-side `L` and scaling
//! exponent `p` is the space-time box
//!
//! ```text
//!     Q(x, L) x (t - L^p, t + L^p],    Q(x, L) = { y : |y_i - x_i| <= L }
//! ```
//!
//! so the time extent scales like the p-th power of the spatial side.  A time
//! lag `gamma` in `[0, 1)` removes a band around the center slice and splits
//! the rectangle into a lower (past) part and an upper (future) part:
//!
//! ```text
//!     lower = Q(x, L) x (t - L^p,        t - gamma L^p]
//!     upper = Q(x, L) x (t + gamma L^p,  t + L^p]
//! ```
//!
//! Both parts have volume `(2L)^n (1 - gamma) L^p` and are reflections of each
//! other about the center time slice.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Time lag, a fraction in `[0, 1)` of the half time-extent removed around
/// the center slice.  Also reused as the `alpha` parameter of the translated
/// parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lag(f64);

impl Lag {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::bad_param(format!(
                "time lag must lie in [0, 1), got {gamma}"
            )));
        }
        Ok(Lag(gamma))
    }

    /// The lag with `gamma = 0` (no separating band).
    pub const ZERO: Lag = Lag(0.0);

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Axis-aligned space-time box: closed spatial intervals, half-open time
/// interval `(lo, hi]`.  The open/closed choice only matters for bookkeeping;
/// every measure-related operation works with interval lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeBox {
    /// Per spatial axis `(lower, upper)` bounds.
    pub spatial: Vec<(f64, f64)>,
    /// Time bounds `(lower, upper)`.
    pub time: (f64, f64),
}

impl SpaceTimeBox {
    pub fn new(spatial: Vec<(f64, f64)>, time: (f64, f64)) -> Result<Self> {
        for &(lo, hi) in &spatial {
            if !(hi > lo) {
                return Err(Error::DegenerateBox);
            }
        }
        if !(time.1 > time.0) {
            return Err(Error::DegenerateBox);
        }
        Ok(SpaceTimeBox { spatial, time })
    }

    pub fn spatial_dim(&self) -> usize {
        self.spatial.len()
    }

    pub fn volume(&self) -> f64 {
        let mut v = self.time.1 - self.time.0;
        for &(lo, hi) in &self.spatial {
            v *= hi - lo;
        }
        v
    }

    /// Containment with zero tolerance: every bound compared with `<=`.
    pub fn contains(&self, other: &SpaceTimeBox) -> bool {
        if self.spatial.len() != other.spatial.len() {
            return false;
        }
        for (a, b) in self.spatial.iter().zip(&other.spatial) {
            if !(a.0 <= b.0 && b.1 <= a.1) {
                return false;
            }
        }
        self.time.0 <= other.time.0 && other.time.1 <= self.time.1
    }

    /// Shift in time by `dt` (exact identity when `dt` is a signed zero).
    pub fn translate_t(&self, dt: f64) -> SpaceTimeBox {
        SpaceTimeBox {
            spatial: self.spatial.clone(),
            time: (self.time.0 + dt, self.time.1 + dt),
        }
    }

    /// Reflection about the time slice `t = center`.
    pub fn time_reflected(&self, center: f64) -> SpaceTimeBox {
        SpaceTimeBox {
            spatial: self.spatial.clone(),
            time: (2.0 * center - self.time.1, 2.0 * center - self.time.0),
        }
    }

    /// Bounds of axis `k` with the time axis last.
    pub fn axis_bounds(&self, axis: usize) -> (f64, f64) {
        if axis < self.spatial.len() {
            self.spatial[axis]
        } else {
            self.time
        }
    }
}

/// Parabolic rectangle `Q(x, L) x (t - L^p, t + L^p]`.
///
/// The exponent is carried per rectangle rather than globally so that mixed
/// exponent experiments remain possible; the CLI fixes one `p` per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParabolicRectangle {
    /// Spatial center, one coordinate per axis.
    pub center_x: Vec<f64>,
    /// Temporal center.
    pub center_t: f64,
    /// Spatial half-side `L > 0`; the cube spans `[x_i - L, x_i + L]`.
    pub half_side: f64,
    /// Scaling exponent `p >= 1`.  The theory takes `p > 1`; `p = 1` is
    /// admitted as an extension for the statements that allow it.
    pub p: f64,
}

impl ParabolicRectangle {
    pub fn new(center_x: Vec<f64>, center_t: f64, half_side: f64, p: f64) -> Result<Self> {
        if center_x.is_empty() {
            return Err(Error::bad_param("spatial dimension must be at least 1"));
        }
        if !(half_side > 0.0) || !half_side.is_finite() {
            return Err(Error::bad_param(format!(
                "half-side must be positive, got {half_side}"
            )));
        }
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::bad_param(format!("exponent must be >= 1, got {p}")));
        }
        Ok(ParabolicRectangle {
            center_x,
            center_t,
            half_side,
            p,
        })
    }

    pub fn spatial_dim(&self) -> usize {
        self.center_x.len()
    }

    /// Half time-extent `L^p`.  Every part computation goes through this one
    /// expression so that derived boxes agree bitwise.
    pub fn time_half_len(&self) -> f64 {
        self.half_side.powf(self.p)
    }

    fn spatial_cube(&self) -> Vec<(f64, f64)> {
        self.center_x
            .iter()
            .map(|&x| (x - self.half_side, x + self.half_side))
            .collect()
    }

    /// The full rectangle `Q(x, L) x (t - L^p, t + L^p]`.
    pub fn full_box(&self) -> SpaceTimeBox {
        let lp = self.time_half_len();
        SpaceTimeBox {
            spatial: self.spatial_cube(),
            time: (self.center_t - lp, self.center_t + lp),
        }
    }

    /// Upper (future) part `Q(x, L) x (t + gamma L^p, t + L^p]`.
    pub fn upper_part(&self, lag: Lag) -> SpaceTimeBox {
        let lp = self.time_half_len();
        SpaceTimeBox {
            spatial: self.spatial_cube(),
            time: (self.center_t + lag.value() * lp, self.center_t + lp),
        }
    }

    /// Lower (past) part `Q(x, L) x (t - L^p, t - gamma L^p]`, the reflection
    /// of the upper part about the center slice.
    pub fn lower_part(&self, lag: Lag) -> SpaceTimeBox {
        let lp = self.time_half_len();
        SpaceTimeBox {
            spatial: self.spatial_cube(),
            time: (self.center_t - lp, self.center_t - lag.value() * lp),
        }
    }

    /// Translated lower part: the upper part shifted backwards in time by
    /// `tau (1 + alpha) L^p` with `tau >= 1`.
    ///
    /// Implemented as the lower part shifted by `-(tau - 1)(1 + alpha) L^p`,
    /// which is the same set and makes `tau = 1` reproduce `lower_part`
    /// bit for bit.
    pub fn translated_lower(&self, alpha: Lag, tau: f64) -> Result<SpaceTimeBox> {
        if !(tau >= 1.0) {
            return Err(Error::bad_param(format!(
                "translated lower part needs tau >= 1, got {tau}"
            )));
        }
        let lp = self.time_half_len();
        let shift = (tau - 1.0) * (1.0 + alpha.value()) * lp;
        Ok(self.lower_part(alpha).translate_t(-shift))
    }

    /// Translated upper part: the lower part shifted forwards in time by
    /// `tau (1 - alpha) L^p` with `tau > 0`.
    pub fn translated_upper(&self, alpha: Lag, tau: f64) -> Result<SpaceTimeBox> {
        if !(tau > 0.0) {
            return Err(Error::bad_param(format!(
                "translated upper part needs tau > 0, got {tau}"
            )));
        }
        let lp = self.time_half_len();
        let shift = tau * (1.0 - alpha.value()) * lp;
        Ok(self.lower_part(alpha).translate_t(shift))
    }

    /// The `lambda`-dilate: same center, half-side `lambda L`.
    pub fn dilate(&self, lambda: f64) -> Result<ParabolicRectangle> {
        if !(lambda > 0.0) {
            return Err(Error::bad_param(format!(
                "dilation factor must be positive, got {lambda}"
            )));
        }
        ParabolicRectangle::new(
            self.center_x.clone(),
            self.center_t,
            lambda * self.half_side,
            self.p,
        )
    }

    /// Reflection about the time slice `t = center`; used to conjugate the
    /// forward and backward maximal operators.
    pub fn time_reflected(&self, center: f64) -> ParabolicRectangle {
        ParabolicRectangle {
            center_x: self.center_x.clone(),
            center_t: 2.0 * center - self.center_t,
            half_side: self.half_side,
            p: self.p,
        }
    }
}
