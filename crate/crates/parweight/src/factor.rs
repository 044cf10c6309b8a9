//! Constructive weight factory.
//!
//! Three constructions are implemented:
//!
//! * an iteration operator whose geometric series splits a class weight into
//!   `w = u v^(1-q)` with `u` in the forward `A_1` class and `v` in the
//!   backward one (the Jones factorization, built constructively rather than
//!   abstractly);
//! * the Coifman-Rochberg recipe: `(M^{gamma-} f)^delta` with
//!   `0 < delta < 1` is a forward `A_1` weight, and every forward `A_1`
//!   weight is such a power times a bounded sandwich factor `b`;
//! * the product generator `(M^{gamma-} f)^delta (M^{gamma+} g)^(delta(1-q))`
//!   for class-`q` weights.
//!
//! All iterations run on total fields: cells no family rectangle covers fall
//! back to the cell's own value inside the maximal operators (see the
//! maximal module), which keeps the operator sublinear and the certificates
//! below valid on covered cells.
//!
//! The continuum theory also gives `b <= 1` almost everywhere.  That is not
//! asserted here: the smallest family rectangles average strictly-past
//! cells, so `w <= M^{gamma-} w` can fail on a discrete grid.  The two-sided
//! sandwich with measured bounds is reported instead.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::RectangleFamily;
use crate::field::{ScalarField, Transform};
use crate::geometry::Lag;
use crate::maximal::{maximal_backward, maximal_with_fallback, Direction};
use crate::report::CheckReport;
use crate::weights::{
    a1_minus_constant, a1_plus_constant, aq_plus_per_rectangle, Exponents, FP_SLACK,
};

/// Norm ratio above which the truncated series is declared non-contracting.
const CONTRACTION_LIMIT: f64 = 0.95;

/// The iteration operator
/// `T f = (w^{-1/q} M^{gamma-}(w^{1/q} f^{q-1}))^{1/(q-1)} + w^{1/q} M^{gamma+}(w^{-1/q} f)`,
/// subadditive and positively homogeneous for `q >= 2`.  For `1 < q < 2`
/// factorize through the dual weight instead (see [`rdf_factorize`]).
pub fn rdf_operator(
    f: &ScalarField,
    w: &ScalarField,
    q: f64,
    lag: Lag,
    fam: &RectangleFamily,
) -> Result<ScalarField> {
    let t = TOperator::new(w, q, lag, fam)?;
    t.apply(f)
}

struct TOperator<'a> {
    w_pos: ScalarField,
    w_neg: ScalarField,
    q: f64,
    lag: Lag,
    fam: &'a RectangleFamily,
}

impl<'a> TOperator<'a> {
    fn new(w: &ScalarField, q: f64, lag: Lag, fam: &'a RectangleFamily) -> Result<Self> {
        if !(q >= 2.0) {
            return Err(Error::ExponentRange {
                msg: format!("the direct iteration needs q >= 2, got {q}"),
            });
        }
        w.ensure_positive()?;
        Ok(TOperator {
            w_pos: w.map(Transform::Power(1.0 / q))?,
            w_neg: w.map(Transform::Power(-1.0 / q))?,
            q,
            lag,
            fam,
        })
    }

    fn apply(&self, f: &ScalarField) -> Result<ScalarField> {
        if f.values().iter().any(|&v| v < 0.0) {
            return Err(Error::bad_param("iteration input must be nonnegative"));
        }
        let inner1 = self.w_pos.zip_mul(&f.map(Transform::Power(self.q - 1.0))?)?;
        let m1 = maximal_with_fallback(&inner1, self.lag, self.fam, Direction::Backward)?;
        let first = self
            .w_neg
            .zip_mul(&m1)?
            .map(Transform::Power(1.0 / (self.q - 1.0)))?;
        let inner2 = self.w_neg.zip_mul(f)?;
        let m2 = maximal_with_fallback(&inner2, self.lag, self.fam, Direction::Forward)?;
        let second = self.w_pos.zip_mul(&m2)?;
        first.zip_add(&second)
    }
}

/// A-posteriori certificates of a truncated factorization series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RdfCertificates {
    /// Worst cell of `T eta / (2c eta + tail_field)`; at most 1 up to
    /// rounding by the series algebra.
    pub t_eta_margin: f64,
    /// Bound factor `B` in the certificate `M^{gamma-} u <= B u`.
    pub u_bound: f64,
    /// Worst cell of `M^{gamma-} u / (B u)`.
    pub u_margin: f64,
    /// Bound factor in `M^{gamma+} v <= B v`.
    pub v_bound: f64,
    pub v_margin: f64,
    /// Worst relative error of `u v^{1-q}` against `w`.
    pub reconstruction_error: f64,
}

/// Result of the constructive factorization `w = u v^(1-q)`.
#[derive(Debug, Serialize, Deserialize)]
pub struct FactorizationResult {
    pub u: ScalarField,
    pub v: ScalarField,
    /// The truncated series the factors are built from.
    pub eta: ScalarField,
    pub c_used: f64,
    /// Largest cell-relative contribution of the final series term.
    pub tail_bound: f64,
    pub q: f64,
    pub gamma: f64,
    pub iterations: usize,
    pub certificates: RdfCertificates,
}

impl FactorizationResult {
    /// `u v^(1-q)`, which reproduces `w` up to rounding.
    pub fn reconstruct(&self) -> Result<ScalarField> {
        self.u.zip_mul(&self.v.map(Transform::Power(1.0 - self.q))?)
    }
}

/// Builds the truncated series `eta = sum_k (2c)^{-k} T^k f0`, the factors
/// `u = w^{1/q} eta^{q-1}`, `v = w^{-1/q} eta`, and their certificates.
///
/// `c` defaults to 1.1 times the largest observed norm-growth ratio of the
/// iterates; the a-posteriori certificates, not the a-priori norm bound, are
/// the acceptance gate.  For `1 < q < 2` the factorization routes through
/// the dual weight on the reversed time axis and maps back, swapping the
/// roles of the factors.
pub fn rdf_factorize(
    w: &ScalarField,
    q: f64,
    lag: Lag,
    fam: &RectangleFamily,
    f0: &ScalarField,
    c: Option<f64>,
    iterations: usize,
) -> Result<FactorizationResult> {
    if !(q > 1.0) {
        return Err(Error::ExponentRange {
            msg: format!("factorization needs q > 1, got {q}"),
        });
    }
    if iterations == 0 {
        return Err(Error::bad_param("need at least one iteration"));
    }
    if let Some(c) = c {
        if !(c > 0.0) {
            return Err(Error::NonpositiveCBound(c));
        }
    }
    if q >= 2.0 {
        return rdf_factorize_direct(w, q, lag, fam, f0, c, iterations);
    }

    // 1 < q < 2: factorize the dual weight with the time axis reversed.
    let e = Exponents::conjugate(q)?;
    let dual = w.map(Transform::Power(e.dual_power()))?;
    let sub = rdf_factorize_direct(
        &dual.time_reversed(),
        e.q_prime,
        lag,
        &fam.time_reflected(w.grid()),
        &f0.time_reversed(),
        c,
        iterations,
    )?;
    // dual = u' v'^(1-q') there means w = (rev v') (rev u')^(1-q) here.
    let u = sub.v.time_reversed();
    let v = sub.u.time_reversed();
    let eta = sub.eta.time_reversed();
    let two_c = 2.0 * sub.c_used;
    // The sub-run's guarantees transfer exactly to specific reflections of
    // the caller's family: the backward certificate for `u` to the doubly
    // reflected family, the forward one for `v` to the family itself.
    let u_fam = fam
        .time_reflected(w.grid())
        .time_reflected(w.grid());
    let certificates = certify(
        w,
        &u,
        &v,
        &eta,
        q,
        lag,
        &u_fam,
        fam,
        two_c,
        // Certificate exponents swap with the factor roles.
        two_c,
        two_c.powf(e.q_prime - 1.0),
        None,
    )?;
    Ok(FactorizationResult {
        u,
        v,
        eta,
        c_used: sub.c_used,
        tail_bound: sub.tail_bound,
        q,
        gamma: lag.value(),
        iterations,
        certificates,
    })
}

fn rdf_factorize_direct(
    w: &ScalarField,
    q: f64,
    lag: Lag,
    fam: &RectangleFamily,
    f0: &ScalarField,
    c: Option<f64>,
    iterations: usize,
) -> Result<FactorizationResult> {
    f0.ensure_positive()?;
    let t = TOperator::new(w, q, lag, fam)?;
    let cell_vol = w.grid().cell_volume();
    let norm = |g: &ScalarField| -> f64 {
        let s: f64 = g.values().iter().map(|v| v.powf(q) * cell_vol).sum();
        s.powf(1.0 / q)
    };

    let mut iterates = Vec::with_capacity(iterations);
    let mut prev = f0.clone();
    let mut prev_norm = norm(f0);
    let mut max_ratio = 0.0f64;
    for _ in 0..iterations {
        let next = t.apply(&prev)?;
        let n = norm(&next);
        if prev_norm > 0.0 {
            max_ratio = max_ratio.max(n / prev_norm);
        }
        iterates.push(next.clone());
        prev = next;
        prev_norm = n;
    }
    let c_used = match c {
        Some(c) => c,
        None => 1.1 * max_ratio,
    };
    if !(c_used > 0.0) {
        return Err(Error::NonpositiveCBound(c_used));
    }
    let two_c = 2.0 * c_used;

    // eta = sum_k (2c)^{-k} T^k f0, with the term norms checked for
    // geometric decrease.
    let mut eta_vals = vec![0.0f64; w.grid().cell_count()];
    let mut last_term: Vec<f64> = Vec::new();
    let mut prev_term_norm = f64::INFINITY;
    for (k, g) in iterates.iter().enumerate() {
        let scale = two_c.powi(-(k as i32 + 1));
        let term: Vec<f64> = g.values().iter().map(|v| v * scale).collect();
        let term_norm = norm(&ScalarField::new(w.grid().clone(), term.clone())?);
        if k > 0 && prev_term_norm > 0.0 {
            let ratio = term_norm / prev_term_norm;
            if ratio > CONTRACTION_LIMIT {
                return Err(Error::DivergentSeries { step: k + 1, ratio });
            }
        }
        prev_term_norm = term_norm;
        for (e, t) in eta_vals.iter_mut().zip(&term) {
            *e += t;
        }
        last_term = term;
    }
    let eta = ScalarField::new(w.grid().clone(), eta_vals)?;
    eta.ensure_positive()?;
    let tail_bound = eta
        .values()
        .iter()
        .zip(&last_term)
        .map(|(&e, &t)| t / e)
        .fold(0.0f64, f64::max);

    let w_pos = w.map(Transform::Power(1.0 / q))?;
    let w_neg = w.map(Transform::Power(-1.0 / q))?;
    let u = w_pos.zip_mul(&eta.map(Transform::Power(q - 1.0))?)?;
    let v = w_neg.zip_mul(&eta)?;

    let tail_field = ScalarField::new(w.grid().clone(), last_term.clone())?;
    let t_eta = t.apply(&eta)?;
    let t_tail = t.apply(&tail_field)?;
    let certificates = certify(
        w,
        &u,
        &v,
        &eta,
        q,
        lag,
        fam,
        fam,
        two_c,
        two_c.powf(q - 1.0),
        two_c,
        Some((t_eta, t_tail)),
    )?;

    Ok(FactorizationResult {
        u,
        v,
        eta,
        c_used,
        tail_bound,
        q,
        gamma: lag.value(),
        iterations,
        certificates,
    })
}

#[allow(clippy::too_many_arguments)]
fn certify(
    w: &ScalarField,
    u: &ScalarField,
    v: &ScalarField,
    eta: &ScalarField,
    q: f64,
    lag: Lag,
    u_fam: &RectangleFamily,
    v_fam: &RectangleFamily,
    two_c: f64,
    u_bound: f64,
    v_bound: f64,
    series: Option<(ScalarField, ScalarField)>,
) -> Result<RdfCertificates> {
    let t_eta_margin = match series {
        Some((t_eta, t_tail)) => {
            let mut worst = 0.0f64;
            for i in 0..eta.values().len() {
                let bound = two_c * eta.value(i) + t_tail.value(i);
                worst = worst.max(t_eta.value(i) / bound);
            }
            worst
        }
        None => f64::NAN,
    };
    let mu = maximal_with_fallback(u, lag, u_fam, Direction::Backward)?;
    let mv = maximal_with_fallback(v, lag, v_fam, Direction::Forward)?;
    let mut u_margin = 0.0f64;
    let mut v_margin = 0.0f64;
    for i in 0..u.values().len() {
        u_margin = u_margin.max(mu.value(i) / (u_bound * u.value(i)));
        v_margin = v_margin.max(mv.value(i) / (v_bound * v.value(i)));
    }
    let recon = u.zip_mul(&v.map(Transform::Power(1.0 - q))?)?;
    let mut reconstruction_error = 0.0f64;
    for i in 0..w.values().len() {
        reconstruction_error =
            reconstruction_error.max((recon.value(i) - w.value(i)).abs() / w.value(i));
    }
    Ok(RdfCertificates {
        t_eta_margin,
        u_bound,
        u_margin,
        v_bound,
        v_margin,
        reconstruction_error,
    })
}

/// Synthesis report for `w = u v^(1-q)` from two `A_1` factors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JonesReport {
    pub u_constant: f64,
    pub v_constant: f64,
    /// Per-rectangle bound `[u] [v]^(q-1)` the functional is checked against.
    pub bound: f64,
    pub check: CheckReport,
}

/// Builds `w = u v^(1-q)` and checks, rectangle by rectangle, that its
/// functional stays below `[u]_{A1+} [v]_{A1-}^(q-1)` (the sound exponent
/// for per-rectangle algebra).
pub fn jones_synthesize(
    u: &ScalarField,
    v: &ScalarField,
    q: f64,
    lag: Lag,
    fam: &RectangleFamily,
) -> Result<(ScalarField, JonesReport)> {
    if u.grid() != v.grid() {
        return Err(Error::GridMismatch);
    }
    u.ensure_positive()?;
    v.ensure_positive()?;
    let w = u.zip_mul(&v.map(Transform::Power(1.0 - q))?)?;
    let u_constant = a1_plus_constant(u, lag, fam)?.value;
    let v_constant = a1_minus_constant(v, lag, fam)?.value;
    let bound = u_constant * v_constant.powf(q - 1.0);
    let values = aq_plus_per_rectangle(&w, q, lag, fam)?;
    let mut check = CheckReport::empty();
    for (i, &val) in values.iter().enumerate() {
        check.record(fam, i, val, bound, FP_SLACK, "synthesized functional vs A1 product");
    }
    Ok((
        w,
        JonesReport {
            u_constant,
            v_constant,
            bound,
            check,
        },
    ))
}

/// Coifman-Rochberg weight `(M^{gamma-} f)^delta`, `0 < delta < 1`, as a
/// total field (uncovered cells fall back to `|f|^delta`).
pub fn cr_build(
    f: &ScalarField,
    delta: f64,
    lag: Lag,
    fam: &RectangleFamily,
) -> Result<ScalarField> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::bad_param(format!(
            "Coifman-Rochberg exponent must lie in (0, 1), got {delta}"
        )));
    }
    let m = maximal_backward(f, lag, fam)?;
    if m.covered_count() == 0 {
        return Err(Error::UncoveredGrid);
    }
    let total = m.to_field_with_fallback(&f.map(Transform::Abs)?)?;
    total.map(Transform::Power(delta))
}

/// Decomposition `w = b (M^{gamma-} f)^delta` with `f = w^(1+eps)` and
/// `delta = 1/(1+eps)`.
#[derive(Debug, Serialize, Deserialize)]
pub struct CrResult {
    pub f_source: ScalarField,
    pub delta: f64,
    pub b: ScalarField,
    /// Sandwich bounds of `b` over covered cells.
    pub b_min: f64,
    pub b_max: f64,
    pub covered_cells: usize,
}

impl CrResult {
    /// `b (M^{gamma-} f)^delta`; equal to the decomposed weight up to
    /// rounding, by construction of `b`.
    pub fn reconstruct(&self, lag: Lag, fam: &RectangleFamily) -> Result<ScalarField> {
        let g = cr_power_field(&self.f_source, self.delta, lag, fam)?;
        self.b.zip_mul(&g)
    }
}

fn cr_power_field(
    f: &ScalarField,
    delta: f64,
    lag: Lag,
    fam: &RectangleFamily,
) -> Result<ScalarField> {
    let m = maximal_backward(f, lag, fam)?;
    let total = m.to_field_with_fallback(&f.map(Transform::Abs)?)?;
    total.map(Transform::Power(delta))
}

/// Decomposes an `A_1` weight as `b (M^{gamma-} w^{1+eps})^{1/(1+eps)}`,
/// reporting the sandwich bounds of `b` over covered cells.  `eps` should
/// come from a reverse Holder search on `w`.
pub fn cr_decompose(w: &ScalarField, eps: f64, lag: Lag, fam: &RectangleFamily) -> Result<CrResult> {
    if !(eps > 0.0) {
        return Err(Error::bad_param(format!("eps must be positive, got {eps}")));
    }
    w.ensure_positive()?;
    let delta = 1.0 / (1.0 + eps);
    let f_source = w.map(Transform::Power(1.0 + eps))?;
    let m = maximal_backward(&f_source, lag, fam)?;
    let covered = m.covered_count();
    if covered == 0 {
        return Err(Error::UncoveredGrid);
    }
    let g = m
        .to_field_with_fallback(&f_source)?
        .map(Transform::Power(delta))?;
    let b_vals: Vec<f64> = w.values().iter().zip(g.values()).map(|(&a, &b)| a / b).collect();
    let b = ScalarField::new(w.grid().clone(), b_vals)?;
    let mut b_min = f64::INFINITY;
    let mut b_max = f64::NEG_INFINITY;
    for i in 0..b.values().len() {
        if m.is_covered(i) {
            b_min = b_min.min(b.value(i));
            b_max = b_max.max(b.value(i));
        }
    }
    Ok(CrResult {
        f_source,
        delta,
        b,
        b_min,
        b_max,
        covered_cells: covered,
    })
}

/// Class-`q` generator `(M^{gamma-} f)^delta (M^{gamma+} g)^(delta (1-q))`.
pub fn aq_generator(
    f: &ScalarField,
    g: &ScalarField,
    delta: f64,
    q: f64,
    lag: Lag,
    fam: &RectangleFamily,
) -> Result<ScalarField> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::bad_param(format!(
            "generator exponent must lie in (0, 1), got {delta}"
        )));
    }
    if !(q > 1.0) {
        return Err(Error::ExponentRange {
            msg: format!("generator needs q > 1, got {q}"),
        });
    }
    if f.grid() != g.grid() {
        return Err(Error::GridMismatch);
    }
    let mb = maximal_backward(f, lag, fam)?;
    let mf = crate::maximal::maximal_forward(g, lag, fam)?;
    if mb.covered_count() == 0 || mf.covered_count() == 0 {
        return Err(Error::UncoveredGrid);
    }
    let first = mb
        .to_field_with_fallback(&f.map(Transform::Abs)?)?
        .map(Transform::Power(delta))?;
    let second = mf
        .to_field_with_fallback(&g.map(Transform::Abs)?)?
        .map(Transform::Power(delta * (1.0 - q)))?;
    first.zip_mul(&second)
}
