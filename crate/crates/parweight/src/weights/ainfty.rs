//! The A-infinity condition audit: quantitative and sublevel measure
//! conditions and the Gurov-Reshetnyak functional, plus the per-rectangle
//! implications tying them together.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::RectangleFamily;
use crate::field::ScalarField;
use crate::geometry::Lag;
use crate::report::{ConstantReport, FamilySummary, Violation, Witness};
use crate::weights::FP_SLACK;

/// How measurable subsets of the future part are generated for the
/// quantitative measure check: sublevel sets over a threshold ladder (the
/// extremal choice), plus seeded random unions of the part's cells.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ESetConfig {
    pub beta_ladder: Vec<f64>,
    pub random_per_rect: usize,
    pub seed: u64,
}

impl Default for ESetConfig {
    fn default() -> Self {
        ESetConfig {
            beta_ladder: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            random_per_rect: 4,
            seed: 0,
        }
    }
}

/// Result of the quantitative measure check
/// `|E| / |R+| <= K (w(E) / w(R-))^delta` over all generated `E`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureCheckReport {
    pub k_bound: f64,
    pub delta: f64,
    pub passed: bool,
    /// Worst observed `(|E|/|R+|) / (w(E)/w(R-))^delta`.
    pub worst_ratio: f64,
    pub worst_rect: Option<Witness>,
    pub sets_checked: usize,
    pub seed: u64,
}

/// Checks the quantitative measure inequality for every family rectangle and
/// every generated subset of its future part.
pub fn quantitative_measure_check(
    w: &ScalarField,
    lag: Lag,
    k_bound: f64,
    delta: f64,
    fam: &RectangleFamily,
    cfg: &ESetConfig,
) -> Result<MeasureCheckReport> {
    if !(k_bound > 0.0) || !(delta > 0.0) {
        return Err(Error::bad_param("measure check needs K > 0 and delta > 0"));
    }
    w.ensure_positive()?;
    if fam.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let _ = w.prefix();

    struct Local {
        worst: f64,
        rect: usize,
        sets: usize,
    }

    let locals: Vec<Local> = fam
        .rects()
        .par_iter()
        .enumerate()
        .map(|(ri, r)| {
            let lower = r.lower_part(lag);
            let upper = r.upper_part(lag);
            let w_lower = w.box_integral(&lower)?;
            let avg_lower = w_lower / lower.volume();
            let vol_upper = upper.volume();
            let mut cells: Vec<(usize, f64)> = Vec::new();
            w.grid().for_each_overlap(&upper, &mut |flat, vol| {
                cells.push((flat, vol));
            });

            let mut worst = 0.0f64;
            let mut sets = 0usize;
            let mut consider = |e_vol: f64, e_mass: f64| {
                sets += 1;
                if e_vol > 0.0 {
                    let ratio = (e_vol / vol_upper) / (e_mass / w_lower).powf(delta);
                    if ratio > worst {
                        worst = ratio;
                    }
                }
            };

            for &beta in &cfg.beta_ladder {
                let thr = beta * avg_lower;
                let mut e_vol = 0.0;
                let mut e_mass = 0.0;
                for &(flat, vol) in &cells {
                    if w.value(flat) < thr {
                        e_vol += vol;
                        e_mass += w.value(flat) * vol;
                    }
                }
                consider(e_vol, e_mass);
            }
            for j in 0..cfg.random_per_rect {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(cfg.seed ^ (ri as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ j as u64);
                let mut e_vol = 0.0;
                let mut e_mass = 0.0;
                for &(flat, vol) in &cells {
                    if rng.gen_bool(0.5) {
                        e_vol += vol;
                        e_mass += w.value(flat) * vol;
                    }
                }
                consider(e_vol, e_mass);
            }
            Ok(Local {
                worst,
                rect: ri,
                sets,
            })
        })
        .collect::<Result<_>>()?;

    let mut worst_ratio = 0.0;
    let mut worst_rect = None;
    let mut sets_checked = 0;
    for l in locals {
        sets_checked += l.sets;
        if l.worst > worst_ratio {
            worst_ratio = l.worst;
            worst_rect = Some(Witness::new(l.rect, &fam.rects()[l.rect]));
        }
    }
    Ok(MeasureCheckReport {
        k_bound,
        delta,
        passed: worst_ratio <= k_bound * (1.0 + FP_SLACK),
        worst_ratio,
        worst_rect,
        sets_checked,
        seed: cfg.seed,
    })
}

/// Result of the sublevel measure condition
/// `|R+ intersect {w < beta * avg_{R-} w}| < alpha |R+|`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SublevelReport {
    pub alpha: f64,
    pub beta: f64,
    pub passed: bool,
    /// Largest observed measure fraction: the smallest `alpha` that would
    /// pass for this `beta` on this family.
    pub min_alpha: f64,
    pub worst_rect: Option<Witness>,
    pub violations: Vec<Violation>,
}

/// Per-rectangle sublevel condition at fixed `(alpha, beta)`.
pub fn sublevel_condition(
    w: &ScalarField,
    lag: Lag,
    alpha: f64,
    beta: f64,
    fam: &RectangleFamily,
) -> Result<SublevelReport> {
    if !(0.0 < alpha && alpha < 1.0) || !(0.0 < beta && beta < 1.0) {
        return Err(Error::bad_param("sublevel condition needs alpha, beta in (0, 1)"));
    }
    w.ensure_positive()?;
    if fam.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let _ = w.prefix();

    let fractions: Vec<f64> = fam
        .rects()
        .par_iter()
        .map(|r| {
            let avg_lower = w.box_average(&r.lower_part(lag))?;
            let upper = r.upper_part(lag);
            let thr = beta * avg_lower;
            let mut m = 0.0;
            w.grid().for_each_overlap(&upper, &mut |flat, vol| {
                if w.value(flat) < thr {
                    m += vol;
                }
            });
            Ok(m / upper.volume())
        })
        .collect::<Result<_>>()?;

    let mut min_alpha = 0.0;
    let mut worst_rect = None;
    let mut violations = Vec::new();
    for (i, &frac) in fractions.iter().enumerate() {
        if frac > min_alpha {
            min_alpha = frac;
            worst_rect = Some(Witness::new(i, &fam.rects()[i]));
        }
        if frac >= alpha * (1.0 + FP_SLACK) {
            violations.push(Violation {
                rect_index: i,
                lhs: frac,
                rhs: alpha,
                detail: "sublevel fraction exceeds alpha".to_string(),
            });
        }
    }
    Ok(SublevelReport {
        alpha,
        beta,
        passed: violations.is_empty(),
        min_alpha,
        worst_rect,
        violations,
    })
}

/// The Gurov-Reshetnyak functional
/// `sup_R avg_{R+} (w - avg_{R-} w)^- / avg_{R-} w`; values below 1
/// characterize the A-infinity class.
pub fn gurov_reshetnyak(w: &ScalarField, lag: Lag, fam: &RectangleFamily) -> Result<ConstantReport> {
    w.ensure_positive()?;
    if fam.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let _ = w.prefix();
    let values: Vec<f64> = fam
        .rects()
        .par_iter()
        .map(|r| {
            let avg_lower = w.box_average(&r.lower_part(lag))?;
            let upper = r.upper_part(lag);
            let mut num = 0.0;
            w.grid().for_each_overlap(&upper, &mut |flat, vol| {
                let neg = (avg_lower - w.value(flat)).max(0.0);
                num += neg * vol;
            });
            Ok(num / upper.volume() / avg_lower)
        })
        .collect::<Result<_>>()?;
    let mut best = 0usize;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    Ok(ConstantReport {
        value: values[best],
        witness: Witness::new(best, &fam.rects()[best]),
        family: FamilySummary::new(fam),
    })
}

/// Outcome of the two Gurov-Reshetnyak implications.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrImplicationReport {
    pub lambda_grid: Vec<f64>,
    pub beta: f64,
    pub passed: bool,
    pub forward_checked: usize,
    pub reverse_checked: usize,
    pub violations: Vec<Violation>,
}

/// Per-rectangle implications between the Gurov-Reshetnyak bound and the
/// sublevel measure condition, with each rectangle's own constants.
///
/// Forward: if the functional value at `R` is `eps`, then for every
/// `lambda` in `(eps, 1)` the sublevel set at threshold factor
/// `1 - eps/lambda` fills at most a `lambda` fraction of the future part.
/// Reverse: if the sublevel set at factor `beta` fills an `m` fraction, then
/// the functional value is at most `1 - (1 - m) beta`.  Both are proved
/// rectangle by rectangle, so any violation is implementation-level.
pub fn gr_implication_check(
    w: &ScalarField,
    lag: Lag,
    fam: &RectangleFamily,
    lambdas: &[f64],
    beta: f64,
) -> Result<GrImplicationReport> {
    if !(0.0 < beta && beta < 1.0) {
        return Err(Error::bad_param("beta must lie in (0, 1)"));
    }
    if lambdas.iter().any(|&l| !(0.0 < l && l < 1.0)) {
        return Err(Error::bad_param("lambda grid must lie in (0, 1)"));
    }
    w.ensure_positive()?;
    if fam.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let _ = w.prefix();

    struct Local {
        forward_checked: usize,
        reverse_checked: usize,
        violations: Vec<Violation>,
    }

    let locals: Vec<Local> = fam
        .rects()
        .par_iter()
        .enumerate()
        .map(|(ri, r)| {
            let avg_lower = w.box_average(&r.lower_part(lag))?;
            let upper = r.upper_part(lag);
            let vol_upper = upper.volume();
            let mut cells: Vec<(usize, f64)> = Vec::new();
            w.grid().for_each_overlap(&upper, &mut |flat, vol| {
                cells.push((flat, vol));
            });

            let mut gr_num = 0.0;
            for &(flat, vol) in &cells {
                gr_num += (avg_lower - w.value(flat)).max(0.0) * vol;
            }
            let eps = gr_num / vol_upper / avg_lower;

            let mut local = Local {
                forward_checked: 0,
                reverse_checked: 0,
                violations: Vec::new(),
            };

            for &lambda in lambdas {
                if lambda <= eps {
                    continue;
                }
                let thr = (1.0 - eps / lambda) * avg_lower;
                let mut m = 0.0;
                for &(flat, vol) in &cells {
                    if w.value(flat) < thr {
                        m += vol;
                    }
                }
                local.forward_checked += 1;
                if m > lambda * vol_upper * (1.0 + FP_SLACK) {
                    local.violations.push(Violation {
                        rect_index: ri,
                        lhs: m,
                        rhs: lambda * vol_upper,
                        detail: format!("forward implication at lambda={lambda}"),
                    });
                }
            }

            let thr = beta * avg_lower;
            let mut m = 0.0;
            for &(flat, vol) in &cells {
                if w.value(flat) < thr {
                    m += vol;
                }
            }
            let alpha = 1.0 - m / vol_upper;
            local.reverse_checked += 1;
            let bound = (1.0 - alpha * beta) * avg_lower;
            if gr_num / vol_upper > bound * (1.0 + FP_SLACK) {
                local.violations.push(Violation {
                    rect_index: ri,
                    lhs: gr_num / vol_upper,
                    rhs: bound,
                    detail: format!("reverse implication at beta={beta}"),
                });
            }
            Ok(local)
        })
        .collect::<Result<_>>()?;

    let mut report = GrImplicationReport {
        lambda_grid: lambdas.to_vec(),
        beta,
        passed: true,
        forward_checked: 0,
        reverse_checked: 0,
        violations: Vec::new(),
    };
    for l in locals {
        report.forward_checked += l.forward_checked;
        report.reverse_checked += l.reverse_checked;
        report.violations.extend(l.violations);
    }
    report.passed = report.violations.is_empty();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::FamilySpec;
    use crate::field::Grid;
    use crate::weights::constants::aq_plus_constant;
    use rand_chacha::ChaCha8Rng;

    fn grid(nx: usize, nt: usize) -> Grid {
        Grid::new(vec![nx, nt], vec![1.0, 1.0], vec![0.0, 0.0], 2.0).unwrap()
    }

    fn fitted(g: &Grid, gamma: f64, scales: usize) -> RectangleFamily {
        RectangleFamily::enumerate(g, FamilySpec::fitted(g, gamma, scales).unwrap()).unwrap()
    }

    fn random_weight(g: &Grid, seed: u64) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vals: Vec<f64> = (0..g.cell_count())
            .map(|_| (rng.gen_range(-0.8..0.8f64)).exp())
            .collect();
        ScalarField::new(g.clone(), vals).unwrap()
    }

    #[test]
    fn gr_of_constant_weight_vanishes() {
        let g = grid(8, 8);
        let w = ScalarField::constant(g.clone(), 2.0).unwrap();
        let fam = fitted(&g, 0.25, 2);
        let c = gurov_reshetnyak(&w, Lag::new(0.25).unwrap(), &fam).unwrap();
        assert!(c.value <= 1e-12);
    }

    #[test]
    fn gr_below_one_for_positive_weights() {
        let g = grid(6, 10);
        for seed in 0..5 {
            let w = random_weight(&g, seed);
            let fam = fitted(&g, 0.2, 2);
            let c = gurov_reshetnyak(&w, Lag::new(0.2).unwrap(), &fam).unwrap();
            assert!(c.value < 1.0);
        }
    }

    #[test]
    fn checkerboard_gr_matches_direct_computation() {
        // Alternating two-valued weight; compare one rectangle against a
        // scalar computation.
        let g = grid(2, 2);
        let w = ScalarField::new(g.clone(), vec![1.0, 3.0, 3.0, 1.0]).unwrap();
        let spec = FamilySpec::new(2.0, 0.0, 1.0, 2.0, 1, 0.5, 0.5).unwrap();
        let fam = RectangleFamily::enumerate(&g, spec).unwrap();
        let c = gurov_reshetnyak(&w, Lag::ZERO, &fam).unwrap();
        // lower part holds values {1, 3} -> average 2; upper part values
        // {3, 1}: negative part (w - 2)^- has average (0 + 1)/2 = 1/2.
        assert!((c.value - 0.25).abs() <= 1e-12);
    }

    #[test]
    fn sublevel_trivia() {
        let g = grid(8, 8);
        let w = ScalarField::constant(g.clone(), 5.0).unwrap();
        let fam = fitted(&g, 0.25, 2);
        let lag = Lag::new(0.25).unwrap();
        let rep = sublevel_condition(&w, lag, 0.5, 0.9, &fam).unwrap();
        assert!(rep.passed);
        assert_eq!(rep.min_alpha, 0.0);
        // beta -> 0: sublevel sets empty for any weight
        let w = random_weight(&g, 3);
        let rep = sublevel_condition(&w, lag, 0.5, 1e-6, &fam).unwrap();
        assert!(rep.passed && rep.min_alpha == 0.0);
    }

    #[test]
    fn sublevel_min_alpha_matches_scan() {
        let g = grid(5, 9);
        let w = random_weight(&g, 17);
        let fam = fitted(&g, 0.1, 2);
        let lag = Lag::new(0.1).unwrap();
        let beta = 0.8;
        let rep = sublevel_condition(&w, lag, 0.999, beta, &fam).unwrap();
        // cell-scan oracle for the worst fraction
        let mut worst: f64 = 0.0;
        for r in fam.iter() {
            let avg = w.box_average(&r.lower_part(lag)).unwrap();
            let upper = r.upper_part(lag);
            let mut m = 0.0;
            w.grid().for_each_overlap(&upper, &mut |flat, vol| {
                if w.value(flat) < beta * avg {
                    m += vol;
                }
            });
            worst = worst.max(m / upper.volume());
        }
        assert!((rep.min_alpha - worst).abs() <= 1e-12);
    }

    #[test]
    fn holder_direction_of_measure_check() {
        // With delta = 1/q and K = [w]^{1/q} the inequality is the Holder
        // estimate, valid for every subset of the future part.
        let g = grid(6, 8);
        let lag = Lag::new(0.2).unwrap();
        for seed in 0..5 {
            let w = random_weight(&g, 100 + seed);
            let fam = fitted(&g, 0.2, 2);
            let q = 2.0;
            let aq = aq_plus_constant(&w, q, lag, &fam).unwrap().value;
            let cfg = ESetConfig {
                seed,
                ..ESetConfig::default()
            };
            let rep =
                quantitative_measure_check(&w, lag, aq.powf(1.0 / q), 1.0 / q, &fam, &cfg).unwrap();
            assert!(rep.passed, "worst ratio {} vs K {}", rep.worst_ratio, rep.k_bound);
        }
    }

    #[test]
    fn full_set_is_vacuous() {
        // E = R+ gives |E|/|R+| = 1, so the bound reduces to averages.
        let g = grid(4, 6);
        let w = ScalarField::constant(g.clone(), 1.0).unwrap();
        let fam = fitted(&g, 0.0, 1);
        let cfg = ESetConfig {
            beta_ladder: vec![],
            random_per_rect: 0,
            seed: 0,
        };
        // No sets at all: trivially passes with worst ratio 0.
        let rep = quantitative_measure_check(&w, Lag::ZERO, 1.0, 0.5, &fam, &cfg).unwrap();
        assert!(rep.passed && rep.worst_ratio == 0.0);
    }

    #[test]
    fn gr_implications_hold_on_random_weights() {
        let g = grid(6, 10);
        let lag = Lag::new(0.25).unwrap();
        for seed in 0..20 {
            let w = random_weight(&g, 500 + seed);
            let fam = fitted(&g, 0.25, 2);
            for beta in [0.25, 0.5, 0.75] {
                let rep = gr_implication_check(&w, lag, &fam, &[0.3, 0.5, 0.9], beta).unwrap();
                assert!(rep.passed, "violations: {:?}", rep.violations);
                assert!(rep.forward_checked > 0 && rep.reverse_checked > 0);
            }
        }
    }

    #[test]
    fn sublevel_and_measure_conditions_consistent() {
        // If no sublevel set at factor beta exceeds the alpha fraction, then
        // any set of small mass w(E) < beta' w(R-) with beta' < (1-alpha)beta
        // fills at most alpha' = alpha + beta'/beta of the future part: split
        // E at the sublevel threshold and bound the heavy half by Chebyshev.
        let g = grid(6, 10);
        let lag = Lag::new(0.2).unwrap();
        for seed in 0..5u64 {
            let w = random_weight(&g, 7000 + seed);
            let fam = fitted(&g, 0.2, 2);
            let beta = 0.6;
            let measured = sublevel_condition(&w, lag, 0.999_999, beta, &fam).unwrap();
            let alpha = measured.min_alpha.max(1e-6);
            let beta_prime = 0.9 * (1.0 - alpha).max(0.0) * beta;
            if beta_prime <= 0.0 {
                continue;
            }
            let alpha_prime = alpha + beta_prime / beta;
            for (ri, r) in fam.iter().enumerate() {
                let w_lower = w.box_integral(&r.lower_part(lag)).unwrap();
                let upper = r.upper_part(lag);
                let mut cells: Vec<(usize, f64)> = Vec::new();
                w.grid().for_each_overlap(&upper, &mut |flat, vol| {
                    cells.push((flat, vol));
                });
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (ri as u64) << 3);
                for _ in 0..3 {
                    let mut e_vol = 0.0;
                    let mut e_mass = 0.0;
                    for &(flat, vol) in &cells {
                        if rng.gen_bool(0.3) {
                            e_vol += vol;
                            e_mass += w.value(flat) * vol;
                        }
                    }
                    if e_mass < beta_prime * w_lower {
                        assert!(
                            e_vol <= alpha_prime * upper.volume() * (1.0 + 1e-12),
                            "seed {seed} rect {ri}: |E| {e_vol} vs alpha' |R+| {}",
                            alpha_prime * upper.volume()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn gr_implications_constant_weight() {
        let g = grid(6, 6);
        let w = ScalarField::constant(g.clone(), 3.0).unwrap();
        let fam = fitted(&g, 0.1, 2);
        let rep = gr_implication_check(&w, Lag::new(0.1).unwrap(), &fam, &[0.3, 0.5, 0.9], 0.5).unwrap();
        assert!(rep.passed);
    }
}
