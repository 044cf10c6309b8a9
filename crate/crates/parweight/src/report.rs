//! Report types shared by the audit operations; all serialize to JSON with a
//! stable field order so identical runs emit identical bytes.

use serde::{Deserialize, Serialize};

use crate::family::{FamilySpec, RectangleFamily};
use crate::geometry::ParabolicRectangle;

/// The rectangle attaining a family supremum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Witness {
    /// Index of the rectangle in the enumeration order of the family.
    pub index: usize,
    pub center_x: Vec<f64>,
    pub center_t: f64,
    pub half_side: f64,
    pub p: f64,
}

impl Witness {
    pub fn new(index: usize, r: &ParabolicRectangle) -> Self {
        Witness {
            index,
            center_x: r.center_x.clone(),
            center_t: r.center_t,
            half_side: r.half_side,
            p: r.p,
        }
    }
}

/// The family a constant or check was evaluated over.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilySummary {
    pub spec: FamilySpec,
    pub rectangles: usize,
}

impl FamilySummary {
    pub fn new(fam: &RectangleFamily) -> Self {
        FamilySummary {
            spec: fam.spec().clone(),
            rectangles: fam.len(),
        }
    }
}

/// A measured family constant with its witness.  The value may be
/// `+infinity`: "not in the class" is a valid, informative outcome, not an
/// error.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantReport {
    pub value: f64,
    pub witness: Witness,
    pub family: FamilySummary,
}

/// One violating rectangle of a per-rectangle check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Violation {
    pub rect_index: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub detail: String,
}

/// Outcome of a per-rectangle inequality check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckReport {
    pub passed: bool,
    /// Worst observed lhs/rhs ratio (1 is the pass boundary).
    pub worst_ratio: f64,
    pub worst_rect: Option<Witness>,
    pub checked: usize,
    pub violations: Vec<Violation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl CheckReport {
    pub fn empty() -> Self {
        CheckReport {
            passed: true,
            worst_ratio: 0.0,
            worst_rect: None,
            checked: 0,
            violations: Vec::new(),
            seed: None,
        }
    }

    /// Records one comparison `lhs <= rhs * (1 + slack)`.
    pub fn record(
        &mut self,
        fam: &RectangleFamily,
        rect_index: usize,
        lhs: f64,
        rhs: f64,
        slack: f64,
        detail: &str,
    ) {
        self.checked += 1;
        let ratio = if rhs > 0.0 { lhs / rhs } else if lhs > 0.0 { f64::INFINITY } else { 0.0 };
        if ratio > self.worst_ratio {
            self.worst_ratio = ratio;
            self.worst_rect = Some(Witness::new(rect_index, &fam.rects()[rect_index]));
        }
        if lhs > rhs * (1.0 + slack) {
            self.passed = false;
            self.violations.push(Violation {
                rect_index,
                lhs,
                rhs,
                detail: detail.to_string(),
            });
        }
    }
}
