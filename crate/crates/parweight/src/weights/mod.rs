//! Muckenhoupt class constants, the A-infinity condition audit, reverse
//! Holder exponent search, and weighted norm inequalities for the parabolic
//! maximal operators.

mod ainfty;
mod constants;
mod norms;
mod rhi;

pub use ainfty::{
    gr_implication_check, gurov_reshetnyak, quantitative_measure_check, sublevel_condition,
    ESetConfig, GrImplicationReport, MeasureCheckReport, SublevelReport,
};
pub use constants::{
    a1_minus_constant, a1_plus_constant, a1_via_maximal, aq_minus_constant, aq_minus_per_rectangle,
    aq_plus_constant, aq_plus_per_rectangle, closure_check, dual_weight, ClosureReport, Exponents,
};
pub use norms::{strong_type_ratio, weak_type_ratio, LambdaGrid, StrongTypeReport, WeakTypeReport};
pub use rhi::{
    reverse_holder_check, reverse_holder_search, reverse_holder_translated, self_improvement,
    RhiFrontier, RhiReport, SelfImprovementReport,
};

/// Relative slack applied when asserting per-rectangle inequalities that are
/// exact in real arithmetic; absorbs floating-point rounding only.
pub(crate) const FP_SLACK: f64 = 1e-12;
