//! Parabolic Muckenhoupt weights, computably.
//!
//! This crate evaluates the one-sided weight theory of parabolic space-time
//! geometry on discrete grids: uncentered forward/backward maximal operators
//! with a time lag, class constants `[w]_{A_q^+(gamma)}`, the equivalent
//! A-infinity characterizations (quantitative/sublevel measure conditions
//! and the Gurov-Reshetnyak functional), reverse Holder exponent search, and
//! constructive weight factorization (a geometric-series iteration for the
//! Jones factorization and the Coifman-Rochberg recipe).
//!
//! Everything continuum-sized is replaced by an explicit finite surrogate:
//! fields are piecewise constant on a grid, and suprema over all parabolic
//! rectangles run over a deterministic [`family::RectangleFamily`].  Reported
//! constants are certified lower bounds of their continuum counterparts, and
//! every report carries the family spec and seeds needed to reproduce it.
//!
//! The `book/` directory of the repository walks through the concepts with
//! runnable examples; its code blocks compile and run as doc-tests of this
//! crate.

// Validation deliberately spells `!(x > 0.0)` rather than `x <= 0.0`: the
// negated form also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod dd;
pub mod error;
pub mod factor;
pub mod family;
pub mod field;
pub mod gen;
pub mod geometry;
pub mod maximal;
pub mod pwf;
pub mod report;
pub mod weights;

pub use error::{Error, Result};
pub use family::{FamilySpec, RectangleFamily};
pub use field::{Grid, LevelPred, LevelQuery, PrefixTable, ScalarField, Transform};
pub use geometry::{Lag, ParabolicRectangle, SpaceTimeBox};
pub use maximal::{maximal_backward, maximal_forward, maximal_oracle, Direction, MaximalResult};

// The book's code blocks double as integration tests; each chapter compiles
// against the public API above.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            pub mod $name {}
        };
    }

    chapter!(introduction, "../../../book/src/introduction.md");
    chapter!(rectangles, "../../../book/src/rectangles.md");
    chapter!(fields, "../../../book/src/fields.md");
    chapter!(maximal, "../../../book/src/maximal.md");
    chapter!(weights, "../../../book/src/weights.md");
    chapter!(reverse_holder, "../../../book/src/reverse-holder.md");
    chapter!(factorization, "../../../book/src/factorization.md");
    chapter!(cli, "../../../book/src/cli.md");
}
