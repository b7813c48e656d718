//! Reproducible checks of the computable content of each result, each
//! emitting a [`Report`] with a recomputable verdict.

mod atoms;
mod counterexample;
mod first_order;
mod invariant;
mod mdim;
pub mod report;

pub use atoms::{
    atomless_scan, cantor_field, cantor_pieces, cantor_report, AtomSample, AtomScanReport, CantorReport, ATOM_FRACTION,
    ATOM_WIDTH, MAX_CANTOR_DEPTH,
};
pub use counterexample::{non_frechet_counterexample, sawtooth, sawtooth_image, CounterexampleReport, SAWTOOTH_MODES};
pub use first_order::{
    bilipschitz_check, convex_split_check, derivative_field, derivative_slope_check, random_ball_pairs,
    wasserstein_report, BilipschitzReport, DerivativeReport, PairSample, WassersteinReport, DERIVATIVE_GRID,
    SUPERLINEAR_SLOPE,
};
pub use invariant::{
    family_member, lacunary_field, FamilyParams, lacunary_overlap, nearly_invariant_family, spectrum_report, DriftRow,
    FieldSummary, NearlyInvariantReport, SpectrumReport, EIGEN_RESIDUAL_TOL, RG_ITERATIONS,
};
pub use mdim::{
    admissible_tuples, antecedent, in_a_k, mdim_separated_sets, separation_scale, SeparatedSetReport, LEVEL_CAP,
    PAIR_CAP,
};
pub use report::{Check, Report, SlopeReport, Verdict, SCHEMA};
