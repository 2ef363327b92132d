//! Topological entropy: spanning and separated sets, open-cover counts,
//! Lebesgue numbers, the Lipschitz upper bound and expanding circle maps.

mod circle;
mod cover;
mod lipschitz;
mod spanning;

pub use circle::{expanding_circle_entropies, CircleEntropies};
pub use cover::{
    cover_refinement_count, lebesgue_number, min_set_cover, CoverReport, CoverSequence, SetCoverResult,
};
pub use lipschitz::{lipschitz_bound_far, lipschitz_bound_trace, lipschitz_upper_bound, LipschitzTrace};
pub use spanning::{entropy_from_spanning, eps_monotone, spanning_bounds, SpanningReport, SpanningRow, SpanningTrace};
