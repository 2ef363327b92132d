//! Exact entropy computations for nonautonomous dynamical systems on the
//! interval and the circle.
//!
//! A system is a time-indexed sequence of piecewise-affine maps with rational
//! data. Everything that can be exact is: map evaluation and composition,
//! preimages, pushforwards of piecewise-constant measures, and the masses of
//! partition cells. Floating point enters only at the final `-Σ p log₂ p` and
//! in metric comparisons of orbit segments.
//!
//! The crate is organised as follows:
//!
//! * [`interval`], [`map`], [`schedule`], [`system`]: exact systems and their
//!   preimage calculus.
//! * [`measure`], [`partition`], [`information`]: measures, partitions,
//!   refinements and Shannon-type quantities.
//! * [`trace`], [`certificate`]: measure-theoretic entropy of partition
//!   sequences and separated-core certificates.
//! * [`topological`]: spanning/separated bounds, open-cover counts, Lebesgue
//!   numbers, the Lipschitz bound, and expanding circle maps.
//! * [`catalog`]: ready-made systems, including the `f`/`g` example on `m_n =
//!   2^{n²}` whose entropy is `log₂ 3`.

pub mod catalog;
pub mod certificate;
pub mod far;
pub mod information;
pub mod interval;
pub mod map;
pub mod measure;
pub mod partition;
pub mod rational;
pub mod schedule;
pub mod system;
pub mod topological;
pub mod trace;

pub use interval::{Interval, IntervalSet};
pub use map::{AffinePiece, PwAffineMap};
pub use measure::{MeasureSequence, PwConstMeasure};
pub use partition::{Partition, PartitionSequence};
pub use rational::Rational;
pub use system::{NdSystem, Space};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input outside a function's domain, or a malformed object.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parse error: {0}")]
    Parse(String),
    /// Caller misuse: bad parameters, mismatched inputs.
    #[error("usage error: {0}")]
    Usage(String),
    /// A configured size limit would be exceeded.
    #[error("budget exceeded: {what} (limit {limit})")]
    Budget { what: String, limit: usize },
    #[error("composition not representable: {0}")]
    Composition(String),
}

/// Upper limit on the number of cells or pieces any single object may hold.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    pub cells: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { cells: 50_000_000 }
    }
}

impl Budget {
    pub fn check(&self, what: &str, used: usize) -> Result<(), Error> {
        if used > self.cells {
            Err(Error::Budget { what: format!("{what}: {used}"), limit: self.cells })
        } else {
            Ok(())
        }
    }
}
