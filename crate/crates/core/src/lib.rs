//! Exchangeable random structures: Polya urns, Chinese restaurant processes,
//! Dirichlet and GEM constructions, Ewens-Pitman partition laws and the
//! Poisson-Dirichlet correlation functions, each closed form paired with a
//! brute-force or Monte Carlo check in [`verify`].

pub mod crp;
pub mod error;
pub mod numkern;
pub mod polya;
pub mod rngdist;
pub mod verify;
pub mod weights;

pub use crp::{CrpCase, CrpParams, Partition, SeatingState};
pub use error::{Error, Result};
pub use numkern::SignedLogValue;
pub use polya::{CountVector, LabelSequence, UrnParams};
pub use rngdist::{RandomSource, SimplexVector};
pub use weights::{RankedWeights, WeightSequence};
