//! Box and observable distances between finite metric measure spaces with
//! isometric group actions.

pub mod boxdist;
pub mod coupling;
mod flow;
pub mod group;
pub mod mmspace;
pub mod mwis;
pub mod obsdist;
pub mod scalar;
pub mod search;

pub use boxdist::{BoxError, DPiCertificate, MapPair, Side};
pub use coupling::{Coupling, CouplingError, Relation};
pub use group::{GroupError, MMAction, Perm};
pub use obsdist::ObsError;
pub use mmspace::{FiniteMMSpace, LipFunction, SpaceError};
pub use scalar::Scalar;
pub use search::SearchConfig;

pub type Space = FiniteMMSpace<f64>;
pub type Action = MMAction<f64>;
pub type Plan = Coupling<f64>;
pub type SpaceF32 = FiniteMMSpace<f32>;
pub type ActionF32 = MMAction<f32>;
