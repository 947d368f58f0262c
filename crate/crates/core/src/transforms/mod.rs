//! Legendre transforms, Moreau envelopes and rotational symmetrization.

pub mod legendre;
pub mod moreau;
pub mod symmetrize;

pub use legendre::{auto_dual_box, biconjugate_check, conjugate, conjugate_at, grid_conjugate, legendre};
pub use moreau::{grid_envelope, moreau_yosida, quadratic_envelope};
pub use symmetrize::{rotation_directions, rotational_episymmetrize};
