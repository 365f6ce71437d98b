//! Physics-aware assembly sequence planning for interlocking bricks.
//!
//! Given a voxelized target and a brick inventory, the crate plans placement
//! sequences whose every step is checked by an action mask combining target,
//! collision, inventory, operability and static-stability constraints.

pub mod error;
pub mod geometry;
pub mod io;
pub mod lp;
pub mod mask;
pub mod mcts;
pub mod plan;
pub mod rl;
pub mod shapegen;
pub mod stability;
pub mod state;
pub mod validate;

pub use error::{Error, Result};
pub use geometry::{Action, ActionSpace, BrickCatalog, BrickType, Cell, Dims, Footprint, Orientation, VoxelGrid};
pub use state::{AssemblyGraph, AssemblyState, Edge, EpisodeOutcome, Inventory, Support};
