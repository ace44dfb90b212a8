//! Visuohaptic volume engine.
//!
//! A [`Volume`] of RGBA voxels is explored with a point probe. Each tick,
//! [`haptics::haptic_tick`] computes a proxy-based contact force scaled by the
//! luminosity of the touched material, and [`sculpt::sculpt_step`] removes
//! material under the probe. [`session`] drives both at a fixed rate from a
//! recorded or live trajectory, [`stack`] reads and writes slice stacks, and
//! [`mesher`] turns the (carved) volume into a binary STL.

pub mod error;
pub mod haptics;
pub mod mesher;
pub mod phantom;
pub mod sculpt;
pub mod session;
pub mod stack;
pub mod volume;

pub use error::{Error, Result};
pub use haptics::{ForceSample, HapticConfig, ProbeState, ProxyState};
pub use mesher::{export_stl, polygonize, MeshModel};
pub use sculpt::{carve, sculpt_step, CarveReport, DirtyRegion};
pub use session::{load_trajectory, run_session, write_trace, Session, SessionConfig, SessionOutput, TrajectoryFrame};
pub use stack::{export_stack, import_stack, StackMeta};
pub use volume::{Axis, Volume, Voxel, VoxelIndex};

/// World-space point or vector, millimeters (or newtons for forces).
pub type Vec3 = nalgebra::Vector3<f64>;
