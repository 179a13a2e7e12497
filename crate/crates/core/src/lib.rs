//! Visual route navigation workbench.
//!
//! Three heading-recovery methods over panoramic views:
//! - [`compass`]: rotational image difference against a single goal view.
//! - [`perfectmem`]: best match against every stored route snapshot.
//! - [`mlpnav`]: a feed-forward familiarity classifier scanned over rotations.
//!
//! Views come from [`world`], a deterministic skyline renderer of tussock-like
//! occluders, and are prepared by [`imgcore`].

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN

pub mod compass;
pub mod error;
pub mod imgcore;
pub mod mlpnav;
pub mod perfectmem;
pub mod stats;
pub mod world;

pub use error::{Error, Result};
