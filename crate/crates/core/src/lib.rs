//! Scenario-driven smart house simulator.
//!
//! A [`project::Project`] describes a house (plan, sensor catalog, devices
//! and their placements) together with scheduled tasks and scenarios. The
//! [`engine::Simulator`] executes it deterministically on a virtual
//! millisecond clock; [`link`] talks to an external remote-controlling
//! server using the line protocol in [`wire`]; [`persistence`] reads and
//! writes project files and event logs.

pub mod engine;
pub mod ids;
pub mod link;
pub mod model;
pub mod persistence;
pub mod project;
pub mod time;
pub mod wire;

pub use engine::{compile_timeline, Simulator};
pub use project::Project;
