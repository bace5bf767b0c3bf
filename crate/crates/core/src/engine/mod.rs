//! Scenario engine: tasks, delay-chained scenarios and the discrete-event
//! executor that runs them on a virtual clock.

mod clock;
mod scenario;
mod sim;
mod timeline;

pub use clock::{ClockMode, Pacer, SimClock};
pub use scenario::{EntryTarget, FlatTask, Scenario, ScenarioEntry, ScheduledTask, TaskAction};
pub use sim::{EngineError, InboxItem, LogEntry, Notification, Outcome, Simulator};
pub use timeline::{compile_timeline, Provenance, SimEvent};
