//! Everything outside the simulation itself: scenario files, the client
//! protocol and its TCP server.

pub mod anova_file;
pub mod bridge;
pub mod scenario_file;
pub mod serve;

pub use anova_file::{load_groups, Group, GroupData, GroupsFile};
pub use bridge::{parse_inbound, read_record, replay, write_record, Bridge, ControlEvent, Inbound, Outbound, ProtocolError, RecordedInbound, Role};
pub use scenario_file::{load_scenario, parse_scenario, LoadedScenario, RobotSpec, ScenarioError, ScenarioSpec, Violation};
pub use serve::{serve, ServeConfig, ServeError, ServeOutcome};
