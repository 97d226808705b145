pub mod dsl;
pub mod fixtures;
pub mod report;
pub mod schedule_text;

pub use dsl::{parse_workload, print_workload, ParseError};
pub use schedule_text::{parse_schedule, print_schedule, ParsedSchedule};
