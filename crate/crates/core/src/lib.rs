pub mod graph;
pub mod model;
pub mod schedule;
pub mod tx_robust;
pub mod template_robust;
pub mod tools;
pub mod io;
