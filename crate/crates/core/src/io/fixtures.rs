//! Built-in benchmark workloads.

use crate::io::dsl::parse_workload;
use crate::model::Workload;

pub const SMALLBANK: &str = include_str!("../../fixtures/smallbank.rct");
pub const SMALLBANK_PROMOTED: &str = include_str!("../../fixtures/smallbank-promoted.rct");
pub const TPCC_KV: &str = include_str!("../../fixtures/tpcc-kv.rct");
pub const TPCC_KV_PROMOTED_ATTR: &str = include_str!("../../fixtures/tpcc-kv-promoted-attr.rct");
pub const TPCC_KV_PROMOTED_TUPLE: &str = include_str!("../../fixtures/tpcc-kv-promoted-tuple.rct");

/// `(name, DSL text)` for every shipped fixture.
pub const ALL: [(&str, &str); 5] = [
    ("smallbank", SMALLBANK),
    ("smallbank-promoted", SMALLBANK_PROMOTED),
    ("tpcc-kv", TPCC_KV),
    ("tpcc-kv-promoted-attr", TPCC_KV_PROMOTED_ATTR),
    ("tpcc-kv-promoted-tuple", TPCC_KV_PROMOTED_TUPLE),
];

pub fn source(name: &str) -> Option<&'static str> {
    ALL.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

pub fn load(name: &str) -> Option<Workload> {
    source(name).map(|text| parse_workload(text).expect("shipped fixtures parse"))
}

pub fn smallbank() -> Workload {
    parse_workload(SMALLBANK).expect("shipped fixtures parse")
}

pub fn tpcc_kv() -> Workload {
    parse_workload(TPCC_KV).expect("shipped fixtures parse")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::dsl::print_workload;
    use crate::model::{validate_workload, Granularity};

    #[test]
    fn fixtures_validate_and_round_trip() {
        for (name, text) in ALL {
            let w = parse_workload(text).unwrap();
            assert!(validate_workload(&w).is_ok(), "{name}");
            assert!(crate::model::validate_workload_at(&w, Granularity::Tuple).is_ok(), "{name}");
            assert_eq!(parse_workload(&print_workload(&w)).unwrap(), w, "{name}");
        }
    }
}
