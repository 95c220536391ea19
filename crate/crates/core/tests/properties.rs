mod common;

use common::props::{call_round_trip, detection_matches_brute_force, grasp_rate, nav_contracts};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn behaviours_terminate_and_keep_their_postconditions(seed in any::<u64>()) {
        prop_assert_eq!(nav_contracts(seed), Ok(()));
    }

    #[test]
    fn detections_match_brute_force_geometry(seed in any::<u64>()) {
        prop_assert_eq!(detection_matches_brute_force(seed), Ok(()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn calls_survive_format_and_parse(seed in any::<u64>()) {
        prop_assert_eq!(call_round_trip(seed), Ok(()));
    }
}

#[test]
fn grasp_rate_matches_base_success() {
    let (rate, base) = grasp_rate(10_000, 11);
    assert_eq!(base, 0.86);
    assert!((rate - base).abs() <= 0.02, "rate {rate}");
}
