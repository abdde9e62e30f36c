mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use slotalloc_core::fixtures;
use slotalloc_core::model::{
    bids_from_json, bids_to_json, scenario_from_json, scenario_to_json, validate_bid, validate_scenario, Bid,
};
use slotalloc_core::{Cents, ClockTime, Error};

#[test]
fn shipped_scenario_is_valid() {
    let s = fixtures::scenario();
    assert!(validate_scenario(&s).is_empty());
    assert_eq!(s.slots.iter().map(Vec::len).collect::<Vec<_>>(), [35, 35]);
    assert_eq!(s.time(0, 0), ClockTime::hm(6, 15));
    assert_eq!(s.time(0, 34), ClockTime::hm(23, 15));
    assert!((0..3).all(|o| s.capacity(o, 0) == 8 && s.capacity(o, 1) == 8));
}

#[test]
fn oversubscribed_shares_are_reported() {
    let s = common::toy(&[0.6, 0.6], 10);
    let v = validate_scenario(&s);
    assert!(v.iter().any(|x| x.rule.contains("capacity oversubscription")), "{v:?}");
}

#[test]
fn negative_fare_is_reported() {
    let mut s = common::toy(&[0.5], 4);
    s.fare[0][2] = Cents(-1);
    let v = validate_scenario(&s);
    assert!(v.iter().any(|x| x.rule.contains("fare ≥ 0")), "{v:?}");
}

#[test]
fn bid_capacity_bound() {
    let s = fixtures::scenario();
    let eight = Bid::from_indices("RU1", vec![(0..8).collect(), (0..8).collect()]);
    let nine = Bid::from_indices("RU1", vec![(0..9).collect(), vec![]]);
    assert!(validate_bid(&s, &eight).unwrap().is_empty());
    assert_eq!(validate_bid(&s, &nine).unwrap().len(), 1);
    assert!(validate_bid(&s, &Bid::empty("RU2", 2)).unwrap().is_empty());
    assert!(matches!(validate_bid(&s, &Bid::empty("RU9", 2)), Err(Error::UnknownUndertaking(_))));
}

#[test]
fn shipped_oversubscribed_bids_fail_validation() {
    let s = fixtures::scenario();
    let text = include_str!("../data/bids_oversubscribed.json");
    let bids = bids_from_json(&s, text).unwrap();
    let v: Vec<_> = bids.iter().flat_map(|b| validate_bid(&s, b).unwrap()).collect();
    assert_eq!(v.len(), 1, "{v:?}");
}

#[test]
fn bids_outside_the_grid_are_rejected() {
    let s = fixtures::scenario();
    let err = bids_from_json(&s, r#"{"RU1": {"MAD-BCN": ["07:40"], "BCN-MAD": []}}"#).unwrap_err();
    assert!(matches!(err, Error::UnknownSlot { .. }), "{err}");
    let err = bids_from_json(&s, r#"{"RU1": {"MAD-BCN": ["7:45"], "BCN-MAD": []}}"#).unwrap_err();
    assert!(err.to_string().contains("zero-padded HH:MM"), "{err}");
    let err = bids_from_json(&s, r#"{"RU1": {"MAD-SEV": ["07:45"]}}"#).unwrap_err();
    assert!(matches!(err, Error::UnknownOdPair(_)), "{err}");
}

#[test]
fn scenario_json_round_trip() {
    let s = fixtures::scenario();
    let again = scenario_from_json(&scenario_to_json(&s).unwrap()).unwrap();
    assert_eq!(s, again);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let c = common::random_case(&mut rng, (1, 4), (1, 3), (2, 12), 12);
        let text = scenario_to_json(&c.scenario).unwrap();
        assert_eq!(scenario_from_json(&text).unwrap(), c.scenario);
        let bids = bids_from_json(&c.scenario, &bids_to_json(&c.scenario, &c.bids).unwrap()).unwrap();
        assert_eq!(bids, c.bids);
    }
}

#[test]
fn unknown_scenario_keys_are_rejected() {
    let mut v: serde_json::Value = serde_json::from_str(fixtures::SCENARIO_JSON).unwrap();
    v["surprise"] = serde_json::json!(1);
    assert!(scenario_from_json(&v.to_string()).is_err());
}

proptest! {
    #[test]
    fn removing_a_request_keeps_a_bid_valid(seed in any::<u64>(), drop in any::<prop::sample::Index>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = common::random_case(&mut rng, (1, 3), (1, 2), (2, 12), 20);
        for b in &c.bids {
            prop_assert!(validate_bid(&c.scenario, b).unwrap().is_empty());
            let mut smaller = b.clone();
            let all: Vec<(usize, usize)> =
                b.requested.iter().enumerate().flat_map(|(od, r)| r.iter().map(move |&x| (od, x))).collect();
            if !all.is_empty() {
                let (od, x) = all[drop.index(all.len())];
                smaller.requested[od].remove(&x);
                prop_assert!(validate_bid(&c.scenario, &smaller).unwrap().is_empty());
            }
        }
    }

    #[test]
    fn clock_times_round_trip(m in 0u32..1440) {
        let t = ClockTime(m);
        prop_assert_eq!(t.to_string().parse::<ClockTime>().unwrap(), t);
    }
}
