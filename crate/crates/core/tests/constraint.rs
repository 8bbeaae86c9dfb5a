mod oracles;

use std::collections::HashSet;
use std::time::Duration;

use kgqa_core::kgclient::fetch_candidates;
use kgqa_core::kgclient::Connection;
use kgqa_core::skeleton::{parse_skeleton, Position};
use oracles::*;

#[test]
fn fixture_slots_match_brute_force() {
    let store = toy_store();
    let triples: Vec<_> = store.triples().collect();
    let conn = Connection::embedded(store);
    let slots = constraint_slot_skeletons();
    assert!(slots.len() >= 20);
    let mut positions = HashSet::new();
    for text in slots {
        let sk = parse_skeleton(&text).unwrap();
        let slot = sk.next_slot().unwrap();
        positions.insert(slot.position);
        let cq = sk.constraint_query(slot.slot_id).unwrap();
        assert!(cq.supported, "{text}");
        let got = fetch_candidates(&conn, &cq, 100_000, Duration::from_secs(5)).unwrap();
        assert!(!got.truncated);
        let want = brute_force_candidates(&triples, &sk, slot.slot_id);
        assert!(!want.is_empty(), "{text}");
        assert_eq!(got.iris, want, "{text}");
    }
    for p in [Position::Subject, Position::Predicate, Position::Object] {
        assert!(positions.contains(&p), "no fixture for {p:?}");
    }
}
