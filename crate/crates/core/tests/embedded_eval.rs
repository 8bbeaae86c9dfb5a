mod oracles;

use std::collections::HashSet;
use std::time::Duration;

use kgqa_core::kgclient::TripleStore;
use oracles::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn check(seed: u64, max_triples: usize) -> Result<(), TestCaseError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let triples = random_store(&mut rng, max_triples);
    let store = TripleStore::new(triples.clone());
    let mut distinct: Vec<_> = triples.clone();
    distinct.sort();
    distinct.dedup();
    let bgp = random_bgp(&mut rng, &distinct);
    let vars = bgp_variables(&bgp);
    let query = bgp_to_sparql(&bgp, &vars);
    let expected = project(&reference_bgp(&distinct, &bgp), &vars);
    let table = store
        .evaluate(&query, Duration::from_secs(30))
        .map_err(|e| TestCaseError::fail(format!("{query}: {e}")))?;
    prop_assert_eq!(&table.variables, &vars);
    let got: HashSet<Vec<Option<String>>> = table.rows.into_iter().collect();
    prop_assert_eq!(got, expected, "query {}", query);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn embedded_matches_reference(seed in any::<u64>()) {
        check(seed, 400)?;
    }
}

#[test]
fn embedded_matches_reference_on_large_stores() {
    for seed in 0..20 {
        check(1_000 + seed, 1000).unwrap();
    }
}
