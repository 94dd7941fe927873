//! Subgraph extraction against brute-force path enumeration over the raw
//! triple list.

use testkit::extraction::{extract, fixture, oracle_nodes, two_hop_failures};

#[test]
fn two_hop_extraction_matches_path_enumeration() {
    let failures = two_hop_failures(0..100);
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn three_hops_recover_the_planted_intermediates() {
    for seed in 0..10 {
        let f = fixture(seed);
        let (nodes, _, _) = extract(&f, 3, None);
        assert!(nodes.contains("xs") && nodes.contains("ys"));
        assert_eq!(nodes, oracle_nodes(&f, 3));
    }
}

#[test]
fn one_hop_matches_oracle() {
    for seed in 200..220 {
        let f = fixture(seed);
        assert_eq!(extract(&f, 1, None).0, oracle_nodes(&f, 1));
    }
}

#[test]
fn insertion_order_does_not_matter() {
    for seed in 0..20 {
        let f = fixture(seed);
        let (n0, e0, _) = extract(&f, 2, None);
        let (n1, e1, _) = extract(&f, 2, Some(seed + 7));
        assert_eq!((n0, e0), (n1, e1));
    }
}
