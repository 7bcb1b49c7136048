//! Property tests over the public API: things that must hold for *any* input,
//! checked on randomized cases.

use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

use problab_core::bunkbed::parse_exact_prob;
use problab_core::graphs::{graph6_string, parse_graph6, SimpleGraph};
use problab_core::lattice::LatticeKind;
use problab_core::randstat::estimate_proportion;
use problab_core::saw::{SawSampler, Walk};
use problab_core::RngStream;

/// Random simple graph on up to 8 vertices, edges chosen by a bitmask.
fn arb_graph() -> impl Strategy<Value = SimpleGraph> {
    (1u32..=8, any::<u64>()).prop_map(|(n, mask)| {
        let mut edges = Vec::new();
        let mut bit = 0;
        for u in 0..n {
            for v in (u + 1)..n {
                if mask >> (bit % 64) & 1 == 1 {
                    edges.push((u, v));
                }
                bit += 1;
            }
        }
        SimpleGraph::new(n, &edges).expect("edge list is canonical by construction")
    })
}

proptest! {
    // sampler construction dominates the cost here, so fewer cases suffice
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn saw_samples_are_valid_anchored_walks(seed in any::<u64>(), n in 1usize..=30) {
        let mut sampler = SawSampler::new(LatticeKind::Square, n).unwrap();
        let mut stream = RngStream::derive(seed, 90);
        let walk = sampler.sample(&mut stream);
        prop_assert!(walk.is_valid());
        prop_assert_eq!(walk.steps(), n);
        let start = walk.sites[0];
        prop_assert_eq!((start.x, start.y), (0, 0));
    }

    #[test]
    fn corrupting_a_walk_fails_validation(seed in any::<u64>(), n in 2usize..=20) {
        let mut sampler = SawSampler::new(LatticeKind::Square, n).unwrap();
        let mut stream = RngStream::derive(seed, 91);
        let walk = sampler.sample(&mut stream);

        // repeat an interior site: no longer self-avoiding
        let mut sites = walk.sites.clone();
        sites.push(sites[1]);
        prop_assert!(Walk::from_sites(LatticeKind::Square, sites).is_err());

        // teleport the endpoint: breaks adjacency
        let mut sites = walk.sites.clone();
        sites.last_mut().unwrap().x += 1000;
        prop_assert!(Walk::from_sites(LatticeKind::Square, sites).is_err());
    }
}

proptest! {
    #[test]
    fn graph6_roundtrips_any_small_graph(g in arb_graph()) {
        let encoded = graph6_string(&g).unwrap();
        let back = parse_graph6(&encoded).unwrap();
        prop_assert_eq!(back.vertex_count(), g.vertex_count());
        prop_assert_eq!(back.edges(), g.edges());
    }

    #[test]
    fn rng_streams_are_pure_functions_of_their_salts(
        master in any::<u64>(),
        id in any::<u64>(),
        salt in prop::collection::vec(any::<u64>(), 1..4),
    ) {
        let take = |s: &mut RngStream| (0..8).map(|_| s.next_u64()).collect::<Vec<_>>();
        let mut a = RngStream::derive(master, id).substream(&salt);
        let mut b = RngStream::derive(master, id).substream(&salt);
        prop_assert_eq!(take(&mut a), take(&mut b));

        let mut twisted = salt.clone();
        *twisted.last_mut().unwrap() ^= 1;
        let mut c = RngStream::derive(master, id).substream(&twisted);
        let mut a2 = RngStream::derive(master, id).substream(&salt);
        prop_assert_ne!(take(&mut a2), take(&mut c));
    }

    #[test]
    fn uniform01_stays_in_the_half_open_interval(seed in any::<u64>()) {
        let mut stream = RngStream::derive(seed, 92);
        for _ in 0..64 {
            let x = stream.uniform01();
            prop_assert!((0.0..1.0).contains(&x));
        }
    }

    #[test]
    fn wilson_intervals_are_ordered_and_contained(
        trials in 1u64..=10_000,
        frac in 0.0f64..=1.0,
    ) {
        let successes = (frac * trials as f64).round() as u64;
        let ci = estimate_proportion(successes, trials, 0.95).unwrap();
        prop_assert!(0.0 <= ci.lo && ci.lo <= ci.point);
        prop_assert!(ci.point <= ci.hi && ci.hi <= 1.0);
        prop_assert_eq!(ci.point, successes as f64 / trials as f64);
        // widening confidence widens the interval
        let wide = estimate_proportion(successes, trials, 0.99).unwrap();
        prop_assert!(wide.lo <= ci.lo && ci.hi <= wide.hi);
    }

    #[test]
    fn exact_probability_parsing_roundtrips(num in 0u32..=500, den in 1u32..=500) {
        prop_assume!(num <= den);
        let text = format!("{num}/{den}");
        let parsed = parse_exact_prob(&text).unwrap();
        let expected = BigRational::new(BigInt::from(num), BigInt::from(den));
        prop_assert_eq!(parsed.value(), &expected);
    }
}
