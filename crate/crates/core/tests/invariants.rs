//! Randomized invariants across modules.

use grafting_core::brancov::{parse_map, rh_verify, structure_extension_map, Poly, RationalMap};
use grafting_core::fixtures::{self, random_carrier, random_graft_sequence, random_presentation};
use grafting_core::foldgraph::LabeledGraph;
use grafting_core::graftcalc::GraftingPresentation;
use grafting_core::moebius::{Complex, SpherePoint};
use grafting_core::word::{GroupWord, Letter};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn arb_word(rank: usize, max_len: usize) -> impl Strategy<Value = GroupWord> {
    prop::collection::vec((1..=rank, any::<bool>()), 0..=max_len).prop_map(|v| {
        GroupWord::from_letters(v.into_iter().map(|(i, s)| if s { Letter::pos(i) } else { Letter::neg(i) }).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reduction_is_idempotent_and_inverse_cancels(w in arb_word(3, 12)) {
        let r = w.reduced();
        prop_assert_eq!(r.reduced(), r.clone());
        prop_assert!(r.letters().windows(2).all(|p| p[1] != p[0].inverse()));
        prop_assert!(w.concat(&w.inverse()).reduced().letters().is_empty());
    }

    #[test]
    fn nonempty_words_are_admissible(w in arb_word(2, 8)) {
        // The rank-2 group passes the loxodromic check, so the numeric
        // test must agree with the algebraic one.
        let p = fixtures::dumbbell_presentation();
        let nonempty = !w.reduced().letters().is_empty();
        prop_assert_eq!(p.parts().word_is_admissible(&w), nonempty);
    }

    #[test]
    fn handlebody_genus_is_cycle_rank(seed in any::<u64>(), g in 1usize..5, k in 0usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let graph = LabeledGraph::random_blowup(g, k, &mut rng).unwrap();
        prop_assert_eq!(graph.handlebody_summary().genus, graph.cycle_rank());
        let (folded, _) = graph.fold_to_completion();
        prop_assert_eq!(folded.handlebody_summary().genus, g as i64);
    }

    #[test]
    fn leaf_diameters_shrink_along_branches(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = rng.gen_range(1..=3);
        let tree = fixtures::rank_group(g).limit_set_approx(5, 1_000_000).unwrap().tree;
        for n in &tree.nodes {
            if let Some(p) = n.parent {
                let (_, r) = n.disk.center_radius().unwrap();
                let (_, pr) = tree.nodes[p].disk.center_radius().unwrap();
                prop_assert!(r <= pr + 1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn grafting_preserves_euler_and_round_trips(seed in any::<u64>(), g in 2usize..4, steps in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = random_presentation(g, steps, &mut rng);
        let chi = 2 - 2 * g as i64;
        let seq = random_graft_sequence(start, 3, &mut rng).unwrap();
        for p in &seq {
            prop_assert_eq!(p.euler_characteristic(), chi);
            prop_assert!(p.verify().passed(), "{}", p.verify());
            // One pass may renumber slots; after that the round trip is exact.
            let q = GraftingPresentation::assemble(p.split()).unwrap();
            prop_assert_eq!(q.pieces(), p.pieces());
            prop_assert_eq!(q.loops().len(), p.loops().len());
            prop_assert_eq!(GraftingPresentation::assemble(q.split()).unwrap(), q);
        }
        if let Some(carrier) = random_carrier(seq.last().unwrap(), &mut rng, 12) {
            let last = seq.last().unwrap();
            if let Ok(next) = last.graft_loop(carrier) {
                prop_assert_eq!(next.euler_characteristic(), chi);
            }
        }
    }

    #[test]
    fn fibers_have_full_multiplicity(re in -3.0f64..3.0, im in -3.0f64..3.0, which in 0usize..4) {
        let f = parse_map(["z^3 - 2z + 1", "z + 1/z", "(z^2 + 1)/(z - 2)", "(2z^3 + i)/(z^2 - 0.5)"][which]).unwrap();
        let w = SpherePoint::finite(Complex::new(re, im));
        let fiber = f.fiber(&w).unwrap();
        prop_assert_eq!(fiber.len(), f.degree());
        for z in &fiber {
            prop_assert!(f.apply(z).chordal_distance(&w) < 1e-7);
        }
    }

    #[test]
    fn extension_maps_balance(re in -2.0f64..2.0, im in -2.0f64..2.0, d in 1u32..=8) {
        let f = structure_extension_map(Complex::new(re, im), d).unwrap();
        prop_assert!(rh_verify(&f));
    }

    #[test]
    fn random_polynomials_balance(coeffs in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 3..7)) {
        let mut c: Vec<Complex> = coeffs.into_iter().map(|(a, b)| Complex::new(a, b)).collect();
        let last = c.len() - 1;
        c[last] = Complex::new(1.0, 0.0);
        let f = RationalMap::polynomial(Poly::new(c)).unwrap();
        prop_assert!(rh_verify(&f), "{}", f);
    }
}
