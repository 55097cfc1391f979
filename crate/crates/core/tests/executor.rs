mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use kbqa::kb::{brute_force_execute, execute, KnowledgeBase};
use kbqa::query_graph::{canonicalize, parse_logical_form, to_inline_logical_form, to_logical_form, QueryGraph};

use common::{random_graph, random_kb};

fn instance(seed: u64) -> (KnowledgeBase, QueryGraph, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (kb, n) = random_kb(&mut rng, 60);
    let g = random_graph(&mut rng, n, 4);
    (kb, g, rng)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matches_brute_force(seed in any::<u64>()) {
        let (kb, g, _) = instance(seed);
        prop_assert_eq!(execute(&kb, &g).ok(), brute_force_execute(&kb, &g).ok());
    }

    #[test]
    fn edge_order_is_irrelevant(seed in any::<u64>()) {
        let (kb, g, mut rng) = instance(seed);
        let mut shuffled = g.clone();
        shuffled.edges.shuffle(&mut rng);
        prop_assert_eq!(execute(&kb, &g).ok(), execute(&kb, &shuffled).ok());
    }

    #[test]
    fn canonical_forms_keep_answers(seed in any::<u64>()) {
        let (kb, g, _) = instance(seed);
        prop_assume!(g.validate().is_ok());
        let answers = execute(&kb, &g).unwrap();
        let canon = canonicalize(&g).unwrap();
        prop_assert_eq!(&execute(&kb, &canon).unwrap(), &answers);
        for text in [to_logical_form(&g).unwrap(), to_inline_logical_form(&g).unwrap()] {
            let back = parse_logical_form(&text).unwrap();
            prop_assert_eq!(&execute(&kb, &back).unwrap(), &answers);
            prop_assert_eq!(to_logical_form(&back).unwrap(), to_logical_form(&g).unwrap());
        }
    }
}
