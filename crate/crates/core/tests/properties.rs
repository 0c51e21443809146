use proptest::prelude::*;

use paracalc::littlewood_paley::{decompose_with, Cutoff};
use paracalc::paraproducts::{dealiased_product, decompose_product, ProductRule};
use paracalc::synthetic::{lacunary_jittered, smooth};
use paracalc::torus_fields::SpaceGrid;
use paracalc::word_algebra::{assign_betas, generate_alphabet, generate_words, AlphabetParams};

fn grid_strategy() -> impl Strategy<Value = SpaceGrid> {
    prop_oneof![(4u32..9).prop_map(|p| SpaceGrid::new(1, 1 << p).unwrap()), (3u32..6).prop_map(|p| SpaceGrid::new(2, 1 << p).unwrap())]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn blocks_sum_to_field(g in grid_strategy(), s in -1.0f64..1.5, seed in 0u64..1000, sharp in any::<bool>()) {
        let f = lacunary_jittered(g, s, seed).add(&smooth(g, 3, seed + 1));
        let cutoff = if sharp { Cutoff::Sharp } else { Cutoff::Smooth };
        let err = decompose_with(&f, cutoff).reconstruct().max_abs_diff(&f);
        prop_assert!(err <= 1e-12 * f.sup_norm().max(1.0), "error {err}");
    }

    #[test]
    fn three_pieces_give_the_product(g in grid_strategy(), sa in -0.8f64..1.2, sb in -0.8f64..1.2, seed in 0u64..1000) {
        let a = lacunary_jittered(g, sa, seed);
        let b = lacunary_jittered(g, sb, seed + 7).add(&smooth(g, 4, seed));
        let (pab, pi, pba) = decompose_product(ProductRule::Dealiased, &a, &b).unwrap();
        let exact = dealiased_product(&a, &b);
        prop_assert!(pab.add(&pi).add(&pba).max_abs_diff(&exact) <= 1e-12 * exact.sup_norm().max(1.0));
    }

    #[test]
    fn betas_order_words(alpha in 0.401f64..0.499, chain_cap in 0i64..3) {
        let a = generate_alphabet(AlphabetParams { alpha: 0.45, order: 3, chain_cap, axes: 1 }).unwrap();
        let w = generate_words(&a, 3);
        let t = assign_betas(&w, alpha).unwrap();
        for (i, x) in w.words.iter().enumerate() {
            prop_assert!(t.betas[i] > 0.4 && t.betas[i] < alpha);
            for (j, y) in w.words.iter().enumerate() {
                // longer words sit higher, a higher level sits lower among equal lengths
                let key = |v: &paracalc::word_algebra::Word| (v.letters.len(), std::cmp::Reverse(v.level));
                match key(x).cmp(&key(y)) {
                    std::cmp::Ordering::Greater => prop_assert!(t.betas[i] > t.betas[j]),
                    std::cmp::Ordering::Less => prop_assert!(t.betas[i] < t.betas[j]),
                    std::cmp::Ordering::Equal => prop_assert_eq!(t.betas[i], t.betas[j]),
                }
            }
        }
    }
}
