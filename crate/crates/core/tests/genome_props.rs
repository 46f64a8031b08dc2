mod common;

use axc_core::generators::FunctionalModel;
use axc_core::genome::{parse, serialize, Node};
use axc_core::metrics::{error_report, sampled_error_report};
use axc_core::{CgpParams, ErrorReport, FunctionSet, GateCostTable, Genome, Simulator};
use common::naive_eval;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn genome_strategy() -> impl Strategy<Value = Genome> {
    (
        1usize..=10,
        1usize..=8,
        1usize..=4,
        1usize..=20,
        0.0f64..=1.0,
        1usize..=10,
        any::<u64>(),
    )
        .prop_map(|(ni, no, rows, cols, lb_frac, fns, seed)| {
            let lb = ((cols as f64 * lb_frac).ceil() as usize).clamp(1, cols);
            let p = CgpParams::with_levels_back(ni, no, rows, cols, lb).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Genome::random(p, FunctionSet::prefix(fns).unwrap(), &mut rng)
        })
}

fn genes(g: &Genome) -> Vec<u32> {
    let mut v: Vec<u32> = g.nodes().iter().flat_map(|n| [n.in1, n.in2, n.func as u32]).collect();
    v.extend_from_slice(g.outputs());
    v
}

fn area_by_hand(g: &Genome) -> f64 {
    g.active_mask()
        .iter()
        .zip(g.nodes())
        .filter(|(&a, _)| a)
        .map(|(_, n)| match n.func {
            2 | 3 | 5 | 6 => 1.0,
            4 | 7 => 2.0,
            1 => 0.5,
            _ => 0.0,
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn decode_matches_recursive_interpretation(g in genome_strategy()) {
        prop_assert!(g.is_valid());
        let c = g.decode().unwrap();
        let table = Simulator::default().truth_table(&c).unwrap();
        for (x, &y) in table.iter().enumerate() {
            prop_assert_eq!(y, naive_eval(&g, x as u64), "input {}", x);
        }
    }

    #[test]
    fn text_round_trip(g in genome_strategy()) {
        let text = serialize(&g);
        prop_assert_eq!(parse(&text).unwrap(), g);
    }

    #[test]
    fn mutation_stays_valid_and_bounded(g in genome_strategy(), h in 1usize..=8, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let child = g.mutate(h, &mut rng);
        prop_assert!(child.is_valid());
        let changed = genes(&g).iter().zip(genes(&child)).filter(|(a, b)| **a != *b).count();
        prop_assert!(changed <= h);
    }

    #[test]
    fn inactive_genes_do_not_change_the_phenotype(g in genome_strategy(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let other = Genome::random(*g.params(), g.fnset().clone(), &mut rng);
        let active = g.active_mask();
        let nodes: Vec<Node> = g
            .nodes()
            .iter()
            .zip(other.nodes())
            .zip(&active)
            .map(|((&mine, &theirs), &a)| if a { mine } else { theirs })
            .collect();
        let twin = Genome::new(*g.params(), g.fnset().clone(), nodes, g.outputs().to_vec()).unwrap();
        prop_assert_eq!(twin.decode().unwrap(), g.decode().unwrap());
        let table = GateCostTable::default();
        prop_assert_eq!(table.area(&twin.decode().unwrap()).unwrap(), area_by_hand(&g));
    }

    #[test]
    fn error_report_invariants(g in genome_strategy()) {
        let ni = g.params().inputs();
        let no = g.params().outputs();
        let reference = FunctionalModel::new("xor-fold", ni, no, move |x| (x ^ (x >> 1)) & ((1 << no) - 1));
        let r: ErrorReport = error_report(&g.decode().unwrap(), &reference, &Simulator::default()).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.er));
        prop_assert!(r.mae <= r.wce as f64);
        prop_assert!(r.mse <= (r.wce as f64).powi(2));
        prop_assert!(r.mre <= r.wcre + 1e-12);
        prop_assert_eq!(r.er == 0.0, r.is_zero());
    }
}

#[test]
fn sampled_reports_repeat_and_bracket_the_exhaustive_value() {
    let (model, _) = axc_core::generators::truncated_multiplier(8, 7);
    let exact = FunctionalModel::exact_multiplier(8);
    let a: ErrorReport = sampled_error_report(&model, &exact, 1_000_000, 3).unwrap();
    let b: ErrorReport = sampled_error_report(&model, &exact, 1_000_000, 3).unwrap();
    assert_eq!(a, b);
    assert!((a.er_pct() - 74.609375).abs() <= 0.5, "{}", a.er_pct());
    assert!(a.wce <= 509);
    assert!(sampled_error_report::<f64, _, _>(&model, &exact, 999, 3).is_err());
}

#[test]
fn mutation_rate_changes_at_most_h_genes_over_many_draws() {
    let g = axc_core::generators::array_multiplier(4);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..2000 {
        let h = rng.random_range(1..=5);
        let child = g.mutate(h, &mut rng);
        let changed = genes(&g).iter().zip(genes(&child)).filter(|(a, b)| **a != *b).count();
        assert!(changed <= h && child.is_valid());
    }
}
