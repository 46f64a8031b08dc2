use std::collections::{BTreeMap, HashSet};

use axc_core::evolve::ErrorMetric;
use axc_core::generators::{array_multiplier, bam_multiplier, truncated_multiplier, BamSpec};
use axc_core::library::{
    dedup_phenotypes, load_manifest, pareto_filter, pareto_indices, save_manifest, select_even_spread_indices,
    union_dedup_selection, CostAxis, Family, LibraryEntry, LibraryError, Verify, UNION_METRICS,
};
use axc_core::GateCostTable;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn brute_force_front(points: &[(f64, f64)]) -> HashSet<(u64, u64)> {
    let dominated = |i: usize| {
        points.iter().any(|q| {
            let p = points[i];
            q.0 <= p.0 && q.1 <= p.1 && (q.0 < p.0 || q.1 < p.1)
        })
    };
    (0..points.len())
        .filter(|&i| !dominated(i))
        .map(|i| (points[i].0.to_bits(), points[i].1.to_bits()))
        .collect()
}

fn check_against_oracle(points: &[(f64, f64)]) {
    let front = pareto_indices(points, |i| i);
    let got: Vec<(u64, u64)> = front
        .iter()
        .map(|&i| (points[i].0.to_bits(), points[i].1.to_bits()))
        .collect();
    let unique: HashSet<(u64, u64)> = got.iter().copied().collect();
    assert_eq!(unique.len(), got.len(), "a tied point survived twice");
    assert_eq!(unique, brute_force_front(points));
    for w in front.windows(2) {
        assert!(points[w[0]].0 < points[w[1]].0 && points[w[0]].1 > points[w[1]].1);
    }
    // Of tied points the lowest index is kept.
    for &i in &front {
        assert!(!(0..i).any(|j| points[j] == points[i]));
    }
}

#[test]
fn pareto_indices_match_quadratic_oracle_on_ten_thousand_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let continuous: Vec<(f64, f64)> = (0..10_000)
        .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
        .collect();
    check_against_oracle(&continuous);
    // Coarse grid: many ties on one or both axes.
    let grid: Vec<(f64, f64)> = (0..10_000)
        .map(|_| (rng.random_range(0..40) as f64, rng.random_range(0..40) as f64))
        .collect();
    check_against_oracle(&grid);
    // Anti-correlated cloud with a large front.
    let curve: Vec<(f64, f64)> = (0..10_000)
        .map(|_| {
            let x: f64 = rng.random();
            (x, 1.0 - x + 0.01 * rng.random::<f64>())
        })
        .collect();
    check_against_oracle(&curve);
}

proptest! {
    #[test]
    fn pareto_front_is_idempotent(pts in prop::collection::vec((0u8..20, 0u8..20), 1..200)) {
        let points: Vec<(f64, f64)> = pts.iter().map(|&(a, b)| (a as f64, b as f64)).collect();
        check_against_oracle(&points);
        let front: Vec<(f64, f64)> = pareto_indices(&points, |i| i).into_iter().map(|i| points[i]).collect();
        prop_assert_eq!(pareto_indices(&front, |i| i).len(), front.len());
    }

    #[test]
    fn even_spread_keeps_both_ends(values in prop::collection::vec(0.0f64..1000.0, 1..60), k in 1usize..20) {
        let picked = select_even_spread_indices(&values, k).unwrap();
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(!picked.is_empty() && picked.len() <= k.min(values.len()));
        prop_assert!(picked.iter().any(|&i| values[i] == lo));
        if k >= 2 {
            prop_assert!(picked.iter().any(|&i| values[i] == hi));
        }
        let distinct: HashSet<usize> = picked.iter().copied().collect();
        prop_assert_eq!(distinct.len(), picked.len());
    }
}

#[test]
fn even_spread_on_a_uniform_axis_is_exact() {
    let values: Vec<f64> = (0..=100).map(|v| v as f64).collect();
    let picked = select_even_spread_indices(&values, 5).unwrap();
    assert_eq!(picked, vec![0, 25, 50, 75, 100]);
    assert!(matches!(
        select_even_spread_indices(&[], 3),
        Err(LibraryError::EmptyFront)
    ));
    assert!(matches!(
        select_even_spread_indices(&[1.0], 0),
        Err(LibraryError::ZeroK)
    ));
}

fn baseline_entries() -> Vec<LibraryEntry> {
    let table = GateCostTable::default();
    let mut out = Vec::new();
    let mut push = |id: String, g| {
        out.push(LibraryEntry::evaluate(id, g, Family::Multiplier, 8, &table, BTreeMap::new()).unwrap());
    };
    push("exact".into(), array_multiplier(8));
    for keep in 1..8 {
        push(format!("trunc{keep}"), truncated_multiplier(8, keep).1);
    }
    for h in 0..3 {
        for v in (h + 1..15).step_by(2) {
            push(
                format!("bam-h{h}-v{v}"),
                bam_multiplier(BamSpec::new(8, h, v).unwrap()).1,
            );
        }
    }
    out
}

#[test]
fn filtered_front_is_non_dominated_and_union_is_distinct() {
    let entries = baseline_entries();
    let front = pareto_filter(&entries, CostAxis::Power, ErrorMetric::Mae).unwrap();
    for a in &front {
        for b in &entries {
            let strictly = (b.cost.area <= a.cost.area && b.error.mae < a.error.mae)
                || (b.cost.area < a.cost.area && b.error.mae <= a.error.mae);
            assert!(!strictly, "{} dominates {}", b.id, a.id);
        }
    }
    let chosen = union_dedup_selection(&entries, &UNION_METRICS, 4, CostAxis::Power).unwrap();
    let circuits: HashSet<_> = chosen.iter().map(|e| e.circuit()).collect();
    assert_eq!(circuits.len(), chosen.len());
    assert!(chosen.iter().any(|e| e.id == "exact"));

    let mut doubled = entries.clone();
    doubled.extend(entries.iter().map(|e| LibraryEntry {
        id: format!("{}-copy", e.id),
        ..e.clone()
    }));
    assert_eq!(dedup_phenotypes(doubled).len(), dedup_phenotypes(entries).len());
}

#[test]
fn manifest_round_trip_and_tamper_detection() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lib").join("library.json");
    let entries = baseline_entries();
    save_manifest(&entries, &path).unwrap();
    let back = load_manifest(&path, Verify::All).unwrap();
    assert_eq!(back, entries);

    let text = std::fs::read_to_string(&path).unwrap();
    let mut json: serde_json::Value = serde_json::from_str(&text).unwrap();
    let slot = json["entries"]
        .as_array_mut()
        .unwrap()
        .iter_mut()
        .find(|e| e["id"] == "trunc7")
        .unwrap();
    slot["error"]["mre"] = serde_json::json!(slot["error"]["mre"].as_f64().unwrap() * (1.0 + 1e-12));
    std::fs::write(&path, serde_json::to_string(&json).unwrap()).unwrap();
    let err = load_manifest(&path, Verify::All).unwrap_err();
    assert!(err.to_string().contains("trunc7"), "{err}");

    std::fs::write(&path, text).unwrap();
    std::fs::remove_file(dir.path().join("lib/circuits/trunc3.cgp")).unwrap();
    assert!(matches!(
        load_manifest(&path, Verify::Nothing),
        Err(LibraryError::MissingGenome { .. })
    ));
}
