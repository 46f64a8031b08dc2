use axc_core::evolve::{
    dominates, evolve_pareto, evolve_single, Candidate, ErrorMetric, Evaluator, Objective, SearchConfig,
};
use axc_core::generators::array_multiplier;
use axc_core::{GateCostTable, Simulator};

fn objectives(cfg: &SearchConfig, c: &Candidate) -> Vec<f64> {
    cfg.objectives.iter().map(|o| o.value(c)).collect()
}

#[test]
fn zero_window_keeps_the_multiplier_exact() {
    let g = array_multiplier(8);
    let c = g.decode().unwrap();
    let table = GateCostTable::default();
    let eval = Evaluator::new(&c, "exact-mult8", &table, &Simulator::default()).unwrap();
    let cfg = SearchConfig {
        generations: 10_000,
        metric: ErrorMetric::Wce,
        e_max: 0.0,
        seed: 1,
        ..Default::default()
    };
    let out = evolve_single(&g, &eval, &cfg).unwrap();
    assert!(out.best.error.is_zero());
    assert!(out.best.cost.area <= 424.0);
    let table_of = |circuit| Simulator::default().truth_table(circuit).unwrap();
    assert_eq!(table_of(&out.best.circuit), table_of(&c));
}

#[test]
fn one_percent_wce_window_saves_area() {
    let g = array_multiplier(8);
    let c = g.decode().unwrap();
    let table = GateCostTable::default();
    let eval = Evaluator::new(&c, "exact-mult8", &table, &Simulator::default()).unwrap();
    let cfg = SearchConfig {
        generations: 20_000,
        metric: ErrorMetric::WcePct,
        e_min: 0.0,
        e_max: 1.0,
        seed: 4,
        ..Default::default()
    };
    let out = evolve_single(&g, &eval, &cfg).unwrap();
    assert!(out.best.error.wce_pct() <= 1.0);
    assert!(out.best.cost.area < 424.0, "area {}", out.best.cost.area);
    let recheck = eval.verify(&out.best).unwrap();
    assert_eq!(recheck.error, out.best.error);
    assert!(out.trace.records.windows(2).all(|w| w[1].best_cost <= w[0].best_cost));
    assert!(out.trace.records.iter().all(|r| r.best_error <= 1.0));
}

#[test]
fn pareto_run_is_independent_of_thread_count() {
    let g = array_multiplier(5);
    let c = g.decode().unwrap();
    let table = GateCostTable::default();
    let eval = Evaluator::new(&c, "exact-mult5", &table, &Simulator::default()).unwrap();
    let cfg = SearchConfig {
        lambda: 4,
        generations: 1500,
        objectives: vec![Objective::Error(ErrorMetric::Mae), Objective::Area, Objective::Delay],
        seed: 21,
        trace_interval: 100,
        ..Default::default()
    };
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| evolve_pareto(&g, &eval, &cfg).unwrap())
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.trace.to_csv(true, false), b.trace.to_csv(true, false));
    let genomes = |o: &axc_core::evolve::ParetoOutcome| o.archive.iter().map(|m| m.genome.clone()).collect::<Vec<_>>();
    assert_eq!(genomes(&a), genomes(&b));

    let objs: Vec<Vec<f64>> = a.archive.iter().map(|m| objectives(&cfg, m)).collect();
    for (i, x) in objs.iter().enumerate() {
        for (j, y) in objs.iter().enumerate() {
            assert!(i == j || !dominates(x, y));
            assert!(i == j || x != y, "duplicate objective vector {x:?}");
        }
    }
}

#[test]
fn config_file_round_trip() {
    let cfg = SearchConfig {
        lambda: 3,
        e_max: 0.5,
        seed: 9,
        ..Default::default()
    };
    let text = serde_json::to_string(&cfg).unwrap();
    let back: SearchConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(back, cfg);
    let partial: SearchConfig = serde_json::from_str(r#"{"lambda": 2, "metric": "mae_pct"}"#).unwrap();
    assert_eq!((partial.lambda, partial.metric, partial.h), (2, ErrorMetric::MaePct, 5));
}
