use std::time::{Duration, Instant};

use axc_core::fmt::fixed;
use axc_core::generators::{bam_multiplier, truncated_multiplier, BamSpec, FunctionalModel};
use axc_core::metrics::error_report;
use axc_core::{ErrorReport, Genome, Simulator};

fn report(model: &FunctionalModel, genome: &Genome) -> (ErrorReport, Duration) {
    let t = Instant::now();
    let c = genome.decode().unwrap();
    let r: ErrorReport = error_report(&c, &FunctionalModel::exact_multiplier(8), &Simulator::default()).unwrap();
    let elapsed = t.elapsed();
    let functional: ErrorReport =
        error_report(model, &FunctionalModel::exact_multiplier(8), &Simulator::default()).unwrap();
    assert_eq!(r, functional, "{} netlist and model disagree", model.name());
    (r, elapsed)
}

fn pct(x: f64, decimals: usize) -> String {
    fixed(x, decimals)
}

#[test]
fn truncated_seven_bit() {
    let (m, g) = truncated_multiplier(8, 7);
    let (r, t) = report(&m, &g);
    assert_eq!(pct(r.er_pct(), 2), "74.61");
    assert_eq!(pct(r.mae_pct(), 2), "0.19");
    assert_eq!(pct(r.wce_pct(), 2), "0.78");
    assert_eq!((r.mae, r.wce), (127.25, 509));
    assert_eq!(pct(r.mre_pct(), 3), "2.634");
    assert_eq!(pct(r.wcre_pct(), 2), "100.00");
    assert!(t < Duration::from_secs(1), "{t:?}");
}

#[test]
fn truncated_six_bit() {
    let (m, g) = truncated_multiplier(8, 6);
    let (r, t) = report(&m, &g);
    assert_eq!(pct(r.er_pct(), 2), "93.16");
    assert_eq!(pct(r.mae_pct(), 2), "0.58");
    assert_eq!(pct(r.wce_pct(), 2), "2.32");
    assert_eq!((r.mae, r.wce), (380.25, 1521));
    assert_eq!(pct(r.mre_pct(), 3), "6.950");
    assert!(t < Duration::from_secs(1), "{t:?}");
}

#[test]
fn bam_h0_v2() {
    let (m, g) = bam_multiplier(BamSpec::new(8, 0, 2).unwrap());
    let (r, t) = report(&m, &g);
    assert_eq!(pct(r.er_pct(), 2), "50.00");
    assert_eq!(pct(r.wce_pct(), 4), "0.0076");
    assert_eq!(r.wce, 5);
    assert!(t < Duration::from_secs(1), "{t:?}");
}

#[test]
fn bam_h1_v3() {
    let (m, g) = bam_multiplier(BamSpec::new(8, 1, 3).unwrap());
    let (r, t) = report(&m, &g);
    assert_eq!(pct(r.mae_pct(), 2), "0.10");
    assert_eq!(pct(r.wce_pct(), 2), "0.40");
    assert_eq!(r.wce, 265);
    assert_eq!(pct(r.mre_pct(), 3), "1.455");
    assert_eq!(pct(r.wcre_pct(), 2), "100.00");
    assert!(t < Duration::from_secs(1), "{t:?}");
}

#[test]
fn bam_h2_v7() {
    let (m, g) = bam_multiplier(BamSpec::new(8, 2, 7).unwrap());
    let (r, t) = report(&m, &g);
    assert_eq!(pct(r.mae_pct(), 2), "0.49");
    assert_eq!(r.mae, 320.25);
    assert!(t < Duration::from_secs(1), "{t:?}");
}

#[test]
fn every_broken_array_reaches_full_relative_error() {
    for h in 0..4 {
        for v in h + 1..15 {
            let (m, _) = bam_multiplier(BamSpec::new(8, h, v).unwrap());
            let r: ErrorReport =
                error_report(&m, &FunctionalModel::exact_multiplier(8), &Simulator::default()).unwrap();
            assert_eq!(r.wcre, 1.0, "h={h} v={v}");
        }
    }
}
