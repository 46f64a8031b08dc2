//! Layer-wise and full-replacement accuracy sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::infer::{accuracy, LutAssignment};
use super::lut::MultiplierLut;
use super::network::QuantizedNetwork;
use super::ResilienceError;
use crate::fmt::fixed;
use crate::ErrorReport;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerRow {
    pub layer: usize,
    pub tag: String,
    pub multiplier: String,
    pub mult_fraction: f64,
    pub accuracy: f64,
    pub accuracy_drop: f64,
    pub power_drop: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FullRow {
    pub multiplier: String,
    pub error: ErrorReport,
    pub relative_power: f64,
    pub accuracy: f64,
    pub accuracy_drop: f64,
    pub power_drop: f64,
}

/// Accuracies and drops are percentages; power drops are percent of the
/// network's total multiplier power.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub baseline_accuracy: f64,
    pub layers: Vec<LayerRow>,
    pub full: Vec<FullRow>,
}

const POWER_TOLERANCE: f64 = 1e-9;

impl SweepReport {
    /// Checks the power bookkeeping: per-layer drops of one multiplier sum to
    /// its full-replacement drop.
    pub fn check(&self) -> Result<(), ResilienceError> {
        for f in &self.full {
            let expect = 100.0 * (1.0 - f.relative_power);
            if (f.power_drop - expect).abs() > POWER_TOLERANCE {
                return Err(ResilienceError::Invalid(format!(
                    "{}: full power drop {} != {expect}",
                    f.multiplier, f.power_drop
                )));
            }
            let rows: Vec<&LayerRow> = self.layers.iter().filter(|r| r.multiplier == f.multiplier).collect();
            if rows.is_empty() {
                continue;
            }
            let fractions: f64 = rows.iter().map(|r| r.mult_fraction).sum();
            let drops: f64 = rows.iter().map(|r| r.power_drop).sum();
            if (fractions - 1.0).abs() > POWER_TOLERANCE || (drops - f.power_drop).abs() > POWER_TOLERANCE {
                return Err(ResilienceError::Invalid(format!(
                    "{}: layer power drops sum to {drops}, full replacement gives {}",
                    f.multiplier, f.power_drop
                )));
            }
        }
        Ok(())
    }

    pub fn layer_csv(&self) -> String {
        let mut s = String::from("layer,tag,multiplier,mult_fraction,accuracy_pct,accuracy_drop_pct,power_drop_pct\n");
        for r in &self.layers {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.layer,
                r.tag,
                r.multiplier,
                fixed(r.mult_fraction, 6),
                fixed(r.accuracy, 2),
                fixed(r.accuracy_drop, 2),
                fixed(r.power_drop, 2)
            ));
        }
        s
    }

    /// One row per multiplier with its error metrics, as in a comparison table.
    pub fn full_csv(&self) -> String {
        let mut s = String::from(
            "multiplier,er_pct,mae_pct,wce_pct,mre_pct,wcre_pct,relative_power,power_drop_pct,accuracy_pct,accuracy_drop_pct\n",
        );
        for r in &self.full {
            let e = &r.error;
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.multiplier,
                fixed(e.er_pct(), 2),
                fixed(e.mae_pct(), 2),
                fixed(e.wce_pct(), 4),
                fixed(e.mre_pct(), 2),
                fixed(e.wcre_pct(), 2),
                fixed(r.relative_power, 4),
                fixed(r.power_drop, 2),
                fixed(r.accuracy, 2),
                fixed(r.accuracy_drop, 2)
            ));
        }
        s
    }
}

fn check_luts(luts: &[MultiplierLut]) -> Result<(), ResilienceError> {
    match luts.iter().find(|l| l.bits() != 8) {
        Some(l) => Err(ResilienceError::LutWidth(l.bits())),
        None => Ok(()),
    }
}

fn baseline(net: &QuantizedNetwork, data: &Dataset, exact: &MultiplierLut) -> Result<f64, ResilienceError> {
    net.validate()?;
    accuracy(net, data, &LutAssignment::uniform(net, exact))
}

/// Replaces one layer's multiplier at a time; the rest stay exact.
pub fn layerwise_sweep(
    net: &QuantizedNetwork,
    data: &Dataset,
    luts: &[MultiplierLut],
) -> Result<SweepReport, ResilienceError> {
    check_luts(luts)?;
    let exact = MultiplierLut::exact(8);
    let base = baseline(net, data, &exact)?;
    let grid: Vec<(usize, usize)> = net
        .mult_layers()
        .into_iter()
        .flat_map(|layer| (0..luts.len()).map(move |k| (layer, k)))
        .collect();
    let layers = grid
        .par_iter()
        .map(|&(layer, k)| {
            let lut = &luts[k];
            let acc = accuracy(net, data, &LutAssignment::single(net, &exact, layer, lut))?;
            let fraction = net.mult_fraction(layer);
            Ok(LayerRow {
                layer,
                tag: net.tag(layer),
                multiplier: lut.source().to_string(),
                mult_fraction: fraction,
                accuracy: acc,
                accuracy_drop: base - acc,
                power_drop: 100.0 * fraction * (1.0 - lut.relative_power()),
            })
        })
        .collect::<Result<Vec<_>, ResilienceError>>()?;
    Ok(SweepReport {
        baseline_accuracy: base,
        layers,
        full: Vec::new(),
    })
}

/// Replaces the multiplier of every layer at once.
pub fn full_replacement_eval(
    net: &QuantizedNetwork,
    data: &Dataset,
    luts: &[MultiplierLut],
) -> Result<SweepReport, ResilienceError> {
    check_luts(luts)?;
    let exact = MultiplierLut::exact(8);
    let base = baseline(net, data, &exact)?;
    let full = luts
        .par_iter()
        .map(|lut| {
            let acc = accuracy(net, data, &LutAssignment::uniform(net, lut))?;
            Ok(FullRow {
                multiplier: lut.source().to_string(),
                error: lut.error_report(),
                relative_power: lut.relative_power(),
                accuracy: acc,
                accuracy_drop: base - acc,
                power_drop: 100.0 * (1.0 - lut.relative_power()),
            })
        })
        .collect::<Result<Vec<_>, ResilienceError>>()?;
    Ok(SweepReport {
        baseline_accuracy: base,
        layers: Vec::new(),
        full,
    })
}

/// Both sweeps, checked.
pub fn resilience_report(
    net: &QuantizedNetwork,
    data: &Dataset,
    luts: &[MultiplierLut],
) -> Result<SweepReport, ResilienceError> {
    let mut r = layerwise_sweep(net, data, luts)?;
    r.full = full_replacement_eval(net, data, luts)?.full;
    r.check()?;
    Ok(r)
}

/// Average ranks, ties sharing the mean of their positions.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let mean = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = mean;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation; `None` when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}
