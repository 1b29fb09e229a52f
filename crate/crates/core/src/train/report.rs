use std::fmt::Write;

use serde::Serialize;

use super::eval::{AoiSweepReport, WindowMetrics};
use super::EpochLoss;
use crate::models::{count_activations, count_params, ModelError, ModelSpec, Variant};

/// Reference parameter and activation budgets per variant.
pub fn reference_costs(v: Variant) -> (u64, u64) {
    match v {
        Variant::Aoi => (262_700, 12_300_000),
        Variant::Reconstruction => (295_600, 12_800_000),
        Variant::ConvLstm => (250_600, 103_800_000),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostRow {
    pub variant: Variant,
    pub height: usize,
    pub width: usize,
    pub params: u64,
    pub activations: u64,
    pub reference_params: u64,
    pub reference_activations: u64,
}

impl CostRow {
    pub fn param_deviation(&self) -> f64 {
        self.params as f64 / self.reference_params as f64 - 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub rows: Vec<CostRow>,
}

pub fn cost_report(specs: &[ModelSpec]) -> Result<CostReport, ModelError> {
    let rows = specs
        .iter()
        .map(|s| {
            let (rp, ra) = reference_costs(s.variant);
            Ok(CostRow {
                variant: s.variant,
                height: s.height,
                width: s.width,
                params: count_params(s)?,
                activations: count_activations(s, s.t_obs, s.t_pred)?.total(),
                reference_params: rp,
                reference_activations: ra,
            })
        })
        .collect::<Result<_, ModelError>>()?;
    Ok(CostReport { rows })
}

fn human(n: u64) -> String {
    match n {
        n if n >= 1_000_000 => format!("{:.1}M", n as f64 / 1e6),
        n if n >= 1_000 => format!("{:.1}k", n as f64 / 1e3),
        n => n.to_string(),
    }
}

impl CostReport {
    pub fn row(&self, v: Variant) -> Option<&CostRow> {
        self.rows.iter().find(|r| r.variant == v)
    }

    /// Activation ratio of `a` over `b`, when both are present.
    pub fn activation_ratio(&self, a: Variant, b: Variant) -> Option<f64> {
        Some(self.row(a)?.activations as f64 / self.row(b)?.activations as f64)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<15} {:>9} {:>10} {:>8} {:>12} {:>12}",
            "variant", "input", "params", "ref", "activations", "ref"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<15} {:>9} {:>10} {:>8} {:>12} {:>12}",
                r.variant.name(),
                format!("{}x{}", r.height, r.width),
                r.params,
                human(r.reference_params),
                human(r.activations),
                human(r.reference_activations)
            );
        }
        for (a, b) in [
            (Variant::ConvLstm, Variant::Aoi),
            (Variant::Reconstruction, Variant::Aoi),
            (Variant::ConvLstm, Variant::Reconstruction),
        ] {
            if let Some(x) = self.activation_ratio(a, b) {
                let (ra, rb) = (reference_costs(a).1 as f64, reference_costs(b).1 as f64);
                let _ = writeln!(
                    s,
                    "activations {}/{}: {:.2} (ref {:.2})",
                    a.name(),
                    b.name(),
                    x,
                    ra / rb
                );
            }
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "variant,height,width,params,reference_params,activations,reference_activations\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.variant.name(),
                r.height,
                r.width,
                r.params,
                r.reference_params,
                r.activations,
                r.reference_activations
            );
        }
        s
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// `epoch,train_loss,test_loss`
pub fn loss_csv(epochs: &[EpochLoss]) -> String {
    let mut s = String::from("epoch,train_loss,test_loss\n");
    for e in epochs {
        let _ = writeln!(
            s,
            "{},{:.8},{}",
            e.epoch,
            e.train_loss,
            e.test_loss.map(|v| format!("{v:.8}")).unwrap_or_default()
        );
    }
    s
}

const WINDOW_HEADER: &str = "start_step,label_step,samples,positives,auc,f1,tp,fp,tn,fn";

fn window_fields(w: &WindowMetrics) -> String {
    let c = &w.confusion;
    format!(
        "{},{},{},{},{},{:.6},{},{},{},{}",
        w.start_step,
        w.label_step,
        w.samples,
        w.positives,
        opt(w.auc()),
        w.f1,
        c.tp,
        c.fp,
        c.tn,
        c.fn_
    )
}

/// One row per window.
pub fn windows_csv(windows: &[WindowMetrics]) -> String {
    let mut s = format!("{WINDOW_HEADER}\n");
    for w in windows {
        let _ = writeln!(s, "{}", window_fields(w));
    }
    s
}

/// One row per AOI and window.
pub fn sweep_csv(reports: &[AoiSweepReport]) -> String {
    let mut s = format!("aoi_x,aoi_y,seed,{WINDOW_HEADER}\n");
    for r in reports {
        for w in &r.windows {
            let _ = writeln!(s, "{},{},{},{}", r.aoi.x, r.aoi.y, r.seed, window_fields(w));
        }
    }
    s
}
