//! Held-out evaluation and result tables.

use super::data::{with_random_guides, SamplePair};
use super::model::Restorer;
use super::Ablation;
use crate::error::{Error, Result};
use crate::metrics::{psnr, ssim};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub count: usize,
    pub psnr: f64,
    pub ssim: f64,
    /// Metrics of the degraded input itself.
    pub baseline_psnr: f64,
    pub baseline_ssim: f64,
}

/// Mean PSNR and SSIM of the model's restorations against ground truth.
pub fn evaluate(model: &mut Restorer, data: &[SamplePair]) -> Result<EvalMetrics> {
    if data.is_empty() {
        return Err(Error::Config("evaluation needs a nonempty dataset".into()));
    }
    let guided;
    let data = if model.config.ablation == Ablation::RandomGuide {
        guided = with_random_guides(data);
        &guided[..]
    } else {
        data
    };
    let mut m = EvalMetrics { count: data.len(), psnr: 0.0, ssim: 0.0, baseline_psnr: 0.0, baseline_ssim: 0.0 };
    for s in data {
        let (restored, _) = model.restore(&s.degraded, &s.guide)?;
        m.psnr += psnr(&restored, &s.target)?;
        m.ssim += ssim(&restored, &s.target)?;
        m.baseline_psnr += psnr(&s.degraded, &s.target)?;
        m.baseline_ssim += ssim(&s.degraded, &s.target)?;
    }
    let n = data.len() as f64;
    m.psnr /= n;
    m.ssim /= n;
    m.baseline_psnr /= n;
    m.baseline_ssim /= n;
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub name: String,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub rows: Vec<MetricRow>,
}

impl MetricTable {
    pub fn push(&mut self, name: impl Into<String>, psnr: f64, ssim: f64) {
        self.rows.push(MetricRow { name: name.into(), psnr, ssim });
    }

    pub fn get(&self, name: &str) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn to_json(&self) -> String {
        // Infinite PSNR is written as a string so the document stays valid JSON.
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|r| {
                let p = if r.psnr.is_finite() {
                    serde_json::json!(r.psnr)
                } else {
                    serde_json::json!("inf")
                };
                serde_json::json!({"name": r.name, "psnr": p, "ssim": r.ssim})
            })
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({ "rows": rows })).expect("table serializes")
    }

    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(7);
        let mut out = format!("{:<width$}  {:>9}  {:>7}\n", "variant", "PSNR(dB)", "SSIM");
        for r in &self.rows {
            out.push_str(&format!("{:<width$}  {:>9.3}  {:>7.4}\n", r.name, r.psnr, r.ssim));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_formats() {
        let mut t = MetricTable::default();
        t.push("full", 27.5, 0.91);
        t.push("identity", f64::INFINITY, 1.0);
        let text = t.to_text();
        assert!(text.lines().nth(1).unwrap().starts_with("full "));
        assert!(text.contains("inf"));
        let v: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(v["rows"][1]["psnr"], "inf");
        assert_eq!(t.get("full").unwrap().ssim, 0.91);
    }
}
