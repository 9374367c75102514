//! CSV and JSON report emission.

use serde::Serialize;

/// `%.9g`: nine significant digits, trailing zeros trimmed, exponent form
/// outside `1e-4 <= |x| < 1e9`.
pub fn fmt_g9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (8 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub const HISTORY_HEADER: &str = "seed,loss_name,epoch,mean_loss,matching_acc,probe_acc";
pub const SWEEP_HEADER: &str = "beta,seed,matching_acc,probe_acc";

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub beta: f64,
    pub seed: u64,
    pub loss_name: String,
    pub epoch: usize,
    pub mean_loss: f64,
    pub matching_acc: f64,
    pub probe_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub beta: f64,
    pub seed: u64,
    pub matching_acc: f64,
    pub probe_acc: f64,
}

/// Rows ordered by `(beta, seed, loss_name, epoch)`.
pub fn history_csv(rows: &mut [HistoryRow]) -> String {
    rows.sort_by(|a, b| {
        a.beta
            .total_cmp(&b.beta)
            .then(a.seed.cmp(&b.seed))
            .then(a.loss_name.cmp(&b.loss_name))
            .then(a.epoch.cmp(&b.epoch))
    });
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for r in rows.iter() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.seed,
            r.loss_name,
            r.epoch,
            fmt_g9(r.mean_loss),
            fmt_g9(r.matching_acc),
            fmt_g9(r.probe_acc)
        ));
    }
    out
}

pub fn sweep_csv(rows: &mut [SweepRow]) -> String {
    rows.sort_by(|a, b| a.beta.total_cmp(&b.beta).then(a.seed.cmp(&b.seed)));
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows.iter() {
        out.push_str(&format!("{},{},{},{}\n", fmt_g9(r.beta), r.seed, fmt_g9(r.matching_acc), fmt_g9(r.probe_acc)));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossSummary {
    pub loss_name: String,
    pub kind: String,
    pub mode: String,
    pub alpha: f64,
    pub beta: f64,
    pub runs: usize,
    pub matching_acc: MeanStd,
    pub probe_acc: MeanStd,
    pub final_loss: MeanStd,
    pub degenerate_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub seeds: Vec<u64>,
    pub random_baseline: f64,
    pub losses: Vec<LossSummary>,
}
