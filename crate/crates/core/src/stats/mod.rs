//! One-way ANOVA and Tukey HSD over per-run accuracies.

mod qtable;

pub use qtable::{q_critical, ALPHAS, MAX_GROUPS, MIN_GROUPS};

use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunGroup {
    pub model_name: String,
    pub accuracies: Vec<f64>,
}

impl RunGroup {
    pub fn new(model_name: impl Into<String>, accuracies: Vec<f64>) -> Self {
        Self {
            model_name: model_name.into(),
            accuracies,
        }
    }

    pub fn mean(&self) -> f64 {
        self.accuracies.iter().sum::<f64>() / self.accuracies.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    /// `+∞` when groups differ but have no spread inside them.
    pub f: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p: f64,
    pub ss_between: f64,
    pub ss_within: f64,
    pub ms_within: f64,
    /// Every observation equal, so F is 0/0; reported as F = 0, p = 1.
    pub degenerate: bool,
}

fn validate(groups: &[RunGroup]) -> Result<()> {
    if groups.len() < 2 {
        return Err(Error::invalid(format!("need at least 2 groups, got {}", groups.len())));
    }
    for g in groups {
        if g.accuracies.len() < 2 {
            return Err(Error::invalid(format!(
                "group `{}` needs at least 2 observations",
                g.model_name
            )));
        }
        if g.accuracies.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("observation in group `{}`", g.model_name)));
        }
    }
    Ok(())
}

pub fn anova_oneway(groups: &[RunGroup]) -> Result<AnovaResult> {
    validate(groups)?;
    let n: usize = groups.iter().map(|g| g.accuracies.len()).sum();
    let k = groups.len();
    let grand = groups.iter().flat_map(|g| &g.accuracies).sum::<f64>() / n as f64;
    let ss_between: f64 = groups
        .iter()
        .map(|g| g.accuracies.len() as f64 * (g.mean() - grand).powi(2))
        .sum();
    let ss_within: f64 = groups
        .iter()
        .map(|g| {
            let m = g.mean();
            g.accuracies.iter().map(|v| (v - m).powi(2)).sum::<f64>()
        })
        .sum();
    // Zero variance is decided on the values themselves: means of repeated
    // values like 0.7 do not round-trip, which would leave tiny residuals.
    let constant = |g: &RunGroup| g.accuracies.iter().all(|&v| v == g.accuracies[0]);
    let no_within = groups.iter().all(constant);
    let no_between = no_within && groups.iter().all(|g| g.accuracies[0] == groups[0].accuracies[0]);
    let ss_within = if no_within { 0.0 } else { ss_within };
    let ss_between = if no_between { 0.0 } else { ss_between };
    let (df_between, df_within) = (k - 1, n - k);
    let ms_between = ss_between / df_between as f64;
    let ms_within = ss_within / df_within as f64;
    let (f, p, degenerate) = if no_within {
        if no_between {
            (0.0, 1.0, true)
        } else {
            (f64::INFINITY, 0.0, false)
        }
    } else {
        let f = ms_between / ms_within;
        let dist = FisherSnedecor::new(df_between as f64, df_within as f64)
            .map_err(|e| Error::invalid(format!("F distribution: {e}")))?;
        (f, dist.sf(f).clamp(0.0, 1.0), false)
    };
    Ok(AnovaResult {
        f,
        df_between,
        df_within,
        p,
        ss_between,
        ss_within,
        ms_within,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TukeyRow {
    pub a: String,
    pub b: String,
    /// mean(a) − mean(b).
    pub mean_diff: f64,
    pub q_stat: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TukeyReport {
    pub alpha: f64,
    pub q_crit: f64,
    pub df_within: usize,
    pub rows: Vec<TukeyRow>,
}

/// All pairwise comparisons with the Tukey–Kramer standard error.
pub fn tukey_hsd(groups: &[RunGroup], alpha: f64) -> Result<TukeyReport> {
    let anova = anova_oneway(groups)?;
    let q_crit = q_critical(alpha, groups.len(), anova.df_within as f64)?;
    let mut rows = Vec::new();
    for (i, a) in groups.iter().enumerate() {
        for b in &groups[i + 1..] {
            let mean_diff = a.mean() - b.mean();
            let se =
                (anova.ms_within / 2.0 * (1.0 / a.accuracies.len() as f64 + 1.0 / b.accuracies.len() as f64)).sqrt();
            let q_stat = if mean_diff == 0.0 { 0.0 } else { mean_diff.abs() / se };
            rows.push(TukeyRow {
                a: a.model_name.clone(),
                b: b.model_name.clone(),
                mean_diff,
                q_stat,
                significant: q_stat > q_crit,
            });
        }
    }
    Ok(TukeyReport {
        alpha,
        q_crit,
        df_within: anova.df_within,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub groups: Vec<GroupSummary>,
    pub anova: AnovaResult,
    pub tukey: TukeyReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub model_name: String,
    pub n: usize,
    pub mean: f64,
}

pub fn report(groups: &[RunGroup], alpha: f64) -> Result<StatsReport> {
    Ok(StatsReport {
        groups: groups
            .iter()
            .map(|g| GroupSummary {
                model_name: g.model_name.clone(),
                n: g.accuracies.len(),
                mean: g.mean(),
            })
            .collect(),
        anova: anova_oneway(groups)?,
        tukey: tukey_hsd(groups, alpha)?,
    })
}

#[derive(Debug, Deserialize)]
struct RunRow {
    model: String,
    #[allow(dead_code)]
    run_id: String,
    accuracy: f64,
}

/// Reads CSV with header `model,run_id,accuracy`; groups keep first-seen order.
pub fn read_runs_csv(path: &Path) -> Result<Vec<RunGroup>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let mut groups: Vec<RunGroup> = Vec::new();
    for row in reader.deserialize::<RunRow>() {
        let row = row.map_err(|e| Error::format(path, e.to_string()))?;
        match groups.iter_mut().find(|g| g.model_name == row.model) {
            Some(g) => g.accuracies.push(row.accuracy),
            None => groups.push(RunGroup::new(row.model, vec![row.accuracy])),
        }
    }
    Ok(groups)
}
