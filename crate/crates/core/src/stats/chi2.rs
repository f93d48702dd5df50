//! χ² test of independence between a characteristic and model correctness.

use serde::{Deserialize, Serialize};

use super::special::chi2_sf;
use crate::error::{Error, Result};

/// n×2 table of (incorrect, correct) counts, one row per subset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub labels: Vec<String>,
    pub counts: Vec<[u64; 2]>,
}

impl ContingencyTable {
    pub fn new(labels: Vec<String>, counts: Vec<[u64; 2]>) -> Result<Self> {
        if labels.len() != counts.len() {
            return Err(Error::DegenerateTable(format!(
                "{} labels for {} rows",
                labels.len(),
                counts.len()
            )));
        }
        let table = Self { labels, counts };
        table.validate()?;
        Ok(table)
    }

    /// Unlabeled table, rows named by index.
    pub fn from_counts(counts: Vec<[u64; 2]>) -> Result<Self> {
        let labels = (0..counts.len()).map(|i| format!("row{i}")).collect();
        Self::new(labels, counts)
    }

    pub fn validate(&self) -> Result<()> {
        if self.counts.len() < 2 {
            return Err(Error::DegenerateTable(format!(
                "need at least 2 rows, found {}",
                self.counts.len()
            )));
        }
        if let Some(i) = self.counts.iter().position(|r| r[0] + r[1] == 0) {
            return Err(Error::DegenerateTable(format!(
                "row {:?} has zero total",
                self.labels[i]
            )));
        }
        for (col, name) in [(0, "incorrect"), (1, "correct")] {
            if self.counts.iter().all(|r| r[col] == 0) {
                return Err(Error::DegenerateTable(format!("column {name} has zero total")));
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.counts.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquaredOptions {
    pub alpha: f64,
    pub bonferroni_m: usize,
    /// Yates correction; only applied to 2×2 tables.
    pub continuity_correction: bool,
}

impl Default for ChiSquaredOptions {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            bonferroni_m: 3,
            continuity_correction: false,
        }
    }
}

impl ChiSquaredOptions {
    pub fn threshold(&self) -> f64 {
        self.alpha / self.bonferroni_m as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquaredReport {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub alpha: f64,
    pub bonferroni_m: usize,
    pub threshold: f64,
    pub significant: bool,
}

/// Σ (O − E)² / E with expected counts from the row and column marginals.
pub fn chi_squared_statistic(table: &ContingencyTable, continuity_correction: bool) -> f64 {
    let col_totals = [0, 1].map(|c| table.counts.iter().map(|r| r[c]).sum::<u64>() as f64);
    let grand = col_totals[0] + col_totals[1];
    let yates = continuity_correction && table.n_rows() == 2;
    let mut statistic = 0.0;
    for row in &table.counts {
        let row_total = (row[0] + row[1]) as f64;
        for c in 0..2 {
            let expected = row_total * col_totals[c] / grand;
            let mut diff = (row[c] as f64 - expected).abs();
            if yates {
                diff = (diff - 0.5).max(0.0);
            }
            statistic += diff * diff / expected;
        }
    }
    statistic
}

/// Verdict at the Bonferroni-corrected threshold `alpha / bonferroni_m`.
pub fn significance(p_value: f64, options: &ChiSquaredOptions) -> bool {
    p_value < options.threshold()
}

pub fn chi_squared_test(
    table: &ContingencyTable,
    options: &ChiSquaredOptions,
) -> Result<ChiSquaredReport> {
    if !(options.alpha > 0.0 && options.alpha < 1.0) || options.bonferroni_m == 0 {
        return Err(Error::Config(format!(
            "alpha must be in (0,1) and bonferroni_m >= 1, got {} and {}",
            options.alpha, options.bonferroni_m
        )));
    }
    table.validate()?;
    let statistic = chi_squared_statistic(table, options.continuity_correction);
    let dof = table.n_rows() - 1;
    let p_value = chi2_sf(statistic, dof)?;
    Ok(ChiSquaredReport {
        statistic,
        dof,
        p_value,
        alpha: options.alpha,
        bonferroni_m: options.bonferroni_m,
        threshold: options.threshold(),
        significant: significance(p_value, options),
    })
}
