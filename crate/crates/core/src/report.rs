//! Audit outputs: demographic distributions, per-subset accuracy, χ² verdicts
//! and the significant-feature regression table, rendered as Markdown, TSV or
//! JSON.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::attributes::{Characteristic, DemographicAssignment, NOT_FOUND, OTHERS};
use crate::corpus::{Fold, QAExample};
use crate::error::{Error, Result};
use crate::stats::{chi_squared_test, ChiSquaredOptions, ChiSquaredReport, ContingencyTable, WaldRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetAccuracyRow {
    pub characteristic: Characteristic,
    pub label: String,
    pub count: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionRow {
    pub label: String,
    pub count: usize,
    pub share: f64,
}

/// One row per label, sorted by descending count then label.
pub fn subset_accuracy(
    examples: &[QAExample],
    assignments: &[DemographicAssignment],
    characteristic: Characteristic,
) -> Vec<SubsetAccuracyRow> {
    let mut tally: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for (ex, a) in examples.iter().zip(assignments) {
        let entry = tally.entry(a.label(characteristic).value.as_str()).or_default();
        entry.0 += 1;
        entry.1 += usize::from(ex.correct);
    }
    let mut rows: Vec<SubsetAccuracyRow> = tally
        .into_iter()
        .map(|(label, (count, correct))| SubsetAccuracyRow {
            characteristic,
            label: label.to_owned(),
            count,
            correct,
            accuracy: correct as f64 / count as f64,
        })
        .collect();
    rows.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.label.cmp(&b.label)));
    rows
}

pub fn distribution(rows: &[SubsetAccuracyRow]) -> Vec<DistributionRow> {
    let total: usize = rows.iter().map(|r| r.count).sum();
    rows.iter()
        .map(|r| DistributionRow {
            label: r.label.clone(),
            count: r.count,
            share: r.count as f64 / total as f64,
        })
        .collect()
}

pub fn contingency_table(rows: &[SubsetAccuracyRow], include_unassigned: bool) -> Result<ContingencyTable> {
    let kept: Vec<&SubsetAccuracyRow> = rows
        .iter()
        .filter(|r| include_unassigned || (r.label != NOT_FOUND && r.label != OTHERS))
        .collect();
    ContingencyTable::new(
        kept.iter().map(|r| r.label.clone()).collect(),
        kept.iter()
            .map(|r| [(r.count - r.correct) as u64, r.correct as u64])
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenResult {
    pub characteristic: Characteristic,
    pub chi_squared: Option<ChiSquaredReport>,
    /// Why no test was run, when the table is degenerate.
    pub skipped: Option<String>,
    pub enabled: bool,
}

/// χ² test per characteristic. Degenerate tables (fewer than two subsets, or
/// no correct / no incorrect examples) are recorded as skipped, not errors.
pub fn screen_characteristics(
    tables: &[(Characteristic, Vec<SubsetAccuracyRow>)],
    options: &ChiSquaredOptions,
    include_unassigned: bool,
) -> Result<Vec<ScreenResult>> {
    let mut out = Vec::new();
    for (c, rows) in tables {
        let table = contingency_table(rows, include_unassigned)
            .and_then(|table| chi_squared_test(&table, options));
        let result = match table {
            Ok(report) => ScreenResult {
                characteristic: *c,
                enabled: report.significant,
                chi_squared: Some(report),
                skipped: None,
            },
            Err(Error::DegenerateTable(reason)) => ScreenResult {
                characteristic: *c,
                chi_squared: None,
                skipped: Some(reason),
                enabled: false,
            },
            Err(e) => return Err(e),
        };
        out.push(result);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicSection {
    pub characteristic: Characteristic,
    pub distribution: Vec<DistributionRow>,
    pub accuracy: Vec<SubsetAccuracyRow>,
    pub screen: ScreenResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub n_rows: usize,
    pub lambda: f64,
    pub intercept: WaldRow,
    /// Refit features sorted by ascending p-value.
    pub features: Vec<WaldRow>,
    pub lasso_eliminated: Vec<String>,
    /// Survivors dropped before the refit as linear combinations of others.
    pub aliased: Vec<String>,
    pub zero_columns: Vec<String>,
    pub log_likelihood: f64,
    pub lasso_iterations: usize,
    pub lasso_converged: bool,
    pub lasso_kkt_residual: f64,
    pub refit_iterations: usize,
    pub refit_converged: bool,
    pub quasi_separation: bool,
}

impl RegressionReport {
    /// Features with p < 0.1.
    pub fn reportable(&self) -> impl Iterator<Item = &WaldRow> {
        self.features.iter().filter(|r| r.tier.reportable())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub role: String,
    pub path: String,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub config_hash: String,
    pub inputs: Vec<InputRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overall {
    pub count: usize,
    pub correct: usize,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub dataset: String,
    pub fold: Fold,
    pub provenance: Provenance,
    pub overall: Overall,
    pub characteristics: Vec<CharacteristicSection>,
    pub enabled: Vec<Characteristic>,
    pub regression: Option<RegressionReport>,
    pub regression_skipped: Option<String>,
}

impl AuditReport {
    pub fn empty(dataset: impl Into<String>, fold: Fold, provenance: Provenance) -> Self {
        Self {
            dataset: dataset.into(),
            fold,
            provenance,
            overall: Overall {
                count: 0,
                correct: 0,
                accuracy: None,
            },
            characteristics: Vec::new(),
            enabled: Vec::new(),
            regression: None,
            regression_skipped: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Markdown,
    Tsv,
    Json,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Markdown, Format::Tsv, Format::Json];

    pub fn extension(self) -> &'static str {
        match self {
            Format::Markdown => "md",
            Format::Tsv => "tsv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(Format::Markdown),
            "tsv" => Ok(Format::Tsv),
            "json" => Ok(Format::Json),
            _ => Err(Error::UnknownFormat(s.to_owned())),
        }
    }
}

fn pct(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

fn pvalue(p: f64) -> String {
    if p >= 1e-3 {
        format!("{p:.4}")
    } else {
        format!("{p:.3e}")
    }
}

/// A flat table shared by the Markdown and TSV renderers.
struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn markdown(&self, out: &mut String) {
        let _ = writeln!(out, "| {} |", self.header.join(" | "));
        let _ = writeln!(
            out,
            "|{}|",
            self.header.iter().map(|_| "---").collect::<Vec<_>>().join("|")
        );
        for row in &self.rows {
            let _ = writeln!(out, "| {} |", row.join(" | "));
        }
    }

    fn tsv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.header.join("\t"));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join("\t"));
        }
        out
    }
}

fn distribution_table(section: &CharacteristicSection, human: bool) -> Table {
    Table {
        header: vec!["label", "count", "share"],
        rows: section
            .distribution
            .iter()
            .map(|r| {
                vec![
                    r.label.clone(),
                    r.count.to_string(),
                    if human { pct(r.share) } else { r.share.to_string() },
                ]
            })
            .collect(),
    }
}

fn accuracy_table(section: &CharacteristicSection, human: bool) -> Table {
    Table {
        header: vec!["label", "count", "correct", "accuracy"],
        rows: section
            .accuracy
            .iter()
            .map(|r| {
                vec![
                    r.label.clone(),
                    r.count.to_string(),
                    r.correct.to_string(),
                    if human { pct(r.accuracy) } else { r.accuracy.to_string() },
                ]
            })
            .collect(),
    }
}

fn chi2_table(screen: &ScreenResult, human: bool) -> Table {
    let row = match (&screen.chi_squared, &screen.skipped) {
        (Some(r), _) => vec![
            screen.characteristic.to_string(),
            if human { format!("{:.4}", r.statistic) } else { r.statistic.to_string() },
            r.dof.to_string(),
            if human { pvalue(r.p_value) } else { r.p_value.to_string() },
            if human { format!("{:.7}", r.threshold) } else { r.threshold.to_string() },
            if r.significant { "significant" } else { "not significant" }.to_owned(),
        ],
        (None, reason) => vec![
            screen.characteristic.to_string(),
            "-".into(),
            "-".into(),
            "-".into(),
            "-".into(),
            format!("skipped: {}", reason.as_deref().unwrap_or("no test")),
        ],
    };
    Table {
        header: vec!["characteristic", "statistic", "dof", "p_value", "threshold", "verdict"],
        rows: vec![row],
    }
}

fn regression_table(reg: &RegressionReport, human: bool) -> Table {
    let fmt_row = |r: &WaldRow| {
        if human {
            vec![
                r.name.clone(),
                format!("{:.4}", r.coefficient),
                format!("{:.4}", r.std_error),
                format!("{:.3}", r.z),
                pvalue(r.p_value),
                r.tier.marker().to_owned(),
            ]
        } else {
            vec![
                r.name.clone(),
                r.coefficient.to_string(),
                r.std_error.to_string(),
                r.z.to_string(),
                r.p_value.to_string(),
                r.tier.marker().to_owned(),
            ]
        }
    };
    Table {
        header: vec!["feature", "coefficient", "std_error", "wald_z", "p_value", "sig"],
        rows: reg.reportable().map(fmt_row).collect(),
    }
}

fn render_markdown(report: &AuditReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Demographic audit: {} ({})\n", report.dataset, report.fold);
    let _ = writeln!(out, "## Provenance\n");
    let _ = writeln!(out, "- tool version: {}", report.provenance.tool_version);
    let _ = writeln!(out, "- config hash: `{}`", report.provenance.config_hash);
    for input in &report.provenance.inputs {
        let _ = writeln!(out, "- {}: `{}` ({} rows)", input.role, input.path, input.rows);
    }
    if report.characteristics.is_empty() && report.overall.count == 0 {
        return out;
    }
    let _ = writeln!(out, "\n## Overall\n");
    let accuracy = report.overall.accuracy.map(pct).unwrap_or_else(|| "n/a".into());
    let _ = writeln!(
        out,
        "{} examples, {} correct, accuracy {}",
        report.overall.count, report.overall.correct, accuracy
    );
    for section in &report.characteristics {
        let _ = writeln!(out, "\n## {}\n", section.characteristic);
        let _ = writeln!(out, "### Distribution\n");
        distribution_table(section, true).markdown(&mut out);
        let _ = writeln!(out, "\n### Accuracy\n");
        accuracy_table(section, true).markdown(&mut out);
        let _ = writeln!(out, "\n### Chi-squared\n");
        chi2_table(&section.screen, true).markdown(&mut out);
    }
    let _ = writeln!(out, "\n## Regression\n");
    match (&report.regression, &report.regression_skipped) {
        (Some(reg), _) => {
            let _ = writeln!(
                out,
                "{} rows, lambda {}, log-likelihood {:.4}; significance: *** p<0.01, ** p<0.05, * p<0.1\n",
                reg.n_rows, reg.lambda, reg.log_likelihood
            );
            regression_table(reg, true).markdown(&mut out);
            if !reg.lasso_eliminated.is_empty() {
                let _ = writeln!(out, "\neliminated by L1: {}", reg.lasso_eliminated.join(", "));
            }
            if !reg.aliased.is_empty() {
                let _ = writeln!(out, "\naliased: {}", reg.aliased.join(", "));
            }
            if reg.quasi_separation || !reg.refit_converged || !reg.lasso_converged {
                let _ = writeln!(
                    out,
                    "\nwarning: lasso converged={}, refit converged={}, quasi-separation={}",
                    reg.lasso_converged, reg.refit_converged, reg.quasi_separation
                );
            }
        }
        (None, reason) => {
            let _ = writeln!(out, "skipped: {}", reason.as_deref().unwrap_or("not run"));
        }
    }
    out
}

// Long format: section, name, field, value.
fn render_tsv(report: &AuditReport) -> String {
    let mut out = String::from("section\tname\tfield\tvalue\n");
    let mut put = |section: &str, name: &str, field: &str, value: String| {
        let _ = writeln!(out, "{section}\t{name}\t{field}\t{value}");
    };
    put("provenance", "tool", "version", report.provenance.tool_version.clone());
    put("provenance", "config", "hash", report.provenance.config_hash.clone());
    for i in &report.provenance.inputs {
        put("provenance", &i.role, "path", i.path.clone());
        put("provenance", &i.role, "rows", i.rows.to_string());
    }
    if report.characteristics.is_empty() && report.overall.count == 0 {
        return out;
    }
    put("overall", &report.dataset, "count", report.overall.count.to_string());
    put("overall", &report.dataset, "correct", report.overall.correct.to_string());
    if let Some(acc) = report.overall.accuracy {
        put("overall", &report.dataset, "accuracy", acc.to_string());
    }
    for s in &report.characteristics {
        let c = s.characteristic.as_str();
        for r in &s.accuracy {
            let name = format!("{c}:{}", r.label);
            put("subset", &name, "count", r.count.to_string());
            put("subset", &name, "correct", r.correct.to_string());
            put("subset", &name, "accuracy", r.accuracy.to_string());
        }
        for r in &s.distribution {
            put("subset", &format!("{c}:{}", r.label), "share", r.share.to_string());
        }
        match &s.screen.chi_squared {
            Some(r) => {
                put("chi2", c, "statistic", r.statistic.to_string());
                put("chi2", c, "dof", r.dof.to_string());
                put("chi2", c, "p_value", r.p_value.to_string());
                put("chi2", c, "threshold", r.threshold.to_string());
                put("chi2", c, "significant", r.significant.to_string());
            }
            None => put("chi2", c, "skipped", s.screen.skipped.clone().unwrap_or_default()),
        }
    }
    if let Some(reg) = &report.regression {
        for r in std::iter::once(&reg.intercept).chain(reg.reportable()) {
            put("regression", &r.name, "coefficient", r.coefficient.to_string());
            put("regression", &r.name, "std_error", r.std_error.to_string());
            put("regression", &r.name, "wald_z", r.z.to_string());
            put("regression", &r.name, "p_value", r.p_value.to_string());
        }
    }
    out
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Serialize(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn render(report: &AuditReport, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Markdown => Ok(render_markdown(report).into_bytes()),
        Format::Tsv => Ok(render_tsv(report).into_bytes()),
        Format::Json => to_json(report),
    }
}

/// Renders with a format given by name; unknown names are an error.
pub fn render_named(report: &AuditReport, format: &str) -> Result<Vec<u8>> {
    render(report, format.parse()?)
}

pub fn parse_json_report(bytes: &[u8]) -> Result<AuditReport> {
    serde_json::from_slice(bytes).map_err(|e| Error::Serialize(e.to_string()))
}

fn render_section(table: Table, json: Result<Vec<u8>>, title: &str, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Markdown => {
            let mut out = format!("# {title}\n\n");
            table.markdown(&mut out);
            Ok(out.into_bytes())
        }
        Format::Tsv => Ok(table.tsv().into_bytes()),
        Format::Json => json,
    }
}

/// Writes `<dataset>.<characteristic>.<kind>.<ext>` files; whole-report and
/// regression files use `all` as the characteristic.
pub fn write_outputs(report: &AuditReport, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut write = |name: String, bytes: Vec<u8>| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(())
    };
    let ds = &report.dataset;
    for &format in formats {
        let ext = format.extension();
        write(format!("{ds}.all.report.{ext}"), render(report, format)?)?;
        for s in &report.characteristics {
            let c = s.characteristic;
            let human = format == Format::Markdown;
            write(
                format!("{ds}.{c}.distribution.{ext}"),
                render_section(
                    distribution_table(s, human),
                    to_json(&s.distribution),
                    &format!("{ds}: {c} distribution"),
                    format,
                )?,
            )?;
            write(
                format!("{ds}.{c}.accuracy.{ext}"),
                render_section(
                    accuracy_table(s, human),
                    to_json(&s.accuracy),
                    &format!("{ds}: {c} accuracy"),
                    format,
                )?,
            )?;
            write(
                format!("{ds}.{c}.chi2.{ext}"),
                render_section(
                    chi2_table(&s.screen, human),
                    to_json(&s.screen),
                    &format!("{ds}: {c} chi-squared"),
                    format,
                )?,
            )?;
        }
        if let Some(reg) = &report.regression {
            write(
                format!("{ds}.all.regression.{ext}"),
                render_section(
                    regression_table(reg, format == Format::Markdown),
                    to_json(reg),
                    &format!("{ds}: regression (p < 0.1)"),
                    format,
                )?,
            )?;
        }
    }
    Ok(written)
}
