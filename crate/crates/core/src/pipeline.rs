//! End-to-end audit: load, attribute, bucket, accuracy, χ², features, L1,
//! refit, Wald, render.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attributes::{
    apply_others_bucket, assign_example, AttributeStore, Characteristic, CollapseTables,
    DemographicAssignment, DEFAULT_OTHERS_MIN,
};
use crate::corpus::{load_dataset, Fold, QAExample, TrainCountIndex};
use crate::error::{Error, Result};
use crate::features::{build_matrix, FeatureConfig, FeatureMatrix};
use crate::report::{
    distribution, screen_characteristics, subset_accuracy, write_outputs, AuditReport,
    CharacteristicSection, Format, InputRecord, Overall, Provenance, RegressionReport,
};
use crate::stats::{
    fit_logistic_l1, fit_logistic_mle, wald_tests, ChiSquaredOptions, Design, SolverSettings,
};

pub const INTERCEPT: &str = "(intercept)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditConfig {
    /// Defaults to the dev file stem.
    pub dataset_name: Option<String>,
    pub dataset_dev: PathBuf,
    pub dataset_train: Option<PathBuf>,
    pub kb: PathBuf,
    /// Directory with `nationality.tsv` and `profession.tsv`; shipped tables when absent.
    pub collapse_dir: Option<PathBuf>,
    /// Output directory; nothing is written when absent.
    pub out: Option<PathBuf>,
    pub formats: Vec<Format>,
    pub others_min: usize,
    pub alpha: f64,
    pub bonferroni_m: usize,
    pub continuity_correction: bool,
    /// Keep `not_found` and `others` rows in the χ² tables.
    pub include_unassigned: bool,
    pub solver: SolverSettings,
    pub features: FeatureConfig,
    pub seed: u64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            dataset_name: None,
            dataset_dev: PathBuf::new(),
            dataset_train: None,
            kb: PathBuf::new(),
            collapse_dir: None,
            out: None,
            formats: Format::ALL.to_vec(),
            others_min: DEFAULT_OTHERS_MIN,
            alpha: 0.05,
            bonferroni_m: 3,
            continuity_correction: false,
            include_unassigned: true,
            solver: SolverSettings::default(),
            features: FeatureConfig::default(),
            seed: 0,
        }
    }
}

impl AuditConfig {
    /// Reads a TOML config; relative paths are resolved against its directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: AuditConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut config.dataset_dev);
        resolve(&mut config.kb);
        config.dataset_train.as_mut().map(resolve);
        config.collapse_dir.as_mut().map(resolve);
        config.out.as_mut().map(resolve);
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialize(e.to_string()))
    }

    pub fn dataset_name(&self) -> String {
        self.dataset_name.clone().unwrap_or_else(|| {
            self.dataset_dev
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into())
        })
    }

    pub fn chi_squared_options(&self) -> ChiSquaredOptions {
        ChiSquaredOptions {
            alpha: self.alpha,
            bonferroni_m: self.bonferroni_m,
            continuity_correction: self.continuity_correction,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dataset_dev.as_os_str().is_empty() {
            return Err(Error::Config("dataset_dev is required".into()));
        }
        if self.kb.as_os_str().is_empty() {
            return Err(Error::Config("kb is required".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must be in (0, 1), got {}", self.alpha)));
        }
        if self.bonferroni_m == 0 {
            return Err(Error::Config("bonferroni_m must be at least 1".into()));
        }
        if self.others_min == 0 {
            return Err(Error::Config("others_min must be at least 1".into()));
        }
        if self.formats.is_empty() {
            return Err(Error::Config("at least one output format is required".into()));
        }
        self.solver.validate()?;
        self.features.validate()?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Load,
    Attribute,
    Bucket,
    Accuracy,
    ChiSquared,
    Features,
    Lasso,
    Refit,
    Wald,
    Render,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Load => "load",
            Stage::Attribute => "attribute",
            Stage::Bucket => "bucket",
            Stage::Accuracy => "accuracy",
            Stage::ChiSquared => "chi2",
            Stage::Features => "features",
            Stage::Lasso => "lasso",
            Stage::Refit => "refit",
            Stage::Wald => "wald",
            Stage::Render => "render",
        })
    }
}

#[derive(Debug, thiserror::Error)]
#[error("[{stage}] {source}")]
pub struct AuditError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

impl AuditError {
    pub fn exit_code(&self) -> i32 {
        self.source.exit_code()
    }
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, AuditError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, AuditError> {
        self.map_err(|source| AuditError { stage, source })
    }
}

#[derive(Debug)]
pub struct AuditOutcome {
    pub report: AuditReport,
    pub matrix: Option<FeatureMatrix>,
    pub written: Vec<PathBuf>,
}

/// Loaded inputs, ready for analysis.
#[derive(Debug, Clone)]
pub struct AuditInputs {
    pub dev: Vec<QAExample>,
    pub train: Vec<QAExample>,
    pub store: AttributeStore,
    pub tables: CollapseTables,
}

fn require_file(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
        ))
    }
}

pub fn load_inputs(config: &AuditConfig) -> Result<AuditInputs> {
    require_file(&config.dataset_dev)?;
    require_file(&config.kb)?;
    if let Some(train) = &config.dataset_train {
        require_file(train)?;
    }
    if let Some(dir) = &config.collapse_dir {
        require_file(dir)?;
    }
    let dev = load_dataset(&config.dataset_dev, Fold::Dev)?;
    let train = match &config.dataset_train {
        Some(p) => load_dataset(p, Fold::Train)?,
        None => Vec::new(),
    };
    let store = AttributeStore::load(&config.kb)?;
    let tables = match &config.collapse_dir {
        Some(dir) => CollapseTables::load_dir(dir)?,
        None => CollapseTables::shipped(),
    };
    Ok(AuditInputs {
        dev,
        train,
        store,
        tables,
    })
}

/// Runs every stage and writes the rendered files when `config.out` is set.
pub fn run_audit(config: &AuditConfig) -> std::result::Result<AuditOutcome, AuditError> {
    config.validate().at(Stage::Config)?;
    let inputs = load_inputs(config).at(Stage::Load)?;
    let mut outcome = audit_inputs(config, &inputs)?;
    if let Some(dir) = &config.out {
        outcome.written = write_outputs(&outcome.report, dir, &config.formats).at(Stage::Render)?;
        if let Some(m) = &outcome.matrix {
            let path = dir.join(format!("{}.all.features.tsv", outcome.report.dataset));
            fs::write(&path, m.to_tsv())
                .map_err(|e| Error::io(&path, e))
                .at(Stage::Render)?;
            outcome.written.push(path);
        }
        log::info!("[render] wrote {} files to {}", outcome.written.len(), dir.display());
    }
    Ok(outcome)
}

/// The analysis stages on already-loaded inputs; writes nothing.
pub fn audit_inputs(
    config: &AuditConfig,
    inputs: &AuditInputs,
) -> std::result::Result<AuditOutcome, AuditError> {
    let dataset = config.dataset_name();
    let mut provenance_inputs = vec![
        InputRecord {
            role: "dev".into(),
            path: config.dataset_dev.display().to_string(),
            rows: inputs.dev.len(),
        },
        InputRecord {
            role: "kb".into(),
            path: config.kb.display().to_string(),
            rows: inputs.store.len(),
        },
    ];
    if let Some(p) = &config.dataset_train {
        provenance_inputs.push(InputRecord {
            role: "train".into(),
            path: p.display().to_string(),
            rows: inputs.train.len(),
        });
    }
    let provenance = Provenance {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config_hash: config.hash(),
        inputs: provenance_inputs,
    };

    let mut assignments: Vec<DemographicAssignment> = inputs
        .dev
        .iter()
        .map(|ex| assign_example(ex, &inputs.store, &inputs.tables))
        .collect();
    let unassigned = assignments.iter().filter(|a| a.entity_ids.is_empty()).count();
    log::info!(
        "[attribute] {} examples, {} without a person entity",
        assignments.len(),
        unassigned
    );

    for c in Characteristic::ALL {
        apply_others_bucket(&mut assignments, c, config.others_min);
    }
    log::info!("[bucket] labels with fewer than {} examples pooled", config.others_min);

    let tables: Vec<_> = Characteristic::ALL
        .iter()
        .map(|&c| (c, subset_accuracy(&inputs.dev, &assignments, c)))
        .collect();
    log::info!("[accuracy] {} subset tables", tables.len());

    let screens = screen_characteristics(&tables, &config.chi_squared_options(), config.include_unassigned)
        .at(Stage::ChiSquared)?;
    for s in &screens {
        match &s.chi_squared {
            Some(r) => log::info!(
                "[chi2] {}: statistic {:.4}, dof {}, p {:.4e}, significant {}",
                s.characteristic,
                r.statistic,
                r.dof,
                r.p_value,
                r.significant
            ),
            None => log::info!(
                "[chi2] {}: skipped ({})",
                s.characteristic,
                s.skipped.as_deref().unwrap_or("")
            ),
        }
    }
    let enabled: BTreeSet<Characteristic> =
        screens.iter().filter(|s| s.enabled).map(|s| s.characteristic).collect();

    let correct = inputs.dev.iter().filter(|e| e.correct).count();
    let mut report = AuditReport {
        dataset,
        fold: Fold::Dev,
        provenance,
        overall: Overall {
            count: inputs.dev.len(),
            correct,
            accuracy: (!inputs.dev.is_empty()).then(|| correct as f64 / inputs.dev.len() as f64),
        },
        characteristics: tables
            .into_iter()
            .zip(screens)
            .map(|((c, accuracy), screen)| CharacteristicSection {
                characteristic: c,
                distribution: distribution(&accuracy),
                accuracy,
                screen,
            })
            .collect(),
        enabled: enabled.iter().copied().collect(),
        regression: None,
        regression_skipped: None,
    };

    if enabled.is_empty() {
        log::info!("[features] no significant characteristic; regression skipped");
        report.regression_skipped = Some("no characteristic significant after Bonferroni correction".into());
        return Ok(AuditOutcome {
            report,
            matrix: None,
            written: Vec::new(),
        });
    }

    let feature_config = FeatureConfig {
        enabled,
        ..config.features.clone()
    };
    let index = TrainCountIndex::build(&inputs.train);
    let matrix = build_matrix(&inputs.dev, &assignments, &index, &feature_config).at(Stage::Features)?;
    log::info!("[features] {} rows x {} columns", matrix.n_rows(), matrix.n_cols());

    report.regression = Some(explain(&matrix, &config.solver)?);
    Ok(AuditOutcome {
        report,
        matrix: Some(matrix),
        written: Vec::new(),
    })
}

/// L1 elimination, alias removal, unpenalized refit and Wald tests.
pub fn explain(
    matrix: &FeatureMatrix,
    settings: &SolverSettings,
) -> std::result::Result<RegressionReport, AuditError> {
    let design = Design::new(&matrix.data, matrix.n_rows(), matrix.n_cols(), &matrix.outcome)
        .at(Stage::Lasso)?;
    let lasso = fit_logistic_l1(&design, settings).at(Stage::Lasso)?;
    log::info!(
        "[lasso] lambda {}: {} of {} eliminated in {} iterations (converged {}, kkt {:.2e})",
        settings.lambda,
        lasso.eliminated.len(),
        matrix.n_cols(),
        lasso.iterations,
        lasso.converged,
        lasso.kkt_residual
    );
    let eliminated: BTreeSet<usize> = lasso.eliminated.iter().copied().collect();
    let survivors: Vec<usize> = (0..matrix.n_cols()).filter(|j| !eliminated.contains(j)).collect();

    // strongest L1 effects claim the column space first
    let mut order = survivors.clone();
    order.sort_by(|&a, &b| {
        lasso.coefficients[b + 1]
            .abs()
            .total_cmp(&lasso.coefficients[a + 1].abs())
            .then_with(|| matrix.names[a].cmp(&matrix.names[b]))
    });
    let (mut kept, aliased) = independent_columns(matrix, &order);
    kept.sort_unstable();
    if !aliased.is_empty() {
        log::info!(
            "[refit] aliased columns dropped: {}",
            aliased.iter().map(|&j| matrix.names[j].as_str()).collect::<Vec<_>>().join(", ")
        );
    }

    let reduced = matrix.select(&kept);
    let design = Design::new(&reduced.data, reduced.n_rows(), reduced.n_cols(), &reduced.outcome)
        .at(Stage::Refit)?;
    let fit = fit_logistic_mle(&design, settings).at(Stage::Refit)?;
    log::info!(
        "[refit] {} features, {} iterations, max |gradient| {:.2e}, converged {}",
        reduced.n_cols(),
        fit.iterations,
        fit.max_abs_gradient,
        fit.converged
    );

    let mut names = vec![INTERCEPT.to_owned()];
    names.extend(reduced.names.iter().cloned());
    let mut rows = wald_tests(&names, &fit.coefficients, &fit.covariance).at(Stage::Wald)?;
    let intercept = rows.remove(0);
    rows.sort_by(|a, b| a.p_value.total_cmp(&b.p_value).then_with(|| a.name.cmp(&b.name)));
    log::info!(
        "[wald] {} of {} features with p < 0.1",
        rows.iter().filter(|r| r.tier.reportable()).count(),
        rows.len()
    );

    Ok(RegressionReport {
        n_rows: matrix.n_rows(),
        lambda: settings.lambda,
        intercept,
        features: rows,
        lasso_eliminated: lasso.eliminated.iter().map(|&j| matrix.names[j].clone()).collect(),
        aliased: aliased.iter().map(|&j| matrix.names[j].clone()).collect(),
        zero_columns: matrix.dropped.clone(),
        log_likelihood: fit.log_likelihood,
        lasso_iterations: lasso.iterations,
        lasso_converged: lasso.converged,
        lasso_kkt_residual: lasso.kkt_residual,
        refit_iterations: fit.iterations,
        refit_converged: fit.converged,
        quasi_separation: fit.quasi_separation,
    })
}

/// Gram-Schmidt over the intercept then `order`; returns (independent, aliased).
fn independent_columns(matrix: &FeatureMatrix, order: &[usize]) -> (Vec<usize>, Vec<usize>) {
    const REL_TOL: f64 = 1e-9;
    let n = matrix.n_rows();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    if n > 0 {
        let scale = 1.0 / (n as f64).sqrt();
        basis.push(vec![scale; n]);
    }
    let (mut kept, mut aliased) = (Vec::new(), Vec::new());
    for &j in order {
        let mut v = matrix.column(j);
        let norm0 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        // two passes for numerical orthogonality
        for _ in 0..2 {
            for q in &basis {
                let dot: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= dot * b);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm0 == 0.0 || norm <= REL_TOL * norm0 {
            aliased.push(j);
        } else {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
            kept.push(j);
        }
    }
    (kept, aliased)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(names: &[&str], cols: &[Vec<f64>], outcome: Vec<f64>) -> FeatureMatrix {
        let n = outcome.len();
        let mut data = Vec::new();
        for r in 0..n {
            for c in cols {
                data.push(c[r]);
            }
        }
        FeatureMatrix {
            names: names.iter().map(|s| s.to_string()).collect(),
            example_ids: (0..n).map(|i| i.to_string()).collect(),
            data,
            outcome,
            dropped: vec![],
        }
    }

    #[test]
    fn aliasing_drops_dependent_columns() {
        let a = vec![1.0, 0.0, 1.0, 0.0, 1.0];
        let b: Vec<f64> = a.iter().map(|x| 1.0 - x).collect();
        let c = vec![0.3, 1.0, 2.0, 0.0, 5.0];
        let m = matrix(&["a", "b", "c"], &[a, b, c], vec![1.0, 0.0, 1.0, 1.0, 0.0]);
        let (kept, aliased) = independent_columns(&m, &[0, 1, 2]);
        assert_eq!(kept, vec![0, 2]);
        assert_eq!(aliased, vec![1]);
        let (kept, aliased) = independent_columns(&m, &[1, 0, 2]);
        assert_eq!(kept, vec![1, 2]);
        assert_eq!(aliased, vec![0]);
    }

    #[test]
    fn config_validation() {
        let ok = AuditConfig {
            dataset_dev: "dev.jsonl".into(),
            kb: "kb.txt".into(),
            ..Default::default()
        };
        assert!(ok.validate().is_ok());
        assert_eq!(ok.dataset_name(), "dev");
        for bad in [
            AuditConfig { alpha: 0.0, ..ok.clone() },
            AuditConfig { bonferroni_m: 0, ..ok.clone() },
            AuditConfig { kb: PathBuf::new(), ..ok.clone() },
            AuditConfig { formats: vec![], ..ok.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))));
        }
        assert_ne!(ok.hash(), AuditConfig { alpha: 0.01, ..ok.clone() }.hash());
    }

    #[test]
    fn config_toml_roundtrip() {
        let config = AuditConfig {
            dataset_dev: "/data/dev.jsonl".into(),
            kb: "/data/kb.txt".into(),
            ..Default::default()
        };
        let text = config.to_toml().unwrap();
        let back: AuditConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, config);
    }
}
