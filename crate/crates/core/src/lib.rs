//! Demographic audits of question-answering evaluation sets.
//!
//! Examples are attributed to the person entities they mention, grouped by
//! gender, nationality and profession, and screened for accuracy differences
//! with a Bonferroni-corrected χ² test. Characteristics that pass the screen
//! enter a logistic regression alongside question-level features: an L1 fit
//! eliminates weak features, an unpenalized refit gives Wald tests.
//!
//! ```no_run
//! use demaudit::pipeline::{run_audit, AuditConfig};
//!
//! let config = AuditConfig::from_file("audit.toml".as_ref()).unwrap();
//! let outcome = run_audit(&config).unwrap();
//! println!("{}", outcome.report.overall.count);
//! ```

// `!(x > 0.0)` is deliberate: NaN must fail the check
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod attributes;
pub mod corpus;
pub mod error;
pub mod features;
pub mod pipeline;
pub mod report;
pub mod stats;
pub mod synth;

pub use attributes::{AttributeStore, Characteristic, CollapseTables, DemographicAssignment};
pub use corpus::{Fold, QAExample};
pub use error::{Error, Result};
pub use pipeline::{run_audit, AuditConfig};
pub use report::{AuditReport, Format};
