//! Wald z statistics and significance tiers.

use serde::{Deserialize, Serialize};

use super::linalg::Matrix;
use super::special::normal_two_sided_p;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignificanceTier {
    /// p < 0.01
    P01,
    /// p < 0.05
    P05,
    /// p < 0.1
    P10,
    NotReportable,
}

impl SignificanceTier {
    pub fn from_p(p: f64) -> Self {
        if p < 0.01 {
            SignificanceTier::P01
        } else if p < 0.05 {
            SignificanceTier::P05
        } else if p < 0.1 {
            SignificanceTier::P10
        } else {
            SignificanceTier::NotReportable
        }
    }

    pub fn marker(self) -> &'static str {
        match self {
            SignificanceTier::P01 => "***",
            SignificanceTier::P05 => "**",
            SignificanceTier::P10 => "*",
            SignificanceTier::NotReportable => "",
        }
    }

    pub fn reportable(self) -> bool {
        self != SignificanceTier::NotReportable
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaldRow {
    pub name: String,
    pub coefficient: f64,
    pub std_error: f64,
    pub z: f64,
    pub p_value: f64,
    pub tier: SignificanceTier,
}

pub fn wald_test(name: &str, coefficient: f64, variance: f64) -> Result<WaldRow> {
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::NonPositiveVariance {
            feature: name.to_owned(),
            variance,
        });
    }
    let std_error = variance.sqrt();
    let z = coefficient / std_error;
    let p_value = normal_two_sided_p(z);
    Ok(WaldRow {
        name: name.to_owned(),
        coefficient,
        std_error,
        z,
        p_value,
        tier: SignificanceTier::from_p(p_value),
    })
}

/// One row per coefficient, variances taken from the covariance diagonal.
pub fn wald_tests(names: &[String], coefficients: &[f64], covariance: &Matrix) -> Result<Vec<WaldRow>> {
    if names.len() != coefficients.len() || covariance.rows != coefficients.len() {
        return Err(Error::Misaligned(format!(
            "{} names, {} coefficients, covariance of order {}",
            names.len(),
            coefficients.len(),
            covariance.rows
        )));
    }
    names
        .iter()
        .zip(coefficients)
        .zip(covariance.diagonal())
        .map(|((n, &b), v)| wald_test(n, b, v))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_coefficient() {
        let r = wald_test("x", 0.0, 2.0).unwrap();
        assert_eq!(r.z, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.tier, SignificanceTier::NotReportable);
    }

    #[test]
    fn sign_symmetry() {
        for b in [0.1, 0.7, 2.5, 9.0] {
            let pos = wald_test("x", b, 0.3).unwrap();
            let neg = wald_test("x", -b, 0.3).unwrap();
            assert_eq!(pos.p_value, neg.p_value);
            assert_eq!(pos.z, -neg.z);
        }
    }

    #[test]
    fn tier_boundaries() {
        assert_eq!(SignificanceTier::from_p(0.0099), SignificanceTier::P01);
        assert_eq!(SignificanceTier::from_p(0.01), SignificanceTier::P05);
        assert_eq!(SignificanceTier::from_p(0.05), SignificanceTier::P10);
        assert_eq!(SignificanceTier::from_p(0.1), SignificanceTier::NotReportable);
    }

    #[test]
    fn non_positive_variance_names_feature() {
        match wald_test("o_science_tech", 1.0, 0.0) {
            Err(Error::NonPositiveVariance { feature, .. }) => assert_eq!(feature, "o_science_tech"),
            other => panic!("{other:?}"),
        }
        assert!(wald_test("x", 1.0, -1.0).is_err());
        assert!(wald_test("x", 1.0, f64::NAN).is_err());
    }
}
