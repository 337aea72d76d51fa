//! Learners written from scratch: Gaussian Naive Bayes, random forests,
//! Pegasos linear SVMs; plus the negative-voting rule and F1 threshold
//! search used to combine necessity scorers.

mod ensemble;
mod forest;
mod gnb;
mod svm;

pub use ensemble::{ensemble_predict, learn_threshold, threshold_grid, EnsembleConfig, MemberVote};
pub use forest::{
    forest_predict_proba, train_forest, DecisionTree, ForestConfig, ForestModel, MaxFeatures, Node,
};
pub use gnb::{gnb_predict_proba, train_gnb, GnbClass, GnbConfig, GnbModel};
pub use svm::{
    svm_margins, train_linear_svm, train_svm_ovr, LinearSvm, SvmBinaryModel, SvmConfig, SvmOvrModel,
};

use crate::corpus::IssueReport;
use crate::error::{Error, Result};
use crate::features::{FeatureVector, SchemaId};

pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn check_schema(expected: SchemaId, width: usize, x: &FeatureVector) -> Result<()> {
    if x.schema != expected {
        return Err(Error::SchemaMismatch {
            expected: expected.to_string(),
            actual: x.schema.to_string(),
        });
    }
    if x.len() != width {
        return Err(Error::SchemaMismatch {
            expected: format!("width {width}"),
            actual: format!("width {}", x.len()),
        });
    }
    Ok(())
}

/// Anything that can vote on whether a report needs a screenshot.
///
/// Built-in members score the encoded features; external scorers (a
/// language model, say) are free to look at the report text instead.
pub trait NecessityScorer: Send + Sync {
    fn name(&self) -> &str;

    /// Probability in `[0, 1]` that the report benefits from a screenshot.
    fn score(&self, report: &IssueReport, features: &FeatureVector) -> Result<f64>;
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_values() {
        assert_eq!(logistic(0.0), 0.5);
        assert!((logistic(2.0) - 0.880_797).abs() < 1e-6);
        assert!((logistic(-2.0) - 0.119_203).abs() < 1e-6);
        assert_eq!(logistic(-1000.0), 0.0);
        assert_eq!(logistic(1000.0), 1.0);
    }

    #[test]
    fn schema_mismatch_is_reported() {
        let x = test_support::vectors(&[&[1.0]]);
        let other: SchemaId = "ffffffffffffffffffffffffffffffff".parse().unwrap();
        assert!(matches!(
            check_schema(other, 1, &x[0]),
            Err(Error::SchemaMismatch { .. })
        ));
        assert!(check_schema(x[0].schema, 2, &x[0]).is_err());
    }
}
