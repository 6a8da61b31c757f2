//! Classical baselines over per-event feature vectors.

mod svm;
mod tree;

pub use svm::{
    dual_objective, kernel_matrix, rbf_kernel, svm_fit_binary, svm_fit_multiclass, BinaryFit,
    BinarySvm, MulticlassSvm, Standardizer, SvmConfig,
};
pub use tree::{dt_fit, dt_predict, gini_impurity, DecisionTree, DtConfig, Node};

use serde::{Deserialize, Serialize};

use crate::data::{truncate_window, TimeSeriesEvent};
use crate::error::Result;
use crate::gaf::{encode_series, paa_reduce};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// PAA-reduced truncated series.
    #[default]
    RawSeries,
    /// Row-major flattened GAF image.
    FlattenedGaf,
}

/// How an event becomes a baseline feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub mode: FeatureMode,
    pub window_s: f64,
    pub size: usize,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            mode: FeatureMode::RawSeries,
            window_s: 30.0,
            size: 64,
        }
    }
}

impl FeatureSpec {
    pub fn dimension(&self) -> usize {
        match self.mode {
            FeatureMode::RawSeries => self.size,
            FeatureMode::FlattenedGaf => self.size * self.size,
        }
    }
}

pub fn featurize(event: &TimeSeriesEvent, spec: &FeatureSpec) -> Result<Vec<f64>> {
    let window = truncate_window(event, spec.window_s)?;
    match spec.mode {
        FeatureMode::RawSeries => paa_reduce(window.samples(), spec.size),
        FeatureMode::FlattenedGaf => Ok(encode_series(window.samples(), spec.size)?.values().to_vec()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Label;

    fn event(samples: Vec<f64>) -> TimeSeriesEvent {
        TimeSeriesEvent::new("e", Label::GenerationTrip, 10.0, samples).unwrap()
    }

    #[test]
    fn feature_dimensions() {
        let e = event((0..600).map(|i| (i as f64 * 0.05).cos()).collect());
        let raw = featurize(&e, &FeatureSpec::default()).unwrap();
        assert_eq!(raw.len(), 64);
        let gaf = FeatureSpec {
            mode: FeatureMode::FlattenedGaf,
            ..FeatureSpec::default()
        };
        assert_eq!(featurize(&e, &gaf).unwrap().len(), 4096);
        assert_eq!(gaf.dimension(), 4096);
    }

    #[test]
    fn constant_event_gaf_features() {
        let spec = FeatureSpec {
            mode: FeatureMode::FlattenedGaf,
            ..FeatureSpec::default()
        };
        let f = featurize(&event(vec![1.0; 600]), &spec).unwrap();
        assert!(f.iter().all(|&v| (v + 0.5).abs() < 1e-15));
    }
}
