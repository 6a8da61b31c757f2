//! Fit the decision tree and RBF SVM baselines on hand-built feature vectors
//! (PAA-reduced raw series and flattened GAF images).
//!
//! ```text
//! cargo run --release --example baselines
//! ```

use pmu_gaf::baselines::{dt_fit, featurize, svm_fit_multiclass, DtConfig, FeatureMode, FeatureSpec, SvmConfig};
use pmu_gaf::data::{stratified_split, Dataset};
use pmu_gaf::synth::{build_dataset, reference_counts, GeneratorConfig};

fn features(data: &Dataset, spec: &FeatureSpec) -> pmu_gaf::Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let x = data.events().iter().map(|e| featurize(e, spec)).collect::<pmu_gaf::Result<_>>()?;
    let y = data.events().iter().map(|e| e.label().index()).collect();
    Ok((x, y))
}

fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    predicted.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / truth.len() as f64
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = build_dataset(&GeneratorConfig::default(), &reference_counts())?;
    let split = stratified_split(&data, 2.0 / 3.0, 0)?;

    for (mode, size) in [(FeatureMode::RawSeries, 64), (FeatureMode::FlattenedGaf, 16)] {
        let spec = FeatureSpec {
            mode,
            window_s: 30.0,
            size,
        };
        let (xtr, ytr) = features(&split.train, &spec)?;
        let (xte, yte) = features(&split.test, &spec)?;

        let tree = dt_fit(&xtr, &ytr, &DtConfig::default())?;
        let pred = xte.iter().map(|x| tree.predict(x)).collect::<pmu_gaf::Result<Vec<_>>>()?;
        println!(
            "{mode:?} ({} features): tree depth {}, {} nodes, test acc {:.4}",
            spec.dimension(),
            tree.depth(),
            tree.nodes().len(),
            accuracy(&pred, &yte)
        );

        let svm = svm_fit_multiclass(&xtr, &ytr, &SvmConfig::default())?;
        let pred = xte.iter().map(|x| svm.predict(x)).collect::<pmu_gaf::Result<Vec<_>>>()?;
        println!("{mode:?} ({} features): one-vs-one SVM test acc {:.4}", spec.dimension(), accuracy(&pred, &yte));
    }
    Ok(())
}
