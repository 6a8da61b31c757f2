mod common;

use common::{layer_op_errors, model_errors, FD_TOLERANCE};

#[test]
fn layer_ops_match_finite_differences() {
    for seed in 0..5 {
        for (name, err) in layer_op_errors(seed) {
            assert!(err < FD_TOLERANCE, "seed {seed}: {name} max rel err {err:e}");
        }
    }
}

#[test]
fn full_models_match_finite_differences() {
    for seed in 0..5 {
        let checks = model_errors(seed);
        assert_eq!(checks.len(), 10 + 5 + 14);
        for c in &checks {
            assert!(c.max_err < FD_TOLERANCE, "seed {seed}: {} max rel err {:e}", c.name, c.max_err);
            // non-differentiable points are rare; nearly every entry is checked
            assert!(c.skipped * 20 <= c.checked, "seed {seed}: {} skipped {}", c.name, c.skipped);
        }
    }
}
