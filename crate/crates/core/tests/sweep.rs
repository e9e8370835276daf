use widomlab::harness::{run_sweep, write_table_csv, Experiment, ExperimentConfig};
use widomlab::spectra::{trace_from_eigenvalues, TestFunction};

fn entropy_config(min_points: usize) -> String {
    format!(
        r#"{{
  "schema_version": 1,
  "dimension": 1,
  "lambda": {{"kind": "interval", "a": 0, "b": 1}},
  "gamma": {{"kind": "interval", "a": -1, "b": 1}},
  "a1": {{"kind": "identity", "n": 1}},
  "test_function": {{"kind": "von_neumann"}},
  "l_values": [10, 20, 40, 80],
  "grid": {{"min_points": {min_points}}}
}}"#
    )
}

fn experiment(text: &str) -> Experiment {
    Experiment::new(ExperimentConfig::from_json(text).unwrap()).unwrap()
}

fn csv_of(exp: &Experiment) -> Vec<u8> {
    let rows = run_sweep(exp).unwrap();
    let mut out = Vec::new();
    write_table_csv(&rows, &mut out).unwrap();
    out
}

#[test]
fn repeated_sweeps_are_bit_identical() {
    let exp = experiment(&entropy_config(8));
    let first = csv_of(&exp);
    let second = csv_of(&exp);
    assert_eq!(first, second);
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("L,trace,N,clamp\n"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn projection_spectra_need_no_clamping() {
    // The sampled sine kernel is a compression of a projection, so its
    // eigenvalues stay in [0, 1] up to roundoff at every resolution.
    for min_points in [64, 128, 256] {
        let rows = run_sweep(&experiment(&entropy_config(min_points))).unwrap();
        for r in &rows {
            assert!(r.grid_n >= min_points);
            assert!(r.clamp.is_finite() && r.clamp <= 1e-12, "N = {}: clamp {}", r.grid_n, r.clamp);
            assert!(r.trace > 0.0);
        }
    }
}

#[test]
fn clamp_total_accounts_for_every_displacement() {
    let h = TestFunction::von_neumann();
    let eigs = [-3e-7, 0.25, 0.5, 1.0 + 2e-7, 1.0 + 5e-6];
    let st = trace_from_eigenvalues(&eigs, &h, Some((0.0, 1.0))).unwrap();
    assert!((st.clamp_total - 5.5e-6).abs() <= 1e-15, "{}", st.clamp_total);
    assert!((st.clamp_max - 5e-6).abs() <= 1e-15);
    assert_eq!(st.eigen_count, 5);
    let unclamped = trace_from_eigenvalues(&[0.25, 0.5], &h, None).unwrap();
    assert_eq!(unclamped.clamp_total, 0.0);
}
