//! End-to-end experiment pipeline: presets, determinism, CSV and SVG
//! emission, and config-driven sweeps.

use auglin::exp::{self, parse_config, run_preset, run_sweep, Cell, PlotSpec};

fn small_overrides(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

#[test]
fn every_preset_runs_at_reduced_size() {
    let cases: Vec<(&str, Vec<(&str, &str)>)> = vec![
        ("decomposition", vec![("trials", "2"), ("p", "24"), ("n", "12")]),
        ("bias-impact", vec![("trials", "2"), ("p", "16")]),
        ("asgd-convergence", vec![("trials", "1"), ("p", "16"), ("n", "8"), ("passes", "400"), ("stride", "100")]),
        ("mask-limit", vec![("trials", "2"), ("p", "24"), ("n", "12")]),
        ("augmentation-map", vec![("trials", "1"), ("p", "16"), ("n", "8")]),
        ("precomputed-double-descent", vec![("trials", "1"), ("p", "16"), ("points", "4"), ("n_max", "32")]),
        ("signal-mask", vec![("trials", "1"), ("p", "16"), ("n", "8")]),
        ("spectrum-mask", vec![("trials", "1"), ("p", "16"), ("n", "8")]),
        ("tuning-gap", vec![("trials", "1"), ("p", "16"), ("n", "8")]),
    ];
    let listed: Vec<&str> = exp::list_presets().iter().map(|(n, _)| *n).collect();
    assert_eq!(listed.len(), cases.len());
    for (name, overrides) in cases {
        assert!(listed.contains(&name), "{name} not listed");
        let table = run_preset(name, &small_overrides(&overrides), 3).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(!table.rows.is_empty(), "{name} produced no rows");
        assert!(table.metadata.iter().any(|(k, v)| k == "preset" && v == name));
        // All rows rectangular and finite where numeric.
        for row in &table.rows {
            assert_eq!(row.len(), table.columns.len());
            for cell in row {
                if let Cell::Num(v) = cell {
                    assert!(v.is_finite(), "{name} produced a non-finite value");
                }
            }
        }
    }
}

#[test]
fn unknown_preset_is_an_error() {
    let err = run_preset("no-such-preset", &[], 0).unwrap_err();
    assert!(err.to_string().contains("no-such-preset"));
}

#[test]
fn unknown_override_key_is_an_error() {
    let err = run_preset("decomposition", &small_overrides(&[("bogus", "1")]), 0).unwrap_err();
    assert!(err.to_string().contains("override.bogus"), "{err}");
}

#[test]
fn decomposition_schema_matches_contract() {
    let table =
        run_preset("decomposition", &small_overrides(&[("trials", "2"), ("p", "16"), ("n", "8")]), 7).unwrap();
    assert_eq!(table.columns, vec!["beta", "trial", "bias", "variance", "approx", "mse"]);
    // 5 beta values x 2 trials.
    assert_eq!(table.rows.len(), 10);
}

#[test]
fn same_seed_byte_identical_csv() {
    let overrides = small_overrides(&[("trials", "3"), ("p", "24"), ("n", "12")]);
    let a = exp::to_csv_string(&run_preset("decomposition", &overrides, 11).unwrap());
    let b = exp::to_csv_string(&run_preset("decomposition", &overrides, 11).unwrap());
    assert_eq!(a, b);
    let c = exp::to_csv_string(&run_preset("decomposition", &overrides, 12).unwrap());
    assert_ne!(a, c);
}

#[test]
fn csv_file_round_trip() {
    let table =
        run_preset("mask-limit", &small_overrides(&[("trials", "2"), ("p", "16"), ("n", "8")]), 5).unwrap();
    let dir = std::env::temp_dir().join("auglin_pipeline_csv");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("mask_limit.csv");
    exp::emit_csv(&table, &path).unwrap();
    let parsed = exp::read_csv(&path).unwrap();
    assert_eq!(parsed, table);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.ends_with('\n'));
}

#[test]
fn svg_from_preset_output() {
    let table = run_preset(
        "precomputed-double-descent",
        &small_overrides(&[("trials", "2"), ("p", "16"), ("points", "4"), ("n_max", "32")]),
        9,
    )
    .unwrap();
    let spec = PlotSpec {
        x: "n".into(),
        ys: vec!["mse_pre".into()],
        group_by: Some("aug_size".into()),
        log_x: true,
        log_y: true,
        title: "stacked augmentation".into(),
    };
    let svg = exp::render_svg(&table, &spec).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("<polyline"));
    // One legend entry per augmentation size.
    assert_eq!(svg.matches("class=\"legend\"").count(), 4);

    let dir = std::env::temp_dir().join("auglin_pipeline_svg");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("dd.svg");
    exp::emit_plot(&table, &spec, &path).unwrap();
    assert!(std::fs::metadata(&path).unwrap().len() > 0);
}

#[test]
fn config_sweep_end_to_end() {
    let text = "
[experiment]
trials = 3
seed = 2
metrics = mse, bias
solvers = aerm, lse

[data]
p = 16
n = 8,12
spectrum = geometric 0.9
signal = isotropic
sigma_eps = 0.3

[augmentation]
family = gaussian_noise
sigma = 0.5,1.0
";
    let cfg = parse_config(text, &[]).unwrap();
    let table = run_sweep(&cfg).unwrap();
    // 2 sigma values x 2 n values x 3 trials.
    assert_eq!(table.rows.len(), 12);
    assert_eq!(
        table.columns,
        vec!["family", "param", "n", "trial", "mse_aerm", "mse_lse", "bias_aerm", "bias_lse"]
    );
    let again = run_sweep(&cfg).unwrap();
    assert_eq!(exp::to_csv_string(&table), exp::to_csv_string(&again));
}

#[test]
fn sweep_errors_carry_grid_point() {
    // Rotation on odd p fails during validation with a field path.
    let text = "
[data]
p = 15
n = 8

[augmentation]
family = rotation
alpha = 30
";
    let err = parse_config(text, &[]).unwrap_err();
    assert!(err.to_string().contains("augmentation[0]"), "{err}");
}
