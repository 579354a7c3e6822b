use std::path::PathBuf;

use permsym::config::RunConfig;
use permsym::lindblad::EvolveOptions;
use permsym::models::{Model, ModelKind, ModelSpec};
use permsym::runner::execute;

fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

#[test]
fn shipped_scenarios_parse() {
    let mut count = 0;
    for entry in std::fs::read_dir(scenario_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "cfg") {
            let text = std::fs::read_to_string(&path).unwrap();
            let cfg = RunConfig::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
            assert_eq!(cfg.output_name(), stem);
            count += 1;
        }
    }
    assert!(count >= 13);
}

#[test]
fn halving_tolerances_changes_little() {
    let spec = ModelSpec::new(ModelKind::TavisCummings, 3);
    let model = Model::build(&spec).unwrap();
    let grid = spec.time_grid();
    let coarse = model.evolve(&grid, &EvolveOptions::default()).unwrap();
    let fine_opts = EvolveOptions {
        rtol: 0.5e-8,
        atol: 0.5e-10,
        ..EvolveOptions::default()
    };
    let fine = model.evolve(&grid, &fine_opts).unwrap();
    for (a, b) in coarse.series.iter().zip(&fine.series) {
        let d = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(d < 1e-6, "{d}");
    }
}

#[test]
fn three_level_reference_agrees_on_a_small_case() {
    let cfg = RunConfig::parse(
        "model = THREE_LEVEL\nn = 3\ncavity_dim = 7\nt_max_fs = 40\nsamples = 81\noracle = true\n",
    )
    .unwrap();
    let out = execute(&cfg, false).unwrap();
    let o = out.oracle.unwrap();
    assert!(o.deviation.max() < 1e-6, "{:?}", o.deviation);
    assert!(o.deviation.per_observable.iter().any(|(n, _)| n == "dipole_pair"));
}

#[test]
fn populations_sum_to_one() {
    let cfg = RunConfig::parse("model = THREE_LEVEL\nn = 4\ncavity_dim = 9\nt_max_fs = 30\nsamples = 31\n")
        .unwrap();
    let out = execute(&cfg, false).unwrap();
    let t = &out.trajectory;
    let pops: Vec<&[f64]> = (1..=3)
        .map(|k| t.observable(&format!("population_{k}")).unwrap())
        .collect();
    for i in 0..t.times_fs.len() {
        let total: f64 = pops.iter().map(|p| p[i]).sum();
        assert!((total - 4.0).abs() < 1e-9, "{total}");
    }
    assert!(out.emitter_number_error < 1e-9);
}

#[test]
fn lossless_tc_conserves_excitations() {
    let cfg = RunConfig::parse("model = TC\nn = 4\ngamma_c = 0\nt_max_fs = 50\nsamples = 26\n").unwrap();
    let out = execute(&cfg, false).unwrap();
    let t = &out.trajectory;
    let cav = t.observable("cavity_population").unwrap();
    let exc = t.observable("excited_population").unwrap();
    for (c, e) in cav.iter().zip(exc) {
        assert!((c + e - 4.0).abs() < 1e-8);
    }
    assert!(out.truncation_exact);
}
