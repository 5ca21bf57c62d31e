use thinflow::config;
use thinflow::experiments::{run_surface_rate, run_thin_rate, SweepConfig};

fn small(extra: &[&str]) -> SweepConfig {
    let mut o: Vec<String> = ["grid.m_theta=64", "grid.m_sigma=8", "time.T=0.1", "time.snapshots=5"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    o.extend(extra.iter().map(|s| s.to_string()));
    config::load("", &o).unwrap().sweep
}

#[test]
fn zero_data_gives_zero_errors_and_no_fit() {
    let cfg = small(&["init.params=[0.0, 0.0, 0.0]", "gl.components=1"]);
    let report = run_surface_rate(&cfg).unwrap();
    for r in &report.runs {
        assert!(r.errors.err_c <= 1e-12 && r.errors.err_h1 <= 1e-12);
        assert_eq!(r.final_field.values.iter().fold(0.0f64, |a, v| a.max(v.abs())), 0.0);
    }
    let fit = report.rates.iter().find(|r| r.name == "err_C").unwrap();
    assert!(fit.fit.is_err());
}

#[test]
fn flat_band_with_constant_thickness_is_exact() {
    // With σ-independent data and a constant profile the two problems coincide,
    // so at equal resolution only round-off remains.
    let cfg = small(&[
        "geometry.family=flat",
        "geometry.params=[6.283185307179586]",
        "profile.g0=[0.0]",
        "profile.g1=[1.0]",
        "grid.reference_factor=1",
    ]);
    let report = run_thin_rate(&cfg).unwrap();
    for r in &report.runs {
        assert!(r.errors.err_c < 1e-12, "{:?}", r.errors);
        assert!(r.errors.err_thin < 1e-10, "{:?}", r.errors);
    }
}

#[test]
fn surface_rate_on_the_uniform_annulus() {
    let cfg = config::load("", &["profile.g1=[1.0]".into(), "grid.m_theta=128".into(), "grid.m_sigma=16".into()])
        .unwrap()
        .sweep;
    let report = run_surface_rate(&cfg).unwrap();
    let slope = report.rate("err_C").unwrap().slope;
    assert!((0.8..=1.25).contains(&slope), "{slope}");
}

#[test]
fn normal_perturbation_of_order_epsilon_keeps_the_thin_rate() {
    let cfg = config::load(
        "",
        &[
            "init.family=normal_perturbed".into(),
            "init.params=[1.0, 1.0, 0.5, 0.6, 0.0, 0.0, 0.3, 0.2, 0.0, 0.7, 0.3, 0.0]".into(),
            "grid.m_theta=128".into(),
            "grid.m_sigma=16".into(),
        ],
    )
    .unwrap()
    .sweep;
    let report = run_thin_rate(&cfg).unwrap();
    let slope = report.rate("err_thin").unwrap().slope;
    assert!(slope >= 0.9, "{slope}");
}
