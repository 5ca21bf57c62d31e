use thinflow::averaging::average;
use thinflow::config::RunConfig;
use thinflow::thin_solver::{step, ThinOperator, ThinSolverConfig};
use thinflow::ThinGrid;

#[test]
fn average_commutes_with_time_differences() {
    let cfg = RunConfig::default();
    let grid = ThinGrid::new(&cfg.thin_domain().unwrap(), 64, 8).unwrap();
    let op = ThinOperator::new(&grid);
    let solver = ThinSolverConfig::new(1e-3, 1e-2);
    let mut u = cfg.sweep.init.thin_data(&grid).unwrap();
    for _ in 0..5 {
        let next = step(&op, &u, &cfg.sweep.params, &solver).unwrap();
        let lhs = average(&grid, &next).unwrap().sub(&average(&grid, &u).unwrap());
        let rhs = average(&grid, &next.sub(&u)).unwrap();
        let scale = rhs.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let err = lhs.sub(&rhs).values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(scale > 0.0 && err <= 1e-13 * scale.max(1.0), "{err} vs {scale}");
        u = next;
    }
}
