use veccontract::dynamics::{DynamicalSystem, DynamicsError, IntegratorConfig, JacobianMode};

fn ex2(mode: JacobianMode) -> DynamicalSystem {
    DynamicalSystem::new(&["-x1^2 + x2", "x1 - 2*x2^2"], 2, mode).unwrap()
}

#[test]
fn identical_configs_give_identical_trajectories() {
    let sys = ex2(JacobianMode::Symbolic);
    let cfg = IntegratorConfig::new(1e-3, 0.0, 2.0).unwrap();
    let a = sys
        .integrate_variational(&[1.0, 1.0], &[1.0, 0.5], &cfg)
        .unwrap();
    let b = sys
        .integrate_variational(&[1.0, 1.0], &[1.0, 0.5], &cfg)
        .unwrap();
    assert_eq!(a.to_csv_string(), b.to_csv_string());
}

#[test]
fn csv_layout() {
    let sys = ex2(JacobianMode::Symbolic);
    let cfg = IntegratorConfig::new(0.5, 0.0, 1.0).unwrap();
    let csv = sys
        .integrate_variational(&[1.0, 1.0], &[1.0, 1.0], &cfg)
        .unwrap()
        .to_csv_string();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,x1,x2,dx1,dx2");
    assert_eq!(lines.len(), 4);
    let first: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first, vec![0.0, 1.0, 1.0, 1.0, 1.0]);
}

#[test]
fn blow_up_is_reported() {
    let sys = DynamicalSystem::new(&["x1^2"], 1, JacobianMode::Symbolic).unwrap();
    let cfg = IntegratorConfig::new(1e-3, 0.0, 5.0).unwrap();
    match sys.integrate(&[1.0], &cfg) {
        Err(DynamicsError::NonFiniteState { t }) => assert!(t > 0.9 && t < 1.2, "t = {t}"),
        other => panic!("expected blow-up, got {other:?}"),
    }
}

#[test]
fn finite_difference_jacobian_matches_symbolic() {
    let s = ex2(JacobianMode::Symbolic);
    let f = ex2(JacobianMode::FiniteDifference);
    for x in [[1.0, 1.0], [-0.3, 2.0], [0.25, 0.125]] {
        let a = s.jacobian_at(0.0, &x).unwrap();
        let b = f.jacobian_at(0.0, &x).unwrap();
        for (ra, rb) in a.iter().zip(&b) {
            for (p, q) in ra.iter().zip(rb) {
                assert!((p - q).abs() < 1e-6 * (1.0 + p.abs()));
            }
        }
    }
}

#[test]
fn abs_field_needs_no_symbolic_kink_handling() {
    let sys = DynamicalSystem::new(&["-abs(x1)"], 1, JacobianMode::FiniteDifference).unwrap();
    let j = sys.jacobian_at(0.0, &[2.0]).unwrap();
    assert!((j[0][0] + 1.0).abs() < 1e-6);
}

#[test]
fn invalid_configs_rejected() {
    assert!(IntegratorConfig::new(0.0, 0.0, 1.0).is_err());
    assert!(IntegratorConfig::new(1e-3, 1.0, 1.0).is_err());
    assert!(IntegratorConfig::new(1e-12, 0.0, 1e6).is_err());
    let sys = ex2(JacobianMode::Symbolic);
    let cfg = IntegratorConfig::new(1e-2, 0.0, 1.0).unwrap();
    assert!(sys.integrate(&[1.0], &cfg).is_err());
}

#[test]
fn time_dependent_field() {
    let sys = DynamicalSystem::new(&["cos(t)"], 1, JacobianMode::Symbolic).unwrap();
    let cfg = IntegratorConfig::new(1e-2, 0.0, 1.0).unwrap();
    let tr = sys.integrate(&[0.0], &cfg).unwrap();
    let last = tr.states().last().unwrap()[0];
    assert!((last - 1f64.sin()).abs() < 1e-10);
}
