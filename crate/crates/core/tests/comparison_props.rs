use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use veccontract::cli::run_verify;
use veccontract::comparison::{
    check_qm_affine, check_qm_sampled, ComparisonForm, ComparisonSystem,
};
use veccontract::presets::{ex1_scenario, ex2_scenario, ex3_scenario, Ex1Params};
use veccontract::sampling::{FalsifierVerdict, SamplingConfig};
use veccontract::scenario::{InitialSpec, OrderingSpec, Scenario};

fn affine_sources(m: &[Vec<f64>]) -> Vec<String> {
    m.iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(j, c)| format!("({c})*u{}", j + 1))
                .collect::<Vec<_>>()
                .join(" + ")
        })
        .collect()
}

#[test]
fn metzler_and_sampler_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..100u64 {
        let n = rng.gen_range(2..=4);
        let m: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let v: f64 = rng.gen_range(-1.0..1.0);
                        if i != j && v > -0.1 && v < 0.0 {
                            0.0
                        } else {
                            v
                        }
                    })
                    .collect()
            })
            .collect();
        let phi = ComparisonSystem::new(&affine_sources(&m), ComparisonForm::U).unwrap();
        assert!(phi.affine().is_some());
        let metzler = check_qm_affine(&m).unwrap();
        let report =
            check_qm_sampled(&phi, &SamplingConfig::new(10_000, 10.0, trial), None).unwrap();
        let found = report.verdict == FalsifierVerdict::CounterexampleFound;
        assert_eq!(metzler, !found, "trial {trial}: {m:?}");
    }
}

fn presets() -> Vec<(&'static str, Scenario)> {
    let ex1b = Ex1Params::new(2, vec![1.0, 2.0], vec![0.5, 1.0], 1.0).unwrap();
    let mut ex3 = ex3_scenario();
    ex3.ordering = OrderingSpec::Componentwise;
    ex3.integrator.t_end = 3.0;
    ex3.initial = Some(InitialSpec {
        x0: vec![1.0, 1.0],
        dx0: Some(vec![0.5, 0.5]),
        u0: Some(vec![1.0, 1.0]),
    });
    vec![
        ("ex1", ex1_scenario(&Ex1Params::default())),
        ("ex1-n2", ex1_scenario(&ex1b)),
        ("ex2", ex2_scenario()),
        ("ex3", ex3),
    ]
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
        .collect()
}

#[test]
fn orthant_cone_matches_componentwise() {
    for (name, mut s) in presets() {
        s.integrator.t_end = s.integrator.t_end.min(3.0);
        let base = s.prepare().unwrap();
        let (_, a) = run_verify(&base).unwrap();
        let n = base.gain.rows();
        s.ordering = OrderingSpec::Cone { g: identity(n) };
        let (_, b) = run_verify(&s.prepare().unwrap()).unwrap();
        assert_eq!(a.dominance.verdict, b.dominance.verdict, "{name}");
        assert!(
            (a.dominance.margin - b.dominance.margin).abs() < 1e-12,
            "{name}"
        );
    }
}

#[test]
fn margin_monotone_in_initial_envelope() {
    let mut margins = Vec::new();
    for u in [5.0, 2.0, 1.1] {
        let mut s = ex2_scenario();
        s.initial.as_mut().unwrap().u0 = Some(vec![u, u]);
        let (_, r) = run_verify(&s.prepare().unwrap()).unwrap();
        margins.push(r.dominance.margin);
    }
    assert!(
        margins[0] >= margins[1] && margins[1] >= margins[2],
        "{margins:?}"
    );
}

fn check_soundness(name: &str, s: &Scenario) {
    let p = s.prepare().unwrap();
    let d0 = p.gain.norm_squared(p.dx0().unwrap()).unwrap();
    let strictly_dominated = d0.iter().zip(p.u0().unwrap()).all(|(d, u)| d < u);
    let (_, r) = run_verify(&p).unwrap();
    if r.dominance.premise.holds_on_grid && strictly_dominated {
        assert!(
            r.dominance.holds(),
            "{name}: premise holds but conclusion fails"
        );
    }
}

#[test]
fn premise_implies_conclusion_on_presets() {
    for (name, s) in presets() {
        check_soundness(name, &s);
    }
}

#[test]
fn premise_implies_conclusion_on_random_ex1() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..12 {
        let n = rng.gen_range(1..=3);
        let rho: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..3.0)).collect();
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let p = rng.gen_range(-0.9..2.0);
        let params = Ex1Params::new(n, rho, a, p).unwrap();
        let mut s = ex1_scenario(&params);
        s.integrator.dt = 1e-2;
        s.integrator.t_end = 5.0;
        check_soundness(&format!("{params:?}"), &s);
    }
}

#[test]
fn ex2_dominance_with_premise_tie_at_start() {
    let (_, r) = run_verify(&ex2_scenario().prepare().unwrap()).unwrap();
    assert!(r.dominance.holds());
    assert_eq!(r.dominance.premise.violations, 1);
    assert_eq!(r.dominance.premise.first_violation, Some(0.0));
    assert!(r.dominance.region.as_ref().unwrap().holds_on_grid);
}
