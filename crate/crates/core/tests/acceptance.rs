//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

#![allow(clippy::needless_range_loop)]

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use veccontract::cli::run_verify;
use veccontract::comparison::{
    check_qm_affine, check_qm_sampled, ComparisonForm, ComparisonSystem, DominanceVerdict,
};
use veccontract::dynamics::{DynamicalSystem, IntegratorConfig, JacobianMode};
use veccontract::linalg::symmetric_eigenvalues;
use veccontract::presets::{
    ex1_scenario, ex2_scenario, ex3_analysis, ex3_matrix, Ex1Params, EX3_SCALES,
};
use veccontract::sampling::{FalsifierVerdict, SamplingConfig};
use veccontract::vnorm::GainMatrix;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if $cond {
        } else {
            return Err(format!($($fmt)+));
        }
    };
}

fn random_definite_gain(rng: &mut ChaCha8Rng) -> (GainMatrix, Vec<Vec<f64>>) {
    let m = rng.gen_range(1..=4);
    let n = rng.gen_range(1..=5);
    let mut rows: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            (0..n)
                .map(|_| {
                    if rng.gen_bool(0.3) {
                        0.0
                    } else {
                        rng.gen_range(0.0..3.0)
                    }
                })
                .collect()
        })
        .collect();
    for j in 0..n {
        let i = rng.gen_range(0..m);
        rows[i][j] += rng.gen_range(0.1..2.0);
    }
    (GainMatrix::new(&rows).expect("valid gain"), rows)
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, b: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-b..b)).collect()
}

/// Row-wise `Σ a_ij v_j²`, computed directly from the entries.
fn oracle_squared(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|r| r.iter().zip(v).map(|(w, x)| w * x * x).sum())
        .collect()
}

fn l2(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.hypot(*x))
}

fn norm_axioms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for case in 0..1000 {
        let (g, a) = random_definite_gain(&mut rng);
        let (m, n) = (a.len(), a[0].len());
        let dx = random_vec(&mut rng, n, 10.0);
        let dy = random_vec(&mut rng, n, 10.0);
        let c = rng.gen_range(-5.0..5.0);
        let lam: f64 = rng.gen_range(0.0..=1.0);

        let nx = g.norm(&dx).unwrap().into_inner();
        let ny = g.norm(&dy).unwrap().into_inner();
        let zero = g.norm(&vec![0.0; n]).unwrap().into_inner();
        ensure!(zero.iter().all(|&v| v == 0.0), "case {case}: norm(0) != 0");
        ensure!(
            nx.iter().any(|&v| v > 0.0),
            "case {case}: norm vanishes at nonzero {dx:?}"
        );
        let mut unit = vec![0.0; n];
        unit[rng.gen_range(0..n)] = 1e-8;
        ensure!(
            g.norm(&unit).unwrap().components().iter().any(|&v| v > 0.0),
            "case {case}: definite norm vanishes on a coordinate direction"
        );

        let ns = g
            .norm(&dx.iter().map(|v| c * v).collect::<Vec<_>>())
            .unwrap()
            .into_inner();
        for i in 0..m {
            ensure!(
                (ns[i] - c.abs() * nx[i]).abs() <= 1e-12 * (1.0 + ns[i]),
                "case {case}: homogeneity {} vs {}",
                ns[i],
                c.abs() * nx[i]
            );
        }
        let sum: Vec<f64> = dx.iter().zip(&dy).map(|(a, b)| a + b).collect();
        let nsum = g.norm(&sum).unwrap().into_inner();
        for i in 0..m {
            ensure!(
                nsum[i] <= nx[i] + ny[i] + 1e-9,
                "case {case}: triangle row {i}"
            );
        }

        let mix: Vec<f64> = dx
            .iter()
            .zip(&dy)
            .map(|(a, b)| lam * a + (1.0 - lam) * b)
            .collect();
        let (fm, fx, fy) = (
            g.norm_squared(&mix).unwrap(),
            g.norm_squared(&dx).unwrap(),
            g.norm_squared(&dy).unwrap(),
        );
        for i in 0..m {
            ensure!(
                fm[i] <= lam * fx[i] + (1.0 - lam) * fy[i] + 1e-9,
                "case {case}: convexity row {i}"
            );
        }

        let k = 40.0 * g.max_entry() * n as f64 * m as f64;
        let diff: Vec<f64> = fx.iter().zip(&fy).map(|(a, b)| a - b).collect();
        let step: Vec<f64> = dx.iter().zip(&dy).map(|(a, b)| a - b).collect();
        ensure!(l2(&diff) <= k * l2(&step), "case {case}: Lipschitz bound");

        let oracle = oracle_squared(&a, &dx);
        for i in 0..m {
            ensure!(
                (fx[i] - oracle[i]).abs() <= 1e-12 * (1.0 + oracle[i]),
                "case {case}: squared norm"
            );
        }
    }
    Ok("1000 cases".into())
}

fn frechet() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for case in 0..200 {
        let (g, a) = random_definite_gain(&mut rng);
        let n = a[0].len();
        let dx = random_vec(&mut rng, n, 5.0);
        let h = random_vec(&mut rng, n, 5.0);
        let eps = 1e-4;
        let plus: Vec<f64> = dx.iter().zip(&h).map(|(x, d)| x + eps * d).collect();
        let minus: Vec<f64> = dx.iter().zip(&h).map(|(x, d)| x - eps * d).collect();
        let fd: Vec<f64> = oracle_squared(&a, &plus)
            .iter()
            .zip(oracle_squared(&a, &minus))
            .map(|(p, q)| (p - q) / (2.0 * eps))
            .collect();
        let an = g.frechet_apply(&dx, &h).unwrap();
        let scale = an
            .iter()
            .chain(&fd)
            .fold(0.0f64, |s, v| s.max(v.abs()))
            .max(1e-300);
        for (x, y) in an.iter().zip(&fd) {
            let rel = (x - y).abs() / scale;
            worst = worst.max(rel);
            ensure!(rel <= 1e-5, "case {case}: relative error {rel:e}");
        }
    }
    Ok(format!("200 cases, worst relative error {worst:.1e}"))
}

fn euclidean_reduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let n = rng.gen_range(1..=10);
        let g = GainMatrix::new(&[vec![1.0; n]]).unwrap();
        let v = random_vec(&mut rng, n, 10.0);
        let got = g.norm(&v).unwrap().components()[0];
        let err = (got - l2(&v)).abs();
        worst = worst.max(err);
        ensure!(err <= 1e-12, "case {case}: |{got} - {}| = {err:e}", l2(&v));
    }
    Ok(format!("1000 vectors, worst error {worst:.1e}"))
}

fn example2() -> Outcome {
    let p = ex2_scenario().prepare().map_err(|e| e.to_string())?;
    ensure!(p.x0().unwrap() == [1.0, 1.0], "x0");
    ensure!(p.u0().unwrap() == [5.0, 5.0], "w(0)");
    let d0 = p.gain.norm_squared(p.dx0().unwrap()).unwrap();
    ensure!(d0 == [1.0, 1.0], "D(0) = {d0:?}");
    ensure!(
        p.scenario.integrator.dt == 1e-3 && p.scenario.integrator.t_end == 5.0,
        "grid"
    );
    let (_, r) = run_verify(&p).map_err(|f| f.message)?;
    let d = &r.dominance;
    ensure!(
        d.verdict == DominanceVerdict::HoldsOnGrid,
        "verdict {:?}",
        d.verdict
    );
    ensure!(
        d.margins.iter().all(|&m| m > 0.0),
        "non-positive margin on the grid"
    );
    ensure!(d.margin > 0.0, "margin {}", d.margin);
    for (k, t) in d.times.iter().enumerate().skip(1) {
        if *t <= 0.5 {
            continue;
        }
        for i in 0..2 {
            ensure!(
                d.distance[k][i] < d.distance[k - 1][i],
                "D{} not decreasing at t = {t}",
                i + 1
            );
        }
    }
    Ok(format!("{} steps, min margin {:.3e}", d.steps, d.margin))
}

fn example1() -> Outcome {
    let params = Ex1Params::default();
    ensure!(
        params.n == 1 && params.rho == [1.0] && params.a == [1.0] && params.p == 1.0,
        "defaults"
    );
    let m = params.comparison_matrix();
    ensure!(check_qm_affine(&m).unwrap(), "M not Metzler: {m:?}");

    // Roots of λ² − tr·λ + det.
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = (tr * tr - 4.0 * det).sqrt();
    let roots = [(tr - disc) / 2.0, (tr + disc) / 2.0];
    let expect = [-2.0 - 2f64.sqrt(), -2.0 + 2f64.sqrt()];
    for (r, e) in roots.iter().zip(expect) {
        ensure!((r - e).abs() < 1e-12, "characteristic root {r} vs {e}");
    }
    let lib = symmetric_eigenvalues(&m, 1e-12);
    let mut lib_sorted = lib.clone();
    lib_sorted.sort_by(f64::total_cmp);
    for (r, e) in lib_sorted.iter().zip(expect) {
        ensure!((r - e).abs() < 1e-9, "library eigenvalue {r} vs {e}");
    }

    let c = params.condition();
    ensure!(c.lhs == 4.0 && c.rhs == 1.0 && c.holds, "condition {c:?}");

    let p = ex1_scenario(&params).prepare().map_err(|e| e.to_string())?;
    let (_, r) = run_verify(&p).map_err(|f| f.message)?;
    ensure!(r.dominance.holds(), "dominance {:?}", r.dominance.verdict);
    let last = r.dominance.envelope.last().unwrap();
    let first = &r.dominance.envelope[0];
    ensure!(
        last.iter().zip(first).all(|(a, b)| *a < 1e-2 * b),
        "R(T) = {last:?} did not decay"
    );
    let lambda = r.envelope_rate.ok_or("no rate estimate")?;
    let target = (2.0 - 2f64.sqrt()) / 2.0;
    ensure!(
        (lambda - target).abs() <= 0.1 * target,
        "rate {lambda} vs {target}"
    );
    Ok(format!(
        "eigenvalues {:.6}, {:.6}; rate {lambda:.6} (target {target:.6})",
        roots[0], roots[1]
    ))
}

fn example3() -> Outcome {
    ensure!(
        !check_qm_affine(&ex3_matrix()).unwrap(),
        "Metzler test returned true"
    );
    let r = ex3_analysis(&SamplingConfig::new(2000, 10.0, 0)).map_err(|e| e.to_string())?;
    ensure!(!r.metzler, "report says Metzler");
    ensure!(
        r.face_i.pairings.len() == EX3_SCALES.len(),
        "face (i) pairings"
    );
    for (p, w) in r.face_i.pairings.iter().zip(EX3_SCALES) {
        ensure!(p.phi == [1.0, -1.0], "face (i) witness {:?}", p.phi);
        ensure!(p.pairing == 1.5 * w, "face (i) at w = {w}: {}", p.pairing);
        ensure!(p.in_dual, "(1, -1) should lie in the dual cone");
    }
    let printed: Vec<_> = r
        .face_ii
        .pairings
        .iter()
        .filter(|p| p.phi == [1.0, -3.0])
        .collect();
    ensure!(printed.len() == EX3_SCALES.len(), "face (ii) pairings");
    for (p, w) in printed.iter().zip(EX3_SCALES) {
        ensure!(p.pairing == 2.5 * w, "face (ii) at w = {w}: {}", p.pairing);
        ensure!(!p.in_dual, "(1, -3) reported inside the dual cone");
    }
    Ok("1.5w on face (i); 2.5w with (1,-3) outside K* on face (ii)".into())
}

fn rk4_order() -> Outcome {
    let sys = DynamicalSystem::new(&["-x1"], 1, JacobianMode::Symbolic).unwrap();
    let max_err = |dt: f64| {
        let cfg = IntegratorConfig::new(dt, 0.0, 1.0).unwrap();
        let tr = sys.integrate(&[1.0], &cfg).unwrap();
        tr.times()
            .iter()
            .zip(tr.states())
            .map(|(t, x)| (x[0] - (-t).exp()).abs())
            .fold(0.0f64, f64::max)
    };
    let ratio = max_err(0.1) / max_err(0.05);
    ensure!((14.0..=18.0).contains(&ratio), "ratio {ratio}");
    Ok(format!("ratio {ratio:.3}"))
}

fn planted_violations() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut caught = 0;
    for trial in 0..100u64 {
        let n = rng.gen_range(2..=4);
        let mut m: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            rng.gen_range(-3.0..1.0)
                        } else {
                            rng.gen_range(0.0..2.0)
                        }
                    })
                    .collect()
            })
            .collect();
        let i = rng.gen_range(0..n);
        let j = (i + rng.gen_range(1..n)) % n;
        m[i][j] = -0.1;
        let src: Vec<String> = m
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .map(|(k, c)| format!("({c})*u{}", k + 1))
                    .collect::<Vec<_>>()
                    .join(" + ")
            })
            .collect();
        let phi = ComparisonSystem::new(&src, ComparisonForm::U).map_err(|e| e.to_string())?;
        let r = check_qm_sampled(&phi, &SamplingConfig::new(10_000, 10.0, trial), None)
            .map_err(|e| e.to_string())?;
        if r.verdict == FalsifierVerdict::CounterexampleFound {
            caught += 1;
        }
    }
    ensure!(caught == 100, "{caught}/100 caught");
    Ok("100/100 caught".into())
}

fn variational_fidelity() -> Outcome {
    let p = ex2_scenario().prepare().map_err(|e| e.to_string())?;
    let x0 = p.x0().unwrap().to_vec();
    let v = p.dx0().unwrap().to_vec();
    let eps = 1e-5;
    let cfg = IntegratorConfig::new(1e-3, 0.0, 1.0).unwrap();
    let base = p
        .system
        .integrate_variational(&x0, &v, &cfg)
        .map_err(|e| e.to_string())?;
    let shifted: Vec<f64> = x0.iter().zip(&v).map(|(a, b)| a + eps * b).collect();
    let pert = p
        .system
        .integrate(&shifted, &cfg)
        .map_err(|e| e.to_string())?;
    let dpsi = base.variational().ok_or("no variational channel")?;
    let mut worst = 0.0f64;
    for k in 0..base.len() {
        let fd: Vec<f64> = pert.states()[k]
            .iter()
            .zip(&base.states()[k])
            .zip(&dpsi[k])
            .map(|((a, b), d)| (a - b) / eps - d)
            .collect();
        worst = worst.max(l2(&fd));
    }
    ensure!(worst <= 1e-3, "max deviation {worst:e}");
    Ok(format!("max deviation {worst:.2e}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("norm axioms", norm_axioms, Some(Duration::from_secs(5))),
        ("frechet derivative", frechet, Some(Duration::from_secs(2))),
        ("euclidean reduction", euclidean_reduction, None),
        (
            "example 2 dominance",
            example2,
            Some(Duration::from_secs(10)),
        ),
        (
            "example 1 regression",
            example1,
            Some(Duration::from_secs(5)),
        ),
        (
            "example 3 regression",
            example3,
            Some(Duration::from_secs(1)),
        ),
        ("rk4 convergence order", rk4_order, None),
        ("qm falsifier soundness", planted_violations, None),
        ("variational fidelity", variational_fidelity, None),
    ];
    let mut failed = 0;
    for (k, (name, check, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut result = check();
        let elapsed = start.elapsed();
        if let (Ok(_), Some(limit)) = (&result, limit) {
            if elapsed > *limit {
                result = Err(format!("took {elapsed:.2?}, limit {limit:.0?}"));
            }
        }
        match result {
            Ok(detail) => println!("PASS {} {name}: {detail} ({elapsed:.2?})", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why} ({elapsed:.2?})", k + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
