//! Built-in scenarios for the three worked examples.
//!
//! * `ex1`: the `n`-dimensional linear system `ẋ_i = −ρ_i x_i + σ`,
//!   `σ̇ = Σ a_i x_i − (p+1)σ`, with `σ` stored as `x_{n+1}` and the
//!   Young-inequality comparison system built in.
//! * `ex2`: the planar nonlinear system `ẋ1 = −x1² + x2`, `ẋ2 = x1 − 2x2²` with
//!   the state-dependent comparison map.
//! * `ex3`: the affine map `F(w) = (w1/2 − 2w2, w1 − 4w2)` against the cone
//!   `w2 ≤ w1 ≤ 3w2`.

use serde::Serialize;

use crate::comparison::{check_qm_affine, metzler_violations};
use crate::cone::{
    check_cone_qm, check_cone_qm_pair, evaluate_witness, ConeError, ConeQmReport, ExprMap,
    PolyhedralCone, WitnessPairing,
};
use crate::dynamics::{IntegratorConfig, JacobianMode, Method};
use crate::linalg::perron_eigenpair;
use crate::sampling::SamplingConfig;
use crate::scenario::{
    ComparisonSpec, ConfigError, FormSpec, InitialSpec, OrderingSpec, QmSpec, Scenario, SystemSpec,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ex1Params {
    pub n: usize,
    pub rho: Vec<f64>,
    pub a: Vec<f64>,
    pub p: f64,
}

impl Default for Ex1Params {
    fn default() -> Self {
        Ex1Params {
            n: 1,
            rho: vec![1.0],
            a: vec![1.0],
            p: 1.0,
        }
    }
}

impl Ex1Params {
    /// Builds parameters, broadcasting a single `ρ` or `a` to all `n` states.
    pub fn new(n: usize, rho: Vec<f64>, a: Vec<f64>, p: f64) -> Result<Self, ConfigError> {
        if n == 0 {
            return Err(ConfigError::new("--n", "n must be at least 1"));
        }
        let widen = |name: &str, v: Vec<f64>| match v.len() {
            1 => Ok(vec![v[0]; n]),
            len if len == n => Ok(v),
            len => Err(ConfigError::new(
                name,
                format!("expected 1 or {n} values, found {len}"),
            )),
        };
        let rho = widen("--rho", rho)?;
        let a = widen("--a", a)?;
        if let Some(i) = rho.iter().position(|&r| r == 0.0 || !r.is_finite()) {
            return Err(ConfigError::new(
                format!("--rho[{i}]"),
                "rho must be finite and non-zero",
            ));
        }
        if !a.iter().all(|v| v.is_finite()) || !p.is_finite() {
            return Err(ConfigError::new("--a", "parameters must be finite"));
        }
        Ok(Ex1Params { n, rho, a, p })
    }

    /// The comparison matrix `M` of the linear comparison system in
    /// `w = (δx_1², .., δx_n², δσ²)`.
    pub fn comparison_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.n;
        let mut m = vec![vec![0.0; n + 1]; n + 1];
        for i in 0..n {
            m[i][i] = -self.rho[i];
            m[i][n] = 1.0 / self.rho[i];
            m[n][i] = self.a[i].abs() * self.rho[i];
        }
        let sum: f64 = self.a.iter().zip(&self.rho).map(|(a, r)| a.abs() / r).sum();
        m[n][n] = -(2.0 * (self.p + 1.0) - sum);
        m
    }

    /// `2(p + 1) > Σ |a_i| / ρ_i`.
    pub fn condition(&self) -> Ex1Condition {
        let lhs = 2.0 * (self.p + 1.0);
        let rhs = self.a.iter().zip(&self.rho).map(|(a, r)| a.abs() / r).sum();
        Ex1Condition {
            lhs,
            rhs,
            holds: lhs > rhs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ex1Condition {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

fn coef(v: f64) -> String {
    format!("({v})")
}

fn row_expr(row: &[f64], var: &str) -> String {
    row.iter()
        .enumerate()
        .map(|(j, &c)| format!("{}*{var}{}", coef(c), j + 1))
        .collect::<Vec<_>>()
        .join(" + ")
}

/// Scenario for the linear example. `u0` points along the Perron vector of
/// `M` (so the comparison solution decays at the spectral abscissa from the
/// start), and `δx0 = sqrt(u0)/2` so that `D(0) = u0/4`. When `M` is not
/// Metzler both fall back to constant vectors.
pub fn ex1_scenario(params: &Ex1Params) -> Scenario {
    let n = params.n;
    let sigma = format!("x{}", n + 1);
    let mut rhs: Vec<String> = (0..n)
        .map(|i| format!("{}*x{} + {sigma}", coef(-params.rho[i]), i + 1))
        .collect();
    rhs.push(format!(
        "{} + {}*{sigma}",
        row_expr(&params.a, "x"),
        coef(-(params.p + 1.0))
    ));

    let m = params.comparison_matrix();
    let comparison: Vec<String> = m.iter().map(|row| row_expr(row, "u")).collect();

    let u0 = match perron_eigenpair(&m) {
        Some((_, v)) if v.iter().all(|&x| x > 0.0) => v,
        _ => vec![1.0; n + 1],
    };
    let dx0: Vec<f64> = u0.iter().map(|u| 0.5 * u.sqrt()).collect();

    Scenario {
        label: Some("ex1".into()),
        system: SystemSpec {
            rhs,
            n: Some(n + 1),
            jacobian: JacobianMode::Symbolic,
        },
        gain: None,
        comparison: Some(ComparisonSpec {
            rhs: comparison,
            form: FormSpec::U,
            affine: None,
        }),
        initial: Some(InitialSpec {
            x0: vec![1.0; n + 1],
            dx0: Some(dx0),
            u0: Some(u0),
        }),
        integrator: IntegratorConfig {
            dt: 1e-3,
            t0: 0.0,
            t_end: 10.0,
            method: Method::Rk4,
        },
        ordering: OrderingSpec::Componentwise,
        region: None,
        qm: QmSpec::default(),
        equilibrium: Some(vec![0.0; n + 1]),
        output: None,
        seed: None,
    }
}

/// Scenario for the planar nonlinear example: `x0 = (1, 1)`, `δx0 = (1, 1)`,
/// `w(0) = (5, 5)`, `dt = 1e-3` on `[0, 5]`, with the region `x1 > 1/4`,
/// `x2 > 1/8` tracked along the run.
pub fn ex2_scenario() -> Scenario {
    Scenario {
        label: Some("ex2".into()),
        system: SystemSpec {
            rhs: vec!["-x1^2 + x2".into(), "x1 - 2*x2^2".into()],
            n: Some(2),
            jacobian: JacobianMode::Symbolic,
        },
        gain: None,
        comparison: Some(ComparisonSpec {
            rhs: vec!["(1 - 4*x1)*u1 + u2".into(), "(1 - 8*x2)*u2 + u1".into()],
            form: FormSpec::UAndX,
            affine: None,
        }),
        initial: Some(InitialSpec {
            x0: vec![1.0, 1.0],
            dx0: Some(vec![1.0, 1.0]),
            u0: Some(vec![5.0, 5.0]),
        }),
        integrator: IntegratorConfig {
            dt: 1e-3,
            t0: 0.0,
            t_end: 5.0,
            method: Method::Rk4,
        },
        ordering: OrderingSpec::Componentwise,
        region: Some(vec!["x1 - 0.25".into(), "x2 - 0.125".into()]),
        qm: QmSpec::default(),
        equilibrium: None,
        output: None,
        seed: None,
    }
}

pub const EX3_MAP: [&str; 2] = ["0.5*u1 - 2*u2", "u1 - 4*u2"];

pub fn ex3_matrix() -> Vec<Vec<f64>> {
    vec![vec![0.5, -2.0], vec![1.0, -4.0]]
}

pub fn ex3_cone_rows() -> Vec<Vec<f64>> {
    vec![vec![1.0, -1.0], vec![-1.0, 3.0]]
}

pub fn ex3_cone() -> PolyhedralCone {
    PolyhedralCone::new(&ex3_cone_rows()).expect("example cone is valid")
}

pub fn ex3_map() -> ExprMap {
    ExprMap::parse(&EX3_MAP).expect("example map parses")
}

/// Scenario for the cone example; the system integrates `ẇ = F(w)` and the
/// cone order is configured for dominance and cone checks.
pub fn ex3_scenario() -> Scenario {
    Scenario {
        label: Some("ex3".into()),
        system: SystemSpec {
            rhs: vec!["0.5*x1 - 2*x2".into(), "x1 - 4*x2".into()],
            n: Some(2),
            jacobian: JacobianMode::Symbolic,
        },
        gain: None,
        comparison: Some(ComparisonSpec {
            rhs: EX3_MAP.iter().map(|s| s.to_string()).collect(),
            form: FormSpec::U,
            affine: None,
        }),
        initial: None,
        integrator: IntegratorConfig::default(),
        ordering: OrderingSpec::Cone { g: ex3_cone_rows() },
        region: None,
        qm: QmSpec::default(),
        equilibrium: None,
        output: None,
        seed: None,
    }
}

/// Pairings on one face for the scales `w ∈ {1, 2, 5}`, pair `x = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FacePairings {
    pub face: &'static str,
    pub direction: Vec<f64>,
    pub scales: Vec<f64>,
    pub pairings: Vec<WitnessPairing>,
    /// Whether some witness in `K*` satisfies the condition at every scale.
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ex3Report {
    pub metzler: bool,
    pub metzler_violations: Vec<(usize, usize, f64)>,
    /// Face `w1 = w2` with `φ = (1, −1)`.
    pub face_i: FacePairings,
    /// Face `w1 = 3w2` with the printed `φ = (1, −3)` and with the dual
    /// member `(−1, 3)`.
    pub face_ii: FacePairings,
    pub cone_qm: ConeQmReport,
}

pub const EX3_SCALES: [f64; 3] = [1.0, 2.0, 5.0];

fn face(
    cone: &PolyhedralCone,
    f: &ExprMap,
    name: &'static str,
    direction: [f64; 2],
    witnesses: &[[f64; 2]],
) -> Result<FacePairings, ConeError> {
    let mut pairings = Vec::new();
    let mut satisfied = true;
    for &w in &EX3_SCALES {
        let y = [w * direction[0], w * direction[1]];
        for phi in witnesses {
            pairings.push(evaluate_witness(f, cone, phi, &[0.0, 0.0], &y)?);
        }
        satisfied &= check_cone_qm_pair(f, cone, &[0.0, 0.0], &y)?.satisfied;
    }
    Ok(FacePairings {
        face: name,
        direction: direction.to_vec(),
        scales: EX3_SCALES.to_vec(),
        pairings,
        satisfied,
    })
}

pub fn ex3_analysis(sampling: &SamplingConfig) -> Result<Ex3Report, ConeError> {
    let cone = ex3_cone();
    let f = ex3_map();
    let m = ex3_matrix();
    Ok(Ex3Report {
        metzler: check_qm_affine(&m).expect("square"),
        metzler_violations: metzler_violations(&m).expect("square"),
        face_i: face(&cone, &f, "w1 = w2", [1.0, 1.0], &[[1.0, -1.0]])?,
        face_ii: face(
            &cone,
            &f,
            "w1 = 3*w2",
            [3.0, 1.0],
            &[[1.0, -3.0], [-1.0, 3.0]],
        )?,
        cone_qm: check_cone_qm(&f, &cone, sampling)?,
    })
}
