//! Comparison systems `u̇ = φ(t, u[, x])`, componentwise quasi-monotonicity,
//! and on-grid verification that the squared vector distance
//! `D(t) = A·dvec(diag(δψ(t))²)` stays below the comparison solution `R(t)`.

use std::io::{self, Write};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cone::{Classification, ConeError, PolyhedralCone, VectorMap};
use crate::dynamics::{ComparisonField, DynamicalSystem, DynamicsError, Trajectory};
use crate::expr::{self, Expr, ExprError};
use crate::linalg::{dot, euclid};
use crate::sampling::{FalsifierVerdict, SamplingConfig};
use crate::vnorm::{GainMatrix, NormError};

/// Absolute tolerance of the quasi-monotonicity comparisons, scaled by the
/// magnitude of the values compared.
pub const QM_TOLERANCE: f64 = 1e-10;

/// Margins at or below this are reported as fragile.
pub const FRAGILE_MARGIN: f64 = 1e-9;

/// Residual allowed when checking an equilibrium.
pub const EQUILIBRIUM_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ComparisonError {
    #[error("{context}: {source}")]
    Expr {
        context: String,
        #[source]
        source: ExprError,
    },
    #[error(transparent)]
    Evaluation(#[from] ExprError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error("{what} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("matrix is not square")]
    NotSquare,
    #[error("affine part does not reproduce component {component} at u = {point:?}")]
    AffineMismatch { component: usize, point: Vec<f64> },
    #[error("trajectory has no {0} channel")]
    MissingChannel(&'static str),
    #[error("initial condition not strictly dominated: D(t0) = {d0:?}, u0 = {u0:?}")]
    InitialConditionNotDominated { d0: Vec<f64>, u0: Vec<f64> },
    #[error("comparison map depends on x; a frozen state is required")]
    MissingFrozenState,
    #[error("not an equilibrium: |f(t, x_bar)| = {residual} at t = {t}")]
    NotAnEquilibrium { t: f64, residual: f64 },
    #[error("series entry {component} at index {index} is not positive")]
    NonPositiveSeries { index: usize, component: usize },
    #[error("series is empty or its times and values differ in length")]
    EmptySeries,
    #[error("invalid sampling settings: {0}")]
    Sampling(String),
}

/// Which arguments `φ` takes besides `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum ComparisonForm {
    /// `φ(t, u)`.
    U,
    /// `φ(t, u, x)` with `x` of dimension `state_dim`.
    UAndX { state_dim: usize },
}

/// `φ(t, u) = M·u + b` with constant `M` and `b`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffinePart {
    pub matrix: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonSystem {
    dim: usize,
    form: ComparisonForm,
    rhs: Vec<Expr>,
    affine: Option<AffinePart>,
    label: String,
}

/// `["t", "u1", .., "un"]`, followed by `"x1", .., "xm"` for the state form.
pub fn comparison_variables(n: usize, form: ComparisonForm) -> Vec<String> {
    let mut vars = vec!["t".to_string()];
    vars.extend((1..=n).map(|i| format!("u{i}")));
    if let ComparisonForm::UAndX { state_dim } = form {
        vars.extend((1..=state_dim).map(|i| format!("x{i}")));
    }
    vars
}

impl ComparisonSystem {
    /// Parses `φ` and detects its affine part when every `∂φ_i/∂u_j` is a
    /// constant and `φ` does not depend on `t` or `x`.
    pub fn new<S: AsRef<str>>(
        sources: &[S],
        form: ComparisonForm,
    ) -> Result<Self, ComparisonError> {
        let n = sources.len();
        if n == 0 {
            return Err(ComparisonError::DimensionMismatch {
                what: "comparison map",
                expected: 1,
                found: 0,
            });
        }
        let vars = comparison_variables(n, form);
        let rhs = sources
            .iter()
            .enumerate()
            .map(|(i, s)| {
                expr::parse(s.as_ref(), &vars).map_err(|source| ComparisonError::Expr {
                    context: format!("comparison rhs[{i}]"),
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut sys = ComparisonSystem {
            dim: n,
            form,
            rhs,
            affine: None,
            label: String::new(),
        };
        sys.affine = sys.detect_affine();
        Ok(sys)
    }

    /// Attaches a user-supplied affine part after checking it against `φ`.
    pub fn with_affine(mut self, affine: AffinePart) -> Result<Self, ComparisonError> {
        let n = self.dim;
        if affine.matrix.len() != n || affine.matrix.iter().any(|r| r.len() != n) {
            return Err(ComparisonError::DimensionMismatch {
                what: "affine matrix",
                expected: n,
                found: affine.matrix.len(),
            });
        }
        if affine.offset.len() != n {
            return Err(ComparisonError::DimensionMismatch {
                what: "affine offset",
                expected: n,
                found: affine.offset.len(),
            });
        }
        self.verify_affine(&affine)?;
        self.affine = Some(affine);
        Ok(self)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn form(&self) -> ComparisonForm {
        self.form
    }

    pub fn rhs(&self) -> &[Expr] {
        &self.rhs
    }

    pub fn affine(&self) -> Option<&AffinePart> {
        self.affine.as_ref()
    }

    fn state_arity(&self) -> usize {
        match self.form {
            ComparisonForm::U => 0,
            ComparisonForm::UAndX { state_dim } => state_dim,
        }
    }

    fn detect_affine(&self) -> Option<AffinePart> {
        let n = self.dim;
        let vars = comparison_variables(n, self.form);
        let other: Vec<&String> = std::iter::once(&vars[0]).chain(&vars[1 + n..]).collect();
        let zeros = vec![0.0; vars.len()];
        let mut matrix = vec![vec![0.0; n]; n];
        let mut offset = vec![0.0; n];
        for (i, f) in self.rhs.iter().enumerate() {
            if other.iter().any(|v| f.references(v)) {
                return None;
            }
            for j in 0..n {
                let d = expr::differentiate(f, &vars[1 + j]);
                if !d.variables().is_empty() {
                    return None;
                }
                matrix[i][j] = d.eval_at(&zeros).ok()?;
            }
            offset[i] = f.eval_at(&zeros).ok()?;
        }
        let affine = AffinePart { matrix, offset };
        self.verify_affine(&affine).ok()?;
        Some(affine)
    }

    /// Compares `φ` with `M·u + b` at ten seeded random points.
    fn verify_affine(&self, affine: &AffinePart) -> Result<(), ComparisonError> {
        let mut rng = ChaCha8Rng::seed_from_u64(0xaff1);
        for _ in 0..10 {
            let t = rng.gen_range(0.0..10.0);
            let u: Vec<f64> = (0..self.dim).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let x: Vec<f64> = (0..self.state_arity())
                .map(|_| rng.gen_range(-10.0..10.0))
                .collect();
            let phi = self.eval(t, &u, &x)?;
            for (i, value) in phi.iter().enumerate() {
                let lin = dot(&affine.matrix[i], &u) + affine.offset[i];
                if (value - lin).abs() > 1e-10 * (1.0 + value.abs()) {
                    return Err(ComparisonError::AffineMismatch {
                        component: i,
                        point: u,
                    });
                }
            }
        }
        Ok(())
    }

    fn slots(&self, t: f64, u: &[f64], x: &[f64]) -> Vec<f64> {
        let mut slots = Vec::with_capacity(1 + u.len() + x.len());
        slots.push(t);
        slots.extend_from_slice(u);
        slots.extend_from_slice(&x[..self.state_arity().min(x.len())]);
        slots
    }

    /// `φ(t, u[, x])`. `x` is ignored for the `u`-only form.
    pub fn eval(&self, t: f64, u: &[f64], x: &[f64]) -> Result<Vec<f64>, ComparisonError> {
        if u.len() != self.dim {
            return Err(ComparisonError::DimensionMismatch {
                what: "u",
                expected: self.dim,
                found: u.len(),
            });
        }
        if x.len() < self.state_arity() {
            return Err(ComparisonError::DimensionMismatch {
                what: "x",
                expected: self.state_arity(),
                found: x.len(),
            });
        }
        let slots = self.slots(t, u, x);
        Ok(self
            .rhs
            .iter()
            .map(|f| f.eval_at(&slots))
            .collect::<Result<_, _>>()?)
    }

    /// `u ↦ φ(t, u, x)` with `t` and `x` held fixed.
    pub fn frozen(&self, t: f64, x: &[f64]) -> FrozenComparison<'_> {
        FrozenComparison {
            system: self,
            t,
            x: x.to_vec(),
        }
    }
}

impl ComparisonField for ComparisonSystem {
    fn dim(&self) -> usize {
        self.dim
    }

    fn state_dim(&self) -> Option<usize> {
        match self.form {
            ComparisonForm::U => None,
            ComparisonForm::UAndX { state_dim } => Some(state_dim),
        }
    }

    fn eval(&self, t: f64, u: &[f64], x: &[f64], out: &mut [f64]) -> Result<(), ExprError> {
        let slots = self.slots(t, u, x);
        for (o, f) in out.iter_mut().zip(&self.rhs) {
            *o = f.eval_at(&slots)?;
        }
        Ok(())
    }
}

/// A comparison map evaluated at a fixed `(t, x)`.
#[derive(Debug, Clone)]
pub struct FrozenComparison<'a> {
    system: &'a ComparisonSystem,
    t: f64,
    x: Vec<f64>,
}

impl VectorMap for FrozenComparison<'_> {
    fn dim(&self) -> usize {
        self.system.dim
    }

    fn apply(&self, u: &[f64]) -> Result<Vec<f64>, ExprError> {
        let mut out = vec![0.0; self.system.dim];
        ComparisonField::eval(self.system, self.t, u, &self.x, &mut out)?;
        Ok(out)
    }
}

/// Off-diagonal entries of `M` that are negative, as `(i, j, M_ij)`.
pub fn metzler_violations(m: &[Vec<f64>]) -> Result<Vec<(usize, usize, f64)>, ComparisonError> {
    let n = m.len();
    if m.iter().any(|r| r.len() != n) {
        return Err(ComparisonError::NotSquare);
    }
    let mut out = Vec::new();
    for (i, row) in m.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if i != j && !(v >= 0.0) {
                out.push((i, j, v));
            }
        }
    }
    Ok(out)
}

/// Exact quasi-monotonicity test for an affine map: `M` is Metzler.
pub fn check_qm_affine(m: &[Vec<f64>]) -> Result<bool, ComparisonError> {
    Ok(metzler_violations(m)?.is_empty())
}

/// One quasi-monotonicity test: `u ≤ v`, `u_i = v_i`, and the check
/// `φ_i(t, u) ≤ φ_i(t, v) + τ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QmTriple {
    pub component: usize,
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub phi_u: f64,
    pub phi_v: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QmReport {
    pub verdict: FalsifierVerdict,
    pub samples: usize,
    pub seed: u64,
    pub bound: f64,
    pub frozen_state: Option<Vec<f64>>,
    pub affine_metzler: Option<bool>,
    pub counterexample: Option<QmTriple>,
}

pub fn check_qm_triple(
    phi: &ComparisonSystem,
    component: usize,
    t: f64,
    u: &[f64],
    v: &[f64],
    x: &[f64],
) -> Result<QmTriple, ComparisonError> {
    let a = phi.eval(t, u, x)?[component];
    let b = phi.eval(t, v, x)?[component];
    let tol = QM_TOLERANCE * (1.0 + a.abs().max(b.abs()));
    Ok(QmTriple {
        component,
        t,
        u: u.to_vec(),
        v: v.to_vec(),
        phi_u: a,
        phi_v: b,
        satisfied: a <= b + tol,
    })
}

/// Sampling falsifier for componentwise quasi-monotonicity.
///
/// Each sample picks a component `i`, a point `u` in `[−B, B]^n` and a time in
/// `[0, B]`, then raises coordinates `j ≠ i` by amounts in `(0, B]`: a single
/// coordinate half of the time, a random subset otherwise. The state form
/// needs `frozen_state`.
pub fn check_qm_sampled(
    phi: &ComparisonSystem,
    sampling: &SamplingConfig,
    frozen_state: Option<&[f64]>,
) -> Result<QmReport, ComparisonError> {
    sampling.validate().map_err(ComparisonError::Sampling)?;
    let x: Vec<f64> = match (phi.form, frozen_state) {
        (ComparisonForm::UAndX { .. }, None) => return Err(ComparisonError::MissingFrozenState),
        (_, Some(x)) => x.to_vec(),
        (ComparisonForm::U, None) => Vec::new(),
    };
    let n = phi.dim;
    let b = sampling.bound;
    let mut rng = sampling.rng();
    let mut counterexample = None;
    for _ in 0..sampling.samples {
        let i = rng.gen_range(0..n);
        let t = rng.gen_range(0.0..=b);
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-b..=b)).collect();
        let mut v = u.clone();
        if n > 1 {
            if rng.gen_bool(0.5) {
                let mut j = rng.gen_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                v[j] += b * (1.0 - rng.gen::<f64>());
            } else {
                for j in (0..n).filter(|&j| j != i) {
                    if rng.gen_bool(0.5) {
                        v[j] += b * (1.0 - rng.gen::<f64>());
                    }
                }
            }
        }
        let triple = check_qm_triple(phi, i, t, &u, &v, &x)?;
        if !triple.satisfied {
            counterexample = Some(triple);
            break;
        }
    }
    Ok(QmReport {
        verdict: if counterexample.is_some() {
            FalsifierVerdict::CounterexampleFound
        } else {
            FalsifierVerdict::NoCounterexampleFound
        },
        samples: sampling.samples,
        seed: sampling.seed,
        bound: b,
        frozen_state: frozen_state.map(<[f64]>::to_vec),
        affine_metzler: phi
            .affine
            .as_ref()
            .map(|a| check_qm_affine(&a.matrix).unwrap_or(false)),
        counterexample,
    })
}

/// Order used for the dominance check `D(t) < R(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum OrderMode {
    Componentwise,
    Cone(PolyhedralCone),
}

impl OrderMode {
    fn name(&self) -> &'static str {
        match self {
            OrderMode::Componentwise => "componentwise",
            OrderMode::Cone(_) => "cone",
        }
    }

    /// Smallest slack of `R − D` and the component (or cone row) attaining
    /// it. Cone slacks are normalised by the row length, so the orthant
    /// reproduces componentwise margins.
    fn margin(&self, diff: &[f64]) -> (f64, usize) {
        let pick = |vals: Vec<f64>| {
            vals.into_iter().enumerate().fold(
                (f64::INFINITY, 0),
                |a, (i, v)| if v < a.0 { (v, i) } else { a },
            )
        };
        match self {
            OrderMode::Componentwise => pick(diff.to_vec()),
            OrderMode::Cone(k) => pick(k.rows().iter().map(|g| dot(g, diff) / euclid(g)).collect()),
        }
    }

    fn strictly_below(&self, diff: &[f64]) -> Result<bool, ComparisonError> {
        Ok(match self {
            OrderMode::Componentwise => diff.iter().all(|&v| v > 0.0),
            OrderMode::Cone(k) => k.classify(diff)? == Classification::Interior,
        })
    }
}

/// Conditions `c_k(t, x) > 0` checked at every grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    sources: Vec<String>,
    conditions: Vec<Expr>,
}

impl Region {
    pub fn new<S: AsRef<str>>(sources: &[S], n: usize) -> Result<Self, ComparisonError> {
        let vars = crate::dynamics::state_variables(n);
        let conditions = sources
            .iter()
            .enumerate()
            .map(|(i, s)| {
                expr::parse(s.as_ref(), &vars).map_err(|source| ComparisonError::Expr {
                    context: format!("region[{i}]"),
                    source,
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(Region {
            sources: sources.iter().map(|s| s.as_ref().to_string()).collect(),
            conditions,
        })
    }

    pub fn sources(&self) -> &[String] {
        &self.sources
    }

    pub fn contains(&self, t: f64, x: &[f64]) -> Result<bool, ComparisonError> {
        let mut slots = vec![t];
        slots.extend_from_slice(x);
        for c in &self.conditions {
            if !(c.eval_at(&slots)? > 0.0) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Inputs of [`verify_dominance`] besides the trajectory.
#[derive(Debug, Clone, Copy)]
pub struct DominanceSetup<'a> {
    pub system: &'a DynamicalSystem,
    pub comparison: &'a ComparisonSystem,
    pub gain: &'a GainMatrix,
    pub ordering: &'a OrderMode,
    pub region: Option<&'a Region>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum DominanceVerdict {
    HoldsOnGrid,
    Violated { time: f64, component: usize },
}

/// The differential inequality `2A·dvec(diag(δψ)·diag(h)) < φ(t, D(t)[, ψ])`
/// on the grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PremiseSummary {
    pub holds_on_grid: bool,
    pub violations: usize,
    pub first_violation: Option<f64>,
    /// Smallest slack of `φ − 2A·dvec(δψ h)` over the grid.
    pub min_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionSummary {
    pub conditions: Vec<String>,
    pub holds_on_grid: bool,
    pub first_exit: Option<f64>,
}

/// What the run says about `‖δψ(t)‖ → 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormConclusion {
    /// Dominance held, `A` is definite, and `R` fell by at least a factor of
    /// 100 over the run.
    EnvelopeVanishing,
    EnvelopeNotVanishing,
    DominanceViolated,
    InconclusiveForUnweightedCoordinates,
}

/// Ratio of `max_i R_i(T)` to `max_i R_i(t0)` below which the envelope counts
/// as vanishing.
pub const VANISHING_RATIO: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    pub verdict: DominanceVerdict,
    pub ordering: &'static str,
    pub margin: f64,
    pub margin_time: f64,
    pub fragile: bool,
    pub premise: PremiseSummary,
    pub region: Option<RegionSummary>,
    pub definite_gain: bool,
    pub norm_conclusion: NormConclusion,
    pub envelope_decay_ratio: f64,
    pub steps: usize,
    #[serde(skip)]
    pub times: Vec<f64>,
    #[serde(skip)]
    pub distance: Vec<Vec<f64>>,
    #[serde(skip)]
    pub envelope: Vec<Vec<f64>>,
    #[serde(skip)]
    pub margins: Vec<f64>,
    #[serde(skip)]
    pub premise_margins: Vec<f64>,
    #[serde(skip)]
    pub region_flags: Option<Vec<bool>>,
}

impl DominanceReport {
    pub fn holds(&self) -> bool {
        self.verdict == DominanceVerdict::HoldsOnGrid
    }

    /// Per-step CSV: `t,D1..Dn,R1..Rn,margin,premise_margin[,in_region]`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.distance.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("D{i}")));
        header.extend((1..=n).map(|i| format!("R{i}")));
        header.push("margin".into());
        header.push("premise_margin".into());
        if self.region_flags.is_some() {
            header.push("in_region".into());
        }
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.times.len() {
            let mut row: Vec<String> = std::iter::once(self.times[k])
                .chain(self.distance[k].iter().copied())
                .chain(self.envelope[k].iter().copied())
                .chain([self.margins[k], self.premise_margins[k]])
                .map(|v| format!("{v:.16e}"))
                .collect();
            if let Some(flags) = &self.region_flags {
                row.push(u8::from(flags[k]).to_string());
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Checks `D(t) < R(t)` at every grid point of a coupled trajectory, along
/// with the premise of the comparison argument and the optional region.
pub fn verify_dominance(
    traj: &Trajectory,
    setup: &DominanceSetup<'_>,
) -> Result<DominanceReport, ComparisonError> {
    let variational = traj
        .variational()
        .ok_or(ComparisonError::MissingChannel("variational"))?;
    let envelope = traj
        .comparison()
        .ok_or(ComparisonError::MissingChannel("comparison"))?;
    let n = traj.dim();
    let gain = setup.gain;
    if gain.rows() != n || gain.cols() != n {
        return Err(ComparisonError::DimensionMismatch {
            what: "gain matrix",
            expected: n,
            found: if gain.cols() != n {
                gain.cols()
            } else {
                gain.rows()
            },
        });
    }
    if setup.comparison.dim() != n {
        return Err(ComparisonError::DimensionMismatch {
            what: "comparison system",
            expected: n,
            found: setup.comparison.dim(),
        });
    }
    if setup.system.dim() != n {
        return Err(ComparisonError::DimensionMismatch {
            what: "system",
            expected: n,
            found: setup.system.dim(),
        });
    }
    if let OrderMode::Cone(k) = setup.ordering {
        if k.dim() != n {
            return Err(ComparisonError::DimensionMismatch {
                what: "cone",
                expected: n,
                found: k.dim(),
            });
        }
    }
    if let Some(u) = envelope.first() {
        if u.len() != n {
            return Err(ComparisonError::DimensionMismatch {
                what: "comparison channel",
                expected: n,
                found: u.len(),
            });
        }
    }

    let times = traj.times();
    let states = traj.states();
    let len = traj.len();
    let mut distance = Vec::with_capacity(len);
    let mut margins = Vec::with_capacity(len);
    let mut premise_margins = Vec::with_capacity(len);
    let mut region_flags = setup.region.map(|_| Vec::with_capacity(len));
    let mut verdict = DominanceVerdict::HoldsOnGrid;
    let (mut margin, mut margin_time) = (f64::INFINITY, times[0]);
    let mut premise = PremiseSummary {
        holds_on_grid: true,
        violations: 0,
        first_violation: None,
        min_margin: f64::INFINITY,
    };
    let mut first_exit = None;

    for k in 0..len {
        let (t, x, dx, r) = (times[k], &states[k], &variational[k], &envelope[k]);
        let d = gain.norm_squared(dx)?;
        let diff: Vec<f64> = r.iter().zip(&d).map(|(a, b)| a - b).collect();
        let (m, idx) = setup.ordering.margin(&diff);
        let below = setup.ordering.strictly_below(&diff)?;
        if k == 0 && !below {
            return Err(ComparisonError::InitialConditionNotDominated {
                d0: d,
                u0: r.clone(),
            });
        }
        if !below && verdict == DominanceVerdict::HoldsOnGrid {
            verdict = DominanceVerdict::Violated {
                time: t,
                component: idx,
            };
        }
        if m < margin {
            margin = m;
            margin_time = t;
        }
        margins.push(m);

        let h = setup.system.variational_rhs(t, x, dx)?;
        let lhs = gain.frechet_apply(dx, &h)?;
        let rhs = setup.comparison.eval(t, &d, x)?;
        let pdiff: Vec<f64> = rhs.iter().zip(&lhs).map(|(a, b)| a - b).collect();
        let (pm, _) = setup.ordering.margin(&pdiff);
        if !setup.ordering.strictly_below(&pdiff)? {
            premise.holds_on_grid = false;
            premise.violations += 1;
            premise.first_violation.get_or_insert(t);
        }
        premise.min_margin = premise.min_margin.min(pm);
        premise_margins.push(pm);

        if let (Some(region), Some(flags)) = (setup.region, region_flags.as_mut()) {
            let inside = region.contains(t, x)?;
            if !inside && first_exit.is_none() {
                first_exit = Some(t);
            }
            flags.push(inside);
        }
        distance.push(d);
    }

    let peak = |u: &[f64]| u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let start = peak(&envelope[0]);
    let envelope_decay_ratio = if start > 0.0 {
        peak(&envelope[len - 1]) / start
    } else {
        0.0
    };
    let holds = verdict == DominanceVerdict::HoldsOnGrid;
    let norm_conclusion = if !holds {
        NormConclusion::DominanceViolated
    } else if !gain.is_definite() {
        NormConclusion::InconclusiveForUnweightedCoordinates
    } else if envelope_decay_ratio <= VANISHING_RATIO {
        NormConclusion::EnvelopeVanishing
    } else {
        NormConclusion::EnvelopeNotVanishing
    };

    Ok(DominanceReport {
        fragile: holds && margin <= FRAGILE_MARGIN,
        verdict,
        ordering: setup.ordering.name(),
        margin,
        margin_time,
        premise,
        region: setup.region.map(|r| RegionSummary {
            conditions: r.sources.clone(),
            holds_on_grid: first_exit.is_none(),
            first_exit,
        }),
        definite_gain: gain.is_definite(),
        norm_conclusion,
        envelope_decay_ratio,
        steps: len - 1,
        times: times.to_vec(),
        distance,
        envelope: envelope.to_vec(),
        margins,
        premise_margins,
        region_flags,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumDistance {
    pub times: Vec<f64>,
    /// `A·dvec(diag(x(t) − x̄)²)` per grid point.
    pub series: Vec<Vec<f64>>,
    /// The series at `t0`.
    pub initial: Vec<f64>,
}

/// Squared vector distance of a trajectory from an equilibrium `x̄`, which
/// is checked by `‖f(t, x̄)‖ ≤ 1e-8` at `t0` and `t0 + 1`.
pub fn equilibrium_distance_analysis(
    system: &DynamicalSystem,
    x_bar: &[f64],
    gain: &GainMatrix,
    traj: &Trajectory,
) -> Result<EquilibriumDistance, ComparisonError> {
    let n = system.dim();
    if x_bar.len() != n || traj.dim() != n {
        return Err(ComparisonError::DimensionMismatch {
            what: "equilibrium",
            expected: n,
            found: if x_bar.len() != n {
                x_bar.len()
            } else {
                traj.dim()
            },
        });
    }
    let t0 = traj.times()[0];
    for t in [t0, t0 + 1.0] {
        let residual = euclid(&system.field(t, x_bar)?);
        if !(residual <= EQUILIBRIUM_TOLERANCE) {
            return Err(ComparisonError::NotAnEquilibrium { t, residual });
        }
    }
    let series: Vec<Vec<f64>> = traj
        .states()
        .iter()
        .map(|x| {
            let d: Vec<f64> = x.iter().zip(x_bar).map(|(a, b)| a - b).collect();
            gain.norm_squared(&d)
        })
        .collect::<Result<_, _>>()?;
    Ok(EquilibriumDistance {
        times: traj.times().to_vec(),
        initial: series[0].clone(),
        series,
    })
}

/// Largest `λ ≥ 0` with `sqrt(D_i(t)) ≤ sqrt(C_i)·e^{−λ(t − t0)}` on the grid,
/// where `series` holds the squared distances `D(t)`.
pub fn estimate_rate(
    times: &[f64],
    series: &[Vec<f64>],
    c: &[f64],
) -> Result<f64, ComparisonError> {
    if times.is_empty() || times.len() != series.len() {
        return Err(ComparisonError::EmptySeries);
    }
    if let Some(j) = c.iter().position(|&v| !(v > 0.0)) {
        return Err(ComparisonError::NonPositiveSeries {
            index: 0,
            component: j,
        });
    }
    let t0 = times[0];
    let mut lambda = f64::INFINITY;
    for (k, (t, d)) in times.iter().zip(series).enumerate().skip(1) {
        if d.len() != c.len() {
            return Err(ComparisonError::DimensionMismatch {
                what: "series entry",
                expected: c.len(),
                found: d.len(),
            });
        }
        for (i, (&di, &ci)) in d.iter().zip(c).enumerate() {
            if !(di > 0.0) {
                return Err(ComparisonError::NonPositiveSeries {
                    index: k,
                    component: i,
                });
            }
            lambda = lambda.min(-0.5 * (di / ci).ln() / (t - t0));
        }
    }
    Ok(if lambda.is_finite() {
        lambda.max(0.0)
    } else {
        0.0
    })
}
