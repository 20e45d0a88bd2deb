//! Polyhedral cones `K = {x : G·x ≥ 0}` in halfspace form, the partial order
//! they induce, and a sampling falsifier for quasi-monotonicity relative to
//! `K`.
//!
//! Every row of `G` pairs non-negatively with all of `K`, so rows are members
//! of the dual cone `K*`; a row that vanishes at a point of `K` certifies that
//! the point lies on the boundary. The falsifier draws pairs `(x, y)` with
//! `y − x ∈ ∂K` and looks for a dual witness `φ` orthogonal to `y − x` with
//! `⟨φ, F(y) − F(x)⟩ ≥ 0`.

use rand::Rng;
use serde::Serialize;

use crate::expr::{self, Expr, ExprError};
use crate::linalg::{dot, euclid, rank};
use crate::sampling::{FalsifierVerdict, SamplingConfig};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// Minimum normalised slack the interior search must reach.
const INTERIOR_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConeError {
    #[error("cone matrix has no rows or columns")]
    Empty,
    #[error("cone matrix row {row} has {found} entries, expected {expected}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("cone matrix entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("cone matrix row {0} is zero")]
    ZeroRow(usize),
    #[error("cone has empty interior")]
    EmptyInterior,
    #[error("cone is not pointed: G has rank {rank} < {dim}")]
    NotPointed { rank: usize, dim: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("tolerance must be positive and finite")]
    BadTolerance,
    #[error("y - x is not on the cone boundary")]
    NotOnBoundary,
    #[error("could not sample a boundary direction")]
    NoBoundaryDirection,
    #[error("invalid sampling settings: {0}")]
    Sampling(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Position of a vector relative to `K`. Active rows are those whose slack
/// vanishes within the tolerance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "position", rename_all = "kebab-case")]
pub enum Classification {
    Interior,
    Boundary { active: Vec<usize> },
    Outside,
}

impl Classification {
    pub fn is_member(&self) -> bool {
        !matches!(self, Classification::Outside)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessKind {
    /// The row of `G` itself.
    Row,
    /// A dual member spanning the orthogonal complement of a planar face.
    OrthogonalComplement,
}

/// A member of `K* \ {0}` tied to the face (row of `G`) it came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualWitness {
    pub phi: Vec<f64>,
    pub row: usize,
    pub kind: WitnessKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyhedralCone {
    rows: Vec<Vec<f64>>,
    dim: usize,
    tol: f64,
    interior: Vec<f64>,
}

impl PolyhedralCone {
    pub fn new(g: &[Vec<f64>]) -> Result<Self, ConeError> {
        Self::with_tolerance(g, DEFAULT_TOLERANCE)
    }

    /// Validates `G`: no zero rows, non-empty interior, and pointedness
    /// (`K ∩ −K = ker G = {0}`, i.e. `G` has full column rank).
    pub fn with_tolerance(g: &[Vec<f64>], tol: f64) -> Result<Self, ConeError> {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(ConeError::BadTolerance);
        }
        let dim = g.first().map_or(0, Vec::len);
        if g.is_empty() || dim == 0 {
            return Err(ConeError::Empty);
        }
        for (i, row) in g.iter().enumerate() {
            if row.len() != dim {
                return Err(ConeError::Ragged {
                    row: i,
                    expected: dim,
                    found: row.len(),
                });
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(ConeError::NonFinite { row: i, col: j });
            }
            if row.iter().all(|&v| v == 0.0) {
                return Err(ConeError::ZeroRow(i));
            }
        }
        let interior = find_interior(g).ok_or(ConeError::EmptyInterior)?;
        let r = rank(g, 1e-12);
        if r < dim {
            return Err(ConeError::NotPointed { rank: r, dim });
        }
        Ok(PolyhedralCone {
            rows: g.to_vec(),
            dim,
            tol,
            interior,
        })
    }

    /// The non-negative orthant, which induces the componentwise order.
    pub fn orthant(n: usize) -> Self {
        let g: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        PolyhedralCone::new(&g).expect("orthant is a valid cone")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    /// A unit vector with every slack strictly positive.
    pub fn interior_point(&self) -> &[f64] {
        &self.interior
    }

    fn check(&self, x: &[f64]) -> Result<(), ConeError> {
        if x.len() != self.dim {
            return Err(ConeError::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// `G·x`.
    pub fn slacks(&self, x: &[f64]) -> Result<Vec<f64>, ConeError> {
        self.check(x)?;
        Ok(self.rows.iter().map(|g| dot(g, x)).collect())
    }

    /// Interior iff every slack exceeds `τ‖x‖`; boundary iff none is below
    /// `−τ‖x‖` and some lies within `τ‖x‖`; `x = 0` is on the boundary with
    /// every row active.
    pub fn classify(&self, x: &[f64]) -> Result<Classification, ConeError> {
        let slacks = self.slacks(x)?;
        let norm = euclid(x);
        if norm == 0.0 {
            return Ok(Classification::Boundary {
                active: (0..self.rows.len()).collect(),
            });
        }
        let thr = self.tol * norm;
        if slacks.iter().any(|&s| s < -thr) {
            return Ok(Classification::Outside);
        }
        let active: Vec<usize> = slacks
            .iter()
            .enumerate()
            .filter(|(_, s)| s.abs() <= thr)
            .map(|(i, _)| i)
            .collect();
        Ok(if active.is_empty() {
            Classification::Interior
        } else {
            Classification::Boundary { active }
        })
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool, ConeError> {
        Ok(self.classify(x)?.is_member())
    }

    /// `x ≤_K y`, i.e. `y − x ∈ K`.
    pub fn leq(&self, x: &[f64], y: &[f64]) -> Result<bool, ConeError> {
        self.check(x)?;
        self.check(y)?;
        let d: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
        self.contains(&d)
    }

    /// `y − x ∈ K°`.
    pub fn lt_interior(&self, x: &[f64], y: &[f64]) -> Result<bool, ConeError> {
        self.check(x)?;
        self.check(y)?;
        let d: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
        Ok(self.classify(&d)? == Classification::Interior)
    }

    /// Extreme rays of a planar cone (one ray in dimension one).
    pub fn extreme_rays(&self) -> Option<Vec<Vec<f64>>> {
        match self.dim {
            1 => Some(vec![self.interior.clone()]),
            2 => {
                let mut rays: Vec<Vec<f64>> = Vec::new();
                for g in &self.rows {
                    let norm = euclid(g);
                    let perp = [-g[1] / norm, g[0] / norm];
                    for cand in [perp, [-perp[0], -perp[1]]] {
                        let inside = self
                            .rows
                            .iter()
                            .all(|h| dot(h, &cand) >= -self.tol * euclid(h));
                        let dup = rays.iter().any(|r| dot(r, &cand) > 1.0 - 1e-12);
                        if inside && !dup {
                            rays.push(cand.to_vec());
                        }
                    }
                }
                Some(rays)
            }
            _ => None,
        }
    }

    /// Membership of `φ` in the dual cone `K*`.
    ///
    /// Exact (up to `τ`) in dimensions one and two, where `K` is spanned by
    /// its extreme rays. In higher dimensions this tests `⟨φ, z⟩ ≥ −τ‖φ‖‖z‖`
    /// over the interior point, the facets' projections and a fixed sample of
    /// members of `K`, so `true` is evidence rather than a certificate.
    pub fn dual_contains(&self, phi: &[f64]) -> Result<bool, ConeError> {
        self.check(phi)?;
        let pn = euclid(phi);
        if pn == 0.0 {
            return Ok(true);
        }
        let ok = |z: &[f64]| dot(phi, z) >= -self.tol * pn * euclid(z);
        if let Some(rays) = self.extreme_rays() {
            return Ok(rays.iter().all(|r| ok(r)));
        }
        let mut rng = SamplingConfig::new(1, 1.0, 0x5eed).rng();
        if !ok(&self.interior) {
            return Ok(false);
        }
        for _ in 0..4096 {
            let z = self.sample_member(&mut rng);
            if !ok(&z) {
                return Ok(false);
            }
            for i in 0..self.rows.len() {
                if let Some(b) = self.project_to_facet(&z, i) {
                    if !ok(&b) {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    /// Dual witnesses for a boundary direction `d`: the rows of `G` active at
    /// `d` and, in the plane, the `K*` members among `±d⊥`.
    pub fn witnesses(&self, d: &[f64]) -> Result<Vec<DualWitness>, ConeError> {
        let active = match self.classify(d)? {
            Classification::Boundary { active } => active,
            _ => return Err(ConeError::NotOnBoundary),
        };
        let mut out: Vec<DualWitness> = active
            .iter()
            .map(|&i| DualWitness {
                phi: self.rows[i].clone(),
                row: i,
                kind: WitnessKind::Row,
            })
            .collect();
        let dn = euclid(d);
        if self.dim == 2 && dn > 0.0 {
            let perp = [-d[1] / dn, d[0] / dn];
            for cand in [perp, [-perp[0], -perp[1]]] {
                let parallel = out
                    .iter()
                    .any(|w| dot(&w.phi, &cand) >= (1.0 - 1e-12) * euclid(&w.phi));
                if !parallel && self.dual_contains(&cand)? {
                    out.push(DualWitness {
                        phi: cand.to_vec(),
                        row: active[0],
                        kind: WitnessKind::OrthogonalComplement,
                    });
                }
            }
        }
        Ok(out)
    }

    /// Random member of `K`, drawn from `[−1, 1]^n` and pulled toward the
    /// interior point until it lands inside.
    fn sample_member<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut z: Vec<f64> = (0..self.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for _ in 0..200 {
            if self.contains(&z).unwrap_or(false) && euclid(&z) > 0.0 {
                return z;
            }
            for (zi, ci) in z.iter_mut().zip(&self.interior) {
                *zi = 0.5 * (*zi + ci);
            }
        }
        self.interior.clone()
    }

    /// Orthogonal projection of `z` onto `{G_i·x = 0}`, kept only if it is
    /// still a non-zero member of `K`.
    fn project_to_facet(&self, z: &[f64], i: usize) -> Option<Vec<f64>> {
        let g = &self.rows[i];
        let scale = dot(g, z) / dot(g, g);
        let p: Vec<f64> = z.iter().zip(g).map(|(a, b)| a - scale * b).collect();
        if euclid(&p) <= 1e-9 * euclid(z) {
            return None;
        }
        match self.classify(&p).ok()? {
            Classification::Boundary { .. } => Some(p),
            _ => None,
        }
    }

    /// Random unit direction on `∂K \ {0}`.
    fn sample_boundary_direction<R: Rng>(&self, rng: &mut R) -> Option<Vec<f64>> {
        let r = self.rows.len();
        for _ in 0..64 * r.max(1) {
            let i = rng.gen_range(0..r);
            let z = self.sample_member(rng);
            if let Some(p) = self.project_to_facet(&z, i) {
                let n = euclid(&p);
                return Some(p.into_iter().map(|v| v / n).collect());
            }
        }
        None
    }
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let n = euclid(v);
    v.iter().map(|x| x / n).collect()
}

fn min_normalized_slack(unit_rows: &[Vec<f64>], x: &[f64]) -> (f64, usize) {
    let n = euclid(x);
    if n == 0.0 {
        return (f64::NEG_INFINITY, 0);
    }
    unit_rows
        .iter()
        .enumerate()
        .map(|(i, g)| (dot(g, x) / n, i))
        .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a })
}

/// Maximises the minimum normalised slack over candidate directions with a
/// subgradient polish. Returns a unit vector strictly inside, if one is found.
fn find_interior(g: &[Vec<f64>]) -> Option<Vec<f64>> {
    let dim = g[0].len();
    let unit: Vec<Vec<f64>> = g.iter().map(|r| normalized(r)).collect();
    let mut candidates: Vec<Vec<f64>> = unit.clone();
    let mut sum = vec![0.0; dim];
    for r in &unit {
        for (s, v) in sum.iter_mut().zip(r) {
            *s += v;
        }
    }
    candidates.push(sum);
    let structured_ok = candidates
        .iter()
        .any(|c| min_normalized_slack(&unit, c).0 > INTERIOR_THRESHOLD);
    if !structured_ok {
        let mut rng = SamplingConfig::new(1, 1.0, 0xc0e).rng();
        for _ in 0..512 * dim {
            candidates.push((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect());
        }
    }
    let (mut best, mut best_val) = (Vec::new(), f64::NEG_INFINITY);
    for c in candidates {
        let (v, _) = min_normalized_slack(&unit, &c);
        if v > best_val {
            best_val = v;
            best = c;
        }
    }
    if best.is_empty() {
        return None;
    }
    let mut x = normalized(&best);
    let mut step = 0.5;
    for _ in 0..2000 {
        let (v, i) = min_normalized_slack(&unit, &x);
        let trial: Vec<f64> = x.iter().zip(&unit[i]).map(|(a, b)| a + step * b).collect();
        let trial = normalized(&trial);
        let tv = min_normalized_slack(&unit, &trial).0;
        if tv > v {
            x = trial;
            if tv - v < 1e-13 {
                break;
            }
        } else {
            step *= 0.7;
            if step < 1e-12 {
                break;
            }
        }
    }
    let (v, _) = min_normalized_slack(&unit, &x);
    (v > INTERIOR_THRESHOLD).then_some(x)
}

/// Vector-valued map `F: Rⁿ → Rⁿ` under test.
pub trait VectorMap {
    fn dim(&self) -> usize;
    fn apply(&self, u: &[f64]) -> Result<Vec<f64>, ExprError>;
}

/// `F` written as expressions over `u1 .. un`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprMap {
    exprs: Vec<Expr>,
}

impl ExprMap {
    pub fn parse<S: AsRef<str>>(sources: &[S]) -> Result<Self, ExprError> {
        let vars: Vec<String> = (1..=sources.len()).map(|i| format!("u{i}")).collect();
        let exprs = sources
            .iter()
            .map(|s| expr::parse(s.as_ref(), &vars))
            .collect::<Result<_, _>>()?;
        Ok(ExprMap { exprs })
    }
}

impl VectorMap for ExprMap {
    fn dim(&self) -> usize {
        self.exprs.len()
    }

    fn apply(&self, u: &[f64]) -> Result<Vec<f64>, ExprError> {
        self.exprs.iter().map(|e| e.eval_at(u)).collect()
    }
}

/// A dual vector paired against one boundary pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessPairing {
    pub phi: Vec<f64>,
    pub row: Option<usize>,
    pub kind: Option<WitnessKind>,
    /// `⟨φ, y − x⟩`.
    pub orthogonality: f64,
    /// `⟨φ, F(y) − F(x)⟩`.
    pub pairing: f64,
    pub in_dual: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConePairOutcome {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub active_rows: Vec<usize>,
    pub witnesses: Vec<WitnessPairing>,
    /// Some witness satisfies `⟨φ, F(y) − F(x)⟩ ≥ −τ(1 + ‖F(y) − F(x)‖)‖φ‖`.
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeQmReport {
    pub verdict: FalsifierVerdict,
    pub samples: usize,
    pub seed: u64,
    pub bound: f64,
    pub cone: Vec<Vec<f64>>,
    pub counterexample: Option<ConePairOutcome>,
}

fn difference(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| p - q).collect()
}

/// Pairs an arbitrary `φ` (not necessarily in `K*`) with one pair `(x, y)`.
pub fn evaluate_witness<F: VectorMap + ?Sized>(
    f: &F,
    cone: &PolyhedralCone,
    phi: &[f64],
    x: &[f64],
    y: &[f64],
) -> Result<WitnessPairing, ConeError> {
    cone.check(phi)?;
    cone.check(x)?;
    cone.check(y)?;
    let df = difference(&f.apply(y)?, &f.apply(x)?);
    Ok(WitnessPairing {
        phi: phi.to_vec(),
        row: None,
        kind: None,
        orthogonality: dot(phi, &difference(y, x)),
        pairing: dot(phi, &df),
        in_dual: cone.dual_contains(phi)?,
    })
}

/// Checks the quasi-monotonicity condition for a single pair with
/// `y − x ∈ ∂K`.
pub fn check_cone_qm_pair<F: VectorMap + ?Sized>(
    f: &F,
    cone: &PolyhedralCone,
    x: &[f64],
    y: &[f64],
) -> Result<ConePairOutcome, ConeError> {
    cone.check(x)?;
    cone.check(y)?;
    if f.dim() != cone.dim() {
        return Err(ConeError::DimensionMismatch {
            expected: cone.dim(),
            found: f.dim(),
        });
    }
    let d = difference(y, x);
    let active_rows = match cone.classify(&d)? {
        Classification::Boundary { active } => active,
        _ => return Err(ConeError::NotOnBoundary),
    };
    let df = difference(&f.apply(y)?, &f.apply(x)?);
    let slack = cone.tol * (1.0 + euclid(&df));
    let witnesses: Vec<WitnessPairing> = cone
        .witnesses(&d)?
        .into_iter()
        .map(|w| WitnessPairing {
            orthogonality: dot(&w.phi, &d),
            pairing: dot(&w.phi, &df),
            in_dual: true,
            row: Some(w.row),
            kind: Some(w.kind),
            phi: w.phi,
        })
        .collect();
    let satisfied = witnesses
        .iter()
        .any(|w| w.pairing >= -slack * euclid(&w.phi));
    Ok(ConePairOutcome {
        x: x.to_vec(),
        y: y.to_vec(),
        active_rows,
        witnesses,
        satisfied,
    })
}

/// Sampling falsifier for quasi-monotonicity of `F` relative to `K`.
///
/// Each sample draws `x` uniformly from `[−B, B]^n` and `y = x + d` with `d`
/// a random boundary direction of `K` scaled to length in `(0, B]`. The first
/// pair where no witness succeeds is returned as counterexample.
pub fn check_cone_qm<F: VectorMap + ?Sized>(
    f: &F,
    cone: &PolyhedralCone,
    sampling: &SamplingConfig,
) -> Result<ConeQmReport, ConeError> {
    sampling.validate().map_err(ConeError::Sampling)?;
    if f.dim() != cone.dim() {
        return Err(ConeError::DimensionMismatch {
            expected: cone.dim(),
            found: f.dim(),
        });
    }
    let mut rng = sampling.rng();
    let b = sampling.bound;
    let mut counterexample = None;
    for _ in 0..sampling.samples {
        let x: Vec<f64> = (0..cone.dim()).map(|_| rng.gen_range(-b..=b)).collect();
        let dir = cone
            .sample_boundary_direction(&mut rng)
            .ok_or(ConeError::NoBoundaryDirection)?;
        let len = b * (1.0 - rng.gen::<f64>());
        let y: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + len * di).collect();
        let outcome = match check_cone_qm_pair(f, cone, &x, &y) {
            Ok(o) => o,
            // rounding in x + d can push a near-tangent pair off the face
            Err(ConeError::NotOnBoundary) => continue,
            Err(e) => return Err(e),
        };
        if !outcome.satisfied {
            counterexample = Some(outcome);
            break;
        }
    }
    Ok(ConeQmReport {
        verdict: if counterexample.is_some() {
            FalsifierVerdict::CounterexampleFound
        } else {
            FalsifierVerdict::NoCounterexampleFound
        },
        samples: sampling.samples,
        seed: sampling.seed,
        bound: sampling.bound,
        cone: cone.rows.clone(),
        counterexample,
    })
}
