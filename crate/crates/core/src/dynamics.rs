//! Original system `ẋ = f(t, x)`, its variational system `δẋ = J(t, x) δx`,
//! and fixed-step RK4 integration of both, optionally coupled with a
//! comparison system `u̇ = φ(t, u[, x])` on the same grid.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::expr::{self, Expr, ExprError};
use crate::linalg;

/// Upper bound on the number of RK4 steps in one integration.
pub const MAX_STEPS: f64 = 1e8;

/// Tolerance for the symmetric Jacobi eigen-solver.
pub const JACOBI_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("{context}: {source}")]
    Expr {
        context: String,
        #[source]
        source: ExprError,
    },
    #[error("evaluation failed at t = {t}: {source}")]
    Evaluation {
        t: f64,
        #[source]
        source: ExprError,
    },
    #[error("{what} has length {found}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("state dimension must be at least 1")]
    ZeroDimension,
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error("integration needs {steps} steps, more than the limit of {MAX_STEPS}")]
    StepLimit { steps: f64 },
    #[error("state became non-finite at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("initial comparison state u0[{component}] = {value} is negative")]
    NegativeU0 { component: usize, value: f64 },
    #[error("trajectory is malformed: {0}")]
    MalformedTrajectory(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JacobianMode {
    #[default]
    Symbolic,
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq)]
enum JacobianProvider {
    Symbolic(Vec<Vec<Expr>>),
    FiniteDifference,
}

/// Vector field over the variables `(t, x1, .., xn)` together with a
/// Jacobian provider.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicalSystem {
    dim: usize,
    rhs: Vec<Expr>,
    jacobian: JacobianProvider,
    label: String,
}

/// `["t", "x1", .., "xn"]`.
pub fn state_variables(n: usize) -> Vec<String> {
    std::iter::once("t".to_string())
        .chain((1..=n).map(|i| format!("x{i}")))
        .collect()
}

impl DynamicalSystem {
    pub fn new<S: AsRef<str>>(
        sources: &[S],
        n: usize,
        mode: JacobianMode,
    ) -> Result<Self, DynamicsError> {
        if n == 0 {
            return Err(DynamicsError::ZeroDimension);
        }
        if sources.len() != n {
            return Err(DynamicsError::DimensionMismatch {
                what: "right-hand side",
                expected: n,
                found: sources.len(),
            });
        }
        let vars = state_variables(n);
        let rhs = sources
            .iter()
            .enumerate()
            .map(|(i, s)| {
                expr::parse(s.as_ref(), &vars).map_err(|source| DynamicsError::Expr {
                    context: format!("rhs[{i}]"),
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let jacobian = match mode {
            JacobianMode::Symbolic => JacobianProvider::Symbolic(
                expr::jacobian(&rhs, &vars[1..]).expect("lengths checked above"),
            ),
            JacobianMode::FiniteDifference => JacobianProvider::FiniteDifference,
        };
        Ok(DynamicalSystem {
            dim: n,
            rhs,
            jacobian,
            label: String::new(),
        })
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

    pub fn rhs(&self) -> &[Expr] {
        &self.rhs
    }

    pub fn mode(&self) -> JacobianMode {
        match self.jacobian {
            JacobianProvider::Symbolic(_) => JacobianMode::Symbolic,
            JacobianProvider::FiniteDifference => JacobianMode::FiniteDifference,
        }
    }

    pub fn symbolic_jacobian(&self) -> Option<&[Vec<Expr>]> {
        match &self.jacobian {
            JacobianProvider::Symbolic(j) => Some(j),
            JacobianProvider::FiniteDifference => None,
        }
    }

    fn check_state(&self, what: &'static str, v: &[f64]) -> Result<(), DynamicsError> {
        if v.len() != self.dim {
            return Err(DynamicsError::DimensionMismatch {
                what,
                expected: self.dim,
                found: v.len(),
            });
        }
        Ok(())
    }

    fn slots(t: f64, x: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(x.len() + 1);
        v.push(t);
        v.extend_from_slice(x);
        v
    }

    fn field_into(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<(), DynamicsError> {
        let slots = Self::slots(t, x);
        for (o, f) in out.iter_mut().zip(&self.rhs) {
            *o = f
                .eval_at(&slots)
                .map_err(|source| DynamicsError::Evaluation { t, source })?;
        }
        Ok(())
    }

    /// `f(t, x)`.
    pub fn field(&self, t: f64, x: &[f64]) -> Result<Vec<f64>, DynamicsError> {
        self.check_state("x", x)?;
        let mut out = vec![0.0; self.dim];
        self.field_into(t, x, &mut out)?;
        Ok(out)
    }

    /// `∂f/∂x` at `(t, x)`, row-major.
    ///
    /// The finite-difference provider uses central differences with step
    /// `1e-6 · (1 + |x_j|)`.
    pub fn jacobian_at(&self, t: f64, x: &[f64]) -> Result<Vec<Vec<f64>>, DynamicsError> {
        self.check_state("x", x)?;
        match &self.jacobian {
            JacobianProvider::Symbolic(j) => {
                let slots = Self::slots(t, x);
                j.iter()
                    .map(|row| {
                        row.iter()
                            .map(|e| {
                                e.eval_at(&slots)
                                    .map_err(|source| DynamicsError::Evaluation { t, source })
                            })
                            .collect()
                    })
                    .collect()
            }
            JacobianProvider::FiniteDifference => {
                let n = self.dim;
                let mut jac = vec![vec![0.0; n]; n];
                let mut xp = x.to_vec();
                let mut fp = vec![0.0; n];
                let mut fm = vec![0.0; n];
                for j in 0..n {
                    let h = 1e-6 * (1.0 + x[j].abs());
                    xp[j] = x[j] + h;
                    self.field_into(t, &xp, &mut fp)?;
                    xp[j] = x[j] - h;
                    self.field_into(t, &xp, &mut fm)?;
                    xp[j] = x[j];
                    for i in 0..n {
                        jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
                    }
                }
                Ok(jac)
            }
        }
    }

    /// `h(δx, x, t) = J(t, x) · δx`.
    pub fn variational_rhs(
        &self,
        t: f64,
        x: &[f64],
        dx: &[f64],
    ) -> Result<Vec<f64>, DynamicsError> {
        self.check_state("dx", dx)?;
        let jac = self.jacobian_at(t, x)?;
        Ok(linalg::mat_vec(&jac, dx))
    }

    /// Largest eigenvalue of the symmetric part `(J + Jᵀ) / 2`; negative
    /// uniformly in `(t, x)` is the classical scalar contraction condition.
    pub fn max_symmetric_jacobian_eig(&self, t: f64, x: &[f64]) -> Result<f64, DynamicsError> {
        let jac = self.jacobian_at(t, x)?;
        let n = self.dim;
        let sym: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| 0.5 * (jac[i][j] + jac[j][i])).collect())
            .collect();
        let eig = linalg::symmetric_eigenvalues(&sym, JACOBI_TOL);
        Ok(*eig.last().expect("dimension is at least 1"))
    }

    pub fn integrate(
        &self,
        x0: &[f64],
        cfg: &IntegratorConfig,
    ) -> Result<Trajectory, DynamicsError> {
        self.integrate_channels(x0, None, None, cfg)
    }

    /// Integrates `x` and `δx` jointly.
    pub fn integrate_variational(
        &self,
        x0: &[f64],
        dx0: &[f64],
        cfg: &IntegratorConfig,
    ) -> Result<Trajectory, DynamicsError> {
        self.integrate_channels(x0, Some(dx0), None, cfg)
    }

    /// Integrates `x`, `δx` and the comparison state `u` with one shared RK4
    /// stepper, so all three channels are sampled on the same grid.
    pub fn integrate_coupled(
        &self,
        comparison: &dyn ComparisonField,
        x0: &[f64],
        dx0: &[f64],
        u0: &[f64],
        cfg: &IntegratorConfig,
    ) -> Result<Trajectory, DynamicsError> {
        if u0.len() != comparison.dim() {
            return Err(DynamicsError::DimensionMismatch {
                what: "u0",
                expected: comparison.dim(),
                found: u0.len(),
            });
        }
        if let Some((component, &value)) = u0.iter().enumerate().find(|(_, &v)| !(v >= 0.0)) {
            return Err(DynamicsError::NegativeU0 { component, value });
        }
        self.integrate_channels(x0, Some(dx0), Some((comparison, u0)), cfg)
    }

    fn integrate_channels(
        &self,
        x0: &[f64],
        dx0: Option<&[f64]>,
        comparison: Option<(&dyn ComparisonField, &[f64])>,
        cfg: &IntegratorConfig,
    ) -> Result<Trajectory, DynamicsError> {
        cfg.validate()?;
        self.check_state("x0", x0)?;
        if let Some(dx0) = dx0 {
            self.check_state("dx0", dx0)?;
        }
        if let Some((cmp, _)) = comparison {
            if let Some(sd) = cmp.state_dim() {
                if sd != self.dim {
                    return Err(DynamicsError::DimensionMismatch {
                        what: "comparison state arguments",
                        expected: self.dim,
                        found: sd,
                    });
                }
            }
        }
        let n = self.dim;
        let mut z0 = x0.to_vec();
        if let Some(dx0) = dx0 {
            z0.extend_from_slice(dx0);
        }
        if let Some((_, u0)) = comparison {
            z0.extend_from_slice(u0);
        }
        let has_var = dx0.is_some();
        let (times, states) = rk4(&z0, cfg, |t, z, out| {
            let x = &z[..n];
            self.field_into(t, x, &mut out[..n])?;
            let mut offset = n;
            if has_var {
                let dz = self.variational_rhs(t, x, &z[n..2 * n])?;
                out[n..2 * n].copy_from_slice(&dz);
                offset = 2 * n;
            }
            if let Some((cmp, _)) = comparison {
                cmp.eval(t, &z[offset..], x, &mut out[offset..])
                    .map_err(|source| DynamicsError::Evaluation { t, source })?;
            }
            Ok(())
        })?;

        let mut xs = Vec::with_capacity(states.len());
        let mut dxs = has_var.then(|| Vec::with_capacity(states.len()));
        let mut us = comparison.map(|_| Vec::with_capacity(states.len()));
        for z in states {
            xs.push(z[..n].to_vec());
            let mut offset = n;
            if let Some(d) = dxs.as_mut() {
                d.push(z[n..2 * n].to_vec());
                offset = 2 * n;
            }
            if let Some(u) = us.as_mut() {
                u.push(z[offset..].to_vec());
            }
        }
        Ok(Trajectory {
            times,
            states: xs,
            variational: dxs,
            comparison: us,
        })
    }
}

/// Right-hand side `φ(t, u[, x])` of a comparison system.
pub trait ComparisonField {
    fn dim(&self) -> usize;

    /// Dimension of the state argument `x`, or `None` when `φ` does not
    /// depend on the state.
    fn state_dim(&self) -> Option<usize>;

    fn eval(&self, t: f64, u: &[f64], x: &[f64], out: &mut [f64]) -> Result<(), ExprError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub dt: f64,
    #[serde(default)]
    pub t0: f64,
    pub t_end: f64,
    #[serde(default)]
    pub method: Method,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            dt: 1e-3,
            t0: 0.0,
            t_end: 10.0,
            method: Method::Rk4,
        }
    }
}

impl IntegratorConfig {
    pub fn new(dt: f64, t0: f64, t_end: f64) -> Result<Self, DynamicsError> {
        let cfg = IntegratorConfig {
            dt,
            t0,
            t_end,
            method: Method::Rk4,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(DynamicsError::InvalidConfig(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t0.is_finite() && self.t_end.is_finite() && self.t_end > self.t0) {
            return Err(DynamicsError::InvalidConfig(format!(
                "need t_end > t0, got t0 = {}, t_end = {}",
                self.t0, self.t_end
            )));
        }
        let steps = (self.t_end - self.t0) / self.dt;
        if steps > MAX_STEPS {
            return Err(DynamicsError::StepLimit { steps });
        }
        Ok(())
    }

    /// Number of steps: `round((t_end − t0) / dt)`, at least one. The grid
    /// is `t0 + k·dt` for `k = 0..=steps`.
    pub fn steps(&self) -> usize {
        (((self.t_end - self.t0) / self.dt).round() as usize).max(1)
    }
}

/// Classical fixed-step RK4 over the grid of `cfg`.
fn rk4<F>(
    z0: &[f64],
    cfg: &IntegratorConfig,
    mut rhs: F,
) -> Result<(Vec<f64>, Vec<Vec<f64>>), DynamicsError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), DynamicsError>,
{
    let dim = z0.len();
    let steps = cfg.steps();
    let h = cfg.dt;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut z = z0.to_vec();
    if z.iter().any(|v| !v.is_finite()) {
        return Err(DynamicsError::NonFiniteState { t: cfg.t0 });
    }
    times.push(cfg.t0);
    states.push(z.clone());

    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];
    for k in 0..steps {
        let t = cfg.t0 + k as f64 * h;
        rhs(t, &z, &mut k1)?;
        for i in 0..dim {
            tmp[i] = z[i] + 0.5 * h * k1[i];
        }
        rhs(t + 0.5 * h, &tmp, &mut k2)?;
        for i in 0..dim {
            tmp[i] = z[i] + 0.5 * h * k2[i];
        }
        rhs(t + 0.5 * h, &tmp, &mut k3)?;
        for i in 0..dim {
            tmp[i] = z[i] + h * k3[i];
        }
        rhs(t + h, &tmp, &mut k4)?;
        for i in 0..dim {
            z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t_next = cfg.t0 + (k + 1) as f64 * h;
        if z.iter().any(|v| !v.is_finite()) {
            return Err(DynamicsError::NonFiniteState { t: t_next });
        }
        times.push(t_next);
        states.push(z.clone());
    }
    Ok((times, states))
}

/// Sampled solution on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    variational: Option<Vec<Vec<f64>>>,
    comparison: Option<Vec<Vec<f64>>>,
}

impl Trajectory {
    /// Assembles a trajectory from samples, checking the grid is strictly
    /// increasing and uniform (within 1e-12 relative to the step) and that
    /// all values are finite.
    pub fn from_parts(
        times: Vec<f64>,
        states: Vec<Vec<f64>>,
        variational: Option<Vec<Vec<f64>>>,
        comparison: Option<Vec<Vec<f64>>>,
    ) -> Result<Self, DynamicsError> {
        let bad = |m: &str| Err(DynamicsError::MalformedTrajectory(m.to_string()));
        if times.is_empty() {
            return bad("no samples");
        }
        if states.len() != times.len() {
            return bad("states and times differ in length");
        }
        if times.len() > 1 {
            let step = times[1] - times[0];
            if !(step > 0.0) {
                return bad("times are not strictly increasing");
            }
            for w in times.windows(2) {
                let d = w[1] - w[0];
                if !(d > 0.0) || (d - step).abs() > 1e-12 * step.max(1.0) {
                    return bad("grid is not uniform");
                }
            }
        }
        let width = states[0].len();
        let channel_ok = |c: &Option<Vec<Vec<f64>>>, w: Option<usize>| match c {
            None => true,
            Some(rows) => {
                let w = w.unwrap_or_else(|| rows.first().map_or(0, Vec::len));
                rows.len() == times.len() && rows.iter().all(|r| r.len() == w)
            }
        };
        if !states.iter().all(|s| s.len() == width)
            || !channel_ok(&variational, Some(width))
            || !channel_ok(&comparison, None)
        {
            return bad("inconsistent channel shapes");
        }
        let all = states
            .iter()
            .chain(variational.iter().flatten())
            .chain(comparison.iter().flatten())
            .flatten();
        if all.chain(&times).any(|v| !v.is_finite()) {
            return bad("non-finite sample");
        }
        Ok(Trajectory {
            times,
            states,
            variational,
            comparison,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn variational(&self) -> Option<&[Vec<f64>]> {
        self.variational.as_deref()
    }

    pub fn comparison(&self) -> Option<&[Vec<f64>]> {
        self.comparison.as_deref()
    }

    /// CSV with header `t,x1..xn[,dx1..dxn][,u1..um]` and every value printed
    /// with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.dim();
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        if self.variational.is_some() {
            header.extend((1..=n).map(|i| format!("dx{i}")));
        }
        if let Some(u) = &self.comparison {
            header.extend((1..=u[0].len()).map(|i| format!("u{i}")));
        }
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.len() {
            let mut row = vec![self.times[k]];
            row.extend_from_slice(&self.states[k]);
            if let Some(d) = &self.variational {
                row.extend_from_slice(&d[k]);
            }
            if let Some(u) = &self.comparison {
                row.extend_from_slice(&u[k]);
            }
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example2() -> DynamicalSystem {
        DynamicalSystem::new(&["-x1^2+x2", "x1-2*x2^2"], 2, JacobianMode::Symbolic).unwrap()
    }

    #[test]
    fn make_system_cases() {
        let s = example2();
        assert_eq!(s.dim(), 2);
        let zero = DynamicalSystem::new(&["0"], 1, JacobianMode::Symbolic).unwrap();
        assert_eq!(zero.jacobian_at(0.0, &[3.0]).unwrap(), vec![vec![0.0]]);
        assert!(matches!(
            DynamicalSystem::new(&["x1"], 2, JacobianMode::Symbolic),
            Err(DynamicsError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            DynamicalSystem::new(&["x3"], 1, JacobianMode::Symbolic),
            Err(DynamicsError::Expr { .. })
        ));
        assert!(matches!(
            DynamicalSystem::new::<&str>(&[], 0, JacobianMode::Symbolic),
            Err(DynamicsError::ZeroDimension)
        ));
    }

    #[test]
    fn example1_block_structure() {
        // n = 2 states plus sigma as x3; rho = (1, 2), a = (1, 1), p = 1
        let s = DynamicalSystem::new(
            &["-1*x1 + x3", "-2*x2 + x3", "1*x1 + 1*x2 - 2*x3"],
            3,
            JacobianMode::Symbolic,
        )
        .unwrap();
        let j = s.jacobian_at(0.0, &[0.3, -0.2, 0.1]).unwrap();
        assert_eq!(
            j,
            vec![
                vec![-1.0, 0.0, 1.0],
                vec![0.0, -2.0, 1.0],
                vec![1.0, 1.0, -2.0]
            ]
        );
    }

    #[test]
    fn variational_rhs_cases() {
        let s = example2();
        assert_eq!(
            s.variational_rhs(0.0, &[1.0, 1.0], &[1.0, 0.0]).unwrap(),
            vec![-2.0, 1.0]
        );
        assert_eq!(
            s.variational_rhs(0.0, &[1.0, 1.0], &[0.0, 0.0]).unwrap(),
            vec![0.0, 0.0]
        );
        // J(0, 0) = [[0, 1], [1, 0]] by substitution
        assert_eq!(
            s.variational_rhs(0.0, &[0.0, 0.0], &[0.7, -1.3]).unwrap(),
            vec![-1.3, 0.7]
        );
    }

    #[test]
    fn variational_rhs_is_linear() {
        let s = example2();
        let x = [0.37, -1.21];
        let dx = [0.913, 0.0417];
        let base = s.variational_rhs(0.5, &x, &dx).unwrap();
        for c in [2.0, -0.5, 4.0, -0.125] {
            let scaled: Vec<f64> = dx.iter().map(|v| c * v).collect();
            let lhs = s.variational_rhs(0.5, &x, &scaled).unwrap();
            let rhs: Vec<f64> = base.iter().map(|v| c * v).collect();
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn finite_difference_jacobian_tracks_symbolic() {
        let sym = example2();
        let fd = DynamicalSystem::new(
            &["-x1^2+x2", "x1-2*x2^2"],
            2,
            JacobianMode::FiniteDifference,
        )
        .unwrap();
        let a = sym.jacobian_at(0.0, &[0.8, -0.3]).unwrap();
        let b = fd.jacobian_at(0.0, &[0.8, -0.3]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((a[i][j] - b[i][j]).abs() < 1e-8);
            }
        }
        let absfield =
            DynamicalSystem::new(&["-abs(x1)"], 1, JacobianMode::FiniteDifference).unwrap();
        assert!((absfield.jacobian_at(0.0, &[2.0]).unwrap()[0][0] + 1.0).abs() < 1e-8);
    }

    #[test]
    fn constant_trajectory() {
        let s = DynamicalSystem::new(&["0"], 1, JacobianMode::Symbolic).unwrap();
        let cfg = IntegratorConfig::new(0.1, 0.0, 1.0).unwrap();
        let tr = s.integrate(&[7.0], &cfg).unwrap();
        assert_eq!(tr.len(), 11);
        assert!(tr.states().iter().all(|x| x[0] == 7.0));
    }

    #[test]
    fn exponential_decay_accuracy() {
        let s = DynamicalSystem::new(&["-x1"], 1, JacobianMode::Symbolic).unwrap();
        let cfg = IntegratorConfig::new(1e-3, 0.0, 1.0).unwrap();
        let tr = s.integrate(&[1.0], &cfg).unwrap();
        let last = tr.states().last().unwrap()[0];
        assert!((last - (-1f64).exp()).abs() < 1e-8);
        assert!((tr.times().last().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn example2_half_step_cross_check() {
        let s = example2();
        let coarse = s
            .integrate(&[1.0, 1.0], &IntegratorConfig::new(1e-3, 0.0, 5.0).unwrap())
            .unwrap();
        let fine = s
            .integrate(&[1.0, 1.0], &IntegratorConfig::new(5e-4, 0.0, 5.0).unwrap())
            .unwrap();
        let mut max_dev: f64 = 0.0;
        for (k, x) in coarse.states().iter().enumerate() {
            let y = &fine.states()[2 * k];
            for i in 0..2 {
                max_dev = max_dev.max((x[i] - y[i]).abs());
            }
            assert!(x[0] > 0.0 && x[1] > 0.0);
        }
        assert!(max_dev <= 1e-6, "max deviation {max_dev}");
        let first = &coarse.states()[0];
        let last = coarse.states().last().unwrap();
        assert!(last[0] < first[0] && last[1] < first[1]);
    }

    #[test]
    fn blow_up_is_reported() {
        let s = DynamicalSystem::new(&["x1^2"], 1, JacobianMode::Symbolic).unwrap();
        let cfg = IntegratorConfig::new(1e-2, 0.0, 5.0).unwrap();
        match s.integrate(&[1.0], &cfg) {
            Err(DynamicsError::NonFiniteState { t }) => assert!(t > 0.9 && t < 1.5, "t = {t}"),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::new(0.0, 0.0, 1.0).is_err());
        assert!(IntegratorConfig::new(0.1, 1.0, 1.0).is_err());
        assert!(matches!(
            IntegratorConfig::new(1e-9, 0.0, 1.0),
            Err(DynamicsError::StepLimit { .. })
        ));
    }

    #[test]
    fn symmetric_eig_cases() {
        let diag = DynamicalSystem::new(&["-x1", "-3*x2"], 2, JacobianMode::Symbolic).unwrap();
        assert!((diag.max_symmetric_jacobian_eig(0.0, &[0.0, 0.0]).unwrap() + 1.0).abs() < 1e-12);
        let s = example2();
        let at11 = s.max_symmetric_jacobian_eig(0.0, &[1.0, 1.0]).unwrap();
        assert!((at11 - (-3.0 + 2f64.sqrt())).abs() < 1e-10);
        let at00 = s.max_symmetric_jacobian_eig(0.0, &[0.0, 0.0]).unwrap();
        assert!((at00 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn csv_layout() {
        let s = DynamicalSystem::new(&["-x1"], 1, JacobianMode::Symbolic).unwrap();
        let tr = s
            .integrate_variational(
                &[1.0],
                &[0.5],
                &IntegratorConfig::new(0.5, 0.0, 1.0).unwrap(),
            )
            .unwrap();
        let csv = tr.to_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,x1,dx1");
        assert_eq!(lines.len(), 4);
        assert_eq!(
            lines[1],
            "0.0000000000000000e0,1.0000000000000000e0,5.0000000000000000e-1"
        );
        let parsed: Vec<f64> = lines[2].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(parsed[1], tr.states()[1][0]);
    }

    #[test]
    fn from_parts_rejects_bad_grids() {
        assert!(
            Trajectory::from_parts(vec![0.0, 1.0, 3.0], vec![vec![0.0]; 3], None, None).is_err()
        );
        assert!(Trajectory::from_parts(vec![0.0, 0.0], vec![vec![0.0]; 2], None, None).is_err());
        assert!(
            Trajectory::from_parts(vec![0.0, 1.0], vec![vec![f64::NAN]; 2], None, None).is_err()
        );
        assert!(
            Trajectory::from_parts(vec![0.0, 1.0, 2.0], vec![vec![0.0]; 3], None, None).is_ok()
        );
    }
}
