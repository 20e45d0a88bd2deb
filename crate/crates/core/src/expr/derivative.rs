use super::{BinaryOp, Expr, ExprError, Function};

// Smart constructors. Simplification is limited to constant folding,
// zero/one elimination and pulling constant coefficients to the front.

fn konst(c: f64) -> Expr {
    Expr::Const(c)
}

fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Expr {
    Expr::Binary {
        op,
        lhs: Box::new(lhs),
        rhs: Box::new(rhs),
    }
}

fn is_zero(e: &Expr) -> bool {
    e.as_const() == Some(0.0)
}

fn is_one(e: &Expr) -> bool {
    e.as_const() == Some(1.0)
}

pub(super) fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => konst(-c),
        Expr::Neg(inner) => *inner,
        Expr::Binary {
            op: BinaryOp::Mul,
            lhs,
            rhs,
        } if lhs.is_const() => binary(BinaryOp::Mul, konst(-lhs.as_const().unwrap()), *rhs),
        other => Expr::Neg(Box::new(other)),
    }
}

pub(super) fn add(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => konst(x + y),
        (Some(0.0), _) => b,
        (_, Some(0.0)) => a,
        _ => binary(BinaryOp::Add, a, b),
    }
}

pub(super) fn sub(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => konst(x - y),
        (Some(0.0), _) => neg(b),
        (_, Some(0.0)) => a,
        _ => binary(BinaryOp::Sub, a, b),
    }
}

pub(super) fn mul(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) || is_zero(&b) {
        return konst(0.0);
    }
    if is_one(&a) {
        return b;
    }
    if is_one(&b) {
        return a;
    }
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => konst(x * y),
        (
            Expr::Const(x),
            Expr::Binary {
                op: BinaryOp::Mul,
                lhs,
                rhs,
            },
        ) if lhs.is_const() => mul(konst(x * lhs.as_const().unwrap()), *rhs),
        (Expr::Const(x), Expr::Neg(inner)) => mul(konst(-x), *inner),
        (a, b @ Expr::Const(_)) => mul(b, a),
        (a, b) => binary(BinaryOp::Mul, a, b),
    }
}

pub(super) fn div(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) {
        return konst(0.0);
    }
    if is_one(&b) {
        return a;
    }
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) if y != 0.0 => konst(x / y),
        _ => binary(BinaryOp::Div, a, b),
    }
}

pub(super) fn pow(base: Expr, exponent: f64) -> Expr {
    if exponent == 0.0 {
        return konst(1.0);
    }
    if exponent == 1.0 {
        return base;
    }
    if let Some(b) = base.as_const() {
        if let Ok(v) = super::apply_pow(b, exponent) {
            if v.is_finite() {
                return konst(v);
            }
        }
    }
    Expr::Pow {
        base: Box::new(base),
        exponent,
    }
}

pub(super) fn call(func: Function, arg: Expr) -> Expr {
    if let Some(a) = arg.as_const() {
        if let Ok(v) = func.apply(a) {
            if v.is_finite() {
                return konst(v);
            }
        }
    }
    Expr::Call {
        func,
        arg: Box::new(arg),
    }
}

/// Exact partial derivative of `expr` with respect to the variable `var`.
///
/// `abs` differentiates to `sign` (taking `sign(0) = 0`), and `sign`
/// differentiates to zero; both are non-smooth at the origin.
pub fn differentiate(expr: &Expr, var: &str) -> Expr {
    match expr {
        Expr::Const(_) => konst(0.0),
        Expr::Var { name, .. } => konst(if name == var { 1.0 } else { 0.0 }),
        Expr::Neg(a) => neg(differentiate(a, var)),
        Expr::Binary { op, lhs, rhs } => {
            let dl = differentiate(lhs, var);
            let dr = differentiate(rhs, var);
            let l = (**lhs).clone();
            let r = (**rhs).clone();
            match op {
                BinaryOp::Add => add(dl, dr),
                BinaryOp::Sub => sub(dl, dr),
                BinaryOp::Mul => add(mul(dl, r), mul(l, dr)),
                BinaryOp::Div => {
                    if is_zero(&dr) {
                        div(dl, r)
                    } else {
                        div(sub(mul(dl, r.clone()), mul(l, dr)), pow(r, 2.0))
                    }
                }
            }
        }
        Expr::Pow { base, exponent } => {
            let db = differentiate(base, var);
            if is_zero(&db) {
                return konst(0.0);
            }
            mul(
                mul(konst(*exponent), pow((**base).clone(), exponent - 1.0)),
                db,
            )
        }
        Expr::Call { func, arg } => {
            let da = differentiate(arg, var);
            if is_zero(&da) {
                return konst(0.0);
            }
            let a = (**arg).clone();
            let outer = match func {
                Function::Sin => call(Function::Cos, a),
                Function::Cos => neg(call(Function::Sin, a)),
                Function::Exp => call(Function::Exp, a),
                Function::Tanh => sub(konst(1.0), pow(call(Function::Tanh, a), 2.0)),
                Function::Sqrt => div(konst(1.0), mul(konst(2.0), call(Function::Sqrt, a))),
                Function::Abs => call(Function::Sign, a),
                Function::Sign => return konst(0.0),
            };
            mul(outer, da)
        }
    }
}

/// Matrix of partial derivatives: entry `(i, j)` is `d rhs[i] / d wrt[j]`.
pub fn jacobian<S: AsRef<str>>(rhs: &[Expr], wrt: &[S]) -> Result<Vec<Vec<Expr>>, ExprError> {
    if rhs.len() != wrt.len() {
        return Err(ExprError::DimensionMismatch {
            expected: wrt.len(),
            found: rhs.len(),
        });
    }
    Ok(rhs
        .iter()
        .map(|f| wrt.iter().map(|v| differentiate(f, v.as_ref())).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn example_jacobian_entries() {
        let v = ["x1", "x2"];
        let f1 = parse("-x1^2 + x2", &v).unwrap();
        assert_eq!(differentiate(&f1, "x1").to_string(), "-2*x1");
        let x1 = parse("x1", &v).unwrap();
        assert_eq!(differentiate(&x1, "x2"), Expr::Const(0.0));

        let rhs = vec![
            parse("-x1^2+x2", &v).unwrap(),
            parse("x1-2*x2^2", &v).unwrap(),
        ];
        let j = jacobian(&rhs, &v).unwrap();
        let rendered: Vec<Vec<String>> = j
            .iter()
            .map(|row| row.iter().map(|e| e.to_string()).collect())
            .collect();
        assert_eq!(rendered, vec![vec!["-2*x1", "1"], vec!["1", "-4*x2"]]);
    }

    #[test]
    fn identity_jacobian() {
        let v = ["x1", "x2"];
        let rhs = vec![parse("x1", &v).unwrap(), parse("x2", &v).unwrap()];
        let j = jacobian(&rhs, &v).unwrap();
        for (i, row) in j.iter().enumerate() {
            for (k, e) in row.iter().enumerate() {
                assert_eq!(e.as_const(), Some(if i == k { 1.0 } else { 0.0 }));
            }
        }
    }

    #[test]
    fn jacobian_dimension_mismatch() {
        let v = ["x1", "x2"];
        let rhs = vec![parse("x1", &v).unwrap()];
        assert_eq!(
            jacobian(&rhs, &v),
            Err(ExprError::DimensionMismatch {
                expected: 2,
                found: 1
            })
        );
    }

    #[test]
    fn product_rule_rendering() {
        let e = parse("sin(x)*x", &["x"]).unwrap();
        assert_eq!(differentiate(&e, "x").to_string(), "cos(x)*x + sin(x)");
    }

    fn central_difference(e: &Expr, at: f64) -> f64 {
        let h = 1e-5 * (1.0 + at.abs());
        (e.eval_at(&[at + h]).unwrap() - e.eval_at(&[at - h]).unwrap()) / (2.0 * h)
    }

    #[test]
    fn product_rule_matches_finite_differences() {
        let e = parse("sin(x)*x", &["x"]).unwrap();
        let d = differentiate(&e, "x");
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let x: f64 = rng.gen_range(-5.0..5.0);
            let exact = d.eval_at(&[x]).unwrap();
            let fd = central_difference(&e, x);
            assert!(
                (exact - fd).abs() <= 1e-6 * exact.abs().max(1.0),
                "x={x} exact={exact} fd={fd}"
            );
        }
    }

    #[test]
    fn function_rules() {
        let v = ["x"];
        for (src, at) in [
            ("cos(x^2)", 0.7),
            ("exp(-x)*tanh(x)", -0.4),
            ("sqrt(1 + x^2)", 2.0),
            ("x/(1 + x^2)", 0.3),
            ("abs(x)*x", -1.5),
            ("x^(-2)", 1.3),
            ("x^0.5", 2.2),
        ] {
            let e = parse(src, &v).unwrap();
            let d = differentiate(&e, "x");
            let exact = d.eval_at(&[at]).unwrap();
            let fd = central_difference(&e, at);
            assert!(
                (exact - fd).abs() <= 1e-6 * (1.0 + exact.abs()),
                "{src}: exact={exact} fd={fd}"
            );
        }
    }

    #[test]
    fn abs_derivative_is_zero_at_origin() {
        let e = parse("abs(x)", &["x"]).unwrap();
        let d = differentiate(&e, "x");
        assert_eq!(d.to_string(), "sign(x)");
        assert_eq!(d.eval_at(&[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn folding_keeps_constants_tidy() {
        let e = parse("3*(2*x)", &["x"]).unwrap();
        assert_eq!(differentiate(&e, "x"), Expr::Const(6.0));
        let y = parse("x*y^3", &["x", "y"]).unwrap();
        assert_eq!(differentiate(&y, "y").to_string(), "x*(3*y^2)");
    }
}
