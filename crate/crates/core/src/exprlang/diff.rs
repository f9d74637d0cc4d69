use super::{Expr, Func, Variable};

// Constructors below fold literal zeros and ones so that repeated
// differentiation (Christoffels, Lie derivatives) does not blow up in size.

fn is_zero(e: &Expr) -> bool {
    matches!(e, Expr::Const(c) if *c == 0.0)
}

fn is_one(e: &Expr) -> bool {
    matches!(e, Expr::Const(c) if *c == 1.0)
}

pub(super) fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        _ if is_zero(&a) => b,
        _ if is_zero(&b) => a,
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

pub(super) fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        _ if is_zero(&b) => a,
        _ if is_zero(&a) => neg(b),
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

pub(super) fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        _ if is_zero(&a) || is_zero(&b) => Expr::zero(),
        _ if is_one(&a) => b,
        _ if is_one(&b) => a,
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

pub(super) fn div(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) {
        Expr::zero()
    } else if is_one(&b) {
        a
    } else {
        Expr::Div(Box::new(a), Box::new(b))
    }
}

pub(super) fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

pub(super) fn pow(a: Expr, n: i32) -> Expr {
    match n {
        0 => Expr::Const(1.0),
        1 => a,
        _ => Expr::Pow(Box::new(a), n),
    }
}

pub(super) fn derive(e: &Expr, var: Variable) -> Expr {
    if !e.depends_on(var) {
        return Expr::zero();
    }
    match e {
        Expr::Const(_) => Expr::zero(),
        Expr::Var(i) => Expr::Const(if var == Variable::Coord(*i) { 1.0 } else { 0.0 }),
        Expr::Time => Expr::Const(if var == Variable::Time { 1.0 } else { 0.0 }),
        Expr::Add(a, b) => add(derive(a, var), derive(b, var)),
        Expr::Sub(a, b) => sub(derive(a, var), derive(b, var)),
        Expr::Mul(a, b) => add(
            mul(derive(a, var), (**b).clone()),
            mul((**a).clone(), derive(b, var)),
        ),
        Expr::Div(a, b) => {
            let da = derive(a, var);
            let db = derive(b, var);
            if is_zero(&db) {
                div(da, (**b).clone())
            } else {
                // (a/b)' = a'/b - a b' / b^2
                sub(
                    div(da, (**b).clone()),
                    div(mul((**a).clone(), db), pow((**b).clone(), 2)),
                )
            }
        }
        Expr::Neg(a) => neg(derive(a, var)),
        Expr::Pow(a, n) => mul(
            mul(Expr::Const(f64::from(*n)), pow((**a).clone(), n - 1)),
            derive(a, var),
        ),
        Expr::Call(f, a) => {
            let inner = (**a).clone();
            let outer = match f {
                Func::Sin => Expr::Call(Func::Cos, Box::new(inner)),
                Func::Cos => neg(Expr::Call(Func::Sin, Box::new(inner))),
                Func::Exp => Expr::Call(Func::Exp, Box::new(inner)),
                Func::Log => return div(derive(a, var), inner),
            };
            mul(outer, derive(a, var))
        }
    }
}
