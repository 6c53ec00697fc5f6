//! Direct-substitution feasibility checker, independent of every backend.

use std::fmt;

use super::{Model, VarDomain, VarId, INTEGRALITY_TOL};

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    Bound { var: VarId, name: String, value: f64 },
    Integrality { var: VarId, name: String, value: f64 },
    Constraint { index: usize, name: String, amount: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Bound { name, value, .. } => write!(f, "`{name}` = {value} is out of bounds"),
            Violation::Integrality { name, value, .. } => {
                write!(f, "binary `{name}` = {value} is fractional")
            }
            Violation::Constraint { name, amount, .. } => {
                write!(f, "constraint `{name}` violated by {amount}")
            }
        }
    }
}

/// Every bound, integrality and row violation of `values` beyond `tol`.
pub fn check_solution(model: &Model, values: &[f64], tol: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    for (i, (spec, &x)) in model.vars().iter().zip(values).enumerate() {
        let (lo, hi) = spec.domain.bounds();
        if !x.is_finite() || x < lo - tol || x > hi + tol {
            out.push(Violation::Bound {
                var: VarId(i),
                name: spec.name.clone(),
                value: x,
            });
        } else if spec.domain == VarDomain::Binary && (x - x.round()).abs() > INTEGRALITY_TOL {
            out.push(Violation::Integrality {
                var: VarId(i),
                name: spec.name.clone(),
                value: x,
            });
        }
    }
    for (index, c) in model.constraints().iter().enumerate() {
        let amount = c.violation(values);
        if amount > tol {
            out.push(Violation::Constraint {
                index,
                name: c.name.clone(),
                amount,
            });
        }
    }
    out
}

pub fn is_feasible(model: &Model, values: &[f64], tol: f64) -> bool {
    values.len() == model.num_vars() && check_solution(model, values, tol).is_empty()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{LinExpr, Relation, Sense};

    #[test]
    fn reports_each_kind() {
        let mut m = Model::new(Sense::Minimize, 2.0);
        let x = m.add_binary("x");
        let y = m.add_continuous("y", 0.0, 1.0);
        m.add_constraint("row", LinExpr::sum([x, y]), Relation::Le, 1.0);
        assert!(is_feasible(&m, &[1.0, 0.0], 1e-6));
        let v = check_solution(&m, &[0.5, 2.0], 1e-6);
        assert_eq!(v.len(), 3);
        assert!(matches!(v[0], Violation::Integrality { .. }));
        assert!(matches!(v[1], Violation::Bound { .. }));
        assert!(matches!(v[2], Violation::Constraint { .. }));
    }
}
