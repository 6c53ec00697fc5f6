//! Solver-agnostic mixed-integer linear model plus the backend boundary.
//!
//! Planning steps build a [`Model`] out of binary and bounded continuous
//! variables, then hand it to a [`Backend`] through [`solve`]. `solve`
//! validates the model, rounds binaries, and re-checks every constraint with
//! the independent checker in [`check`] before reporting `Optimal`.

pub mod check;
mod exhaustive;
#[cfg(feature = "highs")]
mod highs;
pub mod lp_format;
mod microlp_backend;

use std::collections::HashMap;
use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use web_time::Instant;

#[cfg(feature = "highs")]
pub use self::highs::HighsBackend;
pub use exhaustive::ExhaustiveBackend;
pub use microlp_backend::MicrolpBackend;

/// Feasibility tolerance applied when re-checking solutions.
pub const FEASIBILITY_TOL: f64 = 1e-6;
/// Distance from {0, 1} within which a binary value counts as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;

/// Environment variable selecting the solver backend (`highs` or `microlp`).
pub const BACKEND_ENV: &str = "COPLAN_SOLVER";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub(crate) usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VarDomain {
    Binary,
    Continuous { lower: f64, upper: f64 },
}

impl VarDomain {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            VarDomain::Binary => (0.0, 1.0),
            VarDomain::Continuous { lower, upper } => (lower, upper),
        }
    }
}

#[derive(Clone, Debug)]
pub struct VarSpec {
    pub name: String,
    pub domain: VarDomain,
}

/// A linear expression `sum(coef * var) + constant`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: value,
        }
    }

    pub fn with(mut self, var: VarId, coef: f64) -> Self {
        self.add(var, coef);
        self
    }

    pub fn add(&mut self, var: VarId, coef: f64) {
        self.terms.push((var, coef));
    }

    pub fn add_constant(&mut self, value: f64) {
        self.constant += value;
    }

    pub fn extend(&mut self, other: &LinExpr, scale: f64) {
        self.terms.extend(other.terms.iter().map(|&(v, c)| (v, c * scale)));
        self.constant += other.constant * scale;
    }

    pub fn sum<I: IntoIterator<Item = VarId>>(vars: I) -> Self {
        Self {
            terms: vars.into_iter().map(|v| (v, 1.0)).collect(),
            constant: 0.0,
        }
    }

    pub fn evaluate(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v.0]).sum::<f64>() + self.constant
    }

    /// Merges duplicate variables and drops zero coefficients, keeping the
    /// first-occurrence order.
    pub fn normalized(&self) -> LinExpr {
        let mut order: Vec<VarId> = Vec::with_capacity(self.terms.len());
        let mut coefs: HashMap<VarId, f64> = HashMap::with_capacity(self.terms.len());
        for &(v, c) in &self.terms {
            match coefs.get_mut(&v) {
                Some(acc) => *acc += c,
                None => {
                    order.push(v);
                    coefs.insert(v, c);
                }
            }
        }
        LinExpr {
            terms: order
                .into_iter()
                .map(|v| (v, coefs[&v]))
                .filter(|&(_, c)| c != 0.0)
                .collect(),
            constant: self.constant,
        }
    }
}

impl From<VarId> for LinExpr {
    fn from(v: VarId) -> Self {
        LinExpr::new().with(v, 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub name: String,
    pub expr: LinExpr,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    /// Signed amount by which the constraint is violated (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.expr.evaluate(values);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("constraint `{constraint}` references undeclared variable #{var}")]
    UndeclaredVariable { constraint: String, var: usize },
    #[error("non-finite coefficient in `{0}`")]
    NonFinite(String),
    #[error("variable `{name}` has empty domain [{lower}, {upper}]")]
    EmptyDomain { name: String, lower: f64, upper: f64 },
    #[error("big-M must be positive, got {0}")]
    BigM(f64),
}

/// A mixed-integer linear program over binary and bounded continuous
/// variables.
#[derive(Clone, Debug)]
pub struct Model {
    vars: Vec<VarSpec>,
    constraints: Vec<Constraint>,
    sense: Sense,
    objective: LinExpr,
    big_m: f64,
}

impl Model {
    pub fn new(sense: Sense, big_m: f64) -> Self {
        Self {
            vars: Vec::new(),
            constraints: Vec::new(),
            sense,
            objective: LinExpr::new(),
            big_m,
        }
    }

    /// Big-M sized for a horizon of `horizon_steps`: every big-M right-hand
    /// side in the planning models is bounded by the horizon length.
    pub fn for_horizon(sense: Sense, horizon_steps: u32) -> Self {
        Self::new(sense, f64::from(horizon_steps) + 1.0)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.vars.push(VarSpec {
            name: name.into(),
            domain: VarDomain::Binary,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.vars.push(VarSpec {
            name: name.into(),
            domain: VarDomain::Continuous { lower, upper },
        });
        VarId(self.vars.len() - 1)
    }

    pub fn add_constraint(&mut self, name: impl Into<String>, expr: LinExpr, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint {
            name: name.into(),
            expr: expr.normalized(),
            relation,
            rhs,
        });
    }

    pub fn set_objective(&mut self, objective: LinExpr) {
        self.objective = objective.normalized();
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn big_m(&self) -> f64 {
        self.big_m
    }

    pub fn objective(&self) -> &LinExpr {
        &self.objective
    }

    pub fn vars(&self) -> &[VarSpec] {
        &self.vars
    }

    pub fn var(&self, id: VarId) -> &VarSpec {
        &self.vars[id.0]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.domain == VarDomain::Binary).count()
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.big_m.is_finite() && self.big_m > 0.0) {
            return Err(ModelError::BigM(self.big_m));
        }
        for v in &self.vars {
            let (lo, hi) = v.domain.bounds();
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(ModelError::EmptyDomain {
                    name: v.name.clone(),
                    lower: lo,
                    upper: hi,
                });
            }
        }
        let check_expr = |name: &str, e: &LinExpr| -> Result<(), ModelError> {
            if !e.constant.is_finite() {
                return Err(ModelError::NonFinite(name.to_string()));
            }
            for &(v, c) in &e.terms {
                if v.0 >= self.vars.len() {
                    return Err(ModelError::UndeclaredVariable {
                        constraint: name.to_string(),
                        var: v.0,
                    });
                }
                if !c.is_finite() {
                    return Err(ModelError::NonFinite(name.to_string()));
                }
            }
            Ok(())
        };
        check_expr("objective", &self.objective)?;
        for c in &self.constraints {
            check_expr(&c.name, &c.expr)?;
            if !c.rhs.is_finite() {
                return Err(ModelError::NonFinite(c.name.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveLimits {
    /// Wall-clock budget in seconds; `None` is unlimited.
    pub time_limit: Option<f64>,
    /// Relative MIP gap; 0 asks for a proven optimum.
    pub mip_gap: f64,
}

impl Default for SolveLimits {
    fn default() -> Self {
        Self {
            time_limit: None,
            mip_gap: 0.0,
        }
    }
}

impl SolveLimits {
    pub fn with_time_limit(seconds: f64) -> Self {
        Self {
            time_limit: Some(seconds),
            mip_gap: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    /// Limit reached with a feasible incumbent.
    TimeLimitFeasible,
    /// Limit reached before any feasible point was found.
    NoSolution,
    Error(String),
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Values indexed by [`VarId`]; empty unless a solution exists.
    pub values: Vec<f64>,
    pub objective: f64,
    pub wall_time: Duration,
}

impl SolveResult {
    pub(crate) fn without_solution(status: SolveStatus) -> Self {
        Self {
            status,
            values: Vec::new(),
            objective: f64::NAN,
            wall_time: Duration::ZERO,
        }
    }

    pub fn has_solution(&self) -> bool {
        matches!(self.status, SolveStatus::Optimal | SolveStatus::TimeLimitFeasible)
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn value(&self, var: VarId) -> f64 {
        self.values[var.0]
    }

    /// Binary value as a bool; only meaningful on a rounded solution.
    pub fn is_set(&self, var: VarId) -> bool {
        self.values[var.0] > 0.5
    }

    pub fn value_by_name(&self, model: &Model, name: &str) -> Option<f64> {
        model.var_by_name(name).and_then(|v| self.values.get(v.0).copied())
    }

    pub fn named_values<'m>(&'m self, model: &'m Model) -> impl Iterator<Item = (&'m str, f64)> {
        model
            .vars()
            .iter()
            .zip(self.values.iter())
            .map(|(v, &x)| (v.name.as_str(), x))
    }
}

/// A MILP solver. Implementations must be safe to call concurrently on
/// distinct models.
pub trait Backend: Send + Sync {
    fn name(&self) -> &'static str;

    /// Solves without post-processing; [`solve`] wraps this.
    fn solve_raw(&self, model: &Model, limits: &SolveLimits) -> SolveResult;
}

/// Solves `model`, then rounds binaries and re-checks the rounded point.
///
/// A backend answer that fails the re-check is downgraded to an error status
/// carrying the first violation.
pub fn solve(backend: &dyn Backend, model: &Model, limits: &SolveLimits) -> SolveResult {
    let start = Instant::now();
    if let Err(e) = model.validate() {
        let mut r = SolveResult::without_solution(SolveStatus::Error(format!("malformed model: {e}")));
        r.wall_time = start.elapsed();
        return r;
    }
    let mut result = backend.solve_raw(model, limits);
    if result.has_solution() {
        if result.values.len() != model.num_vars() {
            result = SolveResult::without_solution(SolveStatus::Error(format!(
                "{} returned {} values for {} variables",
                backend.name(),
                result.values.len(),
                model.num_vars()
            )));
        } else {
            for (spec, x) in model.vars().iter().zip(result.values.iter_mut()) {
                if spec.domain == VarDomain::Binary && (*x - x.round()).abs() <= INTEGRALITY_TOL {
                    *x = x.round();
                }
            }
            let violations = check::check_solution(model, &result.values, FEASIBILITY_TOL);
            if let Some(v) = violations.first() {
                result = SolveResult::without_solution(SolveStatus::Error(format!(
                    "{} solution failed re-check: {v}",
                    backend.name()
                )));
            } else {
                result.objective = model.objective().evaluate(&result.values);
            }
        }
    }
    result.wall_time = start.elapsed();
    result
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    Highs,
    Microlp,
}

impl BackendKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "highs" => Some(Self::Highs),
            "microlp" => Some(Self::Microlp),
            _ => None,
        }
    }

    /// Reads [`BACKEND_ENV`]; unset means the default backend.
    pub fn from_env() -> Result<Self, String> {
        match std::env::var(BACKEND_ENV) {
            Ok(v) => Self::parse(&v).ok_or_else(|| format!("unknown {BACKEND_ENV} value `{v}`")),
            Err(_) => Ok(Self::default()),
        }
    }

    pub fn create(self) -> Result<Box<dyn Backend>, String> {
        match self {
            #[cfg(feature = "highs")]
            Self::Highs => Ok(Box::new(HighsBackend::default())),
            #[cfg(not(feature = "highs"))]
            Self::Highs => Err("built without the `highs` feature".to_string()),
            Self::Microlp => Ok(Box::new(MicrolpBackend)),
        }
    }
}

impl Default for BackendKind {
    fn default() -> Self {
        if cfg!(feature = "highs") {
            Self::Highs
        } else {
            Self::Microlp
        }
    }
}

/// The backend selected by [`BACKEND_ENV`], falling back to the default.
pub fn backend_from_env() -> Result<Box<dyn Backend>, String> {
    BackendKind::from_env()?.create()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn backends() -> Vec<Box<dyn Backend>> {
        let mut v: Vec<Box<dyn Backend>> = vec![Box::new(ExhaustiveBackend::default()), Box::new(MicrolpBackend)];
        #[cfg(feature = "highs")]
        v.push(Box::new(HighsBackend::default()));
        v
    }

    #[test]
    fn unconstrained_binary_max() {
        for b in backends() {
            let mut m = Model::new(Sense::Maximize, 2.0);
            let x = m.add_binary("x");
            m.set_objective(x.into());
            let r = solve(b.as_ref(), &m, &SolveLimits::default());
            assert_eq!(r.status, SolveStatus::Optimal, "{}", b.name());
            assert_eq!(r.value(x), 1.0);
            assert_eq!(r.objective, 1.0);
        }
    }

    #[test]
    fn covering_min() {
        for b in backends() {
            let mut m = Model::new(Sense::Minimize, 2.0);
            let x = m.add_binary("x");
            let y = m.add_binary("y");
            m.add_constraint("cover", LinExpr::sum([x, y]), Relation::Ge, 1.0);
            m.set_objective(LinExpr::sum([x, y]));
            let r = solve(b.as_ref(), &m, &SolveLimits::default());
            assert_eq!(r.status, SolveStatus::Optimal, "{}", b.name());
            assert_eq!(r.objective, 1.0);
        }
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        for b in backends() {
            let mut m = Model::new(Sense::Minimize, 2.0);
            let x = m.add_binary("x");
            let y = m.add_binary("y");
            m.add_constraint("le", LinExpr::sum([x, y]), Relation::Le, 0.0);
            m.add_constraint("ge", LinExpr::sum([x, y]), Relation::Ge, 1.0);
            let r = solve(b.as_ref(), &m, &SolveLimits::default());
            assert_eq!(r.status, SolveStatus::Infeasible, "{}", b.name());
        }
    }

    #[test]
    fn undeclared_variable_is_an_error() {
        let mut m = Model::new(Sense::Minimize, 2.0);
        m.add_binary("x");
        m.add_constraint("bad", LinExpr::new().with(VarId(7), 1.0), Relation::Le, 1.0);
        let r = solve(&ExhaustiveBackend::default(), &m, &SolveLimits::default());
        assert!(matches!(r.status, SolveStatus::Error(_)));
    }

    #[test]
    fn objective_constant_is_reported() {
        for b in backends() {
            let mut m = Model::new(Sense::Minimize, 2.0);
            let x = m.add_binary("x");
            m.add_constraint("one", x.into(), Relation::Eq, 1.0);
            m.set_objective(LinExpr::constant(2.5).with(x, 0.5));
            let r = solve(b.as_ref(), &m, &SolveLimits::default());
            assert_eq!(r.objective, 3.0, "{}", b.name());
        }
    }

    #[test]
    fn duplicate_terms_are_merged() {
        let e = LinExpr::new()
            .with(VarId(1), 1.0)
            .with(VarId(0), 2.0)
            .with(VarId(1), -1.0);
        assert_eq!(e.normalized().terms, vec![(VarId(0), 2.0)]);
    }

    #[test]
    fn mixed_continuous_model() {
        // min F_max - F_min with F_max >= rho_i, F_min <= rho_i, and one binary choice.
        let mut v: Vec<Box<dyn Backend>> = vec![Box::new(MicrolpBackend)];
        #[cfg(feature = "highs")]
        v.push(Box::new(HighsBackend::default()));
        for b in v {
            let mut m = Model::new(Sense::Minimize, 10.0);
            let pick = m.add_binary("pick");
            let fmax = m.add_continuous("fmax", 0.0, 10.0);
            let fmin = m.add_continuous("fmin", 0.0, 10.0);
            // rho_a = 1 + 0.5 pick, rho_b = 1.2
            m.add_constraint(
                "max_a",
                LinExpr::new().with(fmax, 1.0).with(pick, -0.5),
                Relation::Ge,
                1.0,
            );
            m.add_constraint(
                "min_a",
                LinExpr::new().with(fmin, 1.0).with(pick, -0.5),
                Relation::Le,
                1.0,
            );
            m.add_constraint("max_b", fmax.into(), Relation::Ge, 1.2);
            m.add_constraint("min_b", fmin.into(), Relation::Le, 1.2);
            m.set_objective(LinExpr::new().with(fmax, 1.0).with(fmin, -1.0));
            let r = solve(b.as_ref(), &m, &SolveLimits::default());
            assert_eq!(r.status, SolveStatus::Optimal);
            assert_eq!(r.value(pick), 0.0, "{}", b.name());
            assert!((r.objective - 0.2).abs() < 1e-9);
        }
    }
}
