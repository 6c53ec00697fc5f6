use std::time::Duration;

use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOptions};

use super::{Backend, Model, Relation, Sense, SolveLimits, SolveResult, SolveStatus, VarDomain};

/// Pure-Rust backend; slower than HiGHS but builds for any target.
#[derive(Clone, Copy, Debug, Default)]
pub struct MicrolpBackend;

impl Backend for MicrolpBackend {
    fn name(&self) -> &'static str {
        "microlp"
    }

    fn solve_raw(&self, model: &Model, limits: &SolveLimits) -> SolveResult {
        let direction = match model.sense() {
            Sense::Minimize => OptimizationDirection::Minimize,
            Sense::Maximize => OptimizationDirection::Maximize,
        };
        let mut obj = vec![0.0; model.num_vars()];
        for &(v, c) in &model.objective().terms {
            obj[v.index()] += c;
        }
        let mut problem = Problem::new(direction);
        let vars: Vec<_> = model
            .vars()
            .iter()
            .zip(obj)
            .map(|(spec, c)| match spec.domain {
                VarDomain::Binary => problem.add_binary_var(c),
                VarDomain::Continuous { lower, upper } => problem.add_var(c, (lower, upper)),
            })
            .collect();
        for c in model.constraints() {
            let op = match c.relation {
                Relation::Le => ComparisonOp::Le,
                Relation::Eq => ComparisonOp::Eq,
                Relation::Ge => ComparisonOp::Ge,
            };
            let expr: Vec<_> = c.expr.terms.iter().map(|&(v, a)| (vars[v.index()], a)).collect();
            problem.add_constraint(expr.as_slice(), op, c.rhs - c.expr.constant);
        }
        let mut options = SolveOptions::default();
        options.mip_gap = limits.mip_gap;
        options.time_limit = limits.time_limit.map(Duration::from_secs_f64);
        match problem.solve_with(options) {
            Ok(outcome) => match outcome.solution() {
                Some(sol) => {
                    let values: Vec<f64> = vars.iter().map(|&v| sol.var_value(v)).collect();
                    let status = if outcome.is_optimal() {
                        SolveStatus::Optimal
                    } else {
                        SolveStatus::TimeLimitFeasible
                    };
                    SolveResult {
                        status,
                        objective: model.objective().evaluate(&values),
                        values,
                        wall_time: Duration::ZERO,
                    }
                }
                None => SolveResult::without_solution(SolveStatus::NoSolution),
            },
            Err(microlp::Error::Infeasible) => SolveResult::without_solution(SolveStatus::Infeasible),
            Err(e) => SolveResult::without_solution(SolveStatus::Error(format!("microlp: {e}"))),
        }
    }
}
