use highs::{HighsModelStatus, HighsSolutionStatus, RowProblem};

use super::{Backend, Model, Relation, Sense, SolveLimits, SolveResult, SolveStatus, VarDomain};

/// HiGHS branch-and-cut, the exact backend used for campaigns.
#[derive(Clone, Copy, Debug, Default)]
pub struct HighsBackend {
    /// Forward solver log to stdout.
    pub verbose: bool,
}

impl Backend for HighsBackend {
    fn name(&self) -> &'static str {
        "highs"
    }

    fn solve_raw(&self, model: &Model, limits: &SolveLimits) -> SolveResult {
        if model.num_vars() == 0 {
            // HiGHS reports an empty model rather than solving it.
            let feasible = model.constraints().iter().all(|c| c.violation(&[]) <= 1e-9);
            return if feasible {
                SolveResult {
                    status: SolveStatus::Optimal,
                    values: Vec::new(),
                    objective: model.objective().constant,
                    wall_time: Default::default(),
                }
            } else {
                SolveResult::without_solution(SolveStatus::Infeasible)
            };
        }
        let mut obj = vec![0.0; model.num_vars()];
        for &(v, c) in &model.objective().terms {
            obj[v.index()] += c;
        }
        let mut pb = RowProblem::default();
        let cols: Vec<_> = model
            .vars()
            .iter()
            .zip(obj)
            .map(|(spec, c)| match spec.domain {
                VarDomain::Binary => pb.add_integer_column(c, 0.0..=1.0),
                VarDomain::Continuous { lower, upper } => pb.add_column(c, lower..=upper),
            })
            .collect();
        for c in model.constraints() {
            let row: Vec<_> = c.expr.terms.iter().map(|&(v, a)| (cols[v.index()], a)).collect();
            let rhs = c.rhs - c.expr.constant;
            match c.relation {
                Relation::Le => pb.add_row(..=rhs, row),
                Relation::Ge => pb.add_row(rhs.., row),
                Relation::Eq => pb.add_row(rhs..=rhs, row),
            }
        }
        let sense = match model.sense() {
            Sense::Minimize => highs::Sense::Minimise,
            Sense::Maximize => highs::Sense::Maximise,
        };
        let mut hm = match pb.try_optimise(sense) {
            Ok(m) => m,
            Err(e) => return SolveResult::without_solution(SolveStatus::Error(format!("highs load: {e:?}"))),
        };
        if !self.verbose {
            hm.make_quiet();
        }
        hm.set_option("mip_rel_gap", limits.mip_gap);
        if limits.mip_gap == 0.0 {
            hm.set_option("mip_abs_gap", 1e-9);
        }
        if let Some(t) = limits.time_limit {
            hm.set_option("time_limit", t);
        }
        let solved = match hm.try_solve() {
            Ok(s) => s,
            Err(e) => return SolveResult::without_solution(SolveStatus::Error(format!("highs run: {e:?}"))),
        };
        let has_point = solved.primal_solution_status() == HighsSolutionStatus::Feasible;
        let status = match solved.status() {
            HighsModelStatus::Optimal => SolveStatus::Optimal,
            HighsModelStatus::Infeasible | HighsModelStatus::UnboundedOrInfeasible => SolveStatus::Infeasible,
            HighsModelStatus::ReachedTimeLimit
            | HighsModelStatus::ReachedIterationLimit
            | HighsModelStatus::ObjectiveBound
            | HighsModelStatus::ObjectiveTarget => {
                if has_point {
                    SolveStatus::TimeLimitFeasible
                } else {
                    SolveStatus::NoSolution
                }
            }
            other => SolveStatus::Error(format!("highs status {other:?}")),
        };
        if matches!(status, SolveStatus::Optimal | SolveStatus::TimeLimitFeasible) && has_point {
            let values = solved.get_solution().columns().to_vec();
            SolveResult {
                status,
                objective: model.objective().evaluate(&values),
                values,
                wall_time: Default::default(),
            }
        } else if status == SolveStatus::Optimal {
            SolveResult::without_solution(SolveStatus::Error("highs optimal without primal point".into()))
        } else {
            SolveResult::without_solution(status)
        }
    }
}
