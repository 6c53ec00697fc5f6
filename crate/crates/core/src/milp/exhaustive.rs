//! Depth-first enumeration over binary assignments with row-activity pruning.
//! Intended for tiny pure-binary models only.

use super::{Backend, Model, Relation, Sense, SolveLimits, SolveResult, SolveStatus, VarDomain, FEASIBILITY_TOL};

#[derive(Clone, Copy, Debug)]
pub struct ExhaustiveBackend {
    pub max_binaries: usize,
}

impl Default for ExhaustiveBackend {
    fn default() -> Self {
        Self { max_binaries: 30 }
    }
}

struct Row {
    coefs: Vec<f64>,
    relation: Relation,
    rhs: f64,
}

struct Search<'a> {
    rows: &'a [Row],
    obj: Vec<f64>,
    n: usize,
    current: Vec<f64>,
    best: Option<(f64, Vec<f64>)>,
}

impl Search<'_> {
    fn row_range(&self, row: &Row, depth: usize) -> (f64, f64) {
        let fixed: f64 = row.coefs[..depth]
            .iter()
            .zip(&self.current[..depth])
            .map(|(c, x)| c * x)
            .sum();
        let (lo, hi) = row.coefs[depth..].iter().fold(
            (0.0, 0.0),
            |(lo, hi), &c| {
                if c < 0.0 {
                    (lo + c, hi)
                } else {
                    (lo, hi + c)
                }
            },
        );
        (fixed + lo, fixed + hi)
    }

    fn can_satisfy(&self, depth: usize) -> bool {
        self.rows.iter().all(|row| {
            let (lo, hi) = self.row_range(row, depth);
            match row.relation {
                Relation::Le => lo <= row.rhs + FEASIBILITY_TOL,
                Relation::Ge => hi >= row.rhs - FEASIBILITY_TOL,
                Relation::Eq => lo <= row.rhs + FEASIBILITY_TOL && hi >= row.rhs - FEASIBILITY_TOL,
            }
        })
    }

    // Objective is always minimized here; maximization is negated by the caller.
    fn bound(&self, depth: usize) -> f64 {
        let fixed: f64 = self.obj[..depth]
            .iter()
            .zip(&self.current[..depth])
            .map(|(c, x)| c * x)
            .sum();
        fixed + self.obj[depth..].iter().map(|&c| c.min(0.0)).sum::<f64>()
    }

    fn run(&mut self, depth: usize) {
        if !self.can_satisfy(depth) {
            return;
        }
        if let Some((best, _)) = &self.best {
            if self.bound(depth) >= *best - 1e-12 {
                return;
            }
        }
        if depth == self.n {
            let value = self.bound(depth);
            self.best = Some((value, self.current.clone()));
            return;
        }
        for x in [0.0, 1.0] {
            self.current[depth] = x;
            self.run(depth + 1);
        }
        self.current[depth] = 0.0;
    }
}

impl Backend for ExhaustiveBackend {
    fn name(&self) -> &'static str {
        "exhaustive"
    }

    fn solve_raw(&self, model: &Model, _limits: &SolveLimits) -> SolveResult {
        if model.vars().iter().any(|v| v.domain != VarDomain::Binary) {
            return SolveResult::without_solution(SolveStatus::Error(
                "exhaustive backend supports binary variables only".into(),
            ));
        }
        let n = model.num_vars();
        if n > self.max_binaries {
            return SolveResult::without_solution(SolveStatus::Error(format!(
                "{n} binaries exceed the exhaustive limit of {}",
                self.max_binaries
            )));
        }
        let rows: Vec<Row> = model
            .constraints()
            .iter()
            .map(|c| {
                let mut coefs = vec![0.0; n];
                for &(v, a) in &c.expr.terms {
                    coefs[v.index()] += a;
                }
                Row {
                    coefs,
                    relation: c.relation,
                    rhs: c.rhs - c.expr.constant,
                }
            })
            .collect();
        let sign = match model.sense() {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut obj = vec![0.0; n];
        for &(v, a) in &model.objective().terms {
            obj[v.index()] += sign * a;
        }
        let mut search = Search {
            rows: &rows,
            obj,
            n,
            current: vec![0.0; n],
            best: None,
        };
        search.run(0);
        match search.best {
            Some((_, values)) => SolveResult {
                status: SolveStatus::Optimal,
                objective: model.objective().evaluate(&values),
                values,
                wall_time: Default::default(),
            },
            None => SolveResult::without_solution(SolveStatus::Infeasible),
        }
    }
}
