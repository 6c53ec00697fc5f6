//! CPLEX LP text export for debugging models with external tools.

use std::fmt::Write;

use super::{LinExpr, Model, Relation, Sense, VarDomain};

fn sanitize(name: &str) -> String {
    let mut s: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() || s.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        s.insert(0, 'v');
    }
    s
}

fn write_expr(out: &mut String, model: &Model, expr: &LinExpr) {
    if expr.terms.is_empty() {
        out.push_str(" 0 ");
        out.push_str(&sanitize(
            &model.vars().first().map_or("zero".into(), |v| v.name.clone()),
        ));
        return;
    }
    for (i, &(v, c)) in expr.terms.iter().enumerate() {
        let sign = if c < 0.0 { '-' } else { '+' };
        if i == 0 && sign == '+' {
            write!(out, " {} {}", c.abs(), sanitize(&model.var(v).name)).unwrap();
        } else {
            write!(out, " {sign} {} {}", c.abs(), sanitize(&model.var(v).name)).unwrap();
        }
    }
}

/// Renders `model` in LP format. Variable names are sanitized to the LP
/// character set; uniqueness of the originals is assumed.
pub fn to_lp_string(model: &Model) -> String {
    let mut out = String::new();
    writeln!(out, "\\ big-M = {}", model.big_m()).unwrap();
    if model.objective().constant != 0.0 {
        writeln!(out, "\\ objective constant = {}", model.objective().constant).unwrap();
    }
    out.push_str(match model.sense() {
        Sense::Minimize => "Minimize\n",
        Sense::Maximize => "Maximize\n",
    });
    out.push_str(" obj:");
    write_expr(&mut out, model, model.objective());
    out.push_str("\nSubject To\n");
    for (i, c) in model.constraints().iter().enumerate() {
        write!(out, " c{}_{}:", i, sanitize(&c.name)).unwrap();
        write_expr(&mut out, model, &c.expr);
        let op = match c.relation {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        };
        writeln!(out, " {op} {}", c.rhs - c.expr.constant).unwrap();
    }
    out.push_str("Bounds\n");
    for v in model.vars() {
        if let VarDomain::Continuous { lower, upper } = v.domain {
            writeln!(out, " {lower} <= {} <= {upper}", sanitize(&v.name)).unwrap();
        }
    }
    out.push_str("Binary\n");
    for v in model.vars().iter().filter(|v| v.domain == VarDomain::Binary) {
        writeln!(out, " {}", sanitize(&v.name)).unwrap();
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_sections() {
        let mut m = Model::new(Sense::Minimize, 3.0);
        let x = m.add_binary("u[f1,r2,t3]");
        let y = m.add_continuous("fmax", 0.0, 4.0);
        m.add_constraint("cap", LinExpr::new().with(x, 1.0).with(y, -2.0), Relation::Le, 1.0);
        m.set_objective(LinExpr::new().with(x, 0.3));
        let s = to_lp_string(&m);
        assert!(s.contains("Minimize\n obj: 0.3 u_f1_r2_t3_"));
        assert!(s.contains("c0_cap: 1 u_f1_r2_t3_ - 2 fmax <= 1"));
        assert!(s.contains("0 <= fmax <= 4"));
        assert!(s.contains("Binary\n u_f1_r2_t3_\nEnd"));
    }
}
