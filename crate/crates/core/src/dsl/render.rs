use std::fmt::Write;

use super::ast::*;

pub fn render_adt(adt: &AdtDef) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "adt {} {{", adt.name);
    for (name, value) in &adt.consts {
        let _ = writeln!(out, "  const {name} = {value};");
    }
    out.push_str("  state {\n");
    for f in &adt.fields {
        let ty = match &f.ty {
            FieldType::Int => "int".to_string(),
            FieldType::Array(cap) => format!("int[{}]", render_expr(cap)),
        };
        match &f.init {
            Some(e) => {
                let _ = writeln!(out, "    {}: {ty} = {};", f.name, render_expr(e));
            }
            None => {
                let _ = writeln!(out, "    {}: {ty};", f.name);
            }
        }
    }
    out.push_str("  }\n");
    for m in &adt.methods {
        let params: Vec<String> = m.params.iter().map(|p| format!("{p}: int")).collect();
        let _ = write!(out, "\n  method {}({})", m.name, params.join(", "));
        if m.returns > 0 {
            let _ = write!(out, " -> {}", vec!["int"; m.returns].join(", "));
        }
        if let Some(req) = &m.requires {
            let _ = write!(out, " requires {}", render_expr(req));
        }
        out.push(' ');
        block(&mut out, &m.body, 1);
        out.push('\n');
    }
    out.push_str("}\n");
    out
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn block(out: &mut String, stmts: &[Stmt], depth: usize) {
    out.push_str("{\n");
    for s in stmts {
        stmt(out, s, depth + 1);
    }
    indent(out, depth);
    out.push('}');
}

fn stmt(out: &mut String, s: &Stmt, depth: usize) {
    indent(out, depth);
    match s {
        Stmt::Assign(LValue::Var(n), e) => {
            let _ = writeln!(out, "{n} := {};", render_expr(e));
        }
        Stmt::Assign(LValue::Elem(n, i), e) => {
            let _ = writeln!(out, "{n}[{}] := {};", render_expr(i), render_expr(e));
        }
        Stmt::If { cond, then_branch, else_branch } => {
            let _ = write!(out, "if ({}) ", render_expr(cond));
            block(out, then_branch, depth);
            if !else_branch.is_empty() {
                out.push_str(" else ");
                block(out, else_branch, depth);
            }
            out.push('\n');
        }
        Stmt::While { cond, body } => {
            let _ = write!(out, "while ({}) ", render_expr(cond));
            block(out, body, depth);
            out.push('\n');
        }
        Stmt::Return(values) => {
            if values.is_empty() {
                out.push_str("return;\n");
            } else {
                let vs: Vec<String> = values.iter().map(render_expr).collect();
                let _ = writeln!(out, "return {};", vs.join(", "));
            }
        }
    }
}

/// Renders an expression with the fewest parentheses that reparse to
/// the same tree.
pub fn render_expr(e: &Expr) -> String {
    match e {
        Expr::Int(v) => v.to_string(),
        Expr::Bool(b) => b.to_string(),
        Expr::Name(n) => n.clone(),
        Expr::Qualified { scope, name } => format!("{scope}.{name}"),
        Expr::Index { target, index } => format!("{}[{}]", render_expr(target), render_expr(index)),
        Expr::Unary(op, inner) => {
            let sym = match op {
                UnOp::Neg => "-",
                UnOp::Not => "!",
            };
            match **inner {
                Expr::Binary(..) | Expr::Forall { .. } => format!("{sym}({})", render_expr(inner)),
                Expr::Int(v) if v < 0 => format!("{sym}({})", render_expr(inner)),
                _ => format!("{sym}{}", render_expr(inner)),
            }
        }
        Expr::Binary(op, a, b) => {
            let prec = op.precedence();
            let left = child(a, |p| p < prec || (op.is_comparison() && p == prec));
            let right = child(b, |p| p <= prec);
            format!("{left} {} {right}", op.symbol())
        }
        Expr::Forall { var, lo, hi, body } => {
            format!("forall {var} in {}..{} : {}", render_expr(lo), render_expr(hi), render_expr(body))
        }
    }
}

fn child(e: &Expr, needs_parens: impl Fn(u8) -> bool) -> String {
    match e {
        Expr::Binary(op, ..) if needs_parens(op.precedence()) => format!("({})", render_expr(e)),
        Expr::Forall { .. } => format!("({})", render_expr(e)),
        Expr::Int(v) if *v < 0 => format!("({v})"),
        _ => render_expr(e),
    }
}
