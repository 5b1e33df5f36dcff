use super::{Arg, Args, BinOp, Expr, Program, Stmt};

/// Canonical text: one statement per line, `name=value` args separated by
/// bare commas, minimal parentheses in expressions.
pub fn render_program(p: &Program) -> String {
    p.statements.iter().map(render_stmt).collect::<Vec<_>>().join("\n")
}

pub fn render_stmt(s: &Stmt) -> String {
    let args = match &s.args {
        Args::Named(named) => named
            .iter()
            .map(|a| format!("{}={}", a.name, render_arg(&a.value)))
            .collect::<Vec<_>>()
            .join(","),
        Args::Expr(e) => render_expr(e),
    };
    format!("{}={}({})", s.target, s.op, args)
}

fn render_arg(a: &Arg) -> String {
    match a {
        Arg::Str(s) => format!("'{s}'"),
        Arg::Var(v) => v.clone(),
        Arg::Bool(b) => bool_literal(*b).to_owned(),
        Arg::Int(n) => n.to_string(),
    }
}

fn bool_literal(b: bool) -> &'static str {
    if b {
        "True"
    } else {
        "False"
    }
}

// Binding strength, loosest first.
const OR: u8 = 1;
const AND: u8 = 2;
const NOT: u8 = 3;
const CMP: u8 = 4;
const ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Binary { op: BinOp::Or, .. } => OR,
        Expr::Binary { op: BinOp::And, .. } => AND,
        Expr::Not(_) => NOT,
        Expr::Binary { .. } => CMP,
        _ => ATOM,
    }
}

pub fn render_expr(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(e, &mut out);
    out
}

fn write_expr(e: &Expr, out: &mut String) {
    match e {
        Expr::Bool(b) => out.push_str(bool_literal(*b)),
        Expr::Int(n) => out.push_str(&n.to_string()),
        Expr::Str(s) => {
            out.push('\'');
            out.push_str(s);
            out.push('\'');
        }
        Expr::Var(v) => out.push_str(v),
        Expr::Not(inner) => {
            out.push_str("not ");
            write_operand(inner, NOT, out);
        }
        Expr::Binary { op, lhs, rhs } => {
            let own = precedence(e);
            // Comparisons do not chain; and/or are left-associative.
            let (left_min, right_min) = if own == CMP { (ATOM, ATOM) } else { (own, own + 1) };
            write_operand(lhs, left_min, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            write_operand(rhs, right_min, out);
        }
    }
}

fn write_operand(e: &Expr, min: u8, out: &mut String) {
    if precedence(e) >= min {
        write_expr(e, out);
    } else {
        out.push('(');
        write_expr(e, out);
        out.push(')');
    }
}
