//! The visual-program language: straight-line `TARGET=OP(args)` statements
//! with a small boolean expression sub-language used by `EVAL`.
//!
//! ```text
//! ANSWER0=VQA(image=LEFT,question='Is there anyone in the bedroom?')
//! ANSWER1=VQA(image=RIGHT,question='Is there anyone in the bedroom?')
//! ANSWER2=EVAL(ANSWER0 == False and ANSWER1 == True)
//! FINAL_ANSWER=RESULT(var=ANSWER2)
//! ```

mod lexer;
mod parser;
mod render;

use thiserror::Error;

pub use parser::{parse_expr, parse_program};
pub use render::{render_expr, render_program, render_stmt};

/// EBNF of the program language, embedded in the code-generation prompt.
pub const GRAMMAR_EBNF: &str = include_str!("../../docs/grammar.ebnf");

/// Variables bound before the first statement runs.
pub const SEED_BINDINGS: [&str; 2] = ["LEFT", "RIGHT"];

pub const OP_VQA: &str = "VQA";
pub const OP_EVAL: &str = "EVAL";
pub const OP_RESULT: &str = "RESULT";

pub(crate) const KEYWORDS: [&str; 5] = ["True", "False", "and", "or", "not"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub statements: Vec<Stmt>,
}

impl Program {
    pub fn result(&self) -> &Stmt {
        self.statements.last().expect("programs are nonempty")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub target: String,
    pub op: String,
    pub args: Args,
}

impl Stmt {
    pub fn named_arg(&self, name: &str) -> Option<&Arg> {
        match &self.args {
            Args::Named(args) => args.iter().find(|a| a.name == name).map(|a| &a.value),
            Args::Expr(_) => None,
        }
    }

    /// Variables this statement reads, in source order.
    pub fn referenced_vars(&self) -> Vec<&str> {
        let mut out = Vec::new();
        match &self.args {
            Args::Named(args) => {
                for a in args {
                    if let Arg::Var(v) = &a.value {
                        out.push(v.as_str());
                    }
                }
            }
            Args::Expr(e) => e.collect_vars(&mut out),
        }
        out
    }
}

/// Argument list: `name=value` pairs, or the single positional expression of `EVAL`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Args {
    Named(Vec<NamedArg>),
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamedArg {
    pub name: String,
    pub value: Arg,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Arg {
    Str(String),
    Var(String),
    Bool(bool),
    Int(i64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "and",
            BinOp::Or => "or",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Bool(bool),
    Int(i64),
    Str(String),
    Var(String),
    Not(Box<Expr>),
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
}

impl Expr {
    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn and(lhs: Expr, rhs: Expr) -> Self {
        Self::binary(BinOp::And, lhs, rhs)
    }

    pub fn or(lhs: Expr, rhs: Expr) -> Self {
        Self::binary(BinOp::Or, lhs, rhs)
    }

    pub fn eq(lhs: Expr, rhs: Expr) -> Self {
        Self::binary(BinOp::Eq, lhs, rhs)
    }

    pub fn ne(lhs: Expr, rhs: Expr) -> Self {
        Self::binary(BinOp::Ne, lhs, rhs)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(inner: Expr) -> Self {
        Expr::Not(Box::new(inner))
    }

    pub fn var(name: &str) -> Self {
        Expr::Var(name.to_owned())
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Var(v) => out.push(v),
            Expr::Not(inner) => inner.collect_vars(out),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.collect_vars(out);
                rhs.collect_vars(out);
            }
            Expr::Bool(_) | Expr::Int(_) | Expr::Str(_) => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: the final statement must be RESULT")]
    MissingResult { line: usize },
    #[error("line {line}: variable `{var}` is assigned more than once")]
    Reassignment { var: String, line: usize },
    #[error("line {line}: variable `{var}` is used before it is assigned")]
    UseBeforeAssign { var: String, line: usize },
}

impl ParseError {
    pub fn line(&self) -> usize {
        match self {
            ParseError::Syntax { line, .. }
            | ParseError::MissingResult { line }
            | ParseError::Reassignment { line, .. }
            | ParseError::UseBeforeAssign { line, .. } => *line,
        }
    }

    pub(crate) fn syntax(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }
}
