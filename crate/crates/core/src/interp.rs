//! Executes visual programs.
//!
//! Statements run in order against an insert-only [`Environment`] seeded with
//! `LEFT` and `RIGHT`. Operations are dispatched by name through a
//! [`ModuleRegistry`]; the core registry provides `VQA` (a vision backend
//! asked about one image), `EVAL` (local expression evaluation) and `RESULT`.
//! Every executed statement leaves a [`TraceRecord`], including the one that
//! failed.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clients::{ChatBackend, Message};
use crate::dsl::{render_expr, render_stmt, Arg, Args, BinOp, Expr, Program, Stmt, OP_EVAL, OP_RESULT, OP_VQA};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "lowercase")]
pub enum Value {
    Bool(bool),
    Text(String),
    Int(i64),
    Image(String),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Bool(_) => "Bool",
            Value::Text(_) => "Text",
            Value::Int(_) => "Int",
            Value::Image(_) => "Image",
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(true) => f.write_str("True"),
            Value::Bool(false) => f.write_str("False"),
            Value::Text(t) => write!(f, "'{t}'"),
            Value::Int(n) => write!(f, "{n}"),
            Value::Image(r) => write!(f, "<image:{r}>"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("type mismatch: expected {expected}, got {got}")]
    TypeMismatch { expected: String, got: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("empty answer")]
pub struct EmptyAnswer;

/// Normalizes a raw VQA reply: trimmed, lowercased, terminal punctuation removed.
pub fn coerce_vqa_answer(raw: &str) -> Result<Value, EmptyAnswer> {
    let text = raw
        .trim()
        .trim_end_matches(|c: char| c.is_ascii_punctuation() && c != '\'' && c != '"' || c.is_whitespace())
        .trim()
        .to_lowercase();
    if text.is_empty() {
        return Err(EmptyAnswer);
    }
    Ok(match text.as_str() {
        "yes" => Value::Bool(true),
        "no" => Value::Bool(false),
        _ => match text.parse::<i64>() {
            Ok(n) if text.trim_start_matches(['-', '+']).bytes().all(|b| b.is_ascii_digit()) => Value::Int(n),
            _ => Value::Text(text),
        },
    })
}

/// Variable bindings for one execution. Bindings are never overwritten.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Environment {
    bindings: BTreeMap<String, Value>,
}

impl Environment {
    pub fn seeded(left: &str, right: &str) -> Self {
        let mut env = Self::default();
        env.bindings.insert("LEFT".into(), Value::Image(left.to_owned()));
        env.bindings.insert("RIGHT".into(), Value::Image(right.to_owned()));
        env
    }

    pub fn from_bindings<I: IntoIterator<Item = (String, Value)>>(bindings: I) -> Self {
        Self {
            bindings: bindings.into_iter().collect(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.bindings.get(name)
    }

    /// Returns false, leaving the old value, when `name` is already bound.
    pub fn bind(&mut self, name: &str, value: Value) -> bool {
        if self.bindings.contains_key(name) {
            return false;
        }
        self.bindings.insert(name.to_owned(), value);
        true
    }
}

fn expect_bool(v: Value) -> Result<bool, EvalError> {
    match v {
        Value::Bool(b) => Ok(b),
        other => Err(EvalError::TypeMismatch {
            expected: "Bool".into(),
            got: other.type_name().into(),
        }),
    }
}

/// Evaluates an expression. `and`/`or` short-circuit left to right; `==`/`!=`
/// are defined only between values of the same non-image type.
pub fn eval_expr(e: &Expr, env: &Environment) -> Result<Value, EvalError> {
    match e {
        Expr::Bool(b) => Ok(Value::Bool(*b)),
        Expr::Int(n) => Ok(Value::Int(*n)),
        Expr::Str(s) => Ok(Value::Text(s.clone())),
        Expr::Var(v) => env.get(v).cloned().ok_or_else(|| EvalError::UnboundVariable(v.clone())),
        Expr::Not(inner) => Ok(Value::Bool(!expect_bool(eval_expr(inner, env)?)?)),
        Expr::Binary { op, lhs, rhs } => match op {
            BinOp::And => {
                if !expect_bool(eval_expr(lhs, env)?)? {
                    return Ok(Value::Bool(false));
                }
                Ok(Value::Bool(expect_bool(eval_expr(rhs, env)?)?))
            }
            BinOp::Or => {
                if expect_bool(eval_expr(lhs, env)?)? {
                    return Ok(Value::Bool(true));
                }
                Ok(Value::Bool(expect_bool(eval_expr(rhs, env)?)?))
            }
            BinOp::Eq | BinOp::Ne => {
                let l = eval_expr(lhs, env)?;
                let r = eval_expr(rhs, env)?;
                let equal = match (&l, &r) {
                    (Value::Bool(a), Value::Bool(b)) => a == b,
                    (Value::Int(a), Value::Int(b)) => a == b,
                    (Value::Text(a), Value::Text(b)) => a == b,
                    _ => {
                        return Err(EvalError::TypeMismatch {
                            expected: format!("{} operand", l.type_name()),
                            got: r.type_name().into(),
                        })
                    }
                };
                Ok(Value::Bool(if *op == BinOp::Eq { equal } else { !equal }))
            }
        },
    }
}

/// A backend round trip made while executing a statement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub request: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reply: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuleOutput {
    pub value: Value,
    pub exchange: Option<Exchange>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModuleError {
    #[error("missing argument `{0}`")]
    MissingArgument(String),
    #[error("argument `{arg}`: expected {expected}, got {got}")]
    TypeMismatch { arg: String, expected: String, got: String },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("backend failure: {cause}")]
    Backend { cause: String, exchange: Option<Exchange> },
}

/// An operation executor. Implementations must be shareable across threads.
pub trait Module: Send + Sync {
    fn run(&self, stmt: &Stmt, env: &Environment) -> Result<ModuleOutput, ModuleError>;
}

fn resolve(arg: &Arg, env: &Environment) -> Result<Value, EvalError> {
    Ok(match arg {
        Arg::Str(s) => Value::Text(s.clone()),
        Arg::Int(n) => Value::Int(*n),
        Arg::Bool(b) => Value::Bool(*b),
        Arg::Var(v) => env
            .get(v)
            .cloned()
            .ok_or_else(|| EvalError::UnboundVariable(v.clone()))?,
    })
}

fn named(stmt: &Stmt, env: &Environment, name: &str) -> Result<Value, ModuleError> {
    let arg = stmt
        .named_arg(name)
        .ok_or_else(|| ModuleError::MissingArgument(name.to_owned()))?;
    Ok(resolve(arg, env)?)
}

fn mismatch(arg: &str, expected: &str, got: &Value) -> ModuleError {
    ModuleError::TypeMismatch {
        arg: arg.to_owned(),
        expected: expected.to_owned(),
        got: got.type_name().to_owned(),
    }
}

/// `VQA(image=..., question='...')`: one image, one question, one backend call.
pub struct VqaModule {
    backend: Arc<dyn ChatBackend>,
}

impl VqaModule {
    pub fn new(backend: Arc<dyn ChatBackend>) -> Self {
        Self { backend }
    }

    pub fn request(image: &str, question: &str) -> Vec<Message> {
        vec![Message::user_with_images([image], question)]
    }
}

impl Module for VqaModule {
    fn run(&self, stmt: &Stmt, env: &Environment) -> Result<ModuleOutput, ModuleError> {
        let image = match named(stmt, env, "image")? {
            Value::Image(r) => r,
            other => return Err(mismatch("image", "Image", &other)),
        };
        let question = match named(stmt, env, "question")? {
            Value::Text(q) => q,
            other => return Err(mismatch("question", "Text", &other)),
        };
        let messages = Self::request(&image, &question);
        let request = messages.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n");
        let reply = self.backend.chat(&messages).map_err(|e| ModuleError::Backend {
            cause: e.to_string(),
            exchange: Some(Exchange {
                request: request.clone(),
                reply: None,
            }),
        })?;
        let exchange = Exchange {
            request,
            reply: Some(reply.clone()),
        };
        match coerce_vqa_answer(&reply) {
            Ok(value) => Ok(ModuleOutput {
                value,
                exchange: Some(exchange),
            }),
            Err(e) => Err(ModuleError::Backend {
                cause: e.to_string(),
                exchange: Some(exchange),
            }),
        }
    }
}

pub struct EvalModule;

impl Module for EvalModule {
    fn run(&self, stmt: &Stmt, env: &Environment) -> Result<ModuleOutput, ModuleError> {
        match &stmt.args {
            Args::Expr(e) => Ok(ModuleOutput {
                value: eval_expr(e, env)?,
                exchange: None,
            }),
            Args::Named(_) => Err(ModuleError::MissingArgument("expression".into())),
        }
    }
}

/// `RESULT(var=X)` yields the value of `X`.
pub struct ResultModule;

impl Module for ResultModule {
    fn run(&self, stmt: &Stmt, env: &Environment) -> Result<ModuleOutput, ModuleError> {
        match stmt.named_arg("var") {
            Some(Arg::Var(_)) => Ok(ModuleOutput {
                value: named(stmt, env, "var")?,
                exchange: None,
            }),
            Some(other) => Err(ModuleError::TypeMismatch {
                arg: "var".into(),
                expected: "variable".into(),
                got: resolve(other, env)?.type_name().into(),
            }),
            None => Err(ModuleError::MissingArgument("var".into())),
        }
    }
}

#[derive(Clone, Default)]
pub struct ModuleRegistry {
    modules: HashMap<String, Arc<dyn Module>>,
}

impl ModuleRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// VQA bound to `vqa_backend`, plus EVAL and RESULT.
    pub fn core(vqa_backend: Arc<dyn ChatBackend>) -> Self {
        Self::empty()
            .with(OP_VQA, Arc::new(VqaModule::new(vqa_backend)))
            .with(OP_EVAL, Arc::new(EvalModule))
            .with(OP_RESULT, Arc::new(ResultModule))
    }

    pub fn with(mut self, name: &str, module: Arc<dyn Module>) -> Self {
        self.modules.insert(name.to_owned(), module);
        self
    }

    pub fn get(&self, name: &str) -> Option<&Arc<dyn Module>> {
        self.modules.get(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("statement {stmt}: unknown operation `{name}`")]
    UnknownOp { stmt: usize, name: String },
    #[error("statement {stmt}: {detail}: expected {expected}, got {got}")]
    TypeMismatch {
        stmt: usize,
        detail: String,
        expected: String,
        got: String,
    },
    #[error("statement {stmt}: unbound variable `{var}`")]
    UnboundVariable { stmt: usize, var: String },
    #[error("statement {stmt}: missing argument `{name}`")]
    MissingArgument { stmt: usize, name: String },
    #[error("statement {stmt}: backend failure: {cause}")]
    BackendFailure { stmt: usize, cause: String },
    #[error("RESULT must be a Bool, got {got}")]
    NonBooleanResult { got: String },
}

impl ExecError {
    fn from_module(stmt: usize, err: ModuleError) -> Self {
        match err {
            ModuleError::MissingArgument(name) => ExecError::MissingArgument { stmt, name },
            ModuleError::TypeMismatch { arg, expected, got } => ExecError::TypeMismatch {
                stmt,
                detail: format!("argument `{arg}`"),
                expected,
                got,
            },
            ModuleError::Eval(EvalError::UnboundVariable(var)) => ExecError::UnboundVariable { stmt, var },
            ModuleError::Eval(EvalError::TypeMismatch { expected, got }) => ExecError::TypeMismatch {
                stmt,
                detail: "expression".into(),
                expected,
                got,
            },
            ModuleError::Backend { cause, .. } => ExecError::BackendFailure { stmt, cause },
        }
    }
}

/// One executed statement. `stmt` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub stmt: usize,
    pub statement: String,
    pub args: Vec<(String, Value)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exchange: Option<Exchange>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub records: Vec<TraceRecord>,
    pub verdict: Option<bool>,
}

impl ExecutionTrace {
    /// One JSON record per statement.
    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("trace records serialize") + "\n")
            .collect()
    }

    pub fn backend_calls(&self) -> usize {
        self.records.iter().filter(|r| r.exchange.is_some()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{error}")]
pub struct ExecFailure {
    pub error: ExecError,
    pub trace: ExecutionTrace,
}

fn trace_args(stmt: &Stmt, env: &Environment) -> Vec<(String, Value)> {
    match &stmt.args {
        Args::Named(args) => args
            .iter()
            .filter_map(|a| resolve(&a.value, env).ok().map(|v| (a.name.clone(), v)))
            .collect(),
        Args::Expr(e) => vec![("expr".into(), Value::Text(render_expr(e)))],
    }
}

/// Runs `program` on an image pair and returns the RESULT verdict with its trace.
pub fn execute(
    program: &Program,
    left: &str,
    right: &str,
    registry: &ModuleRegistry,
) -> Result<(bool, ExecutionTrace), ExecFailure> {
    let mut env = Environment::seeded(left, right);
    let mut trace = ExecutionTrace::default();
    let mut last_value = None;

    for (idx, stmt) in program.statements.iter().enumerate() {
        let n = idx + 1;
        let mut record = TraceRecord {
            stmt: n,
            statement: render_stmt(stmt),
            args: trace_args(stmt, &env),
            exchange: None,
            value: None,
            error: None,
        };
        let outcome = match registry.get(&stmt.op) {
            None => Err(ExecError::UnknownOp {
                stmt: n,
                name: stmt.op.clone(),
            }),
            Some(module) => module.run(stmt, &env).map_err(|e| {
                if let ModuleError::Backend { exchange, .. } = &e {
                    record.exchange = exchange.clone();
                }
                ExecError::from_module(n, e)
            }),
        };
        match outcome {
            Ok(out) => {
                record.exchange = out.exchange;
                record.value = Some(out.value.clone());
                trace.records.push(record);
                if !env.bind(&stmt.target, out.value.clone()) {
                    // Parsed programs never reassign; hand-built ones may.
                    let error = ExecError::TypeMismatch {
                        stmt: n,
                        detail: format!("assignment to `{}`", stmt.target),
                        expected: "unbound variable".into(),
                        got: "existing binding".into(),
                    };
                    if let Some(r) = trace.records.last_mut() {
                        r.error = Some(error.to_string());
                    }
                    return Err(ExecFailure { error, trace });
                }
                last_value = Some(out.value);
            }
            Err(error) => {
                record.error = Some(error.to_string());
                trace.records.push(record);
                return Err(ExecFailure { error, trace });
            }
        }
    }

    match last_value {
        Some(Value::Bool(verdict)) => {
            trace.verdict = Some(verdict);
            Ok((verdict, trace))
        }
        Some(other) => {
            let error = ExecError::NonBooleanResult {
                got: other.type_name().into(),
            };
            if let Some(r) = trace.records.last_mut() {
                r.error = Some(error.to_string());
            }
            Err(ExecFailure { error, trace })
        }
        None => Err(ExecFailure {
            error: ExecError::NonBooleanResult { got: "nothing".into() },
            trace,
        }),
    }
}
