use std::collections::HashSet;

use super::lexer::{lex_line, Spanned, Tok};
use super::{Arg, Args, BinOp, Expr, NamedArg, ParseError, Program, Stmt, KEYWORDS, OP_EVAL, OP_RESULT, SEED_BINDINGS};

/// Parses program text, one statement per non-blank line, and checks the
/// program-level invariants (final RESULT, single assignment, defined-before-use).
pub fn parse_program(source: &str) -> Result<Program, ParseError> {
    let mut statements = Vec::new();
    let mut lines = Vec::new();
    for (idx, raw) in source.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let line = idx + 1;
        statements.push(parse_stmt(raw, line)?);
        lines.push(line);
    }
    if statements.is_empty() {
        return Err(ParseError::syntax(1, 1, "empty program"));
    }

    let last = statements.len() - 1;
    for (i, stmt) in statements.iter().enumerate() {
        if stmt.op == OP_RESULT && i != last {
            return Err(ParseError::syntax(lines[i], 1, "RESULT must be the final statement"));
        }
    }
    if statements[last].op != OP_RESULT {
        return Err(ParseError::MissingResult { line: lines[last] });
    }

    let mut defined: HashSet<&str> = SEED_BINDINGS.iter().copied().collect();
    for (stmt, &line) in statements.iter().zip(&lines) {
        if let Some(var) = stmt.referenced_vars().into_iter().find(|v| !defined.contains(v)) {
            return Err(ParseError::UseBeforeAssign {
                var: var.to_owned(),
                line,
            });
        }
        if !defined.insert(stmt.target.as_str()) {
            return Err(ParseError::Reassignment {
                var: stmt.target.clone(),
                line,
            });
        }
    }

    Ok(Program { statements })
}

/// Parses a standalone boolean expression.
pub fn parse_expr(source: &str) -> Result<Expr, ParseError> {
    if source.contains('\n') {
        let col = source.chars().position(|c| c == '\n').unwrap_or(0) + 1;
        return Err(ParseError::syntax(1, col, "expressions span a single line"));
    }
    let toks = lex_line(source, 1)?;
    let mut p = Parser::new(&toks, 1, source.chars().count());
    if toks.is_empty() {
        return Err(ParseError::syntax(1, 1, "empty expression"));
    }
    let expr = p.expr()?;
    p.expect_end()?;
    Ok(expr)
}

fn parse_stmt(src: &str, line: usize) -> Result<Stmt, ParseError> {
    let toks = lex_line(src, line)?;
    let mut p = Parser::new(&toks, line, src.chars().count());
    let target = p.identifier("assignment target")?;
    p.expect(&Tok::Assign)?;
    let op = p.identifier("operation name")?;
    p.expect(&Tok::LParen)?;
    let args = if op == OP_EVAL {
        if p.peek() == Some(&Tok::RParen) {
            return Err(p.error_here("EVAL takes one expression"));
        }
        Args::Expr(p.expr()?)
    } else {
        Args::Named(p.named_args()?)
    };
    p.expect(&Tok::RParen)?;
    p.expect_end()?;
    Ok(Stmt { target, op, args })
}

struct Parser<'a> {
    toks: &'a [Spanned],
    pos: usize,
    line: usize,
    end_column: usize,
}

impl<'a> Parser<'a> {
    fn new(toks: &'a [Spanned], line: usize, line_len: usize) -> Self {
        Self {
            toks,
            pos: 0,
            line,
            end_column: line_len + 1,
        }
    }

    fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn column(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_column, |s| s.column)
    }

    fn error_here(&self, message: impl Into<String>) -> ParseError {
        ParseError::syntax(self.line, self.column(), message)
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        match self.peek() {
            Some(tok) => self.error_here(format!("expected {wanted}, found {}", tok.describe())),
            None => self.error_here(format!("expected {wanted}, found end of line")),
        }
    }

    fn bump(&mut self) -> Option<&'a Tok> {
        let tok = self.peek();
        if tok.is_some() {
            self.pos += 1;
        }
        tok
    }

    fn expect(&mut self, tok: &Tok) -> Result<(), ParseError> {
        if self.peek() == Some(tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.unexpected(&tok.describe()))
        }
    }

    fn expect_end(&self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(tok) => Err(self.error_here(format!("unexpected {}", tok.describe()))),
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Ident(s)) if s == kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    /// A non-keyword identifier.
    fn identifier(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) if KEYWORDS.contains(&s.as_str()) => {
                Err(self.error_here(format!("`{s}` is reserved and cannot be used as {what}")))
            }
            Some(Tok::Ident(s)) => {
                self.pos += 1;
                Ok(s.clone())
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn named_args(&mut self) -> Result<Vec<NamedArg>, ParseError> {
        let mut args: Vec<NamedArg> = Vec::new();
        if self.peek() == Some(&Tok::RParen) {
            return Ok(args);
        }
        loop {
            let column = self.column();
            let name = self.identifier("argument name")?;
            if args.iter().any(|a| a.name == name) {
                return Err(ParseError::syntax(
                    self.line,
                    column,
                    format!("duplicate argument `{name}`"),
                ));
            }
            self.expect(&Tok::Assign)?;
            let value = self.arg_value()?;
            args.push(NamedArg { name, value });
            if self.peek() == Some(&Tok::Comma) {
                self.pos += 1;
            } else {
                return Ok(args);
            }
        }
    }

    fn arg_value(&mut self) -> Result<Arg, ParseError> {
        let value = match self.peek() {
            Some(Tok::Str(s)) => Arg::Str(s.clone()),
            Some(Tok::Int(n)) => Arg::Int(*n),
            Some(Tok::Ident(s)) if s == "True" => Arg::Bool(true),
            Some(Tok::Ident(s)) if s == "False" => Arg::Bool(false),
            Some(Tok::Ident(_)) => return self.identifier("argument value").map(Arg::Var),
            _ => return Err(self.unexpected("argument value")),
        };
        self.pos += 1;
        Ok(value)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.disjunction()
    }

    fn disjunction(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.conjunction()?;
        while self.eat_keyword("or") {
            let rhs = self.conjunction()?;
            lhs = Expr::binary(BinOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.negation()?;
        while self.eat_keyword("and") {
            let rhs = self.negation()?;
            lhs = Expr::binary(BinOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn negation(&mut self) -> Result<Expr, ParseError> {
        if self.eat_keyword("not") {
            Ok(Expr::not(self.negation()?))
        } else {
            self.comparison()
        }
    }

    fn comparison(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.atom()?;
        let op = match self.peek() {
            Some(Tok::EqEq) => BinOp::Eq,
            Some(Tok::NotEq) => BinOp::Ne,
            _ => return Ok(lhs),
        };
        self.pos += 1;
        let rhs = self.atom()?;
        if matches!(self.peek(), Some(Tok::EqEq | Tok::NotEq)) {
            return Err(self.error_here("chained comparisons need parentheses"));
        }
        Ok(Expr::binary(op, lhs, rhs))
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(&Tok::RParen)?;
                Ok(inner)
            }
            Some(Tok::Ident(s)) if s == "True" => {
                self.bump();
                Ok(Expr::Bool(true))
            }
            Some(Tok::Ident(s)) if s == "False" => {
                self.bump();
                Ok(Expr::Bool(false))
            }
            Some(Tok::Ident(_)) => self.identifier("operand").map(Expr::Var),
            Some(Tok::Int(n)) => {
                self.bump();
                Ok(Expr::Int(*n))
            }
            Some(Tok::Str(s)) => {
                self.bump();
                Ok(Expr::Str(s.clone()))
            }
            _ => Err(self.unexpected("operand")),
        }
    }
}
