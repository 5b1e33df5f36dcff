//! Oracles and generators for the program language, shared with the acceptance run.

use mvreason::dsl::{Arg, Args, BinOp, Expr, NamedArg, ParseError, Program, Stmt};
use mvreason::interp::{Environment, Value};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

// ---------------------------------------------------------------------------
// Truth-table oracle: every variable is a bitmask over the 8 assignments of
// A, B, C, so each operator becomes one bitwise operation.

pub const VARS: [&str; 3] = ["A", "B", "C"];
pub const MASKS: [u8; 3] = [0b1111_0000, 0b1100_1100, 0b1010_1010];

pub fn truth_table(e: &Expr) -> u8 {
    match e {
        Expr::Bool(true) => 0xff,
        Expr::Bool(false) => 0x00,
        Expr::Var(v) => MASKS[VARS.iter().position(|n| n == v).unwrap()],
        Expr::Not(inner) => !truth_table(inner),
        Expr::Binary { op, lhs, rhs } => {
            let (l, r) = (truth_table(lhs), truth_table(rhs));
            match op {
                BinOp::And => l & r,
                BinOp::Or => l | r,
                BinOp::Eq => !(l ^ r),
                BinOp::Ne => l ^ r,
            }
        }
        Expr::Int(_) | Expr::Str(_) => unreachable!("boolean expressions only"),
    }
}

/// All Boolean expressions whose depth is at most `depth`, counting a leaf as depth 1.
pub fn expressions(depth: usize) -> Vec<Expr> {
    let mut leaves: Vec<Expr> = VARS.iter().map(|v| Expr::var(v)).collect();
    leaves.extend([Expr::Bool(true), Expr::Bool(false)]);
    let mut all = leaves.clone();
    for _ in 1..depth {
        let below = all.clone();
        let mut next = leaves.clone();
        next.extend(below.iter().cloned().map(Expr::not));
        for op in [BinOp::And, BinOp::Or, BinOp::Eq, BinOp::Ne] {
            for l in &below {
                for r in &below {
                    next.push(Expr::binary(op, l.clone(), r.clone()));
                }
            }
        }
        all = next;
    }
    all
}

pub fn assignment_env(row: usize) -> Environment {
    Environment::from_bindings(
        VARS.iter()
            .zip(MASKS)
            .map(|(v, m)| (v.to_string(), Value::Bool(m & (1 << row) != 0))),
    )
}

// ---------------------------------------------------------------------------
// Program round trip.

pub const STRING_POOL: &[char] = &[
    'a', 'b', 'z', 'Q', ' ', ',', '(', ')', '=', '!', '?', '0', '7', '-', '"', 'é', '漢', '\t',
];

pub fn random_string(rng: &mut StdRng) -> String {
    let len = rng.random_range(0..10);
    (0..len)
        .map(|_| STRING_POOL[rng.random_range(0..STRING_POOL.len())])
        .collect()
}

pub fn random_expr(rng: &mut StdRng, vars: &[String], depth: u32) -> Expr {
    if depth == 0 || rng.random_range(0..3) == 0 {
        return match rng.random_range(0..4) {
            0 => Expr::Bool(rng.random()),
            1 => Expr::Int(rng.random_range(-100..100)),
            2 => Expr::Str(random_string(rng)),
            _ => Expr::Var(vars[rng.random_range(0..vars.len())].clone()),
        };
    }
    match rng.random_range(0..5) {
        0 => Expr::not(random_expr(rng, vars, depth - 1)),
        k => {
            let op = [BinOp::And, BinOp::Or, BinOp::Eq, BinOp::Ne][k - 1];
            Expr::binary(op, random_expr(rng, vars, depth - 1), random_expr(rng, vars, depth - 1))
        }
    }
}

pub fn random_arg(rng: &mut StdRng, vars: &[String]) -> Arg {
    match rng.random_range(0..4) {
        0 => Arg::Str(random_string(rng)),
        1 => Arg::Var(vars[rng.random_range(0..vars.len())].clone()),
        2 => Arg::Bool(rng.random()),
        _ => Arg::Int(rng.random_range(-1000..1000)),
    }
}

pub fn random_name(rng: &mut StdRng, i: usize) -> String {
    const HEADS: [&str; 6] = ["ANSWER", "x", "_tmp", "Count", "v_", "n"];
    format!("{}{i}", HEADS[rng.random_range(0..HEADS.len())])
}

pub fn random_program(seed: u64) -> Program {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut vars: Vec<String> = vec!["LEFT".into(), "RIGHT".into()];
    let mut statements = Vec::new();
    for i in 0..rng.random_range(0..6) {
        let target = random_name(&mut rng, i);
        let stmt = match rng.random_range(0..3) {
            0 => Stmt {
                target: target.clone(),
                op: "VQA".into(),
                args: Args::Named(vec![
                    NamedArg {
                        name: "image".into(),
                        value: Arg::Var(["LEFT", "RIGHT"][rng.random_range(0..2)].into()),
                    },
                    NamedArg {
                        name: "question".into(),
                        value: Arg::Str(random_string(&mut rng)),
                    },
                ]),
            },
            1 => Stmt {
                target: target.clone(),
                op: "EVAL".into(),
                args: Args::Expr(random_expr(&mut rng, &vars, 3)),
            },
            _ => {
                const OPS: [&str; 4] = ["CROP", "LOC", "Count", "vqa"];
                let args = (0..rng.random_range(0..4))
                    .map(|j| NamedArg {
                        name: format!("arg{j}"),
                        value: random_arg(&mut rng, &vars),
                    })
                    .collect();
                Stmt {
                    target: target.clone(),
                    op: OPS[rng.random_range(0..OPS.len())].into(),
                    args: Args::Named(args),
                }
            }
        };
        statements.push(stmt);
        vars.push(target);
    }
    statements.push(Stmt {
        target: "FINAL_ANSWER".into(),
        op: "RESULT".into(),
        args: Args::Named(vec![NamedArg {
            name: "var".into(),
            value: Arg::Var(vars[rng.random_range(0..vars.len())].clone()),
        }]),
    });
    Program { statements }
}

// ---------------------------------------------------------------------------
// Invalid programs are rejected with a position.

pub fn invalid_fixtures() -> Vec<(&'static str, &'static str, ParseError)> {
    vec![
        (
            "no RESULT",
            "ANSWER0=VQA(image=LEFT,question='Is it red?')\nANSWER1=EVAL(ANSWER0 == True)",
            ParseError::MissingResult { line: 2 },
        ),
        (
            "reassignment",
            "ANSWER0=VQA(image=LEFT,question='q')\nANSWER0=VQA(image=RIGHT,question='q')\nFINAL_ANSWER=RESULT(var=ANSWER0)",
            ParseError::Reassignment {
                var: "ANSWER0".into(),
                line: 2,
            },
        ),
        (
            "use before assign",
            "ANSWER0=VQA(image=LEFT,question='q')\nANSWER2=EVAL(ANSWER0 and ANSWER1)\nFINAL_ANSWER=RESULT(var=ANSWER2)",
            ParseError::UseBeforeAssign {
                var: "ANSWER1".into(),
                line: 2,
            },
        ),
        (
            "double quotes",
            "ANSWER0=VQA(image=LEFT,question=\"q\")\nFINAL_ANSWER=RESULT(var=ANSWER0)",
            ParseError::Syntax {
                line: 1,
                column: 33,
                message: "strings use single quotes".into(),
            },
        ),
        (
            "unterminated string",
            "ANSWER0=VQA(image=LEFT,question='q)\nFINAL_ANSWER=RESULT(var=ANSWER0)",
            ParseError::Syntax {
                line: 1,
                column: 33,
                message: "unterminated string".into(),
            },
        ),
    ]
}
