//! Surface language for data-structure definitions and formulas.

pub mod ast;
pub mod lexer;
mod parser;
mod render;

pub use ast::*;
pub use render::{render_adt, render_expr};

use lexer::Pos;
use parser::{FormulaScope, Parser, Ty};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ParseError {
    pub(crate) fn at(pos: Pos, message: impl Into<String>) -> ParseError {
        ParseError { line: pos.line, col: pos.col, message: message.into() }
    }
}

pub fn parse_adt(source: &str) -> Result<AdtDef, ParseError> {
    let mut p = Parser::new(source)?;
    let adt = p.adt()?;
    p.expect_eof()?;
    Ok(adt)
}

/// A candidate commutativity condition for the pair `(m, n)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommutFormula {
    pub text: String,
    pub m: String,
    pub n: String,
    pub expr: Expr,
    /// Highest `x<i>` / `y<i>` index referenced.
    pub max_x: usize,
    pub max_y: usize,
    pub uses_returns: bool,
}

/// A relation over two object states, written with `s1.` and `s2.`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairFormula {
    pub text: String,
    pub expr: Expr,
}

/// Parses `text` as a condition for `m ⋈ n`.
///
/// `x1` and `y1` are always available: when a method takes no argument
/// they denote an unconstrained value drawn from the argument domain.
pub fn parse_formula(text: &str, adt: &AdtDef, m: &str, n: &str) -> Result<CommutFormula, ParseError> {
    let start = Pos { line: 1, col: 1 };
    let md = adt
        .method(m)
        .ok_or_else(|| ParseError::at(start, format!("unknown method `{m}` in `{}`", adt.name)))?;
    let nd = adt
        .method(n)
        .ok_or_else(|| ParseError::at(start, format!("unknown method `{n}` in `{}`", adt.name)))?;
    let scope = FormulaScope {
        adt,
        states: &["s"],
        max_x: Some(md.params.len().max(1)),
        max_y: Some(nd.params.len().max(1)),
        max_rm: Some(md.returns),
        max_rn: Some(nd.returns),
        quantifiers: false,
    };
    let mut p = Parser::new(text)?;
    let expr = p.typed(&scope, Ty::Bool)?;
    p.expect_eof()?;

    let (mut max_x, mut max_y, mut uses_returns) = (0, 0, false);
    expr.walk(&mut |e| {
        if let Expr::Name(name) = e {
            if let Some((prefix, i)) = parser::split_indexed(name) {
                match prefix {
                    "x" => max_x = max_x.max(i),
                    "y" => max_y = max_y.max(i),
                    _ => uses_returns = true,
                }
            }
        }
    });
    Ok(CommutFormula {
        text: text.to_string(),
        m: m.to_string(),
        n: n.to_string(),
        expr,
        max_x,
        max_y,
        uses_returns,
    })
}

pub fn parse_pair_formula(text: &str, adt: &AdtDef) -> Result<PairFormula, ParseError> {
    let scope = FormulaScope {
        adt,
        states: &["s1", "s2"],
        max_x: None,
        max_y: None,
        max_rm: None,
        max_rn: None,
        quantifiers: true,
    };
    let mut p = Parser::new(text)?;
    let expr = p.typed(&scope, Ty::Bool)?;
    p.expect_eof()?;
    Ok(PairFormula { text: text.to_string(), expr })
}

/// Evaluates a constant expression against the ADT's constant table.
pub fn const_value(e: &Expr, adt: &AdtDef) -> Option<i64> {
    parser::const_eval(e, &adt.consts)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MEMORY: &str = "adt Memory {
        state { x: int = 0; }
        method read() -> int { return x; }
        method write(v: int) -> int { x := v; return 0; }
    }";

    #[test]
    fn parses_memory() {
        let adt = parse_adt(MEMORY).unwrap();
        assert_eq!(adt.fields.len(), 1);
        assert_eq!(adt.methods.len(), 2);
        assert_eq!(adt.method("write").unwrap().params, vec!["v".to_string()]);
    }

    #[test]
    fn parses_empty_adt() {
        let adt = parse_adt("adt T { state {} }").unwrap();
        assert!(adt.fields.is_empty() && adt.methods.is_empty());
    }

    #[test]
    fn missing_return_is_rejected() {
        let err = parse_adt("adt T { state {} method m() -> int { } }").unwrap_err();
        assert!(err.message.contains("missing return"), "{err}");
    }

    #[test]
    fn validation_errors() {
        let cases = [
            ("adt T { state { x: int; x: int; } }", "duplicate field"),
            ("adt T { state { a: int[N]; } }", "unknown capacity constant"),
            ("adt T { state {} method m() -> int { return; } }", "return arity mismatch"),
            ("adt T { state { x: int; } method m() { x := *; return; } }", "nondeterministic"),
            ("adt T { state {} method m() { return; } method m() { return; } }", "duplicate method"),
            ("adt T { const C = 1; const C = 2; state {} }", "duplicate constant"),
            ("adt T { state {} method m() { return; return; } }", "unreachable"),
            ("adt T { state { x: int; } method m() { if (x) { } return; } }", "boolean"),
        ];
        for (src, needle) in cases {
            let err = parse_adt(src).unwrap_err();
            assert!(err.message.contains(needle), "{src}: {err}");
        }
    }

    #[test]
    fn error_positions_point_at_the_offender() {
        let err = parse_adt("adt T {\n  state { a: int[N]; }\n}").unwrap_err();
        assert_eq!((err.line, err.col), (2, 18));
    }

    #[test]
    fn formula_resolution() {
        let adt = parse_adt(MEMORY).unwrap();
        let f = parse_formula("s.x == y1", &adt, "read", "write").unwrap();
        assert_eq!((f.max_x, f.max_y, f.uses_returns), (0, 1, false));
        assert!(parse_formula("true", &adt, "read", "write").is_ok());
        let err = parse_formula("x2 == 0", &adt, "write", "write").unwrap_err();
        assert!(err.message.contains("exceeds"), "{err}");
        let err = parse_formula("s.y == 0", &adt, "read", "write").unwrap_err();
        assert!(err.message.contains("unknown field"), "{err}");
        let err = parse_formula("x == 0", &adt, "read", "write").unwrap_err();
        assert!(err.message.contains("qualified"), "{err}");
        let f = parse_formula("rm1 == rn1", &adt, "read", "write").unwrap();
        assert!(f.uses_returns);
    }

    #[test]
    fn pair_formula_with_quantifier() {
        let adt = parse_adt(
            "adt S { const N = 3; state { top: int = -1; a: int[N]; } }",
        )
        .unwrap();
        let f = parse_pair_formula("s1.top == s2.top && forall i in 0..s1.top : s1.a[i] == s2.a[i]", &adt)
            .unwrap();
        assert!(matches!(f.expr, Expr::Binary(BinOp::And, _, _)));
        assert!(parse_pair_formula("s.top == 0", &adt).is_err());
        assert!(parse_formula("forall i in 0..1 : true", &adt, "x", "y").is_err());
    }
}
