
use super::ast::*;
use super::lexer::{tokenize, Pos, Tok, Token};
use super::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Ty {
    Int,
    Bool,
}

/// What a name denotes, as far as typing is concerned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Sym {
    Int,
    Array,
}

pub(crate) trait Scope {
    fn bare(&self, name: &str) -> Result<Sym, String>;
    fn qualified(&self, scope: &str, name: &str) -> Result<Sym, String>;
    fn allows_forall(&self) -> bool {
        false
    }
}

const KEYWORDS: &[&str] = &[
    "adt", "const", "state", "method", "requires", "if", "else", "while", "return", "int",
    "true", "false", "forall", "in",
];

pub(crate) struct Parser {
    toks: Vec<Token>,
    i: usize,
    bound: Vec<String>,
}

impl Parser {
    pub(crate) fn new(src: &str) -> Result<Parser, ParseError> {
        Ok(Parser { toks: tokenize(src)?, i: 0, bound: Vec::new() })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.i].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let j = (self.i + k).min(self.toks.len() - 1);
        &self.toks[j].tok
    }

    pub(crate) fn pos(&self) -> Pos {
        self.toks[self.i].pos
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.i].tok.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::at(self.pos(), msg))
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &Tok) -> Result<(), ParseError> {
        if self.eat(tok) {
            Ok(())
        } else {
            self.err(format!("expected {tok}, found {}", self.peek()))
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.is_kw(kw) {
            self.advance();
            Ok(())
        } else {
            self.err(format!("expected `{kw}`, found {}", self.peek()))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.advance();
                Ok(s)
            }
            Tok::Ident(s) => self.err(format!("`{s}` is a reserved word")),
            other => self.err(format!("expected identifier, found {other}")),
        }
    }

    pub(crate) fn expect_eof(&mut self) -> Result<(), ParseError> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            self.err(format!("unexpected {} after end of input", self.peek()))
        }
    }

    // ---- expressions -------------------------------------------------

    pub(crate) fn expr(&mut self, scope: &dyn Scope) -> Result<(Expr, Ty), ParseError> {
        self.binary(scope, 1)
    }

    pub(crate) fn typed(&mut self, scope: &dyn Scope, want: Ty) -> Result<Expr, ParseError> {
        let pos = self.pos();
        let (e, ty) = self.expr(scope)?;
        if ty != want {
            return Err(ParseError::at(
                pos,
                match want {
                    Ty::Int => "expected an integer expression, found a boolean one",
                    Ty::Bool => "expected a boolean expression, found an integer one",
                },
            ));
        }
        Ok(e)
    }

    fn binop(&self) -> Option<BinOp> {
        Some(match self.peek() {
            Tok::OrOr => BinOp::Or,
            Tok::AndAnd => BinOp::And,
            Tok::EqEq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            Tok::Star => BinOp::Mul,
            Tok::Percent => BinOp::Rem,
            _ => return None,
        })
    }

    fn binary(&mut self, scope: &dyn Scope, min_prec: u8) -> Result<(Expr, Ty), ParseError> {
        let (mut lhs, mut lty) = self.unary(scope)?;
        while let Some(op) = self.binop() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            let pos = self.pos();
            self.advance();
            let (rhs, rty) = self.binary(scope, prec + 1)?;
            let ty = if op.is_logical() {
                if lty != Ty::Bool || rty != Ty::Bool {
                    return Err(ParseError::at(pos, format!("`{}` needs boolean operands", op.symbol())));
                }
                Ty::Bool
            } else {
                if lty != Ty::Int || rty != Ty::Int {
                    return Err(ParseError::at(pos, format!("`{}` needs integer operands", op.symbol())));
                }
                if op.is_comparison() {
                    if let Some(next) = self.binop() {
                        if next.is_comparison() {
                            return self.err("comparisons do not chain; use `&&`");
                        }
                    }
                    Ty::Bool
                } else {
                    Ty::Int
                }
            };
            lhs = Expr::binary(op, lhs, rhs);
            lty = ty;
        }
        Ok((lhs, lty))
    }

    fn unary(&mut self, scope: &dyn Scope) -> Result<(Expr, Ty), ParseError> {
        let pos = self.pos();
        match self.peek() {
            Tok::Minus => {
                self.advance();
                let (e, ty) = self.unary(scope)?;
                if ty != Ty::Int {
                    return Err(ParseError::at(pos, "`-` needs an integer operand"));
                }
                Ok((Expr::Unary(UnOp::Neg, Box::new(e)), Ty::Int))
            }
            Tok::Bang => {
                self.advance();
                let (e, ty) = self.unary(scope)?;
                if ty != Ty::Bool {
                    return Err(ParseError::at(pos, "`!` needs a boolean operand"));
                }
                Ok((Expr::Unary(UnOp::Not, Box::new(e)), Ty::Bool))
            }
            _ => self.primary(scope),
        }
    }

    fn primary(&mut self, scope: &dyn Scope) -> Result<(Expr, Ty), ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.advance();
                Ok((Expr::Int(v), Ty::Int))
            }
            Tok::LParen => {
                self.advance();
                let r = self.expr(scope)?;
                self.expect(&Tok::RParen)?;
                Ok(r)
            }
            Tok::Star => self.err("nondeterministic construct `*` is not supported; methods must be deterministic"),
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.advance();
                Ok((Expr::Bool(s == "true"), Ty::Bool))
            }
            Tok::Ident(s) if s == "nondet" => {
                self.err("nondeterministic construct `nondet` is not supported; methods must be deterministic")
            }
            Tok::Ident(s) if s == "forall" => self.forall(scope),
            Tok::Ident(_) => {
                let name = self.ident()?;
                let (target, sym) = if *self.peek() == Tok::Dot {
                    self.advance();
                    let field = self.ident()?;
                    let sym = scope.qualified(&name, &field).map_err(|m| ParseError::at(pos, m))?;
                    (Expr::Qualified { scope: name, name: field }, sym)
                } else if self.bound.contains(&name) {
                    (Expr::Name(name), Sym::Int)
                } else {
                    let sym = scope.bare(&name).map_err(|m| ParseError::at(pos, m))?;
                    (Expr::Name(name), sym)
                };
                if *self.peek() == Tok::LBracket {
                    if sym != Sym::Array {
                        return self.err("indexing a non-array");
                    }
                    self.advance();
                    let index = self.typed(scope, Ty::Int)?;
                    self.expect(&Tok::RBracket)?;
                    return Ok((Expr::Index { target: Box::new(target), index: Box::new(index) }, Ty::Int));
                }
                if sym == Sym::Array {
                    return Err(ParseError::at(pos, "array used without an index"));
                }
                Ok((target, Ty::Int))
            }
            other => self.err(format!("expected expression, found {other}")),
        }
    }

    fn forall(&mut self, scope: &dyn Scope) -> Result<(Expr, Ty), ParseError> {
        if !scope.allows_forall() {
            return self.err("quantifiers are only allowed in pair formulas");
        }
        self.expect_kw("forall")?;
        let var = self.ident()?;
        if self.bound.contains(&var) || scope.bare(&var).is_ok() {
            return self.err(format!("quantifier variable `{var}` shadows another name"));
        }
        self.expect_kw("in")?;
        let lo = self.typed_no_range(scope)?;
        self.expect(&Tok::DotDot)?;
        let hi = self.typed_no_range(scope)?;
        self.expect(&Tok::Colon)?;
        self.bound.push(var.clone());
        let body = self.typed(scope, Ty::Bool);
        self.bound.pop();
        Ok((
            Expr::Forall { var, lo: Box::new(lo), hi: Box::new(hi), body: Box::new(body?) },
            Ty::Bool,
        ))
    }

    // Range bounds stop at `..` and `:`, which the binary parser never consumes.
    fn typed_no_range(&mut self, scope: &dyn Scope) -> Result<Expr, ParseError> {
        self.typed(scope, Ty::Int)
    }

    // ---- data-structure definitions -----------------------------------

    pub(crate) fn adt(&mut self) -> Result<AdtDef, ParseError> {
        self.expect_kw("adt")?;
        let name = self.ident()?;
        self.expect(&Tok::LBrace)?;

        let mut consts: Vec<(String, i64)> = Vec::new();
        while self.is_kw("const") {
            self.advance();
            let pos = self.pos();
            let cname = self.ident()?;
            if consts.iter().any(|(n, _)| *n == cname) {
                return Err(ParseError::at(pos, format!("duplicate constant `{cname}`")));
            }
            self.expect(&Tok::Eq)?;
            let negative = self.eat(&Tok::Minus);
            let value = match self.advance() {
                Tok::Int(v) => v,
                other => return Err(ParseError::at(pos, format!("expected integer, found {other}"))),
            };
            self.expect(&Tok::Semi)?;
            consts.push((cname, if negative { -value } else { value }));
        }

        self.expect_kw("state")?;
        self.expect(&Tok::LBrace)?;
        let mut fields: Vec<FieldDecl> = Vec::new();
        while *self.peek() != Tok::RBrace {
            let pos = self.pos();
            let fname = self.ident()?;
            if fields.iter().any(|f| f.name == fname) {
                return Err(ParseError::at(pos, format!("duplicate field `{fname}`")));
            }
            if consts.iter().any(|(n, _)| *n == fname) {
                return Err(ParseError::at(pos, format!("field `{fname}` clashes with a constant")));
            }
            self.expect(&Tok::Colon)?;
            self.expect_kw("int")?;
            let ty = if self.eat(&Tok::LBracket) {
                let cap_pos = self.pos();
                let cap = self.typed(&ConstScope { consts: &consts }, Ty::Int)?;
                self.expect(&Tok::RBracket)?;
                match const_eval(&cap, &consts) {
                    Some(n) if n > 0 => {}
                    Some(n) => {
                        return Err(ParseError::at(cap_pos, format!("array capacity must be positive, got {n}")))
                    }
                    None => return Err(ParseError::at(cap_pos, "array capacity is not a constant")),
                }
                FieldType::Array(cap)
            } else {
                FieldType::Int
            };
            let init = if self.eat(&Tok::Eq) {
                let scope = InitScope { consts: &consts, earlier: &fields };
                Some(self.typed(&scope, Ty::Int)?)
            } else {
                None
            };
            self.expect(&Tok::Semi)?;
            fields.push(FieldDecl { name: fname, ty, init });
        }
        self.expect(&Tok::RBrace)?;

        let mut methods: Vec<MethodDef> = Vec::new();
        while self.is_kw("method") {
            let pos = self.pos();
            let m = self.method(&consts, &fields)?;
            if methods.iter().any(|x| x.name == m.name) {
                return Err(ParseError::at(pos, format!("duplicate method `{}`", m.name)));
            }
            methods.push(m);
        }
        self.expect(&Tok::RBrace)?;
        Ok(AdtDef { name, consts, fields, methods })
    }

    fn method(&mut self, consts: &[(String, i64)], fields: &[FieldDecl]) -> Result<MethodDef, ParseError> {
        self.expect_kw("method")?;
        let name = self.ident()?;
        self.expect(&Tok::LParen)?;
        let mut params: Vec<String> = Vec::new();
        while *self.peek() != Tok::RParen {
            if !params.is_empty() {
                self.expect(&Tok::Comma)?;
            }
            let pos = self.pos();
            let p = self.ident()?;
            if params.contains(&p) {
                return Err(ParseError::at(pos, format!("duplicate parameter `{p}`")));
            }
            if fields.iter().any(|f| f.name == p) || consts.iter().any(|(n, _)| *n == p) {
                return Err(ParseError::at(pos, format!("parameter `{p}` clashes with a field or constant")));
            }
            self.expect(&Tok::Colon)?;
            self.expect_kw("int")?;
            params.push(p);
        }
        self.expect(&Tok::RParen)?;

        let mut returns = 0;
        if self.eat(&Tok::Arrow) {
            self.expect_kw("int")?;
            returns = 1;
            loop {
                if *self.peek() == Tok::Comma && matches!(self.peek_at(1), Tok::Ident(s) if s == "int") {
                    self.advance();
                }
                if self.is_kw("int") {
                    self.advance();
                    returns += 1;
                } else {
                    break;
                }
            }
        }

        let requires = if self.is_kw("requires") {
            self.advance();
            let scope = RequiresScope { consts, params: &params };
            Some(self.typed(&scope, Ty::Bool)?)
        } else {
            None
        };

        let mut scope = BodyScope { consts, fields, params: &params, locals: Vec::new() };
        let open = self.pos();
        let body = self.block(&mut scope, returns)?;
        if !definitely_returns(&body) {
            return Err(ParseError::at(
                open,
                format!("missing return in method `{name}`: every path must end in `return` with {returns} value(s)"),
            ));
        }
        Ok(MethodDef { name, params, returns, requires, body })
    }

    fn block(&mut self, scope: &mut BodyScope<'_>, returns: usize) -> Result<Vec<Stmt>, ParseError> {
        self.expect(&Tok::LBrace)?;
        let mut out: Vec<Stmt> = Vec::new();
        while *self.peek() != Tok::RBrace {
            if out.last().is_some_and(stmt_definitely_returns) {
                return self.err("unreachable statement after return");
            }
            out.push(self.stmt(scope, returns)?);
        }
        self.expect(&Tok::RBrace)?;
        Ok(out)
    }

    fn stmt(&mut self, scope: &mut BodyScope<'_>, returns: usize) -> Result<Stmt, ParseError> {
        let pos = self.pos();
        if self.is_kw("if") {
            self.advance();
            self.expect(&Tok::LParen)?;
            let cond = self.typed(&*scope, Ty::Bool)?;
            self.expect(&Tok::RParen)?;
            let then_branch = self.block(scope, returns)?;
            let else_branch = if self.is_kw("else") {
                self.advance();
                if self.is_kw("if") {
                    vec![self.stmt(scope, returns)?]
                } else {
                    self.block(scope, returns)?
                }
            } else {
                Vec::new()
            };
            return Ok(Stmt::If { cond, then_branch, else_branch });
        }
        if self.is_kw("while") {
            self.advance();
            self.expect(&Tok::LParen)?;
            let cond = self.typed(&*scope, Ty::Bool)?;
            self.expect(&Tok::RParen)?;
            let body = self.block(scope, returns)?;
            return Ok(Stmt::While { cond, body });
        }
        if self.is_kw("return") {
            self.advance();
            let mut values = Vec::new();
            if *self.peek() != Tok::Semi {
                loop {
                    values.push(self.typed(&*scope, Ty::Int)?);
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
            }
            self.expect(&Tok::Semi)?;
            if values.len() != returns {
                return Err(ParseError::at(
                    pos,
                    format!("return arity mismatch: method returns {returns} value(s), found {}", values.len()),
                ));
            }
            return Ok(Stmt::Return(values));
        }

        let name = self.ident()?;
        let target = if self.eat(&Tok::LBracket) {
            match scope.bare(&name) {
                Ok(Sym::Array) => {}
                Ok(Sym::Int) => return Err(ParseError::at(pos, format!("`{name}` is not an array"))),
                Err(m) => return Err(ParseError::at(pos, m)),
            }
            let idx = self.typed(&*scope, Ty::Int)?;
            self.expect(&Tok::RBracket)?;
            LValue::Elem(name, idx)
        } else {
            if scope.consts.iter().any(|(n, _)| *n == name) {
                return Err(ParseError::at(pos, format!("cannot assign to constant `{name}`")));
            }
            if matches!(scope.bare(&name), Ok(Sym::Array)) {
                return Err(ParseError::at(pos, format!("cannot assign a whole array `{name}`")));
            }
            LValue::Var(name)
        };
        if *self.peek() != Tok::Assign {
            if *self.peek() == Tok::Eq {
                return self.err("use `:=` for assignment");
            }
            return self.err(format!("expected `:=`, found {}", self.peek()));
        }
        self.advance();
        let value = self.typed(&*scope, Ty::Int)?;
        self.expect(&Tok::Semi)?;
        if let LValue::Var(n) = &target {
            if scope.bare(n).is_err() {
                scope.locals.push(n.clone());
            }
        }
        Ok(Stmt::Assign(target, value))
    }
}

pub(crate) fn stmt_definitely_returns(s: &Stmt) -> bool {
    match s {
        Stmt::Return(_) => true,
        Stmt::If { then_branch, else_branch, .. } => {
            definitely_returns(then_branch) && definitely_returns(else_branch)
        }
        _ => false,
    }
}

pub(crate) fn definitely_returns(block: &[Stmt]) -> bool {
    block.last().is_some_and(stmt_definitely_returns)
}

/// Evaluates a closed integer expression over constants.
pub(crate) fn const_eval(e: &Expr, consts: &[(String, i64)]) -> Option<i64> {
    Some(match e {
        Expr::Int(v) => *v,
        Expr::Name(n) => consts.iter().find(|(c, _)| c == n)?.1,
        Expr::Unary(UnOp::Neg, a) => const_eval(a, consts)?.checked_neg()?,
        Expr::Binary(op, a, b) => {
            let (x, y) = (const_eval(a, consts)?, const_eval(b, consts)?);
            match op {
                BinOp::Add => x.checked_add(y)?,
                BinOp::Sub => x.checked_sub(y)?,
                BinOp::Mul => x.checked_mul(y)?,
                BinOp::Rem => x.checked_rem(y)?,
                _ => return None,
            }
        }
        _ => return None,
    })
}

fn const_or_unknown(consts: &[(String, i64)], name: &str, what: &str) -> Result<Sym, String> {
    if consts.iter().any(|(n, _)| n == name) {
        Ok(Sym::Int)
    } else {
        Err(format!("unknown name `{name}` in {what}"))
    }
}

struct ConstScope<'a> {
    consts: &'a [(String, i64)],
}

impl Scope for ConstScope<'_> {
    fn bare(&self, name: &str) -> Result<Sym, String> {
        const_or_unknown(self.consts, name, "constant expression")
            .map_err(|_| format!("unknown capacity constant `{name}`"))
    }
    fn qualified(&self, scope: &str, name: &str) -> Result<Sym, String> {
        Err(format!("qualified name `{scope}.{name}` not allowed in a constant expression"))
    }
}

struct InitScope<'a> {
    consts: &'a [(String, i64)],
    earlier: &'a [FieldDecl],
}

impl Scope for InitScope<'_> {
    fn bare(&self, name: &str) -> Result<Sym, String> {
        if let Some(f) = self.earlier.iter().find(|f| f.name == name) {
            return match f.ty {
                FieldType::Int => Ok(Sym::Int),
                FieldType::Array(_) => Err(format!("initializer may not read array `{name}`")),
            };
        }
        const_or_unknown(self.consts, name, "initializer (only constants and earlier fields)")
    }
    fn qualified(&self, scope: &str, name: &str) -> Result<Sym, String> {
        Err(format!("qualified name `{scope}.{name}` not allowed in an initializer"))
    }
}

struct RequiresScope<'a> {
    consts: &'a [(String, i64)],
    params: &'a [String],
}

impl Scope for RequiresScope<'_> {
    fn bare(&self, name: &str) -> Result<Sym, String> {
        if self.params.iter().any(|p| p == name) {
            return Ok(Sym::Int);
        }
        const_or_unknown(self.consts, name, "`requires` clause (only parameters and constants)")
    }
    fn qualified(&self, scope: &str, name: &str) -> Result<Sym, String> {
        Err(format!("qualified name `{scope}.{name}` not allowed in a `requires` clause"))
    }
}

pub(crate) struct BodyScope<'a> {
    consts: &'a [(String, i64)],
    fields: &'a [FieldDecl],
    params: &'a [String],
    locals: Vec<String>,
}

impl Scope for BodyScope<'_> {
    fn bare(&self, name: &str) -> Result<Sym, String> {
        if let Some(f) = self.fields.iter().find(|f| f.name == name) {
            return Ok(match f.ty {
                FieldType::Int => Sym::Int,
                FieldType::Array(_) => Sym::Array,
            });
        }
        if self.params.iter().any(|p| p == name) || self.locals.iter().any(|l| l == name) {
            return Ok(Sym::Int);
        }
        const_or_unknown(self.consts, name, "method body")
    }
    fn qualified(&self, scope: &str, name: &str) -> Result<Sym, String> {
        Err(format!("qualified name `{scope}.{name}` not allowed in a method body; write `{name}`"))
    }
}

/// Names visible to a formula over one or two object states.
pub(crate) struct FormulaScope<'a> {
    pub adt: &'a AdtDef,
    /// Allowed qualifiers (`s`, or `s1`/`s2`).
    pub states: &'a [&'a str],
    /// Largest usable index for `x<i>` / `y<i>`; `None` disables the namespace.
    pub max_x: Option<usize>,
    pub max_y: Option<usize>,
    pub max_rm: Option<usize>,
    pub max_rn: Option<usize>,
    pub quantifiers: bool,
}

pub(crate) fn split_indexed(name: &str) -> Option<(&str, usize)> {
    let digits = name.find(|c: char| c.is_ascii_digit())?;
    let (prefix, rest) = name.split_at(digits);
    if !matches!(prefix, "x" | "y" | "rm" | "rn") || rest.starts_with('0') {
        return None;
    }
    rest.parse::<usize>().ok().map(|i| (prefix, i))
}

impl Scope for FormulaScope<'_> {
    fn bare(&self, name: &str) -> Result<Sym, String> {
        if self.adt.consts.iter().any(|(n, _)| n == name) {
            return Ok(Sym::Int);
        }
        if let Some((prefix, i)) = split_indexed(name) {
            let (limit, what) = match prefix {
                "x" => (self.max_x, "arguments of m"),
                "y" => (self.max_y, "arguments of n"),
                "rm" => (self.max_rm, "return values of m"),
                _ => (self.max_rn, "return values of n"),
            };
            return match limit {
                Some(max) if i <= max => Ok(Sym::Int),
                Some(max) => Err(format!("`{name}` exceeds the {what} (at most {max})")),
                None => Err(format!("`{name}` is not available in this formula")),
            };
        }
        if self.adt.fields.iter().any(|f| f.name == name) {
            let q = self.states.first().copied().unwrap_or("s");
            return Err(format!("state field `{name}` must be qualified, e.g. `{q}.{name}`"));
        }
        Err(format!("unresolved name `{name}`"))
    }

    fn qualified(&self, scope: &str, name: &str) -> Result<Sym, String> {
        if !self.states.contains(&scope) {
            return Err(format!(
                "unknown state qualifier `{scope}` (expected {})",
                self.states.iter().map(|s| format!("`{s}`")).collect::<Vec<_>>().join(" or ")
            ));
        }
        match self.adt.fields.iter().find(|f| f.name == name) {
            Some(FieldDecl { ty: FieldType::Int, .. }) => Ok(Sym::Int),
            Some(FieldDecl { ty: FieldType::Array(_), .. }) => Ok(Sym::Array),
            None => Err(format!("unknown field `{name}` in `{scope}.{name}`")),
        }
    }

    fn allows_forall(&self) -> bool {
        self.quantifiers
    }
}
