//! Slot-resolved form of ADT code and formulas.
//!
//! Every method runs over a flat environment laid out as
//! `[fields | params | locals | returns]`; booleans are 0/1.

use std::collections::HashMap;
use std::sync::Arc;

use crate::dsl::{self, AdtDef, BinOp, Expr, FieldType, LValue, Stmt, UnOp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RExpr {
    Const(i64),
    Slot(u32),
    Load { array: Arc<str>, base: u32, len: u32, idx: Box<RExpr> },
    Un(UnOp, Box<RExpr>),
    Bin(BinOp, Box<RExpr>, Box<RExpr>),
    Forall { slot: u32, lo: Box<RExpr>, hi: Box<RExpr>, body: Box<RExpr> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RStmt {
    Assign(u32, RExpr),
    Store { array: Arc<str>, base: u32, len: u32, idx: RExpr, val: RExpr },
    If(RExpr, Vec<RStmt>, Vec<RStmt>),
    While(RExpr, Vec<RStmt>),
    Return(Vec<RExpr>),
}

pub(crate) fn index(array: &str, base: u32, len: u32, i: i64) -> Result<usize> {
    if i < 0 || i >= len as i64 {
        return Err(Error::IndexOutOfBounds { array: array.to_string(), index: i, len: len as usize });
    }
    Ok(base as usize + i as usize)
}

pub(crate) fn apply_bin(op: BinOp, x: i64, y: i64) -> Result<i64> {
    Ok(match op {
        BinOp::Add => x.checked_add(y).ok_or(Error::Overflow)?,
        BinOp::Sub => x.checked_sub(y).ok_or(Error::Overflow)?,
        BinOp::Mul => x.checked_mul(y).ok_or(Error::Overflow)?,
        BinOp::Rem => {
            if y == 0 {
                return Err(Error::RemainderByZero);
            }
            x.checked_rem(y).ok_or(Error::Overflow)?
        }
        BinOp::Eq => (x == y) as i64,
        BinOp::Ne => (x != y) as i64,
        BinOp::Lt => (x < y) as i64,
        BinOp::Le => (x <= y) as i64,
        BinOp::Gt => (x > y) as i64,
        BinOp::Ge => (x >= y) as i64,
        BinOp::And => (x != 0 && y != 0) as i64,
        BinOp::Or => (x != 0 || y != 0) as i64,
    })
}

impl RExpr {
    pub fn eval(&self, env: &mut [i64]) -> Result<i64> {
        match self {
            RExpr::Const(v) => Ok(*v),
            RExpr::Slot(s) => Ok(env[*s as usize]),
            RExpr::Load { array, base, len, idx } => {
                let i = idx.eval(env)?;
                Ok(env[index(array, *base, *len, i)?])
            }
            RExpr::Un(UnOp::Neg, e) => e.eval(env)?.checked_neg().ok_or(Error::Overflow),
            RExpr::Un(UnOp::Not, e) => Ok((e.eval(env)? == 0) as i64),
            RExpr::Bin(BinOp::And, a, b) => Ok((a.eval(env)? != 0 && b.eval(env)? != 0) as i64),
            RExpr::Bin(BinOp::Or, a, b) => Ok((a.eval(env)? != 0 || b.eval(env)? != 0) as i64),
            RExpr::Bin(op, a, b) => {
                let x = a.eval(env)?;
                let y = b.eval(env)?;
                apply_bin(*op, x, y)
            }
            RExpr::Forall { slot, lo, hi, body } => {
                let lo = lo.eval(env)?;
                let hi = hi.eval(env)?;
                let mut i = lo;
                while i <= hi {
                    env[*slot as usize] = i;
                    if body.eval(env)? == 0 {
                        return Ok(0);
                    }
                    i += 1;
                }
                Ok(1)
            }
        }
    }

    pub fn holds(&self, env: &mut [i64]) -> Result<bool> {
        Ok(self.eval(env)? != 0)
    }

    pub fn negate(self) -> RExpr {
        RExpr::Un(UnOp::Not, Box::new(self))
    }

    /// Rewrites every slot through `f`.
    pub fn relocate(&self, f: &dyn Fn(u32) -> u32) -> RExpr {
        match self {
            RExpr::Const(v) => RExpr::Const(*v),
            RExpr::Slot(s) => RExpr::Slot(f(*s)),
            RExpr::Load { array, base, len, idx } => RExpr::Load {
                array: array.clone(),
                base: f(*base),
                len: *len,
                idx: Box::new(idx.relocate(f)),
            },
            RExpr::Un(op, e) => RExpr::Un(*op, Box::new(e.relocate(f))),
            RExpr::Bin(op, a, b) => RExpr::Bin(*op, Box::new(a.relocate(f)), Box::new(b.relocate(f))),
            RExpr::Forall { slot, lo, hi, body } => RExpr::Forall {
                slot: f(*slot),
                lo: Box::new(lo.relocate(f)),
                hi: Box::new(hi.relocate(f)),
                body: Box::new(body.relocate(f)),
            },
        }
    }

    /// Largest slot the expression touches, plus one.
    pub fn slot_extent(&self) -> usize {
        match self {
            RExpr::Const(_) => 0,
            RExpr::Slot(s) => *s as usize + 1,
            RExpr::Load { base, len, idx, .. } => (*base as usize + *len as usize).max(idx.slot_extent()),
            RExpr::Un(_, e) => e.slot_extent(),
            RExpr::Bin(_, a, b) => a.slot_extent().max(b.slot_extent()),
            RExpr::Forall { slot, lo, hi, body } => (*slot as usize + 1)
                .max(lo.slot_extent())
                .max(hi.slot_extent())
                .max(body.slot_extent()),
        }
    }
}

pub(crate) fn relocate_stmts(stmts: &[RStmt], f: &dyn Fn(u32) -> u32) -> Vec<RStmt> {
    stmts
        .iter()
        .map(|s| match s {
            RStmt::Assign(slot, e) => RStmt::Assign(f(*slot), e.relocate(f)),
            RStmt::Store { array, base, len, idx, val } => RStmt::Store {
                array: array.clone(),
                base: f(*base),
                len: *len,
                idx: idx.relocate(f),
                val: val.relocate(f),
            },
            RStmt::If(c, t, e) => RStmt::If(c.relocate(f), relocate_stmts(t, f), relocate_stmts(e, f)),
            RStmt::While(c, b) => RStmt::While(c.relocate(f), relocate_stmts(b, f)),
            RStmt::Return(vs) => RStmt::Return(vs.iter().map(|v| v.relocate(f)).collect()),
        })
        .collect()
}

/// Big-step execution of a statement list. `ret_base` is where `return`
/// writes its values. Returns true once a `return` has executed.
pub fn exec(stmts: &[RStmt], env: &mut [i64], ret_base: usize, fuel: &mut u64) -> Result<bool> {
    for s in stmts {
        if *fuel == 0 {
            return Err(Error::FuelExhausted { method: String::new(), fuel: 0 });
        }
        *fuel -= 1;
        match s {
            RStmt::Assign(slot, e) => env[*slot as usize] = e.eval(env)?,
            RStmt::Store { array, base, len, idx, val } => {
                let i = idx.eval(env)?;
                let v = val.eval(env)?;
                env[index(array, *base, *len, i)?] = v;
            }
            RStmt::If(c, t, e) => {
                let branch = if c.holds(env)? { t } else { e };
                if exec(branch, env, ret_base, fuel)? {
                    return Ok(true);
                }
            }
            RStmt::While(c, body) => loop {
                if *fuel == 0 {
                    return Err(Error::FuelExhausted { method: String::new(), fuel: 0 });
                }
                *fuel -= 1;
                if !c.holds(env)? {
                    break;
                }
                if exec(body, env, ret_base, fuel)? {
                    return Ok(true);
                }
            },
            RStmt::Return(vs) => {
                for (i, v) in vs.iter().enumerate() {
                    env[ret_base + i] = v.eval(env)?;
                }
                return Ok(true);
            }
        }
    }
    Ok(false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotInfo {
    Scalar(u32),
    Array { base: u32, len: u32 },
}

/// Name resolution for one compilation context.
#[derive(Debug, Clone, Default)]
pub(crate) struct Resolver {
    pub consts: HashMap<String, i64>,
    pub bare: HashMap<String, SlotInfo>,
    pub qualified: HashMap<(String, String), SlotInfo>,
    /// First slot available for quantifier variables.
    pub scratch: u32,
    bound: Vec<(String, u32)>,
}

impl Resolver {
    pub fn new(consts: &[(String, i64)]) -> Resolver {
        Resolver { consts: consts.iter().cloned().collect(), ..Resolver::default() }
    }

    fn lookup(&self, e: &Expr) -> Result<SlotInfo> {
        match e {
            Expr::Name(n) => {
                if let Some((_, s)) = self.bound.iter().rev().find(|(b, _)| b == n) {
                    return Ok(SlotInfo::Scalar(*s));
                }
                self.bare.get(n).copied().ok_or_else(|| Error::Invalid(format!("unresolved name `{n}`")))
            }
            Expr::Qualified { scope, name } => self
                .qualified
                .get(&(scope.clone(), name.clone()))
                .copied()
                .ok_or_else(|| Error::Invalid(format!("unresolved name `{scope}.{name}`"))),
            _ => Err(Error::Invalid("not a name".into())),
        }
    }

    fn display(e: &Expr) -> String {
        dsl::render_expr(e)
    }

    pub fn expr(&mut self, e: &Expr) -> Result<RExpr> {
        Ok(match e {
            Expr::Int(v) => RExpr::Const(*v),
            Expr::Bool(b) => RExpr::Const(*b as i64),
            Expr::Name(n) if !self.bound.iter().any(|(b, _)| b == n) && self.consts.contains_key(n) => {
                RExpr::Const(self.consts[n])
            }
            Expr::Name(_) | Expr::Qualified { .. } => match self.lookup(e)? {
                SlotInfo::Scalar(s) => RExpr::Slot(s),
                SlotInfo::Array { .. } => {
                    return Err(Error::Invalid(format!("array `{}` used without index", Self::display(e))))
                }
            },
            Expr::Index { target, index } => match self.lookup(target)? {
                SlotInfo::Array { base, len } => RExpr::Load {
                    array: Self::display(target).into(),
                    base,
                    len,
                    idx: Box::new(self.expr(index)?),
                },
                SlotInfo::Scalar(_) => {
                    return Err(Error::Invalid(format!("`{}` is not an array", Self::display(target))))
                }
            },
            Expr::Unary(op, a) => RExpr::Un(*op, Box::new(self.expr(a)?)),
            Expr::Binary(op, a, b) => RExpr::Bin(*op, Box::new(self.expr(a)?), Box::new(self.expr(b)?)),
            Expr::Forall { var, lo, hi, body } => {
                let lo = self.expr(lo)?;
                let hi = self.expr(hi)?;
                let slot = self.scratch + self.bound.len() as u32;
                self.bound.push((var.clone(), slot));
                let body = self.expr(body);
                self.bound.pop();
                RExpr::Forall { slot, lo: Box::new(lo), hi: Box::new(hi), body: Box::new(body?) }
            }
        })
    }

    pub fn stmts(&mut self, body: &[Stmt]) -> Result<Vec<RStmt>> {
        body.iter().map(|s| self.stmt(s)).collect()
    }

    fn stmt(&mut self, s: &Stmt) -> Result<RStmt> {
        Ok(match s {
            Stmt::Assign(LValue::Var(n), e) => match self.bare.get(n) {
                Some(SlotInfo::Scalar(slot)) => {
                    let slot = *slot;
                    RStmt::Assign(slot, self.expr(e)?)
                }
                _ => return Err(Error::Invalid(format!("cannot assign to `{n}`"))),
            },
            Stmt::Assign(LValue::Elem(n, i), e) => match self.bare.get(n) {
                Some(SlotInfo::Array { base, len }) => {
                    let (base, len) = (*base, *len);
                    RStmt::Store { array: n.as_str().into(), base, len, idx: self.expr(i)?, val: self.expr(e)? }
                }
                _ => return Err(Error::Invalid(format!("`{n}` is not an array"))),
            },
            Stmt::If { cond, then_branch, else_branch } => {
                RStmt::If(self.expr(cond)?, self.stmts(then_branch)?, self.stmts(else_branch)?)
            }
            Stmt::While { cond, body } => RStmt::While(self.expr(cond)?, self.stmts(body)?),
            Stmt::Return(vs) => RStmt::Return(vs.iter().map(|v| self.expr(v)).collect::<Result<_>>()?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldLayout {
    pub name: String,
    pub offset: usize,
    /// `None` for scalars, the capacity for arrays.
    pub len: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Method {
    pub name: String,
    pub params: Vec<String>,
    pub locals: Vec<String>,
    pub returns: usize,
    /// Compiled over the method environment; reads only parameters.
    pub requires: Option<RExpr>,
    pub body: Vec<RStmt>,
    width: usize,
}

impl Method {
    pub fn arity(&self) -> usize {
        self.params.len()
    }
    pub fn param_base(&self) -> usize {
        self.width
    }
    pub fn local_base(&self) -> usize {
        self.width + self.params.len()
    }
    pub fn ret_base(&self) -> usize {
        self.local_base() + self.locals.len()
    }
    pub fn env_len(&self) -> usize {
        self.ret_base() + self.returns
    }
    /// Slots past the object state: parameters, locals, and returns.
    pub fn frame_len(&self) -> usize {
        self.env_len() - self.width
    }
}

/// An ADT compiled to slot form.
#[derive(Debug, Clone)]
pub struct Model {
    pub adt: AdtDef,
    pub fields: Vec<FieldLayout>,
    pub width: usize,
    pub methods: Vec<Method>,
    /// Initializer code over an environment of `width` slots.
    pub init: Vec<RStmt>,
}

fn collect_locals(stmts: &[Stmt], known: &dyn Fn(&str) -> bool, out: &mut Vec<String>) {
    for s in stmts {
        match s {
            Stmt::Assign(LValue::Var(n), _) => {
                if !known(n) && !out.contains(n) {
                    out.push(n.clone());
                }
            }
            Stmt::If { then_branch, else_branch, .. } => {
                collect_locals(then_branch, known, out);
                collect_locals(else_branch, known, out);
            }
            Stmt::While { body, .. } => collect_locals(body, known, out),
            _ => {}
        }
    }
}

impl Model {
    pub fn new(adt: &AdtDef) -> Result<Model> {
        let mut fields = Vec::new();
        let mut width = 0usize;
        for f in &adt.fields {
            let len = match &f.ty {
                FieldType::Int => None,
                FieldType::Array(cap) => {
                    let n = dsl::const_value(cap, adt)
                        .filter(|n| *n > 0)
                        .ok_or_else(|| Error::Invalid(format!("capacity of `{}` is not a positive constant", f.name)))?;
                    Some(n as usize)
                }
            };
            fields.push(FieldLayout { name: f.name.clone(), offset: width, len });
            width += len.unwrap_or(1);
        }
        let state_slots = |r: &mut Resolver| {
            for fl in &fields {
                let info = match fl.len {
                    None => SlotInfo::Scalar(fl.offset as u32),
                    Some(len) => SlotInfo::Array { base: fl.offset as u32, len: len as u32 },
                };
                r.bare.insert(fl.name.clone(), info);
            }
        };

        let mut init = Vec::new();
        {
            let mut r = Resolver::new(&adt.consts);
            for (decl, fl) in adt.fields.iter().zip(&fields) {
                if let Some(e) = &decl.init {
                    let value = r.expr(e)?;
                    for k in 0..fl.len.unwrap_or(1) {
                        init.push(RStmt::Assign((fl.offset + k) as u32, value.clone()));
                    }
                }
                let info = match fl.len {
                    None => SlotInfo::Scalar(fl.offset as u32),
                    Some(len) => SlotInfo::Array { base: fl.offset as u32, len: len as u32 },
                };
                r.bare.insert(fl.name.clone(), info);
            }
        }

        let mut methods = Vec::new();
        for m in &adt.methods {
            let mut r = Resolver::new(&adt.consts);
            state_slots(&mut r);
            for (i, p) in m.params.iter().enumerate() {
                r.bare.insert(p.clone(), SlotInfo::Scalar((width + i) as u32));
            }
            let mut locals = Vec::new();
            let known = |n: &str| r.bare.contains_key(n);
            collect_locals(&m.body, &known, &mut locals);
            for (i, l) in locals.iter().enumerate() {
                r.bare.insert(l.clone(), SlotInfo::Scalar((width + m.params.len() + i) as u32));
            }
            let requires = m.requires.as_ref().map(|e| r.expr(e)).transpose()?;
            let body = r.stmts(&m.body)?;
            methods.push(Method {
                name: m.name.clone(),
                params: m.params.clone(),
                locals,
                returns: m.returns,
                requires,
                body,
                width,
            });
        }
        Ok(Model { adt: adt.clone(), fields, width, methods, init })
    }

    pub fn method_index(&self, name: &str) -> Result<usize> {
        self.methods
            .iter()
            .position(|m| m.name == name)
            .ok_or_else(|| Error::UnknownMethod(name.to_string()))
    }

    pub fn field(&self, name: &str) -> Option<&FieldLayout> {
        self.fields.iter().find(|f| f.name == name)
    }

    /// Registers `scope.field` names for a state copy placed at `offset`.
    pub(crate) fn bind_state(&self, r: &mut Resolver, scope: &str, offset: usize) {
        for fl in &self.fields {
            let info = match fl.len {
                None => SlotInfo::Scalar((offset + fl.offset) as u32),
                Some(len) => SlotInfo::Array { base: (offset + fl.offset) as u32, len: len as u32 },
            };
            r.qualified.insert((scope.to_string(), fl.name.clone()), info);
        }
    }

    pub fn const_value(&self, name: &str) -> Option<i64> {
        self.adt.const_value(name)
    }
}
