//! Parsed syntax tree. Every node keeps the byte span it came from.

use std::fmt::{self, Write as _};

use crate::diagnostic::Span;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprKind {
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    /// Integer floor division. The divisor must fold to a positive constant.
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Const(i64),
    Var(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl CmpOp {
    pub fn as_str(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "==",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }

    pub fn holds(self, lhs: i64, rhs: i64) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Gt => lhs > rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comparison {
    pub lhs: Expr,
    pub op: CmpOp,
    pub rhs: Expr,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessKind {
    Read,
    Write,
    Update,
}

impl AccessKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AccessKind::Read => "read",
            AccessKind::Write => "write",
            AccessKind::Update => "update",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForLoop {
    pub iterator: Ident,
    pub lower: Expr,
    pub upper: Expr,
    pub step: i64,
    /// Span of the step literal when one was written.
    pub step_span: Option<Span>,
    pub body: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IfStmt {
    pub conditions: Vec<Comparison>,
    pub then_body: Vec<Stmt>,
    pub else_body: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Access {
    pub kind: AccessKind,
    pub array: Ident,
    pub subscripts: Vec<Expr>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    For(ForLoop),
    If(IfStmt),
    Access(Access),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrayDecl {
    pub name: Ident,
    pub extents: Vec<Expr>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Program {
    pub params: Vec<Ident>,
    pub arrays: Vec<ArrayDecl>,
    pub body: Vec<Stmt>,
}

impl Program {
    /// Copy with every span zeroed, for structural comparison.
    pub fn without_spans(&self) -> Program {
        let mut p = self.clone();
        p.params.iter_mut().for_each(|i| i.span = Span::default());
        for a in &mut p.arrays {
            a.name.span = Span::default();
            a.span = Span::default();
            a.extents.iter_mut().for_each(clear_expr);
        }
        p.body.iter_mut().for_each(clear_stmt);
        p
    }
}

fn clear_expr(e: &mut Expr) {
    e.span = Span::default();
    match &mut e.kind {
        ExprKind::Add(a, b) | ExprKind::Sub(a, b) | ExprKind::Mul(a, b) | ExprKind::Div(a, b) => {
            clear_expr(a);
            clear_expr(b);
        }
        ExprKind::Neg(a) => clear_expr(a),
        ExprKind::Const(_) | ExprKind::Var(_) => {}
    }
}

fn clear_stmt(s: &mut Stmt) {
    match s {
        Stmt::For(f) => {
            f.iterator.span = Span::default();
            f.step_span = f.step_span.map(|_| Span::default());
            f.span = Span::default();
            clear_expr(&mut f.lower);
            clear_expr(&mut f.upper);
            f.body.iter_mut().for_each(clear_stmt);
        }
        Stmt::If(i) => {
            i.span = Span::default();
            for c in &mut i.conditions {
                c.span = Span::default();
                clear_expr(&mut c.lhs);
                clear_expr(&mut c.rhs);
            }
            i.then_body.iter_mut().for_each(clear_stmt);
            i.else_body.iter_mut().for_each(clear_stmt);
        }
        Stmt::Access(a) => {
            a.span = Span::default();
            a.array.span = Span::default();
            a.subscripts.iter_mut().for_each(clear_expr);
        }
    }
}

// ---------------------------------------------------------------------------
// Pretty printing. The output re-parses to the same tree.

fn precedence(kind: &ExprKind) -> u8 {
    match kind {
        ExprKind::Add(..) | ExprKind::Sub(..) => 1,
        ExprKind::Mul(..) | ExprKind::Div(..) => 2,
        ExprKind::Neg(_) => 3,
        ExprKind::Const(_) | ExprKind::Var(_) => 4,
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (l, op, r) = match &self.kind {
            ExprKind::Const(c) => return write!(f, "{c}"),
            ExprKind::Var(v) => return f.write_str(v),
            ExprKind::Neg(inner) => {
                f.write_char('-')?;
                return write_operand(f, inner, precedence(&inner.kind) < 3);
            }
            ExprKind::Add(l, r) => (l, "+", r),
            ExprKind::Sub(l, r) => (l, "-", r),
            ExprKind::Mul(l, r) => (l, "*", r),
            ExprKind::Div(l, r) => (l, "/", r),
        };
        let p = precedence(&self.kind);
        write_operand(f, l, precedence(&l.kind) < p)?;
        write!(f, " {op} ")?;
        write_operand(f, r, precedence(&r.kind) <= p)
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.op.as_str(), self.rhs)
    }
}

fn join<T: fmt::Display>(items: &[T], sep: &str) -> String {
    items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}

fn write_block(f: &mut fmt::Formatter<'_>, body: &[Stmt], indent: usize) -> fmt::Result {
    f.write_str("{\n")?;
    for s in body {
        write_stmt(f, s, indent + 1)?;
    }
    write!(f, "{}}}", "  ".repeat(indent))
}

fn write_stmt(f: &mut fmt::Formatter<'_>, stmt: &Stmt, indent: usize) -> fmt::Result {
    let pad = "  ".repeat(indent);
    match stmt {
        Stmt::For(l) => {
            write!(f, "{pad}for {} in {} .. {}", l.iterator.name, l.lower, l.upper)?;
            if l.step_span.is_some() || l.step != 1 {
                write!(f, " step {}", l.step)?;
            }
            f.write_char(' ')?;
            write_block(f, &l.body, indent)?;
            f.write_char('\n')
        }
        Stmt::If(i) => {
            write!(f, "{pad}if {} ", join(&i.conditions, " && "))?;
            write_block(f, &i.then_body, indent)?;
            if !i.else_body.is_empty() {
                f.write_str(" else ")?;
                write_block(f, &i.else_body, indent)?;
            }
            f.write_char('\n')
        }
        Stmt::Access(a) => {
            writeln!(f, "{pad}{} {}[{}];", a.kind.as_str(), a.array.name, join(&a.subscripts, ", "))
        }
    }
}

impl fmt::Display for Stmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_stmt(f, self, 0)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.params.is_empty() {
            let names: Vec<_> = self.params.iter().map(|p| p.name.as_str()).collect();
            writeln!(f, "params {};", names.join(", "))?;
        }
        for a in &self.arrays {
            writeln!(f, "array {}[{}];", a.name.name, join(&a.extents, ", "))?;
        }
        if !self.params.is_empty() || !self.arrays.is_empty() {
            f.write_char('\n')?;
        }
        for s in &self.body {
            write_stmt(f, s, 0)?;
        }
        Ok(())
    }
}
