//! Recursive-descent parser producing [`Program`].
//!
//! Expression precedence, tightest first: unary minus, then `*` and `/`,
//! then `+` and `-`; binary operators associate to the left.

use crate::ast::*;
use crate::diagnostic::{Category, Diagnostic, Span};
use crate::lexer::{Delim, Keyword, Op, Token, TokenKind};

pub fn parse(tokens: &[Token]) -> Result<Program, Diagnostic> {
    let mut p = Parser { tokens, pos: 0 };
    p.program()
}

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
}

type PResult<T> = Result<T, Diagnostic>;

impl<'t> Parser<'t> {
    fn peek(&self) -> Option<&'t Token> {
        self.tokens.get(self.pos)
    }

    fn peek_kind(&self) -> Option<TokenKind> {
        self.peek().map(|t| t.kind)
    }

    fn eof_span(&self) -> Span {
        let end = self.tokens.last().map_or(0, |t| t.span.end);
        Span::new(end, end)
    }

    fn error(&self, expected: &str) -> Diagnostic {
        match self.peek() {
            Some(tok) => {
                Diagnostic::new(Category::Syntax, format!("expected {expected}, found `{}`", tok.text), tok.span)
            }
            None => {
                Diagnostic::new(Category::Syntax, format!("expected {expected}, found end of input"), self.eof_span())
            }
        }
    }

    fn bump(&mut self) -> &'t Token {
        let t = &self.tokens[self.pos];
        self.pos += 1;
        t
    }

    fn eat(&mut self, kind: TokenKind) -> Option<&'t Token> {
        if self.peek_kind() == Some(kind) {
            Some(self.bump())
        } else {
            None
        }
    }

    fn expect(&mut self, kind: TokenKind) -> PResult<&'t Token> {
        self.eat(kind).ok_or_else(|| self.error(&kind.to_string()))
    }

    fn expect_delim(&mut self, d: Delim) -> PResult<&'t Token> {
        self.expect(TokenKind::Delim(d))
    }

    fn ident(&mut self) -> PResult<Ident> {
        let t = self.expect(TokenKind::Ident)?;
        Ok(Ident { name: t.text.clone(), span: t.span })
    }

    fn program(&mut self) -> PResult<Program> {
        let mut program = Program::default();
        while self.eat(TokenKind::Keyword(Keyword::Params)).is_some() {
            program.params.push(self.ident()?);
            while self.eat(TokenKind::Delim(Delim::Comma)).is_some() {
                program.params.push(self.ident()?);
            }
            self.expect_delim(Delim::Semi)?;
        }
        while let Some(kw) = self.eat(TokenKind::Keyword(Keyword::Array)) {
            let name = self.ident()?;
            self.expect_delim(Delim::LBracket)?;
            let extents = self.expr_list()?;
            self.expect_delim(Delim::RBracket)?;
            let semi = self.expect_delim(Delim::Semi)?;
            program.arrays.push(ArrayDecl { name, extents, span: kw.span.to(semi.span) });
        }
        while self.peek().is_some() {
            program.body.push(self.stmt()?);
        }
        Ok(program)
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        match self.peek_kind() {
            Some(TokenKind::Keyword(Keyword::For)) => self.for_stmt().map(Stmt::For),
            Some(TokenKind::Keyword(Keyword::If)) => self.if_stmt().map(Stmt::If),
            Some(TokenKind::Keyword(Keyword::Read | Keyword::Write | Keyword::Update)) => {
                self.access().map(Stmt::Access)
            }
            _ => Err(self.error("statement (`for`, `if`, `read`, `write` or `update`)")),
        }
    }

    fn block(&mut self) -> PResult<(Vec<Stmt>, Span)> {
        let open = self.expect_delim(Delim::LBrace)?;
        let mut body = Vec::new();
        loop {
            if let Some(close) = self.eat(TokenKind::Delim(Delim::RBrace)) {
                return Ok((body, open.span.to(close.span)));
            }
            if self.peek().is_none() {
                return Err(self.error("statement or `}`"));
            }
            body.push(self.stmt()?);
        }
    }

    fn for_stmt(&mut self) -> PResult<ForLoop> {
        let kw = self.bump();
        let iterator = self.ident()?;
        self.expect(TokenKind::Keyword(Keyword::In))?;
        let lower = self.expr()?;
        self.expect(TokenKind::Op(Op::DotDot))?;
        let upper = self.expr()?;
        let (step, step_span) = if self.eat(TokenKind::Keyword(Keyword::Step)).is_some() {
            match self.peek_kind() {
                Some(TokenKind::Int(v)) => {
                    let t = self.bump();
                    (v, Some(t.span))
                }
                _ => return Err(self.error("integer step")),
            }
        } else {
            (1, None)
        };
        let (body, body_span) = self.block()?;
        Ok(ForLoop { iterator, lower, upper, step, step_span, body, span: kw.span.to(body_span) })
    }

    fn if_stmt(&mut self) -> PResult<IfStmt> {
        let kw = self.bump();
        let mut conditions = vec![self.comparison()?];
        while self.eat(TokenKind::Op(Op::AndAnd)).is_some() {
            conditions.push(self.comparison()?);
        }
        let (then_body, mut span) = self.block()?;
        span = kw.span.to(span);
        let else_body = if self.eat(TokenKind::Keyword(Keyword::Else)).is_some() {
            let (body, else_span) = self.block()?;
            span = span.to(else_span);
            body
        } else {
            Vec::new()
        };
        Ok(IfStmt { conditions, then_body, else_body, span })
    }

    fn comparison(&mut self) -> PResult<Comparison> {
        let lhs = self.expr()?;
        let op = match self.peek_kind() {
            Some(TokenKind::Op(Op::Lt)) => CmpOp::Lt,
            Some(TokenKind::Op(Op::Le)) => CmpOp::Le,
            Some(TokenKind::Op(Op::EqEq)) => CmpOp::Eq,
            Some(TokenKind::Op(Op::Ge)) => CmpOp::Ge,
            Some(TokenKind::Op(Op::Gt)) => CmpOp::Gt,
            _ => return Err(self.error("comparison operator (`<`, `<=`, `==`, `>=`, `>`)")),
        };
        self.bump();
        let rhs = self.expr()?;
        let span = lhs.span.to(rhs.span);
        Ok(Comparison { lhs, op, rhs, span })
    }

    fn access(&mut self) -> PResult<Access> {
        let kw = self.bump();
        let kind = match kw.kind {
            TokenKind::Keyword(Keyword::Read) => AccessKind::Read,
            TokenKind::Keyword(Keyword::Write) => AccessKind::Write,
            _ => AccessKind::Update,
        };
        let array = self.ident()?;
        self.expect_delim(Delim::LBracket)?;
        let subscripts = self.expr_list()?;
        self.expect_delim(Delim::RBracket)?;
        let semi = self.expect_delim(Delim::Semi)?;
        Ok(Access { kind, array, subscripts, span: kw.span.to(semi.span) })
    }

    fn expr_list(&mut self) -> PResult<Vec<Expr>> {
        let mut list = vec![self.expr()?];
        while self.eat(TokenKind::Delim(Delim::Comma)).is_some() {
            list.push(self.expr()?);
        }
        Ok(list)
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.mul_expr()?;
        loop {
            let ctor: fn(Box<Expr>, Box<Expr>) -> ExprKind = match self.peek_kind() {
                Some(TokenKind::Op(Op::Plus)) => ExprKind::Add,
                Some(TokenKind::Op(Op::Minus)) => ExprKind::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.mul_expr()?;
            let span = lhs.span.to(rhs.span);
            lhs = Expr { kind: ctor(Box::new(lhs), Box::new(rhs)), span };
        }
    }

    fn mul_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let ctor: fn(Box<Expr>, Box<Expr>) -> ExprKind = match self.peek_kind() {
                Some(TokenKind::Op(Op::Star)) => ExprKind::Mul,
                Some(TokenKind::Op(Op::Slash)) => ExprKind::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            let span = lhs.span.to(rhs.span);
            lhs = Expr { kind: ctor(Box::new(lhs), Box::new(rhs)), span };
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        match self.peek_kind() {
            Some(TokenKind::Op(Op::Minus)) => {
                let minus = self.bump();
                let inner = self.unary()?;
                let span = minus.span.to(inner.span);
                Ok(Expr { kind: ExprKind::Neg(Box::new(inner)), span })
            }
            Some(TokenKind::Delim(Delim::LParen)) => {
                let open = self.bump();
                let mut inner = self.expr()?;
                let close = self.expect_delim(Delim::RParen)?;
                inner.span = open.span.to(close.span);
                Ok(inner)
            }
            Some(TokenKind::Int(v)) => {
                let t = self.bump();
                Ok(Expr { kind: ExprKind::Const(v), span: t.span })
            }
            Some(TokenKind::Ident) => {
                let t = self.bump();
                Ok(Expr { kind: ExprKind::Var(t.text.clone()), span: t.span })
            }
            _ => Err(self.error("expression")),
        }
    }
}
