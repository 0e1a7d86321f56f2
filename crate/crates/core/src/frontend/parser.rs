//! Recursive descent parser for the slic language.

use crate::ast::*;
use crate::frontend::lexer::{lex, Tok, Token};
use crate::frontend::ParseError;

pub fn parse_program(source: &str) -> Result<Program, ParseError> {
    let tokens = lex(source)?;
    let mut p = Parser { tokens, pos: 0 };
    let mut stmts = Vec::new();
    while !p.at(&Tok::Eof) {
        stmts.push(p.stmt(true)?);
    }
    Ok(Program::new(stmts))
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_span(&self) -> Span {
        self.tokens[self.pos].span
    }

    fn at(&self, t: &Tok) -> bool {
        self.peek() == t
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: Tok) -> Result<Token, ParseError> {
        if self.at(&t) {
            Ok(self.bump())
        } else {
            Err(ParseError::syntax(
                self.peek_span(),
                format!("expected {}, found {}", t.describe(), self.peek().describe()),
            ))
        }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.at(t) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<(String, Span), ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let span = self.peek_span();
                self.bump();
                Ok((name, span))
            }
            other => Err(ParseError::syntax(
                self.peek_span(),
                format!("expected identifier, found {}", other.describe()),
            )),
        }
    }

    fn stmt(&mut self, top_level: bool) -> Result<Stmt, ParseError> {
        let start = self.peek_span();
        match self.peek() {
            Tok::KwData | Tok::KwModel | Tok::KwGenQuant | Tok::KwInt | Tok::KwReal | Tok::KwBool => {
                if !top_level {
                    return Err(ParseError::syntax(
                        start,
                        "declarations are only allowed at the top level".to_string(),
                    ));
                }
                self.decl()
            }
            Tok::KwTarget => {
                self.bump();
                self.expect(Tok::PlusAssign)?;
                let value = self.expr()?;
                let end = self.expect(Tok::Semi)?.span;
                Ok(Stmt {
                    kind: StmtKind::TargetPlus { value },
                    span: start.join(end),
                })
            }
            Tok::KwIf => {
                self.bump();
                self.expect(Tok::LParen)?;
                let cond = self.expr()?;
                self.expect(Tok::RParen)?;
                let then_branch = self.block()?;
                let else_branch = if self.eat(&Tok::KwElse) {
                    self.block()?
                } else {
                    Vec::new()
                };
                let end = self.tokens[self.pos.saturating_sub(1)].span;
                Ok(Stmt {
                    kind: StmtKind::If {
                        cond,
                        then_branch,
                        else_branch,
                    },
                    span: start.join(end),
                })
            }
            Tok::KwFor => {
                self.bump();
                self.expect(Tok::LParen)?;
                let (var, _) = self.ident()?;
                self.expect(Tok::KwIn)?;
                let lo = self.expr()?;
                self.expect(Tok::Colon)?;
                let hi = self.expr()?;
                self.expect(Tok::RParen)?;
                let body = self.block()?;
                let end = self.tokens[self.pos.saturating_sub(1)].span;
                Ok(Stmt {
                    kind: StmtKind::For { var, lo, hi, body },
                    span: start.join(end),
                })
            }
            Tok::Ident(_) => {
                let target = self.lvalue()?;
                if self.eat(&Tok::Tilde) {
                    let dist = self.dist_call()?;
                    let end = self.expect(Tok::Semi)?.span;
                    Ok(Stmt {
                        kind: StmtKind::Tilde { target, dist },
                        span: start.join(end),
                    })
                } else if self.eat(&Tok::Assign) {
                    let value = self.expr()?;
                    let end = self.expect(Tok::Semi)?.span;
                    Ok(Stmt {
                        kind: StmtKind::Assign { target, value },
                        span: start.join(end),
                    })
                } else {
                    Err(ParseError::syntax(
                        self.peek_span(),
                        format!("expected `=` or `~`, found {}", self.peek().describe()),
                    ))
                }
            }
            other => Err(ParseError::syntax(
                start,
                format!("expected a statement, found {}", other.describe()),
            )),
        }
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect(Tok::LBrace)?;
        let mut stmts = Vec::new();
        while !self.at(&Tok::RBrace) {
            if self.at(&Tok::Eof) {
                return Err(ParseError::syntax(self.peek_span(), "unclosed block".to_string()));
            }
            stmts.push(self.stmt(false)?);
        }
        self.expect(Tok::RBrace)?;
        Ok(stmts)
    }

    fn decl(&mut self) -> Result<Stmt, ParseError> {
        let start = self.peek_span();
        let annotation = match self.peek() {
            Tok::KwData => {
                self.bump();
                Some(Level::Data)
            }
            Tok::KwModel => {
                self.bump();
                Some(Level::Model)
            }
            Tok::KwGenQuant => {
                self.bump();
                Some(Level::GenQuant)
            }
            _ => None,
        };
        let base = match self.peek() {
            Tok::KwInt => BaseType::Int,
            Tok::KwReal => BaseType::Real,
            Tok::KwBool => BaseType::Bool,
            other => {
                return Err(ParseError::syntax(
                    self.peek_span(),
                    format!("expected a type, found {}", other.describe()),
                ))
            }
        };
        self.bump();
        let mut ty = TypeDecl::scalar(base);
        if self.eat(&Tok::Lt) {
            self.bounds(&mut ty)?;
            self.expect(Tok::Gt)?;
        }
        if self.eat(&Tok::LBracket) {
            loop {
                ty.dims.push(self.expr()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(Tok::RBracket)?;
        }
        let (name, _) = self.ident()?;
        let init = if self.eat(&Tok::Assign) {
            Some(DeclInit::Expr(self.expr()?))
        } else if self.eat(&Tok::Tilde) {
            Some(DeclInit::Dist(self.dist_call()?))
        } else {
            None
        };
        let end = self.expect(Tok::Semi)?.span;
        Ok(Stmt {
            kind: StmtKind::Decl {
                annotation,
                ty,
                name,
                init,
            },
            span: start.join(end),
        })
    }

    fn bounds(&mut self, ty: &mut TypeDecl) -> Result<(), ParseError> {
        loop {
            let (word, span) = self.ident()?;
            self.expect(Tok::Assign)?;
            let value = self.signed_number()?;
            match word.as_str() {
                "lower" => ty.lower = Some(value),
                "upper" => ty.upper = Some(value),
                other => {
                    return Err(ParseError::syntax(
                        span,
                        format!("expected `lower` or `upper`, found `{other}`"),
                    ))
                }
            }
            if !self.eat(&Tok::Comma) {
                return Ok(());
            }
        }
    }

    fn signed_number(&mut self) -> Result<f64, ParseError> {
        let neg = self.eat(&Tok::Minus);
        let v = match self.peek().clone() {
            Tok::IntLit(v) => v as f64,
            Tok::RealLit(v) => v,
            other => {
                return Err(ParseError::syntax(
                    self.peek_span(),
                    format!("expected a numeric bound, found {}", other.describe()),
                ))
            }
        };
        self.bump();
        Ok(if neg { -v } else { v })
    }

    fn lvalue(&mut self) -> Result<LValue, ParseError> {
        let (name, _) = self.ident()?;
        let mut indices = Vec::new();
        while self.eat(&Tok::LBracket) {
            indices.push(self.expr()?);
            self.expect(Tok::RBracket)?;
        }
        Ok(LValue { name, indices })
    }

    fn dist_call(&mut self) -> Result<DistCall, ParseError> {
        let (name, span) = self.ident()?;
        let dist = DistName::from_name(&name).ok_or_else(|| {
            ParseError::syntax(span, format!("unknown distribution `{name}`"))
        })?;
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if !self.at(&Tok::RParen) {
            loop {
                args.push(self.expr()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        if args.len() != dist.arity() {
            return Err(ParseError::syntax(
                span,
                format!(
                    "distribution `{name}` takes {} argument(s), got {}",
                    dist.arity(),
                    args.len()
                ),
            ));
        }
        Ok(DistCall::new(dist, args))
    }

    pub(crate) fn expr(&mut self) -> Result<Expr, ParseError> {
        let cond = self.or_expr()?;
        if self.eat(&Tok::Question) {
            let then = self.expr()?;
            self.expect(Tok::Colon)?;
            let otherwise = self.expr()?;
            Ok(Expr::Cond(Box::new(cond), Box::new(then), Box::new(otherwise)))
        } else {
            Ok(cond)
        }
    }

    fn or_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.and_expr()?;
        while self.eat(&Tok::OrOr) {
            let rhs = self.and_expr()?;
            lhs = Expr::bin(BinOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.cmp_expr()?;
        while self.eat(&Tok::AndAnd) {
            let rhs = self.cmp_expr()?;
            lhs = Expr::bin(BinOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn cmp_expr(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.add_expr()?;
        let op = match self.peek() {
            Tok::EqEq => Some(BinOp::Eq),
            Tok::NotEq => Some(BinOp::Ne),
            Tok::Lt => Some(BinOp::Lt),
            Tok::Le => Some(BinOp::Le),
            Tok::Gt => Some(BinOp::Gt),
            Tok::Ge => Some(BinOp::Ge),
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let rhs = self.add_expr()?;
            Ok(Expr::bin(op, lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn add_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.mul_expr()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn mul_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(&Tok::Minus) {
            let e = self.unary()?;
            // fold literal negation so `-1e30` is a plain literal
            Ok(match e {
                Expr::IntLit(v) => Expr::IntLit(-v),
                Expr::RealLit(v) => Expr::RealLit(-v),
                other => Expr::Unary(UnOp::Neg, Box::new(other)),
            })
        } else if self.eat(&Tok::Bang) {
            let e = self.unary()?;
            Ok(Expr::Unary(UnOp::Not, Box::new(e)))
        } else {
            self.postfix()
        }
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.primary()?;
        while self.eat(&Tok::LBracket) {
            let idx = self.expr()?;
            self.expect(Tok::RBracket)?;
            e = Expr::index(e, idx);
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::IntLit(v) => {
                self.bump();
                Ok(Expr::IntLit(v))
            }
            Tok::RealLit(v) => {
                self.bump();
                Ok(Expr::RealLit(v))
            }
            Tok::KwTrue => {
                self.bump();
                Ok(Expr::BoolLit(true))
            }
            Tok::KwFalse => {
                self.bump();
                Ok(Expr::BoolLit(false))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let span = self.peek_span();
                self.bump();
                if self.at(&Tok::LParen) {
                    self.call(&name, span)
                } else {
                    Ok(Expr::Var(name))
                }
            }
            other => Err(ParseError::syntax(
                self.peek_span(),
                format!("expected an expression, found {}", other.describe()),
            )),
        }
    }

    fn call(&mut self, name: &str, span: Span) -> Result<Expr, ParseError> {
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if !self.at(&Tok::RParen) {
            loop {
                args.push(self.expr()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;

        let func = match name {
            "log" => Some(FuncName::Log),
            "exp" => Some(FuncName::Exp),
            "sqrt" => Some(FuncName::Sqrt),
            "pow" => Some(FuncName::Pow),
            "log_sum_exp" => Some(FuncName::LogSumExp),
            "softmax" => Some(FuncName::Softmax),
            _ => None,
        };
        if let Some(func) = func {
            if args.len() != func.arity() {
                return Err(ParseError::syntax(
                    span,
                    format!(
                        "function `{name}` takes {} argument(s), got {}",
                        func.arity(),
                        args.len()
                    ),
                ));
            }
            return Ok(Expr::Call(func, args));
        }

        // density functions: `<dist>_lpdf(value, args...)` / `<dist>_lpmf(...)`
        for dist in DistName::ALL {
            if name == dist.lpdf_name() {
                if args.len() != dist.arity() + 1 {
                    return Err(ParseError::syntax(
                        span,
                        format!(
                            "`{name}` takes {} argument(s), got {}",
                            dist.arity() + 1,
                            args.len()
                        ),
                    ));
                }
                let mut it = args.into_iter();
                let value = it.next().unwrap();
                return Ok(Expr::DistLpdf(dist, Box::new(value), it.collect()));
            }
        }
        Err(ParseError::syntax(span, format!("unknown function `{name}`")))
    }
}
