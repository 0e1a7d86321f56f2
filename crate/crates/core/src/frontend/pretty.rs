//! Pretty-printer. `parse(pretty(p))` is structurally equal to `p`.

use crate::ast::*;
use std::fmt::Write;

pub fn pretty(program: &Program) -> String {
    let mut out = String::new();
    for stmt in &program.stmts {
        write_stmt(&mut out, stmt, 0);
    }
    out
}

pub fn pretty_stmts(stmts: &[Stmt], indent: usize) -> String {
    let mut out = String::new();
    for stmt in stmts {
        write_stmt(&mut out, stmt, indent);
    }
    out
}

fn pad(out: &mut String, indent: usize) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

fn write_stmt(out: &mut String, stmt: &Stmt, indent: usize) {
    pad(out, indent);
    match &stmt.kind {
        StmtKind::Decl {
            annotation,
            ty,
            name,
            init,
        } => {
            if let Some(level) = annotation {
                let _ = write!(out, "{level} ");
            }
            let _ = write!(out, "{} {name}", type_text(ty));
            match init {
                Some(DeclInit::Expr(e)) => {
                    let _ = write!(out, " = {}", expr_text(e));
                }
                Some(DeclInit::Dist(d)) => {
                    let _ = write!(out, " ~ {}", dist_text(d));
                }
                None => {}
            }
            out.push_str(";\n");
        }
        StmtKind::Assign { target, value } => {
            let _ = writeln!(out, "{} = {};", lvalue_text(target), expr_text(value));
        }
        StmtKind::Tilde { target, dist } => {
            let _ = writeln!(out, "{} ~ {};", lvalue_text(target), dist_text(dist));
        }
        StmtKind::TargetPlus { value } => {
            let _ = writeln!(out, "target += {};", expr_text(value));
        }
        StmtKind::If {
            cond,
            then_branch,
            else_branch,
        } => {
            let _ = writeln!(out, "if ({}) {{", expr_text(cond));
            for s in then_branch {
                write_stmt(out, s, indent + 1);
            }
            pad(out, indent);
            if else_branch.is_empty() {
                out.push_str("}\n");
            } else {
                out.push_str("} else {\n");
                for s in else_branch {
                    write_stmt(out, s, indent + 1);
                }
                pad(out, indent);
                out.push_str("}\n");
            }
        }
        StmtKind::For { var, lo, hi, body } => {
            let _ = writeln!(out, "for ({var} in {}:{}) {{", expr_text(lo), expr_text(hi));
            for s in body {
                write_stmt(out, s, indent + 1);
            }
            pad(out, indent);
            out.push_str("}\n");
        }
    }
}

pub fn type_text(ty: &TypeDecl) -> String {
    let mut s = ty.base.to_string();
    match (ty.lower, ty.upper) {
        (Some(lo), Some(hi)) => {
            let _ = write!(s, "<lower={},upper={}>", bound_text(lo), bound_text(hi));
        }
        (Some(lo), None) => {
            let _ = write!(s, "<lower={}>", bound_text(lo));
        }
        (None, Some(hi)) => {
            let _ = write!(s, "<upper={}>", bound_text(hi));
        }
        (None, None) => {}
    }
    if !ty.dims.is_empty() {
        s.push('[');
        for (i, d) in ty.dims.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            s.push_str(&expr_text(d));
        }
        s.push(']');
    }
    s
}

fn bound_text(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:?}")
    }
}

pub fn lvalue_text(lv: &LValue) -> String {
    let mut s = lv.name.clone();
    for ix in &lv.indices {
        let _ = write!(s, "[{}]", expr_text(ix));
    }
    s
}

pub fn dist_text(d: &DistCall) -> String {
    let args: Vec<String> = d.args.iter().map(expr_text).collect();
    format!("{}({})", d.dist.name(), args.join(", "))
}

pub fn expr_text(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, 0);
    s
}

// Precedence tiers; larger binds tighter.
const PREC_TERNARY: u8 = 0;
const PREC_OR: u8 = 1;
const PREC_AND: u8 = 2;
const PREC_CMP: u8 = 3;
const PREC_ADD: u8 = 4;
const PREC_MUL: u8 = 5;
const PREC_UNARY: u8 = 6;
const PREC_POSTFIX: u8 = 7;

fn bin_prec(op: BinOp) -> u8 {
    match op {
        BinOp::Or => PREC_OR,
        BinOp::And => PREC_AND,
        op if op.is_comparison() => PREC_CMP,
        BinOp::Add | BinOp::Sub => PREC_ADD,
        BinOp::Mul | BinOp::Div => PREC_MUL,
        _ => unreachable!(),
    }
}

fn write_expr(out: &mut String, e: &Expr, min_prec: u8) {
    match e {
        Expr::IntLit(v) => {
            let _ = write!(out, "{v}");
        }
        Expr::RealLit(v) => {
            let _ = write!(out, "{v:?}");
        }
        Expr::BoolLit(b) => {
            let _ = write!(out, "{b}");
        }
        Expr::Var(name) => out.push_str(name),
        Expr::Index(base, idx) => {
            let needs_parens = PREC_POSTFIX < min_prec;
            if needs_parens {
                out.push('(');
            }
            write_expr(out, base, PREC_POSTFIX);
            out.push('[');
            write_expr(out, idx, 0);
            out.push(']');
            if needs_parens {
                out.push(')');
            }
        }
        Expr::Unary(op, inner) => {
            let needs_parens = PREC_UNARY < min_prec;
            if needs_parens {
                out.push('(');
            }
            out.push(match op {
                UnOp::Neg => '-',
                UnOp::Not => '!',
            });
            write_expr(out, inner, PREC_UNARY);
            if needs_parens {
                out.push(')');
            }
        }
        Expr::Binary(op, a, b) => {
            let prec = bin_prec(*op);
            let needs_parens = prec < min_prec;
            if needs_parens {
                out.push('(');
            }
            // comparisons are non-associative; everything else is left-associative
            let (lp, rp) = if op.is_comparison() {
                (prec + 1, prec + 1)
            } else {
                (prec, prec + 1)
            };
            write_expr(out, a, lp);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, b, rp);
            if needs_parens {
                out.push(')');
            }
        }
        Expr::Cond(c, t, f) => {
            let needs_parens = PREC_TERNARY < min_prec;
            if needs_parens {
                out.push('(');
            }
            write_expr(out, c, PREC_OR);
            out.push_str(" ? ");
            write_expr(out, t, PREC_TERNARY);
            out.push_str(" : ");
            write_expr(out, f, PREC_TERNARY);
            if needs_parens {
                out.push(')');
            }
        }
        Expr::Call(func, args) => {
            out.push_str(func.name());
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, a, 0);
            }
            out.push(')');
        }
        Expr::DistLpdf(dist, value, args) => {
            out.push_str(&dist.lpdf_name());
            out.push('(');
            write_expr(out, value, 0);
            for a in args {
                out.push_str(", ");
                write_expr(out, a, 0);
            }
            out.push(')');
        }
    }
}
