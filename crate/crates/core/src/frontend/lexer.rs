//! Hand-rolled lexer producing spanned tokens.

use crate::ast::Span;
use crate::frontend::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    IntLit(i64),
    RealLit(f64),
    // keywords
    KwData,
    KwModel,
    KwGenQuant,
    KwInt,
    KwReal,
    KwBool,
    KwIf,
    KwElse,
    KwFor,
    KwIn,
    KwTarget,
    KwTrue,
    KwFalse,
    // punctuation
    Semi,
    Comma,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Lt,
    Gt,
    Le,
    Ge,
    EqEq,
    NotEq,
    Assign,
    PlusAssign,
    Tilde,
    Plus,
    Minus,
    Star,
    Slash,
    Question,
    Colon,
    AndAnd,
    OrOr,
    Bang,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::IntLit(v) => format!("integer literal `{v}`"),
            Tok::RealLit(v) => format!("real literal `{v:?}`"),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", other.text()),
        }
    }

    fn text(&self) -> &'static str {
        match self {
            Tok::KwData => "data",
            Tok::KwModel => "model",
            Tok::KwGenQuant => "genquant",
            Tok::KwInt => "int",
            Tok::KwReal => "real",
            Tok::KwBool => "bool",
            Tok::KwIf => "if",
            Tok::KwElse => "else",
            Tok::KwFor => "for",
            Tok::KwIn => "in",
            Tok::KwTarget => "target",
            Tok::KwTrue => "true",
            Tok::KwFalse => "false",
            Tok::Semi => ";",
            Tok::Comma => ",",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Lt => "<",
            Tok::Gt => ">",
            Tok::Le => "<=",
            Tok::Ge => ">=",
            Tok::EqEq => "==",
            Tok::NotEq => "!=",
            Tok::Assign => "=",
            Tok::PlusAssign => "+=",
            Tok::Tilde => "~",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Question => "?",
            Tok::Colon => ":",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            Tok::Bang => "!",
            _ => "<token>",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub fn lex(source: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        // whitespace (LF and CRLF both fine)
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        // line comments
        if c == b'/' && i + 1 < bytes.len() && bytes[i + 1] == b'/' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        // identifiers and keywords
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let word = &source[start..i];
            let tok = match word {
                "data" => Tok::KwData,
                "model" => Tok::KwModel,
                "genquant" => Tok::KwGenQuant,
                "int" => Tok::KwInt,
                "real" => Tok::KwReal,
                "bool" => Tok::KwBool,
                "if" => Tok::KwIf,
                "else" => Tok::KwElse,
                "for" => Tok::KwFor,
                "in" => Tok::KwIn,
                "target" => Tok::KwTarget,
                "true" => Tok::KwTrue,
                "false" => Tok::KwFalse,
                _ => Tok::Ident(word.to_string()),
            };
            tokens.push(Token {
                tok,
                span: Span::new(start, i),
            });
            continue;
        }
        // numeric literals: digits, optional fraction, optional exponent
        if c.is_ascii_digit() {
            let mut is_real = false;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' && i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit() {
                is_real = true;
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    is_real = true;
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &source[start..i];
            let span = Span::new(start, i);
            let tok = if is_real {
                let v: f64 = text
                    .parse()
                    .map_err(|_| ParseError::lexical(span, format!("invalid real literal `{text}`")))?;
                Tok::RealLit(v)
            } else {
                let v: i64 = text
                    .parse()
                    .map_err(|_| ParseError::lexical(span, format!("integer literal `{text}` out of range")))?;
                Tok::IntLit(v)
            };
            tokens.push(Token { tok, span });
            continue;
        }
        // operators and punctuation
        let two = if i + 1 < bytes.len() {
            &source[i..i + 2]
        } else {
            ""
        };
        let (tok, len) = match two {
            "<=" => (Tok::Le, 2),
            ">=" => (Tok::Ge, 2),
            "==" => (Tok::EqEq, 2),
            "!=" => (Tok::NotEq, 2),
            "+=" => (Tok::PlusAssign, 2),
            "&&" => (Tok::AndAnd, 2),
            "||" => (Tok::OrOr, 2),
            _ => match c {
                b';' => (Tok::Semi, 1),
                b',' => (Tok::Comma, 1),
                b'(' => (Tok::LParen, 1),
                b')' => (Tok::RParen, 1),
                b'{' => (Tok::LBrace, 1),
                b'}' => (Tok::RBrace, 1),
                b'[' => (Tok::LBracket, 1),
                b']' => (Tok::RBracket, 1),
                b'<' => (Tok::Lt, 1),
                b'>' => (Tok::Gt, 1),
                b'=' => (Tok::Assign, 1),
                b'~' => (Tok::Tilde, 1),
                b'+' => (Tok::Plus, 1),
                b'-' => (Tok::Minus, 1),
                b'*' => (Tok::Star, 1),
                b'/' => (Tok::Slash, 1),
                b'?' => (Tok::Question, 1),
                b':' => (Tok::Colon, 1),
                b'!' => (Tok::Bang, 1),
                other => {
                    return Err(ParseError::lexical(
                        Span::new(start, start + 1),
                        format!("unexpected character `{}`", other as char),
                    ))
                }
            },
        };
        tokens.push(Token {
            tok,
            span: Span::new(start, start + len),
        });
        i += len;
    }
    tokens.push(Token {
        tok: Tok::Eof,
        span: Span::new(bytes.len(), bytes.len()),
    });
    Ok(tokens)
}
