//! Tokenizer for the loop DSL.

use std::fmt;

use crate::diagnostic::{Category, Diagnostic, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Keyword {
    Params,
    Array,
    For,
    In,
    Step,
    If,
    Else,
    Read,
    Write,
    Update,
}

impl Keyword {
    pub const ALL: [Keyword; 10] = [
        Keyword::Params,
        Keyword::Array,
        Keyword::For,
        Keyword::In,
        Keyword::Step,
        Keyword::If,
        Keyword::Else,
        Keyword::Read,
        Keyword::Write,
        Keyword::Update,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Keyword::Params => "params",
            Keyword::Array => "array",
            Keyword::For => "for",
            Keyword::In => "in",
            Keyword::Step => "step",
            Keyword::If => "if",
            Keyword::Else => "else",
            Keyword::Read => "read",
            Keyword::Write => "write",
            Keyword::Update => "update",
        }
    }

    fn from_word(word: &str) -> Option<Keyword> {
        Keyword::ALL.into_iter().find(|k| k.as_str() == word)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Plus,
    Minus,
    Star,
    Slash,
    AndAnd,
    DotDot,
    Lt,
    Le,
    EqEq,
    Ge,
    Gt,
}

impl Op {
    pub fn as_str(self) -> &'static str {
        match self {
            Op::Plus => "+",
            Op::Minus => "-",
            Op::Star => "*",
            Op::Slash => "/",
            Op::AndAnd => "&&",
            Op::DotDot => "..",
            Op::Lt => "<",
            Op::Le => "<=",
            Op::EqEq => "==",
            Op::Ge => ">=",
            Op::Gt => ">",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Delim {
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Semi,
    Comma,
}

impl Delim {
    pub fn as_str(self) -> &'static str {
        match self {
            Delim::LBracket => "[",
            Delim::RBracket => "]",
            Delim::LBrace => "{",
            Delim::RBrace => "}",
            Delim::LParen => "(",
            Delim::RParen => ")",
            Delim::Semi => ";",
            Delim::Comma => ",",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Keyword(Keyword),
    Ident,
    Int(i64),
    Op(Op),
    Delim(Delim),
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Keyword(k) => write!(f, "`{}`", k.as_str()),
            TokenKind::Ident => f.write_str("identifier"),
            TokenKind::Int(_) => f.write_str("integer"),
            TokenKind::Op(o) => write!(f, "`{}`", o.as_str()),
            TokenKind::Delim(d) => write!(f, "`{}`", d.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub span: Span,
}

/// Splits `source` into tokens, dropping whitespace and `//` comments.
pub fn tokenize(source: &str) -> Result<Vec<Token>, Diagnostic> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let c = bytes[pos];
        if c.is_ascii_whitespace() {
            pos += 1;
            continue;
        }
        if c == b'/' && bytes.get(pos + 1) == Some(&b'/') {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        let kind = if c.is_ascii_alphabetic() || c == b'_' {
            while pos < bytes.len() && (bytes[pos].is_ascii_alphanumeric() || bytes[pos] == b'_') {
                pos += 1;
            }
            match Keyword::from_word(&source[start..pos]) {
                Some(k) => TokenKind::Keyword(k),
                None => TokenKind::Ident,
            }
        } else if c.is_ascii_digit() {
            while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                pos += 1;
            }
            let text = &source[start..pos];
            let value = text.parse::<i64>().map_err(|_| {
                Diagnostic::new(
                    Category::Lexical,
                    format!("integer literal `{text}` does not fit in 64 bits"),
                    Span::new(start, pos),
                )
            })?;
            TokenKind::Int(value)
        } else {
            let next = bytes.get(pos + 1).copied();
            let (kind, len) = match (c, next) {
                (b'.', Some(b'.')) => (TokenKind::Op(Op::DotDot), 2),
                (b'&', Some(b'&')) => (TokenKind::Op(Op::AndAnd), 2),
                (b'<', Some(b'=')) => (TokenKind::Op(Op::Le), 2),
                (b'>', Some(b'=')) => (TokenKind::Op(Op::Ge), 2),
                (b'=', Some(b'=')) => (TokenKind::Op(Op::EqEq), 2),
                (b'<', _) => (TokenKind::Op(Op::Lt), 1),
                (b'>', _) => (TokenKind::Op(Op::Gt), 1),
                (b'+', _) => (TokenKind::Op(Op::Plus), 1),
                (b'-', _) => (TokenKind::Op(Op::Minus), 1),
                (b'*', _) => (TokenKind::Op(Op::Star), 1),
                (b'/', _) => (TokenKind::Op(Op::Slash), 1),
                (b'[', _) => (TokenKind::Delim(Delim::LBracket), 1),
                (b']', _) => (TokenKind::Delim(Delim::RBracket), 1),
                (b'{', _) => (TokenKind::Delim(Delim::LBrace), 1),
                (b'}', _) => (TokenKind::Delim(Delim::RBrace), 1),
                (b'(', _) => (TokenKind::Delim(Delim::LParen), 1),
                (b')', _) => (TokenKind::Delim(Delim::RParen), 1),
                (b';', _) => (TokenKind::Delim(Delim::Semi), 1),
                (b',', _) => (TokenKind::Delim(Delim::Comma), 1),
                _ => {
                    let ch = source[start..].chars().next().unwrap_or('?');
                    return Err(Diagnostic::new(
                        Category::Lexical,
                        format!("unexpected character `{ch}`"),
                        Span::new(start, start + ch.len_utf8()),
                    ));
                }
            };
            pos += len;
            kind
        };
        tokens.push(Token { kind, text: source[start..pos].to_string(), span: Span::new(start, pos) });
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn loop_header() {
        assert_eq!(
            kinds("for i in 0 .. N"),
            vec![
                TokenKind::Keyword(Keyword::For),
                TokenKind::Ident,
                TokenKind::Keyword(Keyword::In),
                TokenKind::Int(0),
                TokenKind::Op(Op::DotDot),
                TokenKind::Ident,
            ]
        );
    }

    #[test]
    fn access_statement() {
        let toks = tokenize("read A[i];").unwrap();
        let texts: Vec<_> = toks.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(texts, ["read", "A", "[", "i", "]", ";"]);
        assert_eq!(toks[0].kind, TokenKind::Keyword(Keyword::Read));
        assert_eq!(toks[2].kind, TokenKind::Delim(Delim::LBracket));
        assert_eq!(toks[3].span, Span::new(7, 8));
    }

    #[test]
    fn rejects_unknown_character() {
        let err = tokenize("@").unwrap_err();
        assert_eq!(err.category, Category::Lexical);
        assert_eq!(err.span(), Some(Span::new(0, 1)));
    }

    #[test]
    fn skips_comments_and_handles_adjacent_ranges() {
        assert_eq!(
            kinds("// hi\n0..N // trailing"),
            vec![TokenKind::Int(0), TokenKind::Op(Op::DotDot), TokenKind::Ident]
        );
        assert_eq!(kinds("a<=b&&c==d"), kinds("a <= b && c == d"));
    }

    #[test]
    fn literal_overflow_is_lexical() {
        let err = tokenize("99999999999999999999").unwrap_err();
        assert_eq!(err.category, Category::Lexical);
    }

    #[test]
    fn keywords_are_exactly_the_dsl_set() {
        let names: Vec<_> = Keyword::ALL.iter().map(|k| k.as_str()).collect();
        assert_eq!(names, ["params", "array", "for", "in", "step", "if", "else", "read", "write", "update"]);
        assert_eq!(kinds("forx"), vec![TokenKind::Ident]);
    }
}
