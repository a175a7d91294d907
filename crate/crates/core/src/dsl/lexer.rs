use super::ast::Span;
use super::Diagnostic;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TokenKind {
    Ident(String),
    Str(String),
    /// Raw decimal text, validated for at most 6 fractional digits.
    Number(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Eq,
    Comma,
    Dot,
    Eof,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Ident(s) => format!("'{s}'"),
            TokenKind::Str(s) => format!("string \"{s}\""),
            TokenKind::Number(s) => format!("number {s}"),
            TokenKind::LBrace => "'{'".into(),
            TokenKind::RBrace => "'}'".into(),
            TokenKind::LParen => "'('".into(),
            TokenKind::RParen => "')'".into(),
            TokenKind::Eq => "'='".into(),
            TokenKind::Comma => "','".into(),
            TokenKind::Dot => "'.'".into(),
            TokenKind::Eof => "end of file".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    column: u32,
    /// Position of the last character consumed, used for the end-of-file token.
    last: Span,
}

impl<'a> Lexer<'a> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.chars.clone();
        it.next();
        it.next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        self.last = Span::new(self.line, self.column);
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn here(&self) -> Span {
        Span::new(self.line, self.column)
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Splits source text into tokens. Lexical errors are collected and the
/// offending characters skipped, so one pass reports all of them.
pub fn tokenize(text: &str) -> (Vec<Token>, Vec<Diagnostic>) {
    let mut lx = Lexer {
        chars: text.chars().peekable(),
        line: 1,
        column: 1,
        last: Span::new(1, 1),
    };
    let mut tokens = Vec::new();
    let mut diags = Vec::new();

    while let Some(c) = lx.peek() {
        let start = lx.here();
        if c.is_whitespace() {
            lx.bump();
            continue;
        }
        if c == '-' && lx.peek2() == Some('-') {
            while let Some(c) = lx.peek() {
                if c == '\n' {
                    break;
                }
                lx.bump();
            }
            continue;
        }
        let simple = match c {
            '{' => Some(TokenKind::LBrace),
            '}' => Some(TokenKind::RBrace),
            '(' => Some(TokenKind::LParen),
            ')' => Some(TokenKind::RParen),
            '=' => Some(TokenKind::Eq),
            ',' => Some(TokenKind::Comma),
            '.' => Some(TokenKind::Dot),
            _ => None,
        };
        if let Some(kind) = simple {
            lx.bump();
            tokens.push(Token { kind, span: start });
            continue;
        }
        if is_ident_start(c) {
            let mut name = String::new();
            while let Some(c) = lx.peek().filter(|&c| is_ident_continue(c)) {
                name.push(c);
                lx.bump();
            }
            tokens.push(Token {
                kind: TokenKind::Ident(name),
                span: start,
            });
            continue;
        }
        if c.is_ascii_digit() || (c == '-' && lx.peek2().is_some_and(|d| d.is_ascii_digit())) {
            let mut raw = String::new();
            if c == '-' {
                raw.push(c);
                lx.bump();
            }
            while let Some(d) = lx.peek().filter(|d| d.is_ascii_digit()) {
                raw.push(d);
                lx.bump();
            }
            let mut frac_digits = 0;
            if lx.peek() == Some('.') && lx.peek2().is_some_and(|d| d.is_ascii_digit()) {
                raw.push('.');
                lx.bump();
                while let Some(d) = lx.peek().filter(|d| d.is_ascii_digit()) {
                    raw.push(d);
                    frac_digits += 1;
                    lx.bump();
                }
            }
            if frac_digits > 6 {
                diags.push(Diagnostic::error(
                    start,
                    format!("number {raw} has more than 6 fractional digits"),
                ));
            }
            tokens.push(Token {
                kind: TokenKind::Number(raw),
                span: start,
            });
            continue;
        }
        if c == '"' {
            lx.bump();
            let mut value = String::new();
            let mut closed = false;
            while let Some(c) = lx.peek() {
                if c == '\n' {
                    break;
                }
                lx.bump();
                match c {
                    '"' => {
                        closed = true;
                        break;
                    }
                    '\\' => match lx.peek() {
                        Some(e @ ('"' | '\\')) => {
                            lx.bump();
                            value.push(e);
                        }
                        _ => diags.push(Diagnostic::error(lx.here(), "invalid escape in string")),
                    },
                    other => value.push(other),
                }
            }
            if !closed {
                diags.push(Diagnostic::error(start, "unterminated string"));
            }
            tokens.push(Token {
                kind: TokenKind::Str(value),
                span: start,
            });
            continue;
        }
        lx.bump();
        diags.push(Diagnostic::error(start, format!("unexpected character '{c}'")));
    }

    let eof_span = if tokens.is_empty() && text.is_empty() {
        Span::new(1, 1)
    } else {
        lx.last
    };
    tokens.push(Token {
        kind: TokenKind::Eof,
        span: eof_span,
    });
    (tokens, diags)
}
