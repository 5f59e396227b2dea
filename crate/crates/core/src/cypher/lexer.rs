//! Tokenizer for the query language.

use std::fmt;

use super::error::{CypherError, Pos};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    /// Identifier or keyword; keyword matching is case-insensitive and done
    /// by the parser.
    Word(String),
    Str(String),
    /// Unsigned integer digits; sign and range are handled by the parser.
    Int(String),
    Float(f64),
    Param(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Colon,
    Comma,
    Dot,
    DotDot,
    Dash,
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
    Ne,
    Star,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Word(w) => write!(f, "`{w}`"),
            Tok::Str(_) => f.write_str("string literal"),
            Tok::Int(i) => write!(f, "`{i}`"),
            Tok::Float(x) => write!(f, "`{x:?}`"),
            Tok::Param(p) => write!(f, "`${p}`"),
            Tok::Eof => f.write_str("end of input"),
            other => write!(f, "`{}`", other.symbol()),
        }
    }
}

impl Tok {
    pub fn symbol(&self) -> &'static str {
        match self {
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Colon => ":",
            Tok::Comma => ",",
            Tok::Dot => ".",
            Tok::DotDot => "..",
            Tok::Dash => "-",
            Tok::Lt => "<",
            Tok::Gt => ">",
            Tok::Le => "<=",
            Tok::Ge => ">=",
            Tok::Eq => "=",
            Tok::Ne => "<>",
            Tok::Star => "*",
            _ => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, CypherError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let (mut line, mut col) = (1usize, 1usize);

    macro_rules! advance {
        ($n:expr) => {
            for _ in 0..$n {
                if chars[i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
        };
    }

    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, column: col };
        if c.is_whitespace() {
            advance!(1);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                advance!(1);
            }
            continue;
        }
        let next = chars.get(i + 1).copied();
        let simple = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            ':' => Some(Tok::Colon),
            ',' => Some(Tok::Comma),
            '-' => Some(Tok::Dash),
            '*' => Some(Tok::Star),
            '=' => Some(Tok::Eq),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push(Token { tok, pos });
            advance!(1);
            continue;
        }
        match c {
            '.' if next == Some('.') => {
                out.push(Token { tok: Tok::DotDot, pos });
                advance!(2);
            }
            '.' => {
                out.push(Token { tok: Tok::Dot, pos });
                advance!(1);
            }
            '<' => {
                let (tok, n) = match next {
                    Some('>') => (Tok::Ne, 2),
                    Some('=') => (Tok::Le, 2),
                    _ => (Tok::Lt, 1),
                };
                out.push(Token { tok, pos });
                advance!(n);
            }
            '>' => {
                let (tok, n) = if next == Some('=') {
                    (Tok::Ge, 2)
                } else {
                    (Tok::Gt, 1)
                };
                out.push(Token { tok, pos });
                advance!(n);
            }
            '\'' | '"' => {
                let quote = c;
                advance!(1);
                let mut s = String::new();
                loop {
                    let Some(&ch) = chars.get(i) else {
                        return Err(CypherError::lex(pos, "unterminated string literal"));
                    };
                    if ch == quote {
                        advance!(1);
                        break;
                    }
                    if ch == '\\' {
                        let esc = chars.get(i + 1).copied();
                        let mapped = match esc {
                            Some('\\') => '\\',
                            Some('\'') => '\'',
                            Some('"') => '"',
                            Some('n') => '\n',
                            Some('t') => '\t',
                            Some('r') => '\r',
                            _ => {
                                let here = Pos { line, column: col };
                                return Err(CypherError::lex(here, "invalid escape sequence"));
                            }
                        };
                        s.push(mapped);
                        advance!(2);
                        continue;
                    }
                    s.push(ch);
                    advance!(1);
                }
                out.push(Token { tok: Tok::Str(s), pos });
            }
            '$' => {
                advance!(1);
                let start = i;
                while i < chars.len() && is_word_char(chars[i]) {
                    advance!(1);
                }
                if start == i {
                    return Err(CypherError::lex(pos, "expected parameter name after `$`"));
                }
                out.push(Token {
                    tok: Tok::Param(chars[start..i].iter().collect()),
                    pos,
                });
            }
            '`' => {
                advance!(1);
                let start = i;
                while i < chars.len() && chars[i] != '`' {
                    advance!(1);
                }
                if i == chars.len() {
                    return Err(CypherError::lex(pos, "unterminated quoted identifier"));
                }
                let word: String = chars[start..i].iter().collect();
                advance!(1);
                out.push(Token { tok: Tok::Word(word), pos });
            }
            d if d.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    advance!(1);
                }
                let mut is_float = false;
                if i < chars.len()
                    && chars[i] == '.'
                    && chars.get(i + 1).is_some_and(|c| c.is_ascii_digit())
                {
                    is_float = true;
                    advance!(1);
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        advance!(1);
                    }
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if chars.get(j).is_some_and(|c| *c == '+' || *c == '-') {
                        j += 1;
                    }
                    if chars.get(j).is_some_and(|c| c.is_ascii_digit()) {
                        is_float = true;
                        advance!(j - i);
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            advance!(1);
                        }
                    }
                }
                let text: String = chars[start..i].iter().collect();
                if i < chars.len() && is_word_char(chars[i]) {
                    return Err(CypherError::lex(pos, "malformed number"));
                }
                let tok = if is_float {
                    Tok::Float(
                        text.parse()
                            .map_err(|_| CypherError::lex(pos, "malformed number"))?,
                    )
                } else {
                    Tok::Int(text)
                };
                out.push(Token { tok, pos });
            }
            w if is_word_start(w) => {
                let start = i;
                while i < chars.len() && is_word_char(chars[i]) {
                    advance!(1);
                }
                out.push(Token {
                    tok: Tok::Word(chars[start..i].iter().collect()),
                    pos,
                });
            }
            other => {
                return Err(CypherError::lex(pos, format!("unexpected character `{other}`")));
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        pos: Pos { line, column: col },
    });
    Ok(out)
}

fn is_word_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}
