use super::{ParseError, ParseErrorKind, Pos};

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    /// Numeric literal, kept as text so integers and reals can be told apart.
    Number(String),
    Str(String),
    Semi,
    Comma,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Arrow,
    EqEq,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier '{s}'"),
            Tok::Number(s) => format!("number {s}"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::Eof => "end of input".into(),
            other => format!("'{}'", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::Semi => ";",
            Tok::Comma => ",",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Arrow => "->",
            Tok::EqEq => "==",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Caret => "^",
            _ => "?",
        }
    }
}

/// Splits source text into tokens with their positions.
pub fn tokenize(src: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, col, msg: String| ParseError { pos: Pos { line, col }, kind: ParseErrorKind::Syntax(msg) };
    while i < chars.len() {
        let ch = chars[i];
        let start = Pos { line, col };
        if ch == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if ch.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if ch == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if ch.is_ascii_alphabetic() || ch == '_' {
            let begin = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - begin;
            out.push((Tok::Ident(chars[begin..i].iter().collect()), start));
            continue;
        }
        if ch.is_ascii_digit() || (ch == '.' && chars.get(i + 1).is_some_and(|c| c.is_ascii_digit())) {
            let begin = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            col += i - begin;
            out.push((Tok::Number(chars[begin..i].iter().collect()), start));
            continue;
        }
        if ch == '"' {
            let begin = i + 1;
            let mut j = begin;
            while j < chars.len() && chars[j] != '"' && chars[j] != '\n' {
                j += 1;
            }
            if j >= chars.len() || chars[j] != '"' {
                return Err(err(line, col, "unterminated string".into()));
            }
            out.push((Tok::Str(chars[begin..j].iter().collect()), start));
            col += j + 1 - i;
            i = j + 1;
            continue;
        }
        let two = |c: char| chars.get(i + 1) == Some(&c);
        let (tok, len) = match ch {
            ';' => (Tok::Semi, 1),
            ',' => (Tok::Comma, 1),
            '(' => (Tok::LParen, 1),
            ')' => (Tok::RParen, 1),
            '[' => (Tok::LBracket, 1),
            ']' => (Tok::RBracket, 1),
            '{' => (Tok::LBrace, 1),
            '}' => (Tok::RBrace, 1),
            '-' if two('>') => (Tok::Arrow, 2),
            '=' if two('=') => (Tok::EqEq, 2),
            '+' => (Tok::Plus, 1),
            '-' => (Tok::Minus, 1),
            '*' => (Tok::Star, 1),
            '/' => (Tok::Slash, 1),
            '^' => (Tok::Caret, 1),
            other => return Err(err(line, col, format!("unexpected character {other:?}"))),
        };
        out.push((tok, start));
        i += len;
        col += len;
    }
    out.push((Tok::Eof, Pos { line, col }));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_and_symbols() {
        let toks: Vec<Tok> = tokenize("rx(1.5e-3) q[0]; // hi\n-> ==").unwrap().into_iter().map(|t| t.0).collect();
        assert_eq!(
            toks,
            vec![
                Tok::Ident("rx".into()),
                Tok::LParen,
                Tok::Number("1.5e-3".into()),
                Tok::RParen,
                Tok::Ident("q".into()),
                Tok::LBracket,
                Tok::Number("0".into()),
                Tok::RBracket,
                Tok::Semi,
                Tok::Arrow,
                Tok::EqEq,
                Tok::Eof
            ]
        );
    }

    #[test]
    fn positions_are_one_based() {
        let toks = tokenize("a\n  b").unwrap();
        assert_eq!(toks[0].1, Pos { line: 1, col: 1 });
        assert_eq!(toks[1].1, Pos { line: 2, col: 3 });
    }

    #[test]
    fn bad_character() {
        let e = tokenize("qreg q[1];\n  $").unwrap_err();
        assert_eq!(e.pos, Pos { line: 2, col: 3 });
    }
}
