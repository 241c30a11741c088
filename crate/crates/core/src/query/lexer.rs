use super::error::QueryError;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    /// Identifier or keyword, folded to lowercase.
    Ident(String),
    Number(f64),
    Str(String),
    Op(&'static str),
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn describe(&self, src: &str) -> String {
        match self.kind {
            TokenKind::Eof => "end of input".into(),
            _ => format!("{:?}", &src[self.start..self.end]),
        }
    }
}

pub const KEYWORDS: &[&str] = &[
    "select", "from", "where", "and", "order", "by", "asc", "desc", "limit", "as", "is", "not", "null",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

const OPS: &[&str] = &["&&", "<>", "!=", "<=", ">=", "=", "<", ">", "+", "-", "*", "/", "(", ")", ",", ".", ";"];

pub fn tokenize(src: &str) -> Result<Vec<Token>, QueryError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if b.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if src[i..].starts_with("--") {
            i = src[i..].find('\n').map_or(bytes.len(), |n| i + n);
            continue;
        }
        let start = i;
        if b.is_ascii_alphabetic() || b == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token { kind: TokenKind::Ident(src[start..i].to_ascii_lowercase()), start, end: i });
            continue;
        }
        if b.is_ascii_digit() || (b == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
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
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let v: f64 = src[start..i].parse().expect("lexed numeric literal");
            if !v.is_finite() {
                return Err(QueryError::Lex { position: start, ch: b as char, message: "numeric literal out of range".into() });
            }
            out.push(Token { kind: TokenKind::Number(v), start, end: i });
            continue;
        }
        if b == b'\'' {
            let mut text = String::new();
            i += 1;
            loop {
                let Some(rest) = src.get(i..).filter(|r| !r.is_empty()) else {
                    return Err(QueryError::Lex { position: start, ch: '\'', message: "unterminated string literal".into() });
                };
                let ch = rest.chars().next().expect("non-empty");
                if ch == '\'' {
                    if rest[1..].starts_with('\'') {
                        text.push('\'');
                        i += 2;
                        continue;
                    }
                    i += 1;
                    break;
                }
                text.push(ch);
                i += ch.len_utf8();
            }
            out.push(Token { kind: TokenKind::Str(text), start, end: i });
            continue;
        }
        if let Some(op) = OPS.iter().find(|op| src[i..].starts_with(**op)) {
            i += op.len();
            out.push(Token { kind: TokenKind::Op(op), start, end: i });
            continue;
        }
        let ch = src[i..].chars().next().expect("non-empty");
        return Err(QueryError::Lex { position: start, ch, message: format!("unexpected character {ch:?}") });
    }
    out.push(Token { kind: TokenKind::Eof, start: src.len(), end: src.len() });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn basic_tokens() {
        assert_eq!(kinds("SELECT 1"), vec![TokenKind::Ident("select".into()), TokenKind::Number(1.0), TokenKind::Eof]);
        assert_eq!(
            kinds("the_geom && rast"),
            vec![TokenKind::Ident("the_geom".into()), TokenKind::Op("&&"), TokenKind::Ident("rast".into()), TokenKind::Eof]
        );
        assert_eq!(
            kinds("1.5e3 .5 2E-2 'it''s' -- note\n<>"),
            vec![
                TokenKind::Number(1500.0),
                TokenKind::Number(0.5),
                TokenKind::Number(0.02),
                TokenKind::Str("it's".into()),
                TokenKind::Op("<>"),
                TokenKind::Eof
            ]
        );
    }

    #[test]
    fn qualified_names_split_on_dot() {
        assert_eq!(
            kinds("R.rast"),
            vec![TokenKind::Ident("r".into()), TokenKind::Op("."), TokenKind::Ident("rast".into()), TokenKind::Eof]
        );
    }

    #[test]
    fn errors_point_into_the_input() {
        match tokenize("SELECT 'abc") {
            Err(QueryError::Lex { position, ch, .. }) => assert_eq!((position, ch), (7, '\'')),
            other => panic!("{other:?}"),
        }
        match tokenize("SELECT a # b") {
            Err(QueryError::Lex { position, ch, .. }) => assert_eq!((position, ch), (9, '#')),
            other => panic!("{other:?}"),
        }
        assert!(matches!(tokenize("SELECT 1e999"), Err(QueryError::Lex { position: 7, .. })));
    }

    #[test]
    fn spans_cover_source_text() {
        let src = "SELECT (stats).max FROM t";
        for t in tokenize(src).unwrap() {
            assert!(t.start <= t.end && t.end <= src.len());
        }
    }
}
