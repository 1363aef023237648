use super::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Keyword,
    Ident,
    QuotedIdent,
    /// An identifier immediately followed by `(`.
    Function,
    Number,
    Str,
    Operator,
    Star,
    Comma,
    Dot,
    LParen,
    RParen,
    Semicolon,
    /// A recursively normalized sub-select, rendered as one atom.
    Subquery,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub offset: usize,
}

impl Token {
    pub fn is_kw(&self, kw: &str) -> bool {
        self.kind == TokenKind::Keyword && self.text == kw
    }

    pub fn is_literal(&self) -> bool {
        matches!(self.kind, TokenKind::Number | TokenKind::Str)
    }
}

const KEYWORDS: &[&str] = &[
    "all", "and", "as", "asc", "between", "by", "case", "cross", "desc", "distinct", "else",
    "end", "escape", "except", "exists", "false", "from", "full", "glob", "group", "having",
    "in", "inner", "intersect", "is", "join", "left", "like", "limit", "natural", "not", "null",
    "offset", "on", "or", "order", "outer", "right", "select", "then", "true", "union", "using",
    "when", "where",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.binary_search(&word).is_ok()
}

pub fn lex(sql: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = sql.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
            }
            b'-' if bytes.get(i + 1) == Some(&b'-') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'/' if bytes.get(i + 1) == Some(&b'*') => {
                let end = sql[i + 2..]
                    .find("*/")
                    .ok_or_else(|| ParseError::new(start, "unterminated block comment"))?;
                i += 2 + end + 2;
            }
            b'\'' => {
                i += 1;
                loop {
                    match bytes.get(i) {
                        None => return Err(ParseError::new(start, "unterminated string literal")),
                        Some(b'\'') if bytes.get(i + 1) == Some(&b'\'') => i += 2,
                        Some(b'\'') => {
                            i += 1;
                            break;
                        }
                        Some(_) => i += 1,
                    }
                }
                tokens.push(tok(TokenKind::Str, &sql[start..i], start));
            }
            b'"' | b'`' | b'[' => {
                let close = match c {
                    b'[' => b']',
                    other => other,
                };
                i += 1;
                while i < bytes.len() && bytes[i] != close {
                    i += 1;
                }
                if i >= bytes.len() {
                    return Err(ParseError::new(start, "unterminated quoted identifier"));
                }
                i += 1;
                tokens.push(tok(TokenKind::QuotedIdent, &sql[start..i], start));
            }
            b'0'..=b'9' => {
                i = scan_number(bytes, i);
                tokens.push(tok(TokenKind::Number, &sql[start..i], start));
            }
            b'.' if bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => {
                i = scan_number(bytes, i);
                tokens.push(tok(TokenKind::Number, &sql[start..i], start));
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'$') {
                    i += 1;
                }
                let word = &sql[start..i];
                let lower = word.to_ascii_lowercase();
                if is_keyword(&lower) {
                    tokens.push(tok(TokenKind::Keyword, &lower, start));
                } else {
                    tokens.push(tok(TokenKind::Ident, word, start));
                }
            }
            b',' => {
                i += 1;
                tokens.push(tok(TokenKind::Comma, ",", start));
            }
            b'.' => {
                i += 1;
                tokens.push(tok(TokenKind::Dot, ".", start));
            }
            b'(' => {
                i += 1;
                tokens.push(tok(TokenKind::LParen, "(", start));
            }
            b')' => {
                i += 1;
                tokens.push(tok(TokenKind::RParen, ")", start));
            }
            b';' => {
                i += 1;
                tokens.push(tok(TokenKind::Semicolon, ";", start));
            }
            b'*' => {
                i += 1;
                tokens.push(tok(TokenKind::Star, "*", start));
            }
            b'<' | b'>' | b'=' | b'!' | b'|' => {
                let two = sql.get(i..i + 2).unwrap_or("");
                let op = match two {
                    "<=" | ">=" | "<>" | "||" | "==" => {
                        i += 2;
                        if two == "==" {
                            "="
                        } else {
                            two
                        }
                    }
                    "!=" => {
                        i += 2;
                        "<>"
                    }
                    _ if c == b'!' || c == b'|' => {
                        return Err(ParseError::new(start, format!("unexpected character '{}'", c as char)));
                    }
                    _ => {
                        i += 1;
                        &sql[start..i]
                    }
                };
                tokens.push(tok(TokenKind::Operator, op, start));
            }
            b'+' | b'-' | b'/' | b'%' => {
                i += 1;
                tokens.push(tok(TokenKind::Operator, &sql[start..i], start));
            }
            _ => {
                let ch = sql[i..].chars().next().unwrap_or('?');
                let mapped = match ch {
                    '≥' => ">=",
                    '≤' => "<=",
                    '≠' => "<>",
                    _ => return Err(ParseError::new(start, format!("unexpected character '{ch}'"))),
                };
                i += ch.len_utf8();
                tokens.push(tok(TokenKind::Operator, mapped, start));
            }
        }
    }

    for idx in 0..tokens.len() {
        if tokens[idx].kind == TokenKind::Ident
            && tokens.get(idx + 1).is_some_and(|t| t.kind == TokenKind::LParen)
        {
            tokens[idx].kind = TokenKind::Function;
            tokens[idx].text = tokens[idx].text.to_ascii_lowercase();
        }
    }
    Ok(tokens)
}

fn scan_number(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
        i += 1;
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
    i
}

fn tok(kind: TokenKind, text: &str, offset: usize) -> Token {
    Token { kind, text: text.to_string(), offset }
}

/// Joins tokens into a single normalized string.
pub fn render(tokens: &[Token]) -> String {
    let mut out = String::new();
    let mut prev: Option<&Token> = None;
    for t in tokens {
        if let Some(p) = prev {
            if needs_space(p, t) {
                out.push(' ');
            }
        }
        out.push_str(&t.text);
        prev = Some(t);
    }
    out
}

fn needs_space(prev: &Token, cur: &Token) -> bool {
    use TokenKind::*;
    if matches!(prev.kind, LParen | Dot) {
        return false;
    }
    if matches!(cur.kind, RParen | Comma | Dot) {
        return false;
    }
    !(cur.kind == LParen && prev.kind == Function)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(sql: &str) -> Vec<String> {
        lex(sql).unwrap().into_iter().map(|t| t.text).collect()
    }

    #[test]
    fn keywords_sorted_for_binary_search() {
        let mut sorted = KEYWORDS.to_vec();
        sorted.sort_unstable();
        assert_eq!(sorted, KEYWORDS);
    }

    #[test]
    fn folds_keywords_and_functions_but_not_identifiers() {
        assert_eq!(texts("SELECT COUNT(*) FROM Singer"), ["select", "count", "(", "*", ")", "from", "Singer"]);
    }

    #[test]
    fn unicode_and_bang_comparisons_normalize() {
        assert_eq!(texts("a ≥ 1"), ["a", ">=", "1"]);
        assert_eq!(texts("a != 1"), ["a", "<>", "1"]);
        assert_eq!(texts("a ≠ 1"), ["a", "<>", "1"]);
    }

    #[test]
    fn literals_kept_verbatim() {
        assert_eq!(texts("x = 'It''s' AND y = 1.50e3"), ["x", "=", "'It''s'", "and", "y", "=", "1.50e3"]);
    }

    #[test]
    fn comments_skipped() {
        assert_eq!(texts("select a -- trailing\n from /* x */ t"), ["select", "a", "from", "t"]);
    }

    #[test]
    fn errors_carry_offsets() {
        let err = lex("select 'abc").unwrap_err();
        assert_eq!(err.offset, 7);
        let err = lex("select a # b").unwrap_err();
        assert_eq!(err.offset, 9);
    }

    #[test]
    fn render_spacing() {
        let toks = lex("SELECT count( * ) , T1 . name FROM t WHERE x IN ( 1 , 2 )").unwrap();
        assert_eq!(render(&toks), "select count(*), T1.name from t where x in (1, 2)");
    }
}
