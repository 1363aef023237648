use serde::{Deserialize, Serialize};
use std::fmt;

use super::lexer::{lex, render, Token, TokenKind};
use super::ParseError;

/// Clause kinds in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ClauseKind {
    Select,
    From,
    Join,
    Where,
    GroupBy,
    Having,
    OrderBy,
    Limit,
    Other,
}

impl ClauseKind {
    pub const ALL: [ClauseKind; 9] = [
        ClauseKind::Select,
        ClauseKind::From,
        ClauseKind::Join,
        ClauseKind::Where,
        ClauseKind::GroupBy,
        ClauseKind::Having,
        ClauseKind::OrderBy,
        ClauseKind::Limit,
        ClauseKind::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClauseKind::Select => "SELECT",
            ClauseKind::From => "FROM",
            ClauseKind::Join => "JOIN",
            ClauseKind::Where => "WHERE",
            ClauseKind::GroupBy => "GROUP_BY",
            ClauseKind::Having => "HAVING",
            ClauseKind::OrderBy => "ORDER_BY",
            ClauseKind::Limit => "LIMIT",
            ClauseKind::Other => "OTHER",
        }
    }
}

impl fmt::Display for ClauseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClauseSegment {
    pub kind: ClauseKind,
    pub elements: Vec<String>,
}

/// A query split into normalized clause segments.
///
/// Element strings are lexically normalized SQL fragments: keywords and
/// function names are lower-cased, whitespace is collapsed, identifiers and
/// literals are kept as written. WHERE and HAVING are split into top-level
/// conjuncts; sub-selects are normalized recursively and kept as one element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenizedQuery {
    pub segments: Vec<ClauseSegment>,
}

pub(crate) const DISTINCT_MARKER: &str = "distinct";

impl TokenizedQuery {
    pub fn segment(&self, kind: ClauseKind) -> Option<&ClauseSegment> {
        self.segments.iter().find(|s| s.kind == kind)
    }

    pub fn elements(&self, kind: ClauseKind) -> &[String] {
        self.segment(kind).map(|s| s.elements.as_slice()).unwrap_or(&[])
    }

    pub fn has_clause(&self, kind: ClauseKind) -> bool {
        self.segment(kind).is_some()
    }

    pub fn is_distinct(&self) -> bool {
        self.elements(ClauseKind::Select).first().is_some_and(|e| e == DISTINCT_MARKER)
    }

    /// Total number of elements across all segments.
    pub fn len(&self) -> usize {
        self.segments.iter().map(|s| s.elements.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Serializes the normal form back to SQL. Tokenizing the result yields
    /// an identical `TokenizedQuery`.
    pub fn to_sql(&self) -> String {
        let mut out = String::new();
        for seg in &self.segments {
            let els = &seg.elements;
            match seg.kind {
                ClauseKind::Select => {
                    out.push_str("select ");
                    let cols: Vec<&str> = if self.is_distinct() {
                        out.push_str("distinct ");
                        els[1..].iter().map(String::as_str).collect()
                    } else {
                        els.iter().map(String::as_str).collect()
                    };
                    out.push_str(&cols.join(", "));
                }
                ClauseKind::From => push_clause(&mut out, "from", &els.join(", ")),
                ClauseKind::Join => push_clause(&mut out, "", &els.join(" ")),
                ClauseKind::Where => push_clause(&mut out, "where", &els.join(" and ")),
                ClauseKind::GroupBy => push_clause(&mut out, "group by", &els.join(", ")),
                ClauseKind::Having => push_clause(&mut out, "having", &els.join(" and ")),
                ClauseKind::OrderBy => push_clause(&mut out, "order by", &els.join(", ")),
                ClauseKind::Limit => push_clause(&mut out, "limit", &els.join(" ")),
                ClauseKind::Other => push_clause(&mut out, "", &els.join(" ")),
            }
        }
        out
    }
}

fn push_clause(out: &mut String, keyword: &str, body: &str) {
    if !out.is_empty() {
        out.push(' ');
    }
    if !keyword.is_empty() {
        out.push_str(keyword);
        out.push(' ');
    }
    out.push_str(body);
}

impl fmt::Display for TokenizedQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_sql())
    }
}

pub fn tokenize_sql(sql: &str) -> Result<TokenizedQuery, ParseError> {
    let mut tokens = lex(sql)?;
    while tokens.last().is_some_and(|t| t.kind == TokenKind::Semicolon) {
        tokens.pop();
    }
    if let Some(semi) = tokens.iter().find(|t| t.kind == TokenKind::Semicolon) {
        return Err(ParseError::new(semi.offset, "multiple statements are not supported"));
    }
    if tokens.is_empty() {
        return Err(ParseError::new(0, "empty query"));
    }
    check_balance(&tokens)?;
    segment_statement(&tokens, sql.len())
}

fn check_balance(tokens: &[Token]) -> Result<(), ParseError> {
    let mut stack = Vec::new();
    for t in tokens {
        match t.kind {
            TokenKind::LParen => stack.push(t.offset),
            TokenKind::RParen => {
                if stack.pop().is_none() {
                    return Err(ParseError::new(t.offset, "unmatched ')'"));
                }
            }
            _ => {}
        }
    }
    match stack.pop() {
        Some(offset) => Err(ParseError::new(offset, "unclosed '('")),
        None => Ok(()),
    }
}

/// Iterates `(index, depth)` where depth is the paren depth *before* the token.
fn depths(tokens: &[Token]) -> impl Iterator<Item = (usize, usize)> + '_ {
    let mut depth = 0usize;
    tokens.iter().enumerate().map(move |(i, t)| {
        let d = depth;
        match t.kind {
            TokenKind::LParen => depth += 1,
            TokenKind::RParen => depth = depth.saturating_sub(1),
            _ => {}
        }
        if t.kind == TokenKind::RParen {
            (i, depth)
        } else {
            (i, d)
        }
    })
}

fn top_level(tokens: &[Token]) -> Vec<usize> {
    depths(tokens).filter(|&(_, d)| d == 0).map(|(i, _)| i).collect()
}

fn end_offset(tokens: &[Token], fallback: usize) -> usize {
    tokens.last().map(|t| t.offset + t.text.len()).unwrap_or(fallback)
}

fn segment_statement(tokens: &[Token], sql_len: usize) -> Result<TokenizedQuery, ParseError> {
    let top = top_level(tokens);
    let set_ops: Vec<usize> = top
        .iter()
        .copied()
        .filter(|&i| {
            let t = &tokens[i];
            t.is_kw("union") || t.is_kw("intersect") || t.is_kw("except")
        })
        .collect();
    let main_end = set_ops.first().copied().unwrap_or(tokens.len());
    let mut query = segment_select(&tokens[..main_end], sql_len)?;

    if !set_ops.is_empty() {
        let mut elements = Vec::new();
        for (n, &start) in set_ops.iter().enumerate() {
            let end = set_ops.get(n + 1).copied().unwrap_or(tokens.len());
            let mut body_start = start + 1;
            if tokens.get(body_start).is_some_and(|t| t.is_kw("all")) {
                body_start += 1;
            }
            if body_start >= end {
                return Err(ParseError::new(tokens[start].offset, "set operator without a query"));
            }
            let inner = segment_select(&tokens[body_start..end], sql_len)?;
            let op = render(&tokens[start..body_start]);
            elements.push(format!("{op} {}", inner.to_sql()));
        }
        query.segments.push(ClauseSegment { kind: ClauseKind::Other, elements });
    }
    Ok(query)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Marker {
    From,
    Join,
    Where,
    GroupBy,
    Having,
    OrderBy,
    Limit,
}

fn is_join_start(tokens: &[Token], i: usize) -> bool {
    let t = &tokens[i];
    if t.kind != TokenKind::Keyword {
        return false;
    }
    let after_modifier = i > 0 && is_join_modifier(&tokens[i - 1]);
    match t.text.as_str() {
        "join" => !after_modifier,
        "inner" | "left" | "right" | "full" | "cross" | "natural" => {
            // a join modifier must be followed (possibly via OUTER/another modifier) by JOIN
            tokens[i + 1..]
                .iter()
                .take(3)
                .take_while(|n| n.kind == TokenKind::Keyword)
                .any(|n| n.text == "join")
                && !after_modifier
        }
        _ => false,
    }
}

fn is_join_modifier(t: &Token) -> bool {
    t.kind == TokenKind::Keyword
        && matches!(t.text.as_str(), "inner" | "left" | "right" | "full" | "cross" | "natural" | "outer")
}

fn segment_select(tokens: &[Token], sql_len: usize) -> Result<TokenizedQuery, ParseError> {
    let first = tokens
        .first()
        .ok_or_else(|| ParseError::new(sql_len, "expected SELECT"))?;
    if !first.is_kw("select") {
        return Err(ParseError::new(first.offset, "expected SELECT"));
    }

    let mut markers: Vec<(usize, Marker)> = Vec::new();
    for i in top_level(tokens) {
        let t = &tokens[i];
        let next_is_by = tokens.get(i + 1).is_some_and(|n| n.is_kw("by"));
        let marker = match t.text.as_str() {
            _ if t.kind != TokenKind::Keyword => None,
            "from" => Some(Marker::From),
            "where" => Some(Marker::Where),
            "group" if next_is_by => Some(Marker::GroupBy),
            "having" => Some(Marker::Having),
            "order" if next_is_by => Some(Marker::OrderBy),
            "limit" => Some(Marker::Limit),
            "select" if i > 0 => {
                return Err(ParseError::new(t.offset, "unexpected SELECT"));
            }
            _ if is_join_start(tokens, i) => Some(Marker::Join),
            _ => None,
        };
        if let Some(m) = marker {
            markers.push((i, m));
        }
    }

    let mut seen: Vec<Marker> = Vec::new();
    for &(i, m) in &markers {
        if m == Marker::Join {
            if !seen.contains(&Marker::From) {
                return Err(ParseError::new(tokens[i].offset, "JOIN without FROM"));
            }
            if seen.iter().any(|s| *s != Marker::From && *s != Marker::Join) {
                return Err(ParseError::new(tokens[i].offset, "JOIN after WHERE/GROUP BY/ORDER BY"));
            }
        } else if seen.contains(&m) {
            return Err(ParseError::new(tokens[i].offset, "duplicate clause"));
        }
        seen.push(m);
    }

    let body = |n: usize| -> (usize, usize) {
        let (start, m) = markers[n];
        let skip = match m {
            Marker::GroupBy | Marker::OrderBy => 2,
            Marker::Join => 0,
            _ => 1,
        };
        let end = markers.get(n + 1).map(|(i, _)| *i).unwrap_or(tokens.len());
        (start + skip, end)
    };

    let select_end = markers.first().map(|(i, _)| *i).unwrap_or(tokens.len());
    let mut select_start = 1;
    let mut distinct = false;
    if tokens.get(1).is_some_and(|t| t.is_kw("distinct")) {
        distinct = true;
        select_start = 2;
    } else if tokens.get(1).is_some_and(|t| t.is_kw("all")) {
        select_start = 2;
    }
    let select_tokens = &tokens[select_start.min(select_end)..select_end];
    if select_tokens.is_empty() {
        return Err(ParseError::new(end_offset(&tokens[..select_end], sql_len), "empty SELECT list"));
    }
    let mut select_elements = Vec::new();
    if distinct {
        select_elements.push(DISTINCT_MARKER.to_string());
    }
    for part in split_commas(select_tokens) {
        select_elements.push(render_element(part)?);
    }

    let mut segments = vec![ClauseSegment { kind: ClauseKind::Select, elements: select_elements }];
    let mut joins = Vec::new();
    let mut rest: Vec<ClauseSegment> = Vec::new();

    for n in 0..markers.len() {
        let (start, end) = body(n);
        let m = markers[n].1;
        let part = &tokens[start.min(end)..end];
        if part.is_empty() {
            return Err(ParseError::new(tokens[markers[n].0].offset, "clause has no body"));
        }
        match m {
            Marker::From => {
                let elements = split_commas(part)
                    .into_iter()
                    .map(render_element)
                    .collect::<Result<Vec<_>, _>>()?;
                segments.push(ClauseSegment { kind: ClauseKind::From, elements });
            }
            Marker::Join => joins.push(render_join(part)?),
            Marker::Where | Marker::Having => {
                let kind = if m == Marker::Where { ClauseKind::Where } else { ClauseKind::Having };
                rest.push(ClauseSegment { kind, elements: split_conjuncts(part)? });
            }
            Marker::GroupBy => {
                let elements = split_commas(part)
                    .into_iter()
                    .map(render_element)
                    .collect::<Result<Vec<_>, _>>()?;
                rest.push(ClauseSegment { kind: ClauseKind::GroupBy, elements });
            }
            Marker::OrderBy => {
                let elements = split_commas(part)
                    .into_iter()
                    .map(|p| {
                        let p = match p.last() {
                            Some(t) if t.is_kw("asc") && p.len() > 1 => &p[..p.len() - 1],
                            _ => p,
                        };
                        render_element(p)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                rest.push(ClauseSegment { kind: ClauseKind::OrderBy, elements });
            }
            Marker::Limit => {
                rest.push(ClauseSegment { kind: ClauseKind::Limit, elements: vec![render_element(part)?] });
            }
        }
    }

    if !joins.is_empty() {
        segments.push(ClauseSegment { kind: ClauseKind::Join, elements: joins });
    }
    segments.extend(rest);
    segments.sort_by_key(|s| s.kind);
    Ok(TokenizedQuery { segments })
}

fn split_commas(tokens: &[Token]) -> Vec<&[Token]> {
    let mut parts = Vec::new();
    let mut start = 0;
    for (i, d) in depths(tokens) {
        if d == 0 && tokens[i].kind == TokenKind::Comma {
            parts.push(&tokens[start..i]);
            start = i + 1;
        }
    }
    parts.push(&tokens[start..]);
    parts.into_iter().filter(|p| !p.is_empty()).collect()
}

/// Canonical join text: `inner join` collapses to `join`, `outer` is dropped.
fn render_join(tokens: &[Token]) -> Result<String, ParseError> {
    let join_pos = tokens
        .iter()
        .position(|t| t.is_kw("join"))
        .ok_or_else(|| ParseError::new(tokens[0].offset, "expected JOIN"))?;
    let modifiers: Vec<&str> = tokens[..join_pos]
        .iter()
        .map(|t| t.text.as_str())
        .filter(|m| *m != "outer" && *m != "inner")
        .collect();
    let rest = &tokens[join_pos + 1..];
    if rest.is_empty() {
        return Err(ParseError::new(tokens[join_pos].offset, "JOIN without a table"));
    }
    let mut head = modifiers.join(" ");
    if !head.is_empty() {
        head.push(' ');
    }
    let on_pos = rest.iter().position(|t| t.is_kw("on"));
    let body = match on_pos {
        Some(p) if p + 1 < rest.len() => {
            let table = render_element(&rest[..p])?;
            let conds = split_conjuncts(&rest[p + 1..])?;
            format!("{table} on {}", conds.join(" and "))
        }
        Some(p) => return Err(ParseError::new(rest[p].offset, "ON without a condition")),
        None => render_element(rest)?,
    };
    Ok(format!("{head}join {body}"))
}

/// Splits a boolean expression into top-level AND conjuncts, flattening
/// redundant parentheses. A conjunct with a top-level OR is parenthesized.
fn split_conjuncts(tokens: &[Token]) -> Result<Vec<String>, ParseError> {
    let mut out = Vec::new();
    collect_conjuncts(tokens, &mut out)?;
    Ok(out)
}

fn collect_conjuncts(tokens: &[Token], out: &mut Vec<String>) -> Result<(), ParseError> {
    let tokens = strip_wrapping_parens(tokens);
    let mut parts = Vec::new();
    let mut start = 0;
    let mut pending_between = false;
    for (i, d) in depths(tokens) {
        if d != 0 {
            continue;
        }
        let t = &tokens[i];
        if t.is_kw("between") {
            pending_between = true;
        } else if t.is_kw("and") {
            if pending_between {
                pending_between = false;
            } else {
                parts.push(&tokens[start..i]);
                start = i + 1;
            }
        }
    }
    parts.push(&tokens[start..]);

    if parts.len() == 1 {
        let part = parts[0];
        if part.is_empty() {
            return Err(ParseError::new(0, "empty condition"));
        }
        let has_or = top_level(part).into_iter().any(|i| part[i].is_kw("or"));
        let text = render_element(part)?;
        out.push(if has_or { format!("({text})") } else { text });
        return Ok(());
    }
    for part in parts {
        if part.is_empty() {
            let offset = tokens.first().map(|t| t.offset).unwrap_or(0);
            return Err(ParseError::new(offset, "dangling AND"));
        }
        collect_conjuncts(part, out)?;
    }
    Ok(())
}

fn strip_wrapping_parens(mut tokens: &[Token]) -> &[Token] {
    loop {
        if tokens.len() < 2
            || tokens[0].kind != TokenKind::LParen
            || tokens[tokens.len() - 1].kind != TokenKind::RParen
            || tokens[1].is_kw("select")
        {
            return tokens;
        }
        // the first paren must close at the very end
        let closes_at_end = depths(tokens)
            .filter(|&(i, d)| d == 0 && tokens[i].kind == TokenKind::RParen)
            .map(|(i, _)| i)
            .next()
            == Some(tokens.len() - 1);
        if !closes_at_end {
            return tokens;
        }
        tokens = &tokens[1..tokens.len() - 1];
    }
}

/// Renders an element, replacing parenthesized sub-selects by their
/// recursively normalized form.
pub(crate) fn render_element(tokens: &[Token]) -> Result<String, ParseError> {
    let mut atoms: Vec<Token> = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        let t = &tokens[i];
        if t.kind == TokenKind::LParen && tokens.get(i + 1).is_some_and(|n| n.is_kw("select")) {
            let close = matching_paren(tokens, i)
                .ok_or_else(|| ParseError::new(t.offset, "unclosed '('"))?;
            let inner = segment_statement(&tokens[i + 1..close], tokens[close].offset)?;
            atoms.push(Token {
                kind: TokenKind::Subquery,
                text: format!("({})", inner.to_sql()),
                offset: t.offset,
            });
            i = close + 1;
        } else {
            atoms.push(t.clone());
            i += 1;
        }
    }
    Ok(render(&atoms))
}

fn matching_paren(tokens: &[Token], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    for (i, t) in tokens.iter().enumerate().skip(open) {
        match t.kind {
            TokenKind::LParen => depth += 1,
            TokenKind::RParen => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(sql: &str) -> Vec<(ClauseKind, Vec<String>)> {
        tokenize_sql(sql).unwrap().segments.into_iter().map(|s| (s.kind, s.elements)).collect()
    }

    fn strs(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn count_star_from_singer() {
        assert_eq!(
            seg("SELECT COUNT(*) FROM singer;"),
            vec![(ClauseKind::Select, strs(&["count(*)"])), (ClauseKind::From, strs(&["singer"]))]
        );
    }

    #[test]
    fn where_split_into_conjuncts() {
        let q = tokenize_sql("SELECT * FROM t WHERE a > 1 AND b = 2").unwrap();
        assert_eq!(q.elements(ClauseKind::Where), strs(&["a > 1", "b = 2"]));
    }

    #[test]
    fn case_and_spacing_do_not_matter() {
        let a = tokenize_sql("select name  from   Employees where dept='x'").unwrap();
        let b = tokenize_sql("SELECT name FROM Employees\n WHERE dept = 'x' ;").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identifiers_keep_case_literals_verbatim() {
        let q = tokenize_sql("SELECT Name FROM T WHERE City = 'New York' AND Pop > 1.0E3").unwrap();
        assert_eq!(q.elements(ClauseKind::Select), strs(&["Name"]));
        assert_eq!(q.elements(ClauseKind::Where), strs(&["City = 'New York'", "Pop > 1.0E3"]));
    }

    #[test]
    fn in_list_is_one_element() {
        let q = tokenize_sql("SELECT * FROM e WHERE department IN ('sales', 'marketing') AND x = 1").unwrap();
        assert_eq!(q.elements(ClauseKind::Where), strs(&["department in ('sales', 'marketing')", "x = 1"]));
    }

    #[test]
    fn between_is_not_split() {
        let q = tokenize_sql("SELECT * FROM t WHERE a BETWEEN 1 AND 5 AND b = 2").unwrap();
        assert_eq!(q.elements(ClauseKind::Where), strs(&["a between 1 and 5", "b = 2"]));
    }

    #[test]
    fn or_conjunct_is_parenthesized_and_redundant_parens_flatten() {
        let q = tokenize_sql("SELECT * FROM t WHERE (a = 1 AND (b = 2)) AND (c = 1 OR d = 2)").unwrap();
        assert_eq!(q.elements(ClauseKind::Where), strs(&["a = 1", "b = 2", "(c = 1 or d = 2)"]));
        let bare = tokenize_sql("SELECT * FROM t WHERE c = 1 OR d = 2").unwrap();
        assert_eq!(bare.elements(ClauseKind::Where), strs(&["(c = 1 or d = 2)"]));
    }

    #[test]
    fn joins_group_order_limit() {
        let q = tokenize_sql(
            "SELECT T1.name, count(*) FROM singer AS T1 INNER JOIN concert AS T2 ON T1.id = T2.singer_id \
             LEFT OUTER JOIN stadium s ON s.id = T2.stadium_id \
             WHERE T2.year > 2014 GROUP BY T1.name HAVING count(*) > 1 ORDER BY count(*) DESC, T1.name ASC LIMIT 3",
        )
        .unwrap();
        assert_eq!(q.elements(ClauseKind::From), strs(&["singer as T1"]));
        assert_eq!(
            q.elements(ClauseKind::Join),
            strs(&["join concert as T2 on T1.id = T2.singer_id", "left join stadium s on s.id = T2.stadium_id"])
        );
        assert_eq!(q.elements(ClauseKind::GroupBy), strs(&["T1.name"]));
        assert_eq!(q.elements(ClauseKind::Having), strs(&["count(*) > 1"]));
        assert_eq!(q.elements(ClauseKind::OrderBy), strs(&["count(*) desc", "T1.name"]));
        assert_eq!(q.elements(ClauseKind::Limit), strs(&["3"]));
    }

    #[test]
    fn subquery_is_one_normalized_element() {
        let q = tokenize_sql("SELECT name FROM t WHERE id IN (SELECT  tid FROM u WHERE  x=1 AND y=2)").unwrap();
        assert_eq!(
            q.elements(ClauseKind::Where),
            strs(&["id in (select tid from u where x = 1 and y = 2)"])
        );
        let from = tokenize_sql("SELECT avg(c) FROM (SELECT count(*) AS c FROM t GROUP BY k) AS sub").unwrap();
        assert_eq!(from.elements(ClauseKind::From), strs(&["(select count(*) as c from t group by k) as sub"]));
    }

    #[test]
    fn set_operators_land_in_other() {
        let q = tokenize_sql("SELECT a FROM t UNION SELECT a FROM u").unwrap();
        assert_eq!(q.elements(ClauseKind::Other), strs(&["union select a from u"]));
        assert_eq!(q.elements(ClauseKind::From), strs(&["t"]));
    }

    #[test]
    fn distinct_marker() {
        let q = tokenize_sql("SELECT DISTINCT a, b FROM t").unwrap();
        assert!(q.is_distinct());
        assert_eq!(q.to_sql(), "select distinct a, b from t");
    }

    #[test]
    fn normal_form_round_trips() {
        for sql in [
            "SELECT * FROM t WHERE (a = 1 OR b = 2) AND c BETWEEN 1 AND 2",
            "SELECT DISTINCT x FROM a JOIN b ON a.id = b.id AND a.k = b.k WHERE y NOT IN (SELECT y FROM c) ORDER BY x LIMIT 5 OFFSET 2",
            "SELECT a FROM t EXCEPT SELECT a FROM u WHERE u.z > 3",
        ] {
            let q = tokenize_sql(sql).unwrap();
            assert_eq!(tokenize_sql(&q.to_sql()).unwrap(), q, "{sql}");
        }
    }

    #[test]
    fn malformed_sql_reports_offsets() {
        assert_eq!(tokenize_sql("UPDATE t SET a = 1").unwrap_err().offset, 0);
        assert_eq!(tokenize_sql("SELECT a FROM t WHERE (a = 1").unwrap_err().offset, 22);
        assert!(tokenize_sql("SELECT FROM t").is_err());
        assert!(tokenize_sql("SELECT a FROM t WHERE").is_err());
        assert!(tokenize_sql("SELECT a FROM t WHERE a = 1 AND").is_err());
        assert!(tokenize_sql("SELECT a FROM t; SELECT b FROM u").is_err());
        assert!(tokenize_sql("").is_err());
    }
}
