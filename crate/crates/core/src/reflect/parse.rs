//! Recovery parser for model outputs that should contain a bracketed list.
//!
//! Models wrap lists in code fences, prepend prose, mix quote styles and
//! leave apostrophes unescaped. The parser accepts Python-style and
//! JSON-style literals, picks the first `[` that starts a complete list, and
//! never fails hard: a miss yields no items plus a [`ParseDiagnostic`].

use serde::{Deserialize, Serialize};

use super::ErrorRecord;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParseDiagnostic {
    /// No `[` anywhere in the text.
    NoListLiteral,
    /// Brackets were present but none started a well-formed list.
    Malformed { offset: usize, reason: String },
    /// The list parsed but some entries had the wrong shape.
    SkippedItems { skipped: usize },
    /// A summary came back empty for a category that had rules.
    EmptyResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub items: Vec<T>,
    pub diagnostic: Option<ParseDiagnostic>,
}

impl<T> Parsed<T> {
    /// True when no list literal could be recovered at all.
    pub fn failed(&self) -> bool {
        matches!(
            self.diagnostic,
            Some(ParseDiagnostic::NoListLiteral | ParseDiagnostic::Malformed { .. })
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Str(String),
    Num(String),
    Bool(bool),
    Null,
    List(Vec<Value>),
    Dict(Vec<(String, Value)>),
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

type PResult<T> = Result<T, (usize, String)>;

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.bump();
        }
    }

    fn err<T>(&self, reason: impl Into<String>) -> PResult<T> {
        Err((self.pos, reason.into()))
    }

    fn expect(&mut self, want: char) -> PResult<()> {
        self.skip_ws();
        match self.bump() {
            Some(c) if c == want => Ok(()),
            Some(c) => Err((self.pos - c.len_utf8(), format!("expected `{want}`, found `{c}`"))),
            None => self.err(format!("expected `{want}`, found end of input")),
        }
    }

    fn value(&mut self) -> PResult<Value> {
        self.skip_ws();
        match self.peek() {
            Some('[') => self.list(),
            Some('{') => self.dict(),
            Some(q @ ('"' | '\'')) => self.string(q).map(Value::Str),
            Some(c) if c == '-' || c.is_ascii_digit() => Ok(Value::Num(self.number())),
            Some(c) if c.is_alphabetic() => {
                let word = self.word();
                match word.as_str() {
                    "True" | "true" => Ok(Value::Bool(true)),
                    "False" | "false" => Ok(Value::Bool(false)),
                    "None" | "null" => Ok(Value::Null),
                    _ => self.err(format!("unquoted word `{word}`")),
                }
            }
            Some(c) => self.err(format!("unexpected `{c}`")),
            None => self.err("unexpected end of input"),
        }
    }

    fn word(&mut self) -> String {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_alphanumeric() || c == '_') {
            self.bump();
        }
        self.src[start..self.pos].to_string()
    }

    fn number(&mut self) -> String {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit() || matches!(c, '-' | '+' | '.' | 'e' | 'E')) {
            self.bump();
        }
        self.src[start..self.pos].to_string()
    }

    /// A quote only closes the string when followed by a delimiter, so
    /// `'Don't drop the key'` survives.
    fn closes_here(&self) -> bool {
        let rest = self.src[self.pos..].trim_start();
        matches!(rest.chars().next(), None | Some(',' | ']' | '}' | ':'))
    }

    fn string(&mut self, quote: char) -> PResult<String> {
        self.bump();
        let mut out = String::new();
        loop {
            let Some(c) = self.bump() else {
                return self.err("unterminated string");
            };
            match c {
                '\\' => {
                    let Some(e) = self.bump() else {
                        return self.err("dangling escape");
                    };
                    match e {
                        'n' => out.push('\n'),
                        't' => out.push('\t'),
                        'r' => out.push('\r'),
                        '0' => out.push('\0'),
                        'u' => out.push(self.hex_escape(4)?),
                        'x' => out.push(self.hex_escape(2)?),
                        '\\' | '\'' | '"' | '/' => out.push(e),
                        other => {
                            out.push('\\');
                            out.push(other);
                        }
                    }
                }
                c if c == quote && self.closes_here() => return Ok(out),
                c => out.push(c),
            }
        }
    }

    fn hex_escape(&mut self, digits: usize) -> PResult<char> {
        let start = self.pos;
        for _ in 0..digits {
            match self.bump() {
                Some(c) if c.is_ascii_hexdigit() => {}
                _ => return Err((start, "bad hex escape".into())),
            }
        }
        let code = u32::from_str_radix(&self.src[start..self.pos], 16).expect("hex digits");
        if (0xD800..0xDC00).contains(&code) && self.src[self.pos..].starts_with("\\u") {
            // surrogate pair
            self.pos += 2;
            let lo_start = self.pos;
            for _ in 0..4 {
                match self.bump() {
                    Some(c) if c.is_ascii_hexdigit() => {}
                    _ => return Err((lo_start, "bad surrogate escape".into())),
                }
            }
            let lo = u32::from_str_radix(&self.src[lo_start..self.pos], 16).expect("hex");
            let combined = 0x10000 + ((code - 0xD800) << 10) + (lo.wrapping_sub(0xDC00) & 0x3FF);
            return char::from_u32(combined).ok_or((start, "invalid surrogate pair".into()));
        }
        char::from_u32(code).ok_or((start, "invalid code point".into()))
    }

    fn list(&mut self) -> PResult<Value> {
        self.expect('[')?;
        let mut items = Vec::new();
        loop {
            self.skip_ws();
            if self.peek() == Some(']') {
                self.bump();
                return Ok(Value::List(items));
            }
            items.push(self.value()?);
            self.skip_ws();
            match self.bump() {
                Some(',') => continue,
                Some(']') => return Ok(Value::List(items)),
                Some(c) => return Err((self.pos - c.len_utf8(), format!("expected `,` or `]`, found `{c}`"))),
                None => return self.err("unterminated list"),
            }
        }
    }

    fn dict(&mut self) -> PResult<Value> {
        self.expect('{')?;
        let mut entries = Vec::new();
        loop {
            self.skip_ws();
            if self.peek() == Some('}') {
                self.bump();
                return Ok(Value::Dict(entries));
            }
            let key = match self.value()? {
                Value::Str(s) => s,
                Value::Num(n) => n,
                _ => return self.err("dictionary key must be a string"),
            };
            self.expect(':')?;
            let value = self.value()?;
            entries.push((key, value));
            self.skip_ws();
            match self.bump() {
                Some(',') => continue,
                Some('}') => return Ok(Value::Dict(entries)),
                Some(c) => return Err((self.pos - c.len_utf8(), format!("expected `,` or `}}`, found `{c}`"))),
                None => return self.err("unterminated dictionary"),
            }
        }
    }
}

/// Finds the first `[` that begins a complete list literal and returns the
/// literal's text, together with the parsed value.
fn locate_list(text: &str) -> Result<(&str, Vec<Value>), ParseDiagnostic> {
    let mut first_error: Option<(usize, String)> = None;
    for (start, _) in text.match_indices('[') {
        let mut cur = Cursor { src: text, pos: start };
        match cur.list() {
            Ok(Value::List(items)) => return Ok((&text[start..cur.pos], items)),
            Ok(_) => unreachable!("list() returns lists"),
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    Err(match first_error {
        None => ParseDiagnostic::NoListLiteral,
        Some((offset, reason)) => ParseDiagnostic::Malformed { offset, reason },
    })
}

/// The outermost well-formed list literal in `text`, if any.
pub fn extract_list_literal(text: &str) -> Option<&str> {
    locate_list(text).ok().map(|(s, _)| s)
}

fn as_text(v: &Value) -> Option<String> {
    match v {
        Value::Str(s) => Some(s.clone()),
        Value::Dict(entries) => entries
            .iter()
            .find(|(k, _)| k == "rule" || k == "text")
            .and_then(|(_, v)| match v {
                Value::Str(s) => Some(s.clone()),
                _ => None,
            }),
        _ => None,
    }
}

fn finish<T>(items: Vec<T>, skipped: usize) -> Parsed<T> {
    Parsed {
        items,
        diagnostic: (skipped > 0).then_some(ParseDiagnostic::SkippedItems { skipped }),
    }
}

/// Parses a list of strings. Dict entries carrying a `rule` or `text`
/// string are accepted; blank strings and other shapes are skipped.
pub fn parse_list_output(text: &str) -> Parsed<String> {
    let values = match locate_list(text) {
        Ok((_, v)) => v,
        Err(d) => {
            return Parsed {
                items: Vec::new(),
                diagnostic: Some(d),
            }
        }
    };
    let mut items = Vec::new();
    let mut skipped = 0;
    for v in &values {
        match as_text(v) {
            Some(s) if !s.trim().is_empty() => items.push(s),
            _ => skipped += 1,
        }
    }
    finish(items, skipped)
}

/// Parses a list of `{mistake, solution}` records (keys in any order; an
/// optional positive integer `priority` is kept).
pub fn parse_record_output(text: &str) -> Parsed<ErrorRecord> {
    let values = match locate_list(text) {
        Ok((_, v)) => v,
        Err(d) => {
            return Parsed {
                items: Vec::new(),
                diagnostic: Some(d),
            }
        }
    };
    let mut items = Vec::new();
    let mut skipped = 0;
    for v in &values {
        let Value::Dict(entries) = v else {
            skipped += 1;
            continue;
        };
        let get = |key: &str| {
            entries
                .iter()
                .find(|(k, _)| k.eq_ignore_ascii_case(key))
                .and_then(|(_, v)| match v {
                    Value::Str(s) if !s.trim().is_empty() => Some(s.clone()),
                    _ => None,
                })
        };
        let priority = entries
            .iter()
            .find(|(k, _)| k == "priority")
            .and_then(|(_, v)| match v {
                Value::Num(n) => n.parse::<u32>().ok().filter(|p| *p >= 1),
                _ => None,
            });
        match (get("mistake"), get("solution")) {
            (Some(mistake), Some(solution)) => items.push(ErrorRecord {
                mistake,
                solution,
                priority,
            }),
            _ => skipped += 1,
        }
    }
    finish(items, skipped)
}

/// Renders strings as a JSON list literal.
pub fn list_literal<S: AsRef<str>>(items: &[S]) -> String {
    let items: Vec<&str> = items.iter().map(AsRef::as_ref).collect();
    serde_json::to_string(&items).expect("json")
}

/// Renders records as a JSON list of `{"mistake", "solution"}` objects.
pub fn record_literal(records: &[ErrorRecord]) -> String {
    let items: Vec<serde_json::Value> = records
        .iter()
        .map(|r| serde_json::json!({"mistake": r.mistake, "solution": r.solution}))
        .collect();
    serde_json::to_string(&items).expect("json")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn python_dict_record() {
        let p =
            parse_record_output("[{'mistake': 'Cabinet was not opened', 'solution': 'Open the cabinet next time'}]");
        assert_eq!(p.diagnostic, None);
        assert_eq!(
            p.items,
            vec![ErrorRecord::new("Cabinet was not opened", "Open the cabinet next time")]
        );
    }

    #[test]
    fn fenced_json_list() {
        let p = parse_list_output("```json\n[\"rule A\", \"rule B\"]\n```");
        assert_eq!(p.items, vec!["rule A", "rule B"]);
        assert_eq!(p.diagnostic, None);
    }

    #[test]
    fn prose_yields_diagnostic() {
        let p = parse_list_output("I see no mistakes.");
        assert!(p.items.is_empty());
        assert_eq!(p.diagnostic, Some(ParseDiagnostic::NoListLiteral));
        assert!(p.failed());
    }

    #[test]
    fn empty_list_is_success() {
        let p = parse_record_output("[]");
        assert!(p.items.is_empty());
        assert!(!p.failed());
        assert_eq!(p.diagnostic, None);
    }

    #[test]
    fn keys_in_any_order_and_priority() {
        let p = parse_record_output(r#"Sure! [{"solution": "b", "priority": 7, "mistake": "a"}] hope it helps"#);
        assert_eq!(
            p.items,
            vec![ErrorRecord {
                mistake: "a".into(),
                solution: "b".into(),
                priority: Some(7)
            }]
        );
    }

    #[test]
    fn unescaped_apostrophe_recovered() {
        let p = parse_list_output("['Don't drop the key before the door', 'Turn left']");
        assert_eq!(p.items, vec!["Don't drop the key before the door", "Turn left"]);
    }

    #[test]
    fn bracketed_prose_before_list_is_skipped() {
        let p = parse_list_output("Note [sic] the rules: ['a', 'b']");
        assert_eq!(p.items, vec!["a", "b"]);
    }

    #[test]
    fn malformed_reports_offset() {
        let p = parse_list_output("result: ['a', 'b'");
        match p.diagnostic {
            Some(ParseDiagnostic::Malformed { offset, .. }) => assert!(offset >= 8),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_shapes_are_skipped_with_count() {
        let p = parse_record_output(
            "[{'rule': 'Close containers', 'priority': 7}, {'mistake': 'm', 'solution': 's'}, 'x']",
        );
        assert_eq!(p.items.len(), 1);
        assert_eq!(p.diagnostic, Some(ParseDiagnostic::SkippedItems { skipped: 2 }));
        assert!(!p.failed());
        let l = parse_list_output("[{'priority': 2, 'rule': 'Check likely spots first'}, '', 3]");
        assert_eq!(l.items, vec!["Check likely spots first"]);
        assert_eq!(l.diagnostic, Some(ParseDiagnostic::SkippedItems { skipped: 2 }));
    }

    #[test]
    fn nested_list_returns_outermost() {
        assert_eq!(extract_list_literal("x [[1], [2]] y"), Some("[[1], [2]]"));
    }

    #[test]
    fn unicode_escapes() {
        let p = parse_list_output(r#"["café", "😀"]"#);
        assert_eq!(p.items, vec!["café", "😀"]);
    }

    proptest! {
        #[test]
        fn json_list_round_trips(items in proptest::collection::vec("[ -~\u{e9}\u{4e2d}]{1,24}", 0..8)) {
            let items: Vec<String> = items.into_iter().filter(|s| !s.trim().is_empty()).collect();
            let parsed = parse_list_output(&list_literal(&items));
            prop_assert_eq!(parsed.diagnostic, None);
            prop_assert_eq!(parsed.items, items);
        }

        #[test]
        fn records_round_trip(recs in proptest::collection::vec(("[ -~]{1,20}", "[ -~]{1,20}"), 0..5)) {
            let recs: Vec<ErrorRecord> = recs
                .into_iter()
                .filter(|(m, s)| !m.trim().is_empty() && !s.trim().is_empty())
                .map(|(m, s)| ErrorRecord::new(m, s))
                .collect();
            let parsed = parse_record_output(&record_literal(&recs));
            prop_assert_eq!(parsed.items, recs);
        }

        #[test]
        fn never_panics(text in "\\PC{0,80}") {
            let _ = parse_list_output(&text);
            let _ = parse_record_output(&text);
        }
    }
}
