//! Parsing of free-text oracle replies.

use std::sync::OnceLock;

use regex::Regex;
use serde_json::Value;

use super::{clamp_score, AxisScores, InterventionJudgment};
use crate::error::{Error, Result};
use crate::graph::SpatialRelation;

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Score(i32),
    Scores(AxisScores),
    Edges(Vec<(String, SpatialRelation, String)>),
    /// `(name, length, width, height)` in centimeters.
    Dims(Vec<(String, [f64; 3])>),
    Judgment(InterventionJudgment),
}

const OPEN: &str = "<Answer>";
const CLOSE: &str = "</Answer>";
const NUM: &str = r"([+-]?\d+(?:\.\d+)?)";

fn malformed(m: impl Into<String>) -> Error {
    Error::MalformedResponse(m.into())
}

fn scores_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(&format!(
            r"(?is)score-1 is:\s*{NUM}.*?score-2 is:\s*{NUM}.*?score-3 is:\s*{NUM}"
        ))
        .expect("valid regex")
    })
}

fn score_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(&format!(r"(?i)the score is:\s*{NUM}")).expect("valid regex"))
}

fn list_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)\b(edges|dims)\s*=\s*(\[.*\])").expect("valid regex"))
}

/// Extracts the structured part of an oracle reply.
///
/// The first `<Answer>...</Answer>` span may hold a single score, three
/// per-axis scores, an `edges = [...]` list or a `dims = [...]` list.
/// Outside such a span the first JSON object carrying an `action` key is
/// read as an intervention judgment.
pub fn parse_answer_payload(text: &str) -> Result<Payload> {
    if let Some(start) = text.find(OPEN) {
        let body = &text[start + OPEN.len()..];
        let end = body
            .find(CLOSE)
            .ok_or_else(|| malformed("unterminated <Answer> span"))?;
        return parse_span(&body[..end]);
    }
    if let Some(j) = find_judgment(text)? {
        return Ok(Payload::Judgment(j));
    }
    Err(malformed("no <Answer> span or judgment object"))
}

fn number(s: &str) -> Result<i32> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(clamp_score)
        .ok_or_else(|| malformed(format!("bad score `{s}`")))
}

fn parse_span(span: &str) -> Result<Payload> {
    if let Some(c) = scores_re().captures(span) {
        return Ok(Payload::Scores(AxisScores::new(
            number(&c[1])?,
            number(&c[2])?,
            number(&c[3])?,
        )));
    }
    if span.to_lowercase().contains("score-") {
        return Err(malformed("fewer than three axis scores"));
    }
    if let Some(c) = score_re().captures(span) {
        return Ok(Payload::Score(number(&c[1])?));
    }
    if let Some(c) = list_re().captures(span) {
        let list = ListParser::new(&c[2]).parse_all()?;
        return if &c[1] == "edges" {
            edges_from(list).map(Payload::Edges)
        } else {
            dims_from(list).map(Payload::Dims)
        };
    }
    if let Some(j) = find_judgment(span)? {
        return Ok(Payload::Judgment(j));
    }
    Err(malformed("unrecognized <Answer> content"))
}

fn find_judgment(text: &str) -> Result<Option<InterventionJudgment>> {
    for (i, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(map))) = stream.next() {
            if let Some(action) = map.get("action") {
                return judgment_from(action, map.get("updated_relation")).map(Some);
            }
        }
    }
    Ok(None)
}

fn judgment_from(action: &Value, updated: Option<&Value>) -> Result<InterventionJudgment> {
    let action = action
        .as_str()
        .ok_or_else(|| malformed("`action` is not a string"))?;
    match action.trim().to_lowercase().as_str() {
        "keep" => Ok(InterventionJudgment::Keep),
        "modify" => {
            let word = updated
                .and_then(Value::as_str)
                .ok_or_else(|| malformed("`modify` without `updated_relation`"))?;
            let rel = word
                .trim()
                .parse::<SpatialRelation>()
                .map_err(|e| malformed(e.to_string()))?;
            Ok(InterventionJudgment::Modify(rel))
        }
        other => Err(malformed(format!("unknown action `{other}`"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Item {
    Str(String),
    Num(f64),
    List(Vec<Item>),
}

fn edges_from(list: Vec<Item>) -> Result<Vec<(String, SpatialRelation, String)>> {
    list.into_iter()
        .map(|item| match item {
            Item::List(v) => match v.as_slice() {
                [Item::Str(s), Item::Str(r), Item::Str(t)] => {
                    let rel = r.parse().map_err(|e: Error| malformed(e.to_string()))?;
                    Ok((s.clone(), rel, t.clone()))
                }
                _ => Err(malformed("edge must be [subject, relation, target]")),
            },
            _ => Err(malformed("edge must be a list")),
        })
        .collect()
}

fn dims_from(list: Vec<Item>) -> Result<Vec<(String, [f64; 3])>> {
    let num = |i: &Item| match i {
        Item::Num(v) if v.is_finite() && *v > 0.0 => Ok(*v),
        Item::Str(s) => s
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite() && *v > 0.0)
            .ok_or_else(|| malformed(format!("bad dimension `{s}`"))),
        _ => Err(malformed("dimension must be a positive number")),
    };
    list.into_iter()
        .map(|item| match item {
            Item::List(v) => match v.as_slice() {
                [Item::Str(n), l, w, h] => Ok((n.clone(), [num(l)?, num(w)?, num(h)?])),
                _ => Err(malformed("dims entry must be [name, length, width, height]")),
            },
            _ => Err(malformed("dims entry must be a list")),
        })
        .collect()
}

/// Python-ish nested lists of quoted strings and numbers.
struct ListParser<'a> {
    s: &'a [u8],
    src: &'a str,
    pos: usize,
}

impl<'a> ListParser<'a> {
    fn new(src: &'a str) -> Self {
        ListParser {
            s: src.as_bytes(),
            src,
            pos: 0,
        }
    }

    fn parse_all(mut self) -> Result<Vec<Item>> {
        match self.item(0)? {
            Item::List(v) => Ok(v),
            _ => Err(malformed("expected a list")),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn item(&mut self, depth: usize) -> Result<Item> {
        if depth > 8 {
            return Err(malformed("list nested too deeply"));
        }
        match self.peek() {
            Some(b'[') => {
                self.pos += 1;
                let mut out = Vec::new();
                loop {
                    if self.peek() == Some(b']') {
                        self.pos += 1;
                        return Ok(Item::List(out));
                    }
                    out.push(self.item(depth + 1)?);
                    match self.peek() {
                        Some(b',') => self.pos += 1,
                        Some(b']') => {}
                        _ => return Err(malformed("expected `,` or `]`")),
                    }
                }
            }
            Some(q @ (b'\'' | b'"')) => {
                self.pos += 1;
                let mut out = String::new();
                let mut chars = self.src[self.pos..].char_indices();
                while let Some((i, c)) = chars.next() {
                    match c {
                        '\\' => match chars.next() {
                            Some((_, e)) => out.push(e),
                            None => break,
                        },
                        c if c as u32 == u32::from(q) => {
                            self.pos += i + 1;
                            return Ok(Item::Str(out));
                        }
                        c => out.push(c),
                    }
                }
                Err(malformed("unterminated string"))
            }
            Some(_) => {
                let start = self.pos;
                while self.pos < self.s.len() && !matches!(self.s[self.pos], b',' | b']') {
                    self.pos += 1;
                }
                let tok = self.src[start..self.pos].trim();
                tok.parse::<f64>()
                    .map(Item::Num)
                    .map_err(|_| malformed(format!("unexpected token `{tok}`")))
            }
            None => Err(malformed("unexpected end of list")),
        }
    }
}
