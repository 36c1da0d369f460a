//! Line-oriented model text format.
//!
//! ```text
//! events
//!   start controllable
//!   done uncontrollable
//! end
//!
//! plant Machine
//!   location Idle initial marked
//!     edge start goto Busy
//!   location Busy
//!     edge done goto Idle
//! end
//!
//! requirement OnlyWhenIdle
//!   invariant start needs Machine.Idle and not Other.Busy
//! end
//! ```
//!
//! Requirement blocks hold either one `invariant` line or an automaton body
//! in plant syntax. `#` starts a comment.

use std::fmt::Write as _;

use super::doc::{
    AutomatonDoc, EdgeDoc, EventDoc, InvariantDoc, LocationDoc, ModelDoc, PredicateDoc,
    RequirementDoc,
};
use super::ModelError;

fn err(line: usize, message: impl Into<String>) -> ModelError {
    ModelError::Syntax {
        line,
        message: message.into(),
    }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn ident(line: usize, s: &str, what: &str) -> Result<String, ModelError> {
    if is_ident(s) {
        Ok(s.to_string())
    } else {
        Err(err(line, format!("invalid {what} name `{s}`")))
    }
}

enum Block {
    None,
    Events,
    Plant(AutomatonDoc),
    Requirement(RequirementDoc, AutomatonDoc),
}

/// Parses the text format into an unvalidated document.
pub fn parse_model_text(input: &str) -> Result<ModelDoc, ModelError> {
    let mut doc = ModelDoc::default();
    let mut block = Block::None;

    for (idx, raw) in input.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let words: Vec<&str> = content.split_whitespace().collect();

        if words == ["end"] {
            match std::mem::replace(&mut block, Block::None) {
                Block::None => return Err(err(line, "`end` outside of a block")),
                Block::Events => {}
                Block::Plant(a) => doc.plants.push(a),
                Block::Requirement(mut r, body) => {
                    if r.invariant.is_some() {
                        if !body.locations.is_empty() || !body.alphabet.is_empty() {
                            return Err(err(
                                line,
                                format!(
                                    "requirement `{}` mixes an invariant with an automaton body",
                                    r.name
                                ),
                            ));
                        }
                    } else {
                        r.automaton = Some(body);
                    }
                    doc.requirements.push(r);
                }
            }
            continue;
        }

        match &mut block {
            Block::None => match words.as_slice() {
                ["events"] => block = Block::Events,
                ["plant", name] => {
                    block = Block::Plant(AutomatonDoc {
                        name: ident(line, name, "plant")?,
                        alphabet: Vec::new(),
                        locations: Vec::new(),
                        line: Some(line),
                    })
                }
                ["requirement", name] => {
                    let name = ident(line, name, "requirement")?;
                    block = Block::Requirement(
                        RequirementDoc {
                            name: name.clone(),
                            automaton: None,
                            invariant: None,
                            line: Some(line),
                        },
                        AutomatonDoc {
                            name,
                            alphabet: Vec::new(),
                            locations: Vec::new(),
                            line: Some(line),
                        },
                    )
                }
                _ => {
                    return Err(err(
                        line,
                        format!("expected `events`, `plant <name>` or `requirement <name>`, found `{content}`"),
                    ))
                }
            },
            Block::Events => match words.as_slice() {
                [name, kind @ ("controllable" | "uncontrollable")] => doc.events.push(EventDoc {
                    name: ident(line, name, "event")?,
                    controllable: *kind == "controllable",
                    line: Some(line),
                }),
                _ => {
                    return Err(err(
                        line,
                        "expected `<event> controllable` or `<event> uncontrollable`",
                    ))
                }
            },
            Block::Plant(a) => automaton_line(a, line, &words)?,
            Block::Requirement(r, body) => {
                if words[0] == "invariant" {
                    if r.invariant.is_some() {
                        return Err(err(line, "a requirement holds at most one invariant"));
                    }
                    r.invariant = Some(invariant_line(content, line)?);
                } else {
                    automaton_line(body, line, &words)?;
                }
            }
        }
    }

    if !matches!(block, Block::None) {
        return Err(err(input.lines().count(), "unterminated block, missing `end`"));
    }
    Ok(doc)
}

fn automaton_line(a: &mut AutomatonDoc, line: usize, words: &[&str]) -> Result<(), ModelError> {
    match words {
        ["alphabet", events @ ..] => {
            for e in events {
                a.alphabet.push(ident(line, e, "event")?);
            }
        }
        ["location", name, flags @ ..] => {
            let mut loc = LocationDoc {
                name: ident(line, name, "location")?,
                initial: false,
                marked: false,
                edges: Vec::new(),
                line: Some(line),
            };
            for f in flags {
                match *f {
                    "initial" => loc.initial = true,
                    "marked" => loc.marked = true,
                    other => return Err(err(line, format!("unknown location flag `{other}`"))),
                }
            }
            a.locations.push(loc);
        }
        ["edge", event, "goto", target] => {
            let edge = EdgeDoc {
                event: ident(line, event, "event")?,
                target: ident(line, target, "location")?,
                line: Some(line),
            };
            a.locations
                .last_mut()
                .ok_or_else(|| err(line, "`edge` before any `location`"))?
                .edges
                .push(edge);
        }
        _ => {
            return Err(err(
                line,
                format!(
                    "expected `alphabet`, `location` or `edge <event> goto <location>`, found `{}`",
                    words.join(" ")
                ),
            ))
        }
    }
    Ok(())
}

fn invariant_line(content: &str, line: usize) -> Result<InvariantDoc, ModelError> {
    let rest = content["invariant".len()..].trim_start();
    let (event, rest) = rest
        .split_once(char::is_whitespace)
        .ok_or_else(|| err(line, "expected `invariant <event> needs <predicate>`"))?;
    let rest = rest.trim_start();
    let pred_text = rest
        .strip_prefix("needs")
        .filter(|r| r.starts_with(char::is_whitespace) || r.starts_with('('))
        .ok_or_else(|| err(line, "expected `needs` after the invariant event"))?;
    Ok(InvariantDoc {
        event: ident(line, event, "event")?,
        needs: parse_predicate(pred_text, line)?,
        line: Some(line),
    })
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Atom(String),
    And,
    Or,
    Not,
    Open,
    Close,
}

fn lex(text: &str, line: usize) -> Result<Vec<Tok>, ModelError> {
    let mut toks = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '(' => {
                toks.push(Tok::Open);
                i += 1;
            }
            ')' => {
                toks.push(Tok::Close);
                i += 1;
            }
            '!' => {
                toks.push(Tok::Not);
                i += 1;
            }
            '&' | '|' => {
                toks.push(if c == '&' { Tok::And } else { Tok::Or });
                i += 1;
                if chars.get(i) == Some(&c) {
                    i += 1;
                }
            }
            c if c.is_ascii_alphanumeric() || c == '_' || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || matches!(chars[i], '_' | '.')) {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                toks.push(match word.as_str() {
                    "and" => Tok::And,
                    "or" => Tok::Or,
                    "not" => Tok::Not,
                    _ => {
                        let valid = word
                            .split_once('.')
                            .is_some_and(|(p, l)| is_ident(p) && is_ident(l));
                        if !valid {
                            return Err(err(
                                line,
                                format!("expected a `Plant.Location` atom, found `{word}`"),
                            ));
                        }
                        Tok::Atom(word)
                    }
                });
            }
            other => return Err(err(line, format!("unexpected character `{other}` in predicate"))),
        }
    }
    Ok(toks)
}

struct PredParser {
    toks: Vec<Tok>,
    pos: usize,
    line: usize,
}

impl PredParser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn or(&mut self) -> Result<PredicateDoc, ModelError> {
        let mut items = vec![self.and()?];
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            items.push(self.and()?);
        }
        Ok(if items.len() == 1 {
            items.pop().unwrap()
        } else {
            PredicateDoc::Or(items)
        })
    }

    fn and(&mut self) -> Result<PredicateDoc, ModelError> {
        let mut items = vec![self.unary()?];
        while self.peek() == Some(&Tok::And) {
            self.pos += 1;
            items.push(self.unary()?);
        }
        Ok(if items.len() == 1 {
            items.pop().unwrap()
        } else {
            PredicateDoc::And(items)
        })
    }

    fn unary(&mut self) -> Result<PredicateDoc, ModelError> {
        let tok = self.peek().cloned();
        self.pos += 1;
        match tok {
            Some(Tok::Not) => Ok(PredicateDoc::Not(Box::new(self.unary()?))),
            Some(Tok::Atom(a)) => Ok(PredicateDoc::At(a)),
            Some(Tok::Open) => {
                let inner = self.or()?;
                if self.peek() != Some(&Tok::Close) {
                    return Err(err(self.line, "unbalanced parenthesis in predicate"));
                }
                self.pos += 1;
                Ok(inner)
            }
            _ => Err(err(self.line, "incomplete predicate")),
        }
    }
}

fn parse_predicate(text: &str, line: usize) -> Result<PredicateDoc, ModelError> {
    let mut p = PredParser {
        toks: lex(text, line)?,
        pos: 0,
        line,
    };
    let pred = p.or()?;
    if p.pos != p.toks.len() {
        return Err(err(line, "trailing tokens after predicate"));
    }
    Ok(pred)
}

fn precedence(p: &PredicateDoc) -> u8 {
    match p {
        PredicateDoc::Or(_) => 1,
        PredicateDoc::And(_) => 2,
        PredicateDoc::Not(_) | PredicateDoc::At(_) => 3,
    }
}

fn write_predicate(out: &mut String, p: &PredicateDoc) {
    let child = |out: &mut String, c: &PredicateDoc, parent: u8| {
        if precedence(c) <= parent {
            out.push('(');
            write_predicate(out, c);
            out.push(')');
        } else {
            write_predicate(out, c);
        }
    };
    match p {
        PredicateDoc::At(a) => out.push_str(a),
        PredicateDoc::Not(q) => {
            out.push_str("not ");
            child(out, q, 2);
        }
        PredicateDoc::And(qs) | PredicateDoc::Or(qs) => {
            let (op, prec) = if matches!(p, PredicateDoc::And(_)) {
                (" and ", 2)
            } else {
                (" or ", 1)
            };
            for (i, q) in qs.iter().enumerate() {
                if i > 0 {
                    out.push_str(op);
                }
                child(out, q, prec);
            }
        }
    }
}

fn write_automaton_body(out: &mut String, a: &AutomatonDoc) {
    if !a.alphabet.is_empty() {
        let _ = writeln!(out, "  alphabet {}", a.alphabet.join(" "));
    }
    for loc in &a.locations {
        let _ = write!(out, "  location {}", loc.name);
        if loc.initial {
            out.push_str(" initial");
        }
        if loc.marked {
            out.push_str(" marked");
        }
        out.push('\n');
        for e in &loc.edges {
            let _ = writeln!(out, "    edge {} goto {}", e.event, e.target);
        }
    }
}

/// Renders a document in canonical text form.
pub fn write_model_text(doc: &ModelDoc) -> String {
    let mut out = String::new();
    out.push_str("events\n");
    for e in &doc.events {
        let kind = if e.controllable {
            "controllable"
        } else {
            "uncontrollable"
        };
        let _ = writeln!(out, "  {} {kind}", e.name);
    }
    out.push_str("end\n");
    for p in &doc.plants {
        let _ = writeln!(out, "\nplant {}", p.name);
        write_automaton_body(&mut out, p);
        out.push_str("end\n");
    }
    for r in &doc.requirements {
        let _ = writeln!(out, "\nrequirement {}", r.name);
        if let Some(inv) = &r.invariant {
            let mut pred = String::new();
            write_predicate(&mut pred, &inv.needs);
            let _ = writeln!(out, "  invariant {} needs {pred}", inv.event);
        }
        if let Some(a) = &r.automaton {
            write_automaton_body(&mut out, a);
        }
        out.push_str("end\n");
    }
    out
}
