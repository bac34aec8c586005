use std::collections::BTreeMap;

use super::{GrammarError, GrammarRule, SemanticSpace, Symbol};
use crate::corpus::tokenize;

#[derive(Debug)]
pub(super) struct Parsed {
    pub rules: Vec<GrammarRule>,
    pub space: SemanticSpace,
    pub start: Option<String>,
    pub declared_start_line: usize,
}

pub(super) fn parse(source: &str) -> Result<Parsed, GrammarError> {
    let mut parsed = Parsed {
        rules: Vec::new(),
        space: SemanticSpace::new(),
        start: None,
        declared_start_line: 0,
    };
    for (i, raw) in source.lines().enumerate() {
        let mut cur = Cursor::new(raw, i + 1);
        cur.skip_ws();
        if cur.at_end() || cur.peek() == Some('#') {
            continue;
        }
        if cur.eat('%') {
            directive(&mut cur, &mut parsed)?;
        } else {
            rule_line(&mut cur, &mut parsed.rules)?;
        }
    }
    Ok(parsed)
}

fn directive(cur: &mut Cursor, parsed: &mut Parsed) -> Result<(), GrammarError> {
    let name = cur.ident().ok_or_else(|| cur.error("expected directive name"))?;
    match name.as_str() {
        "start" => {
            cur.skip_ws();
            let nt = cur.ident().ok_or_else(|| cur.error("expected start nonterminal"))?;
            parsed.start = Some(nt);
            parsed.declared_start_line = cur.line;
        }
        "intent" => {
            let mut any = false;
            loop {
                cur.skip_ws();
                if cur.at_comment_or_end() {
                    break;
                }
                let intent = cur.ident().ok_or_else(|| cur.error("expected intent name"))?;
                parsed.space.add_intent(intent);
                any = true;
            }
            if !any {
                return Err(cur.error("%intent needs at least one name"));
            }
        }
        "concept" => {
            cur.skip_ws();
            let concept = cur.ident().ok_or_else(|| cur.error("expected concept name"))?;
            cur.skip_ws();
            let parent = if cur.eat('<') {
                cur.skip_ws();
                Some(cur.ident().ok_or_else(|| cur.error("expected parent concept"))?)
            } else {
                None
            };
            parsed.space.add_concept(concept, parent);
        }
        other => return Err(cur.error(&format!("unknown directive %{other}"))),
    }
    cur.skip_ws();
    if !cur.at_comment_or_end() {
        return Err(cur.error("unexpected trailing input"));
    }
    Ok(())
}

fn rule_line(cur: &mut Cursor, rules: &mut Vec<GrammarRule>) -> Result<(), GrammarError> {
    let lhs = cur.ident().ok_or_else(|| cur.error("expected nonterminal"))?;
    cur.skip_ws();
    if !(cur.eat('-') && cur.eat('>')) {
        return Err(cur.error("expected `->`"));
    }
    loop {
        let rule = alternative(cur, &lhs)?;
        rules.push(rule);
        cur.skip_ws();
        if cur.eat('|') {
            continue;
        }
        if cur.at_comment_or_end() {
            return Ok(());
        }
        return Err(cur.error("unexpected input after rule"));
    }
}

fn alternative(cur: &mut Cursor, lhs: &str) -> Result<GrammarRule, GrammarError> {
    let mut rhs = Vec::new();
    let mut features = BTreeMap::new();
    let mut weight = 1.0;
    loop {
        cur.skip_ws();
        match cur.peek() {
            Some('"') => {
                let text = cur.quoted()?;
                let words = tokenize(&text);
                if words.is_empty() {
                    return Err(cur.error("empty terminal"));
                }
                rhs.push(Symbol::Terminal(words));
            }
            Some(c) if is_ident_start(c) => {
                let name = cur.ident().expect("checked start char");
                rhs.push(Symbol::NonTerminal(name));
            }
            _ => break,
        }
    }
    if rhs.is_empty() {
        return Err(cur.error("empty right-hand side"));
    }
    cur.skip_ws();
    if cur.eat('{') {
        loop {
            cur.skip_ws();
            if cur.eat('}') {
                break;
            }
            let key = cur.ident().ok_or_else(|| cur.error("expected feature key"))?;
            cur.skip_ws();
            if !cur.eat('=') {
                return Err(cur.error("expected `=`"));
            }
            cur.skip_ws();
            let value = if cur.peek() == Some('"') {
                cur.quoted()?
            } else {
                cur.ident().ok_or_else(|| cur.error("expected feature value"))?
            };
            if features.insert(key.clone(), value).is_some() {
                return Err(cur.error(&format!("duplicate feature `{key}`")));
            }
            cur.skip_ws();
            cur.eat(',');
        }
    }
    cur.skip_ws();
    if cur.eat('@') {
        weight = cur.weight()?;
    }
    Ok(GrammarRule {
        lhs: lhs.to_string(),
        rhs,
        features,
        weight,
        line: cur.line,
    })
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-'
}

struct Cursor {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

impl Cursor {
    fn new(src: &str, line: usize) -> Self {
        Cursor {
            chars: src.chars().collect(),
            pos: 0,
            line,
        }
    }

    fn error(&self, message: &str) -> GrammarError {
        GrammarError::Syntax {
            line: self.line,
            column: self.pos + 1,
            message: message.to_string(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn at_comment_or_end(&self) -> bool {
        self.at_end() || self.peek() == Some('#')
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn ident(&mut self) -> Option<String> {
        let start = self.pos;
        if !self.peek().is_some_and(is_ident_start) {
            return None;
        }
        while self.peek().is_some_and(is_ident_char) {
            self.pos += 1;
        }
        Some(self.chars[start..self.pos].iter().collect())
    }

    fn quoted(&mut self) -> Result<String, GrammarError> {
        let open = self.pos;
        self.pos += 1;
        let mut out = String::new();
        loop {
            match self.peek() {
                None => {
                    self.pos = open;
                    return Err(self.error("unterminated string"));
                }
                Some('"') => {
                    self.pos += 1;
                    return Ok(out);
                }
                Some('\\') => {
                    self.pos += 1;
                    match self.peek() {
                        Some(c) => {
                            out.push(c);
                            self.pos += 1;
                        }
                        None => return Err(self.error("dangling escape")),
                    }
                }
                Some(c) => {
                    out.push(c);
                    self.pos += 1;
                }
            }
        }
    }

    fn weight(&mut self) -> Result<f64, GrammarError> {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_digit() || c == '.' || c == '/')
        {
            self.pos += 1;
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        let value = match text.split_once('/') {
            Some((num, den)) => match (num.parse::<f64>(), den.parse::<f64>()) {
                (Ok(n), Ok(d)) if d > 0.0 => Some(n / d),
                _ => None,
            },
            None => text.parse::<f64>().ok(),
        };
        match value {
            Some(w) if w.is_finite() && w >= 0.0 => Ok(w),
            _ => {
                self.pos = start;
                Err(self.error("weight must be a nonnegative number or fraction"))
            }
        }
    }
}
