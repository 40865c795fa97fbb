//! Line-oriented shell lexing: enough of the POSIX grammar to find variable
//! assignments and command-line flags in launch scripts.
//!
//! Handled: `#` comments, single/double quotes, backslash escapes and line
//! continuations, `$(...)`, `${...}` and backtick substitutions (kept raw),
//! `;`/`&&`/`||`/`|`/`&` separators, here-documents (skipped), and the
//! `export`/`declare -x`/`local`/`readonly`/`env` builtins. Nothing is
//! evaluated: conditionals and loops are read straight through.

use serde::{Deserialize, Serialize};

use super::catalog::{self, KeyRole};
use crate::signal::{Location, Signal, SignalKind, Tier};

/// A variable assignment found in a shell script.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvAssignment {
    pub name: String,
    pub value: String,
    pub location: Location,
    pub exported: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Word {
    text: String,
    line: u32,
    /// Byte length of the leading part of `text` that came from unquoted,
    /// unescaped, unsubstituted input.
    plain_len: usize,
}

impl Word {
    fn is_plain(&self, s: &str) -> bool {
        self.plain_len == self.text.len() && self.text == s
    }

    /// `(name, value)` when this word is a `NAME=value` assignment.
    fn as_assignment(&self) -> Option<(&str, &str)> {
        let eq = self.text[..self.plain_len].find('=')?;
        let name = &self.text[..eq];
        is_identifier(name).then(|| (name, &self.text[eq + 1..]))
    }
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    word: Option<Word>,
    statement: Vec<Word>,
    statements: Vec<Vec<Word>>,
    heredocs: Vec<(String, bool)>,
}

impl Lexer {
    fn new(text: &str) -> Self {
        Self {
            chars: text.chars().collect(),
            pos: 0,
            line: 1,
            word: None,
            statement: Vec::new(),
            statements: Vec::new(),
            heredocs: Vec::new(),
        }
    }

    fn peek(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn word_mut(&mut self) -> &mut Word {
        let line = self.line;
        self.word.get_or_insert_with(|| Word {
            text: String::new(),
            line,
            plain_len: 0,
        })
    }

    fn push_plain(&mut self, c: char) {
        let w = self.word_mut();
        let was_plain = w.plain_len == w.text.len();
        w.text.push(c);
        if was_plain {
            w.plain_len = w.text.len();
        }
    }

    fn push_quoted(&mut self, s: &str) {
        self.word_mut().text.push_str(s);
    }

    fn finish_word(&mut self) {
        if let Some(w) = self.word.take() {
            self.statement.push(w);
        }
    }

    fn finish_statement(&mut self) {
        self.finish_word();
        if !self.statement.is_empty() {
            self.statements.push(std::mem::take(&mut self.statement));
        }
    }

    /// Consumes one char, tracking newlines.
    fn bump(&mut self) -> Option<char> {
        let c = self.peek(0)?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
        }
        Some(c)
    }

    /// Copies a balanced `open ... close` region (starting at `open`) verbatim.
    fn read_balanced(&mut self, open: char, close: char) -> String {
        let mut out = String::new();
        let mut depth = 0usize;
        while let Some(c) = self.bump() {
            out.push(c);
            match c {
                '\\' => {
                    if let Some(n) = self.bump() {
                        out.push(n);
                    }
                }
                '\'' if depth > 0 => {
                    while let Some(n) = self.bump() {
                        out.push(n);
                        if n == '\'' {
                            break;
                        }
                    }
                }
                '"' if depth > 0 => {
                    while let Some(n) = self.bump() {
                        out.push(n);
                        if n == '\\' {
                            if let Some(e) = self.bump() {
                                out.push(e);
                            }
                        } else if n == '"' {
                            break;
                        }
                    }
                }
                c if c == open => depth += 1,
                c if c == close => {
                    depth = depth.saturating_sub(1);
                    if depth == 0 {
                        break;
                    }
                }
                _ => {}
            }
        }
        out
    }

    fn read_backticks(&mut self) -> String {
        let mut out = String::new();
        out.push(self.bump().unwrap_or('`'));
        while let Some(c) = self.bump() {
            out.push(c);
            if c == '\\' {
                if let Some(n) = self.bump() {
                    out.push(n);
                }
            } else if c == '`' {
                break;
            }
        }
        out
    }

    fn read_single_quoted(&mut self) {
        self.word_mut();
        self.bump();
        let mut s = String::new();
        while let Some(c) = self.bump() {
            if c == '\'' {
                break;
            }
            s.push(c);
        }
        self.push_quoted(&s);
    }

    fn read_double_quoted(&mut self) {
        self.word_mut();
        self.bump();
        let mut s = String::new();
        while let Some(c) = self.peek(0) {
            match c {
                '"' => {
                    self.bump();
                    break;
                }
                '\\' => {
                    self.bump();
                    match self.peek(0) {
                        Some('\n') => {
                            self.bump();
                        }
                        Some(n @ ('"' | '\\' | '$' | '`')) => {
                            self.bump();
                            s.push(n);
                        }
                        _ => s.push('\\'),
                    }
                }
                '$' if matches!(self.peek(1), Some('(')) => {
                    self.bump();
                    s.push('$');
                    s.push_str(&self.read_balanced('(', ')'));
                }
                '`' => s.push_str(&self.read_backticks()),
                _ => {
                    self.bump();
                    s.push(c);
                }
            }
        }
        self.push_quoted(&s);
    }

    fn read_heredoc_start(&mut self) {
        // at "<<"
        self.finish_word();
        self.pos += 2;
        let strip_tabs = if self.peek(0) == Some('-') {
            self.pos += 1;
            true
        } else {
            false
        };
        while matches!(self.peek(0), Some(' ' | '\t')) {
            self.pos += 1;
        }
        let mut delim = String::new();
        while let Some(c) = self.peek(0) {
            if c.is_whitespace() || matches!(c, ';' | '&' | '|' | '<' | '>' | '(' | ')') {
                break;
            }
            self.pos += 1;
            if c != '\'' && c != '"' && c != '\\' {
                delim.push(c);
            }
        }
        if !delim.is_empty() {
            self.heredocs.push((delim, strip_tabs));
        }
    }

    fn skip_heredoc_bodies(&mut self) {
        for (delim, strip_tabs) in std::mem::take(&mut self.heredocs) {
            loop {
                if self.peek(0).is_none() {
                    return;
                }
                let mut line = String::new();
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                    line.push(c);
                }
                let candidate = if strip_tabs { line.trim_start_matches('\t') } else { line.as_str() };
                if candidate.trim_end_matches('\r') == delim {
                    break;
                }
            }
        }
    }

    fn run(mut self) -> Vec<Vec<Word>> {
        while let Some(c) = self.peek(0) {
            match c {
                '\\' if self.peek(1) == Some('\n') => {
                    self.bump();
                    self.bump();
                }
                '\\' if self.peek(1) == Some('\r') && self.peek(2) == Some('\n') => {
                    self.bump();
                    self.bump();
                    self.bump();
                }
                '\\' => {
                    self.bump();
                    self.word_mut();
                    if let Some(n) = self.bump() {
                        self.push_quoted(&n.to_string());
                    }
                }
                '\n' => {
                    self.finish_statement();
                    self.bump();
                    if !self.heredocs.is_empty() {
                        self.skip_heredoc_bodies();
                    }
                }
                ' ' | '\t' | '\r' => {
                    self.finish_word();
                    self.bump();
                }
                '#' if self.word.is_none() => {
                    while let Some(n) = self.peek(0) {
                        if n == '\n' {
                            break;
                        }
                        self.pos += 1;
                    }
                }
                ';' => {
                    self.finish_statement();
                    self.bump();
                }
                '&' => {
                    let glued = self
                        .word
                        .as_ref()
                        .is_some_and(|w| w.text.ends_with('>') || w.text.ends_with('<'));
                    if glued || self.peek(1) == Some('>') {
                        self.bump();
                        self.push_plain('&');
                    } else {
                        self.finish_statement();
                        self.bump();
                        if self.peek(0) == Some('&') {
                            self.bump();
                        }
                    }
                }
                '|' => {
                    self.finish_statement();
                    self.bump();
                    if self.peek(0) == Some('|') {
                        self.bump();
                    }
                }
                '(' => {
                    let array = self.word.as_ref().is_some_and(|w| w.text.ends_with('='));
                    if array {
                        let raw = self.read_balanced('(', ')');
                        self.push_quoted(&raw);
                    } else {
                        self.finish_statement();
                        self.bump();
                    }
                }
                ')' => {
                    self.finish_statement();
                    self.bump();
                }
                '\'' => self.read_single_quoted(),
                '"' => self.read_double_quoted(),
                '$' if self.peek(1) == Some('(') => {
                    self.word_mut();
                    self.bump();
                    let raw = self.read_balanced('(', ')');
                    self.push_quoted(&format!("${raw}"));
                }
                '$' if self.peek(1) == Some('{') => {
                    self.word_mut();
                    self.bump();
                    let raw = self.read_balanced('{', '}');
                    self.push_quoted(&format!("${raw}"));
                }
                '`' => {
                    self.word_mut();
                    let raw = self.read_backticks();
                    self.push_quoted(&raw);
                }
                '<' if self.peek(1) == Some('<') && self.peek(2) != Some('<') => {
                    self.read_heredoc_start();
                }
                _ => {
                    self.bump();
                    self.push_plain(c);
                }
            }
        }
        self.finish_statement();
        self.statements
    }
}

const LEADING_KEYWORDS: &[&str] = &[
    "then", "do", "else", "elif", "if", "while", "until", "{", "!", "time",
];

fn strip_keywords(words: &[Word]) -> &[Word] {
    let mut i = 0;
    while i < words.len() && LEADING_KEYWORDS.iter().any(|k| words[i].is_plain(k)) {
        i += 1;
    }
    &words[i..]
}

fn assignments_in(words: &[Word], path: &str, out: &mut Vec<EnvAssignment>) {
    let words = strip_keywords(words);
    let Some(first) = words.first() else {
        return;
    };
    let mut push = |w: &Word, exported: bool| {
        if let Some((name, value)) = w.as_assignment() {
            out.push(EnvAssignment {
                name: name.to_string(),
                value: value.to_string(),
                location: Location::new(path, w.line),
                exported,
            });
        }
    };
    let builtin = ["export", "declare", "typeset", "local", "readonly", "env"]
        .into_iter()
        .find(|b| first.is_plain(b));
    match builtin {
        Some(b) => {
            let flags: String = words[1..]
                .iter()
                .filter(|w| w.text.starts_with('-'))
                .map(|w| w.text.as_str())
                .collect();
            let exported = match b {
                "export" => !flags.contains('n'),
                "declare" | "typeset" => flags.contains('x'),
                _ => false,
            };
            for w in &words[1..] {
                if w.text.starts_with('-') {
                    continue;
                }
                if b == "env" && w.as_assignment().is_none() {
                    break;
                }
                push(w, exported);
            }
        }
        None => {
            for w in words {
                if w.as_assignment().is_none() {
                    break;
                }
                push(w, false);
            }
        }
    }
}

/// Every top-level assignment in a shell script, in source order.
pub fn extract_env_assignments(text: &str, path: &str) -> Vec<EnvAssignment> {
    let mut out = Vec::new();
    for statement in Lexer::new(text).run() {
        assignments_in(&statement, path, &mut out);
    }
    out
}

fn flag_signals(words: &[Word], path: &str, out: &mut Vec<Signal>) {
    for (i, w) in words.iter().enumerate() {
        if !w.text.starts_with("--") || w.text.len() <= 2 {
            continue;
        }
        let (key, inline_value) = match w.text.split_once('=') {
            Some((k, v)) => (k, Some(v)),
            None => (w.text.as_str(), None),
        };
        let Some(role) = catalog::key_role(&catalog::normalize_key(key)) else {
            continue;
        };
        let found = match role {
            KeyRole::PrecisionSwitch(dtype) => match inline_value {
                Some(v) if !catalog::is_truthy(v) => None,
                _ => Some((SignalKind::DtypeConfig, dtype.to_string())),
            },
            _ => {
                let value = inline_value.or_else(|| {
                    words
                        .get(i + 1)
                        .filter(|n| !n.text.starts_with('-'))
                        .map(|n| n.text.as_str())
                });
                value.and_then(|v| catalog::interpret(role, v))
            }
        };
        if let Some((kind, value)) = found {
            out.push(Signal::new(
                kind,
                value,
                Tier::Executable,
                Location::new(path, w.line),
                key,
            ));
        }
    }
}

/// Signals from a shell script: catalogued variables and launcher flags.
pub fn extract_shell_signals(text: &str, path: &str) -> Vec<Signal> {
    let mut out = Vec::new();
    for statement in Lexer::new(text).run() {
        let mut assignments = Vec::new();
        assignments_in(&statement, path, &mut assignments);
        for a in assignments {
            for (kind, value) in catalog::classify_env(&a.name, &a.value) {
                out.push(Signal::new(kind, value, Tier::Executable, a.location.clone(), a.name.clone()));
            }
        }
        flag_signals(strip_keywords(&statement), path, &mut out);
    }
    out
}
