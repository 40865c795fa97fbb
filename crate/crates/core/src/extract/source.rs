//! Training source files (Python and friends).

use std::sync::OnceLock;

use regex::Regex;

use super::catalog::{self, KeyRole};
use crate::signal::{Location, Signal, SignalKind, Tier};

struct Patterns {
    keyword: Regex,
    backend_literal: Regex,
    dtype_token: Regex,
    environ_set: Regex,
    environ_call: Regex,
}

fn patterns() -> &'static Patterns {
    static P: OnceLock<Patterns> = OnceLock::new();
    P.get_or_init(|| Patterns {
        keyword: Regex::new(
            r#"["']?\b([A-Za-z_][A-Za-z0-9_]*)["']?\s*(?:=|:)\s*("[^"]*"|'[^']*'|[A-Za-z0-9_.\-]+)"#,
        )
        .unwrap(),
        backend_literal: Regex::new(r#"["'](?i:nccl|gloo|mpi|hccl)["']"#).unwrap(),
        dtype_token: Regex::new(r"(?i)\b(bfloat16|bf16|float16|fp16)\b").unwrap(),
        environ_set: Regex::new(
            r#"environ\[\s*["']([A-Za-z_][A-Za-z0-9_]*)["']\s*\]\s*=\s*(?:str\(\s*)?["']?([^"'\s)]*)"#,
        )
        .unwrap(),
        environ_call: Regex::new(
            r#"(?:setdefault|putenv)\(\s*["']([A-Za-z_][A-Za-z0-9_]*)["']\s*,\s*(?:str\(\s*)?["']?([^"'\s)]*)"#,
        )
        .unwrap(),
    })
}

/// Splits a source line into its code part, dropping a trailing `#` comment.
///
/// `in_triple` carries triple-quoted string state across lines; text inside
/// triple-quoted strings is treated as documentation, not code.
pub(crate) fn code_part(line: &str, in_triple: &mut Option<&'static str>) -> String {
    let mut code = String::new();
    let mut rest = line;
    loop {
        if let Some(delim) = *in_triple {
            match rest.find(delim) {
                Some(i) => {
                    rest = &rest[i + 3..];
                    *in_triple = None;
                    code.push(' ');
                }
                None => return code,
            }
        }
        let mut quote: Option<char> = None;
        let mut escaped = false;
        let mut cut = None;
        for (i, c) in rest.char_indices() {
            if let Some(q) = quote {
                if escaped {
                    escaped = false;
                } else if c == '\\' {
                    escaped = true;
                } else if c == q {
                    quote = None;
                }
                continue;
            }
            match c {
                '#' => {
                    code.push_str(&rest[..i]);
                    return code;
                }
                '"' | '\'' => {
                    let triple = if c == '"' { "\"\"\"" } else { "'''" };
                    if rest[i..].starts_with(triple) {
                        cut = Some((i, triple));
                        break;
                    }
                    quote = Some(c);
                }
                _ => {}
            }
        }
        match cut {
            Some((i, triple)) => {
                code.push_str(&rest[..i]);
                rest = &rest[i + 3..];
                *in_triple = Some(triple);
            }
            None => {
                code.push_str(rest);
                return code;
            }
        }
    }
}

/// Extracts backend, dtype, accumulation, GPU-count and environment
/// signals from code (never from comments or docstrings).
pub fn extract_source_tokens(text: &str, path: &str) -> Vec<Signal> {
    let p = patterns();
    let mut out = Vec::new();
    let mut in_triple = None;
    for (idx, raw_line) in text.lines().enumerate() {
        let line = code_part(raw_line, &mut in_triple);
        if line.trim().is_empty() {
            continue;
        }
        let loc = Location::new(path, idx as u32 + 1);
        let mut push = |kind: SignalKind, value: String, surface: &str| {
            out.push(Signal::new(kind, value, Tier::Executable, loc.clone(), surface));
        };

        for cap in p.keyword.captures_iter(&line) {
            let key = &cap[1];
            let Some(role) = catalog::key_role(&catalog::normalize_key(key)) else {
                continue;
            };
            let value = &cap[2];
            let found = match role {
                KeyRole::PrecisionSwitch(dtype) => {
                    catalog::is_truthy(value).then(|| (SignalKind::DtypeConfig, dtype.to_string()))
                }
                _ => catalog::interpret(role, value),
            };
            if let Some((kind, v)) = found {
                push(kind, v, key);
            }
        }
        for m in p.backend_literal.find_iter(&line) {
            let lit = m.as_str();
            if let Some(b) = catalog::normalize_backend(lit) {
                push(SignalKind::CommBackend, b.to_string(), &lit[1..lit.len() - 1]);
            }
        }
        for m in p.dtype_token.find_iter(&line) {
            if let Some(d) = catalog::normalize_dtype(m.as_str()) {
                push(SignalKind::DtypeConfig, d.to_string(), m.as_str());
            }
        }
        for cap in p.environ_set.captures_iter(&line).chain(p.environ_call.captures_iter(&line)) {
            for (kind, value) in catalog::classify_env(&cap[1], &cap[2]) {
                push(kind, value, &cap[1]);
            }
        }
    }
    out
}
