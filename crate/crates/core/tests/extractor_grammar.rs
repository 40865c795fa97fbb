use std::path::Path;

use chipsig_core::extract::config::extract_training_config;
use chipsig_core::extract::{extract_env_assignments, extract_shell_signals};
use chipsig_core::signal::{Signal, SignalSet};
use serde::Deserialize;

#[derive(Deserialize)]
struct Cases {
    shell: Vec<ShellCase>,
    config: Vec<ConfigCase>,
}

#[derive(Deserialize)]
struct ShellCase {
    name: String,
    input: String,
    assignments: Vec<String>,
    signals: Option<Vec<String>>,
}

#[derive(Deserialize)]
struct ConfigCase {
    name: String,
    path: String,
    input: String,
    #[serde(default)]
    signals: Vec<String>,
    #[serde(default)]
    error: bool,
}

fn cases() -> Cases {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/grammar_cases.toml");
    toml::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn compact(signals: Vec<Signal>) -> Vec<String> {
    SignalSet::from_signals(signals)
        .iter()
        .map(|s| format!("{}({})@{}", s.kind, s.value, s.location.line))
        .collect()
}

#[test]
fn case_counts() {
    let c = cases();
    assert!(c.shell.len() >= 30, "{}", c.shell.len());
    assert!(c.config.len() >= 15, "{}", c.config.len());
}

#[test]
fn shell_cases() {
    let mut failures = Vec::new();
    for case in cases().shell {
        let got: Vec<String> = extract_env_assignments(&case.input, "case.sh")
            .into_iter()
            .map(|a| {
                let export = if a.exported { "export " } else { "" };
                format!("{export}{}={} @{}", a.name, a.value, a.location.line)
            })
            .collect();
        if got != case.assignments {
            failures.push(format!("{}: assignments {got:?} != {:?}", case.name, case.assignments));
        }
        if let Some(expected) = case.signals {
            let got = compact(extract_shell_signals(&case.input, "case.sh"));
            if got != expected {
                failures.push(format!("{}: signals {got:?} != {expected:?}", case.name));
            }
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn config_cases() {
    let mut failures = Vec::new();
    for case in cases().config {
        match extract_training_config(&case.input, &case.path) {
            Err(e) if !case.error => failures.push(format!("{}: unexpected error {e}", case.name)),
            Ok(_) if case.error => failures.push(format!("{}: expected a parse error", case.name)),
            Ok(signals) => {
                let got = compact(signals);
                if got != case.signals {
                    failures.push(format!("{}: {got:?} != {:?}", case.name, case.signals));
                }
            }
            Err(_) => {}
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}
