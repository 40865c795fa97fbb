//! Walking a codebase and pulling hardware-provenance signals out of it.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

pub mod catalog;
pub mod config;
pub mod prose;
pub mod shell;
pub mod source;

pub use config::{extract_training_config, ConfigError};
pub use prose::{extract_prose_mentions, MentionVocabulary};
pub use shell::{extract_env_assignments, extract_shell_signals, EnvAssignment};
pub use source::extract_source_tokens;

use crate::signal::{ScanStats, Signal, SignalSet};

/// Bytes inspected for shebangs and NUL bytes.
pub const SNIFF_BYTES: usize = 512;

pub const DEFAULT_MAX_FILE_BYTES: u64 = 8 * 1024 * 1024;

/// Directories never descended into.
const SKIPPED_DIRS: &[&str] = &[".git", ".hg", ".svn", "node_modules", "__pycache__"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileKind {
    ShellScript,
    StructuredConfig,
    SourceFile,
    ProseDoc,
    Other,
}

/// Classifies a file by extension, falling back to a shebang sniff.
pub fn classify(path: &Path, head: &[u8]) -> FileKind {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("sh" | "bash" | "zsh" | "ksh") => return FileKind::ShellScript,
        Some("json" | "yaml" | "yml" | "toml") => return FileKind::StructuredConfig,
        Some("py" | "pyi" | "pyx" | "pyw") => return FileKind::SourceFile,
        Some("md" | "markdown" | "rst" | "txt") => return FileKind::ProseDoc,
        _ => {}
    }
    let head = &head[..head.len().min(SNIFF_BYTES)];
    if !head.starts_with(b"#!") {
        return FileKind::Other;
    }
    let first = head.split(|&b| b == b'\n').next().unwrap_or_default();
    let first = String::from_utf8_lossy(first);
    let interpreter = first
        .trim_start_matches("#!")
        .split_whitespace()
        .flat_map(|w| w.rsplit('/').next())
        .find(|w| *w != "env" && !w.starts_with('-'))
        .unwrap_or_default()
        .to_string();
    if interpreter.starts_with("python") {
        FileKind::SourceFile
    } else if matches!(interpreter.as_str(), "sh" | "bash" | "zsh" | "ksh" | "dash") {
        FileKind::ShellScript
    } else {
        FileKind::Other
    }
}

pub fn looks_binary(head: &[u8]) -> bool {
    head[..head.len().min(SNIFF_BYTES)].contains(&0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanLimits {
    pub max_file_bytes: u64,
}

impl Default for ScanLimits {
    fn default() -> Self {
        Self {
            max_file_bytes: DEFAULT_MAX_FILE_BYTES,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScanOptions {
    pub limits: ScanLimits,
    pub vocabulary: MentionVocabulary,
}

impl ScanOptions {
    pub fn new(vocabulary: MentionVocabulary) -> Self {
        Self {
            limits: ScanLimits::default(),
            vocabulary,
        }
    }
}

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("scan root {} does not exist", .0.display())]
    RootMissing(PathBuf),
    #[error("scan root {} is not a directory", .0.display())]
    NotADirectory(PathBuf),
    #[error("cannot read scan root {}: {source}", path.display())]
    Unreadable { path: PathBuf, source: io::Error },
}

/// Result of extracting one file.
#[derive(Debug, Default)]
pub struct FileOutcome {
    pub signals: Vec<Signal>,
    pub stats: ScanStats,
}

impl FileOutcome {
    fn skipped() -> Self {
        Self {
            signals: Vec::new(),
            stats: ScanStats {
                files_skipped: 1,
                ..ScanStats::default()
            },
        }
    }
}

/// Runs the extractor for `kind` over already-decoded text.
pub fn extract_text(kind: FileKind, text: &str, rel_path: &str, vocabulary: &MentionVocabulary) -> FileOutcome {
    let mut stats = ScanStats {
        files_scanned: 1,
        ..ScanStats::default()
    };
    let mut signals = match kind {
        FileKind::ShellScript => extract_shell_signals(text, rel_path),
        FileKind::StructuredConfig => match extract_training_config(text, rel_path) {
            Ok(s) => s,
            Err(_) => {
                stats.parse_errors = 1;
                Vec::new()
            }
        },
        FileKind::SourceFile => extract_source_tokens(text, rel_path),
        FileKind::ProseDoc => extract_prose_mentions(text, rel_path, vocabulary),
        FileKind::Other => return FileOutcome::skipped(),
    };
    catalog::fold_p2p_disabled(&mut signals);
    FileOutcome { signals, stats }
}

fn relative_path(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

fn scan_file(root: &Path, path: &Path, options: &ScanOptions) -> FileOutcome {
    let Ok(meta) = fs::metadata(path) else {
        return FileOutcome::skipped();
    };
    if meta.len() > options.limits.max_file_bytes {
        return FileOutcome::skipped();
    }
    let Ok(bytes) = fs::read(path) else {
        return FileOutcome::skipped();
    };
    if looks_binary(&bytes) {
        return FileOutcome::skipped();
    }
    let kind = classify(path, &bytes);
    if kind == FileKind::Other {
        return FileOutcome::skipped();
    }
    let text = String::from_utf8_lossy(&bytes);
    extract_text(kind, &text, &relative_path(root, path), &options.vocabulary)
}

/// Scans every regular file under `root`.
///
/// Oversized, binary, unclassifiable and unreadable files count as skipped;
/// only a missing or unreadable root is fatal.
pub fn scan_tree(root: &Path, options: &ScanOptions) -> Result<SignalSet, ScanError> {
    let meta = fs::metadata(root).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => ScanError::RootMissing(root.to_path_buf()),
        _ => ScanError::Unreadable {
            path: root.to_path_buf(),
            source: e,
        },
    })?;
    if !meta.is_dir() {
        return Err(ScanError::NotADirectory(root.to_path_buf()));
    }
    fs::read_dir(root).map_err(|e| ScanError::Unreadable {
        path: root.to_path_buf(),
        source: e,
    })?;

    let mut files = Vec::new();
    let mut walk_failures = 0u64;
    let walker = WalkDir::new(root)
        .follow_links(false)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| {
            e.depth() == 0
                || !(e.file_type().is_dir()
                    && SKIPPED_DIRS.iter().any(|d| e.file_name() == *d))
        });
    for entry in walker {
        match entry {
            Ok(e) if e.file_type().is_file() => files.push(e.into_path()),
            Ok(_) => {}
            Err(_) => walk_failures += 1,
        }
    }

    let (signals, stats) = files
        .par_iter()
        .map(|p| scan_file(root, p, options))
        .map(|o| (o.signals, o.stats))
        .reduce(
            || (Vec::new(), ScanStats::default()),
            |(mut a, sa), (b, sb)| {
                a.extend(b);
                (a, sa.merge(sb))
            },
        );
    let stats = ScanStats {
        files_skipped: stats.files_skipped + walk_failures,
        ..stats
    };
    Ok(SignalSet::new(signals, stats))
}
