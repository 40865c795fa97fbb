use std::fs;
use std::path::{Path, PathBuf};

use chipsig_core::extract::{classify, extract_text, FileKind, MentionVocabulary, ScanOptions};
use chipsig_core::kb::default_kb;
use chipsig_core::{scan_tree, SignalSet, Tier};
use proptest::prelude::*;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn options() -> ScanOptions {
    ScanOptions::new(MentionVocabulary::from_kb(&default_kb()))
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

#[test]
fn empty_directory() {
    let dir = tempfile::tempdir().unwrap();
    let set = scan_tree(dir.path(), &options()).unwrap();
    assert!(set.is_empty());
    assert_eq!(set.stats.files_scanned, 0);
}

#[test]
fn oversized_and_binary_files_are_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let big = fs::File::create(dir.path().join("huge.sh")).unwrap();
    big.set_len(500 * 1024 * 1024).unwrap();
    fs::write(dir.path().join("blob.py"), b"import torch\x00\x01NCCL_IB_DISABLE=0").unwrap();
    fs::write(dir.path().join("launch.sh"), "export NCCL_IB_DISABLE=0\n").unwrap();
    let set = scan_tree(dir.path(), &options()).unwrap();
    assert_eq!(set.stats.files_skipped, 2);
    assert_eq!(set.stats.files_scanned, 1);
    assert!(set.iter().all(|s| s.location.path == "launch.sh"));
}

#[test]
fn vcs_directories_are_not_walked() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join(".git")).unwrap();
    fs::write(dir.path().join(".git/hook.sh"), "export NCCL_IB_DISABLE=0\n").unwrap();
    assert!(scan_tree(dir.path(), &options()).unwrap().is_empty());
}

#[test]
fn broken_config_counts_as_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("ds.json"), "{\"bf16\": ").unwrap();
    fs::write(dir.path().join("run.sh"), "deepspeed x.py --bf16\n").unwrap();
    let set = scan_tree(dir.path(), &options()).unwrap();
    assert_eq!(set.stats.parse_errors, 1);
    assert_eq!(set.len(), 1);
}

#[test]
fn fixture_scans_are_deterministic_and_located() {
    for name in ["ib_cluster_moe", "dit_single_node"] {
        let root = fixtures().join(name);
        let a = scan_tree(&root, &options()).unwrap();
        let b = scan_tree(&root, &options()).unwrap();
        assert_eq!(a, b);
        assert_eq!(SignalSet::new(a.signals().to_vec(), a.stats), a, "canonicalization is idempotent");
        for s in &a {
            let text = fs::read_to_string(root.join(&s.location.path)).unwrap();
            let lines = text.lines().count() as u32;
            assert!(s.location.line >= 1 && s.location.line <= lines, "{s}");
            let expected = match s.location.path.rsplit('.').next() {
                Some("sh" | "py") => Tier::Executable,
                Some("json" | "yaml" | "toml") => Tier::Config,
                _ => Tier::Prose,
            };
            assert_eq!(s.tier, expected, "{s}");
        }
    }
}

/// Comments out one line with the file's own comment syntax.
fn comment_line(text: &str, line: u32) -> String {
    text.lines()
        .enumerate()
        .map(|(i, l)| {
            if i as u32 + 1 == line {
                let indent = l.len() - l.trim_start().len();
                format!("{}# {}", &l[..indent], &l[indent..])
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn commenting_a_signal_line_removes_its_signals() {
    let vocab = MentionVocabulary::from_kb(&default_kb());
    let mut checked = 0;
    for path in files_under(&fixtures()) {
        let bytes = fs::read(&path).unwrap();
        let kind = classify(&path, &bytes);
        if !matches!(kind, FileKind::ShellScript | FileKind::SourceFile) {
            continue;
        }
        let text = String::from_utf8(bytes).unwrap();
        let rel = path.file_name().unwrap().to_string_lossy().into_owned();
        let outcome = extract_text(kind, &text, &rel, &vocab);
        let mut lines: Vec<u32> = outcome.signals.iter().map(|s| s.location.line).collect();
        lines.dedup();
        for line in lines {
            let again = extract_text(kind, &comment_line(&text, line), &rel, &vocab);
            let left: Vec<_> = again.signals.iter().filter(|s| s.location.line == line).collect();
            assert!(left.is_empty(), "{rel}:{line} still yields {left:?}");
            checked += 1;
        }
    }
    assert!(checked >= 20, "only {checked} signal lines checked");
}

const SHELL_POOL: &[&str] = &[
    "export NCCL_IB_DISABLE=0",
    "export NCCL_NET_GDR_LEVEL=2",
    "NCCL_IB_HCA=mlx5_0 torchrun train.py",
    "export HOST_GPU_NUM=8",
    "deepspeed train.py --bf16",
    "python train.py --zero_stage 3",
    "echo done",
    "if true; then export NCCL_IB_TC=160; fi",
    "A=1; B=2",
    "export NCCL_P2P_DISABLE=0",
];

proptest! {
    #[test]
    fn shell_extraction_is_deterministic_and_comment_safe(picks in prop::collection::vec(0usize..SHELL_POOL.len(), 0..25)) {
        let vocab = MentionVocabulary::from_kb(&default_kb());
        let text: String = picks.iter().map(|&i| format!("{}\n", SHELL_POOL[i])).collect();
        let a = SignalSet::from_signals(extract_text(FileKind::ShellScript, &text, "s.sh", &vocab).signals);
        let b = SignalSet::from_signals(extract_text(FileKind::ShellScript, &text, "s.sh", &vocab).signals);
        prop_assert_eq!(&a, &b);
        for s in &a {
            prop_assert_eq!(s.tier, Tier::Executable);
            prop_assert!(s.location.line as usize <= picks.len());
        }
        let commented: String = picks.iter().map(|&i| format!("# {}\n", SHELL_POOL[i])).collect();
        prop_assert!(extract_text(FileKind::ShellScript, &commented, "s.sh", &vocab).signals.is_empty());
    }

    #[test]
    fn scan_ignores_file_write_order(order in Just((0..4usize).collect::<Vec<_>>()).prop_shuffle()) {
        let bodies = [
            ("a.sh", "export NCCL_IB_DISABLE=0\n"),
            ("b.json", "{\"bf16\": {\"enabled\": true}}\n"),
            ("c.py", "dist.init_process_group(backend=\"nccl\")\n"),
            ("d.md", "Runs on A100.\n"),
        ];
        let dir = tempfile::tempdir().unwrap();
        for i in &order {
            fs::write(dir.path().join(bodies[*i].0), bodies[*i].1).unwrap();
        }
        let set = scan_tree(dir.path(), &options()).unwrap();
        let paths: Vec<&str> = set.iter().map(|s| s.location.path.as_str()).collect();
        let mut sorted = paths.clone();
        sorted.sort();
        prop_assert_eq!(paths, sorted);
        prop_assert_eq!(set.stats.files_scanned, 4);
    }
}
