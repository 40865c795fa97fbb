use std::path::{Path, PathBuf};
use std::process::Command;

use chipsig::{run, EXIT_NO_CANDIDATES, EXIT_OK, EXIT_SCAN_FAILED, EXIT_USAGE};
use chipsig_core::report::ScanReport;

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
        .display()
        .to_string()
}

fn chipsig(args: &[&str]) -> chipsig::Outcome {
    run(std::iter::once("chipsig").chain(args.iter().copied()))
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

const ONE_AMD_KB: &str = r#"
schema_version = 1

[[entries]]
id = "mi300x"
display_name = "AMD Instinct MI300X"
vendor = "amd"
architecture = "cdna3"
datacenter = "yes"
bfloat16 = "yes"
gpudirect_rdma = "no"
nvlink = "no"
vram_gib = [192]
"#;

#[test]
fn text_scan_succeeds() {
    let out = chipsig(&["scan", &fixture("ib_cluster_moe")]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    assert!(out.stdout.contains("consistent with: a100, a800, h100, h20, h800"));
}

#[test]
fn machine_scan_parses_back() {
    let out = chipsig(&["scan", &fixture("dit_single_node"), "--format", "machine"]);
    assert_eq!(out.code, EXIT_OK);
    let report = ScanReport::from_machine(&out.stdout).unwrap();
    assert!(report.candidates.ids.contains(&"a100".to_string()));
    assert!(report.version.generated_at.is_none());
}

#[test]
fn timestamps_are_opt_in() {
    let out = chipsig(&["scan", &fixture("dit_single_node"), "--format", "machine", "--timestamps"]);
    let report = ScanReport::from_machine(&out.stdout).unwrap();
    assert!(report.version.generated_at.unwrap().ends_with('Z'));
}

#[test]
fn missing_root_is_scan_failure() {
    let out = chipsig(&["scan", "/definitely/not/here"]);
    assert_eq!(out.code, EXIT_SCAN_FAILED);
    assert!(out.stderr.contains("does not exist"));
}

#[test]
fn root_that_is_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "x.sh", "echo");
    assert_eq!(chipsig(&["scan", f.to_str().unwrap()]).code, EXIT_SCAN_FAILED);
}

#[test]
fn bad_threshold_is_usage_error() {
    for t in ["abc", "-1", "0"] {
        let out = chipsig(&["scan", &fixture("dit_single_node"), &format!("--tpp-threshold={t}")]);
        assert_eq!(out.code, EXIT_USAGE, "{t}");
    }
}

#[test]
fn threshold_changes_status() {
    let out = chipsig(&["scan", &fixture("ib_cluster_moe"), "--tpp-threshold", "5000"]);
    assert!(out.stdout.contains("a100  max 4992 (tf32)  below_threshold"));
}

#[test]
fn duplicate_kb_id_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let kb = write(dir.path(), "kb.toml", &format!("{ONE_AMD_KB}{}", &ONE_AMD_KB[ONE_AMD_KB.find("[[entries]]").unwrap()..]));
    let out = chipsig(&["scan", &fixture("dit_single_node"), "--kb", kb.to_str().unwrap()]);
    assert_eq!(out.code, EXIT_USAGE);
    assert!(out.stderr.contains("mi300x"), "{}", out.stderr);
}

#[test]
fn unknown_rule_field_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let rules = write(
        dir.path(),
        "rules.toml",
        "schema_version = 1\n[[rules]]\nrule_id = \"r\"\nmin_tier = \"config\"\nrequires = [\"tensor_cores = yes\"]\n[[rules.when]]\nkind = \"comm_backend\"\n",
    );
    let out = chipsig(&["scan", &fixture("dit_single_node"), "--rules", rules.to_str().unwrap()]);
    assert_eq!(out.code, EXIT_USAGE);
    assert!(out.stderr.contains("tensor_cores"));
}

#[test]
fn empty_candidate_set_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let kb = write(dir.path(), "kb.toml", ONE_AMD_KB);
    let out = chipsig(&["scan", &fixture("dit_single_node"), "--kb", kb.to_str().unwrap()]);
    assert_eq!(out.code, EXIT_NO_CANDIDATES);
    assert!(out.stdout.contains("CONFLICT: vendor = nvidia [nccl-requires-nvidia]"));
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "chipsig.toml", "mode = \"lenient\"\ntpp_threshold = 5000\n");
    let out = chipsig(&["scan", &fixture("ib_cluster_moe"), "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.code, EXIT_OK);
    assert!(out.stdout.contains("CANDIDATES (lenient mode)"));
    assert!(out.stdout.contains("TPP (threshold 5000)"));
    let out = chipsig(&["scan", &fixture("ib_cluster_moe"), "--config", cfg.to_str().unwrap(), "--mode", "strict"]);
    assert!(out.stdout.contains("CANDIDATES (strict mode)"));
}

#[test]
fn config_with_unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "chipsig.toml", "colour = true\n");
    let out = chipsig(&["scan", &fixture("ib_cluster_moe"), "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.code, EXIT_USAGE);
}

#[test]
fn argument_errors_and_help() {
    assert_eq!(chipsig(&["scan"]).code, EXIT_USAGE);
    assert_eq!(chipsig(&["scan", ".", "--mode", "loose"]).code, EXIT_USAGE);
    let help = chipsig(&["--help"]);
    assert_eq!(help.code, EXIT_OK);
    assert!(help.stdout.contains("scan"));
}

#[test]
fn kb_listing() {
    let out = chipsig(&["kb"]);
    assert_eq!(out.code, EXIT_OK);
    assert!(out.stdout.starts_with("schema_version 1, 14 entries"));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_chipsig");
    let ok = Command::new(bin).args(["scan", &fixture("dit_single_node")]).output().unwrap();
    assert_eq!(ok.status.code(), Some(EXIT_OK));
    let missing = Command::new(bin).args(["scan", "/definitely/not/here"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(EXIT_SCAN_FAILED));
}
