use std::process::Command;

use commute::cli::run;
use commute::report::SCHEMA;
use serde_json::Value;

fn cli(args: &[&str]) -> (u8, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("commute").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn cli_json(args: &[&str]) -> (u8, Value) {
    let (code, out, err) = cli(args);
    assert!(err.is_empty(), "{err}");
    (code, serde_json::from_str(&out).unwrap())
}

fn assert_schema_valid(v: &Value) {
    let schema: Value = serde_json::from_str(SCHEMA).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(v).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{}", errors.join("\n"));
}

#[test]
fn verify_exit_codes_follow_the_verdict() {
    assert_eq!(cli(&["verify", "memory", "-m", "read", "-n", "write", "--phi", "s.x == y1"]).0, 0);
    let (code, out, _) = cli(&["verify", "memory.adt", "-m", "read", "-n", "write", "--phi", "true"]);
    assert_eq!(code, 1);
    assert!(out.contains("counterexample"), "{out}");
    assert!(out.contains("read returns"), "{out}");
    assert_eq!(cli(&["verify", "counter", "-m", "incr", "-n", "incr", "--phi", "true", "--suffix-depth", "0"]).0, 0);
    let (code, _, _) = cli(&["verify", "list", "-m", "isempty", "-n", "isempty", "--phi", "true", "--state-budget", "10"]);
    assert_eq!(code, 2);
}

#[test]
fn usage_and_input_errors_exit_3() {
    let (code, _, err) = cli(&["verify", "memory", "-m", "read", "-n", "nope", "--phi", "true"]);
    assert_eq!(code, 3);
    assert!(err.starts_with("error:"), "{err}");
    assert_eq!(cli(&["verify", "no_such_adt", "-m", "a", "-n", "b", "--phi", "true"]).0, 3);
    assert_eq!(cli(&["verify", "memory", "-m", "read", "-n", "write", "--phi", "s.y == 1"]).0, 3);
    assert_eq!(cli(&["verify", "memory", "-m", "read", "-n", "write", "--phi", "true", "--lo", "3", "--hi", "1"]).0, 3);
    assert_eq!(cli(&["frobnicate"]).0, 3);
    let (code, out, _) = cli(&["--help"]);
    assert_eq!(code, 0);
    for sub in ["verify", "bench", "equiv", "emit", "reach"] {
        assert!(out.contains(sub), "{out}");
    }
}

#[test]
fn adt_files_on_disk_take_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("memory.adt");
    // a cell whose write ignores its argument: read and write now commute
    std::fs::write(&path, "adt Memory { state { x: int = 0; } method read() -> int { return x; } method write(v: int) -> int { return 0; } }").unwrap();
    let p = path.to_str().unwrap();
    assert_eq!(cli(&["verify", p, "-m", "read", "-n", "write", "--phi", "true"]).0, 0);
    assert_eq!(cli(&["verify", "memory", "-m", "read", "-n", "write", "--phi", "true"]).0, 1);
}

#[test]
fn const_bindings_change_capacity() {
    let (_, small) = cli_json(&["reach", "arraystack", "--const", "MAXSTACK=2", "--const", "MAX=1", "--lo", "0", "--hi", "1", "--json"]);
    // heights -1, 0, 1, each with any of the four cell contents left by pops
    assert_eq!(small["states"], 12);
    assert_eq!(cli(&["reach", "arraystack", "--const", "NOPE=2"]).0, 3);
}

#[test]
fn verify_json_matches_schema() {
    let cases: &[&[&str]] = &[
        &["verify", "memory", "-m", "read", "-n", "write", "--phi", "s.x == y1", "--json"],
        &["verify", "memory", "-m", "write", "-n", "write", "--phi", "true", "--json", "--inv", "s1.x == s2.x"],
        &["verify", "counter", "-m", "incr", "-n", "clear", "--phi", "true", "--json", "--pieces"],
        &["verify", "simpleset", "-m", "isin", "-n", "getsize", "--phi", "true", "--json", "--inv", commute::bench::I_SS],
        &["verify", "arraystack", "-m", "push", "-n", "push", "--phi", "true", "--json", "--inv", commute::bench::I_AS],
        &["verify", "memory", "-m", "write", "-n", "write", "--phi", "true", "--json", "--inv", "true"],
        &["verify", "list", "-m", "isempty", "-n", "isempty", "--phi", "true", "--json", "--state-budget", "10"],
        &["verify", "counter", "-m", "decr", "-n", "decr", "--phi", "true", "--json", "--scope", "all"],
    ];
    for args in cases {
        let (code, v) = cli_json(args);
        assert_schema_valid(&v);
        let verdict = v["verdict"].as_str().unwrap();
        assert_eq!(code, match verdict {
            "valid" => 0,
            "invalid" => 1,
            _ => 2,
        });
        assert_eq!(v["counterexample"].is_null(), verdict != "invalid", "{args:?}");
    }
}

#[test]
fn schema_rejects_malformed_reports() {
    let (_, mut v) = cli_json(&["verify", "memory", "-m", "read", "-n", "write", "--phi", "true", "--json"]);
    let schema: Value = serde_json::from_str(SCHEMA).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    assert!(validator.is_valid(&v));
    v["counterexample"] = Value::Null;
    assert!(!validator.is_valid(&v), "invalid verdict without counterexample");
    v["verdict"] = "maybe".into();
    assert!(!validator.is_valid(&v));
}

#[test]
fn bench_json_matches_schema_for_all_rows() {
    let (code, v) = cli_json(&["bench", "all", "--json"]);
    assert_eq!(code, 0);
    assert_schema_valid(&v);
    assert_eq!(v["rows"].as_array().unwrap().len(), 65);
    assert_eq!(v["matched"], 64);
    assert_eq!(v["skipped"], 1);
    assert_eq!(v["failed"], 0);
}

#[test]
fn bench_is_deterministic_across_job_counts() {
    let strip = |mut v: Value| {
        v["timeMs"] = Value::Null;
        for row in v["rows"].as_array_mut().unwrap() {
            if row["report"].is_object() {
                row["report"]["timeMs"] = Value::Null;
                row["report"]["stats"]["wallMs"] = Value::Null;
            }
        }
        v
    };
    let (_, a) = cli_json(&["bench", "fig5", "--json", "--jobs", "1"]);
    let (_, b) = cli_json(&["bench", "fig5", "--json", "--jobs", "4"]);
    let (_, c) = cli_json(&["bench", "fig5", "--json", "--jobs", "4"]);
    assert_eq!(strip(a.clone()), strip(b));
    assert_eq!(strip(a), strip(c));
}

#[test]
fn bench_text_lists_rows_and_summary() {
    let (code, out, _) = cli(&["bench", "fig5"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().filter(|l| l.starts_with("ok")).count(), 22);
    assert_eq!(out.lines().filter(|l| l.starts_with("--")).count(), 1);
    assert!(out.contains("22 matched, 1 skipped, 0 failed of 23 rows"), "{out}");
}

#[test]
fn bench_reads_an_override_directory() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("memory.adt"), commute::bench::bundled_source("memory").unwrap()).unwrap();
    std::fs::write(
        dir.path().join("suite.toml"),
        r#"
[defaults]
lo = -1
hi = 3
client_depth = 6
suffix_depth = 6
state_budget = 200000
fuel = 10000

[adts.memory]
file = "memory.adt"

[[row]]
table = "fig5"
adt = "memory"
m = "read"
n = "write"
phi = "true"
expected = "valid"
"#,
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_commute"))
        .args(["bench", "fig5"])
        .env(commute::bench::SUITE_DIR_VAR, dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 matched, 0 skipped, 1 failed of 1 rows"));
}

#[test]
fn equiv_examples() {
    let (code, out, _) = cli(&["equiv", "simpleset", "a=5,b=3,sz=2", "a=3,b=5,sz=2", "--hi", "5"]);
    assert_eq!(code, 0, "{out}");
    let (code, v) = cli_json(&["equiv", "memory", "x=1", "x=2", "--json"]);
    assert_eq!(code, 1);
    assert_eq!(v["equivalent"], false);
    let steps = v["suffix"]["steps"].as_array().unwrap();
    assert_eq!(steps.len(), 1);
    assert_eq!(steps[0]["method"], "read");
    let stack = "top=1,a=[4,2]";
    assert_eq!(cli(&["equiv", "arraystack", stack, stack]).0, 0);
    assert_eq!(cli(&["equiv", "arraystack", "top=1,a=[4,2,3]", "top=1,a=[4,2,0]"]).0, 0);
    assert_eq!(cli(&["equiv", "arraystack", "top=1,a=[4,2]", "top=1,a=[2,4]"]).0, 1);
    assert_eq!(cli(&["equiv", "memory", "y=1", "x=2"]).0, 3);
}

#[test]
fn reach_census() {
    let (_, v) = cli_json(&["reach", "memory", "--lo", "0", "--hi", "1", "--json"]);
    assert_eq!(v["states"], 2);
    assert_eq!(v["complete"], true);
    let (_, out, _) = cli(&["reach", "simpleset", "--lo", "1", "--hi", "2", "--client-depth", "4", "--list"]);
    assert!(out.contains("a=1,b=2,sz=2"), "{out}");
    assert!(out.contains("a=2,b=1,sz=2"), "{out}");
    let (_, v) = cli_json(&["reach", "counter", "--client-depth", "0", "--json"]);
    assert_eq!(v["states"], 1);
}

#[test]
fn emit_writes_deterministic_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let args = ["emit", "simpleset", "-m", "add", "-n", "isin", "--phi", "x1 != y1", "--emit-dir", d, "--json"];
    let (code, first) = cli_json(&args);
    assert_eq!(code, 0);
    let files = first.as_array().unwrap();
    assert_eq!(files.len(), 1);
    assert!(files[0]["path"].as_str().unwrap().ends_with("simpleset_add_isin_mono.c"));
    let (_, second) = cli_json(&args);
    assert_eq!(first, second);

    let (code, pieces) = cli_json(&[
        "emit", "arraystack", "-m", "push", "-n", "pop", "--phi", "true", "--kind", "pieces", "--inv",
        commute::bench::I_AS, "--emit-dir", d, "--json",
    ]);
    assert_eq!(code, 0);
    let names: Vec<&str> = pieces.as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap()).collect();
    assert_eq!(names.len(), 3);
    for (name, kind) in names.iter().zip(["piece1", "piece2", "piece3"]) {
        assert!(name.ends_with(&format!("arraystack_push_pop_{kind}.c")), "{name}");
        assert!(std::path::Path::new(name).exists());
    }
}

#[test]
fn emit_interprets_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let (code, v) = cli_json(&["emit", "counter", "-m", "decr", "-n", "decr", "--phi", "true", "--emit-dir", d, "--interpret", "--json"]);
    assert_eq!(code, 1);
    assert_eq!(v[0]["outcome"]["result"], "errorReachable");
    let (code, out, _) = cli(&["emit", "memory", "-m", "read", "-n", "write", "--phi", "s.x == y1", "--emit-dir", d, "--interpret"]);
    assert_eq!(code, 0);
    assert!(out.contains("safe"), "{out}");
}

#[test]
fn loop_invariant_comment_is_emitted() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    cli(&["emit", "memory", "-m", "read", "-n", "write", "--phi", "true", "--emit-dir", d, "--loop-inv", "o1.x >= -1"]);
    let text = std::fs::read_to_string(dir.path().join("memory_read_write_mono.c")).unwrap();
    assert!(text.contains("o1.x >= -1"), "{text}");
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_commute");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code();
    assert_eq!(status(&["verify", "memory", "-m", "read", "-n", "write", "--phi", "s.x == y1"]), Some(0));
    assert_eq!(status(&["verify", "memory", "-m", "read", "-n", "write", "--phi", "true"]), Some(1));
    assert_eq!(status(&["verify", "list", "-m", "isempty", "-n", "isempty", "--phi", "true", "--state-budget", "5"]), Some(2));
    assert_eq!(status(&["verify", "memory"]), Some(3));
}
