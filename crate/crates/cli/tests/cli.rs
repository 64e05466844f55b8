use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn soficlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_soficlab")).current_dir(dir).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn gen_cyclic_writes_the_shift() {
    let dir = tempfile::tempdir().unwrap();
    let o = soficlab(dir.path(), &["gen", "--group", "cyclic", "--size", "8"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.starts_with("soficapx 1\n"), "{text}");
    assert!(text.lines().any(|l| l == "1 2 3 4 5 6 7 0"), "{text}");
}

#[test]
fn round_reports_moved_points() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("v.txt"), "0 0 1 1 4\n").unwrap();
    let o = soficlab(dir.path(), &["round", "--in", "v.txt", "--out", "w.txt"]);
    assert_eq!(code(&o), 0);
    let moved: usize = stdout(&o).trim().strip_prefix("moved: ").unwrap().parse().unwrap();
    let w: Vec<usize> = fs::read_to_string(dir.path().join("w.txt"))
        .unwrap()
        .split_whitespace()
        .map(|t| t.parse().unwrap())
        .collect();
    let v = [0, 0, 1, 1, 4];
    let mut sorted = w.clone();
    sorted.sort_unstable();
    assert_eq!(sorted, vec![0, 1, 2, 3, 4]);
    assert_eq!(v.iter().zip(&w).filter(|(a, b)| a != b).count(), moved);
    assert_eq!(moved, 2);
}

#[test]
fn compare_prints_sup_and_tv() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&soficlab(dir.path(), &["gen", "--group", "integer", "--size", "8", "--labels", "1", "--out", "c.txt"])), 0);
    assert_eq!(code(&soficlab(dir.path(), &["stats", "--in", "c.txt", "--out", "a.json"])), 0);
    let o = soficlab(dir.path(), &["compare", "--a", "a.json", "--b", "a.json"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "sup: 0 (0)\ntv: 0 (0)\n");
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.txt"), "soficapx 1\n2 1\n1 x\n").unwrap();
    let o = soficlab(dir.path(), &["stats", "--in", "bad.txt"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"), "{o:?}");
    assert_eq!(code(&soficlab(dir.path(), &["stats", "--in", "missing.txt"])), 3);
    assert_eq!(code(&soficlab(dir.path(), &["frobnicate"])), 2);
    assert_eq!(code(&soficlab(dir.path(), &["gen", "--group", "free", "--size", "4"])), 2);

    // a 4-cycle is far from the Bernoulli shift of Z at radius 1
    soficlab(dir.path(), &["gen", "--group", "integer", "--size", "4", "--labels", "1", "--out", "c.txt"]);
    soficlab(dir.path(), &["stats", "--in", "c.txt", "--out", "s.json"]);
    let o = soficlab(dir.path(), &["verify", "--in", "s.json", "--oracle", "integer", "--epsilon", "0.02"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn invalid_pipelines_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        // wreath needs a Bernoulli extension
        "name = \"x\"\n[base]\ngroup = \"integer\"\nsize = 4\n[[stage]]\nkind = \"wreath\"\n",
        // sampled without a seed
        "name = \"x\"\n[base]\ngroup = \"integer\"\nsize = 4\n[[stage]]\nkind = \"bernoulli\"\nmode = \"sampled\"\nsamples = 10\n",
        "name = \"x\"\n[base]\ngroup = \"integer\"\nsize = 4\ncolour = \"red\"\n",
        "name = \"x\"\n",
    ];
    for (i, config) in cases.iter().enumerate() {
        let file = format!("c{i}.toml");
        fs::write(dir.path().join(&file), config).unwrap();
        let o = soficlab(dir.path(), &["run", "--in", &file, "--out", "out"]);
        assert_eq!(code(&o), 2, "{config}\n{o:?}");
    }
}

#[test]
fn base_only_pipeline_writes_the_approximation() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), "name = \"base\"\n[base]\ngroup = \"cyclic\"\nsize = 5\n").unwrap();
    let o = soficlab(dir.path(), &["run", "--in", "c.toml", "--out", "out"]);
    assert_eq!(code(&o), 0, "{o:?}");
    let base = fs::read_to_string(dir.path().join("out/base.txt")).unwrap();
    assert!(base.lines().any(|l| l == "1 2 3 4 0"), "{base}");
    assert!(dir.path().join("out/manifest.json").exists());
}

#[test]
fn wreath_smoke_preset_reports_exact_traces() {
    let dir = tempfile::tempdir().unwrap();
    let o = soficlab(dir.path(), &["run", "--preset", "wreath-z2-smoke", "--out", "out"]);
    assert_eq!(code(&o), 0, "{o:?}");
    let traces: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/traces.json")).unwrap()).unwrap();
    let values: Vec<&str> =
        traces["generators"].as_array().unwrap().iter().map(|g| g["fixed_fraction"].as_str().unwrap()).collect();
    assert_eq!(values, ["0", "1/2"]);
    let defects: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/defects.json")).unwrap()).unwrap();
    assert_eq!(defects["max_relator_defect"], "0");
}

#[test]
fn amalgam_preset_glues_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let o = soficlab(dir.path(), &["run", "--preset", "amalgam-z23", "--out", "out"]);
    assert_eq!(code(&o), 0, "{o:?}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/amalgam.json")).unwrap()).unwrap();
    assert_eq!(report["points"], 256);
    assert!(report["h_residuals"].as_array().unwrap().iter().all(|r| r == "0"));
}

#[test]
fn bernoulli_preset_passes_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let o = soficlab(dir.path(), &["run", "--preset", "bernoulli-Z-r1", "--out", "first"]);
    assert_eq!(code(&o), 0, "{o:?}");
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("first/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["pass"], true);
    assert_eq!(manifest["seeds"], serde_json::json!([7]));
    assert!(manifest["steps"].as_array().unwrap().iter().all(|s| s["seconds"].is_number()));

    let o = soficlab(dir.path(), &["--out", "second", "run", "--manifest", "first/manifest.json"]);
    assert_eq!(code(&o), 0, "{o:?}");
    for file in ["stats.json", "target.json", "verify.json", "base.txt"] {
        let a = fs::read(dir.path().join("first").join(file)).unwrap();
        let b = fs::read(dir.path().join("second").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
}

#[test]
fn failing_gate_exits_1_and_still_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = "name = \"tight\"\n[base]\ngroup = \"integer\"\nsize = 4\nlabels = 1\n[stats]\nradius = 1\n[verify]\ntarget = \"oracle\"\nepsilon = 0.02\n";
    fs::write(dir.path().join("c.toml"), config).unwrap();
    let o = soficlab(dir.path(), &["run", "--in", "c.toml", "--out", "out"]);
    assert_eq!(code(&o), 1, "{o:?}");
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["pass"], false);
    assert!(dir.path().join("out/verify.json").exists());
}

#[test]
fn threads_do_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    soficlab(dir.path(), &["gen", "--group", "free:2", "--size", "300", "--seed", "5", "--labels", "2", "--out", "f.txt"]);
    let run = |threads: &str, out: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_soficlab"))
            .current_dir(dir.path())
            .env("SOFICLAB_THREADS", threads)
            .args(["stats", "--in", "f.txt", "--radius", "2", "--mode", "sampled", "--samples", "2000", "--seed", "9", "--out", out])
            .output()
            .unwrap();
        assert_eq!(code(&o), 0, "{o:?}");
        fs::read(dir.path().join(out)).unwrap()
    };
    assert_eq!(run("1", "one.json"), run("4", "four.json"));
}
