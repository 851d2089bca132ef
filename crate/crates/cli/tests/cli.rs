use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn negbayes(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_negbayes"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const TOPICS: [[&str; 4]; 3] = [
    ["apple", "banana", "cherry", "grape"],
    ["engine", "piston", "gear", "clutch"],
    ["violin", "cello", "flute", "oboe"],
];

/// 40 documents per class, each mixing topic words with shared filler.
fn write_corpus(dir: &Path) {
    let filler = ["the", "and", "with", "from", "about"];
    let mut lines = Vec::new();
    let mut state = 12345u64;
    let mut next = |n: usize| {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 33) as usize) % n
    };
    for (c, words) in TOPICS.iter().enumerate() {
        for d in 0..40 {
            let text: Vec<&str> = (0..25)
                .map(|_| if next(2) == 0 { words[next(4)] } else { filler[next(5)] })
                .collect();
            lines.push(format!(
                "{{\"id\": \"c{c}-{d}\", \"text\": \"{}\", \"class\": \"topic{c}\"}}",
                text.join(" ")
            ));
        }
    }
    fs::write(dir.join("corpus.jsonl"), lines.join("\n") + "\n").unwrap();
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path());
    let o = negbayes(
        &["ingest", "corpus.jsonl", "bundle.jsonl", "--train-frac", "0.5", "--s1-frac", "0.5", "--seed", "3"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    dir
}

#[test]
fn ingest_writes_bundle_and_split() {
    let dir = setup();
    let d = dir.path();
    for f in ["bundle.jsonl", "bundle.train.jsonl", "bundle.test.jsonl", "bundle.split.json"] {
        assert!(d.join(f).exists(), "{f}");
    }
    let o = negbayes(&["ingest", "--min-count", "2", "corpus.jsonl", "again.jsonl"], d);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("docs 120") && out.contains("classes 3"), "{out}");
    let header = fs::read_to_string(d.join("bundle.jsonl")).unwrap();
    assert!(header.starts_with("{\"classes\":[\"topic0\",\"topic1\",\"topic2\"],\"vocab\":["));
}

#[test]
fn ingest_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path());
    let o = negbayes(&["ingest", "missing.jsonl", "out.jsonl"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("missing.jsonl"));
    let o = negbayes(&["ingest", "--min-count", "0", "corpus.jsonl", "out.jsonl"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("min-count"));
    assert!(stdout(&o).is_empty());
}

#[test]
fn train_evaluate_predict() {
    let dir = setup();
    let d = dir.path();
    for est in ["nb", "l1", "l2", "self-correct"] {
        let model = format!("{est}.model.json");
        let o = negbayes(&["train", "bundle.train.jsonl", "--estimator", est, "-o", &model], d);
        assert_eq!(code(&o), 0, "{est}: {}", stderr(&o));
        let o = negbayes(&["evaluate", &model, "bundle.test.jsonl", "-o", &format!("{est}.report.json")], d);
        assert_eq!(code(&o), 0, "{est}: {}", stderr(&o));
        assert!(stdout(&o).starts_with("macro accuracy "));
        let csv = fs::read_to_string(d.join(format!("{est}.report.csv"))).unwrap();
        assert!(csv.starts_with("class,count,correct,accuracy\ntopic0,20,"), "{csv}");
    }
    let model = fs::read_to_string(d.join("l2.model.json")).unwrap();
    assert!(model.contains("\"estimator\":\"L2\""));
    assert!(model.contains("\"t\":2.0000000000000000e0"));
    assert!(model.contains("\"alpha\":1.0000000000000000e-2"));

    let o = negbayes(&["predict", "nb.model.json", "bundle.test.jsonl"], d);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let lines: Vec<String> = stdout(&o).lines().map(str::to_owned).collect();
    assert_eq!(lines.len(), 60);
    assert!(lines[0].starts_with("{\"id\":"), "{}", lines[0]);

    let o = negbayes(&["predict", "nb.model.json", "corpus.jsonl", "--input-format", "jsonl", "-o", "p.jsonl"], d);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read_to_string(d.join("p.jsonl")).unwrap().lines().count(), 120);
}

#[test]
fn train_errors() {
    let dir = setup();
    let d = dir.path();
    let o = negbayes(&["train", "bundle.train.jsonl", "--estimator", "l2", "--t", "1", "-o", "m.json"], d);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--t must be > 1"));
    let o = negbayes(&["train", "bundle.train.jsonl", "--estimator", "l2", "--alpha", "-1", "-o", "m.json"], d);
    assert_eq!(code(&o), 2);

    // S2-only dataset
    let o = negbayes(&["ingest", "corpus.jsonl", "neg.jsonl", "--train-frac", "0.5", "--s1-frac", "0"], d);
    assert_eq!(code(&o), 0);
    let o = negbayes(&["train", "neg.train.jsonl", "--estimator", "nb", "-o", "m.json"], d);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("positively labeled"), "{}", stderr(&o));
    let o = negbayes(&["train", "neg.train.jsonl", "--estimator", "l1", "-o", "m.json"], d);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn evaluate_errors() {
    let dir = setup();
    let d = dir.path();
    let o = negbayes(&["train", "bundle.train.jsonl", "--estimator", "nb", "-o", "m.json"], d);
    assert_eq!(code(&o), 0);

    fs::write(d.join("other.jsonl"), "{\"id\": \"x\", \"text\": \"zebra yak zebra yak\", \"class\": \"a\"}\n{\"id\": \"y\", \"text\": \"zebra yak\", \"class\": \"b\"}\n").unwrap();
    let o = negbayes(&["ingest", "other.jsonl", "other.bundle.jsonl", "--min-count", "1"], d);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = negbayes(&["evaluate", "m.json", "other.bundle.jsonl", "-o", "r.json"], d);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    let model_hash = negbayes::Model::load(&d.join("m.json")).unwrap().vocab.fingerprint();
    assert!(err.contains("vocabulary mismatch") && err.contains(&model_hash), "{err}");

    let header = fs::read_to_string(d.join("bundle.test.jsonl")).unwrap();
    fs::write(d.join("empty.jsonl"), header.lines().next().unwrap().to_owned() + "\n").unwrap();
    let o = negbayes(&["evaluate", "m.json", "empty.jsonl", "-o", "r.json"], d);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("empty"));
}

#[test]
fn experiment_runs_presets() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_corpus(d);
    fs::write(
        d.join("fig1.json"),
        r#"{"dataset": {"path": "corpus.jsonl"}, "preset": "fig1_mixed", "seeds": [1, 2], "class_selection": "all"}"#,
    )
    .unwrap();
    let o = negbayes(&["experiment", "fig1.json"], d);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("fig1_mixed"));
    let csv = fs::read_to_string(d.join("fig1.csv")).unwrap();
    assert!(csv.starts_with("estimator,seed,class,accuracy\n"));
    for e in ["NB,mean,macro", "L1,mean,macro", "L2,mean,macro"] {
        assert!(csv.contains(e), "{e}");
    }

    fs::write(
        d.join("fig2.toml"),
        "preset = \"fig2_negative_only\"\nseeds = [1]\nclass_selection = \"all\"\n[dataset]\npath = \"corpus.jsonl\"\n",
    )
    .unwrap();
    let o = negbayes(&["experiment", "fig2.toml", "-o", "neg"], d);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(d.join("neg.json").exists());

    fs::write(d.join("bad.json"), r#"{"dataset": {"path": "corpus.jsonl"}, "preset": "fig7"}"#).unwrap();
    let o = negbayes(&["experiment", "bad.json"], d);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    for p in ["fig1_mixed", "fig2_negative_only", "fig3_s1_only", "fig4_trainset_eval"] {
        assert!(err.contains(p), "{err}");
    }

    fs::write(
        d.join("nb2.json"),
        r#"{"dataset": {"path": "corpus.jsonl"}, "preset": "fig2_negative_only", "estimators": ["NB"]}"#,
    )
    .unwrap();
    let o = negbayes(&["experiment", "nb2.json"], d);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("positively labeled"));
}

const THEORY: &str = r#"{
  "synthetic": {
    "k": 2, "v": 3, "m": 20,
    "theta_true": [[0.5, 0.3, 0.2], [0.2, 0.3, 0.5]],
    "priors_true": [0.5, 0.5],
    "negative_scheme": {"k_count": 1},
    "n1": 100, "n2": 100, "allocation": "stratified"
  },
  "checks": ["nb_unbiased", "l1_bias", "variance_slope"],
  "sample_sizes": [100, 200, 400]
}"#;

#[test]
fn verify_theory_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("thm.json"), THEORY).unwrap();
    let a = negbayes(&["--threads", "1", "verify-theory", "thm.json", "--trials", "300", "--seed", "7", "-o", "a.csv"], d);
    let b = negbayes(&["--threads", "3", "verify-theory", "thm.json", "--trials", "300", "--seed", "7", "-o", "b.csv"], d);
    assert!(code(&a) <= 1 && code(&b) <= 1, "{}", stderr(&a));
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).contains("nb_unbiased"));
    assert_eq!(fs::read(d.join("a.csv")).unwrap(), fs::read(d.join("b.csv")).unwrap());
    assert_eq!(
        fs::read(d.join("a.convergence.csv")).unwrap(),
        fs::read(d.join("b.convergence.csv")).unwrap()
    );
    let csv = fs::read_to_string(d.join("a.csv")).unwrap();
    assert!(csv.starts_with("estimator,t,class,term,theta_true,mean,bias,variance,mse,standard_error,trials\n"));
    let meta = fs::read_to_string(d.join("a.meta.json")).unwrap();
    assert!(meta.contains("\"seed\":7"));

    let o = negbayes(&["verify-theory", "thm.json", "--trials", "1"], d);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("trials"));
}

#[test]
fn help_documents_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let train = stdout(&negbayes(&["train", "--help"], dir.path()));
    assert!(train.contains("[default: 2]") && train.contains("[default: 0.01]"), "{train}");
    let verify = stdout(&negbayes(&["verify-theory", "--help"], dir.path()));
    assert!(verify.contains("[default: 10000]"), "{verify}");
    for sub in ["ingest", "predict", "evaluate", "experiment"] {
        let o = negbayes(&[sub, "--help"], dir.path());
        assert_eq!(code(&o), 0);
    }
    let o = negbayes(&["train"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn ingest_labeled_dirs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for (class, text) in [("sci.space", "orbit rocket orbit launch"), ("rec.autos", "engine wheel engine launch")] {
        fs::create_dir_all(d.join("news").join(class)).unwrap();
        fs::write(d.join("news").join(class).join("1"), text).unwrap();
        fs::write(d.join("news").join(class).join("2"), text).unwrap();
    }
    let o = negbayes(&["ingest", "--format", "labeled_dirs", "--min-count", "2", "news", "out/corpus.jsonl"], d);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("docs 4") && stdout(&o).contains("classes 2"));
    let o = negbayes(&["predict", "out/corpus.jsonl", "news", "--input-format", "labeled_dirs"], d);
    assert_eq!(code(&o), 1);
}
