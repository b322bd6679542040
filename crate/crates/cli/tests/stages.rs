use std::path::Path;
use std::process::Command;

const CONFIG: &str = r#"
method = "crowdteacher"

[data]
source = "generated"
n_samples = 300
features_per_family = 1

[coteach]
epochs = 3
batch_size = 64
"#;

fn cli(dir: &Path, args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_crowdteacher"))
        .current_dir(dir)
        .args(["--config", "cfg.toml", "--seed", "3"])
        .args(args)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn chained_stages_reproduce_a_full_run() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("cfg.toml"), CONFIG).unwrap();

    cli(dir, &["--out", "s", "gen-data"]);
    let train = ["--data", "s/train.csv", "--schema", "s/schema.json"];
    cli(dir, &[&["--out", "s", "simulate"][..], &train].concat());
    cli(dir, &["--out", "s", "infer", "--answers", "s/answers.csv"]);
    cli(dir, &[&["--out", "s", "synth"][..], &train].concat());
    cli(
        dir,
        &[
            &["--out", "s", "perturb"][..],
            &train,
            &["--pool", "s/pool.csv", "--inference", "s/inference.csv"],
        ]
        .concat(),
    );
    cli(
        dir,
        &[
            "--out",
            "s",
            "train",
            "--data",
            "s/training_input.csv",
            "--schema",
            "s/schema.json",
            "--inference",
            "s/inference.csv",
        ],
    );
    cli(
        dir,
        &[
            "--out",
            "s",
            "eval",
            "--model",
            "s/model.txt",
            "--data",
            "s/test.csv",
            "--schema",
            "s/schema.json",
        ],
    );

    cli(dir, &["--out", "full", "--dump-stages", "run"]);

    let read = |p: &str| std::fs::read_to_string(dir.join(p)).unwrap();
    for file in ["train.csv", "answers.csv", "inference.csv", "pool.csv", "training_input.csv", "model.txt"] {
        assert_eq!(read(&format!("s/{file}")), read(&format!("full/crowdteacher/{file}")), "{file}");
    }
    assert_eq!(read("s/eval.json"), read("full/crowdteacher/eval.json"));
}
