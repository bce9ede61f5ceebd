//! End-to-end behaviour of the `freqdeblur` binary.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_freqdeblur"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn oracle_default_passes_and_zero_cases_is_usage_error() {
    let o = run(&["oracle", "--cases", "50", "--precision", "f64"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let text = stdout(&o);
    for suite in [
        "convolution_theorem",
        "dft",
        "round_trip",
        "parseval",
        "fsas_maps",
    ] {
        assert!(text.contains(suite), "{suite} missing");
    }
    let rt: f64 = text
        .lines()
        .find(|l| l.starts_with("round_trip"))
        .and_then(|l| l.split_whitespace().nth(2))
        .unwrap()
        .parse()
        .unwrap();
    assert!(rt <= 1e-10);
    assert_eq!(code(&run(&["oracle", "--cases", "0"])), 2);
    assert_eq!(code(&run(&["oracle", "--precision", "f16"])), 2);
}

#[test]
fn gradcheck_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("micro.cfg");
    std::fs::write(
        &cfg,
        "# micro network\nscales=1\nenc_blocks=1\ndec_blocks=1\nbase_channels=4\n",
    )
    .unwrap();
    let ok = run(&["gradcheck", "--config", s(&cfg)]);
    assert_eq!(code(&ok), 0, "{}", stdout(&ok));
    assert!(stdout(&ok).contains("max_rel_err"));

    let bad = run(&[
        "gradcheck",
        "--config",
        s(&cfg),
        "--corrupt-adjoint",
        "layer_norm",
    ]);
    assert_eq!(code(&bad), 1);
    assert!(stdout(&bad).contains("FAIL layer_norm: parameter norm."));

    assert_eq!(
        code(&run(&[
            "gradcheck",
            "--config",
            s(&dir.path().join("missing.cfg"))
        ])),
        2
    );
    assert_eq!(code(&run(&["gradcheck", "--set", "colour=red"])), 2);
    assert_eq!(code(&run(&["gradcheck", "--set", "base_channels=3"])), 2);
}

#[test]
fn eval_on_identical_pairs_reports_sentinels() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = dir.path().join("pairs");
    assert_eq!(
        code(&run(&[
            "synth",
            "--out",
            s(&pairs),
            "--n",
            "2",
            "--size",
            "24"
        ])),
        0
    );
    let same = dir.path().join("same");
    for sub in ["blur", "sharp"] {
        std::fs::create_dir_all(same.join(sub)).unwrap();
        for n in ["0000.ppm", "0001.ppm"] {
            std::fs::copy(pairs.join("sharp").join(n), same.join(sub).join(n)).unwrap();
        }
    }
    let ckpt = dir.path().join("m.ckpt");
    assert_eq!(code(&run(&["init", "--out", s(&ckpt)])), 0);
    let o = run(&["eval", "--ckpt", s(&ckpt), "--pairs", s(&same)]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("mean psnr INF"), "{text}");
    assert!(text.contains("mean ssim 1.0000"), "{text}");
    assert_eq!(
        code(&run(&[
            "eval",
            "--ckpt",
            s(&ckpt),
            "--pairs",
            s(&dir.path().join("nope"))
        ])),
        1
    );
}

fn effective_config(out: &str) -> String {
    out.lines()
        .skip_while(|l| *l != "# effective config")
        .skip(1)
        .take_while(|l| l.contains('='))
        .map(|l| format!("{l}\n"))
        .collect()
}

#[test]
fn echoed_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = dir.path().join("pairs");
    assert_eq!(
        code(&run(&[
            "synth",
            "--out",
            s(&pairs),
            "--n",
            "4",
            "--size",
            "16",
            "--seed",
            "3"
        ])),
        0
    );
    let a = dir.path().join("a.ckpt");
    let first = run(&[
        "train",
        "--data",
        s(&pairs),
        "--out",
        s(&a),
        "--set",
        "scales=1",
        "--set",
        "enc_blocks=1",
        "--set",
        "dec_blocks=1",
        "--set",
        "base_channels=4",
        "--set",
        "total_steps=6",
        "--set",
        "val_every=3",
        "--set",
        "crop=16",
        "--set",
        "seed=5",
    ]);
    assert_eq!(
        code(&first),
        0,
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let echoed = effective_config(&stdout(&first));
    assert!(echoed.contains("total_steps=6") && echoed.contains("base_channels=4"));
    let cfg = dir.path().join("echo.cfg");
    std::fs::write(&cfg, &echoed).unwrap();

    let b = dir.path().join("b.ckpt");
    let second = run(&[
        "train",
        "--config",
        s(&cfg),
        "--data",
        s(&pairs),
        "--out",
        s(&b),
    ]);
    assert_eq!(code(&second), 0);
    assert_eq!(effective_config(&stdout(&second)), echoed);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let (ma, mb) = (
        std::fs::read_to_string(a.with_extension("csv")).unwrap(),
        std::fs::read_to_string(b.with_extension("csv")).unwrap(),
    );
    assert_eq!(ma, mb);
    assert!(ma.starts_with("step,lr,loss,psnr\n"));
    assert_eq!(ma.lines().count(), 7);

    let o = dir.path().join("out.ppm");
    let d = run(&[
        "deblur",
        "--ckpt",
        s(&b),
        "--in",
        s(&pairs.join("blur/0000.ppm")),
        "--out",
        s(&o),
    ]);
    assert_eq!(code(&d), 0);
    assert_eq!(
        std::fs::read(&o).unwrap().len(),
        std::fs::read(pairs.join("blur/0000.ppm")).unwrap().len()
    );
    let leftovers: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().contains(".tmp"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn train_failures_leave_no_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.ckpt");
    let o = run(&[
        "train",
        "--data",
        s(&dir.path().join("absent")),
        "--out",
        s(&out),
        "--set",
        "total_steps=1",
    ]);
    assert_eq!(code(&o), 1);
    assert!(!out.exists());
    let o = run(&[
        "train",
        "--data",
        s(dir.path()),
        "--out",
        s(&out),
        "--set",
        "lr_min=1",
        "--set",
        "lr_max=0.1",
    ]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
}

#[test]
fn bench_writes_three_rows_per_mechanism() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let o = run(&["bench", "--sizes", "16,32,64", "--out", s(&csv)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("mechanism,n_pixels,window,median_ms,op_count,workset_bytes")
    );
    let rows: Vec<&str> = lines.collect();
    for m in ["fsas", "window_attention", "quadratic_oracle"] {
        assert_eq!(
            rows.iter()
                .filter(|r| r.starts_with(&format!("{m},")))
                .count(),
            3,
            "{m}"
        );
    }
    assert_eq!(code(&run(&["bench", "--sizes", "0", "--out", s(&csv)])), 2);
    assert_eq!(
        code(&run(&["bench", "--sizes", "16,x", "--out", s(&csv)])),
        2
    );
}
