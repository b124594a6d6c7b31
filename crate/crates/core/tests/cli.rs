//! End-to-end runs of the command-line front end on the shipped corpus.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use dyntwist::cli::{run, Cli, Status};
use dyntwist::suite::CORPUS;
use tempfile::TempDir;

fn corpus_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus").join(format!("{name}.txt"))
}

fn exec(args: &[&str]) -> (Status, String) {
    let cli = Cli::try_parse_from(std::iter::once("dyntwist").chain(args.iter().copied())).expect("arguments parse");
    run(&cli)
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn every_example_passes_check_and_quantize() {
    for (name, _) in CORPUS {
        let alg = corpus_path(name);
        for cmd in ["check-rmatrix", "quantize"] {
            let (status, report) = exec(&[cmd, "--algebra", path_str(&alg)]);
            assert_eq!(status, Status::Pass, "{cmd} on {name}:\n{report}");
            assert!(report.ends_with("result: pass\n"));
        }
    }
}

#[test]
fn quantize_then_verify_round_trip() {
    let dir = TempDir::new().unwrap();
    let alg = corpus_path("sl2");
    let out = dir.path().join("sl2.twist");
    let (status, report) = exec(&["quantize", "--algebra", path_str(&alg), "--out", path_str(&out)]);
    assert_eq!(status, Status::Pass, "{report}");
    assert!(report.contains("valuation certificate: [0, 1, 2]"));
    let text = fs::read_to_string(&out).unwrap();
    for layer in 1..=3 {
        assert!(text.contains(&format!("hbar {layer}")), "missing layer {layer}");
    }

    let (status, report) = exec(&["verify-twist", "--algebra", path_str(&alg), "--rmatrix", path_str(&alg), path_str(&out)]);
    assert_eq!(status, Status::Pass, "{report}");
    assert!(report.contains("semiclassical limit: pass"));

    // Corrupt one coefficient in the twist block only.
    let twist_end = text.find("\nend").unwrap();
    let line_start = text[..twist_end].rfind("\n  ").unwrap() + 3;
    let coeff_end = line_start + text[line_start..].find(" * ").unwrap();
    let bad = format!("{}7{}", &text[..line_start], &text[coeff_end..]);
    let bad_path = dir.path().join("bad.twist");
    fs::write(&bad_path, bad).unwrap();
    let (status, report) = exec(&["verify-twist", "--algebra", path_str(&alg), path_str(&bad_path)]);
    assert_eq!(status, Status::Residual, "{report}");
}

#[test]
fn input_and_residual_failures_map_to_exit_codes() {
    let dir = TempDir::new().unwrap();
    let alg = corpus_path("sl2");
    let noninv = dir.path().join("noninv.r");
    fs::write(&noninv, "rmatrix\n1 * e^h * 1\nend\n").unwrap();
    let (status, report) = exec(&["check-rmatrix", "--algebra", path_str(&alg), "--rmatrix", path_str(&noninv)]);
    assert_eq!(status, Status::Input, "{report}");

    let nonmc = dir.path().join("nonmc.r");
    fs::write(&nonmc, "rmatrix\ntruncation 3\n1 * e^f * 1\n1 * e^f * h\n2 * e^f * h.h\nend\n").unwrap();
    for cmd in ["check-rmatrix", "quantize"] {
        let (status, report) = exec(&[cmd, "--algebra", path_str(&alg), "--rmatrix", path_str(&nonmc)]);
        assert_eq!(status, Status::Residual, "{cmd}:\n{report}");
    }

    let zero = dir.path().join("zero.r");
    fs::write(&zero, "rmatrix\nend\n").unwrap();
    let (status, _) = exec(&["check-rmatrix", "--algebra", path_str(&alg), "--rmatrix", path_str(&zero)]);
    assert_eq!(status, Status::Pass);

    let broken = dir.path().join("broken.txt");
    fs::write(&broken, "algebra\ndim 2\nbasis x y\nbracket x y -> (1, x)\nbracket y x -> (1, x)\nend\n").unwrap();
    let (status, report) = exec(&["check-rmatrix", "--algebra", path_str(&broken)]);
    assert_eq!(status, Status::Input, "{report}");

    let (status, _) = exec(&["quantize", "--algebra", path_str(&dir.path().join("missing.txt"))]);
    assert_eq!(status, Status::Input);
    let (status, _) = exec(&["quantize"]);
    assert_eq!(status, Status::Input);
}

#[test]
fn seeded_quantization_is_gauge_equivalent() {
    let dir = TempDir::new().unwrap();
    let alg = corpus_path("sl2");
    let (a, b) = (dir.path().join("a.twist"), dir.path().join("b.twist"));
    assert_eq!(exec(&["quantize", "--algebra", path_str(&alg), "--out", path_str(&a)]).0, Status::Pass);
    let (status, report) =
        exec(&["quantize", "--algebra", path_str(&alg), "--seed", "5", "--out", path_str(&b)]);
    assert_eq!(status, Status::Pass, "{report}");
    assert_ne!(fs::read_to_string(&a).unwrap(), fs::read_to_string(&b).unwrap());
    let (status, report) = exec(&["gauge-equiv", "--algebra", path_str(&alg), path_str(&a), path_str(&b)]);
    assert_eq!(status, Status::Pass, "{report}");
    assert!(report.contains("equivalent: yes"));
}

#[test]
fn reduce_classical_on_sl2() {
    let alg = corpus_path("sl2");
    let (status, report) = exec(&["reduce-classical", "--algebra", path_str(&alg)]);
    assert_eq!(status, Status::Pass, "{report}");
    assert!(report.contains("1 hbar^1 * e^f"), "{report}");
    let (status, _) = exec(&["reduce-classical", "--algebra", path_str(&corpus_path("semidirect"))]);
    assert_eq!(status, Status::Input);
}

#[test]
fn reports_are_deterministic() {
    let alg = corpus_path("semidirect");
    let args = ["quantize", "--algebra", path_str(&alg), "--seed", "11"];
    let first = exec(&args);
    assert_eq!(first.0, Status::Pass, "{}", first.1);
    assert_eq!(first, exec(&args));
}
