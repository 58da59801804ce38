use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "fixtures", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_schottky")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8")
}

#[test]
fn verify_exit_codes() {
    let ok = run(&["verify", &fixture("rank2.json")]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("PASS loxodromic words=1456"));

    let overlap = run(&["verify", &fixture("overlap.json")]);
    assert_eq!(overlap.status.code(), Some(1));
    assert!(stdout(&overlap).contains("CirclesOverlap(0,1)"));

    let bad = run(&["verify", &fixture("malformed.json")]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("line 1 column"));

    assert_eq!(run(&["verify", "/nonexistent.json"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "--tol", "-1", &fixture("rank2.json")]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn verify_respects_word_cap() {
    let o = run(&["verify", "--depth", "8", "--max-words", "100", &fixture("rank2.json")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("CapExceeded"));
}

#[test]
fn rank_one_limit_points_cluster_at_fixed_points() {
    let o = run(&["limitset", "--depth", "12", "--format", "csv", &fixture("rank1.json")]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y"));
    let s3 = 3f64.sqrt();
    let mut seen = [false, false];
    for line in lines {
        let (x, y) = line.split_once(',').unwrap();
        let (x, y): (f64, f64) = (x.parse().unwrap(), y.parse().unwrap());
        assert!(y.abs() < 1e-9);
        assert!((x.abs() - s3).abs() < 1e-3, "{x}");
        seen[usize::from(x > 0.0)] = true;
    }
    assert_eq!(seen, [true, true]);
}

#[test]
fn limitset_svg_and_caps() {
    for (file, g) in [("rank1.json", 1), ("rank2.json", 2)] {
        let o = run(&["limitset", "--depth", "1", "--format", "svg", &fixture(file)]);
        assert_eq!(o.status.code(), Some(0));
        assert_eq!(stdout(&o).matches("<circle").count(), 2 * g);
    }
    let o = run(&["limitset", "--depth", "30", &fixture("rank2.json")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("CapExceeded"));
}

#[test]
fn out_flag_writes_file() {
    let dir = std::env::temp_dir().join(format!("schottky-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("points.csv");
    let o = run(&["limitset", "--depth", "3", "--format", "csv", "--out", path.to_str().unwrap(), &fixture("rank2.json")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let body = std::fs::read_to_string(&path).unwrap();
    // 4 * 3^2 leaves plus the header.
    assert_eq!(body.lines().count(), 37);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn fold_examples() {
    let rose = run(&["fold", &fixture("rose2.json")]);
    assert_eq!(rose.status.code(), Some(0));
    assert_eq!(stdout(&rose), "ISO rose(2)\n");

    let blowup = run(&["fold", "--expect-rose", &fixture("blowup10.json")]);
    assert_eq!(blowup.status.code(), Some(0));
    let text = stdout(&blowup);
    // 10 edges fold down to the 3 petals of the rose.
    assert_eq!(text.lines().filter(|l| l.starts_with("FOLD v=")).count(), 10 - 3);
    assert!(text.ends_with("ISO rose(3)\n"));

    let extra = run(&["fold", &fixture("extra_loop.json")]);
    assert_eq!(extra.status.code(), Some(0));
    assert!(stdout(&extra).ends_with("NOT-ROSE rank=3\n"));
    assert_eq!(run(&["fold", "--expect-rose", &fixture("extra_loop.json")]).status.code(), Some(1));
    assert_eq!(run(&["fold", &fixture("rank2.json")]).status.code(), Some(2));
}

#[test]
fn multiarc_examples() {
    let o = run(&["multiarc", "--degrees", "1,2,3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("degrees (1,2,3)\nchords 3\n"));
    assert_eq!(text.lines().filter(|l| l.contains(" -- ")).count(), 3);

    let o = run(&["multiarc", "--degrees", "1,1,4"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("INFEASIBLE"));
    assert_eq!(run(&["multiarc", "--degrees", "1,x"]).status.code(), Some(2));

    let dir = std::env::temp_dir().join(format!("schottky-arc-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let svg = dir.join("arcs.svg");
    let o = run(&["multiarc", "--degrees", "2,2,3,1", "--svg", svg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let body = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(body.matches("<line").count(), 4);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn graft_verify_examples() {
    let ok = run(&["graft", "verify", &fixture("graft_genus2.json")]);
    assert_eq!(ok.status.code(), Some(0));
    let text = stdout(&ok);
    assert!(text.contains("PASS euler chi=-2"));
    assert!(text.contains("SUMMARY genus=2 chi=-2"));
    assert!(text.ends_with("RESULT PASS\n"));

    let grafted = run(&["graft", "verify", &fixture("graft_loop.json")]);
    assert_eq!(grafted.status.code(), Some(0));
    assert!(stdout(&grafted).contains("PIECE A degrees=2,2,1"));

    let mismatch = run(&["graft", "verify", &fixture("graft_endpoint_mismatch.json")]);
    assert_eq!(mismatch.status.code(), Some(1));
    assert!(stdout(&mismatch).contains("FAIL endpoints EndpointMismatch"));
    assert!(stdout(&mismatch).ends_with("RESULT FAIL endpoints EndpointMismatch\n"));

    let trivial = run(&["graft", "verify", &fixture("graft_trivial_loop.json")]);
    assert_eq!(trivial.status.code(), Some(1));
    assert!(stdout(&trivial).ends_with("RESULT FAIL admissible NotAdmissible\n"));

    assert_eq!(run(&["graft", "verify", &fixture("malformed.json")]).status.code(), Some(2));
}

#[test]
fn preimage_examples() {
    let o = run(&["preimage", "--map", "z^2", "--circle", "0,0,2", "--samples", "256"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("components 1\n"));
    assert!(text.contains("marked 0.000000,0.000000 inf\n"));
    assert!(text.contains("windings=1,0 essential=yes"));
    assert!(text.ends_with("essential 1\n"));

    let o = run(&["preimage", "--map", "z^2", "--circle", "3,0,1", "--marked", "0,0", "--marked", "inf"]);
    let text = stdout(&o);
    assert!(text.contains("components 2\n"));
    assert!(text.ends_with("essential 0\n"));

    let o = run(&["preimage", "--map", "z^3", "--polygon", "2,0;0,2;-2,0;0,-2", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("component,index,x,y\n"));
    assert!(text.lines().skip(1).all(|l| l.starts_with("0,")));

    let through = run(&["preimage", "--map", "z^2", "--circle", "1,0,1"]);
    assert_eq!(through.status.code(), Some(1));
    assert!(stdout(&through).contains("BranchValueTooClose"));

    assert_eq!(run(&["preimage", "--map", "z^", "--circle", "0,0,2"]).status.code(), Some(2));
    assert_eq!(run(&["preimage", "--map", "z^2"]).status.code(), Some(2));
    assert_eq!(run(&["preimage", "--map", "z^2", "--circle", "0,0"]).status.code(), Some(2));
}
