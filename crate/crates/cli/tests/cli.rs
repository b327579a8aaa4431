use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "\
shape = sphere
size = 16
lights = canonical
eta0 = 0.005
max_epochs = 30
seed = 3
";

fn sfs(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sfs"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn workdir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.cfg"), SMALL).unwrap();
    dir
}

#[test]
fn stages_chain_through_files() {
    let dir = workdir();
    let d = dir.path();
    let o = sfs(&["synth", "--config", "small.cfg", "--out", "s"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_dir(d.join("s/images")).unwrap().count(), 5);

    let o = sfs(
        &["train", "--config", "small.cfg", "--images", "s/images", "--albedo", "s/truth/albedo.alb", "--out", "m"],
        d,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let record = fs::read_to_string(d.join("m/record.csv")).unwrap();
    assert_eq!(record.lines().count(), 32);
    assert_eq!(record.lines().next(), Some("epoch,error,eta"));

    let o = sfs(
        &["integrate", "--normals", "m/normals.nrm", "--mask", "s/truth/mask.pgm", "--method", "spectral", "--out", "d"],
        d,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(d.join("d/mesh.obj").exists());

    let o = sfs(&["eval", "--model", "m", "--depth", "d", "--truth", "s/truth"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.contains("normal_mean_deg="));
    assert!(out.contains("light_deg.4="));
}

#[test]
fn pipeline_writes_report() {
    let dir = workdir();
    let o = sfs(&["pipeline", "--config", "small.cfg", "--set", "out_dir=run"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let report = fs::read_to_string(dir.path().join("run/report.txt")).unwrap();
    assert!(report.contains("depth_rmse_relative="));
    // No temporary files are left behind by the atomic writers.
    for sub in ["run", "run/model", "run/depth"] {
        for e in fs::read_dir(dir.path().join(sub)).unwrap() {
            let name = e.unwrap().file_name();
            assert!(!name.to_string_lossy().starts_with('.'), "{name:?}");
        }
    }
}

#[test]
fn compare_optimizers_writes_joint_record() {
    let dir = workdir();
    let o = sfs(&["compare-optimizers", "--config", "small.cfg", "--out", "c"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let joint = fs::read_to_string(dir.path().join("c/compare.csv")).unwrap();
    assert_eq!(joint.lines().next(), Some("epoch,fixed,momentum,adaptive"));
    assert_eq!(joint.lines().count(), 32);
    let summary = String::from_utf8(o.stdout).unwrap();
    assert!(summary.contains("epochs_to_target.fixed="));
    for mode in ["fixed", "momentum", "adaptive"] {
        assert!(dir.path().join(format!("c/record_{mode}.csv")).exists());
    }
}

#[test]
fn missing_key_exits_1_and_names_it() {
    let dir = workdir();
    fs::write(dir.path().join("bad.cfg"), SMALL.replace("eta0 = 0.005\n", "")).unwrap();
    let o = sfs(&["pipeline", "--config", "bad.cfg", "--out", "x"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("eta0"), "{}", stderr(&o));
}

#[test]
fn corrupt_normals_exit_1_with_line() {
    let dir = workdir();
    fs::write(dir.path().join("bad.nrm"), "NRM 2 1\n0 0 1\n0 0 2\n").unwrap();
    let o = sfs(&["integrate", "--normals", "bad.nrm", "--out", "x"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn unknown_flags_and_keys_fail_fast() {
    let dir = workdir();
    let o = sfs(&["train", "--images", "x", "--bogus"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = sfs(&["synth", "--config", "small.cfg", "--set", "colour=red", "--out", "x"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("colour"));
    let o = sfs(&["--help"], dir.path());
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn degenerate_geometry_exits_2() {
    // Identical initial normals make the mirror solve singular.
    let dir = workdir();
    let o = sfs(
        &["pipeline", "--config", "small.cfg", "--set", "init=flat", "--set", "init_noise=0", "--out", "x"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("rank"), "{}", stderr(&o));
}

#[test]
fn outputs_are_deterministic() {
    let dir = workdir();
    for out in ["a", "b"] {
        let o = sfs(&["pipeline", "--config", "small.cfg", "--out", out], dir.path());
        assert!(o.status.success());
    }
    for f in ["model/normals.nrm", "model/lambdas.lam", "model/record.csv", "depth/depth.dpt", "depth/mesh.obj", "report.txt"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}
