use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use sha2::{Digest, Sha256};

const SMALL: &str = "\
[pathsim]
paths = 30
steps = 3000
[harness]
batches = 10
[ssmp]
points = 100
n_xi = 500
coupled_paths = 5
coupled_steps = 1000
coupled_levels = 1000
";

fn rbessel(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rbessel"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("RBESSEL_OUT")
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path) -> String {
    let p = dir.join("small.ini");
    fs::write(&p, SMALL).unwrap();
    p.display().to_string()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn verify_is_fast_and_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let t = Instant::now();
    let o = rbessel(&["verify"], tmp.path());
    assert!(t.elapsed().as_secs_f64() < 1.0);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("identities.json")).unwrap())
            .unwrap();
    assert_eq!(r["pass"], true);
    assert_eq!(manifest(tmp.path())["subcommand"], "verify");
}

#[test]
fn moments_reports_are_byte_identical_on_rerun() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let args = [
        "moments", "--alpha", "0.5", "--p", "0", "--paths", "60", "--seed", "7", "--steps", "2000",
    ];
    let mut args: Vec<&str> = args.to_vec();
    let cfg = small_config(tmp.path());
    args.extend(["--config", &cfg]);
    for d in [&a, &b] {
        let o = rbessel(&args, d);
        assert!(
            matches!(o.status.code(), Some(0 | 1)),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    for f in [
        "moments.json",
        "routes.json",
        "self_similarity.json",
        "moment_scaling.csv",
        "config.ini",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let r: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("moments.json")).unwrap()).unwrap();
    assert_eq!(r["seed"], 7);
    assert_eq!(r["runtime_s"], 0.0);
}

#[test]
fn resolved_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let cfg = small_config(tmp.path());
    let o = rbessel(
        &[
            "occupation",
            "--config",
            &cfg,
            "--p",
            "-0.25",
            "--alpha",
            "0.3",
        ],
        &a,
    );
    assert!(matches!(o.status.code(), Some(0 | 1)));
    let resolved = a.join(manifest(&a)["resolved_config"].as_str().unwrap());
    let o = rbessel(&["occupation", "--config", resolved.to_str().unwrap()], &b);
    assert!(matches!(o.status.code(), Some(0 | 1)));
    for f in ["occupation.json", "surface_slice.csv", "config.ini"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn manifest_hashes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("o");
    let o = rbessel(
        &[
            "scaling-limit",
            "--config",
            &cfg,
            "--n-list",
            "10,100",
            "--threads",
            "2",
        ],
        &out,
    );
    assert!(
        matches!(o.status.code(), Some(0 | 1)),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let m = manifest(&out);
    assert_eq!(m["threads"], 2);
    let listed: Vec<&str> = m["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["path"].as_str().unwrap())
        .collect();
    for f in fs::read_dir(&out).unwrap() {
        let name = f.unwrap().file_name().into_string().unwrap();
        if name != "manifest.json" {
            assert!(listed.contains(&name.as_str()), "{name} not listed");
        }
    }
    for a in m["artifacts"].as_array().unwrap() {
        let bytes = fs::read(out.join(a["path"].as_str().unwrap())).unwrap();
        let h: String = Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        assert_eq!(a["sha256"].as_str().unwrap(), h);
    }
    let dn = fs::read_to_string(out.join("dn_decay.csv")).unwrap();
    assert_eq!(dn.lines().next(), Some("n,mean_D_n,se"));
    assert_eq!(dn.lines().count(), 3);
    for f in ["cdf_first_order.csv", "cdf_second_order.csv"] {
        let t = fs::read_to_string(out.join(f)).unwrap();
        assert_eq!(t.lines().next(), Some("x,F_empirical,F_reference"));
        let last: Vec<f64> = t
            .lines()
            .last()
            .unwrap()
            .split(',')
            .map(|v| v.parse().unwrap())
            .collect();
        assert_eq!(&last[1..], &[1.0, 1.0]);
    }
}

#[test]
fn plot_schemas() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("o");
    rbessel(&["moments", "--config", &cfg], &out);
    rbessel(&["occupation", "--config", &cfg], &tmp.path().join("s"));
    let m = fs::read_to_string(out.join("moment_scaling.csv")).unwrap();
    assert_eq!(m.lines().next(), Some("t,mean_Lhat,se,reference"));
    assert_eq!(m.lines().count(), 4);
    let s = fs::read_to_string(tmp.path().join("s/surface_slice.csv")).unwrap();
    assert_eq!(s.lines().next(), Some("x,E_Lhat_x_1,se,reference"));
    // every number carries 17 significant digits
    for cell in m.lines().skip(1).flat_map(|l| l.split(',')) {
        let mantissa = cell.trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.replace('.', "").len(), 17, "{cell}");
    }
}

#[test]
fn simulate_dumps_samples() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("o");
    let o = rbessel(&["simulate", "--config", &cfg, "--paths", "12"], &out);
    assert_eq!(o.status.code(), Some(0));
    let e = fs::read_to_string(out.join("ensemble.csv")).unwrap();
    assert_eq!(e.lines().count(), 13);
    assert!(e.starts_with("lhat_t=0.5,lhat_t=1,lhat_t=2,lhat_ibp,"));
    let p = fs::read_to_string(out.join("points.csv")).unwrap();
    assert_eq!(p.lines().next(), Some("lhat_one,lambda_hat_one"));
}

#[test]
fn failed_check_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("strict.ini");
    fs::write(
        &p,
        format!("{SMALL}[tolerance]\nse_multiplier = 0\nmoment_bias = 0\n"),
    )
    .unwrap();
    let o = rbessel(
        &["moments", "--config", p.to_str().unwrap()],
        &tmp.path().join("o"),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("moments: FAIL"));
    assert_eq!(manifest(&tmp.path().join("o"))["pass"], false);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = rbessel(&["verify", "--frobnicate"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    let o = rbessel(&["nonsense"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_config_names_line_and_key() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("bad.ini");
    fs::write(&p, "[pathsim]\npaths = 10\nsteps = lots\n").unwrap();
    let out = tmp.path().join("o");
    let o = rbessel(&["moments", "--config", p.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("bad.ini:3") && err.contains("pathsim.steps"),
        "{err}"
    );
    assert!(!out.join("manifest.json").exists());
    let o = rbessel(
        &[
            "verify",
            "--config",
            tmp.path().join("missing.ini").to_str().unwrap(),
        ],
        &out,
    );
    assert_eq!(o.status.code(), Some(2));
    let o = rbessel(&["verify", "--p", "0.6"], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--p"));
}

#[test]
fn output_dir_defaults_to_env() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_rbessel"))
        .arg("verify")
        .env("RBESSEL_OUT", tmp.path().join("env"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(tmp.path().join("env/manifest.json").exists());
}
