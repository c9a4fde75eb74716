use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const NIG: &str = "model.kind = nig
model.alpha = 38.46
model.beta = -3.85
model.delta = 6.40
model.mu = 0.64
pii.T = 0.25
market.s0 = 100
";

struct Run {
    out: Output,
    dir: PathBuf,
    _tmp: tempfile::TempDir,
}

impl Run {
    fn ok(&self) -> bool {
        self.out.status.success()
    }

    fn stderr(&self) -> String {
        String::from_utf8_lossy(&self.out.stderr).into_owned()
    }

    fn csv(&self, name: &str) -> Vec<Vec<String>> {
        let text = std::fs::read_to_string(self.dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}; {}", self.stderr()));
        text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
    }

    fn header(&self, name: &str) -> String {
        std::fs::read_to_string(self.dir.join(name)).unwrap().lines().next().unwrap().to_string()
    }

    fn files(&self) -> Vec<String> {
        let mut v: Vec<String> = match std::fs::read_dir(&self.dir) {
            Ok(rd) => rd.map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect(),
            Err(_) => vec![],
        };
        v.sort();
        v
    }
}

fn vohedge(cmd: &str, config: &str, extra: &[&str], envs: &[(&str, &str)]) -> Run {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, config).unwrap();
    let dir = tmp.path().join("out");
    let mut c = Command::new(env!("CARGO_BIN_EXE_vohedge"));
    c.arg(cmd).arg("--config").arg(&cfg).arg("--out").arg(&dir).args(extra);
    c.env_remove("VOHEDGE_THREADS");
    for (k, v) in envs {
        c.env(k, v);
    }
    let out = c.output().unwrap();
    Run { out, dir, _tmp: tmp }
}

fn num(s: &str) -> f64 {
    s.parse().unwrap_or_else(|_| panic!("not a number: `{s}`"))
}

fn read_bytes(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

#[test]
fn price_reproduces_the_published_capitals() {
    let cfg = format!("{NIG}model.scale = 0.08\npayoff.K = 60, 99, 150\n");
    let r = vohedge("price", &cfg, &[], &[]);
    assert!(r.ok(), "{}", r.stderr());
    assert_eq!(r.header("price.csv"), "K,V0_vo,IC_bs");
    let rows = r.csv("price.csv");
    let (v60, bs60) = (num(&rows[0][1]), num(&rows[0][2]));
    let (v99, bs99) = (num(&rows[1][1]), num(&rows[1][2]));
    // 7.11 and 8.65 at two decimals; the capital sits 0.012 above, see README
    assert!((v99 - 7.11).abs() < 0.02, "V0 {v99}");
    assert!((bs99 - 8.65).abs() < 0.005, "IC_BS {bs99}");
    // the K=60 levels are not reproducible, their ratio 99.56% is
    assert!((bs60 / v60 - 0.9956).abs() < 5e-4, "ratio {}", bs60 / v60);
    assert!(v60 > 40.0 && v60 < 40.5);

    let fine = vohedge("price", &format!("{cfg}quadrature.umax = 800\nquadrature.log2_panels = 15\n"), &[], &[]);
    for (a, b) in rows.iter().zip(fine.csv("price.csv")) {
        let (x, y) = (num(&a[1]), num(&b[1]));
        assert!((x - y).abs() < 1e-4 * y, "{x} vs {y}");
    }
}

#[test]
fn price_of_a_vanishing_strike_is_the_spot() {
    let cfg = format!("{NIG}model.scale = 0.08\npayoff.K = 0.001\npayoff.variant = unit_interval\n");
    let r = vohedge("price", &cfg, &[], &[]);
    assert!(r.ok(), "{}", r.stderr());
    let v0 = num(&r.csv("price.csv")[0][1]);
    assert!((v0 - 100.0).abs() < 2e-3, "{v0}");
}

#[test]
fn hedge_examples() {
    let gauss = "model.kind = brownian\nmodel.sigma = 0.4\nmodel.m = -0.08\npii.T = 0.25\npayoff.K = 80, 100, 120\n";
    let r = vohedge("hedge", gauss, &[], &[]);
    assert!(r.ok(), "{}", r.stderr());
    assert_eq!(r.header("hedge.csv"), "K,xi0_vo,delta_bs");
    for row in r.csv("hedge.csv") {
        let (xi, delta) = (num(&row[1]), num(&row[2]));
        assert!((xi - delta).abs() < 1e-5 * delta, "K {}: {xi} vs {delta}", row[0]);
    }

    let itm = vohedge("hedge", &format!("{NIG}payoff.K = 33.333333333333336\n"), &[], &[]);
    assert!(itm.ok(), "{}", itm.stderr());
    let xi = num(&itm.csv("hedge.csv")[0][1]);
    assert!((xi - 1.0).abs() < 1e-2, "{xi}");

    let fwd = vohedge("hedge", &format!("{NIG}payoff.kind = custom\npayoff.atoms = 1:1\n"), &[], &[]);
    assert!(fwd.ok(), "{}", fwd.stderr());
    assert_eq!(fwd.csv("hedge.csv")[0][1], "1.0000000000000000e0");
}

#[test]
fn variance_zero_in_complete_markets_and_positive_otherwise() {
    let poisson = "model.kind = poisson\nmodel.lambda_p = 1\npii.T = 0.25\npayoff.K = 100\n";
    let toy = "pii.kind = time_changed_brownian\npii.T = 0.25\npii.psi = 0:0, 0.1:0.02, 0.25:0.05\npayoff.K = 100\n";
    for cfg in [poisson, toy] {
        let r = vohedge("variance", cfg, &[], &[]);
        assert!(r.ok(), "{}", r.stderr());
        assert_eq!(r.header("variance.csv"), "K,V0_vo,J0,sqrt_J0");
        let j0 = num(&r.csv("variance.csv")[0][2]);
        assert!(j0.abs() < 1e-8 * 1e4, "{j0}");
    }
    let r = vohedge("variance", &format!("{NIG}payoff.K = 99\n"), &[], &[]);
    assert!(r.ok(), "{}", r.stderr());
    assert!(num(&r.csv("variance.csv")[0][2]) > 0.1);
}

#[test]
fn backtest_is_reproducible_across_runs_and_thread_counts() {
    let cfg = format!(
        "{NIG}model.scale = 0.08\npayoff.K = 99\nbacktest.N = 4, 12\nbacktest.paths = 400\nbacktest.seed = 9\nbacktest.dump_errors = true\n"
    );
    let a = vohedge("backtest", &cfg, &["--threads", "4"], &[]);
    assert!(a.ok(), "{}", a.stderr());
    let b = vohedge("backtest", &cfg, &[], &[("VOHEDGE_THREADS", "1")]);
    assert!(b.ok(), "{}", b.stderr());
    assert_eq!(a.header("backtest.csv"), "strategy,N,paths,seed,V0,mean,se_mean,std,se_std,skew,kurt");
    let mut expected: Vec<String> = ["VO", "BS", "VO_with_BS_capital"]
        .iter()
        .flat_map(|s| [4, 12].map(|n| format!("errors_{s}_{n}.csv")))
        .collect();
    expected.push("backtest.csv".into());
    expected.sort();
    assert_eq!(a.files(), expected);
    for f in &expected {
        assert_eq!(read_bytes(&a.dir, f), read_bytes(&b.dir, f), "{f}");
    }
    let rows = a.csv("backtest.csv");
    assert_eq!(rows.len(), 6);
    assert_eq!((rows[0][0].as_str(), rows[0][1].as_str(), rows[0][3].as_str()), ("VO", "4", "9"));
    assert_eq!(a.csv("errors_VO_12.csv").len(), 400);

    let c = vohedge("backtest", &cfg, &["--seed", "10"], &[]);
    assert!(c.ok());
    assert_eq!(c.csv("backtest.csv")[0][3], "10");
    assert_ne!(read_bytes(&a.dir, "backtest.csv"), read_bytes(&c.dir, "backtest.csv"));
}

#[test]
fn arithmetic_engine_commands() {
    let base = "engine = arithmetic\nmodel.kind = nig\nmodel.alpha = 15.81\nmodel.beta = -1.581\nmodel.delta = 15.57\nmodel.mu = 1.56\npii.T = 0.25\nmarket.x0 = 0\n";
    let sq = format!("{base}payoff.kind = self_quanto\npayoff.K = 1.2\n");
    let r = vohedge("payoff-check", &sq, &[], &[]);
    assert!(r.ok(), "{}", r.stderr());
    for row in r.csv("payoff_check.csv") {
        assert!(num(&row[4]) < 1e-6 * 1.2, "{row:?}");
    }
    let dg = format!("{base}payoff.kind = digital\npayoff.B = 1.5\n");
    let r = vohedge("payoff-check", &dg, &[], &[]);
    assert!(r.ok(), "{}", r.stderr());
    for row in r.csv("payoff_check.csv") {
        assert!(num(&row[4]) < 1e-4 * 1.5, "{row:?}");
    }
    for cmd in ["price", "hedge"] {
        let r = vohedge(cmd, &sq, &[], &[]);
        assert!(r.ok(), "{cmd}: {}", r.stderr());
    }
    let p = vohedge("price", &sq, &[], &[]).csv("price.csv");
    assert!(num(&p[0][1]) > 0.0 && num(&p[0][2]) > 0.0);
    let r = vohedge("backtest", &format!("{sq}backtest.paths = 200\nbacktest.N = 6\n"), &[], &[]);
    assert!(r.ok(), "{}", r.stderr());
    assert_eq!(r.csv("backtest.csv").len(), 3);
}

#[test]
fn exponential_payoff_check() {
    let r = vohedge("payoff-check", &format!("{NIG}payoff.kind = put\npayoff.K = 100\n"), &[], &[]);
    assert!(r.ok(), "{}", r.stderr());
    let rows = r.csv("payoff_check.csv");
    assert_eq!(rows.len(), 5);
    for row in rows {
        assert!(num(&row[4]) < 1e-6 * 100.0, "{row:?}");
    }
}

#[test]
fn config_errors_exit_nonzero_and_write_nothing() {
    let r = vohedge("price", &format!("{NIG}payoff.K = 99\nmodel.sigma = 0.2\n"), &[], &[]);
    assert!(!r.ok());
    assert!(r.stderr().contains(":9:") && r.stderr().contains("model.sigma"), "{}", r.stderr());
    assert!(r.files().is_empty());

    let r = vohedge("variance", &format!("engine = arithmetic\n{NIG}payoff.kind = digital\npayoff.B = 1\n"), &[], &[]);
    assert!(!r.ok());
    assert!(r.files().is_empty());

    let r = vohedge("price", &format!("{NIG}payoff.K = 99\n"), &[], &[("VOHEDGE_THREADS", "many")]);
    assert!(!r.ok());

    let r = vohedge("price", &format!("{NIG}payoff.K = 99\npayoff.kind = digital\npayoff.B = 1\n"), &[], &[]);
    assert!(!r.ok());
    assert!(r.stderr().contains("engine = arithmetic"), "{}", r.stderr());
}

#[test]
fn shipped_configs_run() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["nig_c008.cfg", "toy.cfg", "electricity.cfg"] {
        let tmp = tempfile::tempdir().unwrap();
        let out = Command::new(env!("CARGO_BIN_EXE_vohedge"))
            .args(["price", "--config"])
            .arg(root.join(name))
            .arg("--out")
            .arg(tmp.path())
            .env_remove("VOHEDGE_THREADS")
            .output()
            .unwrap();
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(tmp.path().join("price.csv").exists());
    }
}
