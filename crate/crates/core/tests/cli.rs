mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hybridstab::case::{Case, CaseFile};
use hybridstab::cli::SWEEP_COLUMNS;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hybridstab"));
    c.env("HYBRIDSTAB_THREADS", "2");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

struct TempDir(PathBuf);

impl TempDir {
    fn new(tag: &str) -> Self {
        let p = std::env::temp_dir().join(format!("hybridstab-cli-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&p).unwrap();
        TempDir(p)
    }

    fn write(&self, name: &str, text: &str) -> String {
        let p = self.0.join(name);
        std::fs::write(&p, text).unwrap();
        p.to_string_lossy().into_owned()
    }

    fn path(&self, name: &str) -> String {
        self.0.join(name).to_string_lossy().into_owned()
    }
}

impl Drop for TempDir {
    fn drop(&mut self) {
        std::fs::remove_dir_all(&self.0).ok();
    }
}

/// Converters with different steady-state gains on one DC network: the
/// coherency conditions fail and the interconnection is unstable.
const UNSTABLE_DC: &str = r#"
[meta]
name = "unstable_dc"

[analysis]
dt = 0.01
t_end = 600.0

[[buses]]
id = 1
kind = "sg_governor"
params = { j_omega0 = 7.0, tau = 4.1, k_g = 4.2, gamma = 0.0 }

[[buses]]
id = 2
kind = "sg_governor"
params = { j_omega0 = 4.2, tau = 3.0, k_g = 8.6, gamma = 0.0 }

[[buses]]
id = 3
kind = "sg_governor"
params = { j_omega0 = 2.76, tau = 4.5, k_g = 10.0, gamma = 0.0 }

[[buses]]
id = 4
kind = "pv_off_mpp"
params = { c_dc = 0.82, k_omega = 2.86, k_p = 1.1, k_pv = 1.54 }

[[buses]]
id = 5
kind = "hvdc"
params = { c_dc = 1.96, k_omega = 3.16, k_p = 0.0035 }

[[buses]]
id = 6
kind = "hvdc"
params = { c_dc = 0.29, k_omega = 0.44, k_p = 0.22 }

[[ac_lines]]
from = 1
to = 4
b = 1.07

[[ac_lines]]
from = 2
to = 5
b = 4.4

[[ac_lines]]
from = 3
to = 6
b = 24.4

[[dc_lines]]
from = 4
to = 5
g = 5.9

[[dc_lines]]
from = 5
to = 6
g = 67.4

[[disturbances]]
bus = 1
magnitude = 1.0
time = 0.0
"#;

/// A governor so weak that the steady-state damping sits inside the
/// strictness tolerance.
const MARGINAL: &str = r#"
[meta]
name = "weak_governor"

[[buses]]
id = 1
kind = "sg_governor"
params = { j_omega0 = 5.0, tau = 1.0, k_g = 1e-11, gamma = 0.02 }
"#;

#[test]
fn exit_codes_over_bundled_cases() {
    let expected = [
        ("ieee9", 0),
        ("ieee9_nodamper", 0),
        ("hvdc_p2p", 0),
        ("dcgrid_coherent", 0),
        ("dcgrid_incoherent", 2),
        ("gfl_single", 2),
    ];
    for (name, code) in expected {
        let out = run(&["check", &common::bundled(name)]);
        assert_eq!(out.status.code(), Some(code), "{name}: {}", String::from_utf8_lossy(&out.stdout));
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(text.contains(&format!("case: {name}")));
        assert!(text.trim_end().ends_with(if code == 0 { "verdict: PASS" } else { "verdict: FAIL" }));
    }
}

#[test]
fn gfl_fails_condition_13() {
    let out = run(&["check", &common::bundled("gfl_single")]);
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text.lines().find(|l| l.trim_start().starts_with("1.3")).unwrap();
    assert!(line.contains("FAIL") && line.contains("[bus 2]"), "{line}");
}

#[test]
fn marginal_unstable_and_bad_input_exit_codes() {
    let dir = TempDir::new("codes");
    let marginal = dir.write("marginal.case", MARGINAL);
    assert_eq!(run(&["check", &marginal]).status.code(), Some(3));

    let unstable = dir.write("unstable.case", UNSTABLE_DC);
    let out = run(&["check", &unstable]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.trim_start().starts_with("2.2") && l.contains("FAIL")), "{text}");

    let csv = dir.path("unstable.csv");
    let out = run(&["simulate", &unstable, "--out", &csv]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverged"));

    assert_eq!(run(&["check", &dir.path("missing.case")]).status.code(), Some(1));
    let broken = dir.write("broken.case", "[meta]\nname = \"x\"\n[[buses]]\nid = 1\nkind = \"steam_engine\"\n");
    let out = run(&["check", &broken]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("steam_engine"));

    let out = bin().args(["check", &marginal]).env("HYBRIDSTAB_THREADS", "zero").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn semantic_errors_name_the_bus() {
    let dir = TempDir::new("semantic");
    let text = std::fs::read_to_string(common::bundled("hvdc_p2p"))
        .unwrap()
        .replace("[[dc_lines]]\nfrom = 3", "[[dc_lines]]\nfrom = 1");
    let path = dir.write("dc_on_machine.case", &text);
    let out = run(&["check", &path]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bus 1"), "{err}");

    let missing = MARGINAL.replace("k_g = 1e-11, ", "");
    let out = run(&["check", &dir.write("missing_param.case", &missing)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("k_g"));

    let out = run(&["check", &dir.write("empty.case", "buses = []\n[meta]\nname = \"x\"\n")]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn json_report_mirrors_the_human_verdict() {
    for name in ["ieee9", "dcgrid_incoherent"] {
        let path = common::bundled(name);
        let out = run(&["check", &path, "--json"]);
        let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        let human = String::from_utf8(run(&["check", &path]).stdout).unwrap();
        let verdict = json["verdict"].as_str().unwrap();
        assert!(human.trim_end().ends_with(&format!("verdict: {verdict}")));
        assert_eq!(json["tool"], "hybridstab");
        let sha = Case::load(&path).unwrap().sha256;
        assert_eq!(json["case_sha256"].as_str().unwrap(), sha);
        let conditions = json["conditions"].as_array().unwrap();
        let ids: Vec<&str> = conditions.iter().map(|c| c["id"].as_str().unwrap()).collect();
        assert_eq!(ids, ["1.1", "1.2", "1.3", "1.4", "2.1", "2.2", "2.3"]);
        for c in conditions {
            let line = human
                .lines()
                .find(|l| l.trim_start().starts_with(c["id"].as_str().unwrap()))
                .unwrap();
            assert!(line.contains(c["verdict"].as_str().unwrap()), "{line}");
        }
    }
}

fn read_csv(path: &str) -> (Vec<String>, Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let header: Vec<String> = text.lines().filter(|l| l.starts_with('#')).map(String::from).collect();
    let mut rows = text.lines().filter(|l| !l.starts_with('#'));
    let columns = rows.next().unwrap().split(',').map(String::from).collect();
    let data = rows.map(|r| r.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, columns, data)
}

#[test]
fn sweep_csv_is_deterministic_and_ordered() {
    let dir = TempDir::new("sweep");
    let a = dir.path("a.csv");
    let b = dir.path("b.csv");
    let case = common::bundled("hvdc_p2p");
    assert!(run(&["sweep", &case, "--points", "300", "--out", &a]).status.success());
    let out = bin()
        .args(["sweep", &case, "--points", "300", "--out", &b])
        .env("HYBRIDSTAB_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let (header, columns, data) = read_csv(&a);
    assert!(header[0].starts_with("# hybridstab "));
    assert!(header.iter().any(|h| h.contains(&Case::load(&case).unwrap().sha256)));
    assert!(header.iter().any(|h| h.contains("points 300")));
    assert_eq!(columns, SWEEP_COLUMNS);
    assert_eq!(data.len(), 300);
    assert!(data.windows(2).all(|w| w[0][0] < w[1][0]));
    // a passing case has a finite gain everywhere, bounded by the witness
    let min_herm = data.iter().map(|r| r[3]).fold(f64::INFINITY, f64::min);
    assert!(min_herm > 0.0);
    for r in &data {
        assert!(r[1].is_finite() && r[1] <= (1.0 / min_herm) * (1.0 + 1e-8));
    }
}

#[test]
fn condenser_gain_grows_toward_zero_frequency() {
    let dir = TempDir::new("condenser");
    let case = dir.write(
        "condensers.case",
        r#"
[meta]
name = "condensers"

[[buses]]
id = 1
kind = "sync_condenser"
params = { j_omega0 = 4.0, gamma = 0.02 }

[[buses]]
id = 2
kind = "sync_condenser"
params = { j_omega0 = 2.0, gamma = 0.03 }

[[ac_lines]]
from = 1
to = 2
b = 5.0
"#,
    );
    let out_path = dir.path("sweep.csv");
    assert!(run(&["sweep", &case, "--points", "81", "--out", &out_path]).status.success());
    let (_, _, data) = read_csv(&out_path);
    let low: Vec<&Vec<f64>> = data.iter().filter(|r| r[0] < 1e-1).collect();
    assert!(low.len() > 10);
    // σ_max(H) ~ 1/(Σ Jω₀ ω) as ω → 0
    assert!(low.windows(2).all(|w| w[1][1] < w[0][1]));
    let first = low[0];
    assert!((first[1] * first[0] * 6.0 / 2.0 - 1.0).abs() < 1e-2, "{first:?}");
    assert_eq!(run(&["check", &case]).status.code(), Some(2));
}

#[test]
fn zero_disturbance_gives_zero_traces() {
    let dir = TempDir::new("zero");
    let text = std::fs::read_to_string(common::bundled("hvdc_p2p")).unwrap();
    let cut = text.find("[[disturbances]]").unwrap();
    let case = dir.write("quiet.case", &text[..cut]);
    let out_path = dir.path("quiet.csv");
    let out = run(&["simulate", &case, "--t-end", "2", "--out", &out_path]);
    assert!(out.status.success());
    let (header, columns, data) = read_csv(&out_path);
    assert!(header.iter().any(|h| h.contains("dt 0.001 t_end 2")));
    assert_eq!(
        columns,
        ["t", "f_1", "f_2", "f_3", "f_4", "f_bar", "df_1", "df_2", "df_3", "df_4", "v_3", "v_4"]
    );
    assert_eq!(data.len(), 2001);
    assert!(data.iter().all(|r| r[1..].iter().all(|v| *v == 0.0)));
}

#[test]
fn simulate_reports_droop_steady_state() {
    let dir = TempDir::new("droop");
    let out_path = dir.path("ieee9.csv");
    let out = run(&["simulate", &common::bundled("ieee9"), "--t-end", "3", "--dt", "2e-4", "--out", &out_path]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    // -0.75 p.u. / (3 × 20 p.u.) of 50 Hz
    assert!(text.contains("steady-state prediction from H(0+): -6.250000000e-1 Hz"), "{text}");
    let (_, columns, data) = read_csv(&out_path);
    assert_eq!(columns[..4], ["t", "f_1", "f_2", "f_3"]);
    let fbar = columns.iter().position(|c| c == "f_bar").unwrap();
    for r in &data {
        let mean = (r[1] + r[2] + r[3]) / 3.0;
        assert!((r[fbar] - mean).abs() <= 1e-12 * (1.0 + mean.abs()));
        assert!((r[fbar + 1] - (r[1] - r[fbar])).abs() <= 1e-12);
    }
}

#[test]
fn kron_command_reduces_and_writes_a_case() {
    let dir = TempDir::new("kron");
    let text = r#"
[meta]
name = "star"

[[buses]]
id = 1
kind = "sg_governor"
params = { j_omega0 = 5.0, tau = 1.0, k_g = 10.0, gamma = 0.02 }

[[buses]]
id = 2
kind = "sg_governor"
params = { j_omega0 = 5.0, tau = 1.0, k_g = 10.0, gamma = 0.02 }

[[buses]]
id = 3
kind = "sg_governor"
params = { j_omega0 = 5.0, tau = 1.0, k_g = 10.0, gamma = 0.02 }

[[buses]]
id = 4
kind = "sync_condenser"
p_load = 0.3
params = { j_omega0 = 1.0, gamma = 0.02 }

[[ac_lines]]
from = 1
to = 4
b = 3.0

[[ac_lines]]
from = 2
to = 4
b = 3.0

[[ac_lines]]
from = 3
to = 4
b = 3.0

[[disturbances]]
bus = 4
magnitude = 0.6
time = 1.0
"#;
    let case = dir.write("star.case", text);
    let reduced = dir.path("triangle.case");
    let out = run(&["kron", &case, "--keep", "1,2,3", "--out", &reduced]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("eliminated buses: [4]"));

    let parsed = Case::load(&reduced).unwrap();
    assert_eq!(parsed.network.bus_ids(), vec![1, 2, 3]);
    // star legs of 3 become a triangle of 1
    assert_eq!(parsed.network.ac_lines.len(), 3);
    for l in &parsed.network.ac_lines {
        assert!((l.b - 1.0).abs() < 1e-12);
    }
    for b in &parsed.network.buses {
        assert!((b.p_load - 0.1).abs() < 1e-12);
    }
    assert_eq!(parsed.network.disturbances.len(), 3);
    for d in &parsed.network.disturbances {
        assert!((d.magnitude - 0.2).abs() < 1e-12 && d.time == 1.0);
    }

    let out = run(&["kron", &case, "--keep", "1,9"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bundled_cases_round_trip() {
    for name in common::BUNDLED {
        let case = Case::load(common::bundled(name)).unwrap();
        let text = case.file.to_toml_string().unwrap();
        let again = Case::parse(&text).unwrap();
        assert_eq!(again.network, case.network, "{name}");
        assert_eq!(again.file, case.file, "{name}");
        let from_net = CaseFile {
            meta: case.file.meta.clone(),
            ..CaseFile::from_network(&case.network, case.file.meta.base_mva, case.file.analysis)
        };
        assert_eq!(from_net.build().unwrap(), case.network, "{name}");
    }
    assert!(Path::new(&common::bundled("ieee9")).exists());
}
