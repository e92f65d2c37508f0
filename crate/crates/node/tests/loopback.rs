//! Every party as a real process on loopback: distribution point, edge,
//! harness server, agent and client.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::thread;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ritm_core::authdict::SerialNumber;
use ritm_core::ca::CertificateAuthority;
use ritm_core::monitor::MisbehaviorProof;
use ritm_node::keys::KeyFile;

const DELTA: &str = "2";
const CA: &str = "0000000000000001";

struct Proc(Child);

impl Drop for Proc {
    fn drop(&mut self) {
        self.0.kill().ok();
        self.0.wait().ok();
    }
}

/// Starts a listener and returns it with the address it announced.
fn start(bin: &str, args: &[&str]) -> (Proc, String) {
    let mut child = Command::new(bin)
        .args(args)
        .env("RUST_LOG", "warn")
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").unwrap_or_else(|| panic!("{bin}: {line:?}")).to_string();
    (Proc(child), addr)
}

fn client(ra: &str, registry: &Path, report: &Path, duration: u64) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ritm-client"));
    c.args(["--connect", ra, "--delta", DELTA, "--expect-ritm", "true", "--duration", &duration.to_string()])
        .arg("--registry")
        .arg(registry)
        .arg("--report")
        .arg(report)
        .env("RUST_LOG", "warn");
    c
}

fn lines(report: &Path, event: &str) -> Vec<String> {
    std::fs::read_to_string(report)
        .unwrap()
        .lines()
        .filter(|l| l.split(' ').nth(1) == Some(event))
        .map(String::from)
        .collect()
}

struct Network {
    dir: tempfile::TempDir,
    _procs: Vec<Proc>,
    edge: String,
    ra: String,
    server: String,
}

impl Network {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn up() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let p = |n: &str| dir.path().join(n).to_string_lossy().into_owned();
        let st = Command::new(env!("CARGO_BIN_EXE_ritm-dp"))
            .args(["keygen", "--cas", "2", "--delta", DELTA, "--keys", &p("keys"), "--registry", &p("registry")])
            .status()
            .unwrap();
        assert!(st.success());
        std::fs::write(p("revocations"), "").unwrap();
        let (dp, dp_addr) = start(
            env!("CARGO_BIN_EXE_ritm-dp"),
            &["serve", "--listen", "127.0.0.1:0", "--keys", &p("keys"), "--delta", DELTA, "--revocations", &p("revocations")],
        );
        let origin = format!("http://{dp_addr}");
        let (edge, edge_addr) = start(env!("CARGO_BIN_EXE_ritm-edge"), &["--listen", "127.0.0.1:0", "--origin", &origin]);
        let (server, server_addr) = start(
            env!("CARGO_BIN_EXE_ritm-server"),
            &["--listen", "127.0.0.1:0", "--keys", &p("keys"), "--ca", CA, "--serial", "0a0b0c"],
        );
        let edge_url = format!("http://{edge_addr}");
        let (ra, ra_addr) = start(
            env!("CARGO_BIN_EXE_ritm-ra"),
            &["--listen", "127.0.0.1:0", "--upstream", &server_addr, "--edge", &edge_url, "--registry", &p("registry"), "--delta", DELTA],
        );
        Network {
            dir,
            _procs: vec![dp, edge, server, ra],
            edge: edge_url,
            ra: ra_addr,
            server: server_addr,
        }
    }
}

#[test]
fn loopback_deployment() {
    let net = Network::up();
    let registry = net.path("registry");

    // protected connection with periodic statuses
    let report = net.path("plain-run.log");
    let out = client(&net.ra, &registry, &report, 5).output().unwrap();
    assert!(out.status.success());
    assert_eq!(lines(&report, "accepted").len(), 1);
    assert!(lines(&report, "accepted")[0].ends_with("accepted protected"), "{:?}", std::fs::read_to_string(&report));
    assert!(lines(&report, "status").len() >= 2, "{:?}", std::fs::read_to_string(&report));
    assert!(lines(&report, "interrupted").is_empty());

    // bypassing the agent: no status, so the handshake is refused
    let direct = net.path("direct.log");
    client(&net.server, &registry, &direct, 3).output().unwrap();
    assert!(lines(&direct, "rejected")[0].ends_with("rejected NoStatus"));

    // revocation while a connection is open
    let report = net.path("revoked.log");
    let mut running = client(&net.ra, &registry, &report, 20).stdout(Stdio::null()).spawn().unwrap();
    thread::sleep(Duration::from_secs(3));
    let mut f = std::fs::OpenOptions::new().append(true).open(net.path("revocations")).unwrap();
    writeln!(f, "{CA} 0a0b0c").unwrap();
    drop(f);
    assert!(running.wait().unwrap().success());
    assert!(lines(&report, "accepted")[0].ends_with("accepted protected"));
    let interrupted = lines(&report, "interrupted");
    assert_eq!(interrupted.len(), 1, "{:?}", std::fs::read_to_string(&report));
    assert!(interrupted[0].ends_with("interrupted Revoked"));

    // a revoked certificate is refused at the handshake from then on
    let again = net.path("again.log");
    client(&net.ra, &registry, &again, 2).output().unwrap();
    assert!(lines(&again, "rejected")[0].ends_with("rejected Revoked"));

    // an honest network gives the monitor nothing to report
    let proofs = net.path("proofs");
    let st = Command::new(env!("CARGO_BIN_EXE_ritm-monitor"))
        .args(["watch", "--edge", &net.edge, "--interval", "1", "--rounds", "2"])
        .arg("--registry")
        .arg(&registry)
        .arg("--out")
        .arg(&proofs)
        .env("RUST_LOG", "warn")
        .status()
        .unwrap();
    assert!(st.success());
    assert_eq!(std::fs::read_dir(&proofs).unwrap().count(), 0);
}

fn monitor_verify(proof: &Path, registry: &Path) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_ritm-monitor"))
        .arg("verify")
        .arg(proof)
        .arg("--registry")
        .arg(registry)
        .stdout(Stdio::null())
        .status()
        .unwrap()
        .code()
        .unwrap()
}

#[test]
fn monitor_verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let kf = KeyFile::generate(1, &mut rng);
    let registry = dir.path().join("registry");
    std::fs::write(&registry, kf.registry(10).to_text()).unwrap();
    let (id, key) = kf.keys[0].clone();

    let (ca, _) = CertificateAuthority::new(id, key, 10, 100, 1_700_000_000, &mut rng);
    let (mut a, mut b) = (ca.clone(), ca);
    let ra = a.revoke(&[SerialNumber::from_u64(1)], 1_700_000_010, &mut rng).unwrap();
    let rb = b.revoke(&[SerialNumber::from_u64(2)], 1_700_000_010, &mut rng).unwrap();
    let proof = MisbehaviorProof {
        ca_id: id,
        root_a: ra.signed_root,
        root_b: rb.signed_root,
    };
    let good = dir.path().join("fork.proof");
    std::fs::write(&good, proof.to_bytes()).unwrap();
    assert_eq!(monitor_verify(&good, &registry), 0);

    let mut bytes = proof.to_bytes();
    *bytes.last_mut().unwrap() ^= 1;
    let forged = dir.path().join("forged.proof");
    std::fs::write(&forged, bytes).unwrap();
    assert_eq!(monitor_verify(&forged, &registry), 1);

    let same = MisbehaviorProof {
        ca_id: id,
        root_a: proof.root_a.clone(),
        root_b: proof.root_a.clone(),
    };
    let consistent = dir.path().join("same.proof");
    std::fs::write(&consistent, same.to_bytes()).unwrap();
    assert_eq!(monitor_verify(&consistent, &registry), 1);

    std::fs::write(&consistent, b"short").unwrap();
    assert_eq!(monitor_verify(&consistent, &registry), 1);
}
