mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::thread;
use std::time::{Duration, Instant};

use common::{Behavior, Stub};
use mechagents::agents::API_KEY_ENV;
use mechagents::fem::FieldFile;
use mechagents::orchestrator::{replay, ConversationLimits, Record, Termination};
use mechagents::service::{bind, serve, LlmSettings, ServeConfig, Summary, SUMMARY_FILE, TRANSCRIPT_FILE};
use serde_json::{json, Value};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mechagents")).args(args).env_remove(API_KEY_ENV).output().unwrap()
}

fn summary(dir: &Path) -> Summary {
    serde_json::from_str(&std::fs::read_to_string(dir.join(SUMMARY_FILE)).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_first_round_writes_png_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&["run", "--backend", "scripted", "--scenario", "conv1_round1", "--topology", "two_agent", "--out-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("displacement.png").exists());
    let sum = summary(dir.path());
    assert_eq!(sum.termination, Termination::Solved);
    assert_eq!(sum.artifacts, ["displacement.png"]);
    let t = replay(&dir.path().join(TRANSCRIPT_FILE)).unwrap();
    assert_eq!(t.messages.len(), sum.messages);
}

#[test]
fn run_group_chat_reports_the_edge_force() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&["run", "--backend", "scripted", "--scenario", "groupchat2", "--topology", "group_chat", "--out-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    let fx = summary(dir.path()).final_scalars["traction_force_x"];
    assert!((fx - 2.0526e9).abs() / 2.0526e9 <= 0.15, "{fx}");
    assert!(summary(dir.path()).final_checks.unwrap().passed());
}

#[test]
fn run_config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    for args in [
        vec!["run", "--backend", "scripted", "--scenario", s(&missing), "--out-dir", s(dir.path())],
        vec!["run", "--backend", "scripted", "--out-dir", s(dir.path())],
        vec!["run", "--backend", "scripted", "--scenario", "conv1", "--topology", "group_chat"],
        vec!["run", "--backend", "llm", "--task", "solve", "--topology", "two_agent"],
        vec!["run", "--config", s(&missing)],
    ] {
        let out = cli(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("configuration error"));
    }
    assert!(!dir.path().join(TRANSCRIPT_FILE).exists());
}

#[test]
fn run_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    let out_dir = dir.path().join("out");
    let body = json!({"backend": "scripted", "scenario": "groupchat1", "out_dir": out_dir, "limits": {"max_rounds": 3}});
    std::fs::write(&config, body.to_string()).unwrap();
    // Too few rounds to finish: a runtime failure with the transcript kept.
    let out = cli(&["run", "--config", s(&config)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(summary(&out_dir).termination, Termination::MaxRounds);
    assert_eq!(replay(&out_dir.join(TRANSCRIPT_FILE)).unwrap().messages.len(), 4);
    // Flags override the file.
    let out = cli(&["run", "--config", s(&config), "--max-rounds", "40"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn llm_run_failure_keeps_transcript_and_hides_the_key() {
    let canary = "sk-canary-51d0e8";
    let stub = Stub::start(vec![Behavior::Respond(503, format!("{{\"error\": \"overloaded for {canary}\"}}"))]);
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_mechagents"))
        .args(["run", "--backend", "llm", "--task", "Solve the plate.", "--topology", "two_agent"])
        .args(["--base-url", &stub.base_url, "--model", "stub", "--out-dir", s(dir.path())])
        .env(API_KEY_ENV, canary)
        .env("RUST_LOG", "debug")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stub.request(0).header("authorization"), Some(format!("Bearer {canary}").as_str()));
    assert_eq!(summary(dir.path()).termination, Termination::BackendFailure);
    let t = replay(&dir.path().join(TRANSCRIPT_FILE)).unwrap();
    assert_eq!(t.messages[0].content, "Solve the plate.");
    for text in [String::from_utf8_lossy(&out.stdout).into_owned(), String::from_utf8_lossy(&out.stderr).into_owned()] {
        assert!(!text.contains(canary));
    }
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let bytes = std::fs::read(entry.unwrap().path()).unwrap();
        assert!(!String::from_utf8_lossy(&bytes).contains(canary));
    }
}

fn round3_spec(dir: &Path) -> PathBuf {
    let path = dir.join("round3.json");
    let doc = json!({
        "geometry": {"kind": "rectangle_with_hole", "width": 1.0, "height": 1.0, "hole_center": [0.5, 0.5], "hole_radius": 0.2},
        "mesh": {"nx": 32, "ny": 32},
        "material": {"E": 1e9, "nu": 0.3},
        "kinematics": "small_strain",
        "bcs": [{"edge": "left", "ux": 0.0, "uy": 0.0}, {"edge": "right", "ux": 0.0, "uy": 0.3}],
        "outputs": [{"kind": "displacement_png", "path": "3.png"}]
    });
    std::fs::write(&path, doc.to_string()).unwrap();
    path
}

#[test]
fn solve_and_check() {
    let dir = tempfile::tempdir().unwrap();
    let spec = round3_spec(dir.path());
    let out_dir = dir.path().join("out");
    let out = cli(&["solve", s(&spec), s(&out_dir)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out_dir.join("3.png").exists());
    let out = cli(&["solve", s(&spec), s(&out_dir), "--check"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("check report: pass"));

    let bad = dir.path().join("bad.json");
    let text = std::fs::read_to_string(&spec).unwrap().replace(r#""material":{"E":1000000000.0,"nu":0.3},"#, "");
    std::fs::write(&bad, text).unwrap();
    let out = cli(&["solve", s(&bad), s(&out_dir)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("MISSING_MATERIAL"));

    assert_eq!(cli(&["solve", s(&dir.path().join("nope.json")), s(&out_dir)]).status.code(), Some(2));
}

#[test]
fn render_constant_and_corrupt_fields() {
    let dir = tempfile::tempdir().unwrap();
    let field = FieldFile {
        nodes: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        triangles: vec![[0, 1, 2], [0, 2, 3]],
        values: vec![vec![0.5]; 4],
    };
    let path = dir.path().join("c.field");
    std::fs::write(&path, field.to_text()).unwrap();
    let png = dir.path().join("c.png");
    let out = cli(&["render", s(&path), s(&png)]);
    assert_eq!(out.status.code(), Some(0));
    let d: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!((d["min"].as_f64(), d["max"].as_f64()), (Some(0.5), Some(0.5)));
    let decoder = png::Decoder::new(std::io::BufReader::new(std::fs::File::open(&png).unwrap()));
    let mut reader = decoder.read_info().unwrap();
    let mut buf = vec![0; reader.output_buffer_size().unwrap()];
    let info = reader.next_frame(&mut buf).unwrap();
    let px = &buf[..info.buffer_size()];
    // One colour for the plate, plus the background margin.
    let colours: std::collections::BTreeSet<&[u8]> = px.chunks(3).collect();
    assert_eq!(colours.len(), 2, "constant field renders one colour");
    let centre = (400 * 800 + 400) * 3;
    assert_eq!(&px[centre..centre + 3], mechagents::fem::export::viridis(0.0));
    let again = cli(&["render", s(&path), s(&dir.path().join("d.png"))]);
    assert_eq!(serde_json::from_slice::<Value>(&again.stdout).unwrap()["max"], d["max"]);

    let corrupt = dir.path().join("x.field");
    std::fs::write(&corrupt, "mechagents-field v1 4 2 1\n0 0 0\n").unwrap();
    let target = dir.path().join("x.png");
    assert_eq!(cli(&["render", s(&corrupt), s(&target)]).status.code(), Some(1));
    assert!(!target.exists());
    assert!(std::fs::read_dir(dir.path()).unwrap().all(|e| !e.unwrap().file_name().to_string_lossy().contains("partial")));
}

#[test]
fn serve_bind_failure_exits_2() {
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port().to_string();
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&["serve", "--port", &port, "--root", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot bind"));
}

// Serve mode, in process.

struct Server {
    base: String,
    root: tempfile::TempDir,
    http: ureq::Agent,
}

impl Server {
    fn start(admin_timeout: Duration) -> Server {
        let root = tempfile::tempdir().unwrap();
        let config = ServeConfig {
            root: root.path().to_path_buf(),
            llm: LlmSettings::default(),
            api_key: None,
            limits: ConversationLimits::default(),
            admin_timeout,
        };
        let (tx, rx) = std::sync::mpsc::channel();
        thread::spawn(move || {
            let rt = tokio::runtime::Runtime::new().unwrap();
            rt.block_on(async {
                let listener = bind("127.0.0.1", 0).await.unwrap();
                tx.send(listener.local_addr().unwrap()).unwrap();
                serve(listener, config).await.unwrap();
            });
        });
        let addr = rx.recv().unwrap();
        let http = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Server { base: format!("http://{addr}"), root, http }
    }

    fn post(&self, path: &str, body: Value) -> (u16, Value) {
        let mut resp = self.http.post(format!("{}{path}", self.base)).send_json(&body).unwrap();
        let status = resp.status().as_u16();
        (status, serde_json::from_str(&resp.body_mut().read_to_string().unwrap()).unwrap_or(Value::Null))
    }

    fn get(&self, path: &str) -> (u16, Vec<u8>) {
        let mut resp = self.http.get(format!("{}{path}", self.base)).call().unwrap();
        (resp.status().as_u16(), resp.body_mut().with_config().limit(u64::MAX).read_to_vec().unwrap())
    }

    fn start_conversation(&self, body: Value) -> String {
        let (status, v) = self.post("/conversations", body);
        assert_eq!(status, 201, "{v}");
        v["id"].as_str().unwrap().to_string()
    }

    /// Follows the event stream to the end.
    fn events(&self, id: &str, from: usize) -> Vec<String> {
        let (status, body) = self.get(&format!("/conversations/{id}/events?from={from}"));
        assert_eq!(status, 200);
        String::from_utf8(body).unwrap().lines().map(str::to_string).collect()
    }

    fn status(&self, id: &str) -> Value {
        serde_json::from_slice(&self.get(&format!("/conversations/{id}")).1).unwrap()
    }

    fn wait_for(&self, id: &str, what: impl Fn(&Value) -> bool) {
        let t0 = Instant::now();
        while !what(&self.status(id)) {
            assert!(t0.elapsed() < Duration::from_secs(30), "timed out");
            thread::sleep(Duration::from_millis(10));
        }
    }
}

fn records(lines: &[String]) -> Vec<Record> {
    lines.iter().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn event_stream_delivers_every_record_in_order() {
    let server = Server::start(Duration::from_secs(5));
    let id = server.start_conversation(json!({"backend": "scripted", "scenario": "groupchat2", "admin_mode": "auto_skip"}));
    // Two subscribers: one from the start, one joining with an offset.
    let (a, b) = thread::scope(|scope| {
        let a = scope.spawn(|| server.events(&id, 0));
        let b = scope.spawn(|| server.events(&id, 5));
        (a.join().unwrap(), b.join().unwrap())
    });
    let recs = records(&a);
    let n = recs.len();
    for (i, r) in recs[..n - 1].iter().enumerate() {
        match r {
            Record::Message(m) => assert_eq!(m.seq, i as u64),
            Record::Termination(_) => panic!("termination before the end"),
        }
    }
    match &recs[n - 1] {
        Record::Termination(t) => assert_eq!(t.termination, Termination::Solved),
        _ => panic!("stream must end with the termination record"),
    }
    assert_eq!(b[..], a[5..]);
    let on_disk = std::fs::read_to_string(server.root.path().join(&id).join(TRANSCRIPT_FILE)).unwrap();
    assert_eq!(on_disk.lines().collect::<Vec<_>>(), a);
    // Reconnecting after the end yields only what was not seen.
    assert!(server.events(&id, n).is_empty());
    assert_eq!(server.status(&id)["closed"], true);

    server.wait_for(&id, |_| server.root.path().join(&id).join(SUMMARY_FILE).exists());
    let field = server.get(&format!("/artifacts/{id}/displacement.field"));
    assert_eq!(field.0, 200);
    assert_eq!(field.1, std::fs::read(server.root.path().join(&id).join("displacement.field")).unwrap());
    let png = server.get(&format!("/artifacts/{id}/displacement.png"));
    assert_eq!(&png.1[1..4], b"PNG");
    assert_eq!(server.get("/artifacts/../etc/passwd").0 / 100, 4);
    assert_eq!(server.get(&format!("/artifacts/{id}/missing.png")).0, 404);
}

#[test]
fn admin_approval_round_trips() {
    let server = Server::start(Duration::from_secs(30));
    let id = server.start_conversation(json!({"backend": "scripted", "scenario": "groupchat1", "topology": "group_chat"}));
    server.wait_for(&id, |s| s["awaiting_admin"] == true);
    let (status, v) = server.post(&format!("/conversations/{id}/admin"), json!({"action": "approve"}));
    assert_eq!(status, 202, "{v}");
    let recs = records(&server.events(&id, 0));
    let Record::Message(m) = &recs[2] else { panic!() };
    assert_eq!(m.content, "approve");
    let Record::Termination(t) = recs.last().unwrap() else { panic!() };
    assert_eq!(t.termination, Termination::Solved);
    // The conversation is over now.
    assert_eq!(server.post(&format!("/conversations/{id}/admin"), json!({"action": "abort"})).0, 409);
}

#[test]
fn early_injection_is_queued_for_the_admin_turn() {
    let server = Server::start(Duration::from_secs(30));
    let id = server.start_conversation(json!({"backend": "scripted", "scenario": "groupchat1"}));
    let (status, _) = server.post(&format!("/conversations/{id}/admin"), json!({"action": "abort"}));
    assert_eq!(status, 202);
    let recs = records(&server.events(&id, 0));
    let Record::Termination(t) = recs.last().unwrap() else { panic!() };
    assert_eq!(t.termination, Termination::HumanAbort);
    let Record::Message(m) = &recs[recs.len() - 2] else { panic!() };
    assert_eq!(m.content, "abort");
}

#[test]
fn text_and_revise_injections() {
    let server = Server::start(Duration::from_secs(30));
    let id = server.start_conversation(json!({"backend": "scripted", "scenario": "groupchat1"}));
    server.wait_for(&id, |s| s["awaiting_admin"] == true);
    let (status, _) = server.post(&format!("/conversations/{id}/admin"), json!({"action": "text", "text": "Looks fine."}));
    assert_eq!(status, 202);
    let recs = records(&server.events(&id, 0));
    let Record::Message(m) = &recs[2] else { panic!() };
    assert_eq!(m.content, "Looks fine.");
    assert_eq!(server.post(&format!("/conversations/{id}/admin"), json!({"action": "revise"})).0, 400);
}

#[test]
fn bad_requests_are_rejected() {
    let server = Server::start(Duration::from_secs(1));
    assert_eq!(server.post("/conversations", json!({"backend": "scripted", "scenario": "nope"})).0, 400);
    assert_eq!(server.post("/conversations", json!({"backend": "scripted"})).0, 400);
    assert_eq!(server.post("/conversations", json!({"backend": "llm", "task": "x", "topology": "two_agent"})).0, 400);
    assert_eq!(server.post("/conversations", json!({"backend": "scripted", "scenario": "conv1", "topology": "group_chat"})).0, 400);
    assert_eq!(server.post("/conversations/none/admin", json!({"action": "approve"})).0, 404);
    assert_eq!(server.get("/conversations/none/events").0, 404);
    let (status, body) = server.get("/");
    assert_eq!(status, 200);
    assert!(String::from_utf8(body).unwrap().contains("<html"));
}
