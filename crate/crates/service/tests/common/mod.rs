#![allow(dead_code)]

use std::io::{BufRead, BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::{Arc, OnceLock};

use shotadvisor::artifact;
use shotadvisor::eval::generate_planted_corpus;
use shotadvisor::pipeline::{train_pipeline_with_holdout, PipelineConfig, TrainedModel};

pub const BIN: &str = env!("CARGO_BIN_EXE_shotadvisor");

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub corpus_path: PathBuf,
    pub model_path: PathBuf,
    pub model: Arc<TrainedModel>,
}

/// A planted-corpus model trained once per test binary.
pub fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let corpus = generate_planted_corpus(200, 7).unwrap();
        let corpus_path = dir.path().join("planted.jsonl");
        shotadvisor::corpus::save_corpus(&corpus, &corpus_path).unwrap();
        let model =
            train_pipeline_with_holdout(&corpus, &PipelineConfig::default(), 7, Some(0.8)).unwrap();
        let model_path = dir.path().join("planted.imr.json");
        artifact::save_model(&model, &model_path).unwrap();
        Fixture {
            dir,
            corpus_path,
            model_path,
            model: Arc::new(model),
        }
    })
}

pub fn default_origins() -> Vec<String> {
    shotadvisor_service::http::DEFAULT_ORIGINS
        .iter()
        .map(|s| s.to_string())
        .collect()
}

/// Serves `model` on an ephemeral loopback port from a background thread.
pub fn spawn_in_process(model: Arc<TrainedModel>, origins: Vec<String>) -> SocketAddr {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .enable_all()
            .build()
            .unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, shotadvisor_service::http::router(model, &origins))
                .await
                .unwrap();
        });
    });
    rx.recv().unwrap()
}

/// A `serve` child process that is killed on drop.
pub struct Server {
    pub child: Child,
    pub addr: SocketAddr,
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub fn spawn_binary(model: &Path, cwd: &Path) -> Server {
    let mut child = Command::new(BIN)
        .args(["serve", "--port", "0", "--model"])
        .arg(model)
        .current_dir(cwd)
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let addr = line
        .trim()
        .strip_prefix("listening on http://")
        .unwrap_or_else(|| panic!("unexpected banner {line:?}"))
        .parse()
        .unwrap();
    Server { child, addr }
}

/// Runs the binary with `stdin` piped in; returns (exit code, stdout, stderr).
pub fn run_cli(args: &[&str], stdin: &[u8]) -> (i32, Vec<u8>, String) {
    let mut child = Command::new(BIN)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut input = child.stdin.take().unwrap();
    let bytes = stdin.to_vec();
    let writer = std::thread::spawn(move || {
        let _ = input.write_all(&bytes);
    });
    let out = child.wait_with_output().unwrap();
    writer.join().unwrap();
    (
        out.status.code().unwrap_or(-1),
        out.stdout,
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

pub fn drafts() -> Vec<String> {
    [
        r#"{"summary":"menubar popup opens behind the window","description":"the menubar popup and keystroke handling are broken"}"#,
        r#"{"summary":"syntax traceback on startup","description":"a traceback with syntax error","product":"Core","keywords":["crash"]}"#,
        r#"{"summary":"typo in changelog","description":"spelling and wording of the license text"}"#,
        r#"{"summary":"","description":""}"#,
        r#"{"summary":"Überprüfung der Darstellung","description":"flowchart framerate walkthrough","severity":"major","op_sys":null}"#,
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

pub fn post_analyze(
    client: &reqwest::blocking::Client,
    addr: SocketAddr,
    body: &str,
) -> (u16, String) {
    let resp = client
        .post(format!("http://{addr}/analyze"))
        .header("content-type", "application/json")
        .body(body.to_string())
        .send()
        .unwrap();
    (resp.status().as_u16(), resp.text().unwrap())
}
