//! Runs the `shortcut-probe` binary end to end.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::sync::Arc;
use std::thread::sleep;
use std::time::{Duration, Instant};

use serde_json::Value;
use shortcut_probe_core::dataset::{DatasetManifest, Gender, ManifestRecord};
use shortcut_probe_core::gateway::protocol::{
    ActivationsResponse, EstimateRequest, ModelInfo, PromptRequest, TextResponse,
};
use shortcut_probe_core::gateway::{MockModel, MockServer, SidecarBehavior, SidecarError};
use shortcut_probe_core::Image;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shortcut-probe"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout_json(output: &Output) -> Value {
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    serde_json::from_slice(&output.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_flat_png(path: &Path, rgb: [u8; 3]) {
    Image::from_fn(16, 16, |_, _, c| f64::from(rgb[c]) / 255.0)
        .unwrap()
        .save_png(path)
        .unwrap();
}

/// Flat images under `dir/images` and a manifest `dir/<name>.jsonl`.
fn manifest(dir: &Path, name: &str, entries: &[(&str, [u8; 3], Option<u32>, Option<bool>)]) -> PathBuf {
    fs::create_dir_all(dir.join("images")).unwrap();
    let records = entries
        .iter()
        .map(|&(id, rgb, age, known)| {
            let rel = format!("images/{id}.png");
            write_flat_png(&dir.join(&rel), rgb);
            ManifestRecord {
                id: id.into(),
                path: rel.into(),
                age,
                gender: Gender::Unknown,
                identity: None,
                source: name.into(),
                known,
            }
        })
        .collect();
    let path = dir.join(format!("{name}.jsonl"));
    DatasetManifest::new(records).unwrap().save(&path).unwrap();
    path
}

/// A config with a subject and surrogate, three corruptions and steering.
fn experiment(dir: &Path) -> PathBuf {
    let ids: Vec<String> = (0..40).map(|i| format!("i{i:02}")).collect();
    let eval: Vec<_> = (0..16)
        .map(|i| {
            let level = (30 + i * 11) as u8;
            (ids[i].as_str(), [level, level / 2, 200 - level], Some(20 + i as u32), Some(i % 2 == 0))
        })
        .collect();
    let anchors = |offset: usize, base: u8| -> Vec<_> {
        (0..12)
            .map(|i| {
                let level = base + (i * 6) as u8;
                (ids[offset + i].as_str(), [level, level / 3, 255 - level], None, None)
            })
            .collect()
    };
    let eval = manifest(dir, "faces", &eval);
    let known = manifest(dir, "celebs", &anchors(16, 150));
    let unknown = manifest(dir, "strangers", &anchors(28, 20));
    let config = dir.join("experiment.toml");
    fs::write(
        &config,
        format!(
            r#"
output_dir = "out"
concurrency_limit = 1
corruptions = [
  {{ kind = "brightness", severity = 0.5 }},
  {{ kind = "gaussian_noise", severity = 0.25 }},
  {{ kind = "pixelate", severity = 0.99 }},
]

[seeds]
corruption_seed = 3

[steering]
enabled = true
alpha = 2.0

[[estimators]]
role = "subject"
endpoint = "mock"
model_id = "subject"
backoff_ms = 1

[[estimators]]
role = "surrogate"
endpoint = "mock"
model_id = "surrogate"
backoff_ms = 1

[[datasets]]
path = "{}"
role = "eval"

[[datasets]]
path = "{}"
role = "anchor_known"

[[datasets]]
path = "{}"
role = "anchor_unknown"
"#,
            p(&eval),
            p(&known),
            p(&unknown)
        ),
    )
    .unwrap();
    config
}

fn reports(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                if path.file_name().unwrap() != "cache" {
                    stack.push(path);
                }
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

/// The mock model with a fixed delay per request, or a rejection of every
/// estimate.
struct Slow {
    inner: MockModel,
    delay: Duration,
    reject: bool,
}

impl Slow {
    fn server(delay_ms: u64, reject: bool) -> MockServer {
        let behavior = Slow {
            inner: MockModel::default(),
            delay: Duration::from_millis(delay_ms),
            reject,
        };
        MockServer::start(Arc::new(behavior), 0).unwrap()
    }
}

impl SidecarBehavior for Slow {
    fn model_info(&self) -> ModelInfo {
        self.inner.model_info()
    }

    fn estimate(&self, request: &EstimateRequest) -> Result<TextResponse, SidecarError> {
        sleep(self.delay);
        if self.reject {
            return Err(SidecarError::bad_request("rejected"));
        }
        self.inner.estimate(request)
    }

    fn identify(&self, request: &PromptRequest) -> Result<TextResponse, SidecarError> {
        sleep(self.delay);
        self.inner.identify(request)
    }

    fn activations(&self, request: &PromptRequest) -> Result<ActivationsResponse, SidecarError> {
        sleep(self.delay);
        self.inner.activations(request)
    }
}

#[test]
fn catalog_lists_every_kind() {
    let catalog = stdout_json(&run(&["catalog"]));
    let kinds = catalog.as_array().unwrap();
    assert_eq!(kinds.len(), 19);
    assert!(kinds.iter().all(|k| k["levels"].as_array().unwrap().len() == 4));
    assert_eq!(kinds[0]["kind"], "gaussian_noise");
    assert_eq!(kinds[0]["levels"][3]["params"]["sigma"], 0.4);
}

#[test]
fn corrupt_writes_images_and_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("face.png");
    write_flat_png(&input, [90, 120, 150]);
    let out = dir.path().join("corrupted");
    let status = run(&["corrupt", "--in", p(&input), "--out", p(&out), "--kind", "fog", "--severity", "all", "--seed", "5"]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    for sev in ["0.25", "0.5", "0.75", "0.99"] {
        assert!(out.join(format!("face_fog_{sev}.png")).is_file());
    }
    let sidecar: Value = serde_json::from_str(&fs::read_to_string(out.join("face_fog_0.99.json")).unwrap()).unwrap();
    assert_eq!(sidecar["params"]["c1"], 2.98);
    assert_eq!(sidecar["spec"]["seed"], 5);

    let bad = run(&["corrupt", "--in", p(&input), "--out", p(&out), "--kind", "fog", "--severity", "0.3"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn manifest_build_demographics_and_subsample() {
    let dir = tempfile::tempdir().unwrap();
    let labels = dir.path().join("labels.csv");
    let mut csv = String::from("path,age,gender\n");
    for i in 0..30 {
        let gender = if i % 2 == 0 { "m" } else { "f" };
        csv.push_str(&format!("img{i}.png,{},{gender}\n", 20 + i));
    }
    fs::write(&labels, csv).unwrap();
    let m = dir.path().join("m.jsonl");
    let out = run(&["manifest", "build", "--labels", p(&labels), "--source", "synthetic", "--out", p(&m)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let demo = stdout_json(&run(&["manifest", "demographics", "--manifest", p(&m)]));
    assert_eq!(demo["male"]["21-32"].as_u64().unwrap() + demo["female"]["21-32"].as_u64().unwrap(), 12);

    let target = dir.path().join("target.json");
    fs::write(&target, r#"{"male": {"21-32": 2, "33-43": 50}, "female": {"44-53": 1}}"#).unwrap();
    let sub = dir.path().join("sub.jsonl");
    for _ in 0..2 {
        let out = run(&["manifest", "subsample", "--manifest", p(&m), "--target", p(&target), "--seed", "9", "--out", p(&sub)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let first = fs::read_to_string(&sub).unwrap();
    let sub_demo = stdout_json(&run(&["manifest", "demographics", "--manifest", p(&sub)]));
    assert_eq!(sub_demo["male"]["21-32"], 2);
    // ages 33..=43 hold 5 males, fewer than the 50 requested
    assert_eq!(sub_demo["male"]["33-43"], 5);
    assert_eq!(sub_demo["female"]["44-53"], 1);
    let out = run(&["manifest", "subsample", "--manifest", p(&m), "--target", p(&target), "--seed", "9", "--out", p(&sub)]);
    assert!(out.status.success());
    assert_eq!(fs::read_to_string(&sub).unwrap(), first);
}

#[test]
fn manifest_identify_and_split_with_mock() {
    let dir = tempfile::tempdir().unwrap();
    let m = manifest(dir.path(), "faces", &[("a", [10, 10, 10], Some(30), None), ("b", [200, 10, 10], Some(40), None)]);
    let results = dir.path().join("ids.json");
    let out = run(&["manifest", "identify", "--manifest", p(&m), "--out", p(&results)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let answers: Value = serde_json::from_str(&fs::read_to_string(&results).unwrap()).unwrap();
    assert!(answers["a"]["name"].is_null());
    let split = dir.path().join("split.jsonl");
    let out = run(&["manifest", "split", "--manifest", p(&m), "--results", p(&results), "--out", p(&split)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let parsed = DatasetManifest::load(&split).unwrap();
    assert!(parsed.records().iter().all(|r| r.known == Some(false)));
}

#[test]
fn metrics_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let known = dir.path().join("known.csv");
    let unknown = dir.path().join("unknown.csv");
    fs::write(&known, "id,f_pred,g_pred\na,30,35\nb,40,46\nc,50,56\n").unwrap();
    fs::write(&unknown, "id,f_pred,g_pred\nd,30,31\ne,40,40\nf,50,52\n").unwrap();
    let report = stdout_json(&run(&["metrics", "shortcut", "--known", p(&known), "--unknown", p(&unknown)]));
    let delta = report["delta_k"].as_f64().unwrap();
    assert!((delta - (17.0 / 3.0 - 1.0)).abs() < 1e-12);
    assert_eq!(report["n_known"], 3);

    let preds = dir.path().join("preds.csv");
    fs::write(&preds, "pred,label\n20,25\n30,25\n").unwrap();
    let m = stdout_json(&run(&["metrics", "mae", "--predictions", p(&preds)]));
    assert_eq!(m["mean"], 5.0);

    let records = dir.path().join("dev.csv");
    fs::write(
        &records,
        "dataset,id,corruption,base_pred,corrupted_pred\nA,1,fog@0.5,30,31\nA,2,fog@0.5,30,27\nA,3,fog@0.5,30,34\n",
    )
    .unwrap();
    let r = stdout_json(&run(&["metrics", "robustness", "--records", p(&records)]));
    assert_eq!(r["normalizers"]["fog@0.5"], 4.0);

    let errors = dir.path().join("errors.csv");
    let mut text = String::from("error\n");
    for i in 0..200 {
        let centre = if i % 2 == 0 { 2.0 } else { 20.0 };
        text.push_str(&format!("{}\n", centre + ((i * 37) % 17) as f64 / 17.0 - 0.5));
    }
    fs::write(&errors, text).unwrap();
    let curve = dir.path().join("curve.csv");
    let d = stdout_json(&run(&["metrics", "density", "--errors", p(&errors), "--curve", p(&curve)]));
    assert_eq!(d["bimodality_score"], 2);
    assert_eq!(fs::read_to_string(&curve).unwrap().lines().count(), 257);
}

#[test]
fn task_vector_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let names: Vec<String> = (0..24).map(|i| format!("v{i:02}")).collect();
    let known: Vec<_> = (0..12).map(|i| (names[i].as_str(), [150 + i as u8 * 7, 40, 90], None, None)).collect();
    let unknown: Vec<_> = (0..12).map(|i| (names[12 + i].as_str(), [20 + i as u8 * 7, 60, 10], None, None)).collect();
    let mk = manifest(dir.path(), "known", &known);
    let mu = manifest(dir.path(), "unknown", &unknown);
    let (tk, tu) = (dir.path().join("k.sptv"), dir.path().join("u.sptv"));
    for (m, out) in [(&mk, &tk), (&mu, &tu)] {
        let o = run(&["tv", "build", "--manifest", p(m), "--out", p(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let anchors = dir.path().join("anchors.sptv");
    assert!(run(&["tv", "anchors", "--known", p(&tk), "--unknown", p(&tu), "--out", p(&anchors)]).status.success());
    let ratio = stdout_json(&run(&["tv", "ratio", "--vectors", p(&tk), "--known", p(&tk), "--unknown", p(&tu)]));
    assert_eq!(ratio["n"], 12);
    assert!(ratio["ratio"].as_f64().unwrap() > 0.5);
    let steer = dir.path().join("steer.sptv");
    let o = run(&["tv", "steer", "--anchors", p(&anchors), "--alpha", "2", "--out", p(&steer)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("fingerprint"));
    let meta: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("steer.sptv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["alpha"], 2.0);
    // a plain task-vector container is not an anchor container
    assert_eq!(run(&["tv", "steer", "--anchors", p(&tk), "--out", p(&steer)]).status.code(), Some(1));
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "output_dir = \"out\"\nunknown_key = true\n").unwrap();
    assert_eq!(run(&["run", "--config", p(&config)]).status.code(), Some(2));
    let missing = dir.path().join("missing.toml");
    assert_eq!(run(&["run", "--config", p(&missing)]).status.code(), Some(2));

    let good = experiment(dir.path());
    let o = run(&["run", "--config", p(&good), "--failure-budget", "2"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn failed_requests_over_budget_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = experiment(dir.path());
    let server = Slow::server(0, true);
    let o = run(&["run", "--config", p(&config), "--only", "shortcut", "--endpoint", &server.url()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let failures: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/failures_shortcut.json")).unwrap()).unwrap();
    assert_eq!(failures.as_array().unwrap().len(), 32);
}

#[test]
fn killed_run_resumes_to_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config = experiment(dir.path());
    let fast = Slow::server(0, false);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));

    let reference = run(&["run", "--config", p(&config), "--output-dir", p(&a), "--endpoint", &fast.url()]);
    assert!(reference.status.success(), "{}", String::from_utf8_lossy(&reference.stderr));
    let reference_requests = fast.request_count();

    let slow = Slow::server(10, false);
    let mut child = bin()
        .args(["run", "--config", p(&config), "--output-dir", p(&b), "--endpoint", &slow.url()])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let log = b.join("cache/log.jsonl");
    let started = Instant::now();
    loop {
        let lines = fs::read_to_string(&log).map(|t| t.lines().count()).unwrap_or(0);
        if lines >= 60 {
            break;
        }
        assert!(child.try_wait().unwrap().is_none(), "run finished before it could be killed");
        assert!(started.elapsed() < Duration::from_secs(60), "run made no progress");
        sleep(Duration::from_millis(5));
    }
    child.kill().unwrap();
    child.wait().unwrap();
    let served_before_kill = slow.request_count();
    assert!(served_before_kill < reference_requests);

    let resumed_server = Slow::server(0, false);
    let resumed = run(&["run", "--config", p(&config), "--output-dir", p(&b), "--endpoint", &resumed_server.url()]);
    assert!(resumed.status.success(), "{}", String::from_utf8_lossy(&resumed.stderr));
    assert!(resumed_server.request_count() < reference_requests);

    let (ra, rb) = (reports(&a), reports(&b));
    assert_eq!(ra.keys().collect::<Vec<_>>(), rb.keys().collect::<Vec<_>>());
    for (name, bytes) in &ra {
        assert!(bytes == &rb[name], "{name} differs after resume");
    }

    let idle = Slow::server(0, false);
    let cached = run(&["run", "--config", p(&config), "--output-dir", p(&b), "--endpoint", &idle.url()]);
    assert!(cached.status.success(), "{}", String::from_utf8_lossy(&cached.stderr));
    assert_eq!(idle.request_count(), 0);
    assert_eq!(reports(&b), ra);
}
