use std::path::Path;
use std::process::{Command, Output};

fn textsignal(workdir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_textsignal"))
        .arg("--workdir")
        .arg(workdir)
        .args(args)
        .env_remove("TEXTSIGNAL_BACKEND_URL")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const THREE: &str = concat!(
    r#"{"doc_id":"n1","title":"Senado aprova marco da IA","description":"Projeto segue para a Câmara."}"#,
    "\n",
    r#"{"doc_id":"n2","title":"Startup capta US$ 20 milhões","description":"Rodada liderada por fundo."}"#,
    "\n",
    r#"{"doc_id":"n3","title":"Hospitais testam IA","description":""}"#,
    "\n"
);

fn corpus(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("in.jsonl");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn ingest_reports_count() {
    let dir = tempfile::tempdir().unwrap();
    let input = corpus(dir.path(), THREE);
    let out = textsignal(&dir.path().join("w"), &["ingest", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("ingested 3 documents"));
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = corpus(dir.path(), "{\"doc_id\":\"a\"}\n{\"title\":\"no id\"}\n");
    let out = textsignal(&dir.path().join("w"), &["ingest", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));

    let out = textsignal(&dir.path().join("empty"), &["embed"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("run `ingest` first"), "{}", stderr(&out));

    let out = textsignal(&dir.path().join("w"), &["embed", "--set", "sigma_globl=1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("sigma_globl"), "{}", stderr(&out));
}

fn closed_port_url() -> String {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    url
}

#[test]
fn transport_errors_exit_two_and_list_documents() {
    let dir = tempfile::tempdir().unwrap();
    let input = corpus(dir.path(), THREE);
    let wd = dir.path().join("w");
    assert_eq!(textsignal(&wd, &["ingest", input.to_str().unwrap()]).status.code(), Some(0));

    let url = format!("base_url={:?}", closed_port_url());
    let out = textsignal(&wd, &["embed", "--set", "backend=remote", "--set", &url, "--set", "retry_max=0"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    let err = stderr(&out);
    assert!(err.contains("failed doc_ids") && err.contains("n1") && err.contains("n3"), "{err}");
}

#[test]
fn backend_url_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let input = corpus(dir.path(), THREE);
    let wd = dir.path().join("w");
    textsignal(&wd, &["ingest", input.to_str().unwrap()]);

    let out = textsignal(&wd, &["embed", "--set", "backend=remote"]);
    assert_eq!(out.status.code(), Some(1), "no URL is a configuration error");
    assert!(stderr(&out).contains("TEXTSIGNAL_BACKEND_URL"));

    let out = Command::new(env!("CARGO_BIN_EXE_textsignal"))
        .arg("--workdir")
        .arg(&wd)
        .args(["embed", "--set", "backend=remote", "--set", "retry_max=0"])
        .env("TEXTSIGNAL_BACKEND_URL", closed_port_url())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn demo_then_recolor_map() {
    let dir = tempfile::tempdir().unwrap();
    let wd = dir.path().join("w");
    let out = textsignal(&wd, &["demo", "--n", "400", "--set", "mock_dim=64"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("removed"));
    for f in ["map.csv", "map.svg", "profile_all.md", "profile_retained.json", "cascade_report.json", "manifest.json"] {
        assert!(wd.join(f).exists(), "{f}");
    }

    let out = textsignal(&wd, &["map", "--color-by", "bogus", "--set", "mock_dim=64"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("region") && err.contains("retained") && err.contains("ethics_utility"), "{err}");

    let out = textsignal(&wd, &["map", "--color-by", "ethics_utility", "--set", "mock_dim=64"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let svg = std::fs::read_to_string(wd.join("map.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 400);
}

#[test]
fn config_file_and_force() {
    let dir = tempfile::tempdir().unwrap();
    let wd = dir.path().join("w");
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "k = 5\nmock_dim = 32\nseed = 7\n").unwrap();
    let c = cfg.to_str().unwrap();
    let out = textsignal(&wd, &["demo", "--n", "300", "--config", c]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let model: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(wd.join("kmeans.json")).unwrap()).unwrap();
    assert_eq!(model["K"], 5);
    assert_eq!(model["seed"], 7);

    std::fs::write(wd.join("regions.csv"), "doc_id,region_id,density_core\n").unwrap();
    let out = textsignal(&wd, &["prune", "--config", c]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("partition"), "{}", stderr(&out));
    let out = textsignal(&wd, &["partition", "--config", c]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let out = textsignal(&wd, &["prune", "--config", c]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}
