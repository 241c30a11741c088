//! Helpers for driving the `geosensor` binary.
#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn geosensor(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geosensor"))
        .arg("--root")
        .arg(root)
        .args(args)
        .env_remove("GEOSENSOR_ROOT")
        .stdin(Stdio::null())
        .output()
        .expect("run geosensor")
}

pub fn ok(out: Output) -> Output {
    assert!(out.status.success(), "exit {:?}\nstderr: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    out
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Builds the sample catalog under `root` through the CLI alone.
pub fn load_fixture_catalog(root: &Path) {
    let p = |n: &str| fixture(n).to_string_lossy().into_owned();
    ok(geosensor(root, &["init"]));
    ok(geosensor(
        root,
        &["load-raster", "ndvi", "1", &p("ndvi.asc"), "--srid", "32633", "--timestamp", "2011-06-01T00:00:00Z", "--sensor", "modis-ndvi", "--tile-size", "2"],
    ));
    ok(geosensor(
        root,
        &[
            "load-raster", "lst_day", "1", &p("lst_day.asc"), "--srid", "32633", "--timestamp", "2011-06-01T10:30:00Z",
            "--sensor", "modis-lst", "--tile-size", "4", "--pixel-type", "float32",
        ],
    ));
    ok(geosensor(
        root,
        &[
            "load-observations", "in_situ_lst", &p("in_situ_lst.csv"), "--srid", "32633", "--schema",
            "temp_lst_id:number,temp_value:number,the_geom:geometry,obs_time:timestamp",
        ],
    ));
    ok(geosensor(
        root,
        &[
            "load-observations", "in_situ_ret", &p("in_situ_ret.csv"), "--srid", "32633", "--schema",
            "ret_id:number,value:real,the_geom:geometry,obs_time:timestamp",
        ],
    ));
    for (id, kind, platform, linked, pname) in [
        ("modis-ndvi", "remote", "terra", "ndvi", "Terra"),
        ("modis-lst", "remote", "terra", "lst_day", "Terra"),
        ("lst-probe", "in-situ", "field-station", "in_situ_lst", "Automatic weather station"),
        ("ret-gauge", "in-situ", "field-station", "in_situ_ret", "Automatic weather station"),
    ] {
        ok(geosensor(
            root,
            &[
                "register-sensor", id, "--name", id, "--kind", kind, "--platform", platform, "--phenomenon", "test",
                "--linked", linked, "--platform-name", pname,
            ],
        ));
    }
}

pub struct Server {
    pub child: Child,
    pub addr: String,
}

impl Server {
    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }

    pub fn pid(&self) -> i32 {
        self.child.id() as i32
    }

    pub fn wait_exit(&mut self, timeout: Duration) -> Option<i32> {
        let start = Instant::now();
        while start.elapsed() < timeout {
            if let Some(status) = self.child.try_wait().unwrap() {
                return status.code();
            }
            std::thread::sleep(Duration::from_millis(20));
        }
        None
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Starts `serve` and waits for its listening line.
pub fn spawn_server(root: &Path, extra: &[&str]) -> Server {
    let mut child = Command::new(env!("CARGO_BIN_EXE_geosensor"))
        .arg("--root")
        .arg(root)
        .args(["serve", "--listen", "127.0.0.1:0"])
        .args(extra)
        .env("GEOSENSOR_LOG", "warn")
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn server");
    let mut lines = BufReader::new(child.stderr.take().unwrap()).lines();
    let line = lines.next().expect("server printed nothing").unwrap();
    let addr = line.strip_prefix("listening on http://").unwrap_or_else(|| panic!("unexpected: {line}")).to_string();
    // keep draining so the server never blocks on a full pipe
    std::thread::spawn(move || for _ in lines {});
    Server { child, addr }
}

pub fn form(q: &str) -> String {
    let mut out = String::from("q=");
    for b in q.bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'*' => out.push(b as char),
            b' ' => out.push('+'),
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

/// POSTs a query; returns status, content type and body.
pub fn post_query(server: &Server, q: &str) -> (u16, String, Vec<u8>) {
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let mut resp = agent
        .post(&server.url("/wqs"))
        .header("Content-Type", "application/x-www-form-urlencoded")
        .send(form(q))
        .expect("post /wqs");
    let status = resp.status().as_u16();
    let media = resp.headers().get("content-type").map(|v| v.to_str().unwrap().to_string()).unwrap_or_default();
    let body = resp.body_mut().with_config().limit(64 << 20).read_to_vec().unwrap();
    (status, media, body)
}

pub fn http_get(server: &Server, path: &str) -> (u16, Vec<u8>) {
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let mut resp = agent.get(&server.url(path)).call().expect("get");
    let status = resp.status().as_u16();
    (status, resp.body_mut().read_to_vec().unwrap())
}
