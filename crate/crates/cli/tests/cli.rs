use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::Duration;

use roblab_core::world::{pgm, CompressedWorld};
use roblab_server::Client;

const ROBLAB: &str = env!("CARGO_BIN_EXE_roblab");
const PLUGIN: &str = env!("CARGO_BIN_EXE_roblab-plugin");

fn roblab(dir: &Path, args: &[&str]) -> Output {
    Command::new(ROBLAB).args(args).current_dir(dir).env("RUST_LOG", "off").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn last_err_line(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).lines().last().unwrap_or("").to_string()
}

fn history_of(dir: &Path, o: &Output) -> PathBuf {
    let line = stdout(o).lines().find_map(|l| l.strip_prefix("history: ").map(str::to_string)).expect("history line");
    dir.join(line)
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn plugin_script(dir: &Path, name: &str, flags: &str) -> PathBuf {
    let p = write(dir, name, &format!("#!/bin/sh\nexec {PLUGIN} {flags}\n"));
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        std::fs::set_permissions(&p, std::fs::Permissions::from_mode(0o755)).unwrap();
    }
    p
}

#[test]
fn empty_script_gives_empty_history() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "s.txt", "# nothing\n");
    let o = roblab(d.path(), &["run", "s.txt", "--fast", "--out", "out"]);
    assert!(o.status.success(), "{o:?}");
    let csv = std::fs::read_to_string(history_of(d.path(), &o).join("state.csv")).unwrap();
    assert_eq!(csv.trim_end(), "t,x,y,th,vx,vy,w,d,u1,u2,battery");
}

#[test]
fn same_seed_same_bytes() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "s.txt", "0 plugin example\n0 command 0.6 0.6\n3 command -0.4 0.4\n4 mode automatic\n40 end\n");
    let run = |out: &str| {
        let o = roblab(d.path(), &["run", "s.txt", "--fast", "--seed", "11", "--out", out]);
        assert!(o.status.success(), "{o:?}");
        history_of(d.path(), &o)
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["state.csv", "world.pgm"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let other = roblab(d.path(), &["run", "s.txt", "--fast", "--seed", "12", "--out", "c"]);
    assert_ne!(std::fs::read(a.join("state.csv")).unwrap(), std::fs::read(history_of(d.path(), &other).join("state.csv")).unwrap());
}

#[test]
fn failures_are_one_line_and_nonzero() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "bad.txt", "0 mode manual\n1 teleport 3\n");
    write(d.path(), "ok.txt", "1 end\n");
    write(d.path(), "bad.toml", "tick_period_ms = 200\nwarp_factor = 9\n");
    write(d.path(), "bad_server.toml", "state_period_ms = 100\n[lab]\nwarp_factor = 9\n");
    let cases: Vec<(Vec<&str>, &str)> = vec![
        (vec!["run", "bad.txt", "--fast"], "error: bad-script: line 2"),
        (vec!["run", "missing.txt", "--fast"], "error: io:"),
        (vec!["run", "ok.txt", "--fast", "--config", "bad.toml"], "warp_factor"),
        (vec!["serve", "--config", "bad_server.toml"], "warp_factor"),
        (vec!["render", "missing", "--out", "x.pgm"], "error: io:"),
        (vec!["frobnicate"], "error: usage:"),
        (vec!["slot", "add", "nobody", "2030-01-01T00:00:00Z", "2030-01-01T01:00:00Z", "--booking", "b.txt"], "error: booking:"),
        (vec!["slot", "add", "x", "yesterday", "today", "--booking", "b.txt"], "error: bad-time:"),
    ];
    for (args, want) in cases {
        let o = roblab(d.path(), &args);
        assert!(!o.status.success(), "{args:?}");
        let err = String::from_utf8_lossy(&o.stderr).into_owned();
        assert_eq!(err.trim_end().lines().count(), 1, "{args:?}: {err}");
        assert!(err.starts_with("error: ") && err.contains(want), "{args:?}: {err}");
    }
}

#[test]
fn plugin_policy_sets_exit_code() {
    let d = tempfile::tempdir().unwrap();
    plugin_script(d.path(), "slow.sh", "--sleep-ms 300 --command 0.5,0.5");
    plugin_script(d.path(), "broken.sh", "--fail-init");
    plugin_script(d.path(), "fine.sh", "--command 0.5,0.5");
    let script = |name: &str, plugin: &str| write(d.path(), name, &format!("0 plugin ./{plugin}\n0 mode automatic\n2 end\n"));
    script("slow.txt", "slow.sh");
    script("broken.txt", "broken.sh");
    script("fine.txt", "fine.sh");

    let o = roblab(d.path(), &["run", "slow.txt", "--fast", "--out", "o1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(last_err_line(&o).starts_with("error: plugin-policy: plugin disabled: 3 consecutive overruns"), "{o:?}");
    assert!(stdout(&o).contains("overruns: 3"));

    let o = roblab(d.path(), &["run", "broken.txt", "--fast", "--out", "o2"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(last_err_line(&o).contains("plugin launch failed"), "{o:?}");
    assert!(history_of(d.path(), &o).join("state.csv").exists());

    let o = roblab(d.path(), &["run", "fine.txt", "--fast", "--out", "o3"]);
    assert!(o.status.success(), "{o:?}");
    let csv = std::fs::read_to_string(history_of(d.path(), &o).join("state.csv")).unwrap();
    assert!(csv.lines().last().unwrap().contains(",0.5,0.5,"), "{csv}");
}

#[test]
fn render_history_and_maps() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "s.txt", "2 end\n");
    let o = roblab(d.path(), &["run", "s.txt", "--fast", "--out", "h"]);
    let hist = history_of(d.path(), &o);
    let o = roblab(d.path(), &["render", hist.to_str().unwrap(), "--out", "prior.pgm"]);
    assert!(o.status.success(), "{o:?}");
    let (w, h, px) = pgm::decode(&std::fs::read(d.path().join("prior.pgm")).unwrap()).unwrap();
    assert_eq!((w, h), (400, 300));
    assert!(px.iter().all(|&p| p == 128), "prior renders uniform mid-gray");

    // two blobs rasterized independently: a disc and a box
    let mut bits = vec![false; 300 * 400];
    let mut expected = 0;
    for r in 0..300 {
        for c in 0..400 {
            let (x, y) = ((c as f64 + 0.5) * 0.01, (r as f64 + 0.5) * 0.01);
            let disc = (x - 1.0).powi(2) + (y - 1.0).powi(2) <= 0.25f64.powi(2);
            let rect = (2.5..=3.3).contains(&x) && (1.6..=2.2).contains(&y);
            if disc || rect {
                bits[r * 400 + c] = true;
                expected += 1;
            }
        }
    }
    std::fs::write(d.path().join("two.bin"), CompressedWorld::from_bits(300, 400, bits, 0.5).to_bytes()).unwrap();
    let o = roblab(d.path(), &["render", "two.bin", "--out", "two.pgm"]);
    assert!(o.status.success(), "{o:?}");
    let (_, _, px) = pgm::decode(&std::fs::read(d.path().join("two.pgm")).unwrap()).unwrap();
    assert_eq!(px.iter().filter(|&&p| p == 255).count(), expected);
    assert_eq!(px[100 * 400 + 100], 255);
    assert_eq!(px[190 * 400 + 290], 255);
    assert_eq!(px[10 * 400 + 10], 0);

    std::fs::write(d.path().join("junk.bin"), [0u8, 3, 0, 3, 128, 200]).unwrap();
    let o = roblab(d.path(), &["render", "junk.bin", "--out", "j.pgm"]);
    assert!(last_err_line(&o).starts_with("error: bad-map:"));
}

#[test]
fn worldgen_is_stable_per_name() {
    let d = tempfile::tempdir().unwrap();
    let a = roblab(d.path(), &["worldgen", "--user", "alice", "--map", "a.bin"]);
    let b = roblab(d.path(), &["worldgen", "--user", "alice"]);
    let c = roblab(d.path(), &["worldgen", "--user", "bob"]);
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    assert_ne!(stdout(&a), stdout(&c));
    let world = CompressedWorld::from_bytes(&std::fs::read(d.path().join("a.bin")).unwrap()).unwrap();
    assert!(world.decompress().unwrap().occupied_count() > 100);
}

#[test]
fn user_and_slot_admin() {
    let d = tempfile::tempdir().unwrap();
    let mut child = Command::new(ROBLAB)
        .args(["user", "add", "carol", "--booking", "b.txt"])
        .current_dir(d.path())
        .stdin(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"s3cret\n").unwrap();
    assert!(child.wait().unwrap().success());
    assert!(roblab(d.path(), &["user", "add", "dave", "--password", "pw", "--booking", "b.txt"]).status.success());
    assert_eq!(stdout(&roblab(d.path(), &["user", "list", "--booking", "b.txt"])), "carol\ndave\n");
    let o = roblab(d.path(), &["slot", "add", "carol", "2030-01-01T10:00:00Z", "2030-01-01T11:00:00Z", "--booking", "b.txt"]);
    assert!(o.status.success(), "{o:?}");
    let clash = roblab(d.path(), &["slot", "add", "dave", "2030-01-01T10:30:00Z", "2030-01-01T12:00:00Z", "--booking", "b.txt"]);
    assert!(!clash.status.success());
    assert_eq!(stdout(&roblab(d.path(), &["slot", "list", "--booking", "b.txt"])).lines().count(), 1);
    assert!(roblab(d.path(), &["slot", "cancel", "carol", "2030-01-01T10:00:00Z", "--booking", "b.txt"]).status.success());
    assert!(roblab(d.path(), &["user", "remove", "dave", "--booking", "b.txt"]).status.success());
    assert_eq!(stdout(&roblab(d.path(), &["user", "list", "--booking", "b.txt"])), "carol\n");
    assert!(!roblab(d.path(), &["user", "remove", "example", "--booking", "b.txt"]).status.success());
}

#[cfg(unix)]
#[test]
fn serve_answers_auth_and_flushes_on_interrupt() {
    let d = tempfile::tempdir().unwrap();
    let mut child = Command::new(ROBLAB)
        .arg("serve")
        .env("ROBLAB_TCP_ADDR", "127.0.0.1:0")
        .env("ROBLAB_WS_ADDR", "127.0.0.1:0")
        .env("ROBLAB_DATA_DIR", d.path())
        .env("RUST_LOG", "off")
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let tcp = line.split_whitespace().find_map(|w| w.strip_prefix("tcp=")).unwrap().to_string();
    let mut c = Client::connect(&tcp).unwrap();
    c.auth("example", "").unwrap();
    c.lifecycle("open").unwrap();
    std::thread::sleep(Duration::from_millis(200));

    // a second server on the same port must fail clearly
    let o = Command::new(ROBLAB).arg("serve").env("ROBLAB_TCP_ADDR", &tcp).env("ROBLAB_WS_ADDR", "127.0.0.1:0").env("ROBLAB_DATA_DIR", d.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(last_err_line(&o).starts_with("error: bind: cannot bind tcp listener"), "{o:?}");

    Command::new("kill").args(["-INT", &child.id().to_string()]).status().unwrap();
    assert!(child.wait().unwrap().success());
    let hist = std::fs::read_dir(d.path().join("users/example")).unwrap().flatten().filter(|e| e.file_name().to_string_lossy().starts_with("hist_")).count();
    assert_eq!(hist, 1);
}
