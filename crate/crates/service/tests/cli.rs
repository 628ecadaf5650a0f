mod common;

use std::path::Path;
use std::process::Command;
use std::sync::Arc;

use quota_core::{AuthContext, QuotaKey, QuotaLimits, RetentionPolicy};
use quota_service::rest::BackgroundServer;
use quota_service::{cli, QuotaService};

use common::{ADMIN_TOKEN, USER_TOKEN};

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run_with(line: &str, server: Option<&str>, token: Option<&str>) -> Run {
    let (server, token) = (server.map(String::from), token.map(String::from));
    let env = move |k: &str| match k {
        "QUOTA_SERVER_URL" => server.clone(),
        "QUOTA_TOKEN" => token.clone(),
        _ => None,
    };
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cli::run(line.split_whitespace(), &env, &mut out, &mut err);
    Run { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

fn run(server: &BackgroundServer, line: &str) -> Run {
    run_with(line, Some(&server.url()), Some(ADMIN_TOKEN))
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

/// Users 2, 100, 30 and group 7 with a mix of limits and scanned usage.
fn fixture() -> (Arc<QuotaService>, BackgroundServer) {
    let svc = Arc::new(QuotaService::in_memory());
    let admin = AuthContext::admin("setup", 0, 0);
    let lim = |p, v| QuotaLimits::UNLIMITED.with(p, Some(v));
    svc.put_quota(QuotaKey::user(2), lim(RetentionPolicy::Custodial, 10_000), &admin).unwrap();
    svc.put_quota(QuotaKey::user(100), lim(RetentionPolicy::Replica, 2 << 30), &admin).unwrap();
    svc.put_quota(QuotaKey::group(7), lim(RetentionPolicy::Custodial, 5 << 30), &admin).unwrap();
    let f = svc.create_entry("/big", 2, 7, Some(RetentionPolicy::Custodial), None, &admin).unwrap();
    svc.commit_size(f.id, 1_048_576).unwrap();
    let f = svc.create_entry("/small", 30, 7, Some(RetentionPolicy::Output), None, &admin).unwrap();
    svc.commit_size(f.id, 512).unwrap();
    svc.run_scan_now().unwrap();
    let server = common::serve(Arc::clone(&svc));
    (svc, server)
}

#[test]
fn show_matches_golden_files() {
    let (_, server) = fixture();
    for (line, file) in [
        ("show user quota", "show_user.txt"),
        ("show user quota -h", "show_user_h.txt"),
        ("show group quota", "show_group.txt"),
        ("show group quota -h", "show_group_h.txt"),
        ("show group quota -gid=7 -h", "show_group_h.txt"),
        ("show user quota -h -uid=2", "show_user_2_h.txt"),
    ] {
        let r = run(&server, line);
        assert_eq!(r.code, 0, "{line}: {}", r.stderr);
        assert_eq!(r.stdout, golden(file), "{line}");
        assert_eq!(run(&server, line).stdout, r.stdout, "{line} is not byte-stable");
    }
}

#[test]
fn read_commands_work_with_a_user_token() {
    let (_, server) = fixture();
    let r = run_with("show user quota -h", Some(&server.url()), Some(USER_TOKEN));
    assert_eq!(r.stdout, golden("show_user_h.txt"));
    let r = run_with("set user quota -custodial=1 2", Some(&server.url()), Some(USER_TOKEN));
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("403"), "{}", r.stderr);
}

#[test]
fn command_lines_round_trip() {
    let (svc, server) = fixture();
    let admin = AuthContext::admin("t", 0, 0);
    let lines = [
        "set group quota -custodial=5000 -replica=none 2000 # Set group quota",
        "set user quota -custodial=10000 1000 # Set user quota",
        "show group quota -gid=2000 -h # Print group quota",
        "show user quota -h -uid=1000 # Print user quota",
        "remove group quota 2000 # remove group quota",
        "remove user quota 1000 # remove user quota",
    ];
    for (i, line) in lines.iter().enumerate() {
        let r = run(&server, line);
        assert_eq!(r.code, 0, "{line}: {}", r.stderr);
        match i {
            0 => assert_eq!(
                svc.get_quota(QuotaKey::group(2000), &admin).unwrap().limits,
                Some(QuotaLimits { custodial: Some(5000), replica: None, output: None })
            ),
            1 => assert_eq!(
                svc.get_quota(QuotaKey::user(1000), &admin).unwrap().limits,
                Some(QuotaLimits { custodial: Some(10_000), replica: None, output: None })
            ),
            2 => assert!(r.stdout.lines().nth(1).unwrap().starts_with("2000       0B/4.9KiB ")),
            3 => assert!(r.stdout.lines().nth(1).unwrap().starts_with("1000       0B/9.8KiB ")),
            4 => assert!(svc.get_quota(QuotaKey::group(2000), &admin).is_err()),
            _ => assert!(svc.get_quota(QuotaKey::user(1000), &admin).is_err()),
        }
    }
}

#[test]
fn set_then_show_plain() {
    let (_, server) = fixture();
    assert_eq!(run(&server, "set user quota -custodial=10000 1000").code, 0);
    let r = run(&server, "show user quota -uid=1000");
    assert_eq!(r.stdout.lines().nth(1).unwrap().split_whitespace().collect::<Vec<_>>(), ["1000", "0/10000", "0/-", "0/-"]);
}

#[test]
fn set_on_existing_quota_changes_only_given_flags() {
    let (svc, server) = fixture();
    assert_eq!(run(&server, "set user quota -output=77 2").code, 0);
    let q = svc.get_quota(QuotaKey::user(2), &AuthContext::admin("t", 0, 0)).unwrap();
    assert_eq!(q.limits, Some(QuotaLimits { custodial: Some(10_000), replica: None, output: Some(77) }));
    assert_eq!(run(&server, "set user quota -custodial=none 2").code, 0);
    let q = svc.get_quota(QuotaKey::user(2), &AuthContext::admin("t", 0, 0)).unwrap();
    assert_eq!(q.limits, Some(QuotaLimits { custodial: None, replica: None, output: Some(77) }));
}

#[test]
fn missing_quota_is_exit_1() {
    let (_, server) = fixture();
    let r = run(&server, "remove user quota 9999");
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("not found"), "{}", r.stderr);
    let r = run(&server, "show group quota -gid=9999");
    assert_eq!(r.code, 1);
    assert!(r.stdout.is_empty());
}

#[test]
fn usage_errors_are_exit_2() {
    for line in ["remove user quota", "set user quota -big=1 3", "show user quota -uid=abc", "quota"] {
        let r = run_with(line, Some("http://127.0.0.1:9"), None);
        assert_eq!(r.code, 2, "{line}");
        assert!(r.stderr.contains("usage:"), "{line}: {}", r.stderr);
    }
}

#[test]
fn unreachable_server_is_exit_1() {
    let r = run_with("show user quota", Some("http://127.0.0.1:9"), None);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("cannot reach server"), "{}", r.stderr);
}

#[test]
fn flags_override_environment() {
    let (_, server) = fixture();
    let line = format!("--server {} --token {ADMIN_TOKEN} show user quota", server.url());
    let r = run_with(&line, Some("http://127.0.0.1:9"), Some("wrong"));
    assert_eq!(r.code, 0, "{}", r.stderr);
    let r = run_with("show user quota", Some(&server.url()), Some("wrong"));
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("401"), "{}", r.stderr);
    let base = format!("http://{}", server.addr());
    assert_eq!(run_with("show user quota", Some(&base), Some(ADMIN_TOKEN)).code, 0);
}

#[test]
fn binary_prints_golden_output() {
    let (_, server) = fixture();
    let out = Command::new(env!("CARGO_BIN_EXE_quota-admin"))
        .args(["show", "user", "quota", "-h"])
        .env("QUOTA_SERVER_URL", server.url())
        .env("QUOTA_TOKEN", ADMIN_TOKEN)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), golden("show_user_h.txt"));
    let out = Command::new(env!("CARGO_BIN_EXE_quota-admin")).args(["remove", "user"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scan_command() {
    let (_, server) = fixture();
    let r = run(&server, "scan");
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.starts_with("scan 2 complete: 2 entries"), "{}", r.stdout);
}
