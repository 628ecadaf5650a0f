//! `quota-admin` command line.
//!
//! ```text
//! remove user quota <uid>
//! remove group quota <gid>
//! set user quota [-custodial=<bytes>|none] [-replica=<bytes>|none] [-output=<bytes>|none] <uid>
//! set group quota [...] <gid>
//! show user quota [-h] [-uid=<string>]
//! show group quota [-gid=<string>] [-h]
//! scan
//! serve [--config FILE] [--port N] [--data-dir DIR]
//! ```
//!
//! Global flags `--server URL` and `--token TOKEN` override `QUOTA_SERVER_URL`
//! and `QUOTA_TOKEN`. A `#` token ends the command line.

use std::io::Write;
use std::path::PathBuf;

use quota_core::{RetentionPolicy, ScopeKind};
use reqwest::blocking::{Client, RequestBuilder};
use reqwest::StatusCode;
use serde::de::DeserializeOwned;

use crate::config::Config;
use crate::rest::API_BASE;
use crate::wire::{ErrorBody, LimitsBody, PatchBody, QuotaJson, ScanReportJson};

pub const DEFAULT_SERVER: &str = "http://127.0.0.1:3880";

pub const USAGE: &str = "\
usage: quota-admin [--server URL] [--token TOKEN] <command>

commands:
  remove user quota <uid>
  remove group quota <gid>
  set user quota [-custodial=<bytes>|none] [-replica=<bytes>|none] [-output=<bytes>|none] <uid>
  set group quota [-custodial=<bytes>|none] [-replica=<bytes>|none] [-output=<bytes>|none] <gid>
  show user quota [-h] [-uid=<string>]
  show group quota [-gid=<string>] [-h]
  scan
  serve [--config FILE] [--port N] [--data-dir DIR]
";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Remove { kind: ScopeKind, id: u32 },
    Set { kind: ScopeKind, id: u32, custodial: Option<Option<u64>>, replica: Option<Option<u64>>, output: Option<Option<u64>> },
    Show { kind: ScopeKind, id: Option<u32>, human: bool },
    Scan,
    Serve { config: Option<PathBuf>, port: Option<u16>, data_dir: Option<PathBuf> },
    Help,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Invocation {
    pub server: Option<String>,
    pub token: Option<String>,
    pub command: Command,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{status}: {message}")]
    Api { status: StatusCode, message: String },
    #[error("cannot reach server: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("{0}")]
    Other(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_id(s: &str) -> Result<u32, CliError> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(usage(format!("invalid id {s:?}: expected a decimal integer")));
    }
    s.parse().map_err(|_| usage(format!("id out of range: {s}")))
}

fn parse_limit(flag: &str, v: &str) -> Result<Option<u64>, CliError> {
    if v.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    v.parse().map(Some).map_err(|_| usage(format!("-{flag}: expected a byte count or 'none', got {v:?}")))
}

fn parse_kind(word: Option<&str>) -> Result<ScopeKind, CliError> {
    match word {
        Some("user") => Ok(ScopeKind::User),
        Some("group") => Ok(ScopeKind::Group),
        Some(other) => Err(usage(format!("expected 'user' or 'group', got {other:?}"))),
        None => Err(usage("expected 'user' or 'group'")),
    }
}

fn expect_quota(word: Option<&str>) -> Result<(), CliError> {
    match word {
        Some("quota") => Ok(()),
        _ => Err(usage("expected 'quota'")),
    }
}

/// Takes `--name value` or `--name=value` out of `args`.
fn take_long(args: &mut Vec<String>, name: &str) -> Result<Option<String>, CliError> {
    let flag = format!("--{name}");
    let prefix = format!("--{name}=");
    let mut found = None;
    let mut i = 0;
    while i < args.len() {
        if args[i] == flag {
            if i + 1 >= args.len() {
                return Err(usage(format!("{flag} needs a value")));
            }
            found = Some(args.remove(i + 1));
            args.remove(i);
        } else if let Some(v) = args[i].strip_prefix(&prefix) {
            found = Some(v.to_owned());
            args.remove(i);
        } else {
            i += 1;
        }
    }
    Ok(found)
}

pub fn parse<I, S>(args: I) -> Result<Invocation, CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let mut args: Vec<String> = args.into_iter().map(Into::into).collect();
    if let Some(pos) = args.iter().position(|a| a.starts_with('#')) {
        args.truncate(pos);
    }
    let server = take_long(&mut args, "server")?;
    let token = take_long(&mut args, "token")?;
    let command = parse_command(args)?;
    Ok(Invocation { server, token, command })
}

fn parse_command(mut args: Vec<String>) -> Result<Command, CliError> {
    if args.is_empty() {
        return Err(usage("missing command"));
    }
    let verb = args.remove(0);
    match verb.as_str() {
        "help" | "--help" | "-help" => Ok(Command::Help),
        "scan" => {
            if let Some(extra) = args.first() {
                return Err(usage(format!("unexpected argument {extra:?}")));
            }
            Ok(Command::Scan)
        }
        "serve" => {
            let config = take_long(&mut args, "config")?.map(PathBuf::from);
            let port = take_long(&mut args, "port")?
                .map(|p| p.parse().map_err(|_| usage(format!("invalid port {p:?}"))))
                .transpose()?;
            let data_dir = take_long(&mut args, "data-dir")?.map(PathBuf::from);
            if let Some(extra) = args.first() {
                return Err(usage(format!("unexpected argument {extra:?}")));
            }
            Ok(Command::Serve { config, port, data_dir })
        }
        "remove" | "set" | "show" => {
            let mut it = args.iter().map(String::as_str);
            let kind = parse_kind(it.next())?;
            expect_quota(it.next())?;
            let rest: Vec<&str> = it.collect();
            match verb.as_str() {
                "remove" => match rest.as_slice() {
                    [id] if !id.starts_with('-') => Ok(Command::Remove { kind, id: parse_id(id)? }),
                    [] => Err(usage("missing id")),
                    _ => Err(usage("remove takes exactly one id")),
                },
                "set" => parse_set(kind, &rest),
                _ => parse_show(kind, &rest),
            }
        }
        other => Err(usage(format!("unknown command {other:?}"))),
    }
}

fn parse_set(kind: ScopeKind, rest: &[&str]) -> Result<Command, CliError> {
    let (mut custodial, mut replica, mut output, mut id) = (None, None, None, None);
    for arg in rest {
        if let Some(flag) = arg.strip_prefix('-') {
            let (name, value) = flag.split_once('=').ok_or_else(|| usage(format!("-{flag} needs a value")))?;
            let slot = match name {
                "custodial" => &mut custodial,
                "replica" => &mut replica,
                "output" => &mut output,
                _ => return Err(usage(format!("unknown option -{name}"))),
            };
            *slot = Some(parse_limit(name, value)?);
        } else if id.is_some() {
            return Err(usage(format!("unexpected argument {arg:?}")));
        } else {
            id = Some(parse_id(arg)?);
        }
    }
    let id = id.ok_or_else(|| usage("missing id"))?;
    Ok(Command::Set { kind, id, custodial, replica, output })
}

fn parse_show(kind: ScopeKind, rest: &[&str]) -> Result<Command, CliError> {
    let id_flag = match kind {
        ScopeKind::User => "uid",
        ScopeKind::Group => "gid",
    };
    let (mut human, mut id) = (false, None);
    for arg in rest {
        if *arg == "-h" {
            human = true;
        } else if let Some((name, value)) = arg.strip_prefix('-').and_then(|f| f.split_once('=')) {
            if name != id_flag {
                return Err(usage(format!("unknown option -{name}")));
            }
            id = Some(parse_id(value)?);
        } else {
            return Err(usage(format!("unexpected argument {arg:?}")));
        }
    }
    Ok(Command::Show { kind, id, human })
}

/// Binary (1024-based) size with one decimal; plain bytes below 1 KiB.
pub fn human_size(bytes: u64) -> String {
    const UNITS: [&str; 6] = ["KiB", "MiB", "GiB", "TiB", "PiB", "EiB"];
    if bytes < 1024 {
        return format!("{bytes}B");
    }
    let mut unit = 0;
    let mut scale = 1024u64;
    while unit + 1 < UNITS.len() && bytes / scale >= 1024 {
        scale *= 1024;
        unit += 1;
    }
    format!("{:.1}{}", bytes as f64 / scale as f64, UNITS[unit])
}

fn cell(q: &QuotaJson, policy: RetentionPolicy, human: bool) -> String {
    let fmt = |v: u64| if human { human_size(v) } else { v.to_string() };
    let limit = q.limit(policy).map_or_else(|| "-".to_string(), fmt);
    format!("{}/{}", fmt(q.used(policy)), limit)
}

/// Renders quotas as a fixed-width table, rows in the given order.
pub fn render_table(kind: ScopeKind, quotas: &[QuotaJson], human: bool) -> String {
    let id_header = match kind {
        ScopeKind::User => "UID",
        ScopeKind::Group => "GID",
    };
    let mut out = format!("{id_header:<10} {:<24} {:<24} {}\n", "CUSTODIAL", "REPLICA", "OUTPUT");
    for q in quotas {
        out.push_str(&format!(
            "{:<10} {:<24} {:<24} {}\n",
            q.id,
            cell(q, RetentionPolicy::Custodial, human),
            cell(q, RetentionPolicy::Replica, human),
            cell(q, RetentionPolicy::Output, human),
        ));
    }
    out
}

/// Thin blocking client for the REST API.
pub struct ApiClient {
    base: String,
    token: Option<String>,
    http: Client,
}

impl ApiClient {
    pub fn new(server: &str, token: Option<String>) -> Self {
        let trimmed = server.trim_end_matches('/');
        let base = if trimmed.ends_with(API_BASE) { trimmed.to_owned() } else { format!("{trimmed}{API_BASE}") };
        Self { base, token, http: Client::new() }
    }

    fn request(&self, method: reqwest::Method, path: &str) -> RequestBuilder {
        let rb = self.http.request(method, format!("{}{path}", self.base));
        match &self.token {
            Some(t) => rb.bearer_auth(t),
            None => rb,
        }
    }

    fn send(&self, rb: RequestBuilder) -> Result<reqwest::blocking::Response, CliError> {
        let resp = rb.send()?;
        let status = resp.status();
        if status.is_success() {
            return Ok(resp);
        }
        let text = resp.text().unwrap_or_default();
        let message = serde_json::from_str::<ErrorBody>(&text).map(|b| b.error).unwrap_or(text);
        Err(CliError::Api { status, message })
    }

    fn json<T: DeserializeOwned>(&self, rb: RequestBuilder) -> Result<T, CliError> {
        Ok(self.send(rb)?.json()?)
    }

    pub fn list(&self, kind: ScopeKind) -> Result<Vec<QuotaJson>, CliError> {
        self.json(self.request(reqwest::Method::GET, &format!("/quota/{kind}")))
    }

    pub fn get(&self, kind: ScopeKind, id: u32) -> Result<QuotaJson, CliError> {
        self.json(self.request(reqwest::Method::GET, &format!("/quota/{kind}/{id}")))
    }

    pub fn create(&self, kind: ScopeKind, id: u32, body: &LimitsBody) -> Result<QuotaJson, CliError> {
        self.json(self.request(reqwest::Method::POST, &format!("/quota/{kind}/{id}")).json(body))
    }

    pub fn patch(&self, kind: ScopeKind, id: u32, body: &PatchBody) -> Result<QuotaJson, CliError> {
        self.json(self.request(reqwest::Method::PATCH, &format!("/quota/{kind}/{id}")).json(body))
    }

    pub fn delete(&self, kind: ScopeKind, id: u32) -> Result<(), CliError> {
        self.send(self.request(reqwest::Method::DELETE, &format!("/quota/{kind}/{id}"))).map(|_| ())
    }

    pub fn scan(&self) -> Result<ScanReportJson, CliError> {
        self.json(self.request(reqwest::Method::POST, "/admin/scan"))
    }
}

fn to_signed(v: Option<Option<u64>>) -> Result<Option<Option<i64>>, CliError> {
    v.map(|inner| inner.map(|b| i64::try_from(b).map_err(|_| usage(format!("limit too large: {b}")))).transpose())
        .transpose()
}

/// Runs a client command. `serve` is handled by [`run`].
pub fn execute(client: &ApiClient, command: &Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Remove { kind, id } => client.delete(*kind, *id),
        Command::Set { kind, id, custodial, replica, output } => {
            let (c, r, o) = (to_signed(*custodial)?, to_signed(*replica)?, to_signed(*output)?);
            let create = LimitsBody { custodial_limit: c.flatten(), replica_limit: r.flatten(), output_limit: o.flatten() };
            match client.create(*kind, *id, &create) {
                Err(CliError::Api { status: StatusCode::CONFLICT, .. }) => {
                    let patch = PatchBody { custodial_limit: c, replica_limit: r, output_limit: o };
                    client.patch(*kind, *id, &patch).map(|_| ())
                }
                other => other.map(|_| ()),
            }
        }
        Command::Show { kind, id, human } => {
            let quotas = match id {
                Some(id) => vec![client.get(*kind, *id)?],
                None => client.list(*kind)?,
            };
            out.write_all(render_table(*kind, &quotas, *human).as_bytes()).map_err(anyhow::Error::from)?;
            Ok(())
        }
        Command::Scan => {
            let r = client.scan()?;
            writeln!(out, "scan {} complete: {} entries in {} ms", r.scan_seq, r.entries_scanned, r.finished_at.saturating_sub(r.started_at))
                .map_err(anyhow::Error::from)?;
            Ok(())
        }
        Command::Help => out.write_all(USAGE.as_bytes()).map_err(|e| anyhow::Error::from(e).into()),
        Command::Serve { .. } => Err(usage("serve cannot run as a client command")),
    }
}

fn serve(config: &Option<PathBuf>, port: Option<u16>, data_dir: &Option<PathBuf>, env: &dyn Fn(&str) -> Option<String>) -> Result<(), CliError> {
    let mut cfg = match config {
        Some(path) => Config::load(path).map_err(anyhow::Error::from)?,
        None => Config::default(),
    };
    if let Some(dir) = env("DATA_DIR").filter(|d| !d.is_empty()) {
        cfg.data_dir = Some(dir.into());
    }
    if let Some(dir) = data_dir {
        cfg.data_dir = Some(dir.clone());
    }
    if let Some(port) = port {
        cfg.port = port;
    }
    crate::rest::run_server(cfg)?;
    Ok(())
}

/// Full CLI entry point; returns the process exit code.
pub fn run<I, S>(args: I, env: &dyn Fn(&str) -> Option<String>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let result = parse(args).and_then(|inv| match &inv.command {
        Command::Serve { config, port, data_dir } => serve(config, *port, data_dir, env),
        command => {
            let server = inv.server.clone().or_else(|| env("QUOTA_SERVER_URL")).unwrap_or_else(|| DEFAULT_SERVER.into());
            let token = inv.token.clone().or_else(|| env("QUOTA_TOKEN"));
            execute(&ApiClient::new(&server, token), command, out)
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if matches!(e, CliError::Usage(_)) {
                let _ = err.write_all(USAGE.as_bytes());
            }
            e.exit_code()
        }
    }
}
