//! `key=value` service configuration.
//!
//! ```text
//! port=3880
//! data-dir=/var/lib/quota
//! scan.interval=60s
//! scan.enabled=true
//! journal.fsync=false
//! journal.compact-after=10000
//! token.s3cret=admin:0:0
//! token.alice-token=user:1000:2000
//! ```
//!
//! The part after `token.` is the bearer token; it doubles as the subject name.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use quota_core::{AuthContext, Role, ScanSchedule};

use crate::service::ServiceOptions;
use crate::store::StoreOptions;

pub const DEFAULT_PORT: u16 = 3880;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub port: u16,
    pub data_dir: Option<PathBuf>,
    pub scan: ScanSchedule,
    pub fsync: bool,
    pub compact_after: Option<u64>,
    pub tokens: HashMap<String, AuthContext>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            port: DEFAULT_PORT,
            data_dir: None,
            scan: ScanSchedule::default(),
            fsync: false,
            compact_after: Some(10_000),
            tokens: HashMap::new(),
        }
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Some(true),
        "false" | "no" | "off" | "0" => Some(false),
        _ => None,
    }
}

fn parse_token(name: &str, value: &str) -> Result<AuthContext, String> {
    let mut parts = value.split(':');
    let (Some(role), Some(uid), Some(gid), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
        return Err(format!("token {name}: expected <role>:<uid>:<gid>"));
    };
    let role = match role.to_ascii_lowercase().as_str() {
        "admin" => Role::Admin,
        "user" => Role::User,
        other => return Err(format!("token {name}: unknown role {other:?}")),
    };
    let uid = uid.parse().map_err(|_| format!("token {name}: bad uid {uid:?}"))?;
    let gid = gid.parse().map_err(|_| format!("token {name}: bad gid {gid:?}"))?;
    Ok(AuthContext::new(name, role, uid, gid))
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        text.parse()
    }

    pub fn service_options(&self) -> ServiceOptions {
        ServiceOptions { store: StoreOptions { fsync: self.fsync, ..Default::default() }, compact_after: self.compact_after }
    }

    /// Resolves a bearer token; unknown or missing tokens are anonymous.
    pub fn authenticate(&self, token: Option<&str>) -> AuthContext {
        token.and_then(|t| self.tokens.get(t)).cloned().unwrap_or_else(AuthContext::anonymous)
    }
}

impl std::str::FromStr for Config {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Config::default();
        let mut interval = cfg.scan.interval();
        let mut enabled = cfg.scan.enabled;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let bad = |message: String| ConfigError::Invalid { line, message };
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| bad("expected key=value".into()))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "port" => cfg.port = value.parse().map_err(|_| bad(format!("bad port {value:?}")))?,
                "data-dir" => cfg.data_dir = (!value.is_empty()).then(|| PathBuf::from(value)),
                "scan.interval" => {
                    interval = humantime::parse_duration(value).map_err(|e| bad(format!("scan.interval: {e}")))?;
                    if interval == Duration::ZERO {
                        return Err(bad("scan.interval must be positive".into()));
                    }
                }
                "scan.enabled" => enabled = parse_bool(value).ok_or_else(|| bad(format!("bad boolean {value:?}")))?,
                "journal.fsync" => cfg.fsync = parse_bool(value).ok_or_else(|| bad(format!("bad boolean {value:?}")))?,
                "journal.compact-after" => {
                    let n: u64 = value.parse().map_err(|_| bad(format!("bad record count {value:?}")))?;
                    cfg.compact_after = (n > 0).then_some(n);
                }
                _ => match key.strip_prefix("token.") {
                    Some(name) if !name.is_empty() => {
                        let ctx = parse_token(name, value).map_err(bad)?;
                        cfg.tokens.insert(name.to_owned(), ctx);
                    }
                    _ => return Err(bad(format!("unknown key {key:?}"))),
                },
            }
        }
        cfg.scan = ScanSchedule::new(interval).expect("interval checked");
        cfg.scan.enabled = enabled;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let cfg: Config = "".parse().unwrap();
        assert_eq!(cfg.port, 3880);
        assert_eq!(cfg.scan.interval(), Duration::from_secs(60));
        assert!(cfg.scan.enabled);
        assert!(cfg.authenticate(Some("nope")).role == Role::Anonymous);
    }

    #[test]
    fn full_file() {
        let cfg: Config = "# test\nport = 8080\ndata-dir=/tmp/q\nscan.interval=250ms\nscan.enabled=false\n\
                           token.root=admin:0:0\ntoken.al=user:1000:2000\n"
            .parse()
            .unwrap();
        assert_eq!(cfg.port, 8080);
        assert_eq!(cfg.data_dir.as_deref(), Some(Path::new("/tmp/q")));
        assert_eq!(cfg.scan.interval(), Duration::from_millis(250));
        assert!(!cfg.scan.enabled);
        let al = cfg.authenticate(Some("al"));
        assert_eq!((al.role, al.uid, al.gid), (Role::User, Some(1000), Some(2000)));
        assert!(cfg.authenticate(Some("root")).is_admin());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = "port=1\nscan.interval=0s\n".parse::<Config>().unwrap_err();
        assert!(err.to_string().starts_with("line 2:"), "{err}");
        assert!("bogus=1".parse::<Config>().is_err());
        assert!("token.x=root:0:0".parse::<Config>().is_err());
        assert!("token.x=user:0".parse::<Config>().is_err());
    }
}
