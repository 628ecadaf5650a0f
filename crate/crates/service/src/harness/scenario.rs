//! Line-oriented scenario files.
//!
//! ```text
//! # lag: writes go through until a scan catches up
//! seed 1
//! set-limit user 1000 custodial=10
//! create /a uid=1000 gid=2000 policy=custodial size=12 => allowed
//! scan
//! check uid=1000 gid=2000 policy=custodial => denied
//! ```
//!
//! Each line is one action, optionally followed by `=> allowed|denied|ok|error`.

use std::fmt;
use std::str::FromStr;

use quota_core::{QuotaKey, RetentionPolicy, ScopeKind};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Result of one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    /// A create or check the quota let through.
    Allowed,
    /// A create or check refused with "Quota exceeded".
    Denied,
    /// Any other action that succeeded.
    Ok,
    /// Any action that failed for a reason other than quota.
    Error,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Allowed => "allowed",
            Outcome::Denied => "denied",
            Outcome::Ok => "ok",
            Outcome::Error => "error",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "allowed" => Ok(Outcome::Allowed),
            "denied" => Ok(Outcome::Denied),
            "ok" => Ok(Outcome::Ok),
            "error" => Ok(Outcome::Error),
            other => Err(format!("unknown outcome {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Mkdir { path: String, uid: u32, gid: u32, policy: Option<RetentionPolicy> },
    Create { path: String, uid: u32, gid: u32, policy: Option<RetentionPolicy>, size: Option<u64> },
    Commit { path: String, size: u64 },
    Remove { path: String },
    Scan,
    /// Sets the listed policies' limits, creating the quota if needed.
    SetLimit { key: QuotaKey, limits: Vec<(RetentionPolicy, Option<u64>)> },
    UnsetLimit { key: QuotaKey },
    Check { uid: u32, gid: u32, policy: RetentionPolicy },
}

fn policy_name(p: RetentionPolicy) -> String {
    p.as_str().to_ascii_lowercase()
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Mkdir { path, uid, gid, policy } => {
                write!(f, "mkdir {path} uid={uid} gid={gid}")?;
                if let Some(p) = policy {
                    write!(f, " policy={}", policy_name(*p))?;
                }
                Ok(())
            }
            Action::Create { path, uid, gid, policy, size } => {
                write!(f, "create {path} uid={uid} gid={gid}")?;
                if let Some(p) = policy {
                    write!(f, " policy={}", policy_name(*p))?;
                }
                if let Some(s) = size {
                    write!(f, " size={s}")?;
                }
                Ok(())
            }
            Action::Commit { path, size } => write!(f, "commit {path} size={size}"),
            Action::Remove { path } => write!(f, "remove {path}"),
            Action::Scan => f.write_str("scan"),
            Action::SetLimit { key, limits } => {
                write!(f, "set-limit {} {}", key.kind, key.id)?;
                for (p, v) in limits {
                    match v {
                        Some(v) => write!(f, " {}={v}", policy_name(*p))?,
                        None => write!(f, " {}=none", policy_name(*p))?,
                    }
                }
                Ok(())
            }
            Action::UnsetLimit { key } => write!(f, "unset-limit {} {}", key.kind, key.id),
            Action::Check { uid, gid, policy } => write!(f, "check uid={uid} gid={gid} policy={}", policy_name(*policy)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    /// 1-based source line, 0 for generated steps.
    pub line: usize,
    pub action: Action,
    pub expect: Option<Outcome>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Scenario {
    pub seed: u64,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

/// `key=value` arguments after the positional ones.
struct Args<'a> {
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> Args<'a> {
    fn new(tokens: &[&'a str]) -> Result<Self, String> {
        let pairs = tokens
            .iter()
            .map(|t| t.split_once('=').ok_or_else(|| format!("expected key=value, got {t:?}")))
            .collect::<Result<_, _>>()?;
        Ok(Self { pairs })
    }

    fn take(&mut self, key: &str) -> Option<&'a str> {
        let pos = self.pairs.iter().position(|(k, _)| *k == key)?;
        Some(self.pairs.remove(pos).1)
    }

    fn num<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, String> {
        self.take(key).map(|v| v.parse().map_err(|_| format!("{key}: bad number {v:?}"))).transpose()
    }

    fn required<T: FromStr>(&mut self, key: &str) -> Result<T, String> {
        self.num(key)?.ok_or_else(|| format!("missing {key}="))
    }

    fn policy(&mut self) -> Result<Option<RetentionPolicy>, String> {
        self.take("policy").map(|v| v.parse().map_err(|e: quota_core::ParsePolicyError| e.to_string())).transpose()
    }

    fn finish(self) -> Result<(), String> {
        match self.pairs.first() {
            Some((k, _)) => Err(format!("unexpected argument {k:?}")),
            None => Ok(()),
        }
    }
}

fn parse_key(kind: Option<&&str>, id: Option<&&str>) -> Result<QuotaKey, String> {
    let kind = match kind.copied() {
        Some("user") => ScopeKind::User,
        Some("group") => ScopeKind::Group,
        _ => return Err("expected user or group".into()),
    };
    let id = id.ok_or("missing id")?.parse().map_err(|_| "bad id".to_string())?;
    Ok(QuotaKey { kind, id })
}

fn parse_action(tokens: &[&str]) -> Result<Action, String> {
    let (&verb, rest) = tokens.split_first().ok_or("empty action")?;
    let path = || rest.first().map(|p| p.to_string()).ok_or_else(|| format!("{verb}: missing path"));
    let action = match verb {
        "mkdir" => {
            let mut a = Args::new(&rest[1.min(rest.len())..])?;
            let act = Action::Mkdir { path: path()?, uid: a.required("uid")?, gid: a.required("gid")?, policy: a.policy()? };
            a.finish()?;
            act
        }
        "create" => {
            let mut a = Args::new(&rest[1.min(rest.len())..])?;
            let act = Action::Create {
                path: path()?,
                uid: a.required("uid")?,
                gid: a.required("gid")?,
                policy: a.policy()?,
                size: a.num("size")?,
            };
            a.finish()?;
            act
        }
        "commit" => {
            let mut a = Args::new(&rest[1.min(rest.len())..])?;
            let act = Action::Commit { path: path()?, size: a.required("size")? };
            a.finish()?;
            act
        }
        "remove" => {
            if rest.len() != 1 {
                return Err("remove takes one path".into());
            }
            Action::Remove { path: path()? }
        }
        "scan" => {
            if !rest.is_empty() {
                return Err("scan takes no arguments".into());
            }
            Action::Scan
        }
        "set-limit" => {
            let key = parse_key(rest.first(), rest.get(1))?;
            let mut limits = Vec::new();
            for t in rest.iter().skip(2) {
                let (p, v) = t.split_once('=').ok_or_else(|| format!("expected policy=bytes, got {t:?}"))?;
                let p: RetentionPolicy = p.parse().map_err(|e: quota_core::ParsePolicyError| e.to_string())?;
                let v = if v == "none" { None } else { Some(v.parse().map_err(|_| format!("bad limit {v:?}"))?) };
                limits.push((p, v));
            }
            Action::SetLimit { key, limits }
        }
        "unset-limit" => {
            if rest.len() != 2 {
                return Err("unset-limit takes a kind and an id".into());
            }
            Action::UnsetLimit { key: parse_key(rest.first(), rest.get(1))? }
        }
        "check" => {
            let mut a = Args::new(rest)?;
            let act = Action::Check {
                uid: a.required("uid")?,
                gid: a.required("gid")?,
                policy: a.policy()?.ok_or("missing policy=")?,
            };
            a.finish()?;
            act
        }
        other => return Err(format!("unknown action {other:?}")),
    };
    Ok(action)
}

impl FromStr for Scenario {
    type Err = ParseError;

    fn from_str(text: &str) -> Result<Self, ParseError> {
        let mut scenario = Scenario::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let err = |message: String| ParseError { line, message };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (action_text, expect) = match content.split_once("=>") {
                Some((a, e)) => (a.trim(), Some(e.trim().parse::<Outcome>().map_err(err)?)),
                None => (content, None),
            };
            let tokens: Vec<&str> = action_text.split_whitespace().collect();
            if tokens.first() == Some(&"seed") {
                if tokens.len() != 2 || expect.is_some() || !scenario.steps.is_empty() {
                    return Err(err("seed must come first as `seed <n>`".into()));
                }
                scenario.seed = tokens[1].parse().map_err(|_| err(format!("bad seed {:?}", tokens[1])))?;
                continue;
            }
            let action = parse_action(&tokens).map_err(err)?;
            scenario.steps.push(Step { line, action, expect });
        }
        Ok(scenario)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "seed {}", self.seed)?;
        for step in &self.steps {
            match step.expect {
                Some(e) => writeln!(f, "{} => {e}", step.action)?,
                None => writeln!(f, "{}", step.action)?,
            }
        }
        Ok(())
    }
}

impl Scenario {
    /// A seeded random workload over a few users, groups and directories.
    ///
    /// Steps carry no expectations; the same seed always yields the same steps.
    pub fn random(seed: u64, len: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dirs: Vec<String> = vec![String::new()];
        let mut paths: Vec<String> = Vec::new();
        let mut steps = Vec::with_capacity(len);
        let policy = |rng: &mut ChaCha8Rng| RetentionPolicy::ALL[rng.random_range(0..3)];
        let key = |rng: &mut ChaCha8Rng| {
            if rng.random_bool(0.6) { QuotaKey::user(rng.random_range(1..=4)) } else { QuotaKey::group(rng.random_range(1..=2)) }
        };
        for _ in 0..len {
            let action = match rng.random_range(0..100) {
                0..=4 => {
                    let path = format!("{}/d{}", dirs.choose(&mut rng).unwrap(), dirs.len());
                    dirs.push(path.clone());
                    let p = rng.random_bool(0.5).then(|| policy(&mut rng));
                    Action::Mkdir { path, uid: 0, gid: 0, policy: p }
                }
                5..=39 => {
                    let path = if !paths.is_empty() && rng.random_bool(0.05) {
                        paths.choose(&mut rng).unwrap().clone()
                    } else {
                        let p = format!("{}/f{}", dirs.choose(&mut rng).unwrap(), paths.len());
                        paths.push(p.clone());
                        p
                    };
                    Action::Create {
                        path,
                        uid: rng.random_range(1..=4),
                        gid: rng.random_range(1..=2),
                        policy: rng.random_bool(0.7).then(|| policy(&mut rng)),
                        size: rng.random_bool(0.8).then(|| rng.random_range(0..=100)),
                    }
                }
                40..=49 if !paths.is_empty() => {
                    Action::Commit { path: paths.choose(&mut rng).unwrap().clone(), size: rng.random_range(0..=100) }
                }
                50..=61 if !paths.is_empty() => {
                    let pool = if rng.random_bool(0.1) { &dirs[1.min(dirs.len() - 1)..] } else { &paths[..] };
                    match pool.choose(&mut rng) {
                        Some(p) if !p.is_empty() => Action::Remove { path: p.clone() },
                        _ => Action::Scan,
                    }
                }
                62..=71 => Action::Scan,
                72..=81 => {
                    let n = rng.random_range(1..=3);
                    let limits = (0..n)
                        .map(|_| (policy(&mut rng), rng.random_bool(0.85).then(|| rng.random_range(0..=300))))
                        .collect();
                    Action::SetLimit { key: key(&mut rng), limits }
                }
                82..=85 => Action::UnsetLimit { key: key(&mut rng) },
                _ => Action::Check { uid: rng.random_range(1..=4), gid: rng.random_range(1..=2), policy: policy(&mut rng) },
            };
            steps.push(Step { line: 0, action, expect: None });
        }
        Scenario { seed, steps }
    }
}
