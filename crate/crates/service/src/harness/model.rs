//! Brute-force reference for scenario outcomes.
//!
//! Files live in a flat path map. Usage is recomputed from scratch at every
//! scan and frozen until the next one; between scans only limits move.

use std::collections::{BTreeMap, HashMap};

use quota_core::{QuotaKey, RetentionPolicy, ScopeKind};

use super::scenario::{Action, Outcome};

#[derive(Debug, Clone)]
struct ModelFile {
    uid: u32,
    gid: u32,
    policy: RetentionPolicy,
    size: u64,
}

#[derive(Debug, Clone)]
pub struct Model {
    /// Directory path ("" is the root) to its default policy.
    dirs: BTreeMap<String, RetentionPolicy>,
    files: BTreeMap<String, ModelFile>,
    limits: HashMap<QuotaKey, HashMap<RetentionPolicy, Option<u64>>>,
    frozen: HashMap<(QuotaKey, RetentionPolicy), u64>,
}

impl Default for Model {
    fn default() -> Self {
        let mut dirs = BTreeMap::new();
        dirs.insert(String::new(), RetentionPolicy::Replica);
        Self { dirs, files: BTreeMap::new(), limits: HashMap::new(), frozen: HashMap::new() }
    }
}

/// Splits "/a/b" into ("/a", "b"); the root parent is "".
fn split(path: &str) -> Option<(String, String)> {
    let body = path.strip_prefix('/')?;
    let parts: Vec<&str> = body.split('/').collect();
    if parts.iter().any(|p| p.is_empty() || *p == "." || *p == "..") {
        return None;
    }
    let (name, parents) = parts.split_last()?;
    let parent = parents.iter().map(|p| format!("/{p}")).collect::<String>();
    Some((parent, name.to_string()))
}

impl Model {
    fn exists(&self, path: &str) -> bool {
        self.files.contains_key(path) || self.dirs.contains_key(path)
    }

    fn over(&self, key: QuotaKey, policy: RetentionPolicy) -> bool {
        let limit = self.limits.get(&key).and_then(|l| l.get(&policy).copied().flatten());
        let used = self.frozen.get(&(key, policy)).copied().unwrap_or(0);
        matches!(limit, Some(l) if used >= l)
    }

    fn allowed(&self, uid: u32, gid: u32, policy: RetentionPolicy) -> bool {
        let user = self.over(QuotaKey { kind: ScopeKind::User, id: uid }, policy);
        let group = self.over(QuotaKey { kind: ScopeKind::Group, id: gid }, policy);
        !(user || group)
    }

    pub fn step(&mut self, action: &Action) -> Outcome {
        match action {
            Action::Mkdir { path, policy, .. } => {
                let Some((parent, _)) = split(path) else { return Outcome::Error };
                let Some(&inherited) = self.dirs.get(&parent) else { return Outcome::Error };
                if self.exists(path) {
                    return Outcome::Error;
                }
                self.dirs.insert(path.clone(), policy.unwrap_or(inherited));
                Outcome::Ok
            }
            Action::Create { path, uid, gid, policy, size } => {
                let Some((parent, _)) = split(path) else { return Outcome::Error };
                let Some(&inherited) = self.dirs.get(&parent) else { return Outcome::Error };
                if self.exists(path) {
                    return Outcome::Error;
                }
                let policy = policy.unwrap_or(inherited);
                if !self.allowed(*uid, *gid, policy) {
                    return Outcome::Denied;
                }
                self.files.insert(path.clone(), ModelFile { uid: *uid, gid: *gid, policy, size: size.unwrap_or(0) });
                Outcome::Allowed
            }
            Action::Commit { path, size } => match self.files.get_mut(path) {
                Some(f) => {
                    f.size = *size;
                    Outcome::Ok
                }
                None => Outcome::Error,
            },
            Action::Remove { path } => {
                if self.files.remove(path).is_some() {
                    return Outcome::Ok;
                }
                if path.is_empty() || path == "/" || !self.dirs.contains_key(path) {
                    return Outcome::Error;
                }
                let prefix = format!("{path}/");
                let has_children = self.files.keys().chain(self.dirs.keys()).any(|k| k.starts_with(&prefix));
                if has_children {
                    return Outcome::Error;
                }
                self.dirs.remove(path);
                Outcome::Ok
            }
            Action::Scan => {
                self.frozen.clear();
                for f in self.files.values() {
                    *self.frozen.entry((QuotaKey::user(f.uid), f.policy)).or_default() += f.size;
                    *self.frozen.entry((QuotaKey::group(f.gid), f.policy)).or_default() += f.size;
                }
                Outcome::Ok
            }
            Action::SetLimit { key, limits } => {
                let entry = self.limits.entry(*key).or_default();
                for (p, v) in limits {
                    entry.insert(*p, *v);
                }
                Outcome::Ok
            }
            Action::UnsetLimit { key } => {
                if self.limits.remove(key).is_some() { Outcome::Ok } else { Outcome::Error }
            }
            Action::Check { uid, gid, policy } => {
                if self.allowed(*uid, *gid, *policy) { Outcome::Allowed } else { Outcome::Denied }
            }
        }
    }
}

/// Outcomes the model predicts for a sequence of actions.
pub fn predict<'a>(actions: impl IntoIterator<Item = &'a Action>) -> Vec<Outcome> {
    let mut model = Model::default();
    actions.into_iter().map(|a| model.step(a)).collect()
}
