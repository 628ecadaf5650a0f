//! Caller identity.

use alloc::string::String;

/// Privilege level of a caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    /// No credentials presented.
    Anonymous,
    /// Authenticated, may read quotas and use the namespace.
    User,
    /// May change quota limits and trigger scans.
    Admin,
}

/// Who is making a request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthContext {
    /// Principal name.
    pub subject: String,
    /// Mapped user id, absent for anonymous callers.
    pub uid: Option<u32>,
    /// Mapped group id, absent for anonymous callers.
    pub gid: Option<u32>,
    /// Privilege level.
    pub role: Role,
}

impl AuthContext {
    /// An unauthenticated caller.
    pub fn anonymous() -> Self {
        Self { subject: String::from("anonymous"), uid: None, gid: None, role: Role::Anonymous }
    }

    /// An authenticated caller with the given role. `Role::Anonymous` drops the ids.
    pub fn new(subject: impl Into<String>, role: Role, uid: u32, gid: u32) -> Self {
        if role == Role::Anonymous {
            return Self { subject: subject.into(), ..Self::anonymous() };
        }
        Self { subject: subject.into(), uid: Some(uid), gid: Some(gid), role }
    }

    /// Shorthand for a `Role::User` caller.
    pub fn user(subject: impl Into<String>, uid: u32, gid: u32) -> Self {
        Self::new(subject, Role::User, uid, gid)
    }

    /// Shorthand for a `Role::Admin` caller.
    pub fn admin(subject: impl Into<String>, uid: u32, gid: u32) -> Self {
        Self::new(subject, Role::Admin, uid, gid)
    }

    /// True for `User` and `Admin`.
    pub fn is_authenticated(&self) -> bool {
        self.role != Role::Anonymous
    }

    /// True for `Admin` only.
    pub fn is_admin(&self) -> bool {
        self.role == Role::Admin
    }
}
