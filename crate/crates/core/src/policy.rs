//! Retention Policy and Access Latency classes.
//!
//! Retention policy is the accounting dimension of every quota. Access
//! latency is carried on entries but never keys usage.

use core::fmt;
use core::str::FromStr;

/// Durability class of a file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "UPPERCASE"))]
pub enum RetentionPolicy {
    /// Disk-only replicas.
    #[cfg_attr(feature = "serde", serde(alias = "replica"))]
    Replica,
    /// At least one replica on tape.
    #[cfg_attr(feature = "serde", serde(alias = "custodial"))]
    Custodial,
    /// Intermediate output.
    #[cfg_attr(feature = "serde", serde(alias = "output"))]
    Output,
}

impl RetentionPolicy {
    /// Every policy, in display order.
    pub const ALL: [RetentionPolicy; 3] = [Self::Custodial, Self::Replica, Self::Output];

    /// Canonical upper-case name.
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Replica => "REPLICA",
            Self::Custodial => "CUSTODIAL",
            Self::Output => "OUTPUT",
        }
    }
}

impl fmt::Display for RetentionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Availability class of a file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "UPPERCASE"))]
pub enum AccessLatency {
    /// Always on disk.
    #[cfg_attr(feature = "serde", serde(alias = "online"))]
    Online,
    /// May need a tape recall.
    #[cfg_attr(feature = "serde", serde(alias = "nearline"))]
    Nearline,
}

impl AccessLatency {
    /// Canonical upper-case name.
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Online => "ONLINE",
            Self::Nearline => "NEARLINE",
        }
    }
}

impl fmt::Display for AccessLatency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Unrecognised policy or latency name.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {what}: {value}")]
pub struct ParsePolicyError {
    what: &'static str,
    value: alloc::string::String,
}

impl FromStr for RetentionPolicy {
    type Err = ParsePolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("replica") {
            Ok(Self::Replica)
        } else if s.eq_ignore_ascii_case("custodial") {
            Ok(Self::Custodial)
        } else if s.eq_ignore_ascii_case("output") {
            Ok(Self::Output)
        } else {
            Err(ParsePolicyError { what: "retention policy", value: s.into() })
        }
    }
}

impl FromStr for AccessLatency {
    type Err = ParsePolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("online") {
            Ok(Self::Online)
        } else if s.eq_ignore_ascii_case("nearline") {
            Ok(Self::Nearline)
        } else {
            Err(ParsePolicyError { what: "access latency", value: s.into() })
        }
    }
}
