//! Domain types shared across ingestion, graph construction and analytics.
//!
//! Identifiers are opaque strings assigned at ingest. Display names are never
//! used as keys, so renaming (pseudonymization) cannot break references.

use std::borrow::Borrow;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("CVSS score {0} outside [0.0, 10.0]")]
    ScoreOutOfRange(f64),
    #[error("malformed CVE id {0:?} (expected CVE-<year>-<number>)")]
    MalformedCveId(String),
    #[error("unknown LGTM grade {0:?}")]
    UnknownGrade(String),
}

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

string_id!(
    /// Stable repository identifier.
    RepoId
);
string_id!(
    /// Stable module identifier, unique across the whole organization.
    ModuleId
);
string_id!(
    /// Library content digest; the merge key for libraries across repositories.
    Digest
);
string_id!(
    /// CVE identifier of the form `CVE-<year>-<number>`.
    CveId
);

impl CveId {
    /// Parses and checks the `CVE-YYYY-NNNN...` shape.
    pub fn parse(s: &str) -> Result<Self, ModelError> {
        if is_cve_id(s) {
            Ok(Self(s.to_owned()))
        } else {
            Err(ModelError::MalformedCveId(s.to_owned()))
        }
    }

    /// Year component, used for "oldest bug" style searches.
    pub fn year(&self) -> Option<u16> {
        self.0.get(4..8)?.parse().ok()
    }
}

impl std::str::FromStr for CveId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CveId::parse(s)
    }
}

fn is_cve_id(s: &str) -> bool {
    let mut parts = s.splitn(3, '-');
    let (Some(prefix), Some(year), Some(number)) = (parts.next(), parts.next(), parts.next()) else {
        return false;
    };
    prefix == "CVE"
        && year.len() == 4
        && year.bytes().all(|b| b.is_ascii_digit())
        && number.len() >= 4
        && number.bytes().all(|b| b.is_ascii_digit())
}

/// A CVSS base score held in tenths so bucket boundaries are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CvssScore(u8);

impl CvssScore {
    pub const MAX: CvssScore = CvssScore(100);

    /// Rounds to one decimal place. Values outside `[0.0, 10.0]` are rejected
    /// before rounding.
    pub fn from_f64(value: f64) -> Result<Self, ModelError> {
        if !value.is_finite() || !(0.0..=10.0).contains(&value) {
            return Err(ModelError::ScoreOutOfRange(value));
        }
        Ok(Self((value * 10.0).round() as u8))
    }

    pub fn from_tenths(tenths: u8) -> Result<Self, ModelError> {
        if tenths > 100 {
            return Err(ModelError::ScoreOutOfRange(f64::from(tenths) / 10.0));
        }
        Ok(Self(tenths))
    }

    pub fn tenths(self) -> u8 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 10.0
    }
}

impl fmt::Display for CvssScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.0 / 10, self.0 % 10)
    }
}

impl Serialize for CvssScore {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        // tenths / 10 always has a one-decimal shortest representation
        serializer.serialize_f64(self.value())
    }
}

impl<'de> Deserialize<'de> for CvssScore {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = f64::deserialize(deserializer)?;
        CvssScore::from_f64(raw).map_err(serde::de::Error::custom)
    }
}

/// Severity bucket. Ordered so that `Unscored < Low < ... < Critical`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Unscored,
    Low,
    Medium,
    High,
    Critical,
}

impl Severity {
    pub const ALL: [Severity; 5] = [
        Severity::Unscored,
        Severity::Low,
        Severity::Medium,
        Severity::High,
        Severity::Critical,
    ];

    /// Bucket for an already-validated score. Absent and 0.0 are `Unscored`.
    pub fn of(score: Option<CvssScore>) -> Severity {
        match score.map(CvssScore::tenths) {
            None | Some(0) => Severity::Unscored,
            Some(1..=39) => Severity::Low,
            Some(40..=69) => Severity::Medium,
            Some(70..=89) => Severity::High,
            Some(_) => Severity::Critical,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Unscored => "unscored",
            Severity::Low => "low",
            Severity::Medium => "medium",
            Severity::High => "high",
            Severity::Critical => "critical",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Classifies a raw score. Bucket membership is decided after rounding to one
/// decimal place.
pub fn classify_severity(score: Option<f64>) -> Result<Severity, ModelError> {
    let score = score.map(CvssScore::from_f64).transpose()?;
    Ok(Severity::of(score))
}

/// A display color such as `#8E0000`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ColorToken(pub String);

impl ColorToken {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// Severity palette. Defaults follow the NVD-style color ramp.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase")]
pub struct Palette {
    pub unscored: ColorToken,
    pub low: ColorToken,
    pub medium: ColorToken,
    pub high: ColorToken,
    pub critical: ColorToken,
}

impl Default for Palette {
    fn default() -> Self {
        Self {
            unscored: ColorToken("#B0B0B0".into()),
            low: ColorToken("#FFCB0D".into()),
            medium: ColorToken("#F9A009".into()),
            high: ColorToken("#DF3D03".into()),
            critical: ColorToken("#8E0000".into()),
        }
    }
}

impl Palette {
    pub fn color(&self, severity: Severity) -> &ColorToken {
        match severity {
            Severity::Unscored => &self.unscored,
            Severity::Low => &self.low,
            Severity::Medium => &self.medium,
            Severity::High => &self.high,
            Severity::Critical => &self.critical,
        }
    }
}

/// Color for `severity` under the default palette.
pub fn severity_color(severity: Severity) -> ColorToken {
    Palette::default().color(severity).clone()
}

/// Letter grade from a code-quality platform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Grade {
    APlus,
    A,
    B,
    C,
    D,
    E,
}

impl Grade {
    pub fn as_str(self) -> &'static str {
        match self {
            Grade::APlus => "A+",
            Grade::A => "A",
            Grade::B => "B",
            Grade::C => "C",
            Grade::D => "D",
            Grade::E => "E",
        }
    }

    pub fn parse(s: &str) -> Result<Self, ModelError> {
        Ok(match s {
            "A+" => Grade::APlus,
            "A" => Grade::A,
            "B" => Grade::B,
            "C" => Grade::C,
            "D" => Grade::D,
            "E" => Grade::E,
            other => return Err(ModelError::UnknownGrade(other.to_owned())),
        })
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Grade {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Grade {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Grade::parse(&raw).map_err(serde::de::Error::custom)
    }
}

/// External quality metadata. Every field is independently optional and an
/// absent field means "not available", never zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct QualityMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub github_issues: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub github_stars: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub github_watchers: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lgtm_grade: Option<Grade>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lgtm_score: Option<f64>,
}

impl QualityMeta {
    pub fn is_empty(&self) -> bool {
        *self == QualityMeta::default()
    }

    /// Fills every absent field from `other`, keeping present ones.
    pub fn fill_from(&mut self, other: &QualityMeta) {
        self.lgtm_grade = self.lgtm_grade.or(other.lgtm_grade);
        self.lgtm_score = self.lgtm_score.or(other.lgtm_score);
        self.github_issues = self.github_issues.or(other.github_issues);
        self.github_stars = self.github_stars.or(other.github_stars);
        self.github_watchers = self.github_watchers.or(other.github_watchers);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Repository {
    pub id: RepoId,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<QualityMeta>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Module {
    pub id: ModuleId,
    pub name: String,
    pub repository_id: RepoId,
    /// Absent for top-level modules.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_module_id: Option<ModuleId>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Coordinates {
    pub group: String,
    pub artifact: String,
    pub version: String,
}

impl fmt::Display for Coordinates {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.group.is_empty() {
            write!(f, "{}:{}", self.artifact, self.version)
        } else {
            write!(f, "{}:{}:{}", self.group, self.artifact, self.version)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Library {
    pub digest: Digest,
    pub coordinates: Coordinates,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<QualityMeta>,
}

impl Library {
    pub fn display_name(&self) -> String {
        self.coordinates.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Vulnerability {
    pub cve_id: CveId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cvss_score: Option<CvssScore>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cvss_vector: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

impl Vulnerability {
    pub fn severity(&self) -> Severity {
        Severity::of(self.cvss_score)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DependsEdge {
    pub module_id: ModuleId,
    pub library_digest: Digest,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AffectsEdge {
    pub library_digest: Digest,
    pub cve_id: CveId,
}

/// Kind of entity a table row refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Repository,
    Module,
    Library,
    Vulnerability,
}

impl EntityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Repository => "repository",
            EntityKind::Module => "module",
            EntityKind::Library => "library",
            EntityKind::Vulnerability => "vulnerability",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "repository" => EntityKind::Repository,
            "module" => EntityKind::Module,
            "library" => EntityKind::Library,
            "vulnerability" => EntityKind::Vulnerability,
            _ => return None,
        })
    }
}

/// Reference to any graph entity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EntityRef {
    Repository(RepoId),
    Module(ModuleId),
    Library(Digest),
    Vulnerability(CveId),
}

impl EntityRef {
    pub fn kind(&self) -> EntityKind {
        match self {
            EntityRef::Repository(_) => EntityKind::Repository,
            EntityRef::Module(_) => EntityKind::Module,
            EntityRef::Library(_) => EntityKind::Library,
            EntityRef::Vulnerability(_) => EntityKind::Vulnerability,
        }
    }

    pub fn id(&self) -> &str {
        match self {
            EntityRef::Repository(id) => id.as_str(),
            EntityRef::Module(id) => id.as_str(),
            EntityRef::Library(id) => id.as_str(),
            EntityRef::Vulnerability(id) => id.as_str(),
        }
    }

    pub fn new(kind: EntityKind, id: &str) -> Self {
        match kind {
            EntityKind::Repository => EntityRef::Repository(id.into()),
            EntityKind::Module => EntityRef::Module(id.into()),
            EntityKind::Library => EntityRef::Library(id.into()),
            EntityKind::Vulnerability => EntityRef::Vulnerability(id.into()),
        }
    }

    /// Parses the `kind:id` form produced by `Display`.
    pub fn parse(s: &str) -> Option<Self> {
        let (kind, id) = s.split_once(':')?;
        Some(EntityRef::new(EntityKind::parse(kind)?, id))
    }
}

impl fmt::Display for EntityRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind().as_str(), self.id())
    }
}

#[derive(Serialize, Deserialize)]
struct EntityRefRepr {
    id: String,
    kind: EntityKind,
}

impl Serialize for EntityRef {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        EntityRefRepr { id: self.id().to_owned(), kind: self.kind() }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for EntityRef {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = EntityRefRepr::deserialize(deserializer)?;
        Ok(EntityRef::new(repr.kind, &repr.id))
    }
}
