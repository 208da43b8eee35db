//! Event taxonomy: categories, intent groups, views and the registry of
//! known event types, plus validation of individual events against it.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Event that marks use of the user's own data.
pub const UPLOAD_OWN_DATA: &str = "upload_own_data";
/// Event that marks a successfully created network.
pub const CREATE_NETWORK_SUCCESS: &str = "create_network_success";

/// Milliseconds since the Unix epoch, UTC.
pub type TimestampMs = i64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RegistryError {
    #[error("event type `{0}` is already registered")]
    DuplicateName(String),
    #[error("invalid event type `{name}`: {reason}")]
    InvalidDefinition { name: String, reason: String },
    #[error("cannot read registry file {path}: {reason}")]
    Config { path: String, reason: String },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ValidationError {
    #[error("unknown event name `{0}`")]
    UnknownEventName(String),
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("timestamp must be positive, got {0}")]
    NonPositiveTimestamp(i64),
}

macro_rules! token_enum {
    (
        $(#[$meta:meta])*
        $name:ident { $($variant:ident => $token:literal),+ $(,)? }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $token)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn token(self) -> &'static str {
                match self {
                    $($name::$variant => $token),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.token())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($token => Ok($name::$variant),)+
                    other => Err(format!(concat!("unknown ", stringify!($name), " `{}`"), other)),
                }
            }
        }
    };
}

token_enum! {
    /// The seven top-level groups every event type belongs to.
    EventCategory {
        DataManagement => "data_management",
        VisualizationInteraction => "visualization_interaction",
        SupportHelp => "support_help",
        Communication => "communication",
        Bookmark => "bookmark",
        ErrorTracking => "error_tracking",
        ActivityLogs => "activity_logs",
    }
}

token_enum! {
    /// User intent behind a visualization interaction.
    IntentGroup {
        DataFiltering => "data_filtering",
        RepresentationChange => "representation_change",
        None => "none",
    }
}

token_enum! {
    /// The five visualization views of the tool, plus `NoView` for
    /// view-independent activity.
    ViewKind {
        NodeLink => "nodelink",
        Matrix => "matrix",
        Timeline => "timeline",
        Map => "map",
        Coordinated => "coordinated",
        NoView => "none",
    }
}

token_enum! {
    HelpResourceKind {
        Examples => "examples",
        Tutorials => "tutorials",
        Videos => "videos",
        Demos => "demos",
        DataFormatting => "data_formatting",
    }
}

impl ViewKind {
    /// The five real views, in dashboard column order.
    pub const TOOL_VIEWS: [ViewKind; 5] = [
        ViewKind::NodeLink,
        ViewKind::Matrix,
        ViewKind::Timeline,
        ViewKind::Map,
        ViewKind::Coordinated,
    ];

    /// Name of the event that switches the current view to `self`.
    pub fn open_event_name(self) -> Option<String> {
        match self {
            ViewKind::NoView => None,
            v => Some(format!("open_{}", v.token())),
        }
    }
}

/// One registered event type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventTypeDef {
    pub name: String,
    pub category: EventCategory,
    #[serde(default = "default_intent")]
    pub intent_group: IntentGroup,
    #[serde(default)]
    pub views: BTreeSet<ViewKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub help_kind: Option<HelpResourceKind>,
}

fn default_intent() -> IntentGroup {
    IntentGroup::None
}

impl EventTypeDef {
    pub fn new(name: impl Into<String>, category: EventCategory) -> Self {
        Self {
            name: name.into(),
            category,
            intent_group: IntentGroup::None,
            views: BTreeSet::new(),
            help_kind: None,
        }
    }

    pub fn intent(mut self, intent: IntentGroup) -> Self {
        self.intent_group = intent;
        self
    }

    pub fn views(mut self, views: impl IntoIterator<Item = ViewKind>) -> Self {
        self.views = views.into_iter().collect();
        self
    }

    pub fn help(mut self, kind: HelpResourceKind) -> Self {
        self.help_kind = Some(kind);
        self
    }

    fn check(&self) -> Result<(), RegistryError> {
        let invalid = |reason: &str| RegistryError::InvalidDefinition {
            name: self.name.clone(),
            reason: reason.to_string(),
        };
        let well_formed = !self.name.is_empty()
            && self
                .name
                .bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_');
        if !well_formed {
            return Err(invalid("name must be a non-empty lowercase token [a-z0-9_]"));
        }
        if self.intent_group != IntentGroup::None
            && self.category != EventCategory::VisualizationInteraction
        {
            return Err(invalid("only visualization interactions carry an intent group"));
        }
        if self.help_kind.is_some() && self.category != EventCategory::SupportHelp {
            return Err(invalid("only support/help events carry a help resource kind"));
        }
        Ok(())
    }
}

/// Index of a definition inside its registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventTypeId(pub usize);

/// Insertion-ordered registry of event types. Immutable once shared.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventRegistry {
    defs: Vec<EventTypeDef>,
    index: HashMap<String, usize>,
}

impl EventRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, def: EventTypeDef) -> Result<EventTypeId, RegistryError> {
        def.check()?;
        if self.index.contains_key(&def.name) {
            return Err(RegistryError::DuplicateName(def.name));
        }
        let id = self.defs.len();
        self.index.insert(def.name.clone(), id);
        self.defs.push(def);
        Ok(EventTypeId(id))
    }

    pub fn get(&self, name: &str) -> Option<&EventTypeDef> {
        self.index.get(name).map(|&i| &self.defs[i])
    }

    pub fn by_id(&self, id: EventTypeId) -> &EventTypeDef {
        &self.defs[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = &EventTypeDef> {
        self.defs.iter()
    }

    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    pub fn from_defs(defs: impl IntoIterator<Item = EventTypeDef>) -> Result<Self, RegistryError> {
        let mut reg = Self::new();
        for def in defs {
            reg.register(def)?;
        }
        Ok(reg)
    }

    pub fn intent_group_of(&self, name: &str) -> Result<IntentGroup, ValidationError> {
        self.get(name)
            .map(|d| d.intent_group)
            .ok_or_else(|| ValidationError::UnknownEventName(name.to_string()))
    }

    pub fn help_kind_of(&self, name: &str) -> Option<HelpResourceKind> {
        self.get(name).and_then(|d| d.help_kind)
    }

    /// The view an event switches to, if it is one of the `open_<view>` markers.
    pub fn view_marker(&self, name: &str) -> Option<ViewKind> {
        let token = name.strip_prefix("open_")?;
        let view = ViewKind::from_str(token).ok()?;
        (view != ViewKind::NoView && self.index.contains_key(name)).then_some(view)
    }

    /// Categories that have at least one registered event type.
    pub fn category_counts(&self) -> BTreeMap<EventCategory, usize> {
        let mut counts = BTreeMap::new();
        for def in &self.defs {
            *counts.entry(def.category).or_insert(0) += 1;
        }
        counts
    }

    /// Turns a candidate record into a normalized [`Event`].
    pub fn validate_event(&self, raw: &RawEvent) -> Result<Event, ValidationError> {
        let session_id = raw
            .session_id
            .as_deref()
            .ok_or(ValidationError::MissingField("session_id"))?;
        let ip_hash = raw
            .ip_hash
            .as_deref()
            .ok_or(ValidationError::MissingField("ip_hash"))?;
        let timestamp = raw
            .timestamp
            .ok_or(ValidationError::MissingField("timestamp"))?;
        let name = raw.name.as_deref().ok_or(ValidationError::MissingField("name"))?;
        if timestamp <= 0 {
            return Err(ValidationError::NonPositiveTimestamp(timestamp));
        }
        let def = self
            .get(name)
            .ok_or_else(|| ValidationError::UnknownEventName(name.to_string()))?;
        let view = raw.view.unwrap_or_else(|| match def.views.len() {
            1 => *def.views.iter().next().expect("len checked"),
            _ => ViewKind::NoView,
        });
        Ok(Event {
            session_id: session_id.to_string(),
            ip_hash: ip_hash.to_string(),
            timestamp,
            name: def.name.clone(),
            category: def.category,
            view,
            payload: raw.payload.clone(),
        })
    }

    /// The registry shipped with the engine.
    pub fn builtin() -> Self {
        Self::from_defs(builtin_defs()).expect("builtin registry is valid")
    }

    /// Loads a registry config document.
    ///
    /// The document is either a JSON array of definitions (a complete
    /// registry) or an object `{"include_builtin": bool, "events": [...]}`
    /// whose events extend the builtin set.
    pub fn from_config_str(text: &str) -> Result<Self, RegistryError> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Config {
            Full(Vec<EventTypeDef>),
            Extend {
                #[serde(default)]
                include_builtin: bool,
                events: Vec<EventTypeDef>,
            },
        }
        let parsed: Config = serde_json::from_str(text).map_err(|e| RegistryError::Config {
            path: "<inline>".into(),
            reason: e.to_string(),
        })?;
        match parsed {
            Config::Full(defs) => Self::from_defs(defs),
            Config::Extend { include_builtin, events } => {
                let mut reg = if include_builtin { Self::builtin() } else { Self::new() };
                for def in events {
                    reg.register(def)?;
                }
                Ok(reg)
            }
        }
    }

    pub fn from_config_file(path: &Path) -> Result<Self, RegistryError> {
        let text = std::fs::read_to_string(path).map_err(|e| RegistryError::Config {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_config_str(&text).map_err(|e| match e {
            RegistryError::Config { reason, .. } => RegistryError::Config {
                path: path.display().to_string(),
                reason,
            },
            other => other,
        })
    }

    pub fn to_defs(&self) -> Vec<EventTypeDef> {
        self.defs.clone()
    }
}

impl Serialize for EventRegistry {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.defs.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for EventRegistry {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let defs = Vec::<EventTypeDef>::deserialize(deserializer)?;
        Self::from_defs(defs).map_err(serde::de::Error::custom)
    }
}

fn builtin_defs() -> Vec<EventTypeDef> {
    use EventCategory::*;
    use HelpResourceKind as H;
    use IntentGroup::*;
    use ViewKind::*;

    let all_views = ViewKind::TOOL_VIEWS;
    let mut defs = vec![
        EventTypeDef::new("upload_own_data", DataManagement),
        EventTypeDef::new("load_demo_data", DataManagement),
        EventTypeDef::new("create_network_attempt", DataManagement),
        EventTypeDef::new("create_network_success", DataManagement),
        EventTypeDef::new("create_network_failure", DataManagement),
        EventTypeDef::new("delete_network", DataManagement),
        EventTypeDef::new("download_network", DataManagement),
    ];
    for view in ViewKind::TOOL_VIEWS {
        let name = view.open_event_name().expect("tool view");
        defs.push(EventTypeDef::new(name, VisualizationInteraction).views([view]));
    }
    defs.extend([
        EventTypeDef::new("time_slider", VisualizationInteraction)
            .intent(DataFiltering)
            .views(all_views),
        EventTypeDef::new("filter_node_type", VisualizationInteraction)
            .intent(DataFiltering)
            .views(all_views),
        EventTypeDef::new("filter_link_type", VisualizationInteraction)
            .intent(DataFiltering)
            .views(all_views),
        EventTypeDef::new("filter_link_weight", VisualizationInteraction)
            .intent(DataFiltering)
            .views(all_views),
        EventTypeDef::new("matrix_reorder", VisualizationInteraction)
            .intent(RepresentationChange)
            .views([Matrix, Coordinated]),
        EventTypeDef::new("change_encoding", VisualizationInteraction)
            .intent(RepresentationChange)
            .views(all_views),
        EventTypeDef::new("change_layout", VisualizationInteraction)
            .intent(RepresentationChange)
            .views([NodeLink, Coordinated]),
        EventTypeDef::new("hover_node", VisualizationInteraction).views(all_views),
        EventTypeDef::new("select_node", VisualizationInteraction).views(all_views),
        EventTypeDef::new("pan_zoom", VisualizationInteraction).views([NodeLink, Matrix, Map, Coordinated]),
        EventTypeDef::new("search_label", VisualizationInteraction).views(all_views),
        EventTypeDef::new("help_examples", SupportHelp).help(H::Examples),
        EventTypeDef::new("help_tutorial", SupportHelp).help(H::Tutorials),
        EventTypeDef::new("help_video", SupportHelp).help(H::Videos),
        EventTypeDef::new("help_demo", SupportHelp).help(H::Demos),
        EventTypeDef::new("help_data_formatting", SupportHelp).help(H::DataFormatting),
        EventTypeDef::new("contact_team", Communication),
        EventTypeDef::new("join_mailing_list", Communication),
        EventTypeDef::new("bookmark_create", Bookmark),
        EventTypeDef::new("bookmark_annotate", Bookmark),
        EventTypeDef::new("bookmark_restore", Bookmark),
        EventTypeDef::new("error_report", ErrorTracking),
        EventTypeDef::new("feedback_submit", ActivityLogs),
        EventTypeDef::new("share_link", ActivityLogs),
    ]);
    defs
}

/// A candidate event before validation; every field may be missing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawEvent {
    pub session_id: Option<String>,
    pub ip_hash: Option<String>,
    pub timestamp: Option<TimestampMs>,
    pub name: Option<String>,
    pub view: Option<ViewKind>,
    pub payload: BTreeMap<String, String>,
}

/// A validated interaction event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub session_id: String,
    pub ip_hash: String,
    pub timestamp: TimestampMs,
    pub name: String,
    pub category: EventCategory,
    pub view: ViewKind,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub payload: BTreeMap<String, String>,
}
