//! Four-way user typing from own-data use, network creation and returns.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::event_model::{CREATE_NETWORK_SUCCESS, UPLOAD_OWN_DATA};
use crate::sessionizer::{Corpus, UserRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum UserType {
    #[serde(rename = "Demo")]
    DemoUser,
    #[serde(rename = "Data_Struggler")]
    DataStruggler,
    #[serde(rename = "SS_Explorer")]
    SingleSessionExplorer,
    #[serde(rename = "MS_Explorer")]
    MultiSessionExplorer,
}

impl UserType {
    pub const ALL: [UserType; 4] = [
        UserType::DemoUser,
        UserType::DataStruggler,
        UserType::SingleSessionExplorer,
        UserType::MultiSessionExplorer,
    ];

    pub fn token(self) -> &'static str {
        match self {
            UserType::DemoUser => "Demo",
            UserType::DataStruggler => "Data_Struggler",
            UserType::SingleSessionExplorer => "SS_Explorer",
            UserType::MultiSessionExplorer => "MS_Explorer",
        }
    }
}

impl fmt::Display for UserType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for UserType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        UserType::ALL
            .into_iter()
            .find(|t| t.token() == s)
            .ok_or_else(|| format!("unknown user type `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserSignals {
    pub used_own_data: bool,
    pub created_network: bool,
    pub visit_count: usize,
    pub networks_created: usize,
}

pub fn extract_signals(user: &UserRecord) -> UserSignals {
    let used_own_data = user.events.iter().any(|e| e.name == UPLOAD_OWN_DATA);
    let networks_created = user.events.iter().filter(|e| e.name == CREATE_NETWORK_SUCCESS).count();
    UserSignals {
        used_own_data,
        created_network: networks_created > 0,
        visit_count: user.visits.len(),
        networks_created,
    }
}

/// Own-data criteria take precedence over the returning criterion.
pub fn classify_user(signals: &UserSignals) -> UserType {
    match (signals.used_own_data, signals.created_network, signals.visit_count) {
        (false, _, _) => UserType::DemoUser,
        (true, false, _) => UserType::DataStruggler,
        (true, true, n) if n <= 1 => UserType::SingleSessionExplorer,
        (true, true, _) => UserType::MultiSessionExplorer,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub types: BTreeMap<String, UserType>,
    pub signals: BTreeMap<String, UserSignals>,
    pub counts: BTreeMap<UserType, usize>,
}

impl Classification {
    pub fn type_of(&self, user_id: &str) -> Option<UserType> {
        self.types.get(user_id).copied()
    }

    pub fn count(&self, t: UserType) -> usize {
        self.counts.get(&t).copied().unwrap_or(0)
    }
}

pub fn classify_corpus(corpus: &Corpus) -> Classification {
    let mut out = Classification {
        counts: UserType::ALL.iter().map(|&t| (t, 0)).collect(),
        ..Classification::default()
    };
    for user in &corpus.users {
        let signals = extract_signals(user);
        let t = classify_user(&signals);
        *out.counts.entry(t).or_insert(0) += 1;
        out.types.insert(user.user_id.clone(), t);
        out.signals.insert(user.user_id.clone(), signals);
    }
    out
}
