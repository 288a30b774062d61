use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionType {
    Training,
    Match,
}

impl FromStr for SessionType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "training" => Ok(SessionType::Training),
            "match" => Ok(SessionType::Match),
            other => Err(format!("unknown session_type '{other}'")),
        }
    }
}

impl fmt::Display for SessionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SessionType::Training => "training",
            SessionType::Match => "match",
        })
    }
}

/// One athlete-session row.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecord {
    pub athlete_id: String,
    pub date: NaiveDate,
    pub season: i32,
    pub session_type: SessionType,
    pub duration_min: f64,
    pub rpe: Option<u8>,
    pub distance_m: Option<f64>,
    pub msr_m: Option<f64>,
    pub hsr_m: Option<f64>,
    pub player_load: Option<f64>,
    pub rehab_flag: bool,
}

impl SessionRecord {
    /// Session-RPE: perceived exertion times duration.
    pub fn srpe(&self) -> Option<f64> {
        self.rpe.map(|r| f64::from(r) * self.duration_min)
    }

    pub fn load(&self, variable: LoadVariable) -> Option<f64> {
        match variable {
            LoadVariable::Distance => self.distance_m,
            LoadVariable::Msr => self.msr_m,
            LoadVariable::Hsr => self.hsr_m,
            LoadVariable::Srpe => self.srpe(),
            LoadVariable::PlayerLoad => self.player_load,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.rpe.is_some()
            && self.distance_m.is_some()
            && self.msr_m.is_some()
            && self.hsr_m.is_some()
            && self.player_load.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Contact {
    Contact,
    NonContact,
}

impl FromStr for Contact {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "contact" => Ok(Contact::Contact),
            "non_contact" => Ok(Contact::NonContact),
            other => Err(format!("unknown contact '{other}'")),
        }
    }
}

impl fmt::Display for Contact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Contact::Contact => "contact",
            Contact::NonContact => "non_contact",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    /// Did not cause unavailability for training or matches.
    Transient,
    TimeLoss,
}

impl FromStr for Severity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "transient" => Ok(Severity::Transient),
            "time_loss" => Ok(Severity::TimeLoss),
            other => Err(format!("unknown severity '{other}'")),
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Transient => "transient",
            Severity::TimeLoss => "time_loss",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InjuryRecord {
    pub athlete_id: String,
    pub date: NaiveDate,
    pub contact: Contact,
    pub severity: Severity,
    pub hamstring: bool,
}

impl InjuryRecord {
    /// Whether this injury counts towards `outcome`. Contact injuries never do.
    pub fn qualifies(&self, outcome: Outcome) -> bool {
        if self.contact == Contact::Contact {
            return false;
        }
        match outcome {
            Outcome::NonContact => true,
            Outcome::NonContactTimeLoss => self.severity == Severity::TimeLoss,
            Outcome::Hamstring => self.hamstring,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AthleteProfile {
    pub athlete_id: String,
    pub date_of_birth: NaiveDate,
    pub first_season: i32,
}

/// The three modeled injury outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    #[serde(rename = "NC")]
    NonContact,
    #[serde(rename = "NCTL")]
    NonContactTimeLoss,
    #[serde(rename = "HS")]
    Hamstring,
}

impl Outcome {
    pub const ALL: [Outcome; 3] = [
        Outcome::NonContact,
        Outcome::NonContactTimeLoss,
        Outcome::Hamstring,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Outcome::NonContact => "NC",
            Outcome::NonContactTimeLoss => "NCTL",
            Outcome::Hamstring => "HS",
        }
    }

    pub(crate) fn index(self) -> usize {
        match self {
            Outcome::NonContact => 0,
            Outcome::NonContactTimeLoss => 1,
            Outcome::Hamstring => 2,
        }
    }
}

impl FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "NC" => Ok(Outcome::NonContact),
            "NCTL" => Ok(Outcome::NonContactTimeLoss),
            "HS" => Ok(Outcome::Hamstring),
            other => Err(format!("unknown outcome '{other}'")),
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// The five workload variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadVariable {
    /// Total distance (above 3 km/h).
    Distance,
    /// Moderate-speed running, 18-24 km/h.
    Msr,
    /// High-speed running, above 24 km/h.
    Hsr,
    /// Session-RPE.
    Srpe,
    /// Accelerometer-derived load.
    PlayerLoad,
}

impl LoadVariable {
    pub const ALL: [LoadVariable; 5] = [
        LoadVariable::Distance,
        LoadVariable::Msr,
        LoadVariable::Hsr,
        LoadVariable::Srpe,
        LoadVariable::PlayerLoad,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LoadVariable::Distance => "distance",
            LoadVariable::Msr => "msr",
            LoadVariable::Hsr => "hsr",
            LoadVariable::Srpe => "srpe",
            LoadVariable::PlayerLoad => "player_load",
        }
    }

    /// Monotony and strain are not computed for HSR, which is frequently
    /// zero for a whole week.
    pub fn has_monotony(self) -> bool {
        self != LoadVariable::Hsr
    }
}

impl FromStr for LoadVariable {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LoadVariable::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown load variable '{s}'"))
    }
}

impl fmt::Display for LoadVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The three input tables together.
#[derive(Debug, Clone, Default)]
pub struct Cohort {
    pub sessions: Vec<SessionRecord>,
    pub injuries: Vec<InjuryRecord>,
    pub athletes: Vec<AthleteProfile>,
}
