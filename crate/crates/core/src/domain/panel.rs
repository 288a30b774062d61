use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Months, NaiveDate};

use super::records::{AthleteProfile, InjuryRecord, Outcome, SessionRecord, SessionType};
use crate::error::{Error, Result};

/// Calendar days removed at the start of each season.
pub const DEFAULT_BURN_IN_DAYS: i64 = 14;
/// Lagged outcome window `[d, d + 4]`: the row day plus the next four days.
pub const DEFAULT_LAG_DAYS: i64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PanelOptions {
    pub burn_in_days: i64,
    pub lag_days: i64,
}

impl Default for PanelOptions {
    fn default() -> Self {
        PanelOptions {
            burn_in_days: DEFAULT_BURN_IN_DAYS,
            lag_days: DEFAULT_LAG_DAYS,
        }
    }
}

/// First and last session date of a season across the whole squad.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeasonBounds {
    pub season: i32,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl SeasonBounds {
    pub fn span_days(&self) -> usize {
        (self.end - self.start).num_days() as usize + 1
    }

    pub fn day_index(&self, date: NaiveDate) -> Option<usize> {
        let d = (date - self.start).num_days();
        (d >= 0 && date <= self.end).then_some(d as usize)
    }
}

/// An outcome with or without the lag window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OutcomeKey {
    pub outcome: Outcome,
    pub lagged: bool,
}

impl OutcomeKey {
    pub fn all() -> Vec<OutcomeKey> {
        [false, true]
            .into_iter()
            .flat_map(|lagged| {
                Outcome::ALL
                    .into_iter()
                    .map(move |outcome| OutcomeKey { outcome, lagged })
            })
            .collect()
    }
}

impl fmt::Display for OutcomeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lagged {
            write!(f, "{}-lag", self.outcome)
        } else {
            write!(f, "{}", self.outcome)
        }
    }
}

impl FromStr for OutcomeKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (code, lagged) = match s.strip_suffix("-lag") {
            Some(c) => (c, true),
            None => (s, false),
        };
        Ok(OutcomeKey {
            outcome: code.parse()?,
            lagged,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OutcomeLabels {
    same_day: [bool; 3],
    lagged: [bool; 3],
}

impl OutcomeLabels {
    pub fn get(&self, key: OutcomeKey) -> bool {
        if key.lagged {
            self.lagged[key.outcome.index()]
        } else {
            self.same_day[key.outcome.index()]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelRow {
    pub athlete_id: String,
    pub date: NaiveDate,
    pub season: i32,
    /// Days since the season's first session.
    pub season_day: usize,
    pub session_type: SessionType,
    pub age_years: f64,
    pub new_player: bool,
    pub labels: OutcomeLabels,
}

/// One row per athlete per non-rehab session day, ordered by (athlete, date).
#[derive(Debug, Clone)]
pub struct DailyPanel {
    pub rows: Vec<PanelRow>,
    pub seasons: Vec<SeasonBounds>,
    pub options: PanelOptions,
    pub warnings: Vec<String>,
}

impl DailyPanel {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self, key: OutcomeKey) -> Vec<u8> {
        self.rows.iter().map(|r| u8::from(r.labels.get(key))).collect()
    }

    pub fn season_bounds(&self, season: i32) -> Option<&SeasonBounds> {
        self.seasons.iter().find(|s| s.season == season)
    }
}

/// Exact fractional age: whole years completed plus the elapsed fraction of
/// the current birthday year.
pub fn age_years(date_of_birth: NaiveDate, date: NaiveDate) -> f64 {
    let mut years = date.year() - date_of_birth.year();
    let birthday = |y: i32| {
        date_of_birth
            .checked_add_months(Months::new(12 * y.max(0) as u32))
            .unwrap_or(date_of_birth)
    };
    if years > 0 && birthday(years) > date {
        years -= 1;
    }
    if years < 0 {
        return (date - date_of_birth).num_days() as f64 / 365.25;
    }
    let last = birthday(years);
    let next = birthday(years + 1);
    let frac = (date - last).num_days() as f64 / (next - last).num_days() as f64;
    f64::from(years) + frac
}

pub fn season_bounds(sessions: &[SessionRecord]) -> Vec<SeasonBounds> {
    let mut map: BTreeMap<i32, (NaiveDate, NaiveDate)> = BTreeMap::new();
    for s in sessions {
        let e = map.entry(s.season).or_insert((s.date, s.date));
        e.0 = e.0.min(s.date);
        e.1 = e.1.max(s.date);
    }
    map.into_iter()
        .map(|(season, (start, end))| SeasonBounds { season, start, end })
        .collect()
}

struct InjuryIndex<'a> {
    by_athlete: HashMap<&'a str, Vec<&'a InjuryRecord>>,
}

impl<'a> InjuryIndex<'a> {
    fn new(injuries: &'a [InjuryRecord]) -> Self {
        let mut by_athlete: HashMap<&str, Vec<&InjuryRecord>> = HashMap::new();
        for inj in injuries {
            by_athlete.entry(inj.athlete_id.as_str()).or_default().push(inj);
        }
        InjuryIndex { by_athlete }
    }

    fn dates(&self, athlete: &str, outcome: Outcome) -> BTreeSet<NaiveDate> {
        self.by_athlete
            .get(athlete)
            .map(|v| {
                v.iter()
                    .filter(|i| i.qualifies(outcome))
                    .map(|i| i.date)
                    .collect()
            })
            .unwrap_or_default()
    }
}

/// Label rows positive when a qualifying injury falls on a day in
/// `[row date, row date + lag_days]`.
pub fn label_outcomes(
    rows: &[PanelRow],
    injuries: &[InjuryRecord],
    outcome: Outcome,
    lag_days: i64,
) -> Vec<u8> {
    let index = InjuryIndex::new(injuries);
    let mut cache: HashMap<&str, BTreeSet<NaiveDate>> = HashMap::new();
    rows.iter()
        .map(|r| {
            let dates = cache
                .entry(r.athlete_id.as_str())
                .or_insert_with(|| index.dates(&r.athlete_id, outcome));
            let end = r.date + chrono::Duration::days(lag_days.max(0));
            u8::from(dates.range(r.date..=end).next().is_some())
        })
        .collect()
}

pub fn build_daily_panel(
    sessions: &[SessionRecord],
    injuries: &[InjuryRecord],
    athletes: &[AthleteProfile],
    options: PanelOptions,
) -> Result<DailyPanel> {
    let roster: HashMap<&str, &AthleteProfile> = athletes
        .iter()
        .map(|a| (a.athlete_id.as_str(), a))
        .collect();
    for id in sessions
        .iter()
        .map(|s| &s.athlete_id)
        .chain(injuries.iter().map(|i| &i.athlete_id))
    {
        if !roster.contains_key(id.as_str()) {
            return Err(Error::InvalidInput(format!(
                "athlete '{id}' missing from the athlete roster"
            )));
        }
    }
    let seasons = season_bounds(sessions);
    let bounds: HashMap<i32, SeasonBounds> = seasons.iter().map(|b| (b.season, *b)).collect();

    // (athlete, date) -> (season, is_match, any_rehab)
    let mut days: BTreeMap<(&str, NaiveDate), (i32, bool, bool)> = BTreeMap::new();
    for s in sessions {
        let e = days
            .entry((s.athlete_id.as_str(), s.date))
            .or_insert((s.season, false, false));
        e.1 |= s.session_type == SessionType::Match;
        e.2 |= s.rehab_flag;
    }

    let mut warnings = Vec::new();
    let active: BTreeSet<(&str, i32)> = sessions
        .iter()
        .map(|s| (s.athlete_id.as_str(), s.season))
        .collect();
    for inj in injuries {
        if !active.contains(&(inj.athlete_id.as_str(), inj.date.year())) {
            let msg = format!(
                "injury for athlete '{}' on {} has no sessions in that season",
                inj.athlete_id, inj.date
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }

    let mut rows = Vec::new();
    for (&(athlete, date), &(season, is_match, rehab)) in &days {
        if rehab {
            continue;
        }
        let b = bounds[&season];
        let season_day = (date - b.start).num_days();
        if season_day < options.burn_in_days {
            continue;
        }
        let profile = roster[athlete];
        rows.push(PanelRow {
            athlete_id: athlete.to_string(),
            date,
            season,
            season_day: season_day as usize,
            session_type: if is_match {
                SessionType::Match
            } else {
                SessionType::Training
            },
            age_years: age_years(profile.date_of_birth, date),
            new_player: profile.first_season == season,
            labels: OutcomeLabels::default(),
        });
    }

    for outcome in Outcome::ALL {
        let same = label_outcomes(&rows, injuries, outcome, 0);
        let lag = label_outcomes(&rows, injuries, outcome, options.lag_days);
        for (row, (s, l)) in rows.iter_mut().zip(same.into_iter().zip(lag)) {
            row.labels.same_day[outcome.index()] = s == 1;
            row.labels.lagged[outcome.index()] = l == 1;
        }
    }

    Ok(DailyPanel {
        rows,
        seasons,
        options,
        warnings,
    })
}

/// Row indices on each side of a season split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitDataset {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub dropped: Vec<usize>,
}

pub fn split_by_season(
    panel: &DailyPanel,
    train_seasons: &[i32],
    test_seasons: &[i32],
) -> Result<SplitDataset> {
    if train_seasons.is_empty() || test_seasons.is_empty() {
        return Err(Error::Config(
            "train and test season sets must both be nonempty".into(),
        ));
    }
    if let Some(s) = train_seasons.iter().find(|s| test_seasons.contains(s)) {
        return Err(Error::Config(format!(
            "season {s} is in both the train and test sets"
        )));
    }
    let mut split = SplitDataset {
        train: Vec::new(),
        test: Vec::new(),
        dropped: Vec::new(),
    };
    for (i, row) in panel.rows.iter().enumerate() {
        if train_seasons.contains(&row.season) {
            split.train.push(i);
        } else if test_seasons.contains(&row.season) {
            split.test.push(i);
        } else {
            split.dropped.push(i);
        }
    }
    Ok(split)
}

/// Positive labels per row.
pub fn injury_rate(labels: &[u8], n_rows: usize) -> Result<f64> {
    if n_rows == 0 {
        return Err(Error::InvalidInput("injury rate over zero rows".into()));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    Ok(positives as f64 / n_rows as f64)
}
