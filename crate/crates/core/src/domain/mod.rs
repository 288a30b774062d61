//! Athlete rosters, session and injury records, and the labeled daily panel.

mod io;
mod panel;
mod records;

pub use io::{
    parse_athletes, parse_injuries, parse_sessions, read_athletes, read_injuries, read_sessions,
    write_athletes, write_injuries, write_sessions, ATHLETES_HEADER, INJURIES_HEADER,
    SESSIONS_HEADER,
};
pub use panel::{
    age_years, build_daily_panel, injury_rate, label_outcomes, season_bounds, split_by_season,
    DailyPanel,
    OutcomeKey, OutcomeLabels, PanelOptions, PanelRow, SeasonBounds, SplitDataset,
    DEFAULT_BURN_IN_DAYS, DEFAULT_LAG_DAYS,
};
pub use records::{
    AthleteProfile, Contact, Cohort, InjuryRecord, LoadVariable, Outcome, SessionRecord,
    SessionType, Severity,
};
