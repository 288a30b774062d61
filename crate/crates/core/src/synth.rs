//! Synthetic multi-season cohorts with a planted load-to-injury hazard.
//!
//! Every athlete follows a weekly session pattern with log-normal loads,
//! week-level volume noise and occasional overload spikes. On each session
//! day a non-contact injury is drawn with probability
//!
//! ```text
//! σ(β₀ + β₁·max(ACWR − 1, 0) + β₂·z(chronic) + β₃·z(age))
//! ```
//!
//! where ACWR and the chronic rolling average are computed from the
//! athlete's own emitted load history (driver variable, days before the
//! current one) with the same functions the feature pipeline uses.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use rayon::prelude::*;
use serde::Deserialize;

use crate::domain::{
    age_years, write_athletes, write_injuries, write_sessions, AthleteProfile, Cohort, Contact,
    InjuryRecord, LoadVariable, SessionRecord, SessionType, Severity,
};
use crate::error::{Error, Result};
use crate::linalg::sigmoid;
use crate::load_metrics::{acwr, rolling_average};
use crate::rng::{PipelineRng, SeedPath};

/// Log-normal parameterised by its median and log-scale spread.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct LogNormalParams {
    pub median: f64,
    pub sigma: f64,
}

impl LogNormalParams {
    pub const fn new(median: f64, sigma: f64) -> Self {
        LogNormalParams { median, sigma }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        LogNormal::new(self.median.ln(), self.sigma)
            .expect("validated parameters")
            .sample(rng)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HazardConfig {
    pub intercept: f64,
    pub acwr_excess: f64,
    pub chronic: f64,
    pub age: f64,
    pub variable: LoadVariable,
    pub acute_days: usize,
    pub chronic_days: usize,
    /// Centre and scale used to standardise the chronic average.
    pub chronic_mean: f64,
    pub chronic_sd: f64,
    pub age_mean: f64,
    pub age_sd: f64,
}

impl Default for HazardConfig {
    fn default() -> Self {
        HazardConfig {
            intercept: -5.8,
            acwr_excess: 5.0,
            chronic: 0.3,
            age: 0.2,
            variable: LoadVariable::Distance,
            acute_days: 3,
            chronic_days: 21,
            chronic_mean: 4300.0,
            chronic_sd: 900.0,
            age_mean: 25.0,
            age_sd: 4.0,
        }
    }
}

impl HazardConfig {
    pub fn without_signal(&self) -> Self {
        HazardConfig {
            acwr_excess: 0.0,
            chronic: 0.0,
            age: 0.0,
            ..self.clone()
        }
    }

    /// Injury probability given the hazard inputs; undefined inputs count as 0.
    pub fn probability(&self, acwr: Option<f64>, chronic: Option<f64>, age: f64) -> f64 {
        let excess = acwr.map_or(0.0, |a| (a - 1.0).max(0.0));
        let zc = chronic.map_or(0.0, |c| (c - self.chronic_mean) / self.chronic_sd);
        let za = (age - self.age_mean) / self.age_sd;
        sigmoid(self.intercept + self.acwr_excess * excess + self.chronic * zc + self.age * za)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortConfig {
    pub n_athletes: usize,
    pub seasons: Vec<i32>,
    pub weeks_per_season: usize,
    /// Seven characters from Monday: `T` training, `M` match, `R` rest.
    pub week_pattern: String,
    /// Every n-th week (never the first) has no sessions; 0 disables.
    pub off_week_interval: usize,
    pub training_distance: LogNormalParams,
    pub match_distance: LogNormalParams,
    pub training_duration: LogNormalParams,
    pub match_duration: LogNormalParams,
    pub training_rpe: f64,
    pub match_rpe: f64,
    pub msr_fraction: LogNormalParams,
    pub hsr_fraction: LogNormalParams,
    pub player_load_per_metre: LogNormalParams,
    /// Spread of each athlete's typical volume.
    pub athlete_sigma: f64,
    /// Week-to-week training volume noise.
    pub week_sigma: f64,
    pub spike_probability: f64,
    pub spike_multiplier: f64,
    pub hazard: HazardConfig,
    pub contact_rate: f64,
    pub time_loss_fraction: f64,
    pub hamstring_fraction: f64,
    pub rehab_days_min: usize,
    pub rehab_days_max: usize,
    /// Load multiplier for rehabilitation sessions.
    pub rehab_load: f64,
    /// Fraction of athletes whose first season is inside the generated range.
    pub new_player_fraction: f64,
    /// Per-field probability of knocking out an optional load value.
    pub missing_rate: f64,
    pub seed: u64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        CohortConfig {
            n_athletes: 24,
            seasons: vec![2014, 2015, 2016],
            weeks_per_season: 40,
            week_pattern: "TTRTTMR".into(),
            off_week_interval: 10,
            training_distance: LogNormalParams::new(5000.0, 0.2),
            match_distance: LogNormalParams::new(10000.0, 0.08),
            training_duration: LogNormalParams::new(75.0, 0.12),
            match_duration: LogNormalParams::new(95.0, 0.05),
            training_rpe: 5.0,
            match_rpe: 8.0,
            msr_fraction: LogNormalParams::new(0.12, 0.2),
            hsr_fraction: LogNormalParams::new(0.03, 0.4),
            player_load_per_metre: LogNormalParams::new(0.1, 0.08),
            athlete_sigma: 0.12,
            week_sigma: 0.15,
            spike_probability: 0.1,
            spike_multiplier: 1.8,
            hazard: HazardConfig::default(),
            contact_rate: 0.002,
            time_loss_fraction: 0.6,
            hamstring_fraction: 0.3,
            rehab_days_min: 5,
            rehab_days_max: 20,
            rehab_load: 0.35,
            new_player_fraction: 0.3,
            missing_rate: 0.0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DayKind {
    Training,
    Match,
    Rest,
}

impl CohortConfig {
    fn pattern(&self) -> Result<[DayKind; 7]> {
        let chars: Vec<char> = self.week_pattern.chars().collect();
        if chars.len() != 7 {
            return Err(Error::Config("week_pattern must have 7 characters".into()));
        }
        let mut out = [DayKind::Rest; 7];
        for (o, c) in out.iter_mut().zip(chars) {
            *o = match c {
                'T' => DayKind::Training,
                'M' => DayKind::Match,
                'R' => DayKind::Rest,
                other => return Err(Error::Config(format!("week_pattern: unknown day '{other}'"))),
            };
        }
        if out[0] == DayKind::Rest {
            return Err(Error::Config("week_pattern must start with a session day".into()));
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("synth: {m}")));
        if self.n_athletes < 2 {
            return fail("n_athletes must be at least 2");
        }
        if self.seasons.is_empty() {
            return fail("seasons must be nonempty");
        }
        let mut s = self.seasons.clone();
        s.sort_unstable();
        s.dedup();
        if s.len() != self.seasons.len() {
            return fail("seasons must be distinct");
        }
        if self.weeks_per_season == 0 || self.weeks_per_season > 50 {
            return fail("weeks_per_season must be between 1 and 50");
        }
        self.pattern()?;
        for (name, p) in [
            ("spike_probability", self.spike_probability),
            ("contact_rate", self.contact_rate),
            ("time_loss_fraction", self.time_loss_fraction),
            ("hamstring_fraction", self.hamstring_fraction),
            ("new_player_fraction", self.new_player_fraction),
            ("missing_rate", self.missing_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return fail(&format!("{name} must lie in [0, 1]"));
            }
        }
        for (name, d) in [
            ("training_distance", self.training_distance),
            ("match_distance", self.match_distance),
            ("training_duration", self.training_duration),
            ("match_duration", self.match_duration),
            ("msr_fraction", self.msr_fraction),
            ("hsr_fraction", self.hsr_fraction),
            ("player_load_per_metre", self.player_load_per_metre),
        ] {
            if !(d.median > 0.0 && d.sigma >= 0.0 && d.median.is_finite() && d.sigma.is_finite()) {
                return fail(&format!("{name} needs median > 0 and sigma >= 0"));
            }
        }
        if !(self.athlete_sigma >= 0.0 && self.week_sigma >= 0.0 && self.spike_multiplier > 0.0 && self.rehab_load >= 0.0) {
            return fail("spreads and multipliers must be non-negative");
        }
        if self.rehab_days_min == 0 || self.rehab_days_min > self.rehab_days_max {
            return fail("rehab_days_min must be in 1..=rehab_days_max");
        }
        let h = &self.hazard;
        if h.acute_days == 0 || h.chronic_days < h.acute_days || !(h.chronic_sd > 0.0 && h.age_sd > 0.0) {
            return fail("hazard windows and scales are invalid");
        }
        Ok(())
    }
}

/// Monday on or after 5 January of `year`.
pub fn season_start(year: i32) -> NaiveDate {
    let mut d = NaiveDate::from_ymd_opt(year, 1, 5).expect("valid date");
    while d.weekday() != Weekday::Mon {
        d += Duration::days(1);
    }
    d
}

/// Generator-side record of one hazard draw.
#[derive(Debug, Clone, PartialEq)]
pub struct HazardDraw {
    pub athlete_id: String,
    pub date: NaiveDate,
    pub season: i32,
    pub acwr: Option<f64>,
    pub chronic: Option<f64>,
    pub age: f64,
    pub probability: f64,
    pub injured: bool,
}

#[derive(Debug, Clone)]
pub struct SynthCohort {
    pub cohort: Cohort,
    pub draws: Vec<HazardDraw>,
    pub warnings: Vec<String>,
}

impl SynthCohort {
    /// Non-contact injuries per hazard-exposed session day.
    pub fn injury_rate(&self) -> f64 {
        if self.draws.is_empty() {
            return 0.0;
        }
        self.draws.iter().filter(|d| d.injured).count() as f64 / self.draws.len() as f64
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let open = |name: &str| {
            let p = dir.join(name);
            File::create(&p).map(BufWriter::new).map_err(|e| Error::io(&p, e))
        };
        write_sessions(open("sessions.csv")?, &self.cohort.sessions)?;
        write_injuries(open("injuries.csv")?, &self.cohort.injuries)?;
        write_athletes(open("athletes.csv")?, &self.cohort.athletes)?;
        Ok(())
    }
}

fn round1(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

struct AthleteOutput {
    profile: AthleteProfile,
    sessions: Vec<SessionRecord>,
    injuries: Vec<InjuryRecord>,
    draws: Vec<HazardDraw>,
}

struct AthleteGen<'a> {
    cfg: &'a CohortConfig,
    pattern: [DayKind; 7],
    rng: PipelineRng,
    scale: f64,
}

impl AthleteGen<'_> {
    fn session(&mut self, id: &str, date: NaiveDate, season: i32, kind: DayKind, volume: f64, rehab: bool) -> SessionRecord {
        let cfg = self.cfg;
        let (dist, dur, rpe_mean, session_type) = match kind {
            DayKind::Match => (cfg.match_distance, cfg.match_duration, cfg.match_rpe, SessionType::Match),
            _ => (cfg.training_distance, cfg.training_duration, cfg.training_rpe, SessionType::Training),
        };
        let (volume, session_type) = if rehab {
            (cfg.rehab_load, SessionType::Training)
        } else if kind == DayKind::Match {
            (1.0, session_type)
        } else {
            (volume, session_type)
        };
        let rng = &mut self.rng;
        let distance = round1(dist.sample(rng) * self.scale * volume);
        let duration = (dur.sample(rng) * volume.sqrt()).round().max(1.0);
        let rpe_draw = Normal::new(rpe_mean + 1.5 * volume.ln(), 1.0).expect("finite").sample(rng);
        let rpe = rpe_draw.round().clamp(1.0, 10.0) as u8;
        let msr = round1(distance * cfg.msr_fraction.sample(rng).min(0.6)).min(distance);
        let hsr = round1(distance * cfg.hsr_fraction.sample(rng).min(0.3)).min(distance);
        let player_load = round1(distance * cfg.player_load_per_metre.sample(rng));
        SessionRecord {
            athlete_id: id.to_string(),
            date,
            season,
            session_type,
            duration_min: duration,
            rpe: Some(rpe),
            distance_m: Some(distance),
            msr_m: Some(msr),
            hsr_m: Some(hsr),
            player_load: Some(player_load),
            rehab_flag: rehab,
        }
    }

    fn run(mut self, index: usize, id: String) -> AthleteOutput {
        let cfg = self.cfg;
        let seasons = {
            let mut s = cfg.seasons.clone();
            s.sort_unstable();
            s
        };
        let first = seasons[0];
        let first_season = if index > 0 && seasons.len() > 1 && self.rng.random::<f64>() < cfg.new_player_fraction {
            seasons[self.rng.random_range(1..seasons.len())]
        } else if self.rng.random::<f64>() < cfg.new_player_fraction {
            first
        } else {
            first - self.rng.random_range(1..=4)
        };
        let start_age = self.rng.random_range(18.0..33.0);
        let dob = season_start(first) - Duration::days((start_age * 365.25) as i64);
        self.scale = LogNormalParams::new(1.0, cfg.athlete_sigma.max(1e-12)).sample(&mut self.rng);

        let h = &cfg.hazard;
        let mut sessions = Vec::new();
        let mut injuries = Vec::new();
        let mut draws = Vec::new();
        for &season in seasons.iter().filter(|&&s| s >= first_season) {
            let start = season_start(season);
            let n_days = cfg.weeks_per_season * 7;
            let mut driver = vec![0.0; n_days];
            let mut rehab_until: Option<usize> = None;
            let mut volume = 1.0;
            for day in 0..n_days {
                let week = day / 7;
                if day % 7 == 0 {
                    volume = LogNormalParams::new(1.0, cfg.week_sigma.max(1e-12)).sample(&mut self.rng);
                    if week > 0 && self.rng.random::<f64>() < cfg.spike_probability {
                        volume *= cfg.spike_multiplier;
                    }
                }
                let kind = self.pattern[day % 7];
                let off_week = cfg.off_week_interval > 0 && week > 0 && week % cfg.off_week_interval == 0;
                if kind == DayKind::Rest || off_week {
                    continue;
                }
                let date = start + Duration::days(day as i64);
                let in_rehab = rehab_until.is_some_and(|u| day <= u);
                let s = self.session(&id, date, season, kind, volume, in_rehab);
                driver[day] = s.load(h.variable).expect("generated sessions are complete");
                sessions.push(s);
                if in_rehab {
                    continue;
                }

                let a = acwr(&driver, day, h.acute_days, h.chronic_days);
                let c = rolling_average(&driver, day, h.chronic_days);
                let age = age_years(dob, date);
                let p = h.probability(a, c, age);
                let injured = self.rng.random::<f64>() < p;
                draws.push(HazardDraw {
                    athlete_id: id.clone(),
                    date,
                    season,
                    acwr: a,
                    chronic: c,
                    age,
                    probability: p,
                    injured,
                });
                let contact = !injured && self.rng.random::<f64>() < cfg.contact_rate;
                if injured || contact {
                    let time_loss = self.rng.random::<f64>() < cfg.time_loss_fraction;
                    let hamstring = injured && self.rng.random::<f64>() < cfg.hamstring_fraction;
                    injuries.push(InjuryRecord {
                        athlete_id: id.clone(),
                        date,
                        contact: if injured { Contact::NonContact } else { Contact::Contact },
                        severity: if time_loss { Severity::TimeLoss } else { Severity::Transient },
                        hamstring,
                    });
                    if time_loss {
                        let len = self.rng.random_range(cfg.rehab_days_min..=cfg.rehab_days_max);
                        rehab_until = Some(day + len);
                    }
                }
            }
        }
        if cfg.missing_rate > 0.0 {
            for s in &mut sessions {
                let rng = &mut self.rng;
                let mut knock = |v: &mut Option<f64>| {
                    if rng.random::<f64>() < cfg.missing_rate {
                        *v = None;
                    }
                };
                knock(&mut s.distance_m);
                knock(&mut s.msr_m);
                knock(&mut s.hsr_m);
                knock(&mut s.player_load);
                if rng.random::<f64>() < cfg.missing_rate {
                    s.rpe = None;
                }
            }
        }
        AthleteOutput {
            profile: AthleteProfile {
                athlete_id: id,
                date_of_birth: dob,
                first_season,
            },
            sessions,
            injuries,
            draws,
        }
    }
}

pub fn generate_cohort(cfg: &CohortConfig) -> Result<SynthCohort> {
    cfg.validate()?;
    let pattern = cfg.pattern()?;
    let width = cfg.n_athletes.to_string().len().max(2);
    let root = SeedPath::new(cfg.seed).child("athlete");
    let outputs: Vec<AthleteOutput> = (0..cfg.n_athletes)
        .into_par_iter()
        .map(|i| {
            let gen = AthleteGen {
                cfg,
                pattern,
                rng: root.index(i as u64).rng(),
                scale: 1.0,
            };
            gen.run(i, format!("A{:0width$}", i + 1))
        })
        .collect();
    let mut cohort = Cohort::default();
    let mut draws = Vec::new();
    for o in outputs {
        cohort.athletes.push(o.profile);
        cohort.sessions.extend(o.sessions);
        cohort.injuries.extend(o.injuries);
        draws.extend(o.draws);
    }
    let mut warnings = Vec::new();
    let mean_p = draws.iter().map(|d| d.probability).sum::<f64>() / draws.len().max(1) as f64;
    if mean_p > 0.5 {
        let w = format!("hazard parameters imply an injury rate of {mean_p:.3}, above 0.5");
        log::warn!("{w}");
        warnings.push(w);
    }
    Ok(SynthCohort { cohort, draws, warnings })
}

/// Same cohort design with every non-intercept hazard coefficient at zero.
pub fn null_cohort(cfg: &CohortConfig) -> Result<SynthCohort> {
    let mut c = cfg.clone();
    c.hazard = cfg.hazard.without_signal();
    generate_cohort(&c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CohortConfig {
        CohortConfig {
            n_athletes: 4,
            seasons: vec![2015, 2016],
            weeks_per_season: 12,
            ..CohortConfig::default()
        }
    }

    #[test]
    fn season_start_is_a_monday_in_january() {
        for y in 2010..2030 {
            let d = season_start(y);
            assert_eq!(d.weekday(), Weekday::Mon);
            assert!(d.month() == 1 && (5..12).contains(&d.day()));
        }
    }

    #[test]
    fn same_seed_same_cohort() {
        let a = generate_cohort(&small()).unwrap();
        let b = generate_cohort(&small()).unwrap();
        assert_eq!(a.cohort.sessions, b.cohort.sessions);
        assert_eq!(a.cohort.injuries, b.cohort.injuries);
        let c = generate_cohort(&CohortConfig { seed: 2, ..small() }).unwrap();
        assert_ne!(a.cohort.sessions, c.cohort.sessions);
    }

    #[test]
    fn sessions_respect_record_invariants() {
        let s = generate_cohort(&CohortConfig { missing_rate: 0.1, ..small() }).unwrap();
        let mut missing = 0;
        for r in &s.cohort.sessions {
            assert_eq!(r.date.year(), r.season);
            if let (Some(d), Some(m), Some(h)) = (r.distance_m, r.msr_m, r.hsr_m) {
                assert!(m <= d && h <= d);
            }
            missing += usize::from(!r.is_complete());
        }
        assert!(missing > 0);
    }

    #[test]
    fn rehab_follows_time_loss_injuries() {
        let cfg = CohortConfig {
            hazard: HazardConfig { intercept: -2.5, ..HazardConfig::default() },
            ..small()
        };
        let s = generate_cohort(&cfg).unwrap();
        let tl = s.cohort.injuries.iter().find(|i| i.severity == Severity::TimeLoss).unwrap();
        let next = s
            .cohort
            .sessions
            .iter()
            .find(|r| r.athlete_id == tl.athlete_id && r.date > tl.date)
            .unwrap();
        assert!(next.rehab_flag || next.season != tl.date.year());
    }

    #[test]
    fn invalid_configs() {
        for bad in [
            CohortConfig { n_athletes: 1, ..small() },
            CohortConfig { seasons: vec![], ..small() },
            CohortConfig { week_pattern: "RTTTTMR".into(), ..small() },
            CohortConfig { missing_rate: 1.5, ..small() },
            CohortConfig { weeks_per_season: 60, ..small() },
        ] {
            assert!(generate_cohort(&bad).is_err());
        }
    }

    #[test]
    fn extreme_hazard_warns() {
        let cfg = CohortConfig {
            hazard: HazardConfig { intercept: 1.0, ..HazardConfig::default() },
            ..small()
        };
        assert_eq!(generate_cohort(&cfg).unwrap().warnings.len(), 1);
    }
}
