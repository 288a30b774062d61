//! CSV ingestion and emission for the three input tables.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};

use super::records::{AthleteProfile, InjuryRecord, SessionRecord};
use crate::error::{Error, Result};

pub const SESSIONS_HEADER: [&str; 11] = [
    "athlete_id",
    "date",
    "season",
    "session_type",
    "duration_min",
    "rpe",
    "distance_m",
    "msr_m",
    "hsr_m",
    "player_load",
    "rehab_flag",
];
pub const INJURIES_HEADER: [&str; 5] = ["athlete_id", "date", "contact", "severity", "hamstring"];
pub const ATHLETES_HEADER: [&str; 3] = ["athlete_id", "date_of_birth", "first_season"];

struct Row<'a> {
    source: &'a str,
    line: usize,
    record: csv::StringRecord,
}

impl Row<'_> {
    fn fail(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.source.to_string(),
            line: self.line,
            message: message.into(),
        }
    }

    fn field(&self, i: usize) -> &str {
        self.record.get(i).unwrap_or("").trim()
    }

    fn text(&self, i: usize, name: &str) -> Result<String> {
        let v = self.field(i);
        if v.is_empty() {
            return Err(self.fail(format!("empty {name}")));
        }
        Ok(v.to_string())
    }

    fn date(&self, i: usize, name: &str) -> Result<NaiveDate> {
        let v = self.field(i);
        NaiveDate::parse_from_str(v, "%Y-%m-%d")
            .map_err(|_| self.fail(format!("malformed {name} '{v}'")))
    }

    fn parsed<T: FromStr>(&self, i: usize, name: &str) -> Result<T> {
        let v = self.field(i);
        v.parse()
            .map_err(|_| self.fail(format!("malformed {name} '{v}'")))
    }

    fn enumerated<T: FromStr<Err = String>>(&self, i: usize) -> Result<T> {
        self.field(i).parse().map_err(|e: String| self.fail(e))
    }

    fn non_negative(&self, i: usize, name: &str) -> Result<Option<f64>> {
        let v = self.field(i);
        if v.is_empty() {
            return Ok(None);
        }
        let x: f64 = v
            .parse()
            .map_err(|_| self.fail(format!("malformed {name} '{v}'")))?;
        if !x.is_finite() || x < 0.0 {
            return Err(self.fail(format!("negative or non-finite {name} '{v}'")));
        }
        Ok(Some(x))
    }

    fn boolean(&self, i: usize, name: &str) -> Result<bool> {
        match self.field(i) {
            "true" => Ok(true),
            "false" => Ok(false),
            v => Err(self.fail(format!("malformed {name} '{v}'"))),
        }
    }
}

fn rows<'a, R: Read>(reader: R, source: &'a str, header: &[&str]) -> Result<Vec<Row<'a>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let found: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if found != header {
        return Err(Error::Header {
            path: source.to_string(),
            expected: header.join(","),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let record = rec.map_err(|e| match e.position() {
            Some(pos) => Error::Parse {
                path: source.to_string(),
                line: pos.line() as usize,
                message: e.to_string(),
            },
            None => Error::Csv(e),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        out.push(Row {
            source,
            line,
            record,
        });
    }
    Ok(out)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

pub fn read_sessions<R: Read>(reader: R, source: &str) -> Result<Vec<SessionRecord>> {
    let raw = rows(reader, source, &SESSIONS_HEADER)?;
    let mut out = Vec::with_capacity(raw.len());
    for row in raw {
        let date = row.date(1, "date")?;
        let season: i32 = row.parsed(2, "season")?;
        if date.year() != season {
            return Err(row.fail(format!("date {date} outside season {season}")));
        }
        let duration_min = row
            .non_negative(4, "duration_min")?
            .ok_or_else(|| row.fail("empty duration_min"))?;
        let rpe = match row.field(5) {
            "" => None,
            v => match v.parse::<u8>() {
                Ok(r) if r <= 10 => Some(r),
                _ => return Err(row.fail(format!("rpe '{v}' outside 0-10"))),
            },
        };
        let rec = SessionRecord {
            athlete_id: row.text(0, "athlete_id")?,
            date,
            season,
            session_type: row.enumerated(3)?,
            duration_min,
            rpe,
            distance_m: row.non_negative(6, "distance_m")?,
            msr_m: row.non_negative(7, "msr_m")?,
            hsr_m: row.non_negative(8, "hsr_m")?,
            player_load: row.non_negative(9, "player_load")?,
            rehab_flag: row.boolean(10, "rehab_flag")?,
        };
        if let Some(d) = rec.distance_m {
            if rec.msr_m.is_some_and(|m| m > d) || rec.hsr_m.is_some_and(|h| h > d) {
                return Err(row.fail("speed-zone distance exceeds total distance"));
            }
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn read_injuries<R: Read>(reader: R, source: &str) -> Result<Vec<InjuryRecord>> {
    let raw = rows(reader, source, &INJURIES_HEADER)?;
    let mut out = Vec::with_capacity(raw.len());
    let mut seen = HashSet::new();
    for row in raw {
        let rec = InjuryRecord {
            athlete_id: row.text(0, "athlete_id")?,
            date: row.date(1, "date")?,
            contact: row.enumerated(2)?,
            severity: row.enumerated(3)?,
            hamstring: row.boolean(4, "hamstring")?,
        };
        if !seen.insert(rec.clone()) {
            return Err(row.fail("duplicate injury record"));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn read_athletes<R: Read>(reader: R, source: &str) -> Result<Vec<AthleteProfile>> {
    let raw = rows(reader, source, &ATHLETES_HEADER)?;
    let mut out = Vec::with_capacity(raw.len());
    let mut seen = HashSet::new();
    for row in raw {
        let rec = AthleteProfile {
            athlete_id: row.text(0, "athlete_id")?,
            date_of_birth: row.date(1, "date_of_birth")?,
            first_season: row.parsed(2, "first_season")?,
        };
        if !seen.insert(rec.athlete_id.clone()) {
            return Err(row.fail(format!("duplicate athlete '{}'", rec.athlete_id)));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn parse_sessions(path: &Path) -> Result<Vec<SessionRecord>> {
    read_sessions(open(path)?, &path.display().to_string())
}

pub fn parse_injuries(path: &Path) -> Result<Vec<InjuryRecord>> {
    read_injuries(open(path)?, &path.display().to_string())
}

pub fn parse_athletes(path: &Path) -> Result<Vec<AthleteProfile>> {
    read_athletes(open(path)?, &path.display().to_string())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_sessions<W: Write>(writer: W, sessions: &[SessionRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SESSIONS_HEADER)?;
    for s in sessions {
        w.write_record([
            s.athlete_id.clone(),
            s.date.to_string(),
            s.season.to_string(),
            s.session_type.to_string(),
            s.duration_min.to_string(),
            s.rpe.map(|r| r.to_string()).unwrap_or_default(),
            opt(s.distance_m),
            opt(s.msr_m),
            opt(s.hsr_m),
            opt(s.player_load),
            s.rehab_flag.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<sessions>", e))?;
    Ok(())
}

pub fn write_injuries<W: Write>(writer: W, injuries: &[InjuryRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(INJURIES_HEADER)?;
    for i in injuries {
        w.write_record([
            i.athlete_id.clone(),
            i.date.to_string(),
            i.contact.to_string(),
            i.severity.to_string(),
            i.hamstring.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<injuries>", e))?;
    Ok(())
}

pub fn write_athletes<W: Write>(writer: W, athletes: &[AthleteProfile]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ATHLETES_HEADER)?;
    for a in athletes {
        w.write_record([
            a.athlete_id.clone(),
            a.date_of_birth.to_string(),
            a.first_season.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<athletes>", e))?;
    Ok(())
}
