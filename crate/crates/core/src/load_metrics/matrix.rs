use std::collections::HashMap;
use std::io::Write;

use ndarray::Array2;

use super::{acwr, ewma_trace, monotony7, rolling_average, strain7, MonotonyRule};
use crate::domain::{DailyPanel, LoadVariable, SeasonBounds, SessionRecord, SessionType};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    RollingAverage(usize),
    Ewma(usize),
    Acwr { acute: usize, chronic: usize },
    EwAcwr { acute: usize, chronic: usize },
    Monotony,
    Strain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureColumn {
    Load(LoadVariable, FeatureKind),
    Age,
    SessionMatch,
}

impl FeatureColumn {
    pub fn name(&self) -> String {
        match self {
            FeatureColumn::Load(v, kind) => match kind {
                FeatureKind::RollingAverage(c) => format!("{v}_ra{c}"),
                FeatureKind::Ewma(n) => format!("{v}_ewma{n}"),
                FeatureKind::Acwr { acute, chronic } => format!("{v}_acwr{acute}_{chronic}"),
                FeatureKind::EwAcwr { acute, chronic } => format!("{v}_ewacwr{acute}_{chronic}"),
                FeatureKind::Monotony => format!("{v}_monotony7"),
                FeatureKind::Strain => format!("{v}_strain7"),
            },
            FeatureColumn::Age => "age_years".into(),
            FeatureColumn::SessionMatch => "session_match".into(),
        }
    }

    pub fn variable(&self) -> Option<LoadVariable> {
        match self {
            FeatureColumn::Load(v, _) => Some(*v),
            _ => None,
        }
    }
}

/// Window lengths used to build the feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub rolling_windows: Vec<usize>,
    pub ewma_spans: Vec<usize>,
    pub acute_windows: Vec<usize>,
    pub chronic_window: usize,
    pub monotony: MonotonyRule,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            rolling_windows: vec![3, 6, 21],
            ewma_spans: vec![3, 6, 21],
            acute_windows: vec![3, 6],
            chronic_window: 21,
            monotony: MonotonyRule::default(),
        }
    }
}

impl FeatureConfig {
    /// Column layout: per variable the rolling averages, EWMAs, ACWRs,
    /// EW-ACWRs, then monotony and strain (not for HSR); age and session type
    /// last.
    pub fn columns(&self) -> Vec<FeatureColumn> {
        let mut cols = Vec::new();
        for v in LoadVariable::ALL {
            for &c in &self.rolling_windows {
                cols.push(FeatureColumn::Load(v, FeatureKind::RollingAverage(c)));
            }
            for &n in &self.ewma_spans {
                cols.push(FeatureColumn::Load(v, FeatureKind::Ewma(n)));
            }
            for &a in &self.acute_windows {
                cols.push(FeatureColumn::Load(
                    v,
                    FeatureKind::Acwr {
                        acute: a,
                        chronic: self.chronic_window,
                    },
                ));
            }
            for &a in &self.acute_windows {
                cols.push(FeatureColumn::Load(
                    v,
                    FeatureKind::EwAcwr {
                        acute: a,
                        chronic: self.chronic_window,
                    },
                ));
            }
            if v.has_monotony() {
                cols.push(FeatureColumn::Load(v, FeatureKind::Monotony));
                cols.push(FeatureColumn::Load(v, FeatureKind::Strain));
            }
        }
        cols.push(FeatureColumn::Age);
        cols.push(FeatureColumn::SessionMatch);
        cols
    }
}

/// Daily load arrays keyed by (athlete, season), one per variable.
#[derive(Debug, Clone, Default)]
pub struct LoadSeriesSet {
    series: HashMap<(String, i32), [Vec<f64>; 5]>,
}

impl LoadSeriesSet {
    pub fn get(&self, athlete: &str, season: i32, variable: LoadVariable) -> Option<&[f64]> {
        self.series
            .get(&(athlete.to_string(), season))
            .map(|v| v[variable_slot(variable)].as_slice())
    }

    pub fn get_mut(
        &mut self,
        athlete: &str,
        season: i32,
        variable: LoadVariable,
    ) -> Option<&mut Vec<f64>> {
        self.series
            .get_mut(&(athlete.to_string(), season))
            .map(|v| &mut v[variable_slot(variable)])
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }
}

fn variable_slot(v: LoadVariable) -> usize {
    LoadVariable::ALL.iter().position(|x| *x == v).unwrap()
}

/// Sum each athlete's session loads per calendar day. Sessions must be
/// complete: impute missing loads first.
pub fn build_load_series(
    sessions: &[SessionRecord],
    seasons: &[SeasonBounds],
) -> Result<LoadSeriesSet> {
    let bounds: HashMap<i32, &SeasonBounds> = seasons.iter().map(|b| (b.season, b)).collect();
    let mut set = LoadSeriesSet::default();
    for s in sessions {
        let b = bounds.get(&s.season).ok_or_else(|| {
            Error::InvalidInput(format!("no season bounds for season {}", s.season))
        })?;
        let day = b.day_index(s.date).ok_or_else(|| {
            Error::InvalidInput(format!("session on {} outside season {}", s.date, s.season))
        })?;
        let span = b.span_days();
        let entry = set
            .series
            .entry((s.athlete_id.clone(), s.season))
            .or_insert_with(|| std::array::from_fn(|_| vec![0.0; span]));
        for v in LoadVariable::ALL {
            let load = s.load(v).ok_or_else(|| {
                Error::InvalidInput(format!(
                    "session for '{}' on {} has a missing {v} load; impute before building series",
                    s.athlete_id, s.date
                ))
            })?;
            entry[variable_slot(v)][day] += load;
        }
    }
    Ok(set)
}

/// Row-aligned engineered features; `NaN` marks entries without enough
/// history, to be imputed downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub columns: Vec<FeatureColumn>,
    pub values: Array2<f64>,
}

impl FeatureMatrix {
    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name()).collect()
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name() == name)
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|x| x.is_nan()).count()
    }

    pub fn write_csv<W: Write>(&self, writer: W, panel: &DailyPanel) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![
            "athlete_id".to_string(),
            "date".into(),
            "season".into(),
            "new_player".into(),
        ];
        header.extend(self.names());
        let keys = crate::domain::OutcomeKey::all();
        header.extend(keys.iter().map(|k| format!("label_{k}")));
        w.write_record(&header)?;
        for (row, values) in panel.rows.iter().zip(self.values.rows()) {
            let mut rec = vec![
                row.athlete_id.clone(),
                row.date.to_string(),
                row.season.to_string(),
                row.new_player.to_string(),
            ];
            rec.extend(values.iter().map(|x| {
                if x.is_nan() {
                    String::new()
                } else {
                    x.to_string()
                }
            }));
            rec.extend(keys.iter().map(|k| u8::from(row.labels.get(*k)).to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<features>", e))?;
        Ok(())
    }
}

struct SeasonCache {
    traces: HashMap<(LoadVariable, usize), Vec<f64>>,
}

fn value_at(
    col: &FeatureColumn,
    loads: &[f64],
    day: usize,
    cache: &mut SeasonCache,
    cfg: &FeatureConfig,
) -> Option<f64> {
    let FeatureColumn::Load(v, kind) = col else {
        unreachable!()
    };
    let mut trace = |span: usize| -> Option<f64> {
        if day == 0 {
            return None;
        }
        let t = cache
            .traces
            .entry((*v, span))
            .or_insert_with(|| ewma_trace(loads, span));
        Some(t[day])
    };
    match *kind {
        FeatureKind::RollingAverage(c) => rolling_average(loads, day, c),
        FeatureKind::Ewma(n) => trace(n),
        FeatureKind::Acwr { acute, chronic } => acwr(loads, day, acute, chronic),
        FeatureKind::EwAcwr { acute, chronic } => {
            let c = trace(chronic)?;
            let a = trace(acute)?;
            Some(if c == 0.0 { 0.0 } else { a / c })
        }
        FeatureKind::Monotony => monotony7(loads, day, cfg.monotony),
        FeatureKind::Strain => strain7(loads, day, cfg.monotony),
    }
}

/// Assemble the feature matrix, one row per panel row.
pub fn build_feature_matrix(
    panel: &DailyPanel,
    series: &LoadSeriesSet,
    cfg: &FeatureConfig,
) -> Result<FeatureMatrix> {
    let columns = cfg.columns();
    let mut values = Array2::from_elem((panel.len(), columns.len()), f64::NAN);
    let mut caches: HashMap<(String, i32), SeasonCache> = HashMap::new();
    for (r, row) in panel.rows.iter().enumerate() {
        let cache = caches
            .entry((row.athlete_id.clone(), row.season))
            .or_insert_with(|| SeasonCache {
                traces: HashMap::new(),
            });
        for (c, col) in columns.iter().enumerate() {
            values[[r, c]] = match col {
                FeatureColumn::Age => row.age_years,
                FeatureColumn::SessionMatch => match row.session_type {
                    SessionType::Match => 1.0,
                    SessionType::Training => 0.0,
                },
                FeatureColumn::Load(v, _) => {
                    let loads = series.get(&row.athlete_id, row.season, *v).ok_or_else(|| {
                        Error::InvalidInput(format!(
                            "no load series for '{}' in season {}",
                            row.athlete_id, row.season
                        ))
                    })?;
                    if row.season_day >= loads.len() {
                        return Err(Error::InvalidInput(format!(
                            "panel day {} for '{}' lies outside the load series",
                            row.date, row.athlete_id
                        )));
                    }
                    value_at(col, loads, row.season_day, cache, cfg).unwrap_or(f64::NAN)
                }
            };
        }
    }
    Ok(FeatureMatrix { columns, values })
}
