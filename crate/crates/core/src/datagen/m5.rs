//! Reader for the public M5 competition layout: `calendar.csv` plus a wide
//! daily-sales file (`sales_train_evaluation.csv`, falling back to
//! `sales_train_validation.csv`).

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::SeriesPanel;
use crate::error::{Error, Result};

const CALENDAR: &str = "calendar.csv";
const SALES_FILES: [&str; 2] = ["sales_train_evaluation.csv", "sales_train_validation.csv"];
const CALENDAR_COLUMNS: [&str; 3] = ["date", "wday", "d"];
const ID_COLUMNS: [&str; 6] = ["id", "item_id", "dept_id", "cat_id", "store_id", "state_id"];
/// Group labels attached to each series.
const GROUP_COLUMNS: [&str; 5] = ["item_id", "dept_id", "cat_id", "store_id", "state_id"];

/// Inclusive ISO date range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: String,
    pub end: String,
}

impl DateRange {
    pub fn new(start: impl Into<String>, end: impl Into<String>) -> Self {
        Self {
            start: start.into(),
            end: end.into(),
        }
    }

    fn contains(&self, date: &str) -> bool {
        // ISO dates order lexicographically
        self.start.as_str() <= date && date <= self.end.as_str()
    }
}

/// The 28-day validation period, d_1914..d_1941.
pub const M5_VALIDATION: (&str, &str) = ("2016-04-25", "2016-05-22");

struct CalendarDay {
    date: String,
    weekday: u8,
}

fn require_columns(file: &Path, headers: &csv::StringRecord, wanted: &[&str]) -> Result<HashMap<String, usize>> {
    let index: HashMap<String, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.to_string(), i))
        .collect();
    let missing: Vec<String> = wanted
        .iter()
        .filter(|c| !index.contains_key(**c))
        .map(|c| c.to_string())
        .collect();
    if missing.is_empty() {
        Ok(index)
    } else {
        Err(Error::SchemaMismatch {
            file: file.to_path_buf(),
            missing,
        })
    }
}

fn read_calendar(path: &Path) -> Result<HashMap<String, CalendarDay>> {
    let mut reader = csv::Reader::from_path(path)?;
    let cols = require_columns(path, reader.headers()?, &CALENDAR_COLUMNS)?;
    let mut days = HashMap::new();
    for record in reader.records() {
        let record = record?;
        let wday: u8 = record[cols["wday"]].trim().parse().map_err(|_| Error::SchemaMismatch {
            file: path.to_path_buf(),
            missing: vec![format!("wday (unparsable value {:?})", &record[cols["wday"]])],
        })?;
        days.insert(
            record[cols["d"]].to_string(),
            CalendarDay {
                date: record[cols["date"]].to_string(),
                // M5 numbers weekdays 1..=7 starting on Saturday
                weekday: (wday + 6) % 7,
            },
        );
    }
    Ok(days)
}

fn sales_path(dir: &Path) -> Result<PathBuf> {
    SALES_FILES
        .iter()
        .map(|f| dir.join(f))
        .find(|p| p.is_file())
        .ok_or_else(|| Error::MissingFile(dir.join(SALES_FILES[0])))
}

/// Loads the panel, keeping only days within `range` when given.
pub fn load_m5(dir: impl AsRef<Path>, range: Option<&DateRange>) -> Result<SeriesPanel> {
    let dir = dir.as_ref();
    let calendar_path = dir.join(CALENDAR);
    if !calendar_path.is_file() {
        return Err(Error::MissingFile(calendar_path));
    }
    let calendar = read_calendar(&calendar_path)?;
    let sales = sales_path(dir)?;

    let mut reader = csv::Reader::from_path(&sales)?;
    let headers = reader.headers()?.clone();
    let cols = require_columns(&sales, &headers, &ID_COLUMNS)?;

    // day columns in file order, filtered by date
    let mut day_cols = Vec::new();
    let mut unknown = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if !h.starts_with("d_") {
            continue;
        }
        match calendar.get(h) {
            Some(day) if range.is_none_or(|r| r.contains(&day.date)) => day_cols.push((i, day)),
            Some(_) => {}
            None => unknown.push(format!("{h} (absent from calendar)")),
        }
    }
    if !unknown.is_empty() {
        return Err(Error::SchemaMismatch {
            file: sales,
            missing: unknown,
        });
    }

    let mut ids = Vec::new();
    let mut groups = Vec::new();
    let mut counts = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        ids.push(record[cols["id"]].to_string());
        groups.push(
            GROUP_COLUMNS
                .iter()
                .map(|c| (c.to_string(), record[cols[*c]].to_string()))
                .collect::<BTreeMap<_, _>>(),
        );
        let row = day_cols
            .iter()
            .map(|(i, _)| {
                record[*i].trim().parse::<u32>().map_err(|_| Error::SchemaMismatch {
                    file: sales.clone(),
                    missing: vec![format!(
                        "non-count value {:?} in column {} on line {}",
                        &record[*i],
                        &headers[*i],
                        line + 2
                    )],
                })
            })
            .collect::<Result<Vec<u32>>>()?;
        counts.push(row);
    }

    Ok(SeriesPanel {
        ids,
        groups,
        counts,
        weekdays: Some(day_cols.iter().map(|(_, d)| d.weekday).collect()),
        dates: Some(day_cols.iter().map(|(_, d)| d.date.clone()).collect()),
    })
}
