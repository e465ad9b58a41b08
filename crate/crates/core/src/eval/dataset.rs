//! CSV ingestion and the named dataset presets.

use std::collections::HashSet;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const AIRLINE_CSV: &str = include_str!("../../data/airline.csv");

/// A cleaned multivariate series: one target and zero or more exogenous
/// columns, aligned by row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub timestamps: Vec<String>,
    pub target_name: String,
    pub target: Vec<f64>,
    pub exo: Vec<(String, Vec<f64>)>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    /// Monthly airline passenger counts, 1949-1960, with year and month
    /// derived as exogenous columns.
    pub fn airline() -> Result<Dataset> {
        Recipe::Airline.parse(AIRLINE_CSV, None)
    }

    pub fn load(path: &Path, recipe: Recipe, target: Option<&str>) -> Result<Dataset> {
        let text = std::fs::read_to_string(path)?;
        let mut ds = recipe.parse(&text, target)?;
        if let Some(stem) = path.file_stem() {
            ds.name = stem.to_string_lossy().into_owned();
        }
        Ok(ds)
    }
}

/// Ingestion presets. Each drops rows with missing values, duplicate rows
/// and identifier columns; `Generic` does only that.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipe {
    Generic,
    AirQuality,
    Sml2010,
    Airline,
    PvPower,
    Rossman,
}

impl FromStr for Recipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "generic" => Recipe::Generic,
            "air_quality" => Recipe::AirQuality,
            "sml2010" => Recipe::Sml2010,
            "airline" => Recipe::Airline,
            "pv_power" => Recipe::PvPower,
            "rossman" => Recipe::Rossman,
            other => return Err(Error::config(format!("unknown recipe `{other}`"))),
        })
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn drop_columns(&mut self, names: &[&str]) {
        let keep: Vec<usize> = (0..self.header.len())
            .filter(|&i| !names.contains(&self.header[i].as_str()) && !self.header[i].is_empty())
            .collect();
        self.header = keep.iter().map(|&i| self.header[i].clone()).collect();
        for r in &mut self.rows {
            *r = keep
                .iter()
                .map(|&i| r.get(i).cloned().unwrap_or_default())
                .collect();
        }
    }
}

fn read_delimited(text: &str, delimiter: u8) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok(Table { header, rows })
}

fn read_whitespace(text: &str) -> Table {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .map(|l| {
            l.split_whitespace()
                .map(|h| h.trim_start_matches('#').to_string())
                .collect()
        })
        .unwrap_or_default();
    let rows = lines
        .map(|l| l.split_whitespace().map(str::to_string).collect())
        .collect();
    Table { header, rows }
}

impl Recipe {
    fn default_target(self) -> Option<&'static str> {
        match self {
            Recipe::AirQuality => Some("CO(GT)"),
            Recipe::Sml2010 => Some("3:Temperature_Comedor_Sensor"),
            Recipe::Airline => Some("#Passengers"),
            Recipe::PvPower => Some("AC_POWER"),
            Recipe::Rossman => Some("Sales"),
            Recipe::Generic => None,
        }
    }

    fn identifiers(self) -> &'static [&'static str] {
        match self {
            Recipe::AirQuality => &["Time"],
            Recipe::Sml2010 => &["2:Time", "24:Day_Of_Week"],
            Recipe::PvPower => &["PLANT_ID", "SOURCE_KEY"],
            Recipe::Rossman => &["Store"],
            Recipe::Airline | Recipe::Generic => &[],
        }
    }

    /// Parses `text`; the first remaining column is the timestamp.
    pub fn parse(self, text: &str, target: Option<&str>) -> Result<Dataset> {
        let mut table = match self {
            Recipe::AirQuality => read_delimited(text, b';')?,
            Recipe::Sml2010 => read_whitespace(text),
            _ => read_delimited(text, b',')?,
        };
        if table.header.is_empty() {
            return Err(Error::config("dataset has no header"));
        }
        if self == Recipe::AirQuality {
            for r in &mut table.rows {
                for v in r.iter_mut() {
                    *v = v.replace(',', ".");
                    if v == "-200" {
                        v.clear();
                    }
                }
            }
        }
        if self == Recipe::Rossman {
            rossman_single_store(&mut table)?;
        }
        table.drop_columns(self.identifiers());
        if self == Recipe::Rossman {
            // Kaggle ships the file newest first.
            let ts = table
                .column("Date")
                .ok_or_else(|| Error::config("rossman data needs a Date column"))?;
            table.rows.sort_by(|a, b| a[ts].cmp(&b[ts]));
            if ts != 0 {
                for r in &mut table.rows {
                    let v = r.remove(ts);
                    r.insert(0, v);
                }
                let h = table.header.remove(ts);
                table.header.insert(0, h);
            }
        }

        let target_name = target
            .map(str::to_string)
            .or_else(|| self.default_target().map(str::to_string))
            .or_else(|| table.header.get(1).cloned())
            .ok_or_else(|| {
                Error::config("dataset needs a timestamp and at least one value column")
            })?;
        let target_idx = table
            .column(&target_name)
            .filter(|&i| i > 0)
            .ok_or_else(|| Error::config(format!("target column `{target_name}` not found")))?;

        let width = table.header.len();
        let mut seen = HashSet::new();
        let mut timestamps = Vec::new();
        let mut values: Vec<Vec<f64>> = Vec::new();
        for r in &table.rows {
            if r.len() < width {
                continue;
            }
            let parsed: Option<Vec<f64>> = r[1..width].iter().map(|v| parse_value(v)).collect();
            let Some(parsed) = parsed else { continue };
            if !seen.insert(r[..width].join("\u{1f}")) {
                continue;
            }
            timestamps.push(r[0].clone());
            values.push(parsed);
        }
        if values.is_empty() {
            return Err(Error::config("no complete rows after cleaning"));
        }

        let column = |c: usize| values.iter().map(|row| row[c - 1]).collect::<Vec<f64>>();
        let mut exo: Vec<(String, Vec<f64>)> = (1..width)
            .filter(|&c| c != target_idx)
            .map(|c| (table.header[c].clone(), column(c)))
            .collect();
        if self == Recipe::Airline {
            let (year, month) = airline_calendar(&timestamps)?;
            exo.push(("year".into(), year));
            exo.push(("month".into(), month));
        }
        Ok(Dataset {
            name: format!("{self:?}").to_lowercase(),
            timestamps,
            target_name,
            target: column(target_idx),
            exo,
        })
    }
}

fn parse_value(v: &str) -> Option<f64> {
    if v.is_empty() || v.eq_ignore_ascii_case("na") || v.eq_ignore_ascii_case("nan") {
        return None;
    }
    if let Ok(x) = v.parse::<f64>() {
        return x.is_finite().then_some(x);
    }
    // Categorical holiday flags: "0" / "a" / "b" / "c".
    match v {
        "a" | "b" | "c" => Some(1.0),
        _ => None,
    }
}

/// The Rossman file interleaves stores; the series is the lowest store id.
fn rossman_single_store(table: &mut Table) -> Result<()> {
    let Some(c) = table.column("Store") else {
        return Ok(());
    };
    let first = table
        .rows
        .iter()
        .filter_map(|r| r.get(c)?.parse::<u64>().ok())
        .min()
        .ok_or_else(|| Error::config("rossman data has no store ids"))?;
    let want = first.to_string();
    table.rows.retain(|r| r.get(c) == Some(&want));
    Ok(())
}

fn airline_calendar(timestamps: &[String]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut year = Vec::with_capacity(timestamps.len());
    let mut month = Vec::with_capacity(timestamps.len());
    for ts in timestamps {
        let (y, m) = ts
            .split_once('-')
            .and_then(|(y, m)| Some((y.parse::<f64>().ok()?, m.get(..2)?.parse::<f64>().ok()?)))
            .ok_or_else(|| Error::config(format!("airline timestamp `{ts}` is not YYYY-MM")))?;
        year.push(y);
        month.push(m);
    }
    Ok((year, month))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_airline() {
        let ds = Dataset::airline().unwrap();
        assert_eq!(ds.len(), 144);
        assert_eq!(ds.target.iter().sum::<f64>(), 40363.0);
        assert_eq!(ds.exo.len(), 2);
        assert_eq!(ds.exo[1].1[..3], [1.0, 2.0, 3.0]);
    }

    #[test]
    fn generic_drops_missing_and_duplicates() {
        let text = "t,y,x\n1,1.0,2\n2,,3\n3,2.0,NA\n1,1.0,2\n4,3.0,5\n";
        let ds = Recipe::Generic.parse(text, Some("y")).unwrap();
        assert_eq!(ds.target, vec![1.0, 3.0]);
        assert_eq!(ds.exo, vec![("x".to_string(), vec![2.0, 5.0])]);
    }

    #[test]
    fn air_quality_conventions() {
        let text = "Date;Time;CO(GT);T;;\n10/03/2004;18.00.00;2,6;13,6;;\n10/03/2004;19.00.00;-200;13,3;;\n10/03/2004;20.00.00;2,2;11,9;;\n";
        let ds = Recipe::AirQuality.parse(text, None).unwrap();
        assert_eq!(ds.target, vec![2.6, 2.2]);
        assert_eq!(ds.exo[0].0, "T");
    }

    #[test]
    fn rossman_one_store_ascending() {
        let text = "Store,DayOfWeek,Date,Sales,StateHoliday\n2,5,2015-07-31,10,0\n1,5,2015-07-31,5,0\n1,4,2015-07-30,4,a\n";
        let ds = Recipe::Rossman.parse(text, None).unwrap();
        assert_eq!(ds.timestamps, vec!["2015-07-30", "2015-07-31"]);
        assert_eq!(ds.target, vec![4.0, 5.0]);
        let holiday = &ds.exo.iter().find(|(n, _)| n == "StateHoliday").unwrap().1;
        assert_eq!(holiday, &vec![1.0, 0.0]);
    }

    #[test]
    fn sml2010_whitespace() {
        let text = "1:Date 2:Time 3:Temperature_Comedor_Sensor 4:Other\n13/03/2012 11:45 18.1875 17.8275\n13/03/2012 12:00 18.4633 18.1207\n";
        let ds = Recipe::Sml2010.parse(text, None).unwrap();
        assert_eq!(ds.target, vec![18.1875, 18.4633]);
        assert_eq!(ds.exo.len(), 1);
    }

    #[test]
    fn missing_target_is_config_error() {
        let err = Recipe::Generic.parse("t,y\n1,2\n", Some("z")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
