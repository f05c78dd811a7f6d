//! Daily event time series, rolling means, early warnings and disease
//! profiles.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use chrono::{DateTime, Days, NaiveDate, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::PredictionSet;
use crate::ontology::EventType;

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error("post {0:?} has no timestamp")]
    MissingTimestamp(String),
    #[error("rolling window must be at least 1 day")]
    BadWindow,
    #[error("series has {len} days but the rule needs at least {needed}")]
    SeriesTooShort { len: usize, needed: usize },
    #[error("invalid warning parameters: {0}")]
    BadParams(String),
    #[error("malformed CSV")]
    Csv(#[from] csv::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Mention counts per UTC day, overall and per event type. Days are
/// contiguous from `start_date`; an empty series has no start date.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EventTimeSeries {
    pub start_date: Option<NaiveDate>,
    pub overall: Vec<u64>,
    pub per_event: BTreeMap<EventType, Vec<u64>>,
}

impl EventTimeSeries {
    /// Builds a series whose overall counts are the sum of the per-event rows.
    pub fn from_event_counts(start_date: NaiveDate, per_event: BTreeMap<EventType, Vec<u64>>) -> Self {
        let len = per_event.values().map(Vec::len).max().unwrap_or(0);
        let mut full = BTreeMap::new();
        let mut overall = vec![0u64; len];
        for event in EventType::ALL {
            let mut row = per_event.get(&event).cloned().unwrap_or_default();
            row.resize(len, 0);
            for (o, c) in overall.iter_mut().zip(&row) {
                *o += c;
            }
            full.insert(event, row);
        }
        EventTimeSeries {
            start_date: (len > 0).then_some(start_date),
            overall,
            per_event: full,
        }
    }

    /// A series with only overall counts (every event row zero).
    pub fn from_overall(start_date: NaiveDate, overall: Vec<u64>) -> Self {
        let len = overall.len();
        EventTimeSeries {
            start_date: (len > 0).then_some(start_date),
            per_event: EventType::ALL.into_iter().map(|e| (e, vec![0; len])).collect(),
            overall,
        }
    }

    pub fn len(&self) -> usize {
        self.overall.len()
    }

    pub fn is_empty(&self) -> bool {
        self.overall.is_empty()
    }

    pub fn date(&self, day: usize) -> Option<NaiveDate> {
        self.start_date?.checked_add_days(Days::new(day as u64))
    }

    pub fn event(&self, event: EventType) -> &[u64] {
        self.per_event.get(&event).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn total(&self) -> u64 {
        self.overall.iter().sum()
    }
}

/// Buckets mentions by UTC day. The range runs from the earliest to the
/// latest post in `preds` (with or without mentions), gaps zero-filled.
pub fn aggregate_daily(
    preds: &[PredictionSet],
    timestamps: &HashMap<String, DateTime<Utc>>,
) -> Result<EventTimeSeries, MonitorError> {
    let days: Vec<(NaiveDate, [u64; EventType::COUNT])> = preds
        .par_iter()
        .map(|set| {
            let ts = timestamps
                .get(&set.post_id)
                .ok_or_else(|| MonitorError::MissingTimestamp(set.post_id.clone()))?;
            let mut counts = [0u64; EventType::COUNT];
            for m in &set.mentions {
                counts[m.event.index()] += 1;
            }
            Ok((ts.date_naive(), counts))
        })
        .collect::<Result<_, MonitorError>>()?;

    let Some(first) = days.iter().map(|(d, _)| *d).min() else {
        return Ok(EventTimeSeries::default());
    };
    let last = days.iter().map(|(d, _)| *d).max().unwrap_or(first);
    let len = (last - first).num_days() as usize + 1;

    let rows = days
        .par_iter()
        .fold(
            || vec![[0u64; EventType::COUNT]; len],
            |mut acc, (date, counts)| {
                let i = (*date - first).num_days() as usize;
                for (a, c) in acc[i].iter_mut().zip(counts) {
                    *a += c;
                }
                acc
            },
        )
        .reduce(
            || vec![[0u64; EventType::COUNT]; len],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    for (p, q) in x.iter_mut().zip(y) {
                        *p += q;
                    }
                }
                a
            },
        );

    let per_event = EventType::ALL
        .into_iter()
        .map(|e| (e, rows.iter().map(|r| r[e.index()]).collect()))
        .collect();
    Ok(EventTimeSeries::from_event_counts(first, per_event))
}

/// Mean of the trailing `w` days; `None` for the first `w - 1` days.
pub fn rolling_mean(counts: &[u64], w: usize) -> Result<Vec<Option<f64>>, MonitorError> {
    if w < 1 {
        return Err(MonitorError::BadWindow);
    }
    let mut out = Vec::with_capacity(counts.len());
    let mut sum: u128 = 0;
    for (t, &c) in counts.iter().enumerate() {
        sum += c as u128;
        if t >= w {
            sum -= counts[t - w] as u128;
        }
        out.push((t + 1 >= w).then(|| sum as f64 / w as f64));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarningParams {
    pub w: usize,
    pub b: usize,
    pub k: f64,
    pub min_events: u64,
    pub cooldown: usize,
}

impl Default for WarningParams {
    fn default() -> Self {
        WarningParams {
            w: 7,
            b: 28,
            k: 2.0,
            min_events: 5,
            cooldown: 14,
        }
    }
}

impl WarningParams {
    pub fn validate(&self) -> Result<(), MonitorError> {
        if self.w < 1 {
            return Err(MonitorError::BadParams("w must be at least 1".into()));
        }
        if self.b < 1 {
            return Err(MonitorError::BadParams("b must be at least 1".into()));
        }
        if !(self.k.is_finite() && self.k >= 0.0) {
            return Err(MonitorError::BadParams(format!("k must be finite and non-negative, got {}", self.k)));
        }
        Ok(())
    }

    fn rule(&self) -> WarningRule {
        WarningRule {
            w: self.w,
            b: self.b,
            k: self.k,
            min_events: self.min_events,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarningRule {
    pub w: usize,
    pub b: usize,
    pub k: f64,
    pub min_events: u64,
}

/// One warning episode. Statistics are those of its first firing day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarningSignal {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<EventType>,
    pub episode_id: usize,
    pub fired_on: NaiveDate,
    pub last_fired_on: NaiveDate,
    pub days_fired: usize,
    pub window_mean: f64,
    pub baseline_mean: f64,
    pub baseline_std: f64,
    pub rule: WarningRule,
}

/// Statistics at one evaluated day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DayStats {
    pub day: usize,
    pub window_mean: f64,
    pub baseline_mean: f64,
    /// Population standard deviation of the baseline days.
    pub baseline_std: f64,
}

/// `D² ≥ k²·w²·V` with `D ≥ 0`, exact in integers when `k²` is integral.
fn exceeds(d: i128, k: f64, w: i128, v: i128) -> bool {
    if d < 0 {
        return false;
    }
    if v == 0 {
        return d > 0;
    }
    let k2 = k * k;
    if k2.fract() == 0.0 && k2 < 1e18 {
        let lhs = d.checked_mul(d);
        let rhs = (k2 as i128).checked_mul(w * w).and_then(|x| x.checked_mul(v));
        if let (Some(l), Some(r)) = (lhs, rhs) {
            return l >= r;
        }
    }
    d as f64 >= k * w as f64 * (v as f64).sqrt()
}

/// Days on which the rule fires, with their statistics.
///
/// Day `t` (needing `t ≥ w + b − 1`) fires when the mean of days
/// `t−w+1..=t` is at least `μ + k·σ` of days `t−w−b+1..=t−w` and at least
/// `min_events`. A zero-variance baseline requires the window mean to be
/// strictly above `μ`.
pub fn fired_days(counts: &[u64], params: &WarningParams) -> Result<Vec<DayStats>, MonitorError> {
    params.validate()?;
    let (w, b) = (params.w, params.b);
    if counts.len() < w + b {
        return Err(MonitorError::SeriesTooShort {
            len: counts.len(),
            needed: w + b,
        });
    }
    let prefix: Vec<i128> = std::iter::once(0)
        .chain(counts.iter().scan(0i128, |s, &c| {
            *s += c as i128;
            Some(*s)
        }))
        .collect();
    let prefix_sq: Vec<i128> = std::iter::once(0)
        .chain(counts.iter().scan(0i128, |s, &c| {
            *s += (c as i128) * (c as i128);
            Some(*s)
        }))
        .collect();

    let (wi, bi) = (w as i128, b as i128);
    let mut out = Vec::new();
    for t in (w + b - 1)..counts.len() {
        let s_w = prefix[t + 1] - prefix[t + 1 - w];
        let lo = t + 1 - w - b;
        let hi = t + 1 - w;
        let s_b = prefix[hi] - prefix[lo];
        let sq_b = prefix_sq[hi] - prefix_sq[lo];
        if s_w < params.min_events as i128 * wi {
            continue;
        }
        let d = s_w * bi - s_b * wi;
        let v = bi * sq_b - s_b * s_b;
        if exceeds(d, params.k, wi, v) {
            out.push(DayStats {
                day: t,
                window_mean: s_w as f64 / w as f64,
                baseline_mean: s_b as f64 / b as f64,
                baseline_std: (v as f64).sqrt() / b as f64,
            });
        }
    }
    Ok(out)
}

/// Groups firing days into episodes: a firing at most `cooldown` days after
/// the previous firing joins that firing's episode.
pub fn episodes(days: &[DayStats], cooldown: usize) -> Vec<Vec<DayStats>> {
    let mut out: Vec<Vec<DayStats>> = Vec::new();
    for d in days {
        match out.last_mut() {
            Some(ep) if d.day - ep.last().map_or(d.day, |p| p.day) <= cooldown => ep.push(*d),
            _ => out.push(vec![*d]),
        }
    }
    out
}

fn signals_for(
    series: &EventTimeSeries,
    counts: &[u64],
    event: Option<EventType>,
    params: &WarningParams,
) -> Result<Vec<WarningSignal>, MonitorError> {
    let days = fired_days(counts, params)?;
    let start = series.start_date.unwrap_or_default();
    let date = |day: usize| start + Days::new(day as u64);
    Ok(episodes(&days, params.cooldown)
        .into_iter()
        .enumerate()
        .map(|(episode_id, ep)| {
            let first = ep[0];
            let last = ep[ep.len() - 1];
            WarningSignal {
                event,
                episode_id,
                fired_on: date(first.day),
                last_fired_on: date(last.day),
                days_fired: ep.len(),
                window_mean: first.window_mean,
                baseline_mean: first.baseline_mean,
                baseline_std: first.baseline_std,
                rule: params.rule(),
            }
        })
        .collect())
}

/// Warning episodes on the overall series.
pub fn detect_warnings(series: &EventTimeSeries, params: &WarningParams) -> Result<Vec<WarningSignal>, MonitorError> {
    signals_for(series, &series.overall, None, params)
}

/// Warning episodes on each event's own series, in canonical event order.
pub fn detect_event_warnings(
    series: &EventTimeSeries,
    params: &WarningParams,
) -> Result<Vec<WarningSignal>, MonitorError> {
    let mut out = Vec::new();
    for event in EventType::ALL {
        out.extend(signals_for(series, series.event(event), Some(event), params)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiseaseProfile {
    pub shares: BTreeMap<EventType, f64>,
    pub counts: BTreeMap<EventType, u64>,
    pub total_mentions: u64,
}

impl DiseaseProfile {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("event,mentions,share\n");
        for event in EventType::ALL {
            out.push_str(&format!("{},{},{}\n", event, self.counts[&event], self.shares[&event]));
        }
        out
    }
}

/// Percentage of mentions per event type.
pub fn disease_profile(preds: &[PredictionSet]) -> DiseaseProfile {
    let mut counts: BTreeMap<EventType, u64> = EventType::ALL.into_iter().map(|e| (e, 0)).collect();
    for m in preds.iter().flat_map(|p| &p.mentions) {
        *counts.entry(m.event).or_default() += 1;
    }
    let total: u64 = counts.values().sum();
    let shares = counts
        .iter()
        .map(|(e, &c)| {
            let s = if total == 0 { 0.0 } else { 100.0 * c as f64 / total as f64 };
            (*e, s)
        })
        .collect();
    DiseaseProfile {
        shares,
        counts,
        total_mentions: total,
    }
}

fn header(extra: Option<&str>) -> Vec<String> {
    let mut h = vec!["date".to_string(), "overall".to_string()];
    h.extend(EventType::ALL.iter().map(|e| e.to_string()));
    if let Some(x) = extra {
        h.push(x.to_string());
    }
    h
}

/// Writes `date,overall,infect,...,death`, optionally with a
/// `reported_cases` column (blank on days without a report).
pub fn write_series_csv<W: Write>(
    series: &EventTimeSeries,
    reported: Option<&BTreeMap<NaiveDate, u64>>,
    out: W,
) -> Result<(), MonitorError> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(header(reported.map(|_| "reported_cases")))?;
    for t in 0..series.len() {
        let date = series.date(t).unwrap_or_default();
        let mut row = vec![date.to_string(), series.overall[t].to_string()];
        row.extend(EventType::ALL.iter().map(|e| series.event(*e)[t].to_string()));
        if let Some(r) = reported {
            row.push(r.get(&date).map(u64::to_string).unwrap_or_default());
        }
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Rolling means for every column of the series, blank where undefined.
pub fn write_rolling_csv<W: Write>(series: &EventTimeSeries, w: usize, out: W) -> Result<(), MonitorError> {
    let mut columns = vec![rolling_mean(&series.overall, w)?];
    for e in EventType::ALL {
        columns.push(rolling_mean(series.event(e), w)?);
    }
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(header(None))?;
    for t in 0..series.len() {
        let mut row = vec![series.date(t).unwrap_or_default().to_string()];
        row.extend(columns.iter().map(|c| c[t].map(|v| v.to_string()).unwrap_or_default()));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads a series written by [`write_series_csv`]. Extra columns are ignored;
/// dates must be contiguous.
pub fn read_series_csv<R: Read>(input: R) -> Result<EventTimeSeries, MonitorError> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let expected = header(None);
    if headers.len() < expected.len() || headers.iter().zip(&expected).any(|(a, b)| a != b) {
        return Err(MonitorError::Parse {
            line: 1,
            message: format!("expected header starting {}", expected.join(",")),
        });
    }
    let mut start = None;
    let mut overall = Vec::new();
    let mut rows: BTreeMap<EventType, Vec<u64>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |message: String| MonitorError::Parse { line, message };
        let date: NaiveDate = rec[0].parse().map_err(|e| bad(format!("date {:?}: {e}", &rec[0])))?;
        let first = *start.get_or_insert(date);
        if (date - first).num_days() != i as i64 {
            return Err(bad(format!("date {date} breaks the daily sequence")));
        }
        let num = |j: usize| rec[j].parse::<u64>().map_err(|e| bad(format!("column {}: {e}", expected[j])));
        overall.push(num(1)?);
        for (j, e) in EventType::ALL.into_iter().enumerate() {
            rows.entry(e).or_default().push(num(j + 2)?);
        }
    }
    let series = match start {
        Some(s) => EventTimeSeries {
            start_date: Some(s),
            overall,
            per_event: rows,
        },
        None => EventTimeSeries::default(),
    };
    Ok(series)
}

/// Reads `date,cases` rows of officially reported case counts.
pub fn read_reported_cases<R: Read>(input: R) -> Result<BTreeMap<NaiveDate, u64>, MonitorError> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |message: String| MonitorError::Parse { line: i + 2, message };
        if rec.len() < 2 {
            return Err(bad("expected date,cases".into()));
        }
        let date: NaiveDate = rec[0].trim().parse().map_err(|e| bad(format!("date: {e}")))?;
        let cases: u64 = rec[1].trim().parse().map_err(|e| bad(format!("cases: {e}")))?;
        *out.entry(date).or_default() += cases;
    }
    Ok(out)
}
