//! Ingestion and experiment runner for wide-format metro price panels, plus a
//! synthetic panel generator so the full protocol is testable without any
//! proprietary download.
//!
//! Input schema: one CSV row per metro; leading non-date columns identify the
//! metro (first column is the id, an optional second non-date column the
//! name); every remaining header that parses as an ISO month (YYYY-MM or
//! YYYY-MM-DD) is a date column. Cells are positive prices or empty.

use std::io::Read;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::basis::BasisKind;
use crate::density::Bandwidth;
use crate::forecast::dpdd_forecast;
use crate::koopman::TruncationRule;
use crate::sliding::{fit_dpdd_window, DpddFitConfig};
use crate::transport::{empirical_quantiles, uniform_u_grid, w2_quantile_grid, QuantileCurve};
use crate::war::fit_war;
use crate::{DpddError, LinkedPanel, Points, Result};

/// Rows missing more than this fraction of months are dropped.
const MAX_MISSING_FRACTION: f64 = 0.2;
const EVAL_U_POINTS: usize = 1024;

/// Calendar month, the panel's time unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn parse(s: &str) -> Option<YearMonth> {
        let mut parts = s.trim().split('-');
        let year: i32 = parts.next()?.parse().ok()?;
        let month: u32 = parts.next()?.parse().ok()?;
        if let Some(day) = parts.next() {
            let d: u32 = day.parse().ok()?;
            if d == 0 || d > 31 {
                return None;
            }
        }
        if parts.next().is_some() || !(1..=12).contains(&month) {
            return None;
        }
        Some(YearMonth { year, month })
    }

    fn index(&self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn months_until(&self, other: &YearMonth) -> i64 {
        other.index() - self.index()
    }

    pub fn plus(&self, months: i64) -> YearMonth {
        let idx = self.index() + months;
        YearMonth {
            year: idx.div_euclid(12) as i32,
            month: (idx.rem_euclid(12) + 1) as u32,
        }
    }
}

impl std::fmt::Display for YearMonth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

/// Parsed wide-format panel.
#[derive(Debug, Clone, PartialEq)]
pub struct MetroPanel {
    pub metro_ids: Vec<String>,
    pub dates: Vec<YearMonth>,
    /// Row-major m×T, gaps already filled.
    pub prices: Vec<f64>,
    pub dropped_rows: usize,
    pub provenance: String,
}

impl MetroPanel {
    pub fn n_metros(&self) -> usize {
        self.metro_ids.len()
    }

    pub fn n_months(&self) -> usize {
        self.dates.len()
    }

    pub fn price(&self, metro: usize, t: usize) -> f64 {
        self.prices[metro * self.dates.len() + t]
    }
}

/// Load a wide-format CSV panel from a path.
pub fn load_panel(path: &Path) -> Result<MetroPanel> {
    let file = std::fs::File::open(path)?;
    let provenance = path.display().to_string();
    load_panel_from_reader(file, provenance)
}

/// Load from any reader (used by tests and fixtures).
pub fn load_panel_from_reader(reader: impl Read, provenance: String) -> Result<MetroPanel> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = csv_reader
        .headers()
        .map_err(|_| DpddError::InvalidInput("malformed header row".into()))?
        .clone();
    if headers.is_empty() {
        return Err(DpddError::InvalidInput("empty file".into()));
    }

    let mut date_cols: Vec<(usize, YearMonth)> = Vec::new();
    let mut id_cols: Vec<usize> = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        match YearMonth::parse(h) {
            Some(ym) => date_cols.push((i, ym)),
            None => {
                if date_cols.is_empty() {
                    id_cols.push(i);
                }
            }
        }
    }
    if date_cols.is_empty() {
        return Err(DpddError::InvalidInput(
            "no date columns found in the header (expected YYYY-MM names)".into(),
        ));
    }
    let dates: Vec<YearMonth> = date_cols.iter().map(|(_, d)| *d).collect();
    for w in dates.windows(2) {
        if w[0].months_until(&w[1]) != 1 {
            return Err(DpddError::InvalidInput(format!(
                "date columns must be consecutive months, found {} then {}",
                w[0], w[1]
            )));
        }
    }

    let t_len = dates.len();
    let mut metro_ids = Vec::new();
    let mut raw_rows: Vec<Vec<Option<f64>>> = Vec::new();
    let mut dropped = 0usize;
    for (row_idx, record) in csv_reader.records().enumerate() {
        let record = record?;
        let id = id_cols
            .first()
            .and_then(|&c| record.get(c))
            .map(|s| s.to_string())
            .unwrap_or_else(|| format!("row{row_idx}"));
        let mut values: Vec<Option<f64>> = Vec::with_capacity(t_len);
        for (col, date) in &date_cols {
            let cell = record.get(*col).unwrap_or("").trim();
            if cell.is_empty() {
                values.push(None);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| {
                DpddError::InvalidInput(format!(
                    "non-numeric price in row '{id}' column {date}: '{cell}'"
                ))
            })?;
            if !(v > 0.0) {
                return Err(DpddError::InvalidInput(format!(
                    "non-positive price in row '{id}' column {date}: {v}"
                )));
            }
            values.push(Some(v));
        }
        let missing = values.iter().filter(|v| v.is_none()).count();
        if missing as f64 > MAX_MISSING_FRACTION * t_len as f64 {
            dropped += 1;
            continue;
        }
        metro_ids.push(id);
        raw_rows.push(values);
    }
    if metro_ids.is_empty() {
        return Err(DpddError::InvalidInput(
            "no usable rows after the missing-data filter".into(),
        ));
    }

    // fill gaps: linear interpolation inside, nearest value at the edges
    let mut prices = Vec::with_capacity(metro_ids.len() * t_len);
    for row in &raw_rows {
        prices.extend(fill_gaps(row));
    }
    Ok(MetroPanel {
        metro_ids,
        dates,
        prices,
        dropped_rows: dropped,
        provenance,
    })
}

fn fill_gaps(row: &[Option<f64>]) -> Vec<f64> {
    let n = row.len();
    let mut out = vec![f64::NAN; n];
    let known: Vec<usize> = (0..n).filter(|&i| row[i].is_some()).collect();
    debug_assert!(!known.is_empty());
    for i in 0..n {
        if let Some(v) = row[i] {
            out[i] = v;
            continue;
        }
        let next = known.iter().find(|&&k| k > i);
        let prev = known.iter().rev().find(|&&k| k < i);
        out[i] = match (prev, next) {
            (Some(&p), Some(&q)) => {
                let t = (i - p) as f64 / (q - p) as f64;
                row[p].unwrap() + t * (row[q].unwrap() - row[p].unwrap())
            }
            (Some(&p), None) => row[p].unwrap(),
            (None, Some(&q)) => row[q].unwrap(),
            (None, None) => unreachable!(),
        };
    }
    out
}

/// Convert prices to per-month relative distributions: each month's vector is
/// divided by its cross-sectional mean, so every month has mean exactly 1.
/// The metros' relative series become the panel's trajectories.
pub fn normalize_panel(panel: &MetroPanel) -> Result<LinkedPanel> {
    let m = panel.n_metros();
    let t_len = panel.n_months();
    if m < 2 {
        return Err(DpddError::InvalidInput(
            "normalization needs at least 2 metros per month".into(),
        ));
    }
    let mut means = vec![0.0; t_len];
    for metro in 0..m {
        for t in 0..t_len {
            means[t] += panel.price(metro, t);
        }
    }
    for v in &mut means {
        *v /= m as f64;
    }
    let mut paths = Vec::with_capacity(m);
    for metro in 0..m {
        let rel: Vec<f64> = (0..t_len).map(|t| panel.price(metro, t) / means[t]).collect();
        paths.push(Points::from_1d(rel));
    }
    LinkedPanel::new(paths)
}

/// A labelled date range for the summary breakdown.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VolatileRange {
    pub label: String,
    pub start: String,
    pub end: String,
}

/// Externally published benchmark means to print next to the measured ones.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ReferenceMeans {
    pub dpdd: f64,
    pub war: f64,
}

/// Experiment configuration.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct HousingConfig {
    /// Refit the DPDD model at every forecast origin instead of once.
    pub refit: bool,
    /// Select the KDE bandwidth by 5-fold cross-validation.
    pub bandwidth_cv: bool,
    pub volatile_ranges: Vec<VolatileRange>,
    pub reference: Option<ReferenceMeans>,
}

/// One evaluated test month.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonthResult {
    pub date: String,
    pub dpdd_w2_squared: Option<f64>,
    pub war_w2_squared: Option<f64>,
    pub persistence_w2_squared: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodOverview {
    pub mean: f64,
    pub max: f64,
    pub months: usize,
    pub range_means: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HousingReport {
    pub split: String,
    pub train_months: usize,
    pub test_months: usize,
    pub rows: Vec<MonthResult>,
    pub dpdd: MethodOverview,
    pub war: MethodOverview,
    pub persistence: MethodOverview,
    /// Present when the config supplies published reference means.
    pub reference: Option<ReferenceMeans>,
}

impl HousingReport {
    pub fn to_monthly_csv(&self) -> String {
        let mut out = String::from("date,method,w2_squared\n");
        for r in &self.rows {
            for (name, v) in [
                ("dpdd", r.dpdd_w2_squared),
                ("war", r.war_w2_squared),
                ("persistence", r.persistence_w2_squared),
            ] {
                if let Some(v) = v {
                    out.push_str(&format!("{},{},{}\n", r.date, name, v));
                }
            }
        }
        out
    }
}

struct MethodSeries {
    values: Vec<(usize, f64)>, // (test index, squared error)
}

impl MethodSeries {
    fn overview(&self, months: &[YearMonth], t_split: usize, ranges: &[VolatileRange]) -> MethodOverview {
        let vals: Vec<f64> = self.values.iter().map(|v| v.1).collect();
        let mean = if vals.is_empty() {
            f64::NAN
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        };
        let max = vals.iter().cloned().fold(f64::NAN, f64::max);
        let mut range_means = Vec::new();
        for r in ranges {
            let (start, end) = match (YearMonth::parse(&r.start), YearMonth::parse(&r.end)) {
                (Some(s), Some(e)) => (s, e),
                _ => continue,
            };
            let in_range: Vec<f64> = self
                .values
                .iter()
                .filter(|(i, _)| {
                    let d = months[t_split + i];
                    d >= start && d <= end
                })
                .map(|(_, v)| *v)
                .collect();
            if !in_range.is_empty() {
                range_means.push((
                    r.label.clone(),
                    in_range.iter().sum::<f64>() / in_range.len() as f64,
                ));
            }
        }
        MethodOverview {
            mean,
            max,
            months: vals.len(),
            range_means,
        }
    }
}

/// Run the full experiment: a global DPDD model (pooled training KDE,
/// degree-2 polynomial dictionary, top two modes, monthly steps), the
/// quantile-autoregression baseline, and a naive persistence baseline, each
/// producing rolling one-month-ahead forecasts over the test window.
pub fn run_housing_experiment(
    panel: &LinkedPanel,
    months: &[YearMonth],
    split: YearMonth,
    config: &HousingConfig,
) -> Result<HousingReport> {
    if months.len() != panel.t_len() {
        return Err(DpddError::InvalidInput(
            "month labels do not match the panel length".into(),
        ));
    }
    let t_split = months
        .iter()
        .position(|m| *m >= split)
        .ok_or_else(|| DpddError::InvalidInput("split leaves 0 test months".into()))?;
    if t_split >= months.len() {
        return Err(DpddError::InvalidInput("split leaves 0 test months".into()));
    }
    if t_split < 24 {
        return Err(DpddError::InvalidInput(format!(
            "split leaves only {t_split} training months (need >= 24)"
        )));
    }

    let cfg = DpddFitConfig {
        kind: BasisKind::Monomial,
        degree: 2,
        truncation: Some(TruncationRule::Fixed(2)),
        bandwidth: if config.bandwidth_cv {
            Bandwidth::CrossValidated
        } else {
            Bandwidth::Auto
        },
        dt: 1.0,
        ..Default::default()
    };

    // fixed-fit path: one model on the training window
    let fixed_model = if config.refit {
        None
    } else {
        Some(fit_dpdd_window(panel, 0..=t_split - 1, &cfg)?)
    };

    let u_fit = crate::war::default_u_grid(128);
    let training: Vec<Points> = (0..t_split).map(|t| panel.cross_section(t)).collect();
    let war_model = fit_war(&training, &u_fit, 0.95);

    let u_eval = uniform_u_grid(EVAL_U_POINTS);
    let mut rows = Vec::new();
    let mut dpdd_series = MethodSeries { values: Vec::new() };
    let mut war_series = MethodSeries { values: Vec::new() };
    let mut pers_series = MethodSeries { values: Vec::new() };

    for (i, t) in (t_split..months.len()).enumerate() {
        let observed = panel.cross_section(t);
        let q_obs = QuantileCurve::new(
            u_eval.clone(),
            empirical_quantiles(observed.as_1d(), &u_eval),
        )?;
        let origin = panel.cross_section(t - 1);
        let mut row_error: Option<String> = None;

        // DPDD
        let dpdd_val = (|| -> Result<f64> {
            let model_storage;
            let model = match &fixed_model {
                Some(m) => m,
                None => {
                    model_storage = fit_dpdd_window(panel, 0..=t - 1, &cfg)?;
                    &model_storage
                }
            };
            let grid = cfg.grid_for(model)?;
            let fc = dpdd_forecast(model, &origin, 1.0, &grid)?;
            let q_fc = QuantileCurve::new(u_eval.clone(), fc.quantiles_on(&u_eval))?;
            let w2 = w2_quantile_grid(&q_obs, &q_fc)?;
            Ok(w2 * w2)
        })();
        let dpdd_w2 = match dpdd_val {
            Ok(v) => {
                dpdd_series.values.push((i, v));
                Some(v)
            }
            Err(e) => {
                row_error = Some(format!("dpdd: {e}"));
                None
            }
        };

        // quantile autoregression
        let war_val = war_model.as_ref().map_err(|e| e.to_string()).and_then(|m| {
            (|| -> Result<f64> {
                let fc = m.forecast_from(&origin, 1)?;
                let vals: Vec<f64> = u_eval.iter().map(|&u| fc.eval(u)).collect();
                let q_fc = QuantileCurve::new(u_eval.clone(), vals)?;
                let w2 = w2_quantile_grid(&q_obs, &q_fc)?;
                Ok(w2 * w2)
            })()
            .map_err(|e| e.to_string())
        });
        let war_w2 = match war_val {
            Ok(v) => {
                war_series.values.push((i, v));
                Some(v)
            }
            Err(e) => {
                row_error.get_or_insert_with(String::new).push_str(&format!(" war: {e}"));
                None
            }
        };

        // persistence: last month's empirical distribution
        let q_prev = QuantileCurve::new(
            u_eval.clone(),
            empirical_quantiles(origin.as_1d(), &u_eval),
        )?;
        let pers = w2_quantile_grid(&q_obs, &q_prev)?;
        let pers_sq = pers * pers;
        pers_series.values.push((i, pers_sq));

        rows.push(MonthResult {
            date: months[t].to_string(),
            dpdd_w2_squared: dpdd_w2,
            war_w2_squared: war_w2,
            persistence_w2_squared: Some(pers_sq),
            error: row_error,
        });
    }

    Ok(HousingReport {
        split: split.to_string(),
        train_months: t_split,
        test_months: months.len() - t_split,
        dpdd: dpdd_series.overview(months, t_split, &config.volatile_ranges),
        war: war_series.overview(months, t_split, &config.volatile_ranges),
        persistence: pers_series.overview(months, t_split, &config.volatile_ranges),
        rows,
        reference: config.reference,
    })
}

/// Generate a stationary synthetic panel in the input schema: positive
/// prices whose relative values follow a mean-reverting AR(1) around 1.
/// Metros are exchangeable (no static level heterogeneity) and the
/// autocorrelation is moderate, so consecutive cross-sections carry mostly
/// fresh sampling noise.
pub fn synthetic_panel(n_metros: usize, n_months: usize, seed: u64) -> MetroPanel {
    let start = YearMonth { year: 2010, month: 1 };
    let dates: Vec<YearMonth> = (0..n_months).map(|i| start.plus(i as i64)).collect();
    let (a, s) = (0.25, 0.12);
    let innov = s * (1.0f64 - a * a).sqrt();
    let base = 150_000.0;
    let mut prices = Vec::with_capacity(n_metros * n_months);
    let mut metro_ids = Vec::with_capacity(n_metros);
    for metro in 0..n_metros {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(metro as u64 + 1);
        let mut z: f64 = 0.0;
        for _ in 0..100 {
            let e: f64 = StandardNormal.sample(&mut rng);
            z = a * z + innov * e;
        }
        for _ in 0..n_months {
            let e: f64 = StandardNormal.sample(&mut rng);
            z = a * z + innov * e;
            prices.push(base * (1.0 + z).max(0.05));
        }
        metro_ids.push(format!("M{metro:04}"));
    }
    MetroPanel {
        metro_ids,
        dates,
        prices,
        dropped_rows: 0,
        provenance: format!("synthetic(seed={seed})"),
    }
}

/// Serialize a panel back to the wide CSV schema.
pub fn panel_to_csv(panel: &MetroPanel) -> String {
    let mut out = String::from("RegionID,RegionName");
    for d in &panel.dates {
        out.push(',');
        out.push_str(&d.to_string());
    }
    out.push('\n');
    for (i, id) in panel.metro_ids.iter().enumerate() {
        out.push_str(id);
        out.push(',');
        out.push_str(&format!("{id} metro"));
        for t in 0..panel.n_months() {
            out.push(',');
            out.push_str(&panel.price(i, t).to_string());
        }
        out.push('\n');
    }
    out
}
