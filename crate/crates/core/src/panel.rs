//! Balanced panels: storage, CSV ingestion, the within transformation, lagged
//! designs and half-panel splits.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// A balanced `n x T` panel with an outcome and `p` regressors.
///
/// Values are stored row-major by individual, then period, then regressor.
/// A raw simulated series may carry `p = 0`; estimators require `p >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    n: usize,
    t: usize,
    p: usize,
    y: Vec<f64>,
    x: Vec<f64>,
    ids: Vec<String>,
    periods: Vec<String>,
    regressor_names: Vec<String>,
    design: Option<LagSpec>,
}

impl PanelDataset {
    pub fn new(
        ids: Vec<String>,
        periods: Vec<String>,
        regressor_names: Vec<String>,
        y: Vec<f64>,
        x: Vec<f64>,
    ) -> Result<Self> {
        let n = ids.len();
        let t = periods.len();
        let p = regressor_names.len();
        if n < 2 {
            return Err(Error::InvalidPanel(format!(
                "need at least 2 individuals, got {n}"
            )));
        }
        if t < 2 {
            return Err(Error::InvalidPanel(format!(
                "need at least 2 periods, got {t}"
            )));
        }
        if y.len() != n * t || x.len() != n * t * p {
            return Err(Error::InvalidPanel(format!(
                "array sizes y={} x={} do not match n={n}, T={t}, p={p}",
                y.len(),
                x.len()
            )));
        }
        if let Some(k) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidPanel(format!(
                "non-finite outcome at (id={}, t={})",
                ids[k / t],
                periods[k % t]
            )));
        }
        if let Some(k) = x.iter().position(|v| !v.is_finite()) {
            let cell = k / p.max(1);
            return Err(Error::InvalidPanel(format!(
                "non-finite regressor at (id={}, t={})",
                ids[cell / t],
                periods[cell % t]
            )));
        }
        Ok(Self {
            n,
            t,
            p,
            y,
            x,
            ids,
            periods,
            regressor_names,
            design: None,
        })
    }

    /// Builds a panel with default labels (`1..=n`, `1..=T`, `x1..xp`).
    pub fn from_fn(
        n: usize,
        t: usize,
        p: usize,
        mut y: impl FnMut(usize, usize) -> f64,
        mut x: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut ys = Vec::with_capacity(n * t);
        let mut xs = Vec::with_capacity(n * t * p);
        for i in 0..n {
            for s in 0..t {
                ys.push(y(i, s));
                for a in 0..p {
                    xs.push(x(i, s, a));
                }
            }
        }
        Self::new(
            (1..=n).map(|i| i.to_string()).collect(),
            (1..=t).map(|s| s.to_string()).collect(),
            (1..=p).map(|a| format!("x{a}")).collect(),
            ys,
            xs,
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of time periods.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn y(&self, i: usize, s: usize) -> f64 {
        self.y[i * self.t + s]
    }

    #[inline]
    pub fn x(&self, i: usize, s: usize, a: usize) -> f64 {
        self.x[(i * self.t + s) * self.p + a]
    }

    pub fn y_row(&self, i: usize) -> &[f64] {
        &self.y[i * self.t..(i + 1) * self.t]
    }

    /// Regressors of individual `i`, `T x p` row-major.
    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.t * self.p..(i + 1) * self.t * self.p]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn periods(&self) -> &[String] {
        &self.periods
    }

    pub fn regressor_names(&self) -> &[String] {
        &self.regressor_names
    }

    /// The lag specification that produced this design, when known.
    pub fn design(&self) -> Option<&LagSpec> {
        self.design.as_ref()
    }

    pub fn with_design(mut self, design: Option<LagSpec>) -> Self {
        self.design = design;
        self
    }

    /// Returns a copy with the outcome replaced elementwise.
    pub fn map_y(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            for s in 0..self.t {
                out.y[i * self.t + s] = f(i, s, self.y(i, s));
            }
        }
        out
    }

    /// Returns a copy with the regressors replaced elementwise.
    pub fn map_x(&self, mut f: impl FnMut(usize, usize, usize, f64) -> f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            for s in 0..self.t {
                for a in 0..self.p {
                    out.x[(i * self.t + s) * self.p + a] = f(i, s, a, self.x(i, s, a));
                }
            }
        }
        out
    }

    /// Reorders individuals: row `k` of the result is individual `order[k]`.
    pub fn permute_individuals(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.n];
        let valid = order.len() == self.n
            && order
                .iter()
                .all(|&i| i < self.n && !std::mem::replace(&mut seen[i], true));
        if !valid {
            return Err(Error::InvalidArgument(
                "order is not a permutation of the individuals".into(),
            ));
        }
        let mut out = self.clone();
        out.y.clear();
        out.x.clear();
        out.ids.clear();
        for &i in order {
            out.y.extend_from_slice(self.y_row(i));
            out.x.extend_from_slice(self.x_row(i));
            out.ids.push(self.ids[i].clone());
        }
        Ok(out)
    }

    /// Keeps the half-open period range `range`.
    pub fn select_periods(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.end > self.t || range.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "period range {range:?} invalid for T={}",
                self.t
            )));
        }
        let mut y = Vec::with_capacity(self.n * range.len());
        let mut x = Vec::with_capacity(self.n * range.len() * self.p);
        for i in 0..self.n {
            y.extend_from_slice(&self.y_row(i)[range.clone()]);
            x.extend_from_slice(&self.x_row(i)[range.start * self.p..range.end * self.p]);
        }
        Ok(Self {
            n: self.n,
            t: range.len(),
            p: self.p,
            y,
            x,
            ids: self.ids.clone(),
            periods: self.periods[range].to_vec(),
            regressor_names: self.regressor_names.clone(),
            design: self.design.clone(),
        })
    }

    pub(crate) fn require_regressors(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::InvalidPanel("panel has no regressors".into()));
        }
        Ok(())
    }
}

/// Individual-demeaned data.
#[derive(Debug, Clone, PartialEq)]
pub struct WithinView {
    pub n: usize,
    pub t: usize,
    pub p: usize,
    /// `n x T`, row-major.
    pub y_dot: Vec<f64>,
    /// `n x T x p`, row-major.
    pub x_dot: Vec<f64>,
    pub y_bar: Vec<f64>,
    /// `n x p`, row-major.
    pub x_bar: Vec<f64>,
}

impl WithinView {
    #[inline]
    pub fn y_dot(&self, i: usize, s: usize) -> f64 {
        self.y_dot[i * self.t + s]
    }

    #[inline]
    pub fn x_dot(&self, i: usize, s: usize, a: usize) -> f64 {
        self.x_dot[(i * self.t + s) * self.p + a]
    }
}

/// Subtracts each individual's time average from its outcome and regressors.
pub fn within_transform(ds: &PanelDataset) -> WithinView {
    let (n, t, p) = (ds.n, ds.t, ds.p);
    let mut y_dot = Vec::with_capacity(n * t);
    let mut x_dot = Vec::with_capacity(n * t * p);
    let mut y_bar = Vec::with_capacity(n);
    let mut x_bar = Vec::with_capacity(n * p);
    let mut acc = vec![CompensatedSum::new(); p];
    for i in 0..n {
        let yr = ds.y_row(i);
        let mut ys = CompensatedSum::new();
        yr.iter().for_each(|&v| ys.add(v));
        let ym = ys.value() / t as f64;
        y_bar.push(ym);
        y_dot.extend(yr.iter().map(|v| v - ym));

        if p == 0 {
            continue;
        }
        let xr = ds.x_row(i);
        acc.iter_mut().for_each(|a| *a = CompensatedSum::new());
        for row in xr.chunks_exact(p) {
            for (a, v) in row.iter().enumerate() {
                acc[a].add(*v);
            }
        }
        let start = x_bar.len();
        x_bar.extend(acc.iter().map(|a| a.value() / t as f64));
        let means = &x_bar[start..];
        for row in xr.chunks_exact(p) {
            x_dot.extend(row.iter().zip(means).map(|(v, m)| v - m));
        }
    }
    WithinView {
        n,
        t,
        p,
        y_dot,
        x_dot,
        y_bar,
        x_bar,
    }
}

/// Which lags of the outcome and regressors enter a fitting design.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LagSpec {
    /// Positive lags of the outcome.
    pub outcome_lags: Vec<usize>,
    /// `(source regressor column, lag)` pairs; lag 0 is the contemporaneous value.
    pub regressor_lags: Vec<(usize, usize)>,
}

impl LagSpec {
    /// The panel AR(1) design: one outcome lag and nothing else.
    pub fn ar1() -> Self {
        Self {
            outcome_lags: vec![1],
            regressor_lags: Vec::new(),
        }
    }

    pub fn is_pure_ar1(&self) -> bool {
        self.outcome_lags == [1] && self.regressor_lags.is_empty()
    }

    pub fn max_lag(&self) -> usize {
        self.outcome_lags
            .iter()
            .copied()
            .chain(self.regressor_lags.iter().map(|&(_, l)| l))
            .max()
            .unwrap_or(0)
    }

    pub fn width(&self) -> usize {
        self.outcome_lags.len() + self.regressor_lags.len()
    }

    /// Names of the design columns, in order.
    pub fn column_names(&self, source_names: &[String]) -> Vec<String> {
        let mut names: Vec<String> = self
            .outcome_lags
            .iter()
            .map(|l| format!("y_lag{l}"))
            .collect();
        for &(src, lag) in &self.regressor_lags {
            let base = source_names
                .get(src)
                .cloned()
                .unwrap_or_else(|| format!("x{}", src + 1));
            names.push(if lag == 0 {
                base
            } else {
                format!("{base}_lag{lag}")
            });
        }
        names
    }
}

impl fmt::Display for LagSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .outcome_lags
            .iter()
            .map(|l| format!("y:{l}"))
            .chain(
                self.regressor_lags
                    .iter()
                    .map(|(s, l)| format!("x{}:{l}", s + 1)),
            )
            .collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for LagSpec {
    type Err = Error;

    /// Grammar: `y:1`, `y:1,x1:1`, `y:1,y:2,x2:0`; `ar1` abbreviates `y:1`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("ar1") {
            return Ok(Self::ar1());
        }
        let mut spec = LagSpec {
            outcome_lags: Vec::new(),
            regressor_lags: Vec::new(),
        };
        for term in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (var, lag) = term
                .split_once(':')
                .ok_or_else(|| Error::parse("lag spec", s, format!("term {term:?} lacks ':'")))?;
            let lag: usize = lag
                .trim()
                .parse()
                .map_err(|_| Error::parse("lag spec", s, format!("bad lag in {term:?}")))?;
            let var = var.trim();
            if var == "y" {
                if lag == 0 {
                    return Err(Error::parse("lag spec", s, "outcome lags must be positive"));
                }
                spec.outcome_lags.push(lag);
            } else if let Some(col) = var.strip_prefix('x') {
                let col: usize =
                    col.parse().ok().filter(|&c| c >= 1).ok_or_else(|| {
                        Error::parse("lag spec", s, format!("bad regressor {var:?}"))
                    })?;
                spec.regressor_lags.push((col - 1, lag));
            } else {
                return Err(Error::parse(
                    "lag spec",
                    s,
                    format!("unknown variable {var:?}"),
                ));
            }
        }
        if spec.width() == 0 {
            return Err(Error::parse("lag spec", s, "no regressors requested"));
        }
        Ok(spec)
    }
}

impl Serialize for LagSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LagSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// Builds the fitting design: row `t` pairs `y_it` with the requested lags.
pub fn build_lagged_design(ds: &PanelDataset, spec: &LagSpec) -> Result<PanelDataset> {
    if spec.width() == 0 {
        return Err(Error::InvalidArgument(
            "lag spec requests no regressors".into(),
        ));
    }
    if let Some(&(src, _)) = spec.regressor_lags.iter().find(|(src, _)| *src >= ds.p) {
        return Err(Error::InvalidArgument(format!(
            "lag spec references regressor x{} but the panel has {}",
            src + 1,
            ds.p
        )));
    }
    let max_lag = spec.max_lag();
    if max_lag >= ds.t || ds.t - max_lag < 2 {
        return Err(Error::LagTooLarge {
            max_lag,
            periods: ds.t,
        });
    }
    let t_eff = ds.t - max_lag;
    let p = spec.width();
    let mut y = Vec::with_capacity(ds.n * t_eff);
    let mut x = Vec::with_capacity(ds.n * t_eff * p);
    for i in 0..ds.n {
        for s in max_lag..ds.t {
            y.push(ds.y(i, s));
            for &l in &spec.outcome_lags {
                x.push(ds.y(i, s - l));
            }
            for &(src, l) in &spec.regressor_lags {
                x.push(ds.x(i, s - l, src));
            }
        }
    }
    Ok(PanelDataset {
        n: ds.n,
        t: t_eff,
        p,
        y,
        x,
        ids: ds.ids.clone(),
        periods: ds.periods[max_lag..].to_vec(),
        regressor_names: spec.column_names(&ds.regressor_names),
        design: Some(spec.clone()),
    })
}

/// Period ranges of the two half panels.
///
/// Even `T` gives disjoint halves; odd `T` gives halves of length
/// `(T + 1) / 2` that share the middle period.
pub fn half_ranges(t: usize) -> Result<(std::ops::Range<usize>, std::ops::Range<usize>)> {
    if t < 4 {
        return Err(Error::TooShort {
            periods: t,
            required: 4,
        });
    }
    Ok((0..t.div_ceil(2), t / 2..t))
}

pub fn split_halves(ds: &PanelDataset) -> Result<(PanelDataset, PanelDataset)> {
    let (first, second) = half_ranges(ds.t)?;
    Ok((ds.select_periods(first)?, ds.select_periods(second)?))
}

/// Orders labels numerically when every label parses as a number, otherwise lexically.
fn label_order(labels: &[String]) -> Vec<usize> {
    let numeric: Option<Vec<f64>> = labels
        .iter()
        .map(|l| l.trim().parse::<f64>().ok())
        .collect();
    let mut idx: Vec<usize> = (0..labels.len()).collect();
    match numeric {
        Some(v) => idx.sort_by(|&a, &b| {
            v[a].partial_cmp(&v[b])
                .unwrap_or(Ordering::Equal)
                .then_with(|| labels[a].cmp(&labels[b]))
        }),
        None => idx.sort_by(|&a, &b| labels[a].cmp(&labels[b])),
    }
    idx
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<PanelDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file)
}

/// Reads the `id,t,y,x1,...,xp` format.
pub fn read_csv<R: Read>(reader: R) -> Result<PanelDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .clone();
    if header.len() < 3 || &header[0] != "id" || &header[1] != "t" || &header[2] != "y" {
        return Err(Error::Csv(format!(
            "header must start with id,t,y; got {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let names: Vec<String> = header.iter().skip(3).map(str::to_string).collect();
    let p = names.len();

    let mut id_index: HashMap<String, usize> = HashMap::new();
    let mut t_index: HashMap<String, usize> = HashMap::new();
    let mut ids = Vec::new();
    let mut periods = Vec::new();
    let mut cells: HashMap<(usize, usize), Vec<f64>> = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        if record.len() != header.len() {
            return Err(Error::Csv(format!(
                "row has {} fields, header has {}",
                record.len(),
                header.len()
            )));
        }
        let id = record[0].to_string();
        let t = record[1].to_string();
        let mut values = Vec::with_capacity(p + 1);
        for col in 2..record.len() {
            let raw = &record[col];
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(Error::NonNumeric {
                        id,
                        t,
                        column: header[col].to_string(),
                        value: raw.to_string(),
                    })
                }
            }
        }
        let ii = *id_index.entry(id.clone()).or_insert_with(|| {
            ids.push(id.clone());
            ids.len() - 1
        });
        let ti = *t_index.entry(t.clone()).or_insert_with(|| {
            periods.push(t.clone());
            periods.len() - 1
        });
        if cells.insert((ii, ti), values).is_some() {
            return Err(Error::DuplicateRow { id, t });
        }
    }
    let id_order = label_order(&ids);
    let t_order = label_order(&periods);
    let mut y = Vec::with_capacity(ids.len() * periods.len());
    let mut x = Vec::with_capacity(ids.len() * periods.len() * p);
    for &ii in &id_order {
        for &ti in &t_order {
            let values = cells.get(&(ii, ti)).ok_or_else(|| Error::MissingCell {
                id: ids[ii].clone(),
                t: periods[ti].clone(),
            })?;
            y.push(values[0]);
            x.extend_from_slice(&values[1..]);
        }
    }
    PanelDataset::new(
        id_order.iter().map(|&i| ids[i].clone()).collect(),
        t_order.iter().map(|&i| periods[i].clone()).collect(),
        names,
        y,
        x,
    )
}

/// Writes the panel in the `id,t,y,x1,...,xp` format with round-trip float formatting.
pub fn write_csv<W: Write>(ds: &PanelDataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string(), "t".to_string(), "y".to_string()];
    header.extend(ds.regressor_names.iter().cloned());
    wtr.write_record(&header)
        .map_err(|e| Error::Csv(e.to_string()))?;
    let mut row = Vec::with_capacity(header.len());
    for i in 0..ds.n {
        for s in 0..ds.t {
            row.clear();
            row.push(ds.ids[i].clone());
            row.push(ds.periods[s].clone());
            row.push(ds.y(i, s).to_string());
            for a in 0..ds.p {
                row.push(ds.x(i, s, a).to_string());
            }
            wtr.write_record(&row)
                .map_err(|e| Error::Csv(e.to_string()))?;
        }
    }
    wtr.flush().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(())
}

pub fn save_csv(ds: &PanelDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv(ds, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PanelDataset {
        PanelDataset::from_fn(
            2,
            3,
            1,
            |i, t| (i * 10 + t) as f64,
            |i, t, _| (i + 2 * t) as f64,
        )
        .unwrap()
    }

    #[test]
    fn reads_well_formed_csv() {
        let text = "id,t,y,x1\n1,1,0.5,1\n1,2,0.7,2\n1,3,0.1,3\n2,1,1.5,4\n2,2,1.0,5\n2,3,2.5,6\n";
        let ds = read_csv(text.as_bytes()).unwrap();
        assert_eq!((ds.n(), ds.t(), ds.p()), (2, 3, 1));
        assert_eq!(ds.y(1, 2), 2.5);
        assert_eq!(ds.x(0, 1, 0), 2.0);
    }

    #[test]
    fn rows_are_sorted_by_id_then_period() {
        let text = "id,t,y,x1\n10,2,4,0\n2,2,2,0\n10,1,3,0\n2,1,1,0\n";
        let ds = read_csv(text.as_bytes()).unwrap();
        assert_eq!(ds.ids(), ["2", "10"]);
        assert_eq!(ds.periods(), ["1", "2"]);
        assert_eq!(ds.y_row(0), [1.0, 2.0]);
        assert_eq!(ds.y_row(1), [3.0, 4.0]);
    }

    #[test]
    fn missing_cell_names_the_offender() {
        let text = "id,t,y,x1\n1,1,0,0\n1,2,0,0\n1,3,0,0\n2,1,0,0\n2,2,0,0\n";
        match read_csv(text.as_bytes()) {
            Err(Error::MissingCell { id, t }) => assert_eq!((id.as_str(), t.as_str()), ("2", "3")),
            other => panic!("expected MissingCell, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_and_duplicates_are_rejected() {
        let text = "id,t,y,x1\n1,1,0,abc\n";
        assert!(matches!(
            read_csv(text.as_bytes()),
            Err(Error::NonNumeric { .. })
        ));
        let text = "id,t,y,x1\n1,1,0,1\n1,1,0,1\n";
        match read_csv(text.as_bytes()) {
            Err(Error::DuplicateRow { id, t }) => assert_eq!((id.as_str(), t.as_str()), ("1", "1")),
            other => panic!("expected DuplicateRow, got {other:?}"),
        }
    }

    #[test]
    fn within_of_constant_series_is_zero() {
        let ds = PanelDataset::from_fn(3, 4, 1, |_, _| 7.0, |i, t, _| (i * t) as f64).unwrap();
        let w = within_transform(&ds);
        assert!(w.y_dot.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn within_arithmetic() {
        let ds = PanelDataset::from_fn(2, 3, 1, |_, t| (t + 1) as f64, |_, t, _| t as f64).unwrap();
        let w = within_transform(&ds);
        assert_eq!(&w.y_dot[0..3], &[-1.0, 0.0, 1.0]);
        assert_eq!(w.y_bar, vec![2.0, 2.0]);
    }

    #[test]
    fn lagged_design_alignment() {
        let ds =
            PanelDataset::from_fn(2, 5, 0, |i, t| (100 * i + t) as f64, |_, _, _| 0.0).unwrap();
        let d = build_lagged_design(&ds, &LagSpec::ar1()).unwrap();
        assert_eq!((d.t(), d.p()), (4, 1));
        for i in 0..2 {
            for s in 0..4 {
                assert_eq!(d.y(i, s), ds.y(i, s + 1));
                assert_eq!(d.x(i, s, 0), ds.y(i, s));
            }
        }
        assert_eq!(d.periods(), ["2", "3", "4", "5"]);
        assert!(d.design().unwrap().is_pure_ar1());
    }

    #[test]
    fn two_column_dynamic_design() {
        let ds = PanelDataset::from_fn(
            2,
            6,
            1,
            |i, t| (i + t) as f64,
            |i, t, _| (10 * i + t) as f64,
        )
        .unwrap();
        let spec: LagSpec = "y:1,x1:1".parse().unwrap();
        let d = build_lagged_design(&ds, &spec).unwrap();
        assert_eq!((d.t(), d.p()), (5, 2));
        assert_eq!(d.x(1, 0, 1), ds.x(1, 0, 0));
        assert_eq!(d.regressor_names(), ["y_lag1", "x1_lag1"]);
    }

    #[test]
    fn lag_too_large() {
        let ds = small();
        let spec: LagSpec = "y:2".parse().unwrap();
        assert!(matches!(
            build_lagged_design(&ds, &spec),
            Err(Error::LagTooLarge { .. })
        ));
        let spec: LagSpec = "y:3".parse().unwrap();
        assert!(matches!(
            build_lagged_design(&ds, &spec),
            Err(Error::LagTooLarge { .. })
        ));
    }

    #[test]
    fn half_panels_even_and_odd() {
        assert_eq!(half_ranges(24).unwrap(), (0..12, 12..24));
        assert_eq!(half_ranges(4).unwrap(), (0..2, 2..4));
        let (a, b) = half_ranges(5).unwrap();
        assert_eq!((a.clone(), b.clone()), (0..3, 2..5));
        assert_eq!((a.len(), b.len()), (3, 3));
        assert!(matches!(half_ranges(3), Err(Error::TooShort { .. })));
    }

    #[test]
    fn split_halves_labels() {
        let ds = PanelDataset::from_fn(2, 5, 1, |_, t| t as f64, |_, t, _| t as f64).unwrap();
        let (a, b) = split_halves(&ds).unwrap();
        assert_eq!(a.periods(), ["1", "2", "3"]);
        assert_eq!(b.periods(), ["3", "4", "5"]);
    }

    #[test]
    fn lag_spec_grammar() {
        let s: LagSpec = "y:1,x1:1".parse().unwrap();
        assert_eq!(s.outcome_lags, vec![1]);
        assert_eq!(s.regressor_lags, vec![(0, 1)]);
        assert_eq!(s.to_string(), "y:1,x1:1");
        assert_eq!("ar1".parse::<LagSpec>().unwrap(), LagSpec::ar1());
        assert!("y:0".parse::<LagSpec>().is_err());
        assert!("z:1".parse::<LagSpec>().is_err());
        assert!("".parse::<LagSpec>().is_err());
    }

    #[test]
    fn permutation_must_be_complete() {
        let ds = small();
        assert!(ds.permute_individuals(&[0, 0]).is_err());
        let p = ds.permute_individuals(&[1, 0]).unwrap();
        assert_eq!(p.y_row(0), ds.y_row(1));
    }
}
