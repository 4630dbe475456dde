//! Delimited-text ingest and emit, run configuration, and saved models.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::crossval::CrossValConfig;
use crate::error::{Error, Result};
use crate::model::{Coefficients, Dataset, Outcome, OutcomeKind, Survival};
use crate::penalty::KStrategy;
use crate::selection::GridSpec;
use crate::solver::SolverConfig;
use crate::spline::{GridPoints, SplineBasis};

/// Cell contents read as missing.
pub const MISSING_MARKERS: [&str; 5] = ["", "NA", "NaN", "nan", "."];

/// Which file columns play which role.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnRoles {
    /// Response (Gaussian) or follow-up time (Cox).
    pub outcome: String,
    pub event: Option<String>,
    pub x: Vec<String>,
    pub u: Vec<String>,
    pub z: Vec<String>,
}

impl ColumnRoles {
    /// Roles must be disjoint, except that every `U` column may also be a
    /// `Z` column. Partial overlap is rejected.
    pub fn validate(&self, kind: OutcomeKind) -> Result<()> {
        if self.outcome.is_empty() {
            return Err(Error::Config("no outcome column given".into()));
        }
        if self.u.is_empty() {
            return Err(Error::Config("at least one U column is required".into()));
        }
        if kind == OutcomeKind::Cox && self.event.is_none() {
            return Err(Error::Config("Cox outcome needs an event column".into()));
        }
        let mut seen: HashMap<String, &str> = HashMap::new();
        let mut claim = |name: &'static str, cols: &[String]| -> Result<()> {
            for c in cols {
                if let Some(prev) = seen.insert(c.clone(), name) {
                    return Err(Error::Config(format!("column '{c}' is used as both {prev} and {name}")));
                }
            }
            Ok(())
        };
        let single = |s: &Option<String>| s.iter().cloned().collect::<Vec<_>>();
        claim("outcome", std::slice::from_ref(&self.outcome))?;
        claim("event", &single(&self.event))?;
        claim("x", &self.x)?;
        claim("z", &self.z)?;
        let shared = self.u.iter().filter(|c| self.z.contains(c)).count();
        if shared == 0 {
            claim("u", &self.u)?;
        } else if shared != self.u.len() {
            return Err(Error::Config(
                "either all U columns or none of them may also be Z columns".into(),
            ));
        }
        let mut dup = self.u.clone();
        dup.sort();
        dup.dedup();
        if dup.len() != self.u.len() {
            return Err(Error::Config("U columns must be distinct".into()));
        }
        Ok(())
    }

    /// Position of each `U` column within `Z`, when `U` is part of `Z`.
    pub fn u_in_z(&self) -> Option<Vec<usize>> {
        self.u
            .iter()
            .map(|c| self.z.iter().position(|z| z == c))
            .collect()
    }
}

/// Per-column centering and scaling; `x_std = (x - mean) / sd`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Scaling {
    pub fn identity(names: &[String]) -> Self {
        Scaling {
            names: names.to_vec(),
            mean: vec![0.0; names.len()],
            sd: vec![1.0; names.len()],
        }
    }

    /// Mean and sample standard deviation of each column. Constant columns
    /// get mean 0 and sd 1 so that they pass through unchanged.
    pub fn estimate(names: &[String], m: ArrayView2<f64>) -> Self {
        let n = m.nrows() as f64;
        let mut out = Scaling::identity(names);
        for (k, col) in m.axis_iter(Axis(1)).enumerate() {
            let mean = col.sum() / n;
            let var = if m.nrows() > 1 {
                col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            let sd = var.sqrt();
            if sd > 0.0 && sd.is_finite() {
                out.mean[k] = mean;
                out.sd[k] = sd;
            }
        }
        out
    }

    pub fn apply(&self, m: &mut Array2<f64>) {
        for (k, mut col) in m.axis_iter_mut(Axis(1)).enumerate() {
            let (mu, sd) = (self.mean[k], self.sd[k]);
            col.mapv_inplace(|v| (v - mu) / sd);
        }
    }

    pub fn is_constant(&self, k: usize) -> bool {
        self.mean[k] == 0.0 && self.sd[k] == 1.0
    }
}

/// Scalings of the three predictor groups.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub x: Scaling,
    pub u: Scaling,
    pub z: Scaling,
}

/// How predictors are transformed on ingest.
#[derive(Debug, Clone, Copy)]
pub enum ScaleMode<'a> {
    /// Estimate scalings from the file.
    Estimate,
    /// Reuse stored scalings, e.g. when predicting.
    Apply(&'a Standardization),
    /// Keep values as read.
    Identity,
}

/// Parsed numeric table with incomplete rows removed.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub names: Vec<String>,
    /// Column-major values of the kept rows.
    pub columns: Vec<Vec<f64>>,
    /// File line number of each kept row.
    pub lines: Vec<usize>,
    pub dropped: usize,
}

impl Table {
    pub fn n_rows(&self) -> usize {
        self.lines.len()
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.names
            .iter()
            .position(|c| c == name)
            .map(|k| self.columns[k].as_slice())
            .ok_or_else(|| Error::Config(format!("unknown column '{name}'")))
    }

    fn matrix(&self, names: &[String]) -> Result<Array2<f64>> {
        let mut m = Array2::zeros((self.n_rows(), names.len()));
        for (k, name) in names.iter().enumerate() {
            m.column_mut(k).assign(&ArrayView1::from(self.column(name)?));
        }
        Ok(m)
    }
}

fn is_missing(cell: &str) -> bool {
    MISSING_MARKERS.contains(&cell.trim())
}

/// Reads the columns in `wanted` from delimited text with a header row.
///
/// Rows with a missing cell in any wanted column are dropped and counted.
/// Other cells must parse as finite numbers; the error names the line and
/// column.
pub fn read_table<R: Read>(reader: R, delimiter: u8, wanted: &[String]) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Data(format!("cannot read header: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut idx = Vec::with_capacity(wanted.len());
    for w in wanted {
        let k = header
            .iter()
            .position(|h| h == w)
            .ok_or_else(|| Error::Config(format!("unknown column '{w}'")))?;
        idx.push(k);
    }
    let mut columns = vec![Vec::new(); wanted.len()];
    let mut lines = Vec::new();
    let mut dropped = 0;
    let mut any = false;
    for (r, rec) in rdr.records().enumerate() {
        let line = r + 2;
        let rec = rec.map_err(|e| Error::Data(format!("line {line}: {e}")))?;
        any = true;
        let cells: Vec<&str> = idx.iter().map(|&k| rec.get(k).unwrap_or("")).collect();
        if cells.iter().any(|c| is_missing(c)) {
            dropped += 1;
            continue;
        }
        for (k, cell) in cells.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                Error::Data(format!("line {line}, column '{}': '{}' is not a number", wanted[k], cell))
            })?;
            if !v.is_finite() {
                return Err(Error::Data(format!("line {line}, column '{}': value is not finite", wanted[k])));
            }
            columns[k].push(v);
        }
        lines.push(line);
    }
    if !any {
        return Err(Error::Data("no data rows".into()));
    }
    if lines.is_empty() {
        return Err(Error::Data(format!("all {dropped} data rows have missing values")));
    }
    Ok(Table {
        names: wanted.to_vec(),
        columns,
        lines,
        dropped,
    })
}

/// Predictors and (optionally) outcome read from a file.
#[derive(Debug, Clone)]
pub struct Frame {
    /// `X_1..X_p`, without the constant column.
    pub x: Array2<f64>,
    pub u: Array2<f64>,
    pub z: Array2<f64>,
    pub outcome: Option<Outcome>,
    pub scaling: Standardization,
    /// File line number of each row.
    pub lines: Vec<usize>,
    pub dropped: usize,
    pub warnings: Vec<String>,
}

impl Frame {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn dataset(&self, roles: &ColumnRoles) -> Result<Dataset> {
        let outcome = self
            .outcome
            .clone()
            .ok_or_else(|| Error::Data("outcome columns were not read".into()))?;
        let data = Dataset::from_predictors(self.x.view(), self.u.clone(), self.z.clone(), outcome)?;
        match roles.u_in_z() {
            Some(map) => data.with_u_in_z(map),
            None => Ok(data),
        }
    }
}

fn parse_event(v: f64, line: usize, name: &str) -> Result<bool> {
    if v == 1.0 {
        Ok(true)
    } else if v == 0.0 {
        Ok(false)
    } else {
        Err(Error::Data(format!("line {line}, column '{name}': event indicator must be 0 or 1, got {v}")))
    }
}

/// Reads predictors and, when `with_outcome`, the outcome columns.
///
/// `U` columns shared with `Z` use the `Z` scaling so both copies agree.
pub fn read_frame<R: Read>(
    reader: R,
    delimiter: u8,
    roles: &ColumnRoles,
    kind: OutcomeKind,
    mode: ScaleMode<'_>,
    with_outcome: bool,
) -> Result<Frame> {
    roles.validate(kind)?;
    let mut wanted: Vec<String> = Vec::new();
    let mut push = |c: &String| {
        if !wanted.contains(c) {
            wanted.push(c.clone());
        }
    };
    roles.x.iter().for_each(&mut push);
    roles.u.iter().for_each(&mut push);
    roles.z.iter().for_each(&mut push);
    if with_outcome {
        push(&roles.outcome);
        if kind == OutcomeKind::Cox {
            if let Some(e) = &roles.event {
                push(e);
            }
        }
    }
    let table = read_table(reader, delimiter, &wanted)?;
    let mut x = table.matrix(&roles.x)?;
    let mut u = table.matrix(&roles.u)?;
    let mut z = table.matrix(&roles.z)?;
    let scaling = match mode {
        ScaleMode::Estimate => {
            let zs = Scaling::estimate(&roles.z, z.view());
            let us = match roles.u_in_z() {
                Some(map) => Scaling {
                    names: roles.u.clone(),
                    mean: map.iter().map(|&k| zs.mean[k]).collect(),
                    sd: map.iter().map(|&k| zs.sd[k]).collect(),
                },
                None => Scaling::estimate(&roles.u, u.view()),
            };
            Standardization {
                x: Scaling::estimate(&roles.x, x.view()),
                u: us,
                z: zs,
            }
        }
        ScaleMode::Apply(s) => {
            if s.x.names != roles.x || s.u.names != roles.u || s.z.names != roles.z {
                return Err(Error::Config("stored scaling does not match the column roles".into()));
            }
            s.clone()
        }
        ScaleMode::Identity => Standardization {
            x: Scaling::identity(&roles.x),
            u: Scaling::identity(&roles.u),
            z: Scaling::identity(&roles.z),
        },
    };
    let mut warnings = Vec::new();
    if matches!(mode, ScaleMode::Estimate) {
        for (k, name) in roles.x.iter().enumerate() {
            if table.column(name)?.windows(2).all(|w| w[0] == w[1]) {
                warnings.push(format!("column '{name}' has zero variance; kept unscaled"));
                debug_assert!(scaling.x.is_constant(k));
            }
        }
    }
    scaling.x.apply(&mut x);
    scaling.u.apply(&mut u);
    scaling.z.apply(&mut z);

    let outcome = if with_outcome {
        let y = Array1::from(table.column(&roles.outcome)?.to_vec());
        Some(match kind {
            OutcomeKind::Gaussian => Outcome::Gaussian(y),
            OutcomeKind::Cox => {
                let name = roles.event.as_ref().expect("validated");
                let ev = table.column(name)?;
                let event = ev
                    .iter()
                    .zip(&table.lines)
                    .map(|(&v, &line)| parse_event(v, line, name))
                    .collect::<Result<Vec<bool>>>()?;
                if let Some((_, &line)) = y.iter().zip(&table.lines).find(|(t, _)| !(**t > 0.0)) {
                    return Err(Error::Data(format!(
                        "line {line}, column '{}': survival times must be positive",
                        roles.outcome
                    )));
                }
                Outcome::Cox(Survival::new(y, event)?)
            }
        })
    } else {
        None
    };
    Ok(Frame {
        x,
        u,
        z,
        outcome,
        scaling,
        lines: table.lines,
        dropped: table.dropped,
        warnings,
    })
}

/// Writes a dataset as delimited text under `roles`, shortest round-trip
/// float formatting. Reading it back with [`ScaleMode::Identity`] gives
/// the same dataset bit for bit.
pub fn emit_dataset(data: &Dataset, roles: &ColumnRoles, delimiter: u8) -> Result<String> {
    if roles.x.len() != data.p() || roles.u.len() != data.q_u() || roles.z.len() != data.q_z() {
        return Err(Error::Dimension("column roles do not match the dataset".into()));
    }
    let mut cols: BTreeMap<usize, (String, Vec<f64>)> = BTreeMap::new();
    let mut order = 0usize;
    let mut add = |name: &String, values: Vec<f64>, cols: &mut BTreeMap<usize, (String, Vec<f64>)>| {
        if !cols.values().any(|(n, _)| n == name) {
            cols.insert(order, (name.clone(), values));
            order += 1;
        }
    };
    for (j, name) in roles.x.iter().enumerate() {
        add(name, data.x().column(j + 1).to_vec(), &mut cols);
    }
    for (k, name) in roles.u.iter().enumerate() {
        add(name, data.u().column(k).to_vec(), &mut cols);
    }
    for (k, name) in roles.z.iter().enumerate() {
        add(name, data.z().column(k).to_vec(), &mut cols);
    }
    match data.outcome() {
        Outcome::Gaussian(y) => add(&roles.outcome, y.to_vec(), &mut cols),
        Outcome::Cox(s) => {
            add(&roles.outcome, s.time().to_vec(), &mut cols);
            let name = roles
                .event
                .as_ref()
                .ok_or_else(|| Error::Config("Cox outcome needs an event column".into()))?;
            let ev = s.event().iter().map(|&e| f64::from(u8::from(e))).collect();
            add(name, ev, &mut cols);
        }
    }
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(Vec::new());
    let write_err = |e: csv::Error| Error::Data(format!("cannot write table: {e}"));
    w.write_record(cols.values().map(|(n, _)| n.as_str())).map_err(write_err)?;
    for i in 0..data.n() {
        w.write_record(cols.values().map(|(_, v)| format!("{:?}", v[i]))).map_err(write_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(format!("cannot write table: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
}

/// Where the spline knots come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnotRule {
    /// `-r, 0, r` with `r` the largest `|U_i|` after standardization.
    Symmetric,
    Explicit(Vec<f64>),
}

impl Default for KnotRule {
    fn default() -> Self {
        KnotRule::Symmetric
    }
}

impl KnotRule {
    pub fn basis(&self, data: &Dataset) -> Result<SplineBasis> {
        match self {
            KnotRule::Symmetric => SplineBasis::symmetric(data.max_u_norm()),
            KnotRule::Explicit(points) => Ok(SplineBasis::new(GridPoints::new(points.clone())?)),
        }
    }
}

/// All settings of one CLI run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<String>,
    pub output_dir: Option<String>,
    /// Saved model for `predict`.
    pub model: Option<String>,
    pub outcome: OutcomeKind,
    pub columns: ColumnRoles,
    /// Single character; defaults to tab for `.tsv` inputs, comma otherwise.
    pub delimiter: Option<String>,
    pub standardize: bool,
    pub grid: GridSpec,
    pub solver: SolverConfig,
    pub k_strategy: KStrategy,
    pub knots: KnotRule,
    pub weighted: bool,
    pub seed: u64,
    pub crossval: CrossValConfig,
    /// Points on the tabulated curve grid.
    pub curve_points: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            output_dir: None,
            model: None,
            outcome: OutcomeKind::Gaussian,
            columns: ColumnRoles::default(),
            delimiter: None,
            standardize: true,
            grid: GridSpec::default(),
            solver: SolverConfig::default(),
            k_strategy: KStrategy::default(),
            knots: KnotRule::default(),
            weighted: true,
            seed: 0,
            crossval: CrossValConfig::default(),
            curve_points: 200,
        }
    }
}

/// Recursively overlays `top` onto `base`; tables merge, other values
/// are replaced.
fn merge_toml(base: &mut toml::Value, top: toml::Value) {
    match (base, top) {
        (toml::Value::Table(b), toml::Value::Table(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge_toml(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// `base` with the settings in TOML text `s` laid over it.
pub fn overlay_toml<T: Serialize + serde::de::DeserializeOwned>(base: &T, s: &str) -> Result<T> {
    let mut merged = toml::Value::try_from(base).map_err(|e| Error::Config(e.to_string()))?;
    let top: toml::Value = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
    merge_toml(&mut merged, top);
    merged.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Settings in `s` replace those already in `self`.
    pub fn overlay_toml(&self, s: &str) -> Result<Self> {
        let cfg = overlay_toml(self, s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.solver.validate()?;
        self.crossval.validate()?;
        self.delimiter_byte()?;
        if self.curve_points < 2 {
            return Err(Error::Config("curve_points must be at least 2".into()));
        }
        if let KnotRule::Explicit(p) = &self.knots {
            GridPoints::new(p.clone())?;
        }
        Ok(())
    }

    pub fn delimiter_byte(&self) -> Result<u8> {
        match &self.delimiter {
            Some(d) => {
                let d = if d == "\\t" { "\t" } else { d.as_str() };
                match d.as_bytes() {
                    [b] if b.is_ascii() => Ok(*b),
                    _ => Err(Error::Config(format!("delimiter must be one ASCII character, got {d:?}"))),
                }
            }
            None => {
                let tsv = self
                    .input
                    .as_deref()
                    .is_some_and(|p| p.ends_with(".tsv") || p.ends_with(".tab"));
                Ok(if tsv { b'\t' } else { b',' })
            }
        }
    }
}

/// Current format version of [`SavedModel`].
pub const MODEL_FORMAT: u32 = 1;

/// A fitted model with everything needed to predict on new data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SavedModel {
    pub format: u32,
    pub outcome: OutcomeKind,
    pub columns: ColumnRoles,
    pub scaling: Standardization,
    pub knots: GridPoints,
    pub coef: Coefficients,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl SavedModel {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let m: SavedModel = serde_json::from_str(s).map_err(|e| Error::Config(format!("model file: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json_string(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks that every array has the sizes implied by the column roles
    /// and the knots.
    pub fn validate(&self) -> Result<()> {
        if self.format != MODEL_FORMAT {
            return Err(Error::Config(format!("unsupported model format {}", self.format)));
        }
        self.columns.validate(self.outcome)?;
        let grid = GridPoints::new(self.knots.points().to_vec())?;
        let basis = SplineBasis::new(grid);
        let (p, q_u, q_z, d) = (self.columns.x.len(), self.columns.u.len(), self.columns.z.len(), basis.len());
        let c = &self.coef;
        if c.beta.len() != q_u || c.psi.len() != q_z || c.gamma.len() != p + 1 || c.alpha.dim() != (p + 1, d) {
            return Err(Error::Dimension("model coefficients do not match the column roles".into()));
        }
        for (s, n) in [(&self.scaling.x, p), (&self.scaling.u, q_u), (&self.scaling.z, q_z)] {
            if s.mean.len() != n || s.sd.len() != n || s.names.len() != n {
                return Err(Error::Dimension("scaling does not match the column roles".into()));
            }
            if s.sd.iter().any(|v| !(*v > 0.0) || !v.is_finite()) || s.mean.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("scaling entries must be finite with positive sd".into()));
            }
        }
        let finite = c.beta.iter().chain(&c.psi).chain(&c.gamma).chain(c.alpha.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("model coefficients must be finite".into()));
        }
        Ok(())
    }

    pub fn basis(&self) -> Result<SplineBasis> {
        Ok(SplineBasis::new(GridPoints::new(self.knots.points().to_vec())?))
    }

    /// Linear predictor for standardized predictors; `x` excludes the
    /// constant column.
    pub fn predict(&self, x: ArrayView2<f64>, u: ArrayView2<f64>, z: ArrayView2<f64>) -> Result<Array1<f64>> {
        let c = &self.coef;
        let n = x.nrows();
        if x.ncols() + 1 != c.gamma.len() || u.ncols() != c.beta.len() || z.ncols() != c.psi.len() {
            return Err(Error::Dimension("predictors do not match the model".into()));
        }
        if u.nrows() != n || z.nrows() != n {
            return Err(Error::Dimension("predictor row counts differ".into()));
        }
        let basis = self.basis()?;
        let v = u.dot(&c.beta);
        let g = basis.design_matrix(v.view()).dot(&c.alpha.t()) + &c.gamma;
        let mut eta = g.column(0).to_owned() + z.dot(&c.psi);
        for j in 1..c.gamma.len() {
            eta += &(&g.column(j) * &x.column(j - 1));
        }
        Ok(eta)
    }
}
