//! Spectra and sample metadata ingestion.
//!
//! Two plain CSV layouts are understood:
//!
//! * spectra: the first row holds the wavelength axis, every following row is
//!   one sample's intensities on that axis;
//! * metadata: header `sample_id,batch,condition,storage_time_h,tvc`, one row
//!   per sample, `tvc` may be left empty.
//!
//! Rows are aligned positionally (row `i` of the spectra belongs to record
//! `i`) unless [`join_by_id`] is used.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const METADATA_HEADER: [&str; 5] = ["sample_id", "batch", "condition", "storage_time_h", "tvc"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisUnit {
    /// Nanometres (NIR, VIS).
    Nm,
    /// Wavenumbers in cm⁻¹ (FTIR).
    Wavenumber,
}

impl fmt::Display for AxisUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AxisUnit::Nm => "nm",
            AxisUnit::Wavenumber => "wavenumber",
        })
    }
}

impl FromStr for AxisUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nm" => Ok(AxisUnit::Nm),
            "wavenumber" | "cm-1" | "cm^-1" => Ok(AxisUnit::Wavenumber),
            other => Err(Error::Config(format!("unknown axis unit {other:?}"))),
        }
    }
}

/// Strictly monotonic wavelength (or wavenumber) axis shared by all spectra.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavelengthAxis {
    values: Vec<f64>,
    unit: AxisUnit,
}

impl WavelengthAxis {
    pub fn new(values: Vec<f64>, unit: AxisUnit) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidAxis(format!(
                "need at least 2 positions, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidAxis(format!("non-finite value at position {i}")));
        }
        let increasing = values[1] > values[0];
        for (i, pair) in values.windows(2).enumerate() {
            let ok = if increasing {
                pair[1] > pair[0]
            } else {
                pair[1] < pair[0]
            };
            if !ok {
                return Err(Error::NonMonotonicAxis { position: i + 1 });
            }
        }
        Ok(WavelengthAxis { values, unit })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn unit(&self) -> AxisUnit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Samples × wavelengths intensity grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectraMatrix {
    axis: WavelengthAxis,
    intensities: Array2<f64>,
}

impl SpectraMatrix {
    pub fn new(axis: WavelengthAxis, intensities: Array2<f64>) -> Result<Self> {
        if intensities.nrows() == 0 {
            return Err(Error::InvalidMatrix("no sample rows".into()));
        }
        if intensities.ncols() != axis.len() {
            return Err(Error::InvalidMatrix(format!(
                "{} columns for an axis of length {}",
                intensities.ncols(),
                axis.len()
            )));
        }
        if let Some(((r, c), _)) = intensities.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!("non-finite intensity at row {r}, column {c}")));
        }
        Ok(SpectraMatrix { axis, intensities })
    }

    pub fn axis(&self) -> &WavelengthAxis {
        &self.axis
    }

    pub fn intensities(&self) -> &Array2<f64> {
        &self.intensities
    }

    pub fn n_samples(&self) -> usize {
        self.intensities.nrows()
    }

    pub fn n_wavelengths(&self) -> usize {
        self.intensities.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.intensities.row(i)
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        SpectraMatrix::new(self.axis.clone(), self.intensities.select(Axis(0), rows))
    }

    pub fn into_parts(self) -> (WavelengthAxis, Array2<f64>) {
        (self.axis, self.intensities)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    Iso4,
    Iso8,
    Iso12,
    Dynamic,
}

impl Condition {
    pub fn is_isothermal(self) -> bool {
        !matches!(self, Condition::Dynamic)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Iso4 => "Iso4",
            Condition::Iso8 => "Iso8",
            Condition::Iso12 => "Iso12",
            Condition::Dynamic => "Dynamic",
        }
    }

    pub const ALL: [Condition; 4] = [Condition::Iso4, Condition::Iso8, Condition::Iso12, Condition::Dynamic];
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Condition::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownCondition(s.to_string()))
    }
}

/// Response variable a model is trained for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// Total viable counts, log CFU/g.
    Tvc,
    /// Storage time in hours.
    TimeOnShelf,
}

impl Target {
    pub fn units(self) -> &'static str {
        match self {
            Target::Tvc => "log CFU/g",
            Target::TimeOnShelf => "h",
        }
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tvc" => Ok(Target::Tvc),
            "shelf" | "time_on_shelf" | "time-on-shelf" => Ok(Target::TimeOnShelf),
            other => Err(Error::Config(format!("unknown target {other:?} (expected tvc or shelf)"))),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::Tvc => "tvc",
            Target::TimeOnShelf => "shelf",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    pub batch: String,
    pub condition: Condition,
    pub storage_time_h: f64,
    pub tvc_log_cfu_g: Option<f64>,
}

impl SampleRecord {
    pub fn validate(&self) -> Result<()> {
        if !self.storage_time_h.is_finite() {
            return Err(Error::InvalidRecord {
                sample_id: self.sample_id.clone(),
                reason: "storage time is not finite".into(),
            });
        }
        if self.storage_time_h < 0.0 {
            return Err(Error::NegativeTime {
                sample_id: self.sample_id.clone(),
                value: self.storage_time_h,
            });
        }
        if let Some(tvc) = self.tvc_log_cfu_g {
            if !tvc.is_finite() {
                return Err(Error::InvalidRecord {
                    sample_id: self.sample_id.clone(),
                    reason: "TVC is not finite".into(),
                });
            }
        }
        Ok(())
    }

    pub fn response(&self, target: Target) -> Option<f64> {
        match target {
            Target::Tvc => self.tvc_log_cfu_g,
            Target::TimeOnShelf => Some(self.storage_time_h),
        }
    }
}

/// Spectra with one metadata record per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    spectra: SpectraMatrix,
    records: Vec<SampleRecord>,
}

impl Dataset {
    pub fn new(spectra: SpectraMatrix, records: Vec<SampleRecord>) -> Result<Self> {
        join(spectra, records)
    }

    pub fn spectra(&self) -> &SpectraMatrix {
        &self.spectra
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn sample_ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.sample_id.as_str())
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Dataset> {
        let spectra = self.spectra.select_rows(rows)?;
        let records = rows.iter().map(|&i| self.records[i].clone()).collect();
        Ok(Dataset { spectra, records })
    }

    /// Response vector for `target`; fails if any sample lacks it.
    pub fn response(&self, target: Target) -> Result<Array1<f64>> {
        self.records
            .iter()
            .map(|r| {
                r.response(target)
                    .ok_or_else(|| Error::MissingTarget(format!("sample {} has no {target} value", r.sample_id)))
            })
            .collect()
    }

    pub fn into_parts(self) -> (SpectraMatrix, Vec<SampleRecord>) {
        (self.spectra, self.records)
    }
}

fn parse_cell(cell: &str, path: &Path, line: usize, col: usize) -> Result<f64> {
    let trimmed = cell.trim();
    trimmed.parse::<f64>().map_err(|_| Error::MalformedFile {
        path: path.to_path_buf(),
        line,
        reason: format!("column {}: non-numeric cell {trimmed:?}", col + 1),
    })
}

/// Reads a spectra CSV: first row is the axis, the rest are sample intensities.
pub fn load_spectra(path: impl AsRef<Path>, axis_unit: AxisUnit) -> Result<SpectraMatrix> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_spectra(file, path, axis_unit)
}

/// Same as [`load_spectra`] over any reader; `origin` is only used in messages.
pub fn read_spectra<R: Read>(reader: R, origin: &Path, axis_unit: AxisUnit) -> Result<SpectraMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut axis: Option<Vec<f64>> = None;
    let mut data: Vec<f64> = Vec::new();
    let mut rows = 0usize;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(i + 1, |p| p.line() as usize);
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        let values = rec
            .iter()
            .enumerate()
            .map(|(col, c)| parse_cell(c, origin, line, col))
            .collect::<Result<Vec<_>>>()?;
        match &axis {
            None => axis = Some(values),
            Some(a) => {
                if values.len() != a.len() {
                    return Err(Error::MalformedFile {
                        path: origin.to_path_buf(),
                        line,
                        reason: format!("{} cells under a {}-cell axis header", values.len(), a.len()),
                    });
                }
                data.extend(values);
                rows += 1;
            }
        }
    }
    let axis = axis.ok_or_else(|| Error::EmptyFile(origin.to_path_buf()))?;
    if rows == 0 {
        return Err(Error::EmptyFile(origin.to_path_buf()));
    }
    let axis = WavelengthAxis::new(axis, axis_unit)?;
    let intensities = Array2::from_shape_vec((rows, axis.len()), data)
        .map_err(|e| Error::InvalidMatrix(e.to_string()))?;
    SpectraMatrix::new(axis, intensities)
}

/// Writes spectra in the layout [`read_spectra`] accepts. Values use the
/// shortest representation that parses back to the identical `f64`.
pub fn write_spectra<W: Write>(writer: W, spectra: &SpectraMatrix) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    wtr.write_record(spectra.axis().values().iter().map(|v| v.to_string()))?;
    for row in spectra.intensities().rows() {
        wtr.write_record(row.iter().map(|v| v.to_string()))?;
    }
    wtr.flush().map_err(|e| Error::io("<spectra writer>", e))?;
    Ok(())
}

pub fn load_metadata(path: impl AsRef<Path>) -> Result<Vec<SampleRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_metadata(file, path)
}

pub fn read_metadata<R: Read>(reader: R, origin: &Path) -> Result<Vec<SampleRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().all(|h| h.is_empty()) {
        return Err(Error::EmptyFile(origin.to_path_buf()));
    }
    let mut column = HashMap::new();
    for name in METADATA_HEADER {
        let idx = headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::MalformedFile {
                path: origin.to_path_buf(),
                line: 1,
                reason: format!("missing column {name:?}"),
            })?;
        column.insert(name, idx);
    }

    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { pos, .. } => Error::MalformedFile {
                path: origin.to_path_buf(),
                line: pos.as_ref().map_or(i + 2, |p| p.line() as usize),
                reason: "ragged row".into(),
            },
            _ => Error::Csv(e),
        })?;
        let line = rec.position().map_or(i + 2, |p| p.line() as usize);
        let get = |name: &str| rec.get(column[name]).unwrap_or("");
        let sample_id = get("sample_id").to_string();
        if sample_id.is_empty() {
            return Err(Error::MalformedFile {
                path: origin.to_path_buf(),
                line,
                reason: "empty sample_id".into(),
            });
        }
        let condition: Condition = get("condition").parse()?;
        let time_cell = get("storage_time_h");
        if time_cell.is_empty() {
            return Err(Error::InvalidRecord {
                sample_id,
                reason: "missing storage_time_h".into(),
            });
        }
        let storage_time_h = parse_cell(time_cell, origin, line, column["storage_time_h"])?;
        let tvc_cell = get("tvc");
        let tvc_log_cfu_g = if tvc_cell.is_empty() {
            None
        } else {
            Some(parse_cell(tvc_cell, origin, line, column["tvc"])?)
        };
        let record = SampleRecord {
            sample_id,
            batch: get("batch").to_string(),
            condition,
            storage_time_h,
            tvc_log_cfu_g,
        };
        record.validate()?;
        if !seen.insert(record.sample_id.clone()) {
            return Err(Error::DuplicateSampleId(record.sample_id));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn write_metadata<W: Write>(writer: W, records: &[SampleRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(METADATA_HEADER)?;
    for r in records {
        wtr.write_record([
            r.sample_id.clone(),
            r.batch.clone(),
            r.condition.to_string(),
            r.storage_time_h.to_string(),
            r.tvc_log_cfu_g.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<metadata writer>", e))?;
    Ok(())
}

/// Positional join: row `i` of `spectra` belongs to `records[i]`.
pub fn join(spectra: SpectraMatrix, records: Vec<SampleRecord>) -> Result<Dataset> {
    if spectra.n_samples() != records.len() {
        return Err(Error::CountMismatch {
            spectra: spectra.n_samples(),
            records: records.len(),
        });
    }
    let mut seen = HashSet::with_capacity(records.len());
    for r in &records {
        r.validate()?;
        if !seen.insert(r.sample_id.as_str()) {
            return Err(Error::DuplicateSampleId(r.sample_id.clone()));
        }
    }
    Ok(Dataset { spectra, records })
}

/// Id-keyed join: `spectra_ids[i]` names the sample in spectra row `i`.
/// The resulting dataset follows the spectra row order.
pub fn join_by_id(spectra: SpectraMatrix, spectra_ids: &[String], records: Vec<SampleRecord>) -> Result<Dataset> {
    if spectra.n_samples() != spectra_ids.len() || spectra_ids.len() != records.len() {
        return Err(Error::CountMismatch {
            spectra: spectra.n_samples(),
            records: records.len(),
        });
    }
    let mut by_id: HashMap<String, SampleRecord> = HashMap::with_capacity(records.len());
    for r in records {
        if let Some(prev) = by_id.insert(r.sample_id.clone(), r) {
            return Err(Error::DuplicateSampleId(prev.sample_id));
        }
    }
    let ordered = spectra_ids
        .iter()
        .map(|id| by_id.remove(id).ok_or_else(|| Error::UnmatchedSampleId(id.clone())))
        .collect::<Result<Vec<_>>>()?;
    join(spectra, ordered)
}

/// Element-wise mean of replicate readings of one sample.
pub fn average_replicates<R: AsRef<[f64]>>(readings: &[R]) -> Result<Vec<f64>> {
    let first = readings.first().ok_or(Error::EmptyInput)?.as_ref();
    let width = first.len();
    let mut sum = vec![0.0; width];
    for (i, r) in readings.iter().enumerate() {
        let r = r.as_ref();
        if r.len() != width {
            return Err(Error::AxisMismatch(format!(
                "replicate {i} has {} points, expected {width}",
                r.len()
            )));
        }
        for (s, v) in sum.iter_mut().zip(r) {
            *s += v;
        }
    }
    let n = readings.len() as f64;
    Ok(sum.into_iter().map(|s| s / n).collect())
}

/// Collapses rows that share a replicate id into their mean spectrum.
/// Groups appear in order of first occurrence.
pub fn average_replicate_groups(spectra: &SpectraMatrix, ids: &[String]) -> Result<(SpectraMatrix, Vec<String>)> {
    if ids.len() != spectra.n_samples() {
        return Err(Error::CountMismatch {
            spectra: spectra.n_samples(),
            records: ids.len(),
        });
    }
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, id) in ids.iter().enumerate() {
        groups
            .entry(id.as_str())
            .or_insert_with(|| {
                order.push(id.as_str());
                Vec::new()
            })
            .push(i);
    }
    let width = spectra.n_wavelengths();
    let mut data = Vec::with_capacity(order.len() * width);
    for id in &order {
        let rows: Vec<Vec<f64>> = groups[id].iter().map(|&i| spectra.row(i).to_vec()).collect();
        data.extend(average_replicates(&rows)?);
    }
    let intensities =
        Array2::from_shape_vec((order.len(), width), data).map_err(|e| Error::InvalidMatrix(e.to_string()))?;
    let averaged = SpectraMatrix::new(spectra.axis().clone(), intensities)?;
    Ok((averaged, order.into_iter().map(String::from).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionSide {
    Train,
    Test,
}

/// Raised (not returned as an error) when one side of a partition is empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmptyPartition(pub PartitionSide);

/// Isothermal training samples versus dynamic-storage test samples.
#[derive(Debug, Clone)]
pub struct Partition {
    pub train: Option<Dataset>,
    pub test: Option<Dataset>,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

impl Partition {
    pub fn warnings(&self) -> Vec<EmptyPartition> {
        let mut w = Vec::new();
        if self.train.is_none() {
            w.push(EmptyPartition(PartitionSide::Train));
        }
        if self.test.is_none() {
            w.push(EmptyPartition(PartitionSide::Test));
        }
        w
    }
}

/// Splits into isothermal (Iso4/Iso8/Iso12) training and dynamic test sets,
/// keeping the original row order on both sides.
pub fn partition_by_condition(data: &Dataset) -> Result<Partition> {
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (train_rows, test_rows): (Vec<usize>, Vec<usize>) =
        (0..data.len()).partition(|&i| data.records[i].condition.is_isothermal());
    let side = |rows: &[usize]| -> Result<Option<Dataset>> {
        if rows.is_empty() {
            Ok(None)
        } else {
            data.select_rows(rows).map(Some)
        }
    };
    Ok(Partition {
        train: side(&train_rows)?,
        test: side(&test_rows)?,
        train_rows,
        test_rows,
    })
}
