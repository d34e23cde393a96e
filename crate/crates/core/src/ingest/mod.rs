//! Streaming data access, artifact files and synthetic data.
//!
//! Two on-disk row formats are read:
//!
//! * CSV with a mandatory header, `.` decimals and unquoted numerics. Lines
//!   starting with `#` are metadata and skipped.
//! * A binary sidecar: magic `SSRG`, `u32` version, `u64` row count, `u32`
//!   feature count `p`, then rows of `p` feature values followed by the
//!   response, all little-endian `f64`. Columns are named `x1..xp` and `y`.
//!
//! The format is sniffed from the first four bytes.

pub mod artifact;
pub mod synth;

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 4] = b"SSRG";
pub const BINARY_VERSION: u32 = 1;
/// Name used for the injected constant column.
pub const INTERCEPT_NAME: &str = "(intercept)";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Csv,
    Binary,
}

/// Which columns play which role. Unset features mean "every other column".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SchemaSpec {
    pub response: Option<String>,
    pub weight: Option<String>,
    pub features: Option<Vec<String>>,
    pub intercept: bool,
}

/// A [`SchemaSpec`] resolved against a file header.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSchema {
    pub columns: Vec<String>,
    pub response: Option<String>,
    pub weight: Option<String>,
    pub features: Vec<String>,
    pub intercept: bool,
    feature_idx: Vec<usize>,
    response_idx: Option<usize>,
    weight_idx: Option<usize>,
}

impl DatasetSchema {
    pub fn resolve(columns: Vec<String>, spec: &SchemaSpec) -> Result<Self> {
        let find = |name: &str| {
            columns.iter().position(|c| c == name).ok_or_else(|| Error::MissingColumn(name.to_string()))
        };
        let response_idx = spec.response.as_deref().map(find).transpose()?;
        let weight_idx = spec.weight.as_deref().map(find).transpose()?;
        if spec.weight.is_some() && spec.weight == spec.response {
            return Err(Error::Schema("weight column cannot be the response".into()));
        }
        let features: Vec<String> = match &spec.features {
            Some(f) => f.clone(),
            None => columns
                .iter()
                .filter(|c| Some(*c) != spec.response.as_ref() && Some(*c) != spec.weight.as_ref())
                .cloned()
                .collect(),
        };
        for f in &features {
            if Some(f) == spec.response.as_ref() {
                return Err(Error::Schema(format!("response `{f}` listed as a feature")));
            }
            if Some(f) == spec.weight.as_ref() {
                return Err(Error::Schema(format!("weight `{f}` listed as a feature")));
            }
        }
        if features.is_empty() && !spec.intercept {
            return Err(Error::Schema("no features and no intercept".into()));
        }
        let feature_idx = features.iter().map(|f| find(f)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            response: spec.response.clone(),
            weight: spec.weight.clone(),
            intercept: spec.intercept,
            columns,
            features,
            feature_idx,
            response_idx,
            weight_idx,
        })
    }

    /// Width of the design matrix, counting the intercept column.
    pub fn p(&self) -> usize {
        self.features.len() + usize::from(self.intercept)
    }

    pub fn design_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.p());
        if self.intercept {
            out.push(INTERCEPT_NAME.to_string());
        }
        out.extend(self.features.iter().cloned());
        out
    }
}

/// Up to `batch_size` rows of design matrix, response and weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DataBatch {
    /// Row-major `rows × p`, intercept column first when enabled.
    pub x: Vec<f64>,
    pub y: Option<Vec<f64>>,
    pub w: Option<Vec<f64>>,
    pub p: usize,
}

impl DataBatch {
    fn with_capacity(rows: usize, p: usize, has_y: bool, has_w: bool) -> Self {
        Self {
            x: Vec::with_capacity(rows * p),
            y: has_y.then(|| Vec::with_capacity(rows)),
            w: has_w.then(|| Vec::with_capacity(rows)),
            p,
        }
    }

    pub fn rows(&self) -> usize {
        if self.p == 0 {
            0
        } else {
            self.x.len() / self.p
        }
    }

    pub fn response(&self) -> Result<&[f64]> {
        self.y.as_deref().ok_or_else(|| Error::Schema("no response column configured".into()))
    }

    pub fn weights(&self) -> Result<&[f64]> {
        self.w.as_deref().ok_or_else(|| Error::Schema("no weight column configured".into()))
    }
}

/// A file on disk with a resolved schema. Counts how many times it is scanned.
#[derive(Debug)]
pub struct Dataset {
    path: PathBuf,
    format: DataFormat,
    schema: DatasetSchema,
    binary_rows: u64,
    passes: AtomicU64,
}

impl Dataset {
    /// Reads only the header and resolves `spec` against it.
    pub fn open(path: impl AsRef<Path>, spec: &SchemaSpec) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let format = sniff_format(&path)?;
        let (columns, binary_rows) = match format {
            DataFormat::Csv => (csv_header(&path)?, 0),
            DataFormat::Binary => {
                let (n, p) = read_binary_header(&mut BufReader::new(File::open(&path)?))?;
                let mut cols: Vec<String> = (1..=p).map(|i| format!("x{i}")).collect();
                cols.push("y".into());
                (cols, n)
            }
        };
        let schema = DatasetSchema::resolve(columns, spec)?;
        Ok(Self { path, format, schema, binary_rows, passes: AtomicU64::new(0) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn format(&self) -> DataFormat {
        self.format
    }

    pub fn schema(&self) -> &DatasetSchema {
        &self.schema
    }

    /// Number of scans started with [`Dataset::batches`].
    pub fn passes(&self) -> u64 {
        self.passes.load(Ordering::Relaxed)
    }

    /// Starts one scan over the file, yielding batches of at most `batch_size` rows.
    pub fn batches(&self, batch_size: usize) -> Result<BatchStream<'_>> {
        if batch_size == 0 {
            return Err(Error::Schema("batch size must be at least 1".into()));
        }
        let source = match self.format {
            DataFormat::Csv => {
                let mut rdr = csv_reader(File::open(&self.path)?);
                let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
                if header != self.schema.columns {
                    return Err(Error::Malformed("header changed since the dataset was opened".into()));
                }
                Source::Csv { rdr, record: csv::ByteRecord::new() }
            }
            DataFormat::Binary => {
                let mut rdr = BufReader::with_capacity(1 << 20, File::open(&self.path)?);
                let (n, _) = read_binary_header(&mut rdr)?;
                Source::Binary { rdr, remaining: n, buf: Vec::new() }
            }
        };
        self.passes.fetch_add(1, Ordering::Relaxed);
        Ok(BatchStream { source, schema: &self.schema, batch_size, rows: 0, batches: 0, done: false })
    }

    /// Row count of a binary file; `None` for CSV where it is unknown until scanned.
    pub fn known_rows(&self) -> Option<u64> {
        (self.format == DataFormat::Binary).then_some(self.binary_rows)
    }
}

enum Source {
    Csv { rdr: csv::Reader<BufReader<File>>, record: csv::ByteRecord },
    Binary { rdr: BufReader<File>, remaining: u64, buf: Vec<u8> },
}

/// One pass over a [`Dataset`].
pub struct BatchStream<'a> {
    source: Source,
    schema: &'a DatasetSchema,
    batch_size: usize,
    rows: u64,
    batches: u64,
    done: bool,
}

impl BatchStream<'_> {
    pub fn rows_read(&self) -> u64 {
        self.rows
    }

    pub fn batches_read(&self) -> u64 {
        self.batches
    }

    fn fill(&mut self) -> Result<DataBatch> {
        let s = self.schema;
        let mut batch = DataBatch::with_capacity(
            self.batch_size,
            s.p(),
            s.response_idx.is_some(),
            s.weight_idx.is_some(),
        );
        let mut taken = 0;
        match &mut self.source {
            Source::Csv { rdr, record } => {
                while taken < self.batch_size {
                    match rdr.read_byte_record(record) {
                        Ok(false) => {
                            self.done = true;
                            break;
                        }
                        Ok(true) => {}
                        Err(e) => return Err(csv_row_error(e, self.rows + taken as u64 + 1)),
                    }
                    let row = self.rows + taken as u64 + 1;
                    let cell = |i: usize| parse_cell(record.get(i).unwrap_or_default(), row, &s.columns[i]);
                    if s.intercept {
                        batch.x.push(1.0);
                    }
                    for &i in &s.feature_idx {
                        batch.x.push(cell(i)?);
                    }
                    if let (Some(i), Some(y)) = (s.response_idx, batch.y.as_mut()) {
                        y.push(cell(i)?);
                    }
                    if let (Some(i), Some(w)) = (s.weight_idx, batch.w.as_mut()) {
                        w.push(cell(i)?);
                    }
                    taken += 1;
                }
            }
            Source::Binary { rdr, remaining, buf } => {
                let ncols = s.columns.len();
                let want = (*remaining).min(self.batch_size as u64) as usize;
                buf.resize(want * ncols * 8, 0);
                rdr.read_exact(buf).map_err(|e| match e.kind() {
                    std::io::ErrorKind::UnexpectedEof => {
                        Error::Malformed(format!("binary data truncated after row {}", self.rows))
                    }
                    _ => Error::Io(e),
                })?;
                *remaining -= want as u64;
                if *remaining == 0 {
                    self.done = true;
                }
                let mut vals = vec![0.0f64; ncols];
                for (r, chunk) in buf.chunks_exact(ncols * 8).enumerate() {
                    for (v, b) in vals.iter_mut().zip(chunk.chunks_exact(8)) {
                        *v = f64::from_le_bytes(b.try_into().unwrap());
                    }
                    let row = self.rows + r as u64 + 1;
                    let get = |i: usize| {
                        let v = vals[i];
                        if v.is_finite() {
                            Ok(v)
                        } else {
                            Err(Error::Parse { row, column: s.columns[i].clone(), value: v.to_string() })
                        }
                    };
                    if s.intercept {
                        batch.x.push(1.0);
                    }
                    for &i in &s.feature_idx {
                        batch.x.push(get(i)?);
                    }
                    if let (Some(i), Some(y)) = (s.response_idx, batch.y.as_mut()) {
                        y.push(get(i)?);
                    }
                    if let (Some(i), Some(w)) = (s.weight_idx, batch.w.as_mut()) {
                        w.push(get(i)?);
                    }
                }
                taken = want;
            }
        }
        self.rows += taken as u64;
        Ok(batch)
    }
}

impl Iterator for BatchStream<'_> {
    type Item = Result<DataBatch>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.fill() {
            Ok(b) if b.rows() == 0 && self.done => None,
            Ok(b) => {
                self.batches += 1;
                Some(Ok(b))
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

fn parse_cell(bytes: &[u8], row: u64, column: &str) -> Result<f64> {
    let bad = || Error::Parse { row, column: column.to_string(), value: String::from_utf8_lossy(bytes).into_owned() };
    let s = std::str::from_utf8(bytes).map_err(|_| bad())?;
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(bad()),
    }
}

fn csv_row_error(e: csv::Error, row: u64) -> Error {
    match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            Error::RaggedRow { row, expected: *expected_len as usize, found: *len as usize }
        }
        _ => Error::Csv(e),
    }
}

fn csv_reader(file: File) -> csv::Reader<BufReader<File>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(BufReader::with_capacity(1 << 20, file))
}

fn csv_header(path: &Path) -> Result<Vec<String>> {
    let mut rdr = csv_reader(File::open(path)?);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::Malformed(format!("{}: missing CSV header", path.display())));
    }
    Ok(header)
}

fn sniff_format(path: &Path) -> Result<DataFormat> {
    let mut head = [0u8; 4];
    let mut f = File::open(path)?;
    let mut got = 0;
    while got < 4 {
        match f.read(&mut head[got..])? {
            0 => break,
            k => got += k,
        }
    }
    Ok(if got == 4 && &head == BINARY_MAGIC { DataFormat::Binary } else { DataFormat::Csv })
}

/// Returns `(rows, feature count)`.
fn read_binary_header(r: &mut impl Read) -> Result<(u64, usize)> {
    let mut h = [0u8; 20];
    r.read_exact(&mut h).map_err(|_| Error::Malformed("binary header truncated".into()))?;
    if &h[..4] != BINARY_MAGIC {
        return Err(Error::Malformed("bad binary magic".into()));
    }
    let version = u32::from_le_bytes(h[4..8].try_into().unwrap());
    if version != BINARY_VERSION {
        return Err(Error::VersionMismatch { found: version.into(), expected: BINARY_VERSION.into() });
    }
    let n = u64::from_le_bytes(h[8..16].try_into().unwrap());
    let p = u32::from_le_bytes(h[16..20].try_into().unwrap()) as usize;
    Ok((n, p))
}

/// Writes the binary header for `n` rows of `p` features plus a response.
pub fn write_binary_header(w: &mut impl std::io::Write, n: u64, p: usize) -> Result<()> {
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&BINARY_VERSION.to_le_bytes())?;
    w.write_all(&n.to_le_bytes())?;
    w.write_all(&u32::try_from(p).map_err(|_| Error::Schema("too many features".into()))?.to_le_bytes())?;
    Ok(())
}

/// Reads a single numeric column in one pass.
pub fn read_column(path: impl AsRef<Path>, name: &str) -> Result<Vec<f64>> {
    let spec = SchemaSpec { response: Some(name.to_string()), features: Some(Vec::new()), intercept: true, weight: None };
    let ds = Dataset::open(path, &spec)?;
    let mut out = Vec::new();
    for batch in ds.batches(4096)? {
        out.extend_from_slice(batch?.response()?);
    }
    Ok(out)
}
