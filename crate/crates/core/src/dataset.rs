//! Deterministic generation, persistence, splitting and normalisation of
//! `(Performance, CircuitParams, Geometry)` training triples.
//!
//! Every random draw is keyed by `(master_seed, row index, attempt)` through the
//! ChaCha stream/word-position counters, so row `i` has the same value no
//! matter how many threads generated the dataset or in which order.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::circuit::{
    geometry_to_circuit, input_impedance, CircuitError, CircuitParams, EnvConfig, Geometry,
    Performance,
};
use crate::matrix::Matrix;

/// Smallest admissible magnitude of any target coordinate. The relative-error
/// losses divide by targets.
pub const TARGET_FLOOR: f64 = 1e-6;

/// Redraw budget for a row whose geometry falls outside the surrogate's domain.
pub const MAX_ATTEMPTS: u64 = 100;

/// Header of the dataset CSV, in column order.
pub const CSV_HEADER: &str =
    "re_zopt,im_zopt,c1,c2,l1,l2,k,q1,q2,cp,w_oa,w_ob,r0,r1,x_gnd,l_f";

const CSV_COLUMNS: usize = 16;
/// ChaCha words reserved for one sampling attempt (8 draws of 2 words each).
const WORDS_PER_ATTEMPT: u128 = 64;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid sampling range for {field}: [{lo}, {hi}]")]
    InvalidRange { field: &'static str, lo: f64, hi: f64 },
    #[error("dataset must contain at least one row")]
    Empty,
    #[error("row {index}: no valid sample after {attempts} attempts: {last}")]
    Exhausted {
        index: u64,
        attempts: u64,
        last: CircuitError,
    },
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    InvalidFraction(f64),
    #[error("train split of {train} rows out of {total} is empty")]
    EmptyTrainSplit { train: usize, total: usize },
    #[error("input coordinate {coord} has zero standard deviation on the train split")]
    ZeroVariance { coord: &'static str },
    #[error("dataset has no train/test split")]
    MissingSplit,
    #[error("row {row}: target {field} = {value} is below the magnitude floor {TARGET_FLOOR}")]
    TargetBelowFloor {
        row: usize,
        field: &'static str,
        value: f64,
    },
    #[error("malformed dataset file {path}: {msg}")]
    Malformed { path: String, msg: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    fn lerp(&self, u: f64) -> f64 {
        self.lo + (self.hi - self.lo) * u
    }
}

/// Uniform sampling box for geometries (µm) and loading capacitors (fF).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingRanges {
    pub w_oa: Interval,
    pub w_ob: Interval,
    pub r0: Interval,
    pub r1: Interval,
    pub x_gnd: Interval,
    pub l_f: Interval,
    pub c1: Interval,
    pub c2: Interval,
}

impl Default for SamplingRanges {
    fn default() -> Self {
        Self {
            w_oa: Interval::new(8.0, 16.0),
            w_ob: Interval::new(8.0, 16.0),
            r0: Interval::new(38.0, 50.0),
            r1: Interval::new(42.0, 60.0),
            x_gnd: Interval::new(50.0, 70.0),
            l_f: Interval::new(10.0, 40.0),
            c1: Interval::new(50.0, 400.0),
            c2: Interval::new(50.0, 400.0),
        }
    }
}

impl SamplingRanges {
    /// Geometry intervals in `Geometry::to_array` order.
    pub fn geometry_intervals(&self) -> [Interval; 6] {
        [self.w_oa, self.w_ob, self.r0, self.r1, self.x_gnd, self.l_f]
    }

    fn named(&self) -> [(&'static str, Interval); 8] {
        [
            ("w_oa", self.w_oa),
            ("w_ob", self.w_ob),
            ("r0", self.r0),
            ("r1", self.r1),
            ("x_gnd", self.x_gnd),
            ("l_f", self.l_f),
            ("c1", self.c1),
            ("c2", self.c2),
        ]
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        for (field, iv) in self.named() {
            let ok = iv.lo.is_finite() && iv.hi.is_finite() && iv.lo > 0.0 && iv.lo < iv.hi;
            if !ok {
                return Err(DatasetError::InvalidRange {
                    field,
                    lo: iv.lo,
                    hi: iv.hi,
                });
            }
        }
        Ok(())
    }

    pub fn contains_geometry(&self, g: &Geometry) -> bool {
        self.geometry_intervals()
            .iter()
            .zip(g.to_array())
            .all(|(iv, v)| iv.contains(v))
    }
}

fn attempt_rng(master_seed: u64, index: u64, attempt: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng.set_word_pos(u128::from(attempt) * WORDS_PER_ATTEMPT);
    rng
}

fn sample_attempt(
    index: u64,
    attempt: u64,
    master_seed: u64,
    ranges: &SamplingRanges,
) -> (Geometry, f64, f64) {
    let mut rng = attempt_rng(master_seed, index, attempt);
    let mut draw = |iv: Interval| iv.lerp(rng.random::<f64>());
    let g = Geometry {
        w_oa: draw(ranges.w_oa),
        w_ob: draw(ranges.w_ob),
        r0: draw(ranges.r0),
        r1: draw(ranges.r1),
        x_gnd: draw(ranges.x_gnd),
        l_f: draw(ranges.l_f),
    };
    let c1 = draw(ranges.c1);
    let c2 = draw(ranges.c2);
    (g, c1, c2)
}

/// Draws the geometry and loading capacitors of row `index`.
pub fn sample_geometry(index: u64, master_seed: u64, ranges: &SamplingRanges) -> (Geometry, f64, f64) {
    sample_attempt(index, 0, master_seed, ranges)
}

/// One row of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub performance: Performance,
    pub circuit: CircuitParams,
    pub geometry: Geometry,
}

impl Triple {
    fn check_floor(&self) -> Result<(), (&'static str, f64)> {
        let names = CircuitParams::FIELD_NAMES.iter().chain(&Geometry::FIELD_NAMES);
        let values = self.circuit.to_array().into_iter().chain(self.geometry.to_array());
        for (name, v) in names.zip(values) {
            if !(v.abs() >= TARGET_FLOOR) {
                return Err((name, v));
            }
        }
        Ok(())
    }

    fn to_row(self) -> [f64; CSV_COLUMNS] {
        let mut row = [0.0; CSV_COLUMNS];
        row[..4].copy_from_slice(&self.performance.to_array());
        row[4..10].copy_from_slice(&self.circuit.to_array());
        row[10..].copy_from_slice(&self.geometry.to_array());
        row
    }

    fn from_row(row: &[f64; CSV_COLUMNS]) -> Self {
        let mut p = [0.0; 4];
        let mut c = [0.0; 6];
        let mut g = [0.0; 6];
        p.copy_from_slice(&row[..4]);
        c.copy_from_slice(&row[4..10]);
        g.copy_from_slice(&row[10..]);
        Self {
            performance: Performance::from_array(p),
            circuit: CircuitParams::from_array(c),
            geometry: Geometry::from_array(g),
        }
    }
}

/// Builds row `index`, redrawing with a fresh attempt counter while the
/// surrogate rejects the sample.
pub fn generate_row(
    index: u64,
    master_seed: u64,
    ranges: &SamplingRanges,
    env: &EnvConfig,
) -> Result<Triple, DatasetError> {
    let mut last = None;
    for attempt in 0..MAX_ATTEMPTS {
        let (geometry, c1, c2) = sample_attempt(index, attempt, master_seed, ranges);
        let circuit = match geometry_to_circuit(&geometry, env) {
            Ok(c) => c,
            Err(e) => {
                last = Some(e);
                continue;
            }
        };
        let z = input_impedance(&circuit, c1, c2, env);
        let triple = Triple {
            performance: Performance {
                re_z: z.re,
                im_z: z.im,
                c1,
                c2,
            },
            circuit,
            geometry,
        };
        match triple.check_floor() {
            Ok(()) => return Ok(triple),
            Err((field, value)) => {
                last = Some(CircuitError::InvalidGeometry(format!(
                    "target {field} = {value} below magnitude floor"
                )));
            }
        }
    }
    Err(DatasetError::Exhausted {
        index,
        attempts: MAX_ATTEMPTS,
        last: last.expect("at least one attempt was made"),
    })
}

/// Per-coordinate mean and (population) standard deviation of the four inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: [f64; 4],
    pub std: [f64; 4],
}

impl NormStats {
    pub fn from_inputs<'a>(rows: impl IntoIterator<Item = &'a [f64; 4]>) -> Result<Self, DatasetError> {
        let rows: Vec<&[f64; 4]> = rows.into_iter().collect();
        if rows.is_empty() {
            return Err(DatasetError::Empty);
        }
        let n = rows.len() as f64;
        let mut mean = [0.0; 4];
        for r in &rows {
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = [0.0; 4];
        for r in &rows {
            for j in 0..4 {
                let d = r[j] - mean[j];
                var[j] += d * d;
            }
        }
        let mut std = [0.0; 4];
        for j in 0..4 {
            std[j] = (var[j] / n).sqrt();
            if !(std[j] > 0.0 && std[j].is_finite()) {
                return Err(DatasetError::ZeroVariance {
                    coord: Performance::FIELD_NAMES[j],
                });
            }
        }
        Ok(Self { mean, std })
    }

    pub fn normalize(&self, x: &Performance) -> [f64; 4] {
        let raw = x.to_array();
        std::array::from_fn(|j| (raw[j] - self.mean[j]) / self.std[j])
    }

    pub fn denormalize(&self, z: &[f64; 4]) -> Performance {
        Performance::from_array(std::array::from_fn(|j| z[j] * self.std[j] + self.mean[j]))
    }

    /// Normalises a batch of performances into an `n × 4` matrix.
    pub fn normalize_batch<'a>(&self, xs: impl IntoIterator<Item = &'a Performance>) -> Matrix {
        let mut data = Vec::new();
        let mut n = 0;
        for x in xs {
            data.extend_from_slice(&self.normalize(x));
            n += 1;
        }
        Matrix::from_vec(n, 4, data).expect("four columns per row")
    }
}

/// `(x − mean) / std` per coordinate.
pub fn normalize_input(x: &Performance, stats: &NormStats) -> [f64; 4] {
    stats.normalize(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub train_fraction: f64,
    pub split_seed: u64,
    pub norm_stats: NormStats,
    pub tags: Vec<SplitTag>,
}

/// Ordered collection of triples plus the metadata needed to regenerate it.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub triples: Vec<Triple>,
    pub seed: u64,
    pub ranges: SamplingRanges,
    pub env: EnvConfig,
    pub split: Option<SplitInfo>,
}

/// Generates `n` rows on all available cores.
pub fn generate(
    n: usize,
    master_seed: u64,
    ranges: &SamplingRanges,
    env: &EnvConfig,
) -> Result<Dataset, DatasetError> {
    let threads = std::thread::available_parallelism().map_or(1, |p| p.get());
    generate_with_threads(n, master_seed, ranges, env, threads)
}

/// Generates `n` rows using `threads` workers over contiguous index blocks.
/// The result does not depend on `threads`.
pub fn generate_with_threads(
    n: usize,
    master_seed: u64,
    ranges: &SamplingRanges,
    env: &EnvConfig,
    threads: usize,
) -> Result<Dataset, DatasetError> {
    if n == 0 {
        return Err(DatasetError::Empty);
    }
    ranges.validate()?;
    env.validate().map_err(|last| DatasetError::Exhausted {
        index: 0,
        attempts: 0,
        last,
    })?;
    let threads = threads.clamp(1, n);
    let block = n.div_ceil(threads);
    let mut triples = Vec::with_capacity(n);
    let chunks: Vec<Result<Vec<Triple>, DatasetError>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let start = t * block;
                let end = ((t + 1) * block).min(n);
                s.spawn(move || {
                    (start..end)
                        .map(|i| generate_row(i as u64, master_seed, ranges, env))
                        .collect()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("generator thread panicked"))
            .collect()
    });
    for chunk in chunks {
        triples.extend(chunk?);
    }
    Ok(Dataset {
        triples,
        seed: master_seed,
        ranges: *ranges,
        env: *env,
        split: None,
    })
}

/// Tags a random `⌊n · train_fraction⌋` rows as train, the rest as test, and
/// computes the input normalisation from the train rows.
pub fn split(d: Dataset, train_fraction: f64, seed: u64) -> Result<Dataset, DatasetError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DatasetError::InvalidFraction(train_fraction));
    }
    let n = d.triples.len();
    let n_train = (n as f64 * train_fraction).floor() as usize;
    if n_train == 0 {
        return Err(DatasetError::EmptyTrainSplit {
            train: n_train,
            total: n,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut tags = vec![SplitTag::Test; n];
    for &i in &order[..n_train] {
        tags[i] = SplitTag::Train;
    }
    with_tags(d, tags, train_fraction, seed)
}

fn with_tags(
    mut d: Dataset,
    tags: Vec<SplitTag>,
    train_fraction: f64,
    split_seed: u64,
) -> Result<Dataset, DatasetError> {
    let inputs: Vec<[f64; 4]> = d
        .triples
        .iter()
        .zip(&tags)
        .filter(|(_, t)| **t == SplitTag::Train)
        .map(|(row, _)| row.performance.to_array())
        .collect();
    let norm_stats = NormStats::from_inputs(&inputs)?;
    d.split = Some(SplitInfo {
        train_fraction,
        split_seed,
        norm_stats,
        tags,
    });
    Ok(d)
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn split_info(&self) -> Result<&SplitInfo, DatasetError> {
        self.split.as_ref().ok_or(DatasetError::MissingSplit)
    }

    pub fn norm_stats(&self) -> Result<&NormStats, DatasetError> {
        Ok(&self.split_info()?.norm_stats)
    }

    fn indices_tagged(&self, tag: SplitTag) -> Result<Vec<usize>, DatasetError> {
        Ok(self
            .split_info()?
            .tags
            .iter()
            .enumerate()
            .filter(|(_, t)| **t == tag)
            .map(|(i, _)| i)
            .collect())
    }

    /// Row indices of the train split, ascending.
    pub fn train_indices(&self) -> Result<Vec<usize>, DatasetError> {
        self.indices_tagged(SplitTag::Train)
    }

    /// Row indices of the test split, ascending.
    pub fn test_indices(&self) -> Result<Vec<usize>, DatasetError> {
        self.indices_tagged(SplitTag::Test)
    }

    /// Normalised model inputs for the given rows, `len × 4`.
    pub fn normalized_inputs(&self, rows: &[usize]) -> Result<Matrix, DatasetError> {
        let stats = self.norm_stats()?;
        Ok(stats.normalize_batch(rows.iter().map(|&i| &self.triples[i].performance)))
    }

    /// Circuit-parameter targets for the given rows, `len × 6`.
    pub fn circuit_targets(&self, rows: &[usize]) -> Matrix {
        let data = rows
            .iter()
            .flat_map(|&i| self.triples[i].circuit.to_array())
            .collect();
        Matrix::from_vec(rows.len(), 6, data).expect("six columns per row")
    }

    /// Physical-parameter targets for the given rows, `len × 6`.
    pub fn geometry_targets(&self, rows: &[usize]) -> Matrix {
        let data = rows
            .iter()
            .flat_map(|&i| self.triples[i].geometry.to_array())
            .collect();
        Matrix::from_vec(rows.len(), 6, data).expect("six columns per row")
    }

    /// Checks the target magnitude floor on every row.
    pub fn validate_targets(&self) -> Result<(), DatasetError> {
        for (row, t) in self.triples.iter().enumerate() {
            t.check_floor()
                .map_err(|(field, value)| DatasetError::TargetBelowFloor { row, field, value })?;
        }
        Ok(())
    }

    /// The CSV text, 17 significant digits per value.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.triples.len() * CSV_COLUMNS * 24 + 64);
        out.push_str(CSV_HEADER);
        out.push('\n');
        for t in &self.triples {
            for (j, v) in t.to_row().iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                write!(out, "{v:.16e}").expect("writing to a String cannot fail");
            }
            out.push('\n');
        }
        out
    }

    pub fn metadata(&self) -> DatasetMeta {
        DatasetMeta {
            format: META_FORMAT.to_string(),
            rows: self.triples.len(),
            seed: self.seed,
            ranges: self.ranges,
            env: self.env,
            split: self.split.as_ref().map(|s| SplitMeta {
                train_fraction: s.train_fraction,
                split_seed: s.split_seed,
                norm_stats: s.norm_stats,
                train_rows: collect_tagged(&s.tags, SplitTag::Train),
                test_rows: collect_tagged(&s.tags, SplitTag::Test),
            }),
        }
    }

    /// Writes the CSV and its JSON sidecar; returns the SHA-256 of the CSV bytes.
    pub fn save(&self, csv_path: &Path) -> Result<String, DatasetError> {
        let csv = self.to_csv_string();
        write_file(csv_path, csv.as_bytes())?;
        let meta = serde_json::to_string_pretty(&self.metadata()).expect("metadata is serialisable");
        write_file(&sidecar_path(csv_path), meta.as_bytes())?;
        Ok(checksum(csv.as_bytes()))
    }

    /// Loads a CSV and, when present, its sidecar.
    pub fn load(csv_path: &Path) -> Result<Dataset, DatasetError> {
        let text = fs::read_to_string(csv_path).map_err(|source| DatasetError::Io {
            path: csv_path.display().to_string(),
            source,
        })?;
        let triples = parse_csv(&text).map_err(|msg| DatasetError::Malformed {
            path: csv_path.display().to_string(),
            msg,
        })?;
        let meta_path = sidecar_path(csv_path);
        let malformed = |msg: String| DatasetError::Malformed {
            path: meta_path.display().to_string(),
            msg,
        };
        let meta: DatasetMeta = match fs::read_to_string(&meta_path) {
            Ok(s) => serde_json::from_str(&s).map_err(|e| malformed(e.to_string()))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Ok(Dataset {
                    triples,
                    seed: 0,
                    ranges: SamplingRanges::default(),
                    env: EnvConfig::default(),
                    split: None,
                });
            }
            Err(source) => {
                return Err(DatasetError::Io {
                    path: meta_path.display().to_string(),
                    source,
                })
            }
        };
        if meta.rows != triples.len() {
            return Err(malformed(format!(
                "sidecar declares {} rows, csv has {}",
                meta.rows,
                triples.len()
            )));
        }
        let split = match meta.split {
            None => None,
            Some(s) => {
                let mut tags = vec![None; triples.len()];
                for (rows, tag) in [(&s.train_rows, SplitTag::Train), (&s.test_rows, SplitTag::Test)] {
                    for &i in rows {
                        let slot = tags
                            .get_mut(i)
                            .ok_or_else(|| malformed(format!("split row {i} out of range")))?;
                        if slot.replace(tag).is_some() {
                            return Err(malformed(format!("row {i} tagged twice")));
                        }
                    }
                }
                let tags = tags
                    .into_iter()
                    .enumerate()
                    .map(|(i, t)| t.ok_or_else(|| malformed(format!("row {i} has no split tag"))))
                    .collect::<Result<Vec<_>, _>>()?;
                Some(SplitInfo {
                    train_fraction: s.train_fraction,
                    split_seed: s.split_seed,
                    norm_stats: s.norm_stats,
                    tags,
                })
            }
        };
        Ok(Dataset {
            triples,
            seed: meta.seed,
            ranges: meta.ranges,
            env: meta.env,
            split,
        })
    }
}

fn collect_tagged(tags: &[SplitTag], tag: SplitTag) -> Vec<usize> {
    tags.iter()
        .enumerate()
        .filter(|(_, t)| **t == tag)
        .map(|(i, _)| i)
        .collect()
}

const META_FORMAT: &str = "senn-dataset-v1";

/// JSON sidecar stored next to the dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format: String,
    pub rows: usize,
    pub seed: u64,
    pub ranges: SamplingRanges,
    pub env: EnvConfig,
    pub split: Option<SplitMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMeta {
    pub train_fraction: f64,
    pub split_seed: u64,
    pub norm_stats: NormStats,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

/// `data.csv` → `data.meta.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

/// Lower-case hex SHA-256.
pub fn checksum(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    fs::write(path, bytes).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_csv(text: &str) -> Result<Vec<Triple>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == CSV_HEADER => {}
        Some(h) => return Err(format!("unexpected header {h:?}")),
        None => return Err("empty file".into()),
    }
    let mut triples = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = [0.0; CSV_COLUMNS];
        let mut fields = line.split(',');
        for (j, slot) in row.iter_mut().enumerate() {
            let field = fields
                .next()
                .ok_or_else(|| format!("line {}: expected {CSV_COLUMNS} fields", lineno + 2))?;
            *slot = field
                .trim()
                .parse()
                .map_err(|e| format!("line {}, column {}: {e}", lineno + 2, j + 1))?;
        }
        if fields.next().is_some() {
            return Err(format!("line {}: more than {CSV_COLUMNS} fields", lineno + 2));
        }
        triples.push(Triple::from_row(&row));
    }
    if triples.is_empty() {
        return Err("no data rows".into());
    }
    Ok(triples)
}
