//! Frequency/angle sweep containers, radiation patterns, and CSV interchange.
//!
//! All types are immutable after construction and validate their invariants
//! in the constructor, so they can be shared freely across worker threads.
//!
//! File formats:
//! - sweep CSV: header `freq_hz,angle_deg,re,im`, one row per
//!   (frequency, angle) sample, row order free;
//! - pattern CSV: header `angle_deg,mag_linear`.
//!
//! Values are written with 17 fractional digits in scientific notation,
//! which round-trips every finite `f64` exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

pub const SWEEP_HEADER: &str = "freq_hz,angle_deg,re,im";
pub const PATTERN_HEADER: &str = "angle_deg,mag_linear";

/// Relative tolerance when checking that grid steps are uniform.
const STEP_REL_TOL: f64 = 1e-6;

/// Uniform frequency sweep `[f_start, f_stop]` with `K` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrequencyGrid {
    f_start_hz: f64,
    f_stop_hz: f64,
    k: usize,
}

impl FrequencyGrid {
    pub fn new(f_start_hz: f64, f_stop_hz: f64, k: usize) -> Result<Self> {
        if !f_start_hz.is_finite() || !f_stop_hz.is_finite() {
            return Err(Error::Grid("frequency bounds must be finite".into()));
        }
        if f_stop_hz <= f_start_hz {
            return Err(Error::Grid(format!(
                "f_stop ({f_stop_hz}) must exceed f_start ({f_start_hz})"
            )));
        }
        if k < 2 {
            return Err(Error::Grid(format!("need at least 2 frequency points, got {k}")));
        }
        Ok(Self { f_start_hz, f_stop_hz, k })
    }

    pub fn f_start_hz(&self) -> f64 {
        self.f_start_hz
    }

    pub fn f_stop_hz(&self) -> f64 {
        self.f_stop_hz
    }

    /// Number of sweep points K.
    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing_hz(&self) -> f64 {
        (self.f_stop_hz - self.f_start_hz) / (self.k - 1) as f64
    }

    /// Band centre.
    pub fn f0_hz(&self) -> f64 {
        (self.f_start_hz + self.f_stop_hz) / 2.0
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.f_stop_hz - self.f_start_hz
    }

    /// Index of the sweep point at (or, for even K, just below) the band
    /// centre.
    pub fn center_bin(&self) -> usize {
        (self.k - 1) / 2
    }

    pub fn frequency_at(&self, idx: usize) -> f64 {
        self.f_start_hz + idx as f64 * self.spacing_hz()
    }
}

/// Strictly increasing, uniformly stepped rotation angles spanning less
/// than a full turn (a closed sweep must not list one direction twice, so
/// e.g. 0 and 360 degrees cannot both appear).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngleGrid {
    angles_deg: Vec<f64>,
}

impl AngleGrid {
    pub fn new(angles_deg: Vec<f64>) -> Result<Self> {
        if angles_deg.len() < 2 {
            return Err(Error::Grid(format!(
                "need at least 2 angles, got {}",
                angles_deg.len()
            )));
        }
        if angles_deg.iter().any(|a| !a.is_finite()) {
            return Err(Error::Grid("angles must be finite".into()));
        }
        let step = angles_deg[1] - angles_deg[0];
        if step <= 0.0 {
            return Err(Error::Grid("angles must be strictly increasing".into()));
        }
        for w in angles_deg.windows(2) {
            let d = w[1] - w[0];
            if d <= 0.0 {
                return Err(Error::Grid("angles must be strictly increasing".into()));
            }
            if (d - step).abs() > STEP_REL_TOL * step {
                return Err(Error::Grid(format!(
                    "non-uniform angle step: {d} vs {step}"
                )));
            }
        }
        let span = angles_deg[angles_deg.len() - 1] - angles_deg[0];
        if span >= 360.0 - 1e-9 {
            return Err(Error::Grid(format!(
                "angle span {span} covers a full turn; the same direction would be counted twice"
            )));
        }
        Ok(Self { angles_deg })
    }

    /// Uniform grid `start, start+step, ..` with `count` points.
    pub fn uniform(start_deg: f64, step_deg: f64, count: usize) -> Result<Self> {
        let angles = (0..count).map(|i| start_deg + i as f64 * step_deg).collect();
        Self::new(angles)
    }

    /// Number of angles A.
    pub fn len(&self) -> usize {
        self.angles_deg.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step_deg(&self) -> f64 {
        self.angles_deg[1] - self.angles_deg[0]
    }

    pub fn values(&self) -> &[f64] {
        &self.angles_deg
    }

    pub fn get(&self, idx: usize) -> f64 {
        self.angles_deg[idx]
    }

    /// Element-wise match within 1e-9 degrees; used to pair candidate and
    /// reference patterns coming from separate files.
    pub fn approx_same(&self, other: &AngleGrid) -> bool {
        self.len() == other.len()
            && self
                .angles_deg
                .iter()
                .zip(&other.angles_deg)
                .all(|(a, b)| (a - b).abs() <= 1e-9)
    }
}

/// Complex transmission responses over a K x A frequency/angle grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSet {
    freq: FrequencyGrid,
    angles: AngleGrid,
    /// Row-major K x A: `data[k * A + a]`.
    data: Vec<Complex64>,
}

impl SweepSet {
    pub fn new(freq: FrequencyGrid, angles: AngleGrid, data: Vec<Complex64>) -> Result<Self> {
        let expect = freq.len() * angles.len();
        if data.len() != expect {
            return Err(Error::Grid(format!(
                "data length {} does not match K x A = {} x {}",
                data.len(),
                freq.len(),
                angles.len()
            )));
        }
        if data.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Grid("sweep data must be finite".into()));
        }
        Ok(Self { freq, angles, data })
    }

    pub fn freq(&self) -> &FrequencyGrid {
        &self.freq
    }

    pub fn angles(&self) -> &AngleGrid {
        &self.angles
    }

    pub fn value(&self, freq_idx: usize, angle_idx: usize) -> Complex64 {
        self.data[freq_idx * self.angles.len() + angle_idx]
    }

    /// The K-point frequency response for one angle.
    pub fn column(&self, angle_idx: usize) -> Vec<Complex64> {
        (0..self.freq.len()).map(|k| self.value(k, angle_idx)).collect()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }
}

/// Per-angle scalar response at the band centre: a corrected or reference
/// radiation pattern in linear magnitude.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pattern {
    angles: AngleGrid,
    values: Vec<f64>,
    f0_hz: f64,
}

impl Pattern {
    pub fn new(angles: AngleGrid, values: Vec<f64>, f0_hz: f64) -> Result<Self> {
        if values.len() != angles.len() {
            return Err(Error::Grid(format!(
                "pattern length {} does not match angle count {}",
                values.len(),
                angles.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Grid(
                "pattern values must be finite and non-negative".into(),
            ));
        }
        if !f0_hz.is_finite() || f0_hz <= 0.0 {
            return Err(Error::Grid("pattern centre frequency must be positive".into()));
        }
        Ok(Self { angles, values, f0_hz })
    }

    pub fn angles(&self) -> &AngleGrid {
        &self.angles
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn f0_hz(&self) -> f64 {
        self.f0_hz
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Value-wise arithmetic mean of several patterns on the same grid.
    pub fn mean(patterns: &[&Pattern]) -> Result<Pattern> {
        let first = patterns
            .first()
            .ok_or_else(|| Error::Parameter("cannot average zero patterns".into()))?;
        let mut acc = vec![0.0; first.values.len()];
        for p in patterns {
            if !p.angles.approx_same(&first.angles) {
                return Err(Error::Parameter("patterns on different angle grids".into()));
            }
            for (a, v) in acc.iter_mut().zip(&p.values) {
                *a += v;
            }
        }
        let n = patterns.len() as f64;
        for a in acc.iter_mut() {
            *a /= n;
        }
        Pattern::new(first.angles.clone(), acc, first.f0_hz)
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| Error::Io { path: path.display().to_string(), source })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io { path: path.display().to_string(), source })
}

fn load_err(ctx: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Load { context: format!("{ctx}:{line}"), msg: msg.into() }
}

fn parse_field(ctx: &str, line: usize, field: &str, what: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| load_err(ctx, line, format!("cannot parse {what} from {field:?}")))?;
    if !v.is_finite() {
        return Err(load_err(ctx, line, format!("{what} must be finite, got {field:?}")));
    }
    Ok(v)
}

/// Distinct sorted values, matched by exact bit pattern (identical text
/// fields parse to identical floats; anything else shows up as a grid
/// uniformity error).
fn distinct(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn index_of(sorted: &[f64], x: f64) -> usize {
    sorted.partition_point(|v| v.total_cmp(&x) == std::cmp::Ordering::Less)
}

fn check_uniform(ctx: &str, what: &str, sorted: &[f64]) -> Result<()> {
    let step = sorted[1] - sorted[0];
    for w in sorted.windows(2) {
        let d = w[1] - w[0];
        if (d - step).abs() > STEP_REL_TOL * step.abs() {
            return Err(Error::Load {
                context: ctx.into(),
                msg: format!("non-uniform {what} grid: step {d} vs {step}"),
            });
        }
    }
    Ok(())
}

/// Parses a sweep CSV from any reader; `ctx` names the source for errors.
pub fn parse_sweep<R: BufRead>(reader: R, ctx: &str) -> Result<SweepSet> {
    let mut rows: Vec<(usize, f64, f64, f64, f64)> = Vec::new();
    let mut saw_header = false;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| Error::Io { path: ctx.into(), source })?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if !saw_header {
            if t != SWEEP_HEADER {
                return Err(load_err(ctx, line_no, format!("expected header {SWEEP_HEADER:?}, got {t:?}")));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = t.split(',').collect();
        if fields.len() != 4 {
            return Err(load_err(ctx, line_no, format!("expected 4 fields, got {}", fields.len())));
        }
        let f = parse_field(ctx, line_no, fields[0], "freq_hz")?;
        let a = parse_field(ctx, line_no, fields[1], "angle_deg")?;
        let re = parse_field(ctx, line_no, fields[2], "re")?;
        let im = parse_field(ctx, line_no, fields[3], "im")?;
        rows.push((line_no, f, a, re, im));
    }
    if !saw_header {
        return Err(Error::Load { context: ctx.into(), msg: "empty file".into() });
    }
    if rows.is_empty() {
        return Err(Error::Load { context: ctx.into(), msg: "no data rows".into() });
    }

    let freqs = distinct(&rows.iter().map(|r| r.1).collect::<Vec<_>>());
    let angles = distinct(&rows.iter().map(|r| r.2).collect::<Vec<_>>());
    if freqs.len() < 2 {
        return Err(Error::Load { context: ctx.into(), msg: "need at least 2 distinct frequencies".into() });
    }
    check_uniform(ctx, "frequency", &freqs)?;
    let (k, a_count) = (freqs.len(), angles.len());

    let mut cells: Vec<Option<(f64, f64)>> = vec![None; k * a_count];
    for &(line_no, f, a, re, im) in &rows {
        let ki = index_of(&freqs, f);
        let ai = index_of(&angles, a);
        let cell = &mut cells[ki * a_count + ai];
        if cell.is_some() {
            return Err(load_err(
                ctx,
                line_no,
                format!("duplicate sample for freq={f} Hz, angle={a} deg"),
            ));
        }
        *cell = Some((re, im));
    }
    for (idx, cell) in cells.iter().enumerate() {
        if cell.is_none() {
            let (ki, ai) = (idx / a_count, idx % a_count);
            return Err(Error::Load {
                context: ctx.into(),
                msg: format!(
                    "missing sample for freq={} Hz, angle={} deg",
                    freqs[ki], angles[ai]
                ),
            });
        }
    }

    let grid = FrequencyGrid::new(freqs[0], freqs[k - 1], k)?;
    let angle_grid = AngleGrid::new(angles)?;
    let data = cells
        .into_iter()
        .map(|c| {
            let (re, im) = c.unwrap();
            Complex64::new(re, im)
        })
        .collect();
    SweepSet::new(grid, angle_grid, data)
}

pub fn load_sweep(path: impl AsRef<Path>) -> Result<SweepSet> {
    let path = path.as_ref();
    parse_sweep(open(path)?, &path.display().to_string())
}

pub fn write_sweep<W: Write>(sweep: &SweepSet, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for k in 0..sweep.freq().len() {
        let f = sweep.freq().frequency_at(k);
        for a in 0..sweep.angles().len() {
            let v = sweep.value(k, a);
            writeln!(
                w,
                "{:.17e},{:.17e},{:.17e},{:.17e}",
                f,
                sweep.angles().get(a),
                v.re,
                v.im
            )?;
        }
    }
    Ok(())
}

pub fn save_sweep(sweep: &SweepSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    write_sweep(sweep, &mut w).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

/// Parses a pattern CSV; `f0_hz` tags the pattern with its band centre
/// (the file format carries no frequency column).
pub fn parse_pattern<R: BufRead>(reader: R, ctx: &str, f0_hz: f64) -> Result<Pattern> {
    let mut rows: Vec<(usize, f64, f64)> = Vec::new();
    let mut saw_header = false;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| Error::Io { path: ctx.into(), source })?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if !saw_header {
            if t != PATTERN_HEADER {
                return Err(load_err(ctx, line_no, format!("expected header {PATTERN_HEADER:?}, got {t:?}")));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = t.split(',').collect();
        if fields.len() != 2 {
            return Err(load_err(ctx, line_no, format!("expected 2 fields, got {}", fields.len())));
        }
        let a = parse_field(ctx, line_no, fields[0], "angle_deg")?;
        let m = parse_field(ctx, line_no, fields[1], "mag_linear")?;
        if m < 0.0 {
            return Err(load_err(ctx, line_no, format!("negative magnitude {m}")));
        }
        rows.push((line_no, a, m));
    }
    if !saw_header {
        return Err(Error::Load { context: ctx.into(), msg: "empty file".into() });
    }
    if rows.len() < 2 {
        return Err(Error::Load {
            context: ctx.into(),
            msg: format!("need at least 2 pattern rows, got {}", rows.len()),
        });
    }
    rows.sort_by(|x, y| x.1.total_cmp(&y.1));
    for w in rows.windows(2) {
        if w[0].1 == w[1].1 {
            return Err(load_err(ctx, w[1].0, format!("duplicate angle {} deg", w[1].1)));
        }
    }
    let angles = AngleGrid::new(rows.iter().map(|r| r.1).collect())?;
    let values = rows.iter().map(|r| r.2).collect();
    Pattern::new(angles, values, f0_hz)
}

pub fn load_pattern(path: impl AsRef<Path>, f0_hz: f64) -> Result<Pattern> {
    let path = path.as_ref();
    parse_pattern(open(path)?, &path.display().to_string(), f0_hz)
}

pub fn write_pattern<W: Write>(pattern: &Pattern, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{PATTERN_HEADER}")?;
    for (a, v) in pattern.angles().values().iter().zip(pattern.values()) {
        writeln!(w, "{:.17e},{:.17e}", a, v)?;
    }
    Ok(())
}

pub fn save_pattern(pattern: &Pattern, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    write_pattern(pattern, &mut w).map_err(|source| Error::Io { path: path.display().to_string(), source })
}
