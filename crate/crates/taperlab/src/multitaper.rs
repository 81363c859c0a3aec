//! The per-angle correction pipeline: inverse transform to the time
//! domain, overlapped segmentation, tapered per-segment spectra, global
//! reassembly with overlap averaging, and extraction at the band centre.
//!
//! Layout conventions, fixed once for the whole crate:
//!
//! - The K sweep bins are placed on the N-point transform grid with the
//!   band centre at DC: sweep bin `k` goes to DFT bin `(k - k0) mod N`,
//!   `k0 = (K-1)/2`. The global frequency axis is therefore an offset
//!   axis around the centre frequency, and the centre lives at offset 0.
//! - The inverse transform is scaled 1/N and its output is rotated to
//!   centred order, so sample `j` sits at time `(j - N/2) * dt` and a
//!   physical delay `tau` peaks at positive time near `tau`. With this
//!   normalization `sum |T_u|^2 = (1/N) sum |R_u|^2`.
//! - Per-segment spectra are rotated to centred order the same way before
//!   being assigned to their global index range, so a segment's DC bin
//!   lands in the middle of its range and global bin 0 carries the band
//!   centre. Segment bins are assigned to the global spacing
//!   `dw = B/(K-1)` as given, even though an n-point transform natively
//!   resolves `1/(n dt)`; the index sets double as time positions and
//!   frequency bins by construction.

use num_complex::Complex64;

use crate::dpss::{dpss_basis, TaperBasis, TaperSpec};
use crate::error::{Error, Result};
use crate::fft;
use crate::parallel::par_map;
use crate::sweep::{FrequencyGrid, Pattern, SweepSet};

/// Transform length `2^(ceil(log2 K) + 3)` for a K-point sweep.
pub fn derived_fft_len(k: usize) -> usize {
    let mut exp = 0u32;
    while (1usize << exp) < k {
        exp += 1;
    }
    1usize << (exp + 3)
}

/// Sample interval of the padded time grid, `(1/B) * (K-1)/(N-1)`.
pub fn derived_dt(freq: &FrequencyGrid) -> f64 {
    let k = freq.len();
    let n = derived_fft_len(k);
    (k as f64 - 1.0) / (freq.bandwidth_hz() * (n as f64 - 1.0))
}

/// N-point complex time response for one angle, in centred order: sample
/// `j` corresponds to time index `m = j - N/2` and time `m * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeResponse {
    samples: Vec<Complex64>,
    dt_s: f64,
}

impl TimeResponse {
    pub fn new(samples: Vec<Complex64>, dt_s: f64) -> Result<Self> {
        let n = samples.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::Parameter(format!(
                "time response length must be a power of two >= 2, got {n}"
            )));
        }
        if !(dt_s > 0.0 && dt_s.is_finite()) {
            return Err(Error::Parameter(format!("sample interval must be positive, got {dt_s}")));
        }
        Ok(Self { samples, dt_s })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn dt_s(&self) -> f64 {
        self.dt_s
    }

    /// Time of sample `j` on the centred axis.
    pub fn time_at(&self, j: usize) -> f64 {
        (j as f64 - (self.len() / 2) as f64) * self.dt_s
    }

    /// Centred index `m` of sample `j`.
    pub fn m_index(&self, j: usize) -> i64 {
        j as i64 - (self.len() / 2) as i64
    }

    pub fn total_energy(&self) -> f64 {
        self.samples.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Index of the sample with the largest magnitude (first on ties).
    pub fn peak_index(&self) -> usize {
        let mut best = 0;
        let mut best_mag = -1.0;
        for (i, v) in self.samples.iter().enumerate() {
            let m = v.norm();
            if m > best_mag {
                best_mag = m;
                best = i;
            }
        }
        best
    }

    pub(crate) fn with_samples(&self, samples: Vec<Complex64>) -> TimeResponse {
        TimeResponse { samples, dt_s: self.dt_s }
    }
}

/// Zero-pads the K-point sweep column onto the N-point grid (band centre
/// at DC), inverse-transforms, and rotates to centred order.
pub fn to_time_domain(column: &[Complex64], freq: &FrequencyGrid) -> Result<TimeResponse> {
    let k = freq.len();
    if column.len() != k {
        return Err(Error::Parameter(format!(
            "column length {} does not match frequency grid K={k}",
            column.len()
        )));
    }
    let n = derived_fft_len(k);
    let k0 = freq.center_bin();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (idx, v) in column.iter().enumerate() {
        buf[(idx + n - k0) % n] = *v;
    }
    fft::inverse(&mut buf);
    let centred = fft::fftshift(&buf);
    TimeResponse::new(centred, derived_dt(freq))
}

/// Inverse of [`to_time_domain`]: rotates back to DFT order, forward
/// transforms, and reads the K-point band off the padded grid.
pub fn to_frequency_band(time: &TimeResponse, freq: &FrequencyGrid) -> Vec<Complex64> {
    let n = time.len();
    let k0 = freq.center_bin();
    let mut buf = fft::ifftshift(time.samples());
    fft::forward(&mut buf);
    (0..freq.len()).map(|k| buf[(k + n - k0) % n]).collect()
}

/// Overlapped segmentation of an N-point response: segment `i` (0-based)
/// covers samples `[i*s, i*s + n - 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentPlan {
    total_len: usize,
    n: usize,
    s: usize,
    count: usize,
}

impl SegmentPlan {
    pub fn total_len(&self) -> usize {
        self.total_len
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> usize {
        self.s
    }

    /// Number of segments `floor((N - n + s)/s)`.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn start(&self, i: usize) -> usize {
        i * self.s
    }

    /// Length of the assembled global axis, `(count-1)*s + n`.
    pub fn covered_len(&self) -> usize {
        (self.count - 1) * self.s + self.n
    }
}

/// Plans segmentation; requires `1 <= s <= n <= N/2`.
pub fn plan_segments(total_len: usize, n: usize, s: usize) -> Result<SegmentPlan> {
    if s < 1 || s > n || n > total_len / 2 {
        return Err(Error::Parameter(format!(
            "segmentation requires 1 <= s <= n <= N/2, got n={n}, s={s}, N={total_len}"
        )));
    }
    let count = (total_len - n + s) / s;
    Ok(SegmentPlan { total_len, n, s, count })
}

/// Weighted multitaper spectrum of one segment: the eigenvalue-weighted
/// convex combination of the n-point transforms of each tapered copy,
/// returned in centred order.
///
/// Computed as one transform of the segment times the effective window;
/// by linearity of the DFT this equals the term-by-term weighted sum.
pub fn segment_spectrum(segment: &[Complex64], basis: &TaperBasis) -> Result<Vec<Complex64>> {
    let window = basis.effective_window();
    segment_spectrum_windowed(segment, &window)
}

pub(crate) fn segment_spectrum_windowed(
    segment: &[Complex64],
    window: &[f64],
) -> Result<Vec<Complex64>> {
    if segment.len() != window.len() {
        return Err(Error::Parameter(format!(
            "segment length {} does not match taper length {}",
            segment.len(),
            window.len()
        )));
    }
    let mut buf: Vec<Complex64> = segment.iter().zip(window).map(|(x, w)| x * w).collect();
    fft::forward(&mut buf);
    Ok(fft::fftshift(&buf))
}

/// Global reassembled spectrum over the covered index range
/// `[-N/2 .. -N/2 + covered_len - 1]`, with one complex value and a
/// contribution count per bin.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledSpectrum {
    values: Vec<Complex64>,
    coverage: Vec<u32>,
    dw_hz: f64,
    m_start: i64,
}

impl AssembledSpectrum {
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn coverage_counts(&self) -> &[u32] {
        &self.coverage
    }

    /// Bin spacing, equal to the original sweep spacing `B/(K-1)`.
    pub fn dw_hz(&self) -> f64 {
        self.dw_hz
    }

    /// First covered global index (`-N/2`).
    pub fn m_start(&self) -> i64 {
        self.m_start
    }

    /// Value at global index `m`, if covered.
    pub fn bin(&self, m: i64) -> Option<Complex64> {
        let idx = m.checked_sub(self.m_start)?;
        if idx < 0 || idx as usize >= self.values.len() {
            None
        } else {
            Some(self.values[idx as usize])
        }
    }
}

/// Concatenates per-segment spectra onto the global axis, averaging bins
/// covered by several segments arithmetically.
pub fn assemble(
    plan: &SegmentPlan,
    per_segment: &[Vec<Complex64>],
    dw_hz: f64,
) -> Result<AssembledSpectrum> {
    if per_segment.len() != plan.count() {
        return Err(Error::Parameter(format!(
            "expected {} segment spectra, got {}",
            plan.count(),
            per_segment.len()
        )));
    }
    let len = plan.covered_len();
    let mut acc = vec![Complex64::new(0.0, 0.0); len];
    let mut coverage = vec![0u32; len];
    for (i, spec) in per_segment.iter().enumerate() {
        if spec.len() != plan.n() {
            return Err(Error::Parameter(format!(
                "segment spectrum {i} has length {}, expected {}",
                spec.len(),
                plan.n()
            )));
        }
        let start = plan.start(i);
        for (j, v) in spec.iter().enumerate() {
            acc[start + j] += v;
            coverage[start + j] += 1;
        }
    }
    for (v, c) in acc.iter_mut().zip(&coverage) {
        *v /= *c as f64;
    }
    Ok(AssembledSpectrum {
        values: acc,
        coverage,
        dw_hz,
        m_start: -((plan.total_len() / 2) as i64),
    })
}

/// Runs the whole chain for one angle and returns the corrected linear
/// magnitude at the band centre (global bin 0). Fails with a coverage
/// error when the assembled axis stops short of that bin.
pub fn correct_angle(
    column: &[Complex64],
    freq: &FrequencyGrid,
    n: usize,
    s: usize,
    t_hb: f64,
) -> Result<f64> {
    let time = to_time_domain(column, freq)?;
    let plan = plan_segments(time.len(), n, s)?;
    let spec = TaperSpec::from_t_hb(n, time.dt_s(), t_hb)?;
    let basis = dpss_basis(&spec)?;
    correct_from_time(&time, &plan, &basis, freq.spacing_hz())
}

/// Same chain given precomputed pieces; the tuner reuses the time response
/// across designs and the basis across angles.
pub fn correct_from_time(
    time: &TimeResponse,
    plan: &SegmentPlan,
    basis: &TaperBasis,
    dw_hz: f64,
) -> Result<f64> {
    let window = basis.effective_window();
    let spectra = segment_spectra_windowed(time, plan, &window)?;
    let assembled = assemble(plan, &spectra, dw_hz)?;
    extract_center(&assembled, plan)
}

fn segment_spectra_windowed(
    time: &TimeResponse,
    plan: &SegmentPlan,
    window: &[f64],
) -> Result<Vec<Vec<Complex64>>> {
    if plan.total_len() != time.len() {
        return Err(Error::Parameter(format!(
            "segment plan is for N={}, time response has N={}",
            plan.total_len(),
            time.len()
        )));
    }
    (0..plan.count())
        .map(|i| {
            let start = plan.start(i);
            segment_spectrum_windowed(&time.samples()[start..start + plan.n()], window)
        })
        .collect()
}

fn extract_center(assembled: &AssembledSpectrum, plan: &SegmentPlan) -> Result<f64> {
    match assembled.bin(0) {
        Some(v) => Ok(v.norm()),
        None => Err(Error::Coverage { n: plan.n(), s: plan.s() }),
    }
}

/// Applies [`correct_angle`] to every angle column and assembles the
/// corrected pattern at the band centre.
pub fn correct_pattern(sweep: &SweepSet, n: usize, s: usize, t_hb: f64) -> Result<Pattern> {
    let freq = *sweep.freq();
    let columns: Vec<(usize, Vec<Complex64>)> =
        (0..sweep.angles().len()).map(|a| (a, sweep.column(a))).collect();
    let angle_values: Vec<f64> = sweep.angles().values().to_vec();
    let results = par_map(columns, |(a, column)| {
        correct_angle(&column, &freq, n, s, t_hb).map_err(|e| Error::AtAngle {
            angle_deg: angle_values[a],
            source: Box::new(e),
        })
    });
    let mut values = Vec::with_capacity(results.len());
    for r in results {
        values.push(r?);
    }
    Pattern::new(sweep.angles().clone(), values, freq.f0_hz())
}
