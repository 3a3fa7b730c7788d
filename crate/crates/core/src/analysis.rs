//! Interpretation of attention matrices: the nearest-vs-long contrast, the
//! distance-resolved correlation strength and its decay length, plus the
//! experiment drivers behind the exported tables.

use std::io::Write;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attention::AttentionMatrix;
use crate::classifier::{accuracy, train, TrainConfig};
use crate::error::{Error, Result};
use crate::hamiltonian::{
    derive_seed, second_derivative_boundaries, BoundaryOptions, Dataset, GroundStateRecord, LabelThresholds,
    PhaseLabel, Solver,
};
use crate::report::{sig12, write_row};
use crate::scalar::Real;

/// Below this, `q_near + q_long` is treated as zero.
pub const CONTRAST_EPS: f64 = 1e-12;

/// Row sums closer than this are treated as tied when picking the reference.
pub const TIE_TOL: f64 = 1e-12;

/// Fitted decay lengths are capped at `1 / FLAT_SLOPE`.
pub const FLAT_SLOPE: f64 = 1e-12;

fn require_three<T: Real>(m: &AttentionMatrix<T>) -> Result<()> {
    if m.n() < 3 {
        return Err(Error::Size(format!("need at least 3 qubits, got {}", m.n())));
    }
    Ok(())
}

/// Index of the least-correlated qubit: the smallest off-diagonal row sum,
/// ties going to the lowest index. Sums within [`TIE_TOL`] count as tied so
/// that mirror-symmetric matrices do not depend on summation order.
pub fn reference_qubit<T: Real>(m: &AttentionMatrix<T>) -> Result<usize> {
    require_three(m)?;
    let mut best = (0, f64::INFINITY);
    for k in 0..m.n() {
        let s: f64 = (0..m.n()).filter(|&j| j != k).map(|j| m.get(k, j).as_f64()).sum();
        if s < best.1 - TIE_TOL {
            best = (k, s);
        }
    }
    Ok(best.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Before,
    After,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Before => "before",
            Side::After => "after",
        }
    }
}

/// The longer stretch of the chain next to `k`; a tie picks the qubits after it.
pub fn side_of(n: usize, k: usize) -> Side {
    if k > n - 1 - k {
        Side::Before
    } else {
        Side::After
    }
}

/// Qubit indices of the reference qubit plus its chosen side, ordered by
/// distance from the reference.
fn side_indices(n: usize, k: usize, side: Side) -> Vec<usize> {
    match side {
        Side::After => (k..n).collect(),
        Side::Before => (0..=k).rev().collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContrastResult {
    /// Grid coordinates; NaN until attached with [`ContrastResult::at`].
    pub h1: f64,
    pub h2: f64,
    pub reference_qubit: usize,
    pub side: Side,
    pub q_near: f64,
    pub q_long: f64,
    #[serde(rename = "C")]
    pub c: f64,
}

impl ContrastResult {
    pub fn at(mut self, h1: f64, h2: f64) -> Self {
        self.h1 = h1;
        self.h2 = h2;
        self
    }
}

/// (a − b)/(a + b), undefined when the denominator vanishes.
pub fn contrast_value(q_near: f64, q_long: f64) -> Result<f64> {
    let d = q_near + q_long;
    if !(d.abs() > CONTRAST_EPS) {
        return Err(Error::UndefinedContrast(d));
    }
    Ok((q_near - q_long) / d)
}

/// Contrast between the reference qubit's nearest neighbour and the
/// farthest qubit on its chosen side.
pub fn contrast<T: Real>(m: &AttentionMatrix<T>) -> Result<ContrastResult> {
    let k = reference_qubit(m)?;
    let side = side_of(m.n(), k);
    let idx = side_indices(m.n(), k, side);
    let q_near = m.get(k, idx[1]).as_f64();
    let q_long = m.get(k, idx[idx.len() - 1]).as_f64();
    Ok(ContrastResult {
        h1: f64::NAN,
        h2: f64::NAN,
        reference_qubit: k,
        side,
        q_near,
        q_long,
        c: contrast_value(q_near, q_long)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationProfile {
    pub reference_qubit: usize,
    pub side: Side,
    pub n_sub: usize,
    /// `f[r - 1]` is the mean attention at separation `r`.
    pub f: Vec<f64>,
    pub xi: f64,
    pub fit_slope: f64,
    pub fit_intercept: f64,
    pub fit_points_used: usize,
    /// Set when the fitted profile does not decay.
    pub non_decaying: bool,
}

/// Least-squares line through `(x, y)`; returns (slope, intercept).
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Fit(format!("need at least 2 points, got {}", x.len().min(y.len()))));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Decay length from the fitted slope of ln f(r).
pub fn xi_from_slope(slope: f64) -> (f64, bool) {
    if slope < -FLAT_SLOPE {
        (-1.0 / slope, false)
    } else {
        (1.0 / slope.abs().max(FLAT_SLOPE), true)
    }
}

/// Mean attention at each separation within a square block given by `idx`.
pub fn distance_profile<T: Real>(m: &AttentionMatrix<T>, idx: &[usize]) -> Vec<f64> {
    let n_sub = idx.len();
    (1..n_sub)
        .map(|r| {
            let s: f64 = (0..n_sub - r).map(|i| m.get(idx[i], idx[i + r]).as_f64()).sum();
            s / (n_sub - r) as f64
        })
        .collect()
}

/// Distance profile on the reference qubit's side and its exponential fit.
pub fn correlation_profile<T: Real>(m: &AttentionMatrix<T>) -> Result<CorrelationProfile> {
    let k = reference_qubit(m)?;
    let side = side_of(m.n(), k);
    let idx = side_indices(m.n(), k, side);
    if idx.len() < 3 {
        return Err(Error::Size(format!("side submatrix has {} qubits, need 3", idx.len())));
    }
    let f = distance_profile(m, &idx);
    let (r, lnf): (Vec<f64>, Vec<f64>) = f
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 1e-12)
        .map(|(i, &v)| ((i + 1) as f64, v.ln()))
        .unzip();
    let (slope, intercept) = linear_fit(&r, &lnf)?;
    let (xi, non_decaying) = xi_from_slope(slope);
    Ok(CorrelationProfile {
        reference_qubit: k,
        side,
        n_sub: idx.len(),
        f,
        xi,
        fit_slope: slope,
        fit_intercept: intercept,
        fit_points_used: r.len(),
        non_decaying,
    })
}

/// Locations where the sequence changes sign, by linear interpolation.
/// Exact zeros are skipped rather than counted twice.
pub fn sign_changes(points: &[(f64, f64)]) -> Vec<f64> {
    let nonzero: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.1 != 0.0).collect();
    nonzero
        .windows(2)
        .filter(|w| (w[0].1 < 0.0) != (w[1].1 < 0.0))
        .map(|w| {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            x0 + (x1 - x0) * y0 / (y0 - y1)
        })
        .collect()
}

/// Centres of the segments that `boundaries` cut `[lo, hi]` into.
pub fn segment_midpoints(lo: f64, hi: f64, boundaries: &[f64]) -> Vec<f64> {
    let mut edges = vec![lo];
    edges.extend(boundaries.iter().copied().filter(|b| *b > lo && *b < hi));
    edges.push(hi);
    edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

/// Fixed-h1 cut through the phase diagram.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    /// Requested h1; snapped to the nearest dataset grid value.
    pub h1_target: f64,
    pub h2: [f64; 2],
    pub h2_step: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            h1_target: 0.39,
            h2: [-1.6, 1.6],
            h2_step: 0.05,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.h2_step > 0.0) || !(self.h2[1] >= self.h2[0]) {
            return Err(Error::Config("sweep needs h2 max >= min and a positive step".into()));
        }
        Ok(())
    }

    /// h2 values from the lower end in whole steps, endpoint included.
    pub fn h2_values(&self) -> Vec<f64> {
        let n = ((self.h2[1] - self.h2[0]) / self.h2_step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.h2[0] + i as f64 * self.h2_step).collect()
    }
}

/// The entry of `values` closest to `target`; ties go to the first.
pub fn nearest_value(values: &[f64], target: f64) -> Option<f64> {
    values
        .iter()
        .copied()
        .fold(None, |best: Option<f64>, v| match best {
            Some(b) if (b - target).abs() <= (v - target).abs() => Some(b),
            _ => Some(v),
        })
}

/// Ground states along `h2_values` at fixed `h1`, solved in parallel.
pub fn sweep_ground_states(
    n_sites: usize,
    h1: f64,
    h2_values: &[f64],
    seed: u64,
    thresholds: &LabelThresholds,
    solver: Solver,
) -> Result<Vec<GroundStateRecord>> {
    h2_values
        .par_iter()
        .enumerate()
        .map(|(k, &h2)| GroundStateRecord::compute(n_sites, h1, h2, derive_seed(seed, k as u64), thresholds, solver))
        .collect()
}

/// Energy-curvature boundaries along a uniformly spaced sweep.
pub fn sweep_boundaries(records: &[GroundStateRecord], opts: &BoundaryOptions) -> Result<Vec<f64>> {
    if records.len() < 2 {
        return Err(Error::Size("sweep needs at least 2 points".into()));
    }
    let e: Vec<f64> = records.iter().map(|r| r.energy).collect();
    let step = records[1].h2 - records[0].h2;
    second_derivative_boundaries(records[0].h2, step, &e, opts)
}

pub fn write_contrast_csv<W: Write>(mut w: W, rows: &[(ContrastResult, PhaseLabel)]) -> std::io::Result<()> {
    write_row(&mut w, &["h1", "h2", "label", "reference_qubit", "side", "q_near", "q_long", "C"])?;
    for (c, l) in rows {
        write_row(
            &mut w,
            &[
                sig12(c.h1),
                sig12(c.h2),
                l.to_string(),
                c.reference_qubit.to_string(),
                c.side.as_str().to_string(),
                sig12(c.q_near),
                sig12(c.q_long),
                sig12(c.c),
            ],
        )?;
    }
    Ok(())
}

pub fn write_xi_csv<W: Write>(mut w: W, rows: &[(f64, f64, PhaseLabel, CorrelationProfile)]) -> std::io::Result<()> {
    write_row(
        &mut w,
        &["h1", "h2", "label", "reference_qubit", "side", "n_sub", "xi", "fit_slope", "fit_points", "non_decaying"],
    )?;
    for (h1, h2, l, p) in rows {
        write_row(
            &mut w,
            &[
                sig12(*h1),
                sig12(*h2),
                l.to_string(),
                p.reference_qubit.to_string(),
                p.side.as_str().to_string(),
                p.n_sub.to_string(),
                sig12(p.xi),
                sig12(p.fit_slope),
                p.fit_points_used.to_string(),
                p.non_decaying.to_string(),
            ],
        )?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseRow {
    pub h1: f64,
    pub h2: f64,
    pub string_order: f64,
    pub nn_xx: f64,
    pub energy: f64,
    pub label: PhaseLabel,
}

/// A detected boundary point. `axis` names the coordinate that was scanned
/// while the other one was held fixed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryPoint {
    pub axis: &'static str,
    pub h1: f64,
    pub h2: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseDiagram {
    pub rows: Vec<PhaseRow>,
    pub boundaries: Vec<BoundaryPoint>,
}

/// Grid of string order and labels plus curvature boundaries scanned along
/// every grid row and column.
pub fn phase_diagram(dataset: &Dataset, opts: &BoundaryOptions) -> Result<PhaseDiagram> {
    let grid = dataset.config.grid;
    if dataset.records.len() != grid.len() {
        return Err(Error::Missing(format!(
            "dataset has {} records, grid needs {}",
            dataset.records.len(),
            grid.len()
        )));
    }
    let rows: Vec<PhaseRow> = dataset
        .records
        .iter()
        .map(|r| PhaseRow {
            h1: r.h1,
            h2: r.h2,
            string_order: r.string_order,
            nn_xx: r.nn_xx,
            energy: r.energy,
            label: r.label,
        })
        .collect();
    let [n1, n2] = grid.shape;
    let h1s = grid.h1_values();
    let h2s = grid.h2_values();
    let mut boundaries = Vec::new();
    if n2 >= 5 {
        let step = h2s[1] - h2s[0];
        for (a, &h1) in h1s.iter().enumerate() {
            let e: Vec<f64> = (0..n2).map(|b| rows[a * n2 + b].energy).collect();
            for h2 in second_derivative_boundaries(h2s[0], step, &e, opts)? {
                boundaries.push(BoundaryPoint { axis: "h2", h1, h2 });
            }
        }
    }
    if n1 >= 5 {
        let step = h1s[1] - h1s[0];
        for (b, &h2) in h2s.iter().enumerate() {
            let e: Vec<f64> = (0..n1).map(|a| rows[a * n2 + b].energy).collect();
            for h1 in second_derivative_boundaries(h1s[0], step, &e, opts)? {
                boundaries.push(BoundaryPoint { axis: "h1", h1, h2 });
            }
        }
    }
    Ok(PhaseDiagram { rows, boundaries })
}

impl PhaseDiagram {
    pub fn write_grid_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write_row(&mut w, &["h1", "h2", "string_order", "nn_xx", "energy", "label"])?;
        for r in &self.rows {
            write_row(
                &mut w,
                &[
                    sig12(r.h1),
                    sig12(r.h2),
                    sig12(r.string_order),
                    sig12(r.nn_xx),
                    sig12(r.energy),
                    r.label.to_string(),
                ],
            )?;
        }
        Ok(())
    }

    pub fn write_boundaries_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write_row(&mut w, &["scan_axis", "h1", "h2"])?;
        for b in &self.boundaries {
            write_row(&mut w, &[b.axis.to_string(), sig12(b.h1), sig12(b.h2)])?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyExperiment {
    pub sizes: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
    pub train: TrainConfig,
}

/// One (size, repeat) run.
#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyCell {
    pub size: usize,
    pub repeat: usize,
    pub seed: u64,
    pub accuracy: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AccuracySummary {
    pub size: usize,
    pub mean: f64,
    /// Half-width of the normal-approximation 95% interval.
    pub ci95: f64,
    pub std: f64,
    pub completed: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyTable {
    pub cells: Vec<AccuracyCell>,
    pub summary: Vec<AccuracySummary>,
}

pub fn cell_seed(master: u64, size: usize, repeat: usize) -> u64 {
    derive_seed(derive_seed(master, size as u64), repeat as u64)
}

/// Sample mean, sample standard deviation and 95% half-width.
pub fn mean_std_ci(values: &[f64]) -> (f64, f64, f64) {
    let k = values.len();
    if k == 0 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    if k == 1 {
        return (mean, 0.0, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    let std = var.sqrt();
    (mean, std, 1.959963984540054 * std / (k as f64).sqrt())
}

/// Trains on random subsets of the dataset and scores on the held-out rest.
///
/// Each cell draws its subset and training seed from a seed derived from
/// (master seed, size, repeat). A failing cell is recorded and skipped.
pub fn accuracy_experiment(dataset: &Dataset, exp: &AccuracyExperiment) -> Result<AccuracyTable> {
    if exp.repeats < 2 {
        return Err(Error::Config("accuracy experiment needs at least 2 repeats".into()));
    }
    let total = dataset.records.len();
    if let Some(&bad) = exp.sizes.iter().find(|&&s| s == 0 || s >= total) {
        return Err(Error::Config(format!(
            "training size {bad} must be between 1 and {}",
            total.saturating_sub(1)
        )));
    }
    exp.train.validate()?;
    let states = (0..total).map(|k| dataset.state(k)).collect::<Result<Vec<_>>>()?;
    let labelled: Vec<_> = states.iter().zip(&dataset.records).map(|(s, r)| (s, r.label)).collect();

    let jobs: Vec<(usize, usize)> = exp
        .sizes
        .iter()
        .flat_map(|&s| (0..exp.repeats).map(move |r| (s, r)))
        .collect();
    let cells: Vec<AccuracyCell> = jobs
        .par_iter()
        .map(|&(size, repeat)| {
            let seed = cell_seed(exp.seed, size, repeat);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut chosen = vec![false; total];
            for k in sample(&mut rng, total, size) {
                chosen[k] = true;
            }
            let (tr, te): (Vec<_>, Vec<_>) = labelled.iter().enumerate().partition(|(k, _)| chosen[*k]);
            let tr: Vec<_> = tr.into_iter().map(|(_, s)| *s).collect();
            let te: Vec<_> = te.into_iter().map(|(_, s)| *s).collect();
            let cfg = TrainConfig {
                seed,
                ..exp.train.clone()
            };
            let outcome = train(&tr, &cfg).and_then(|o| accuracy(&te, &o.model));
            let (accuracy, error) = match outcome {
                Ok(a) => (Some(a), None),
                Err(e) => (None, Some(e.to_string())),
            };
            AccuracyCell {
                size,
                repeat,
                seed,
                accuracy,
                error,
            }
        })
        .collect();

    let summary = exp
        .sizes
        .iter()
        .map(|&size| {
            let of_size: Vec<&AccuracyCell> = cells.iter().filter(|c| c.size == size).collect();
            let acc: Vec<f64> = of_size.iter().filter_map(|c| c.accuracy).collect();
            let (mean, std, ci95) = mean_std_ci(&acc);
            AccuracySummary {
                size,
                mean,
                ci95,
                std,
                completed: acc.len(),
                failed: of_size.len() - acc.len(),
            }
        })
        .collect();
    Ok(AccuracyTable { cells, summary })
}

impl AccuracyTable {
    pub fn write_summary_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write_row(&mut w, &["size", "mean_accuracy", "ci95_half_width", "std", "completed", "failed"])?;
        for s in &self.summary {
            write_row(
                &mut w,
                &[
                    s.size.to_string(),
                    sig12(s.mean),
                    sig12(s.ci95),
                    sig12(s.std),
                    s.completed.to_string(),
                    s.failed.to_string(),
                ],
            )?;
        }
        Ok(())
    }

    pub fn write_cells_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write_row(&mut w, &["size", "repeat", "seed", "accuracy", "error"])?;
        for c in &self.cells {
            write_row(
                &mut w,
                &[
                    c.size.to_string(),
                    c.repeat.to_string(),
                    c.seed.to_string(),
                    c.accuracy.map(sig12).unwrap_or_default(),
                    c.error.as_deref().unwrap_or("").replace([',', '\n'], ";"),
                ],
            )?;
        }
        Ok(())
    }
}
