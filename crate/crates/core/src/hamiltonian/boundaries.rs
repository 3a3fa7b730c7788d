use crate::error::{Error, Result};

/// Peak-picking parameters for [`second_derivative_boundaries`].
#[derive(Clone, Copy, Debug)]
pub struct BoundaryOptions {
    /// Minimum prominence as a fraction of the curvature range along the row.
    pub relative_prominence: f64,
    /// Absolute prominence floor.
    pub min_prominence: f64,
    pub max_peaks: usize,
}

impl Default for BoundaryOptions {
    fn default() -> Self {
        Self {
            relative_prominence: 0.1,
            min_prominence: 1e-6,
            max_peaks: 2,
        }
    }
}

/// Crossover locations from peaks of the energy curvature along a uniform grid.
///
/// Ground-state energies are concave in the couplings, so the second
/// derivative is non-positive and a crossover shows up as a sharp peak of its
/// magnitude −E''. The central-difference curvature is scanned for local
/// maxima; each one's prominence (height above the higher of its two
/// flanking minima) must clear the threshold. At most `max_peaks` of the
/// most prominent survive; locations are refined by a parabola through the
/// peak and its neighbours and returned in ascending order.
pub fn second_derivative_boundaries(
    start: f64,
    step: f64,
    energies: &[f64],
    opts: &BoundaryOptions,
) -> Result<Vec<f64>> {
    if energies.len() < 5 {
        return Err(Error::Size(format!(
            "boundary detection needs at least 5 grid points, got {}",
            energies.len()
        )));
    }
    if !(step > 0.0) {
        return Err(Error::Domain(format!("grid step must be positive, got {step}")));
    }
    // curvature[k] sits at grid index k + 1.
    let curvature: Vec<f64> = energies
        .windows(3)
        .map(|w| -(w[2] - 2.0 * w[1] + w[0]) / (step * step))
        .collect();
    let hi = curvature.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = curvature.iter().copied().fold(f64::INFINITY, f64::min);
    let threshold = (opts.relative_prominence * (hi - lo)).max(opts.min_prominence);

    let n = curvature.len();
    let mut peaks: Vec<(f64, f64)> = Vec::new();
    for k in 0..n {
        let left_ok = k == 0 || curvature[k] > curvature[k - 1];
        let right_ok = k + 1 == n || curvature[k] >= curvature[k + 1];
        // Plateau-free interior maxima only; edge points are not crossovers.
        if k == 0 || k + 1 == n || !(left_ok && right_ok) {
            continue;
        }
        let left_min = curvature[..k]
            .iter()
            .rev()
            .take_while(|&&v| v <= curvature[k])
            .copied()
            .fold(curvature[k], f64::min);
        let right_min = curvature[k + 1..]
            .iter()
            .take_while(|&&v| v <= curvature[k])
            .copied()
            .fold(curvature[k], f64::min);
        let prominence = curvature[k] - left_min.max(right_min);
        if prominence < threshold {
            continue;
        }
        let (a, b, c) = (curvature[k - 1], curvature[k], curvature[k + 1]);
        let denom = a - 2.0 * b + c;
        let shift = if denom.abs() > 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
        let x = start + step * ((k + 1) as f64 + shift.clamp(-0.5, 0.5));
        peaks.push((prominence, x));
    }
    peaks.sort_by(|a, b| b.0.total_cmp(&a.0));
    peaks.truncate(opts.max_peaks);
    let mut xs: Vec<f64> = peaks.into_iter().map(|(_, x)| x).collect();
    xs.sort_by(f64::total_cmp);
    Ok(xs)
}
