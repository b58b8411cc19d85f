use num_complex::Complex64;

use super::PilotObservations;
use crate::grid::TfGrid;

/// Linear interpolation between samples `spacing` apart, extending the
/// slope of the last segment past the final sample.
fn along_axis(samples: &[Complex64], spacing: usize, len: usize, out: &mut Vec<Complex64>) {
    out.clear();
    let last = samples.len() - 1;
    for i in 0..len {
        let seg = (i / spacing).min(last.saturating_sub(1));
        let frac = (i as f64 - (seg * spacing) as f64) / spacing as f64;
        let v = if last == 0 {
            samples[0]
        } else {
            samples[seg] + (samples[seg + 1] - samples[seg]) * frac
        };
        out.push(v);
    }
}

/// Bilinear interpolation of the pilot lattice: along time at every pilot
/// subcarrier first, then along frequency at every symbol.
pub fn interp_linear(obs: &PilotObservations) -> TfGrid {
    let (m, n) = obs.grid_dims();
    let (d_t, d_f) = obs.spacing();
    let (mp, np) = obs.lattice();

    // time pass: rows[i] holds N values for pilot subcarrier i * d_f
    let mut rows = Vec::with_capacity(mp);
    let mut samples = Vec::with_capacity(np.max(mp));
    let mut line = Vec::with_capacity(n.max(m));
    for i in 0..mp {
        samples.clear();
        samples.extend((0..np).map(|j| obs.at(i, j)));
        along_axis(&samples, d_t, n, &mut line);
        rows.push(line.clone());
    }

    let mut grid = TfGrid::zeros(m, n);
    for ni in 0..n {
        samples.clear();
        samples.extend(rows.iter().map(|r| r[ni]));
        along_axis(&samples, d_f, m, &mut line);
        grid.symbol_mut(ni).copy_from_slice(&line);
    }
    grid
}
