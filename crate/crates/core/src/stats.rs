//! Small numeric helpers shared by the oracle and diagnostics.

/// Pearson correlation; `NaN` when either input has zero variance or the
/// lengths differ.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() || a.len() < 2 {
        return f64::NAN;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return f64::NAN;
    }
    sab / (saa * sbb).sqrt()
}

/// Least-squares line `y = slope·x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Trapezoid rule on an arbitrary increasing lattice.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2).zip(ys.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

/// Gaussian smoothing of uniformly spaced samples with kernel width
/// `sigma_pts` (in samples), truncated at 4σ and renormalized at the edges.
pub fn gaussian_smooth(ys: &[f64], sigma_pts: f64) -> Vec<f64> {
    if sigma_pts <= 0.0 {
        return ys.to_vec();
    }
    let half = (4.0 * sigma_pts).ceil() as isize;
    let kernel: Vec<f64> = (-half..=half).map(|i| (-0.5 * (i as f64 / sigma_pts).powi(2)).exp()).collect();
    let n = ys.len() as isize;
    (0..n)
        .map(|i| {
            let (mut s, mut w) = (0.0, 0.0);
            for (j, &kv) in (-half..=half).zip(&kernel) {
                let t = i + j;
                if (0..n).contains(&t) {
                    s += kv * ys[t as usize];
                    w += kv;
                }
            }
            s / w
        })
        .collect()
}
