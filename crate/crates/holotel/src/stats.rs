//! Deterministic reductions and delete-one jackknife errors.

/// Pairwise (cascade) sum; the result depends only on the order of `v`.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Delete-one jackknife of a statistic. `stat(None)` is the full-sample
/// value, `stat(Some(i))` the value with sample `i` removed.
/// Returns `(estimate, standard error)`.
pub fn jackknife<F: Fn(Option<usize>) -> f64>(n: usize, stat: F) -> (f64, f64) {
    let full = stat(None);
    let loo: Vec<f64> = (0..n).map(|i| stat(Some(i))).collect();
    let mean = pairwise_sum(&loo) / n as f64;
    let dev: Vec<f64> = loo.iter().map(|t| (t - mean) * (t - mean)).collect();
    let var = (n as f64 - 1.0) / n as f64 * pairwise_sum(&dev);
    (full, var.sqrt())
}

/// Unbiased sample covariance of two equally long series and its
/// jackknife standard error.
pub fn jackknife_covariance(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    let nf = n as f64;
    let mx = pairwise_sum(x) / nf;
    let my = pairwise_sum(y) / nf;
    let xc: Vec<f64> = x.iter().map(|v| v - mx).collect();
    let yc: Vec<f64> = y.iter().map(|v| v - my).collect();
    let xy: Vec<f64> = xc.iter().zip(&yc).map(|(a, b)| a * b).collect();
    let (sx, sy, sxy) = (pairwise_sum(&xc), pairwise_sum(&yc), pairwise_sum(&xy));
    jackknife(n, |skip| match skip {
        None => (sxy - sx * sy / nf) / (nf - 1.0),
        Some(i) => {
            let m = nf - 1.0;
            let (a, b, c) = (sx - xc[i], sy - yc[i], sxy - xy[i]);
            (c - a * b / m) / (m - 1.0)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covariance_of_known_series() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.0, 4.0, 6.0, 8.0];
        let (c, se) = jackknife_covariance(&x, &y);
        assert!((c - 10.0 / 3.0).abs() < 1e-12);
        assert!(se > 0.0);
    }

    #[test]
    fn jackknife_of_mean_is_standard_error() {
        let v: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let n = v.len() as f64;
        let s = pairwise_sum(&v);
        let (m, se) = jackknife(v.len(), |skip| match skip {
            None => s / n,
            Some(i) => (s - v[i]) / (n - 1.0),
        });
        let var: f64 = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        assert!((se - (var / n).sqrt()).abs() < 1e-12);
    }
}
