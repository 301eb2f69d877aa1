//! Small numeric helpers: adaptive quadrature and order-stable summation.

/// Adaptive Simpson integration of `f` over `[lo, hi]` to relative tolerance `rel_tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, rel_tol: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let mid = 0.5 * (lo + hi);
    let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
    let whole = simpson(lo, hi, flo, fmid, fhi);
    // Scale the absolute target by a crude magnitude estimate so the
    // tolerance is relative without a second pass.
    let scale = whole.abs().max(f64::MIN_POSITIVE);
    recurse(&f, lo, hi, flo, fmid, fhi, whole, rel_tol * scale, 50)
}

fn simpson(lo: f64, hi: f64, flo: f64, fmid: f64, fhi: f64) -> f64 {
    (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    flo: f64,
    fmid: f64,
    fhi: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let mid = 0.5 * (lo + hi);
    let lm = 0.5 * (lo + mid);
    let rm = 0.5 * (mid + hi);
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(lo, mid, flo, flm, fmid);
    let right = simpson(mid, hi, fmid, frm, fhi);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    recurse(f, lo, mid, flo, flm, fmid, left, 0.5 * tol, depth - 1)
        + recurse(f, mid, hi, fmid, frm, fhi, right, 0.5 * tol, depth - 1)
}

/// Pairwise summation; the result depends only on the slice order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 64;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let (l, r) = xs.split_at(xs.len() / 2);
    pairwise_sum(l) + pairwise_sum(r)
}

/// Sample mean and unbiased sample variance, both via pairwise sums.
pub fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    (mean, pairwise_sum(&sq) / (n - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_smooth_functions() {
        let v = adaptive_simpson(|x| x.sin(), 0.0, std::f64::consts::PI, 1e-10);
        assert!((v - 2.0).abs() < 1e-9);
        let v = adaptive_simpson(|x| x.exp(), 0.0, 3.0, 1e-10);
        assert!((v - (3f64.exp() - 1.0)).abs() < 1e-8);
        assert_eq!(adaptive_simpson(|x| x, 1.0, 1.0, 1e-8), 0.0);
    }

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499_500.0);
        let (m, v) = mean_and_variance(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((v - 5.0 / 3.0).abs() < 1e-15);
    }
}
