//! One-dimensional search helpers.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximum of `f` on `[lo, hi]`, stopping once the
/// bracket is narrower than `tol`. Returns the best point evaluated and its value.
pub fn golden_section_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut best = if fd > fc { (d, fd) } else { (c, fc) };
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
            if fc > best.1 || (fc == best.1 && c < best.0) {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
            if fd > best.1 || (fd == best.1 && d < best.0) {
                best = (d, fd);
            }
        }
    }
    best
}

/// Golden-section search for the minimum of `f` on `[lo, hi]`.
pub fn golden_section_min<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (x, neg) = golden_section_max(|x| -f(x), lo, hi, tol);
    (x, -neg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_quadratic_peak() {
        let (x, fx) = golden_section_max(|b| 0.8 * b - b * b, 0.0, 0.8, 1e-8);
        assert!((x - 0.4).abs() < 1e-7);
        assert!((fx - 0.16).abs() < 1e-12);
    }

    #[test]
    fn boundary_maximum() {
        let (x, _) = golden_section_max(|b| b, 0.0, 2.0, 1e-6);
        assert!((x - 2.0).abs() < 1e-5);
        let (x, _) = golden_section_min(|b| b, 0.0, 2.0, 1e-6);
        assert!(x < 1e-5);
    }
}
