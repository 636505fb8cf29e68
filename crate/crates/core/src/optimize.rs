//! One-dimensional maximization and root finding.
//!
//! `maximize_1d` always scans a coarse grid before refining, because the
//! marginal likelihoods it drives can be flat near a boundary or bimodal;
//! pure golden-section from one bracket would silently pick the wrong mode.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Number of points in the coarse scan (endpoints included).
pub const GRID_POINTS: usize = 257;

/// Maximize `f` on `[lo, hi]`: grid scan over `GRID_POINTS` points, then
/// golden-section refinement inside the best grid cell. Returns
/// `(argmax, max)`. Non-finite values of `f` are treated as -inf and lose
/// every comparison. Ties on the grid resolve to the smallest abscissa.
pub fn maximize_1d(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    assert!(lo < hi, "maximize_1d: lo < hi required");
    let n = GRID_POINTS;
    let step = (hi - lo) / (n - 1) as f64;
    let mut best_i = 0usize;
    let mut best_x = lo;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..n {
        let x = if i == n - 1 { hi } else { lo + i as f64 * step };
        let v = f(x);
        if v.is_finite() && v > best_v {
            best_v = v;
            best_x = x;
            best_i = i;
        }
    }

    // Refine inside the bracket spanning one cell either side of the best point.
    let a = if best_i == 0 { lo } else { lo + (best_i - 1) as f64 * step };
    let b = if best_i >= n - 2 { hi } else { lo + (best_i + 1) as f64 * step };
    let (gx, gv) = golden_max(&mut f, a, b, tol);
    if gv > best_v {
        (gx, gv)
    } else {
        (best_x, best_v)
    }
}

fn golden_max(f: &mut impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let val = |f: &mut dyn FnMut(f64) -> f64, x: f64| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::NEG_INFINITY
        }
    };
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = val(f, x1);
    let mut f2 = val(f, x2);
    let mut best = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    while (b - a).abs() > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = val(f, x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = val(f, x2);
        }
        let cand = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
        if cand.1 > best.1 {
            best = cand;
        }
    }
    best
}

/// Root of `f` on `[lo, hi]` by Brent's method. Requires a sign change
/// (f(lo) * f(hi) <= 0); converges to bracket width <= `tol`.
pub fn find_root(
    mut f: impl FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> crate::error::Result<f64> {
    let mut a = lo;
    let mut b = hi;
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 {
        return Err(crate::error::Error::NoSignChange { lo, hi, f_lo: fa, f_hi: fb });
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb * fc > 0.0 {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // Inverse quadratic interpolation / secant step.
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    Ok(b)
}
