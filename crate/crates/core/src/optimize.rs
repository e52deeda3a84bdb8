//! Scalar search routines shared by the estimator and the price search.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Result of a bracketed scalar maximisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMax {
    pub arg: f64,
    pub value: f64,
    /// Grid neighbours of the best grid point (the refinement bracket).
    pub bracket: (f64, f64),
}

/// Golden-section search for a maximum of `f` on `[a, b]`.
pub fn golden_section_max<F>(mut f: F, mut a: f64, mut b: f64, tol: f64, max_iter: usize) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..max_iter {
        if (b - a).abs() <= tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    // endpoints may beat the interior probes when the maximum sits on them
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    for x in [a, b] {
        let fx = f(x);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Evenly spaced grid, geometric when `geometric` is set (requires `lo > 0`).
pub fn grid(lo: f64, hi: f64, points: usize, geometric: bool) -> Vec<f64> {
    assert!(points >= 2);
    let last = (points - 1) as f64;
    (0..points)
        .map(|i| {
            let t = i as f64 / last;
            if i == points - 1 {
                hi
            } else if geometric {
                lo * (hi / lo).powf(t)
            } else {
                lo + t * (hi - lo)
            }
        })
        .collect()
}

/// Coarse grid scan followed by golden-section refinement inside the
/// bracket around the best grid point.
pub fn grid_golden_max<F>(mut f: F, points: &[f64], tol: f64) -> ScalarMax
where
    F: FnMut(f64) -> f64,
{
    let values: Vec<f64> = points.iter().map(|x| f(*x)).collect();
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] || values[best].is_nan() {
            best = i;
        }
    }
    let lo = points[best.saturating_sub(1)];
    let hi = points[(best + 1).min(points.len() - 1)];
    let (arg, value) = golden_section_max(&mut f, lo, hi, tol, 400);
    let (arg, value) = if value >= values[best] {
        (arg, value)
    } else {
        (points[best], values[best])
    };
    ScalarMax {
        arg,
        value,
        bracket: (lo, hi),
    }
}
