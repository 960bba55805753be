//! Fixed-order reductions.
//!
//! Every sum in the crate goes through [`sum`], a pairwise scheme whose
//! association order depends only on the slice length. Results are therefore
//! bitwise reproducible regardless of how the surrounding work is scheduled.

const LEAF: usize = 64;

pub fn sum(xs: &[f64]) -> f64 {
    if xs.len() <= LEAF {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    sum(&xs[..mid]) + sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    sum(xs) / xs.len() as f64
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() <= LEAF {
        let mut s = 0.0;
        for (x, y) in a.iter().zip(b) {
            s += x * y;
        }
        return s;
    }
    let mid = a.len() / 2;
    dot(&a[..mid], &b[..mid]) + dot(&a[mid..], &b[mid..])
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn subtract_mean(xs: &mut [f64]) {
    let m = mean(xs);
    xs.iter_mut().for_each(|x| *x -= m);
}
