//! Small dense helpers on row-major slices.

#[inline]
pub(crate) fn outer_into(a: &[f64], b: &[f64], out: &mut [f64]) {
    let n = b.len();
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            out[i * n + j] = ai * bj;
        }
    }
}

/// Euclidean / Frobenius norm.
#[inline]
pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `out = A·B` with `A: r×k`, `B: k×c`.
pub(crate) fn matmul_into(a: &[f64], b: &[f64], r: usize, k: usize, c: usize, out: &mut [f64]) {
    for i in 0..r {
        for j in 0..c {
            let mut s = 0.0;
            for l in 0..k {
                s += a[i * k + l] * b[l * c + j];
            }
            out[i * c + j] = s;
        }
    }
}
