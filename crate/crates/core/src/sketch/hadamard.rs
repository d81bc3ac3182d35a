//! Unnormalized fast Walsh–Hadamard transform.

use nalgebra::DMatrix;

/// In-place unnormalized FWHT (Sylvester ordering). `buf.len()` must be a
/// power of two; the transform matrix `W` satisfies `W·Wᵀ = len·I`.
pub fn fwht_in_place(buf: &mut [f64]) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "FWHT length {n} is not a power of two");
    let mut h = 1;
    while h < n {
        for block in buf.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                let (a, b) = (*x, *y);
                *x = a + b;
                *y = a - b;
            }
        }
        h *= 2;
    }
}

/// Dense `n×n` Walsh–Hadamard matrix built by transforming unit vectors.
pub fn walsh_hadamard_matrix(n: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(n, n);
    let mut buf = vec![0.0; n];
    for j in 0..n {
        buf.iter_mut().for_each(|v| *v = 0.0);
        buf[j] = 1.0;
        fwht_in_place(&mut buf);
        w.column_mut(j).copy_from_slice(&buf);
    }
    w
}
