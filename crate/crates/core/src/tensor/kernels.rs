// GEMM wrappers over `matrixmultiply`. All matrices are row-major and
// dimension checks are done by the caller.

/// `c (+)= op(a) · op(b)` where `op` optionally transposes.
///
/// `a` is stored as `[m, k]` (or `[k, m]` when `ta`), `b` as `[k, n]` (or
/// `[n, k]` when `tb`); `c` is `[m, n]`.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    ta: bool,
    b: &[f64],
    tb: bool,
    c: &mut [f64],
    beta: f64,
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the slices cover exactly the strided extents described above and
    // `c` does not alias `a` or `b` (it is a distinct `&mut`).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `a[m,k] · b[k,n]`
pub(crate) fn matmul(m: usize, k: usize, n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    gemm(m, k, n, a, false, b, false, &mut c, 0.0);
    c
}

/// `c[m,k] += g[m,n] · b[k,n]ᵀ`
pub(crate) fn acc_matmul_nt(m: usize, n: usize, k: usize, g: &[f64], b: &[f64], c: &mut [f64]) {
    gemm(m, n, k, g, false, b, true, c, 1.0);
}

/// `c[k,n] += a[m,k]ᵀ · g[m,n]`
pub(crate) fn acc_matmul_tn(m: usize, k: usize, n: usize, a: &[f64], g: &[f64], c: &mut [f64]) {
    gemm(k, m, n, a, true, g, false, c, 1.0);
}
