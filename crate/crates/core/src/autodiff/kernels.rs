//! Register-blocked dense kernels for the affine layer.
//!
//! Every output element is accumulated in a fixed order, independent of the
//! block it lands in, so results do not depend on the number of columns.

/// Starting value of each output element.
#[derive(Clone, Copy)]
pub(crate) enum Init<'a> {
    /// One value per output row.
    Row(&'a [f64]),
    Zero,
    /// Add to what is already in `out`.
    Accumulate,
}

/// Strided view of a `rows × depth` coefficient matrix.
#[derive(Clone, Copy)]
pub(crate) struct Coeffs<'a> {
    pub data: &'a [f64],
    pub row_stride: usize,
    pub col_stride: usize,
}

impl Coeffs<'_> {
    #[inline(always)]
    fn at(&self, i: usize, l: usize) -> f64 {
        self.data[i * self.row_stride + l * self.col_stride]
    }
}

const COLS: usize = 8;

/// `out[i, p] = init_i + Σ_l m[i, l]·x[l, p]`, summed over `l` in
/// increasing order. `x` is `depth × cols` and `out` is `rows × cols`.
pub(crate) fn matmul(
    out: &mut [f64],
    m: Coeffs<'_>,
    x: &[f64],
    rows: usize,
    depth: usize,
    cols: usize,
    init: Init<'_>,
) {
    debug_assert_eq!(out.len(), rows * cols);
    debug_assert_eq!(x.len(), depth * cols);
    let mut i0 = 0;
    while i0 + 4 <= rows {
        row_block::<4>(out, m, x, i0, depth, cols, init);
        i0 += 4;
    }
    while i0 < rows {
        row_block::<1>(out, m, x, i0, depth, cols, init);
        i0 += 1;
    }
}

#[inline(always)]
fn start(out: &[f64], init: Init<'_>, i: usize, idx: usize) -> f64 {
    match init {
        Init::Row(b) => b[i],
        Init::Zero => 0.0,
        Init::Accumulate => out[idx],
    }
}

#[inline(always)]
fn row_block<const R: usize>(
    out: &mut [f64],
    m: Coeffs<'_>,
    x: &[f64],
    i0: usize,
    depth: usize,
    cols: usize,
    init: Init<'_>,
) {
    assert!(m.data.len() > (i0 + R - 1) * m.row_stride + (depth.max(1) - 1) * m.col_stride);
    assert!(x.len() >= depth * cols && out.len() >= (i0 + R) * cols);
    if let Init::Row(b) = init {
        assert!(b.len() >= i0 + R);
    }
    let mut w = [[0.0f64; R]; 1];
    let mut p0 = 0;
    while p0 + COLS <= cols {
        let mut acc = [[0.0f64; COLS]; R];
        for (ii, row) in acc.iter_mut().enumerate() {
            for (c, a) in row.iter_mut().enumerate() {
                *a = start(out, init, i0 + ii, (i0 + ii) * cols + p0 + c);
            }
        }
        for l in 0..depth {
            // SAFETY: bounds asserted on entry.
            let xr: [f64; COLS] =
                std::array::from_fn(|c| unsafe { *x.get_unchecked(l * cols + p0 + c) });
            for ii in 0..R {
                w[0][ii] = unsafe {
                    *m.data
                        .get_unchecked((i0 + ii) * m.row_stride + l * m.col_stride)
                };
            }
            for (ii, row) in acc.iter_mut().enumerate() {
                for c in 0..COLS {
                    row[c] += w[0][ii] * xr[c];
                }
            }
        }
        for (ii, row) in acc.iter().enumerate() {
            let base = (i0 + ii) * cols + p0;
            out[base..base + COLS].copy_from_slice(row);
        }
        p0 += COLS;
    }
    for ii in 0..R {
        let i = i0 + ii;
        for p in p0..cols {
            let mut a = start(out, init, i, i * cols + p);
            for l in 0..depth {
                a += m.at(i, l) * x[l * cols + p];
            }
            out[i * cols + p] = a;
        }
    }
}

const LANES: usize = 4;

/// `g[i·ld + j] += Σ_p z[i, p]·a[j, p]` for `z` of shape `rows × cols` and
/// `a` of shape `inner × cols`.
pub(crate) fn outer_accumulate(
    g: &mut [f64],
    z: &[f64],
    a: &[f64],
    rows: usize,
    inner: usize,
    cols: usize,
) {
    let mut i0 = 0;
    while i0 + 4 <= rows {
        let mut j0 = 0;
        while j0 + 2 <= inner {
            dot_block::<4, 2>(g, z, a, i0, j0, inner, cols);
            j0 += 2;
        }
        while j0 < inner {
            dot_block::<4, 1>(g, z, a, i0, j0, inner, cols);
            j0 += 1;
        }
        i0 += 4;
    }
    while i0 < rows {
        for j in 0..inner {
            dot_block::<1, 1>(g, z, a, i0, j, inner, cols);
        }
        i0 += 1;
    }
}

#[inline(always)]
fn dot_block<const R: usize, const J: usize>(
    g: &mut [f64],
    z: &[f64],
    a: &[f64],
    i0: usize,
    j0: usize,
    inner: usize,
    cols: usize,
) {
    assert!(z.len() >= (i0 + R) * cols && a.len() >= (j0 + J) * cols);
    let mut acc = [[[0.0f64; LANES]; J]; R];
    let full = cols - cols % LANES;
    let mut p = 0;
    while p < full {
        // SAFETY: p + LANES <= cols and the row bounds are asserted above.
        let av: [[f64; LANES]; J] = std::array::from_fn(|jj| {
            std::array::from_fn(|l| unsafe { *a.get_unchecked((j0 + jj) * cols + p + l) })
        });
        let zv: [[f64; LANES]; R] = std::array::from_fn(|ii| {
            std::array::from_fn(|l| unsafe { *z.get_unchecked((i0 + ii) * cols + p + l) })
        });
        for ii in 0..R {
            for jj in 0..J {
                for l in 0..LANES {
                    acc[ii][jj][l] = zv[ii][l].mul_add(av[jj][l], acc[ii][jj][l]);
                }
            }
        }
        p += LANES;
    }
    for ii in 0..R {
        for jj in 0..J {
            let v = &acc[ii][jj];
            let mut s = (v[0] + v[2]) + (v[1] + v[3]);
            for q in full..cols {
                s += z[(i0 + ii) * cols + q] * a[(j0 + jj) * cols + q];
            }
            g[(i0 + ii) * inner + j0 + jj] += s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(n: usize, k: f64) -> Vec<f64> {
        (0..n).map(|i| ((i as f64 + 1.0) * k).sin()).collect()
    }

    #[test]
    fn matmul_matches_naive_all_shapes() {
        for &(rows, depth, cols) in &[(1, 1, 1), (5, 3, 13), (4, 7, 8), (9, 2, 17), (40, 40, 21)] {
            let m = data(rows * depth, 0.31);
            let x = data(depth * cols, 0.17);
            let b = data(rows, 0.5);
            let mut out = vec![0.0; rows * cols];
            let coeffs = Coeffs {
                data: &m,
                row_stride: depth,
                col_stride: 1,
            };
            matmul(&mut out, coeffs, &x, rows, depth, cols, Init::Row(&b));
            for i in 0..rows {
                for p in 0..cols {
                    let mut s = b[i];
                    for l in 0..depth {
                        s += m[i * depth + l] * x[l * cols + p];
                    }
                    assert_eq!(out[i * cols + p], s, "{rows}x{depth}x{cols} at {i},{p}");
                }
            }
        }
    }

    #[test]
    fn transposed_accumulate() {
        let (rows, depth, cols) = (6, 5, 11);
        // m is stored depth × rows and read transposed.
        let m = data(rows * depth, 0.7);
        let x = data(depth * cols, 0.2);
        let mut out = vec![1.0; rows * cols];
        let coeffs = Coeffs {
            data: &m,
            row_stride: 1,
            col_stride: rows,
        };
        matmul(&mut out, coeffs, &x, rows, depth, cols, Init::Accumulate);
        for i in 0..rows {
            for p in 0..cols {
                let s: f64 = 1.0 + (0..depth).map(|l| m[l * rows + i] * x[l * cols + p]).sum::<f64>();
                assert!((out[i * cols + p] - s).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn outer_matches_naive() {
        for &(rows, inner, cols) in &[(1, 1, 3), (4, 3, 9), (7, 5, 16), (9, 2, 1)] {
            let z = data(rows * cols, 0.9);
            let a = data(inner * cols, 0.4);
            let mut g = vec![0.5; rows * inner];
            outer_accumulate(&mut g, &z, &a, rows, inner, cols);
            for i in 0..rows {
                for j in 0..inner {
                    let s: f64 = 0.5 + (0..cols).map(|p| z[i * cols + p] * a[j * cols + p]).sum::<f64>();
                    assert!((g[i * inner + j] - s).abs() < 1e-13);
                }
            }
        }
    }
}
