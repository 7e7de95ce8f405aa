//! Dense kernels backing the op set: blocked matmuls and im2col/col2im.
//!
//! All kernels use fixed reduction orders, so results are bit-reproducible
//! run to run regardless of thread count (parallel callers split work along
//! the batch axis into fixed chunks and merge partials in chunk order).

use super::tensor::Scalar;

/// C[m,n] (+)= A[m,k] * B[k,n], all row-major.
pub fn matmul_nn<E: Scalar>(m: usize, k: usize, n: usize, a: &[E], b: &[E], c: &mut [E]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for (a_row, c_row) in a.chunks_exact(k).zip(c.chunks_exact_mut(n)) {
        for (&a_val, b_row) in a_row.iter().zip(b.chunks_exact(n)) {
            for (c_el, &b_el) in c_row.iter_mut().zip(b_row.iter()) {
                *c_el = *c_el + a_val * b_el;
            }
        }
    }
}

/// C[m,n] (+)= A[m,k] * B[n,k]^T (rows of A dotted with rows of B).
pub fn matmul_nt<E: Scalar>(m: usize, k: usize, n: usize, a: &[E], b: &[E], c: &mut [E]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    for (a_row, c_row) in a.chunks_exact(k).zip(c.chunks_exact_mut(n)) {
        for (c_el, b_row) in c_row.iter_mut().zip(b.chunks_exact(k)) {
            let mut acc = E::zero();
            for (&x, &y) in a_row.iter().zip(b_row.iter()) {
                acc = acc + x * y;
            }
            *c_el = *c_el + acc;
        }
    }
}

/// C[m,n] (+)= A[k,m]^T * B[k,n].
pub fn matmul_tn<E: Scalar>(m: usize, k: usize, n: usize, a: &[E], b: &[E], c: &mut [E]) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let _ = k;
    for (a_row, b_row) in a.chunks_exact(m).zip(b.chunks_exact(n)) {
        for (&a_val, c_row) in a_row.iter().zip(c.chunks_exact_mut(n)) {
            for (c_el, &b_el) in c_row.iter_mut().zip(b_row.iter()) {
                *c_el = *c_el + a_val * b_el;
            }
        }
    }
}

/// Spatial geometry of a conv/pool op.
#[derive(Debug, Clone, Copy)]
pub struct ConvGeometry {
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub padding: usize,
    pub oh: usize,
    pub ow: usize,
}

impl ConvGeometry {
    pub fn new(
        cin: usize,
        h: usize,
        w: usize,
        kh: usize,
        kw: usize,
        stride: usize,
        padding: usize,
    ) -> Option<Self> {
        if stride == 0 || kh == 0 || kw == 0 {
            return None;
        }
        let padded_h = h + 2 * padding;
        let padded_w = w + 2 * padding;
        if padded_h < kh || padded_w < kw {
            return None;
        }
        Some(ConvGeometry {
            cin,
            h,
            w,
            kh,
            kw,
            stride,
            padding,
            oh: (padded_h - kh) / stride + 1,
            ow: (padded_w - kw) / stride + 1,
        })
    }

    pub fn patch_len(&self) -> usize {
        self.cin * self.kh * self.kw
    }

    pub fn out_positions(&self) -> usize {
        self.oh * self.ow
    }
}

/// Unfold one image [cin,h,w] into a patch matrix col[cin*kh*kw, oh*ow].
/// Out-of-bounds taps read as zero (zero padding).
pub fn im2col<E: Scalar>(geo: &ConvGeometry, image: &[E], col: &mut [E]) {
    debug_assert_eq!(image.len(), geo.cin * geo.h * geo.w);
    debug_assert_eq!(col.len(), geo.patch_len() * geo.out_positions());
    let positions = geo.out_positions();
    for c in 0..geo.cin {
        let plane = &image[c * geo.h * geo.w..(c + 1) * geo.h * geo.w];
        for ki in 0..geo.kh {
            for kj in 0..geo.kw {
                let row_idx = (c * geo.kh + ki) * geo.kw + kj;
                let col_row = &mut col[row_idx * positions..(row_idx + 1) * positions];
                for oy in 0..geo.oh {
                    let iy = (oy * geo.stride + ki) as isize - geo.padding as isize;
                    let dst = &mut col_row[oy * geo.ow..(oy + 1) * geo.ow];
                    if iy < 0 || iy >= geo.h as isize {
                        dst.fill(E::zero());
                        continue;
                    }
                    let src_row = &plane[iy as usize * geo.w..(iy as usize + 1) * geo.w];
                    if geo.stride == 1 {
                        // contiguous tap: split into zero / copy / zero segments
                        let ix0 = kj as isize - geo.padding as isize;
                        for (ox, d) in dst.iter_mut().enumerate() {
                            let ix = ix0 + ox as isize;
                            *d = if ix < 0 || ix >= geo.w as isize {
                                E::zero()
                            } else {
                                src_row[ix as usize]
                            };
                        }
                    } else {
                        for (ox, d) in dst.iter_mut().enumerate() {
                            let ix = (ox * geo.stride + kj) as isize - geo.padding as isize;
                            *d = if ix < 0 || ix >= geo.w as isize {
                                E::zero()
                            } else {
                                src_row[ix as usize]
                            };
                        }
                    }
                }
            }
        }
    }
}

/// Fold a patch-matrix gradient back onto an image gradient (scatter-add);
/// the adjoint of `im2col`.
pub fn col2im_accumulate<E: Scalar>(geo: &ConvGeometry, col: &[E], image_grad: &mut [E]) {
    debug_assert_eq!(image_grad.len(), geo.cin * geo.h * geo.w);
    debug_assert_eq!(col.len(), geo.patch_len() * geo.out_positions());
    let positions = geo.out_positions();
    for c in 0..geo.cin {
        let plane = &mut image_grad[c * geo.h * geo.w..(c + 1) * geo.h * geo.w];
        for ki in 0..geo.kh {
            for kj in 0..geo.kw {
                let row_idx = (c * geo.kh + ki) * geo.kw + kj;
                let col_row = &col[row_idx * positions..(row_idx + 1) * positions];
                for oy in 0..geo.oh {
                    let iy = (oy * geo.stride + ki) as isize - geo.padding as isize;
                    if iy < 0 || iy >= geo.h as isize {
                        continue;
                    }
                    let src = &col_row[oy * geo.ow..(oy + 1) * geo.ow];
                    let dst_row = &mut plane[iy as usize * geo.w..(iy as usize + 1) * geo.w];
                    for (ox, &v) in src.iter().enumerate() {
                        let ix = (ox * geo.stride + kj) as isize - geo.padding as isize;
                        if ix >= 0 && ix < geo.w as isize {
                            dst_row[ix as usize] = dst_row[ix as usize] + v;
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_variants_agree_with_naive() {
        let (m, k, n) = (3, 4, 5);
        let a: Vec<f64> = (0..m * k).map(|i| (i as f64) * 0.3 - 1.0).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i as f64) * 0.1 + 0.5).collect();
        let mut expect = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for l in 0..k {
                    expect[i * n + j] += a[i * k + l] * b[l * n + j];
                }
            }
        }

        let mut c = vec![0.0; m * n];
        matmul_nn(m, k, n, &a, &b, &mut c);
        assert_eq!(c, expect);

        // B transposed layout for nt
        let mut bt = vec![0.0; k * n];
        for l in 0..k {
            for j in 0..n {
                bt[j * k + l] = b[l * n + j];
            }
        }
        let mut c = vec![0.0; m * n];
        matmul_nt(m, k, n, &a, &bt, &mut c);
        for (x, y) in c.iter().zip(expect.iter()) {
            assert!((x - y).abs() < 1e-12);
        }

        // A transposed layout for tn
        let mut at = vec![0.0; m * k];
        for i in 0..m {
            for l in 0..k {
                at[l * m + i] = a[i * k + l];
            }
        }
        let mut c = vec![0.0; m * n];
        matmul_tn(m, k, n, &at, &b, &mut c);
        for (x, y) in c.iter().zip(expect.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn im2col_col2im_roundtrip_counts_taps() {
        // col2im(im2col(ones)) counts, per pixel, how many patches cover it.
        let geo = ConvGeometry::new(1, 4, 4, 3, 3, 1, 1).unwrap();
        let image = vec![1.0f64; 16];
        let mut col = vec![0.0; geo.patch_len() * geo.out_positions()];
        im2col(&geo, &image, &mut col);
        let mut back = vec![0.0; 16];
        col2im_accumulate(&geo, &col, &mut back);
        // interior pixel of a 4x4 with 3x3/pad1 is hit by 9 patches
        assert_eq!(back[5], 9.0);
        // corner pixel is hit by 4 patches
        assert_eq!(back[0], 4.0);
    }

    #[test]
    fn geometry_rejects_undersized_input() {
        assert!(ConvGeometry::new(1, 2, 2, 3, 3, 1, 0).is_none());
        assert!(ConvGeometry::new(1, 2, 2, 3, 3, 1, 1).is_some());
    }
}
