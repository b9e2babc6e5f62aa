//! Eager compute kernels behind the graph ops. Convolutions run as im2col
//! plus one gemm per batch sample; every linear op has an exact adjoint
//! here so the autodiff rules stay closed under differentiation.

use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub stride: usize,
    pub dilation: usize,
}

impl ConvSpec {
    pub fn out_dim(&self, input: usize, kernel: usize) -> usize {
        let span = self.dilation * (kernel - 1) + 1;
        assert!(input >= span, "conv input {input} smaller than kernel span {span}");
        (input - span) / self.stride + 1
    }
}

/// im2col: [B, C, H, W] -> per-sample [C·kh·kw, Ho·Wo] written into `col`.
fn im2col_sample<S: Scalar>(
    x: &[S],
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    spec: ConvSpec,
    col: &mut [S],
) {
    let ho = spec.out_dim(h, kh);
    let wo = spec.out_dim(w, kw);
    let l = ho * wo;
    let unit = spec.stride == 1;
    for ch in 0..c {
        let plane = &x[ch * h * w..(ch + 1) * h * w];
        for ki in 0..kh {
            for kj in 0..kw {
                let row = &mut col[((ch * kh + ki) * kw + kj) * l..][..l];
                if unit {
                    // Contiguous source rows at stride 1.
                    for oi in 0..ho {
                        let base = (oi + ki * spec.dilation) * w + kj * spec.dilation;
                        row[oi * wo..(oi + 1) * wo].copy_from_slice(&plane[base..base + wo]);
                    }
                } else {
                    let mut t = 0;
                    for oi in 0..ho {
                        let src_r = oi * spec.stride + ki * spec.dilation;
                        let base = src_r * w + kj * spec.dilation;
                        for oj in 0..wo {
                            row[t] = plane[base + oj * spec.stride];
                            t += 1;
                        }
                    }
                }
            }
        }
    }
}

/// col2im scatter-add, the exact adjoint of [`im2col_sample`].
fn col2im_sample<S: Scalar>(
    col: &[S],
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    spec: ConvSpec,
    x: &mut [S],
) {
    let ho = spec.out_dim(h, kh);
    let wo = spec.out_dim(w, kw);
    let l = ho * wo;
    for ch in 0..c {
        let plane = &mut x[ch * h * w..(ch + 1) * h * w];
        for ki in 0..kh {
            for kj in 0..kw {
                let row = &col[((ch * kh + ki) * kw + kj) * l..][..l];
                let mut t = 0;
                for oi in 0..ho {
                    let src_r = oi * spec.stride + ki * spec.dilation;
                    let base = src_r * w + kj * spec.dilation;
                    for oj in 0..wo {
                        plane[base + oj * spec.stride] += row[t];
                        t += 1;
                    }
                }
            }
        }
    }
}

/// Forward convolution (cross-correlation), valid padding.
pub fn conv_forward<S: Scalar>(x: &Tensor<S>, w: &Tensor<S>, spec: ConvSpec) -> Tensor<S> {
    let (b, cin, h, wd) = x.dims4();
    let (cout, cin_w, kh, kw) = w.dims4();
    assert_eq!(cin, cin_w, "conv channel mismatch");
    let ho = spec.out_dim(h, kh);
    let wo = spec.out_dim(wd, kw);
    let l = ho * wo;
    let k = cin * kh * kw;

    let mut out: Tensor<S> = Tensor::zeros(&[b, cout, ho, wo]);
    S::with_scratch(k * l, |col| {
        for bi in 0..b {
            im2col_sample(&x.data[bi * cin * h * wd..], cin, h, wd, kh, kw, spec, col);
            unsafe {
                S::gemm(
                    cout,
                    k,
                    l,
                    S::ONE,
                    w.data.as_ptr(),
                    k as isize,
                    1,
                    col.as_ptr(),
                    l as isize,
                    1,
                    S::ZERO,
                    out.data.as_mut_ptr().add(bi * cout * l),
                    l as isize,
                    1,
                );
            }
        }
    });
    out
}

/// Gradient w.r.t. the convolution input.
pub fn conv_grad_data<S: Scalar>(
    gy: &Tensor<S>,
    w: &Tensor<S>,
    spec: ConvSpec,
    in_hw: (usize, usize),
) -> Tensor<S> {
    let (b, cout, ho, wo) = gy.dims4();
    let (cout_w, cin, kh, kw) = w.dims4();
    assert_eq!(cout, cout_w, "conv grad channel mismatch");
    let (h, wd) = in_hw;
    let l = ho * wo;
    let k = cin * kh * kw;

    let mut gx = Tensor::zeros(&[b, cin, h, wd]);
    S::with_scratch(k * l, |col| {
        for bi in 0..b {
            // col = Wᵀ · gy_b
            unsafe {
                S::gemm(
                    k,
                    cout,
                    l,
                    S::ONE,
                    w.data.as_ptr(),
                    1,
                    k as isize,
                    gy.data.as_ptr().add(bi * cout * l),
                    l as isize,
                    1,
                    S::ZERO,
                    col.as_mut_ptr(),
                    l as isize,
                    1,
                );
            }
            col2im_sample(col, cin, h, wd, kh, kw, spec, &mut gx.data[bi * cin * h * wd..]);
        }
    });
    gx
}

/// Gradient w.r.t. the convolution weights.
pub fn conv_grad_weight<S: Scalar>(
    x: &Tensor<S>,
    gy: &Tensor<S>,
    spec: ConvSpec,
    k_hw: (usize, usize),
) -> Tensor<S> {
    let (b, cin, h, wd) = x.dims4();
    let (b_g, cout, ho, wo) = gy.dims4();
    assert_eq!(b, b_g, "conv grad batch mismatch");
    let (kh, kw) = k_hw;
    let l = ho * wo;
    let k = cin * kh * kw;

    let mut gw = Tensor::zeros(&[cout, cin, kh, kw]);
    S::with_scratch(k * l, |col| {
        for bi in 0..b {
            im2col_sample(&x.data[bi * cin * h * wd..], cin, h, wd, kh, kw, spec, col);
            // gw += gy_b · colᵀ
            unsafe {
                S::gemm(
                    cout,
                    l,
                    k,
                    S::ONE,
                    gy.data.as_ptr().add(bi * cout * l),
                    l as isize,
                    1,
                    col.as_ptr(),
                    1,
                    l as isize,
                    S::ONE,
                    gw.data.as_mut_ptr(),
                    k as isize,
                    1,
                );
            }
        }
    });
    gw
}

/// Standalone im2col as a graph op: [B, C, H, W] -> [B, C·k², L].
pub fn im2col_op<S: Scalar>(x: &Tensor<S>, k: usize, spec: ConvSpec) -> Tensor<S> {
    let (b, c, h, w) = x.dims4();
    let ho = spec.out_dim(h, k);
    let wo = spec.out_dim(w, k);
    let l = ho * wo;
    let rows = c * k * k;
    let mut out = Tensor::uninit(&[b, rows, l]);
    for bi in 0..b {
        im2col_sample(
            &x.data[bi * c * h * w..],
            c,
            h,
            w,
            k,
            k,
            spec,
            &mut out.data[bi * rows * l..(bi + 1) * rows * l],
        );
    }
    out
}

pub fn col2im_op<S: Scalar>(
    col: &Tensor<S>,
    k: usize,
    spec: ConvSpec,
    c: usize,
    out_hw: (usize, usize),
) -> Tensor<S> {
    assert_eq!(col.rank(), 3, "col2im expects [B, C·k², L]");
    let b = col.shape[0];
    let rows = col.shape[1];
    let l = col.shape[2];
    assert_eq!(rows, c * k * k);
    let (h, w) = out_hw;
    let mut out = Tensor::zeros(&[b, c, h, w]);
    for bi in 0..b {
        col2im_sample(
            &col.data[bi * rows * l..(bi + 1) * rows * l],
            c,
            h,
            w,
            k,
            k,
            spec,
            &mut out.data[bi * c * h * w..],
        );
    }
    out
}

/// Reflect-101 index: mirrors without repeating the border pixel.
#[inline]
fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut v = i;
    if v < 0 {
        v = -v;
    }
    if v >= n {
        v = 2 * n - 2 - v;
    }
    v as usize
}

pub fn pad_mirror<S: Scalar>(x: &Tensor<S>, pad: usize) -> Tensor<S> {
    let (b, c, h, w) = x.dims4();
    assert!(pad < h && pad < w, "mirror pad {pad} too large for {h}x{w}");
    let (oh, ow) = (h + 2 * pad, w + 2 * pad);
    let col_map: Vec<usize> =
        (0..ow).map(|col| mirror(col as isize - pad as isize, w)).collect();
    let mut out = Tensor::uninit(&[b, c, oh, ow]);
    for bc in 0..b * c {
        let src = &x.data[bc * h * w..(bc + 1) * h * w];
        let dst = &mut out.data[bc * oh * ow..(bc + 1) * oh * ow];
        for r in 0..oh {
            let sr = mirror(r as isize - pad as isize, h);
            let srow = &src[sr * w..(sr + 1) * w];
            let drow = &mut dst[r * ow..(r + 1) * ow];
            // Interior is a straight copy; only the borders remap.
            drow[pad..pad + w].copy_from_slice(srow);
            for col in 0..pad {
                drow[col] = srow[col_map[col]];
            }
            for col in pad + w..ow {
                drow[col] = srow[col_map[col]];
            }
        }
    }
    out
}

pub fn pad_mirror_adjoint<S: Scalar>(g: &Tensor<S>, pad: usize) -> Tensor<S> {
    let (b, c, oh, ow) = g.dims4();
    let (h, w) = (oh - 2 * pad, ow - 2 * pad);
    // Scatter-add target: must start from zeros.
    let mut out = Tensor::zeros(&[b, c, h, w]);
    for bc in 0..b * c {
        let src = &g.data[bc * oh * ow..(bc + 1) * oh * ow];
        let dst = &mut out.data[bc * h * w..(bc + 1) * h * w];
        for r in 0..oh {
            let sr = mirror(r as isize - pad as isize, h);
            for col in 0..ow {
                let sc = mirror(col as isize - pad as isize, w);
                dst[sr * w + sc] += src[r * ow + col];
            }
        }
    }
    out
}

pub fn pad_zero<S: Scalar>(x: &Tensor<S>, pad: usize) -> Tensor<S> {
    let (b, c, h, w) = x.dims4();
    let (oh, ow) = (h + 2 * pad, w + 2 * pad);
    let mut out = Tensor::zeros(&[b, c, oh, ow]);
    for bc in 0..b * c {
        let src = &x.data[bc * h * w..(bc + 1) * h * w];
        let dst = &mut out.data[bc * oh * ow..(bc + 1) * oh * ow];
        for r in 0..h {
            let drow = &mut dst[(r + pad) * ow + pad..][..w];
            drow.copy_from_slice(&src[r * w..(r + 1) * w]);
        }
    }
    out
}

pub fn crop_center<S: Scalar>(x: &Tensor<S>, pad: usize) -> Tensor<S> {
    let (b, c, oh, ow) = x.dims4();
    let (h, w) = (oh - 2 * pad, ow - 2 * pad);
    let mut out = Tensor::uninit(&[b, c, h, w]);
    for bc in 0..b * c {
        let src = &x.data[bc * oh * ow..(bc + 1) * oh * ow];
        let dst = &mut out.data[bc * h * w..(bc + 1) * h * w];
        for r in 0..h {
            dst[r * w..(r + 1) * w].copy_from_slice(&src[(r + pad) * ow + pad..][..w]);
        }
    }
    out
}

pub fn crop_spatial<S: Scalar>(
    x: &Tensor<S>,
    r0: usize,
    c0: usize,
    ch: usize,
    cw: usize,
) -> Tensor<S> {
    let (b, c, h, w) = x.dims4();
    assert!(r0 + ch <= h && c0 + cw <= w, "crop out of bounds");
    let mut out = Tensor::uninit(&[b, c, ch, cw]);
    for bc in 0..b * c {
        let src = &x.data[bc * h * w..(bc + 1) * h * w];
        let dst = &mut out.data[bc * ch * cw..(bc + 1) * ch * cw];
        for r in 0..ch {
            dst[r * cw..(r + 1) * cw].copy_from_slice(&src[(r0 + r) * w + c0..][..cw]);
        }
    }
    out
}

pub fn embed_spatial<S: Scalar>(
    x: &Tensor<S>,
    r0: usize,
    c0: usize,
    oh: usize,
    ow: usize,
) -> Tensor<S> {
    let (b, c, h, w) = x.dims4();
    assert!(r0 + h <= oh && c0 + w <= ow, "embed out of bounds");
    let mut out = Tensor::zeros(&[b, c, oh, ow]);
    for bc in 0..b * c {
        let src = &x.data[bc * h * w..(bc + 1) * h * w];
        let dst = &mut out.data[bc * oh * ow..(bc + 1) * oh * ow];
        for r in 0..h {
            dst[(r0 + r) * ow + c0..][..w].copy_from_slice(&src[r * w..(r + 1) * w]);
        }
    }
    out
}

/// Interpolation taps for one axis of a bilinear resize without corner
/// alignment: out i samples input at (i + 0.5)/f − 0.5, clamped.
fn bilinear_taps(n_out: usize, n_in: usize, factor: usize) -> Vec<(usize, usize, f64)> {
    (0..n_out)
        .map(|i| {
            let src = (i as f64 + 0.5) / factor as f64 - 0.5;
            let clamped = src.clamp(0.0, (n_in - 1) as f64);
            let i0 = clamped.floor() as usize;
            let i1 = (i0 + 1).min(n_in - 1);
            let w1 = clamped - i0 as f64;
            (i0, i1, w1)
        })
        .collect()
}

/// Taps with weights in the working precision.
fn taps_s<S: Scalar>(n_out: usize, n_in: usize, factor: usize) -> Vec<(usize, usize, S, S)> {
    bilinear_taps(n_out, n_in, factor)
        .into_iter()
        .map(|(i0, i1, w1)| (i0, i1, S::from_f64(1.0 - w1), S::from_f64(w1)))
        .collect()
}

pub fn upsample_bilinear<S: Scalar>(x: &Tensor<S>, factor: usize) -> Tensor<S> {
    let (b, c, h, w) = x.dims4();
    let (oh, ow) = (h * factor, w * factor);
    let rows = taps_s::<S>(oh, h, factor);
    let cols = taps_s::<S>(ow, w, factor);
    let mut out = Tensor::uninit(&[b, c, oh, ow]);
    // Separable: expand columns into a scratch row, then blend row pairs.
    let mut wide = vec![S::ZERO; h * ow];
    for bc in 0..b * c {
        let src = &x.data[bc * h * w..(bc + 1) * h * w];
        for r in 0..h {
            let srow = &src[r * w..(r + 1) * w];
            let drow = &mut wide[r * ow..(r + 1) * ow];
            for (cc, &(c0, c1, w0, w1)) in cols.iter().enumerate() {
                drow[cc] = srow[c0] * w0 + srow[c1] * w1;
            }
        }
        let dst = &mut out.data[bc * oh * ow..(bc + 1) * oh * ow];
        for (r, &(r0, r1, w0, w1)) in rows.iter().enumerate() {
            let top = &wide[r0 * ow..(r0 + 1) * ow];
            let bottom = &wide[r1 * ow..(r1 + 1) * ow];
            let drow = &mut dst[r * ow..(r + 1) * ow];
            for i in 0..ow {
                drow[i] = top[i] * w0 + bottom[i] * w1;
            }
        }
    }
    out
}

pub fn upsample_bilinear_adjoint<S: Scalar>(g: &Tensor<S>, factor: usize) -> Tensor<S> {
    let (b, c, oh, ow) = g.dims4();
    let (h, w) = (oh / factor, ow / factor);
    let rows = taps_s::<S>(oh, h, factor);
    let cols = taps_s::<S>(ow, w, factor);
    let mut out = Tensor::zeros(&[b, c, h, w]);
    let mut wide = vec![S::ZERO; h * ow];
    for bc in 0..b * c {
        for v in wide.iter_mut() {
            *v = S::ZERO;
        }
        let src = &g.data[bc * oh * ow..(bc + 1) * oh * ow];
        // Adjoint of the row blend: scatter output rows into the scratch.
        for (r, &(r0, r1, w0, w1)) in rows.iter().enumerate() {
            let srow = &src[r * ow..(r + 1) * ow];
            if r0 == r1 {
                let row = &mut wide[r0 * ow..(r0 + 1) * ow];
                for i in 0..ow {
                    row[i] += srow[i] * (w0 + w1);
                }
            } else {
                for i in 0..ow {
                    wide[r0 * ow + i] += srow[i] * w0;
                    wide[r1 * ow + i] += srow[i] * w1;
                }
            }
        }
        // Adjoint of the column expansion.
        let dst = &mut out.data[bc * h * w..(bc + 1) * h * w];
        for r in 0..h {
            let srow = &wide[r * ow..(r + 1) * ow];
            let drow = &mut dst[r * w..(r + 1) * w];
            for (cc, &(c0, c1, w0, w1)) in cols.iter().enumerate() {
                drow[c0] += srow[cc] * w0;
                drow[c1] += srow[cc] * w1;
            }
        }
    }
    out
}

/// Sums `x` down to `target` (dims of size 1 in `target` are reduced).
/// Works blockwise over the largest matching suffix for throughput.
pub fn sum_to<S: Scalar>(x: &Tensor<S>, target: &[usize]) -> Tensor<S> {
    assert_eq!(x.rank(), target.len(), "sum_to rank mismatch");
    for (a, b) in x.shape.iter().zip(target) {
        assert!(a == b || *b == 1, "sum_to {:?} -> {:?}", x.shape, target);
    }
    let mut out = Tensor::zeros(target);
    sum_rec(&x.data, &mut out.data, &x.shape, target, 0);
    out
}

fn sum_rec<S: Scalar>(src: &[S], dst: &mut [S], shape: &[usize], target: &[usize], dim: usize) {
    // Whole suffix matches: accumulate the contiguous block.
    if shape[dim..] == target[dim..] {
        for (d, &s) in dst.iter_mut().zip(src) {
            *d += s;
        }
        return;
    }
    let n = shape[dim];
    let src_block = shape[dim + 1..].iter().product::<usize>();
    let dst_block = target[dim + 1..].iter().product::<usize>();
    if target[dim] == 1 {
        for i in 0..n {
            sum_rec(&src[i * src_block..(i + 1) * src_block], dst, shape, target, dim + 1);
        }
    } else {
        for i in 0..n {
            sum_rec(
                &src[i * src_block..(i + 1) * src_block],
                &mut dst[i * dst_block..(i + 1) * dst_block],
                shape,
                target,
                dim + 1,
            );
        }
    }
}

/// Broadcasts `x` up to `target` (dims of size 1 replicate), blockwise.
pub fn broadcast_to<S: Scalar>(x: &Tensor<S>, target: &[usize]) -> Tensor<S> {
    assert_eq!(x.rank(), target.len(), "broadcast rank mismatch");
    for (a, b) in x.shape.iter().zip(target) {
        assert!(a == b || *a == 1, "broadcast {:?} -> {:?}", x.shape, target);
    }
    let mut out = Tensor::uninit(target);
    bcast_rec(&x.data, &mut out.data, &x.shape, target, 0);
    out
}

fn bcast_rec<S: Scalar>(src: &[S], dst: &mut [S], shape: &[usize], target: &[usize], dim: usize) {
    if shape[dim..] == target[dim..] {
        dst.copy_from_slice(src);
        return;
    }
    let src_block = shape[dim + 1..].iter().product::<usize>();
    let dst_block = target[dim + 1..].iter().product::<usize>();
    if shape[dim] == 1 {
        for i in 0..target[dim] {
            bcast_rec(src, &mut dst[i * dst_block..(i + 1) * dst_block], shape, target, dim + 1);
        }
    } else {
        for i in 0..shape[dim] {
            bcast_rec(
                &src[i * src_block..(i + 1) * src_block],
                &mut dst[i * dst_block..(i + 1) * dst_block],
                shape,
                target,
                dim + 1,
            );
        }
    }
}

pub fn matmul<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Tensor<S> {
    let (m, k) = a.dims2();
    let (k2, n) = b.dims2();
    assert_eq!(k, k2, "matmul inner dims {k} vs {k2}");
    let mut out = Tensor::zeros(&[m, n]);
    unsafe {
        S::gemm(
            m,
            k,
            n,
            S::ONE,
            a.data.as_ptr(),
            k as isize,
            1,
            b.data.as_ptr(),
            n as isize,
            1,
            S::ZERO,
            out.data.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    out
}

pub fn transpose2d<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    let (m, n) = x.dims2();
    let mut out = Tensor::uninit(&[n, m]);
    for i in 0..m {
        for j in 0..n {
            out.data[j * m + i] = x.data[i * n + j];
        }
    }
    out
}

/// Gathers columns of a rank-2 tensor.
pub fn gather_cols<S: Scalar>(x: &Tensor<S>, indices: &[usize]) -> Tensor<S> {
    let (m, n) = x.dims2();
    let mut out = Tensor::uninit(&[m, indices.len()]);
    for (t, &j) in indices.iter().enumerate() {
        assert!(j < n, "gather index {j} out of {n}");
        for i in 0..m {
            out.data[i * indices.len() + t] = x.data[i * n + j];
        }
    }
    out
}

/// Scatter-add of columns into a wider rank-2 tensor, adjoint of gather.
pub fn scatter_cols<S: Scalar>(x: &Tensor<S>, indices: &[usize], n: usize) -> Tensor<S> {
    let (m, l) = x.dims2();
    assert_eq!(l, indices.len());
    let mut out = Tensor::zeros(&[m, n]);
    for (t, &j) in indices.iter().enumerate() {
        for i in 0..m {
            out.data[i * n + j] += x.data[i * l + t];
        }
    }
    out
}

pub fn slice_dim0<S: Scalar>(x: &Tensor<S>, b0: usize, len: usize) -> Tensor<S> {
    let per = x.numel() / x.shape[0];
    let mut shape = x.shape.clone();
    shape[0] = len;
    Tensor::from_vec(&shape, x.data[b0 * per..(b0 + len) * per].to_vec())
}

pub fn embed_dim0<S: Scalar>(x: &Tensor<S>, b0: usize, total: usize) -> Tensor<S> {
    let per = x.numel() / x.shape[0];
    let mut shape = x.shape.clone();
    shape[0] = total;
    let mut out = Tensor::zeros(&shape);
    out.data[b0 * per..b0 * per + x.numel()].copy_from_slice(&x.data);
    out
}

pub fn slice_ch<S: Scalar>(x: &Tensor<S>, c0: usize, len: usize) -> Tensor<S> {
    let (b, c, h, w) = x.dims4();
    assert!(c0 + len <= c);
    let mut out = Tensor::uninit(&[b, len, h, w]);
    for bi in 0..b {
        let src = &x.data[(bi * c + c0) * h * w..(bi * c + c0 + len) * h * w];
        out.data[bi * len * h * w..(bi + 1) * len * h * w].copy_from_slice(src);
    }
    out
}

pub fn embed_ch<S: Scalar>(x: &Tensor<S>, c0: usize, total: usize) -> Tensor<S> {
    let (b, c, h, w) = x.dims4();
    assert!(c0 + c <= total);
    let mut out = Tensor::zeros(&[b, total, h, w]);
    for bi in 0..b {
        let src = &x.data[bi * c * h * w..(bi + 1) * c * h * w];
        out.data[(bi * total + c0) * h * w..(bi * total + c0 + c) * h * w].copy_from_slice(src);
    }
    out
}
