//! Dense f64 tensors in NCHW layout and the convolution kernels behind both networks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// (N, C, H, W) of a rank-4 tensor.
    pub fn dims4(&self) -> Result<(usize, usize, usize, usize)> {
        match self.shape[..] {
            [n, c, h, w] => Ok((n, c, h, w)),
            _ => Err(Error::Shape(format!("expected a rank-4 tensor, got {:?}", self.shape))),
        }
    }
}

/// C (m×n) = A (m×k) · B (k×n), or C += A·B with `accumulate`. `ta`/`tb` read the
/// operand as stored transposed (k×m / n×k, row-major).
#[allow(clippy::too_many_arguments)]
pub fn gemm(m: usize, k: usize, n: usize, a: &[f64], ta: bool, b: &[f64], tb: bool, c: &mut [f64], accumulate: bool) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n, "gemm operand too small");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if !accumulate {
            c[..m * n].fill(0.0);
        }
        return;
    }
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: bounds asserted above; strides describe dense row-major layouts within them.
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

/// Spatial geometry of a 2-D cross-correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub kernel: [usize; 2],
    pub stride: [usize; 2],
    pub pad: [usize; 2],
}

impl ConvGeom {
    pub fn new(kernel: [usize; 2], stride: [usize; 2], pad: [usize; 2]) -> Self {
        Self { kernel, stride, pad }
    }

    /// Same-size 1-D geometry along the last axis.
    pub fn line(k: usize, stride: usize) -> Self {
        Self::new([1, k], [1, stride], [0, k / 2])
    }

    /// Same-size k×k geometry.
    pub fn square(k: usize) -> Self {
        Self::new([k, k], [1, 1], [k / 2, k / 2])
    }

    pub fn out_dims(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let f = |n: usize, i: usize| -> Result<usize> {
            let padded = n + 2 * self.pad[i];
            if padded < self.kernel[i] || self.stride[i] == 0 {
                return Err(Error::Shape(format!(
                    "input extent {n} too small for kernel {} with pad {}",
                    self.kernel[i], self.pad[i]
                )));
            }
            Ok((padded - self.kernel[i]) / self.stride[i] + 1)
        };
        Ok((f(h, 0)?, f(w, 1)?))
    }

    /// Output size of the transposed convolution with this geometry.
    pub fn transposed_dims(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let f = |n: usize, i: usize| -> Result<usize> {
            ((n - 1) * self.stride[i] + self.kernel[i])
                .checked_sub(2 * self.pad[i])
                .filter(|&v| v > 0)
                .ok_or_else(|| Error::Shape("transposed convolution output would be empty".into()))
        };
        Ok((f(h, 0)?, f(w, 1)?))
    }

    fn is_pointwise(&self) -> bool {
        self.kernel == [1, 1] && self.stride == [1, 1] && self.pad == [0, 0]
    }
}

/// Unfolds one sample [C, H, W] into columns [C·kh·kw, Ho·Wo].
pub fn im2col(x: &[f64], c: usize, h: usize, w: usize, g: ConvGeom, ho: usize, wo: usize, cols: &mut [f64]) {
    let [kh, kw] = g.kernel;
    let p = ho * wo;
    for ci in 0..c {
        let plane = &x[ci * h * w..(ci + 1) * h * w];
        for a in 0..kh {
            for b in 0..kw {
                let row = &mut cols[((ci * kh + a) * kw + b) * p..][..p];
                for oh in 0..ho {
                    let ih = (oh * g.stride[0] + a) as isize - g.pad[0] as isize;
                    let dst = &mut row[oh * wo..(oh + 1) * wo];
                    if ih < 0 || ih >= h as isize {
                        dst.fill(0.0);
                        continue;
                    }
                    let src = &plane[ih as usize * w..(ih as usize + 1) * w];
                    for (ow, d) in dst.iter_mut().enumerate() {
                        let iw = (ow * g.stride[1] + b) as isize - g.pad[1] as isize;
                        *d = if iw < 0 || iw >= w as isize { 0.0 } else { src[iw as usize] };
                    }
                }
            }
        }
    }
}

/// Adjoint of `im2col`: accumulates columns back into a sample [C, H, W].
pub fn col2im(cols: &[f64], c: usize, h: usize, w: usize, g: ConvGeom, ho: usize, wo: usize, x: &mut [f64]) {
    let [kh, kw] = g.kernel;
    let p = ho * wo;
    for ci in 0..c {
        let plane = &mut x[ci * h * w..(ci + 1) * h * w];
        for a in 0..kh {
            for b in 0..kw {
                let row = &cols[((ci * kh + a) * kw + b) * p..][..p];
                for oh in 0..ho {
                    let ih = (oh * g.stride[0] + a) as isize - g.pad[0] as isize;
                    if ih < 0 || ih >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[ih as usize * w..(ih as usize + 1) * w];
                    for ow in 0..wo {
                        let iw = (ow * g.stride[1] + b) as isize - g.pad[1] as isize;
                        if iw >= 0 && iw < w as isize {
                            dst[iw as usize] += row[oh * wo + ow];
                        }
                    }
                }
            }
        }
    }
}

fn check_conv(x: &Tensor, w: &Tensor, bias: Option<&Tensor>, g: ConvGeom, transposed: bool) -> Result<()> {
    let (_, c, _, _) = x.dims4()?;
    let (a, b, kh, kw) = w.dims4()?;
    if [kh, kw] != g.kernel {
        return Err(Error::Shape(format!("weight kernel {kh}x{kw} does not match geometry {:?}", g.kernel)));
    }
    let (cin, co) = if transposed { (a, b) } else { (b, a) };
    if cin != c {
        return Err(Error::Shape(format!("input has {c} channels, weight expects {cin}")));
    }
    if let Some(bias) = bias {
        if bias.shape != [co] {
            return Err(Error::Shape(format!("bias shape {:?}, expected [{co}]", bias.shape)));
        }
    }
    Ok(())
}

/// Cross-correlation: x [N, Ci, H, W], w [Co, Ci, kh, kw], bias [Co].
pub fn conv_forward(x: &Tensor, w: &Tensor, bias: Option<&Tensor>, g: ConvGeom) -> Result<Tensor> {
    check_conv(x, w, bias, g, false)?;
    let (n, ci, h, wd) = x.dims4()?;
    let co = w.shape[0];
    let (ho, wo) = g.out_dims(h, wd)?;
    let (k, p) = (ci * g.kernel[0] * g.kernel[1], ho * wo);
    let mut out = vec![0.0; n * co * p];
    let mut cols = if g.is_pointwise() { Vec::new() } else { vec![0.0; k * p] };
    for s in 0..n {
        let xs = &x.data[s * ci * h * wd..(s + 1) * ci * h * wd];
        let colsr: &[f64] = if g.is_pointwise() {
            xs
        } else {
            im2col(xs, ci, h, wd, g, ho, wo, &mut cols);
            &cols
        };
        let os = &mut out[s * co * p..(s + 1) * co * p];
        gemm(co, k, p, &w.data, false, colsr, false, os, false);
        if let Some(b) = bias {
            for (o, &bv) in os.chunks_mut(p).zip(&b.data) {
                o.iter_mut().for_each(|v| *v += bv);
            }
        }
    }
    Tensor::new(vec![n, co, ho, wo], out)
}

/// Gradients of `conv_forward` w.r.t. input, weight, and bias.
pub fn conv_backward(x: &Tensor, w: &Tensor, dy: &Tensor, g: ConvGeom) -> Result<(Tensor, Tensor, Tensor)> {
    let (n, ci, h, wd) = x.dims4()?;
    let co = w.shape[0];
    let (ho, wo) = g.out_dims(h, wd)?;
    if dy.shape != [n, co, ho, wo] {
        return Err(Error::Shape(format!("upstream gradient {:?} vs output [{n}, {co}, {ho}, {wo}]", dy.shape)));
    }
    let (k, p) = (ci * g.kernel[0] * g.kernel[1], ho * wo);
    let mut dx = vec![0.0; x.len()];
    let mut dw = vec![0.0; w.len()];
    let mut db = vec![0.0; co];
    let mut cols = vec![0.0; k * p];
    let mut dcols = vec![0.0; k * p];
    for s in 0..n {
        let xs = &x.data[s * ci * h * wd..(s + 1) * ci * h * wd];
        let dys = &dy.data[s * co * p..(s + 1) * co * p];
        for (c, row) in dys.chunks(p).enumerate() {
            db[c] += row.iter().sum::<f64>();
        }
        let dxs = &mut dx[s * ci * h * wd..(s + 1) * ci * h * wd];
        if g.is_pointwise() {
            gemm(co, p, k, dys, false, xs, true, &mut dw, true);
            gemm(k, co, p, &w.data, true, dys, false, dxs, false);
        } else {
            im2col(xs, ci, h, wd, g, ho, wo, &mut cols);
            gemm(co, p, k, dys, false, &cols, true, &mut dw, true);
            gemm(k, co, p, &w.data, true, dys, false, &mut dcols, false);
            col2im(&dcols, ci, h, wd, g, ho, wo, dxs);
        }
    }
    Ok((
        Tensor::new(x.shape.clone(), dx)?,
        Tensor::new(w.shape.clone(), dw)?,
        Tensor::new(vec![co], db)?,
    ))
}

/// Transposed convolution: x [N, Ci, H, W], w [Ci, Co, kh, kw]; the adjoint of
/// `conv_forward` with the same geometry.
pub fn conv_transpose_forward(x: &Tensor, w: &Tensor, bias: Option<&Tensor>, g: ConvGeom) -> Result<Tensor> {
    check_conv(x, w, bias, g, true)?;
    let (n, ci, h, wd) = x.dims4()?;
    let co = w.shape[1];
    let (ho, wo) = g.transposed_dims(h, wd)?;
    if g.out_dims(ho, wo)? != (h, wd) {
        return Err(Error::Shape("transposed geometry is not invertible for this size".into()));
    }
    let (k, p) = (co * g.kernel[0] * g.kernel[1], h * wd);
    let mut out = vec![0.0; n * co * ho * wo];
    let mut cols = vec![0.0; k * p];
    for s in 0..n {
        let xs = &x.data[s * ci * p..(s + 1) * ci * p];
        gemm(k, ci, p, &w.data, true, xs, false, &mut cols, false);
        let os = &mut out[s * co * ho * wo..(s + 1) * co * ho * wo];
        col2im(&cols, co, ho, wo, g, h, wd, os);
        if let Some(b) = bias {
            for (o, &bv) in os.chunks_mut(ho * wo).zip(&b.data) {
                o.iter_mut().for_each(|v| *v += bv);
            }
        }
    }
    Tensor::new(vec![n, co, ho, wo], out)
}

pub fn conv_transpose_backward(x: &Tensor, w: &Tensor, dy: &Tensor, g: ConvGeom) -> Result<(Tensor, Tensor, Tensor)> {
    let (n, ci, h, wd) = x.dims4()?;
    let co = w.shape[1];
    let (ho, wo) = g.transposed_dims(h, wd)?;
    if dy.shape != [n, co, ho, wo] {
        return Err(Error::Shape(format!("upstream gradient {:?} vs output [{n}, {co}, {ho}, {wo}]", dy.shape)));
    }
    let (k, p) = (co * g.kernel[0] * g.kernel[1], h * wd);
    let mut dx = vec![0.0; x.len()];
    let mut dw = vec![0.0; w.len()];
    let mut db = vec![0.0; co];
    let mut dcols = vec![0.0; k * p];
    for s in 0..n {
        let dys = &dy.data[s * co * ho * wo..(s + 1) * co * ho * wo];
        for (c, plane) in dys.chunks(ho * wo).enumerate() {
            db[c] += plane.iter().sum::<f64>();
        }
        im2col(dys, co, ho, wo, g, h, wd, &mut dcols);
        let xs = &x.data[s * ci * p..(s + 1) * ci * p];
        gemm(ci, k, p, &w.data, false, &dcols, false, &mut dx[s * ci * p..(s + 1) * ci * p], false);
        gemm(ci, p, k, xs, false, &dcols, true, &mut dw, true);
    }
    Ok((
        Tensor::new(x.shape.clone(), dx)?,
        Tensor::new(w.shape.clone(), dw)?,
        Tensor::new(vec![co], db)?,
    ))
}

/// [N, C·r², H, W] → [N, C, H·r, W·r] with out[c, h·r + i, w·r + j] = in[c·r² + i·r + j, h, w].
pub fn pixel_shuffle(x: &Tensor, r: usize) -> Result<Tensor> {
    let (n, cr, h, w) = x.dims4()?;
    if r == 0 || cr % (r * r) != 0 {
        return Err(Error::Shape(format!("{cr} channels not divisible by {r}²")));
    }
    let c = cr / (r * r);
    let mut out = vec![0.0; x.len()];
    for s in 0..n {
        for ch in 0..c {
            for i in 0..r {
                for j in 0..r {
                    let src = ((s * cr + ch * r * r + i * r + j) * h) * w;
                    for y in 0..h {
                        for xx in 0..w {
                            let dst = ((s * c + ch) * h * r + y * r + i) * w * r + xx * r + j;
                            out[dst] = x.data[src + y * w + xx];
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![n, c, h * r, w * r], out)
}

/// Inverse of `pixel_shuffle`.
pub fn pixel_unshuffle(x: &Tensor, r: usize) -> Result<Tensor> {
    let (n, c, hr, wr) = x.dims4()?;
    if r == 0 || hr % r != 0 || wr % r != 0 {
        return Err(Error::Shape(format!("spatial dims {hr}x{wr} not divisible by {r}")));
    }
    let (h, w) = (hr / r, wr / r);
    let cr = c * r * r;
    let mut out = vec![0.0; x.len()];
    for s in 0..n {
        for ch in 0..c {
            for i in 0..r {
                for j in 0..r {
                    let dst = ((s * cr + ch * r * r + i * r + j) * h) * w;
                    for y in 0..h {
                        for xx in 0..w {
                            let src = ((s * c + ch) * hr + y * r + i) * wr + xx * r + j;
                            out[dst + y * w + xx] = x.data[src];
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![n, cr, h, w], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_kernel() {
        let x = Tensor::new(vec![1, 1, 2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let mut k = vec![0.0; 9];
        k[4] = 1.0;
        let w = Tensor::new(vec![1, 1, 3, 3], k).unwrap();
        assert_eq!(conv_forward(&x, &w, None, ConvGeom::square(3)).unwrap(), x);
    }

    #[test]
    fn ones_kernel_line() {
        let x = Tensor::new(vec![1, 1, 1, 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let w = Tensor::new(vec![1, 1, 1, 3], vec![1.0; 3]).unwrap();
        let y = conv_forward(&x, &w, None, ConvGeom::line(3, 1)).unwrap();
        assert_eq!(y.data, vec![3.0, 6.0, 9.0, 7.0]);
    }

    #[test]
    fn stride_two_halves() {
        let g = ConvGeom::line(5, 2);
        assert_eq!(g.out_dims(1, 208).unwrap(), (1, 104));
        let up = ConvGeom::new([1, 2], [1, 2], [0, 0]);
        assert_eq!(up.transposed_dims(1, 13).unwrap(), (1, 26));
    }

    #[test]
    fn channel_mismatch() {
        let x = Tensor::zeros(vec![1, 2, 3, 3]);
        let w = Tensor::zeros(vec![4, 3, 1, 1]);
        assert!(matches!(conv_forward(&x, &w, None, ConvGeom::square(1)), Err(Error::Shape(_))));
    }

    #[test]
    fn shuffle_roundtrip() {
        let x = Tensor::new(vec![2, 8, 3, 2], (0..96).map(f64::from).collect()).unwrap();
        let y = pixel_shuffle(&x, 2).unwrap();
        assert_eq!(y.shape, vec![2, 2, 6, 4]);
        assert_eq!(pixel_unshuffle(&y, 2).unwrap(), x);
    }
}
