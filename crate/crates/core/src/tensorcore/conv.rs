//! Direct 2-d cross-correlation and its transpose.
//!
//! Kernels are stored as `[a, b, K, K]`. For [`conv2d`] `a` is the output
//! channel and `b` the input channel. [`deconv2d`] reuses the same layout the
//! other way around (`a` input, `b` output), which makes the two maps adjoint
//! when they share a kernel.
//!
//! Padding is handled by materialising a zero-padded copy of the input, so the
//! three inner kernels below only ever see unpadded data.

use super::tensor::TensorND;
use crate::error::{shape_err, Result};

/// Output of the correlation: `out[a] = sum_b kernel[a, b] ⋆ input[b]`.
fn correlate(
    input: &[f64],
    (in_c, in_h, in_w): (usize, usize, usize),
    kernel: &[f64],
    (k_a, k_b, k): (usize, usize, usize),
    stride: usize,
) -> (Vec<f64>, usize, usize) {
    debug_assert_eq!(in_c, k_b);
    let out_h = (in_h - k) / stride + 1;
    let out_w = (in_w - k) / stride + 1;
    let mut out = vec![0.0; k_a * out_h * out_w];
    for a in 0..k_a {
        let out_plane = &mut out[a * out_h * out_w..(a + 1) * out_h * out_w];
        for b in 0..k_b {
            let in_plane = &input[b * in_h * in_w..(b + 1) * in_h * in_w];
            let taps = &kernel[(a * k_b + b) * k * k..(a * k_b + b + 1) * k * k];
            for ky in 0..k {
                for kx in 0..k {
                    let w = taps[ky * k + kx];
                    if w == 0.0 {
                        continue;
                    }
                    for oy in 0..out_h {
                        let row_start = (oy * stride + ky) * in_w + kx;
                        let out_row = &mut out_plane[oy * out_w..(oy + 1) * out_w];
                        if stride == 1 {
                            let in_row = &in_plane[row_start..row_start + out_w];
                            for (o, &x) in out_row.iter_mut().zip(in_row) {
                                *o += w * x;
                            }
                        } else {
                            for (ox, o) in out_row.iter_mut().enumerate() {
                                *o += w * in_plane[row_start + ox * stride];
                            }
                        }
                    }
                }
            }
        }
    }
    (out, out_h, out_w)
}

/// Adjoint of [`correlate`] with respect to its input: spreads `grad`
/// (`k_a` channels) back onto a `k_b × full_h × full_w` plane stack.
fn scatter(
    grad: &[f64],
    (g_h, g_w): (usize, usize),
    kernel: &[f64],
    (k_a, k_b, k): (usize, usize, usize),
    stride: usize,
    (full_h, full_w): (usize, usize),
) -> Vec<f64> {
    let mut out = vec![0.0; k_b * full_h * full_w];
    for a in 0..k_a {
        let g_plane = &grad[a * g_h * g_w..(a + 1) * g_h * g_w];
        for b in 0..k_b {
            let out_plane = &mut out[b * full_h * full_w..(b + 1) * full_h * full_w];
            let taps = &kernel[(a * k_b + b) * k * k..(a * k_b + b + 1) * k * k];
            for ky in 0..k {
                for kx in 0..k {
                    let w = taps[ky * k + kx];
                    if w == 0.0 {
                        continue;
                    }
                    for gy in 0..g_h {
                        let row_start = (gy * stride + ky) * full_w + kx;
                        let g_row = &g_plane[gy * g_w..(gy + 1) * g_w];
                        if stride == 1 {
                            let dst = &mut out_plane[row_start..row_start + g_w];
                            for (d, &g) in dst.iter_mut().zip(g_row) {
                                *d += w * g;
                            }
                        } else {
                            for (gx, &g) in g_row.iter().enumerate() {
                                out_plane[row_start + gx * stride] += w * g;
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Gradient of [`correlate`] with respect to the kernel.
fn kernel_grad(
    grad: &[f64],
    (g_h, g_w): (usize, usize),
    input: &[f64],
    (in_c, in_h, in_w): (usize, usize, usize),
    k_a: usize,
    k: usize,
    stride: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; k_a * in_c * k * k];
    for a in 0..k_a {
        let g_plane = &grad[a * g_h * g_w..(a + 1) * g_h * g_w];
        for b in 0..in_c {
            let in_plane = &input[b * in_h * in_w..(b + 1) * in_h * in_w];
            let taps = &mut out[(a * in_c + b) * k * k..(a * in_c + b + 1) * k * k];
            for ky in 0..k {
                for kx in 0..k {
                    let mut acc = 0.0;
                    for gy in 0..g_h {
                        let row_start = (gy * stride + ky) * in_w + kx;
                        let g_row = &g_plane[gy * g_w..(gy + 1) * g_w];
                        if stride == 1 {
                            let in_row = &in_plane[row_start..row_start + g_w];
                            acc += g_row.iter().zip(in_row).map(|(g, x)| g * x).sum::<f64>();
                        } else {
                            for (gx, &g) in g_row.iter().enumerate() {
                                acc += g * in_plane[row_start + gx * stride];
                            }
                        }
                    }
                    taps[ky * k + kx] = acc;
                }
            }
        }
    }
    out
}

fn pad(input: &[f64], (c, h, w): (usize, usize, usize), p: usize) -> Vec<f64> {
    if p == 0 {
        return input.to_vec();
    }
    let (ph, pw) = (h + 2 * p, w + 2 * p);
    let mut out = vec![0.0; c * ph * pw];
    for ch in 0..c {
        for y in 0..h {
            let src = &input[(ch * h + y) * w..(ch * h + y + 1) * w];
            let start = (ch * ph + y + p) * pw + p;
            out[start..start + w].copy_from_slice(src);
        }
    }
    out
}

fn crop(input: &[f64], (c, h, w): (usize, usize, usize), p: usize) -> Vec<f64> {
    if p == 0 {
        return input.to_vec();
    }
    let (oh, ow) = (h - 2 * p, w - 2 * p);
    let mut out = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for y in 0..oh {
            let start = (ch * h + y + p) * w + p;
            out.extend_from_slice(&input[start..start + ow]);
        }
    }
    out
}

fn kernel_dims(kernel: &TensorND) -> Result<(usize, usize, usize)> {
    let (a, b, kh, kw) = kernel.dims4()?;
    if kh != kw {
        return Err(shape_err!("kernel {:?} must be square", kernel.shape()));
    }
    Ok((a, b, kh))
}

fn check_stride(stride: usize) -> Result<()> {
    if stride == 0 {
        return Err(shape_err!("stride must be positive"));
    }
    Ok(())
}

/// Cross-correlation of `input [C_in, H, W]` with `kernel [C_out, C_in, K, K]`
/// plus a per-output-channel bias.
pub fn conv2d(
    input: &TensorND,
    kernel: &TensorND,
    bias: &[f64],
    stride: usize,
    padding: usize,
) -> Result<TensorND> {
    check_stride(stride)?;
    let (c, h, w) = input.dims3()?;
    let (k_out, k_in, k) = kernel_dims(kernel)?;
    if k_in != c {
        return Err(shape_err!(
            "conv2d input {:?} has {c} channels, kernel {:?} expects {k_in}",
            input.shape(),
            kernel.shape()
        ));
    }
    if h + 2 * padding < k || w + 2 * padding < k {
        return Err(shape_err!(
            "conv2d kernel {:?} larger than padded input {:?} (padding {padding})",
            kernel.shape(),
            input.shape()
        ));
    }
    if bias.len() != k_out {
        return Err(shape_err!(
            "conv2d bias has {} entries, kernel {:?} has {k_out} outputs",
            bias.len(),
            kernel.shape()
        ));
    }
    let padded = pad(input.data(), (c, h, w), padding);
    let (mut out, oh, ow) = correlate(
        &padded,
        (c, h + 2 * padding, w + 2 * padding),
        kernel.data(),
        (k_out, k_in, k),
        stride,
    );
    add_bias(&mut out, bias, oh * ow);
    TensorND::new(vec![k_out, oh, ow], out)
}

/// Gradients of [`conv2d`] with respect to input, kernel and bias.
#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub input: TensorND,
    pub kernel: TensorND,
    pub bias: Vec<f64>,
}

pub fn conv2d_backward(
    grad_out: &TensorND,
    input: &TensorND,
    kernel: &TensorND,
    stride: usize,
    padding: usize,
) -> Result<ConvGrads> {
    conv2d_backward_parts(grad_out, input, kernel, stride, padding, Needs::ALL).map(Parts::unwrap)
}

/// Which gradients a backward call has to produce.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Needs {
    pub input: bool,
    pub params: bool,
}

impl Needs {
    pub const ALL: Needs = Needs {
        input: true,
        params: true,
    };
}

pub(crate) struct Parts {
    pub input: Option<TensorND>,
    pub kernel: Option<TensorND>,
    pub bias: Option<Vec<f64>>,
}

impl Parts {
    fn unwrap(self) -> ConvGrads {
        ConvGrads {
            input: self.input.expect("input gradient requested"),
            kernel: self.kernel.expect("kernel gradient requested"),
            bias: self.bias.expect("bias gradient requested"),
        }
    }
}

pub(crate) fn conv2d_backward_parts(
    grad_out: &TensorND,
    input: &TensorND,
    kernel: &TensorND,
    stride: usize,
    padding: usize,
    needs: Needs,
) -> Result<Parts> {
    check_stride(stride)?;
    let (c, h, w) = input.dims3()?;
    let (k_out, k_in, k) = kernel_dims(kernel)?;
    let (ph, pw) = (h + 2 * padding, w + 2 * padding);
    if k_in != c || ph < k || pw < k {
        return Err(shape_err!(
            "conv2d_backward input {:?} incompatible with kernel {:?}",
            input.shape(),
            kernel.shape()
        ));
    }
    let expected = [k_out, (ph - k) / stride + 1, (pw - k) / stride + 1];
    if grad_out.shape() != expected {
        return Err(shape_err!(
            "conv2d_backward grad {:?} does not match forward output {expected:?}",
            grad_out.shape()
        ));
    }
    let (gh, gw) = (expected[1], expected[2]);
    let g = grad_out.data();
    let input_grad = if needs.input {
        let grad_padded = scatter(g, (gh, gw), kernel.data(), (k_out, k_in, k), stride, (ph, pw));
        let grad_input = crop(&grad_padded, (c, ph, pw), padding);
        Some(TensorND::new(vec![c, h, w], grad_input)?)
    } else {
        None
    };
    let (kernel_g, bias_g) = if needs.params {
        let padded = pad(input.data(), (c, h, w), padding);
        let grad_kernel = kernel_grad(g, (gh, gw), &padded, (c, ph, pw), k_out, k, stride);
        (
            Some(TensorND::new(kernel.shape().to_vec(), grad_kernel)?),
            Some(bias_grad(g, k_out, gh * gw)),
        )
    } else {
        (None, None)
    };
    Ok(Parts {
        input: input_grad,
        kernel: kernel_g,
        bias: bias_g,
    })
}

/// Transposed convolution: `input [A, H, W]` with `kernel [A, B, K, K]`
/// produces `[B, (H-1)·stride - 2·padding + K, ...]`.
pub fn deconv2d(
    input: &TensorND,
    kernel: &TensorND,
    bias: &[f64],
    stride: usize,
    padding: usize,
) -> Result<TensorND> {
    check_stride(stride)?;
    let (c, h, w) = input.dims3()?;
    let (k_a, k_b, k) = kernel_dims(kernel)?;
    if k_a != c {
        return Err(shape_err!(
            "deconv2d input {:?} has {c} channels, kernel {:?} expects {k_a}",
            input.shape(),
            kernel.shape()
        ));
    }
    let (fh, fw) = ((h - 1) * stride + k, (w - 1) * stride + k);
    if fh <= 2 * padding || fw <= 2 * padding {
        return Err(shape_err!(
            "deconv2d padding {padding} consumes whole output for input {:?}, kernel {:?}",
            input.shape(),
            kernel.shape()
        ));
    }
    if bias.len() != k_b {
        return Err(shape_err!(
            "deconv2d bias has {} entries, kernel {:?} has {k_b} outputs",
            bias.len(),
            kernel.shape()
        ));
    }
    let full = scatter(input.data(), (h, w), kernel.data(), (k_a, k_b, k), stride, (fh, fw));
    let mut out = crop(&full, (k_b, fh, fw), padding);
    let (oh, ow) = (fh - 2 * padding, fw - 2 * padding);
    add_bias(&mut out, bias, oh * ow);
    TensorND::new(vec![k_b, oh, ow], out)
}

pub fn deconv2d_backward(
    grad_out: &TensorND,
    input: &TensorND,
    kernel: &TensorND,
    stride: usize,
    padding: usize,
) -> Result<ConvGrads> {
    deconv2d_backward_parts(grad_out, input, kernel, stride, padding, Needs::ALL).map(Parts::unwrap)
}

pub(crate) fn deconv2d_backward_parts(
    grad_out: &TensorND,
    input: &TensorND,
    kernel: &TensorND,
    stride: usize,
    padding: usize,
    needs: Needs,
) -> Result<Parts> {
    check_stride(stride)?;
    let (c, h, w) = input.dims3()?;
    let (k_a, k_b, k) = kernel_dims(kernel)?;
    if k_a != c {
        return Err(shape_err!(
            "deconv2d_backward input {:?} incompatible with kernel {:?}",
            input.shape(),
            kernel.shape()
        ));
    }
    let (fh, fw) = ((h - 1) * stride + k, (w - 1) * stride + k);
    let expected = [k_b, fh.saturating_sub(2 * padding), fw.saturating_sub(2 * padding)];
    if grad_out.shape() != expected {
        return Err(shape_err!(
            "deconv2d_backward grad {:?} does not match forward output {expected:?}",
            grad_out.shape()
        ));
    }
    let g_full = pad(grad_out.data(), (k_b, expected[1], expected[2]), padding);
    let input_grad = if needs.input {
        let (grad_input, gh, gw) =
            correlate(&g_full, (k_b, fh, fw), kernel.data(), (k_a, k_b, k), stride);
        debug_assert_eq!((gh, gw), (h, w));
        Some(TensorND::new(vec![c, h, w], grad_input)?)
    } else {
        None
    };
    let (kernel_g, bias_g) = if needs.params {
        let grad_kernel = kernel_grad(input.data(), (h, w), &g_full, (k_b, fh, fw), k_a, k, stride);
        (
            Some(TensorND::new(kernel.shape().to_vec(), grad_kernel)?),
            Some(bias_grad(grad_out.data(), k_b, expected[1] * expected[2])),
        )
    } else {
        (None, None)
    };
    Ok(Parts {
        input: input_grad,
        kernel: kernel_g,
        bias: bias_g,
    })
}

fn add_bias(out: &mut [f64], bias: &[f64], plane: usize) {
    for (chunk, &b) in out.chunks_mut(plane).zip(bias) {
        if b != 0.0 {
            chunk.iter_mut().for_each(|v| *v += b);
        }
    }
}

fn bias_grad(grad: &[f64], channels: usize, plane: usize) -> Vec<f64> {
    (0..channels)
        .map(|c| grad[c * plane..(c + 1) * plane].iter().sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensorcore::testutil::{random_tensor, rng};

    #[test]
    fn unit_kernel_is_identity() {
        let mut r = rng(1);
        let x = random_tensor(&mut r, &[1, 5, 6]);
        let k = TensorND::filled(&[1, 1, 1, 1], 1.0);
        assert_eq!(conv2d(&x, &k, &[0.0], 1, 0).unwrap(), x);
        assert_eq!(deconv2d(&x, &k, &[0.0], 1, 0).unwrap(), x);
    }

    #[test]
    fn constant_input_all_ones_kernel() {
        let x = TensorND::filled(&[1, 4, 4], 2.0);
        let k = TensorND::filled(&[1, 1, 3, 3], 1.0);
        let y = conv2d(&x, &k, &[0.0], 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 2, 2]);
        assert!(y.data().iter().all(|&v| v == 18.0));
    }

    #[test]
    fn output_size_formula() {
        let mut r = rng(2);
        let x = random_tensor(&mut r, &[3, 8, 8]);
        let k = random_tensor(&mut r, &[4, 3, 3, 3]);
        let y = conv2d(&x, &k, &[0.0; 4], 1, 0).unwrap();
        assert_eq!(y.shape(), &[4, 6, 6]);
        let y = conv2d(&x, &k, &[0.0; 4], 2, 1).unwrap();
        // floor((8 + 2 - 3) / 2) + 1
        assert_eq!(y.shape(), &[4, 4, 4]);
    }

    #[test]
    fn deconv_size_rule() {
        let x = TensorND::filled(&[1, 2, 2], 1.0);
        let k = TensorND::filled(&[1, 1, 3, 3], 1.0);
        assert_eq!(deconv2d(&x, &k, &[0.0], 1, 0).unwrap().shape(), &[1, 4, 4]);
        assert_eq!(deconv2d(&x, &k, &[0.0], 2, 1).unwrap().shape(), &[1, 3, 3]);
    }

    #[test]
    fn shape_errors_name_both_shapes() {
        let x = TensorND::zeros(&[2, 4, 4]);
        let k = TensorND::zeros(&[1, 3, 3, 3]);
        let msg = conv2d(&x, &k, &[0.0], 1, 0).unwrap_err().to_string();
        assert!(msg.contains("[2, 4, 4]") && msg.contains("[1, 3, 3, 3]"), "{msg}");

        let big = TensorND::zeros(&[1, 1, 5, 5]);
        let x = TensorND::zeros(&[1, 3, 3]);
        let msg = conv2d(&x, &big, &[0.0], 1, 0).unwrap_err().to_string();
        assert!(msg.contains("[1, 3, 3]") && msg.contains("[1, 1, 5, 5]"), "{msg}");
        assert!(conv2d(&x, &big, &[0.0], 1, 1).is_ok());
    }

    #[test]
    fn sum_loss_identity_kernel_gives_ones() {
        let mut r = rng(3);
        let x = random_tensor(&mut r, &[1, 4, 4]);
        let k = TensorND::filled(&[1, 1, 1, 1], 1.0);
        let g = TensorND::filled(&[1, 4, 4], 1.0);
        let grads = conv2d_backward(&g, &x, &k, 1, 0).unwrap();
        assert!(grads.input.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn zero_grad_out_gives_zero_grads() {
        let mut r = rng(4);
        let x = random_tensor(&mut r, &[2, 5, 5]);
        let k = random_tensor(&mut r, &[3, 2, 3, 3]);
        let g = TensorND::zeros(&[3, 3, 3]);
        let grads = conv2d_backward(&g, &x, &k, 1, 0).unwrap();
        assert!(grads.input.data().iter().all(|&v| v == 0.0));
        assert!(grads.kernel.data().iter().all(|&v| v == 0.0));
        assert!(grads.bias.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_rejects_wrong_grad_shape() {
        let x = TensorND::zeros(&[1, 4, 4]);
        let k = TensorND::zeros(&[1, 1, 3, 3]);
        let g = TensorND::zeros(&[1, 3, 3]);
        assert!(conv2d_backward(&g, &x, &k, 1, 0).is_err());
        assert!(deconv2d_backward(&g, &x, &k, 1, 0).is_err());
    }
}
