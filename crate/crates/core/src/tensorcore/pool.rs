use super::tensor::TensorND;
use crate::error::{shape_err, Result};

/// Max pooling over `[C, H, W]`. Returns the pooled tensor and, for every
/// output element, the flat index of the winning input element. Ties go to the
/// first position in row-major window order.
pub fn maxpool2d(input: &TensorND, window: usize, stride: usize) -> Result<(TensorND, Vec<usize>)> {
    let (c, h, w) = input.dims3()?;
    if window == 0 || stride == 0 {
        return Err(shape_err!("pool window and stride must be positive"));
    }
    if window > h || window > w {
        return Err(shape_err!(
            "pool window {window} larger than input {:?}",
            input.shape()
        ));
    }
    let oh = (h - window) / stride + 1;
    let ow = (w - window) / stride + 1;
    let data = input.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut argmax = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best_idx = (ch * h + oy * stride) * w + ox * stride;
                let mut best = data[best_idx];
                for dy in 0..window {
                    for dx in 0..window {
                        let idx = (ch * h + oy * stride + dy) * w + ox * stride + dx;
                        if data[idx] > best {
                            best = data[idx];
                            best_idx = idx;
                        }
                    }
                }
                out.push(best);
                argmax.push(best_idx);
            }
        }
    }
    Ok((TensorND::new(vec![c, oh, ow], out)?, argmax))
}

/// Routes each output gradient to its argmax position.
pub fn maxpool2d_backward(
    grad_out: &TensorND,
    argmax: &[usize],
    input_shape: &[usize],
) -> Result<TensorND> {
    if grad_out.len() != argmax.len() {
        return Err(shape_err!(
            "maxpool backward grad {:?} has {} elements, forward recorded {}",
            grad_out.shape(),
            grad_out.len(),
            argmax.len()
        ));
    }
    let mut grad_in = TensorND::zeros(input_shape);
    let gi = grad_in.data_mut();
    for (&idx, &g) in argmax.iter().zip(grad_out.data()) {
        gi[idx] += g;
    }
    Ok(grad_in)
}

/// Nearest-neighbour upsampling: each pixel becomes a `factor × factor` block.
pub fn upsample_nearest(input: &TensorND, factor: usize) -> Result<TensorND> {
    let (c, h, w) = input.dims3()?;
    if factor == 0 {
        return Err(shape_err!("upsample factor must be at least 1"));
    }
    if factor == 1 {
        return Ok(input.clone());
    }
    let (oh, ow) = (h * factor, w * factor);
    let data = input.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for y in 0..oh {
            let src = &data[(ch * h + y / factor) * w..(ch * h + y / factor + 1) * w];
            for &v in src {
                out.extend(std::iter::repeat_n(v, factor));
            }
        }
    }
    TensorND::new(vec![c, oh, ow], out)
}

/// Sums the gradient over each replication block.
pub fn upsample_nearest_backward(grad_out: &TensorND, factor: usize) -> Result<TensorND> {
    let (c, oh, ow) = grad_out.dims3()?;
    if factor == 0 || oh % factor != 0 || ow % factor != 0 {
        return Err(shape_err!(
            "upsample backward grad {:?} not divisible by factor {factor}",
            grad_out.shape()
        ));
    }
    let (h, w) = (oh / factor, ow / factor);
    let g = grad_out.data();
    let mut out = vec![0.0; c * h * w];
    for ch in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                out[(ch * h + y / factor) * w + x / factor] += g[(ch * oh + y) * ow + x];
            }
        }
    }
    TensorND::new(vec![c, h, w], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_of_ramp() {
        let x = TensorND::new(vec![1, 4, 4], (1..=16).map(f64::from).collect()).unwrap();
        let (y, _) = maxpool2d(&x, 2, 2).unwrap();
        assert_eq!(y.data(), &[6.0, 8.0, 14.0, 16.0]);
    }

    #[test]
    fn constant_input_picks_first_index() {
        let x = TensorND::filled(&[1, 4, 4], 3.0);
        let (y, idx) = maxpool2d(&x, 2, 2).unwrap();
        assert!(y.data().iter().all(|&v| v == 3.0));
        assert_eq!(idx, vec![0, 2, 8, 10]);
    }

    #[test]
    fn backward_deposits_at_argmax() {
        let x = TensorND::new(vec![1, 4, 4], (1..=16).map(f64::from).collect()).unwrap();
        let (y, idx) = maxpool2d(&x, 2, 2).unwrap();
        let g = maxpool2d_backward(&TensorND::filled(y.shape(), 1.0), &idx, x.shape()).unwrap();
        let expected: Vec<f64> = (0..16)
            .map(|i| if [5, 7, 13, 15].contains(&i) { 1.0 } else { 0.0 })
            .collect();
        assert_eq!(g.data(), expected.as_slice());
    }

    #[test]
    fn window_larger_than_input_rejected() {
        assert!(maxpool2d(&TensorND::zeros(&[1, 2, 2]), 3, 1).is_err());
    }

    #[test]
    fn upsample_cases() {
        let x = TensorND::filled(&[1, 1, 1], 3.0);
        assert_eq!(upsample_nearest(&x, 1).unwrap(), x);
        let y = upsample_nearest(&x, 2).unwrap();
        assert_eq!(y.shape(), &[1, 2, 2]);
        assert!(y.data().iter().all(|&v| v == 3.0));

        let g = upsample_nearest_backward(&TensorND::filled(&[2, 6, 4], 1.0), 2).unwrap();
        assert_eq!(g.shape(), &[2, 3, 2]);
        assert!(g.data().iter().all(|&v| v == 4.0));
        assert!(upsample_nearest(&x, 0).is_err());
    }
}
