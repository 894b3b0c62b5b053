use super::tensor::TensorND;
use crate::error::{shape_err, Result};

/// Affine map `weights · input + bias` with `weights` shaped `[m, n]`.
pub fn linear(input: &[f64], weights: &TensorND, bias: &[f64]) -> Result<Vec<f64>> {
    let (m, n) = matrix_dims(weights)?;
    if input.len() != n || bias.len() != m {
        return Err(shape_err!(
            "linear: input length {} / bias length {} vs weights {:?}",
            input.len(),
            bias.len(),
            weights.shape()
        ));
    }
    Ok(weights
        .data()
        .chunks_exact(n)
        .zip(bias)
        .map(|(row, b)| row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b)
        .collect())
}

#[derive(Debug, Clone)]
pub struct LinearGrads {
    pub input: Vec<f64>,
    pub weights: TensorND,
    pub bias: Vec<f64>,
}

pub fn linear_backward(grad_out: &[f64], input: &[f64], weights: &TensorND) -> Result<LinearGrads> {
    let (m, n) = matrix_dims(weights)?;
    if grad_out.len() != m || input.len() != n {
        return Err(shape_err!(
            "linear_backward: grad length {} / input length {} vs weights {:?}",
            grad_out.len(),
            input.len(),
            weights.shape()
        ));
    }
    let mut grad_input = vec![0.0; n];
    let mut grad_w = Vec::with_capacity(m * n);
    for (row, &g) in weights.data().chunks_exact(n).zip(grad_out) {
        for (gi, w) in grad_input.iter_mut().zip(row) {
            *gi += g * w;
        }
        grad_w.extend(input.iter().map(|x| g * x));
    }
    Ok(LinearGrads {
        input: grad_input,
        weights: TensorND::new(vec![m, n], grad_w)?,
        bias: grad_out.to_vec(),
    })
}

fn matrix_dims(weights: &TensorND) -> Result<(usize, usize)> {
    match weights.shape() {
        &[m, n] => Ok((m, n)),
        other => Err(shape_err!("linear weights must be 2-d, got {other:?}")),
    }
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Subgradient 0 at `x == 0`.
pub fn relu_backward(x: f64, grad: f64) -> f64 {
    if x > 0.0 {
        grad
    } else {
        0.0
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Backward through a sigmoid given its output `y`.
pub fn sigmoid_backward(y: f64, grad: f64) -> f64 {
    grad * y * (1.0 - y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_abs_diff_eq!(sigmoid(3f64.ln()), 0.75, epsilon = 1e-15);
        assert!(sigmoid(-800.0).is_finite() && sigmoid(800.0) == 1.0);
    }

    #[test]
    fn identity_linear() {
        let w = TensorND::new(vec![3, 3], vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap();
        let x = [0.5, -2.0, 7.0];
        assert_eq!(linear(&x, &w, &[0.0; 3]).unwrap(), x.to_vec());
        assert!(linear(&x[..2], &w, &[0.0; 3]).is_err());
    }

    #[test]
    fn relu_subgradient_at_zero() {
        assert_eq!(relu_backward(0.0, 1.0), 0.0);
        assert_eq!(relu_backward(1e-12, 1.0), 1.0);
    }
}
