//! Dense vectors/matrices and a small scalar-output feed-forward network
//! with hand-rolled reverse-mode gradients.
//!
//! The network is an MLP with leaky-ReLU hidden activations and a linear
//! scalar output. An empty hidden list degenerates to a linear model. The
//! final layer's bias is optional and off by default; reward models always
//! run without it so a constant offset cannot be learned.

mod io;
mod opt;

pub use io::{read_checkpoint, write_checkpoint};
pub use opt::{OptAlgo, OptState};

use crate::error::{Error, Result};
use crate::rng;
use rand::Rng;

pub type Vec64 = Vec<f64>;

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat64 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat64 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat64 {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        if r == 0 {
            return Err(Error::invalid("matrix needs at least one row"));
        }
        let c = rows[0].len();
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::invalid("ragged rows in matrix"));
            }
            data.extend_from_slice(row);
        }
        Ok(Mat64 { rows: r, cols: c, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// Architecture of a scalar-output feed-forward network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetSpec {
    pub input_dim: usize,
    /// Hidden layer widths; empty means a linear model.
    pub hidden: Vec<usize>,
    /// Negative slope of the leaky-ReLU hidden activation.
    pub slope: f64,
    /// Whether the output layer carries a bias.
    pub final_bias: bool,
}

pub const DEFAULT_SLOPE: f64 = 0.01;

impl NetSpec {
    pub fn new(input_dim: usize, hidden: Vec<usize>, slope: f64, final_bias: bool) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::invalid("input_dim must be >= 1"));
        }
        if hidden.iter().any(|&w| w == 0) {
            return Err(Error::invalid("hidden widths must be >= 1"));
        }
        if !(slope > 0.0 && slope < 1.0) {
            return Err(Error::invalid("activation slope must lie in (0, 1)"));
        }
        Ok(NetSpec {
            input_dim,
            hidden,
            slope,
            final_bias,
        })
    }

    /// Linear model without bias.
    pub fn linear(input_dim: usize) -> Self {
        NetSpec::new(input_dim, vec![], DEFAULT_SLOPE, false).unwrap()
    }

    /// MLP with the given hidden widths, default slope, no final bias.
    pub fn mlp(input_dim: usize, hidden: &[usize]) -> Self {
        NetSpec::new(input_dim, hidden.to_vec(), DEFAULT_SLOPE, false).unwrap()
    }

    /// Layer widths including input and the scalar output.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.input_dim);
        w.extend_from_slice(&self.hidden);
        w.push(1);
        w
    }

    pub fn n_layers(&self) -> usize {
        self.hidden.len() + 1
    }

    /// Number of bias vectors: every hidden layer has one, the output layer
    /// only when `final_bias` is set.
    pub fn n_biases(&self) -> usize {
        self.hidden.len() + usize::from(self.final_bias)
    }

    pub fn n_params(&self) -> usize {
        let w = self.widths();
        let mut n = 0;
        for l in 0..self.n_layers() {
            n += w[l + 1] * w[l];
            if l < self.hidden.len() || self.final_bias {
                n += w[l + 1];
            }
        }
        n
    }
}

/// Parameters (or a same-shaped gradient container) for a [`NetSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    pub weights: Vec<Mat64>,
    pub biases: Vec<Vec64>,
}

impl NetParams {
    /// All-zero parameters shaped for `spec`.
    pub fn zeros(spec: &NetSpec) -> Self {
        let w = spec.widths();
        let weights = (0..spec.n_layers())
            .map(|l| Mat64::zeros(w[l + 1], w[l]))
            .collect();
        let biases = (0..spec.n_biases()).map(|l| vec![0.0; w[l + 1]]).collect();
        NetParams { weights, biases }
    }

    /// Seeded initialization, uniform in `[-1/sqrt(fan_in), +1/sqrt(fan_in)]`
    /// per layer for both weights and biases.
    pub fn init(spec: &NetSpec, seed: u64) -> Self {
        let mut params = NetParams::zeros(spec);
        let widths = spec.widths();
        for l in 0..spec.n_layers() {
            let bound = 1.0 / (widths[l] as f64).sqrt();
            let mut rng = rng::stream(seed, &[0x97a1, l as u64]);
            for v in params.weights[l].data_mut() {
                *v = rng.random_range(-bound..bound);
            }
            if l < params.biases.len() {
                for v in &mut params.biases[l] {
                    *v = rng.random_range(-bound..bound);
                }
            }
        }
        params
    }

    pub fn check_shapes(&self, spec: &NetSpec) -> Result<()> {
        let w = spec.widths();
        if self.weights.len() != spec.n_layers() || self.biases.len() != spec.n_biases() {
            return Err(Error::invalid("parameter layer count does not match spec"));
        }
        for l in 0..self.weights.len() {
            if self.weights[l].rows() != w[l + 1] || self.weights[l].cols() != w[l] {
                return Err(Error::invalid(format!("weight {l} has wrong shape")));
            }
        }
        for (l, b) in self.biases.iter().enumerate() {
            if b.len() != w[l + 1] {
                return Err(Error::invalid(format!("bias {l} has wrong length")));
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|m| m.data().iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Rejects non-finite entries; model parameters go through this at
    /// construction and load time.
    pub fn validate_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid("non-finite parameter entry"))
        }
    }

    /// Flattens all tensors into one vector (weights then bias per layer).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in 0..self.weights.len() {
            out.extend_from_slice(self.weights[l].data());
            if l < self.biases.len() {
                out.extend_from_slice(&self.biases[l]);
            }
        }
        out
    }

    /// Inverse of [`flatten`](Self::flatten) for a matching spec.
    pub fn unflatten(spec: &NetSpec, flat: &[f64]) -> Result<Self> {
        if flat.len() != spec.n_params() {
            return Err(Error::invalid(format!(
                "flat parameter vector has length {}, spec needs {}",
                flat.len(),
                spec.n_params()
            )));
        }
        let mut params = NetParams::zeros(spec);
        let mut k = 0;
        for l in 0..params.weights.len() {
            let n = params.weights[l].data().len();
            params.weights[l].data_mut().copy_from_slice(&flat[k..k + n]);
            k += n;
            if l < params.biases.len() {
                let m = params.biases[l].len();
                params.biases[l].copy_from_slice(&flat[k..k + m]);
                k += m;
            }
        }
        Ok(params)
    }

    fn for_each_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        for m in &mut self.weights {
            for v in m.data_mut() {
                f(v);
            }
        }
        for b in &mut self.biases {
            for v in b {
                f(v);
            }
        }
    }

    /// `self += coeff * other`, shapes must agree.
    pub fn add_scaled(&mut self, other: &NetParams, coeff: f64) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += coeff * y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += coeff * y;
            }
        }
    }

    pub fn scale(&mut self, coeff: f64) {
        self.for_each_mut(|v| *v *= coeff);
    }
}

/// Scratch buffers reused across forward/backward calls.
#[derive(Debug, Default, Clone)]
pub struct NetWorkspace {
    /// Activations per layer boundary; `acts[0]` is the input.
    acts: Vec<Vec<f64>>,
    /// Pre-activations per layer.
    zs: Vec<Vec<f64>>,
    /// Backprop deltas per layer.
    deltas: Vec<Vec<f64>>,
}

impl NetWorkspace {
    fn prepare(&mut self, spec: &NetSpec) {
        let widths = spec.widths();
        self.acts.resize(widths.len(), Vec::new());
        self.zs.resize(spec.n_layers(), Vec::new());
        self.deltas.resize(spec.n_layers(), Vec::new());
        for (i, &w) in widths.iter().enumerate() {
            self.acts[i].resize(w, 0.0);
        }
        for l in 0..spec.n_layers() {
            self.zs[l].resize(widths[l + 1], 0.0);
            self.deltas[l].resize(widths[l + 1], 0.0);
        }
    }
}

#[inline]
fn lrelu(z: f64, slope: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        slope * z
    }
}

#[inline]
fn lrelu_deriv(z: f64, slope: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        slope
    }
}

fn check_input(spec: &NetSpec, params: &NetParams, x: &[f64]) -> Result<()> {
    if x.len() != spec.input_dim {
        return Err(Error::invalid(format!(
            "input has length {}, spec expects {}",
            x.len(),
            spec.input_dim
        )));
    }
    params.check_shapes(spec)
}

/// Network output for input `x`.
pub fn forward(spec: &NetSpec, params: &NetParams, x: &[f64]) -> Result<f64> {
    let mut ws = NetWorkspace::default();
    forward_ws(spec, params, x, &mut ws)
}

/// Like [`forward`] but reuses caller-owned scratch buffers.
pub fn forward_ws(
    spec: &NetSpec,
    params: &NetParams,
    x: &[f64],
    ws: &mut NetWorkspace,
) -> Result<f64> {
    check_input(spec, params, x)?;
    Ok(forward_unchecked(spec, params, x, ws))
}

/// Forward pass without shape validation; callers must have validated once.
pub fn forward_unchecked(
    spec: &NetSpec,
    params: &NetParams,
    x: &[f64],
    ws: &mut NetWorkspace,
) -> f64 {
    ws.prepare(spec);
    ws.acts[0].copy_from_slice(x);
    let n_layers = spec.n_layers();
    for l in 0..n_layers {
        let w = &params.weights[l];
        let bias = params.biases.get(l);
        let (inputs, rest) = ws.acts.split_at_mut(l + 1);
        let input = &inputs[l];
        let out = &mut rest[0];
        let z = &mut ws.zs[l];
        for r in 0..w.rows() {
            let mut v = dot(w.row(r), input);
            if let Some(b) = bias {
                v += b[r];
            }
            z[r] = v;
            out[r] = if l + 1 < n_layers { lrelu(v, spec.slope) } else { v };
        }
    }
    ws.acts[n_layers][0]
}

/// Gradient of the scalar output with respect to every parameter.
pub fn grad(spec: &NetSpec, params: &NetParams, x: &[f64]) -> Result<NetParams> {
    let mut grads = NetParams::zeros(spec);
    let mut ws = NetWorkspace::default();
    check_input(spec, params, x)?;
    accumulate_grad_unchecked(spec, params, x, 1.0, &mut grads, &mut ws);
    Ok(grads)
}

/// Runs one forward/backward pass and adds `coeff * d(output)/d(params)`
/// into `grads`. Shape validation is the caller's responsibility. Returns
/// the forward output.
pub fn accumulate_grad_unchecked(
    spec: &NetSpec,
    params: &NetParams,
    x: &[f64],
    coeff: f64,
    grads: &mut NetParams,
    ws: &mut NetWorkspace,
) -> f64 {
    let out = forward_unchecked(spec, params, x, ws);
    let n_layers = spec.n_layers();

    // Output layer delta is exactly 1 (linear scalar output).
    ws.deltas[n_layers - 1][0] = 1.0;

    for l in (0..n_layers).rev() {
        // dW_l[r][c] += coeff * delta_l[r] * a_l[c]; db_l[r] += coeff * delta_l[r]
        let a = &ws.acts[l];
        for r in 0..params.weights[l].rows() {
            let d = ws.deltas[l][r] * coeff;
            if d != 0.0 {
                let grow = grads.weights[l].row_mut(r);
                for (g, &av) in grow.iter_mut().zip(a.iter()) {
                    *g += d * av;
                }
            }
            if l < grads.biases.len() {
                grads.biases[l][r] += d;
            }
        }
        if l > 0 {
            // delta_{l-1} = (W_l^T delta_l) .* lrelu'(z_{l-1})
            let (lower, upper) = ws.deltas.split_at_mut(l);
            let delta_l = &upper[0];
            let delta_prev = &mut lower[l - 1];
            let w = &params.weights[l];
            for c in 0..w.cols() {
                let mut s = 0.0;
                for r in 0..w.rows() {
                    s += w.row(r)[c] * delta_l[r];
                }
                delta_prev[c] = s * lrelu_deriv(ws.zs[l - 1][c], spec.slope);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_params(w: &[f64]) -> NetParams {
        NetParams {
            weights: vec![Mat64::from_rows(&[w.to_vec()]).unwrap()],
            biases: vec![],
        }
    }

    #[test]
    fn linear_forward_is_dot_product() {
        let spec = NetSpec::linear(2);
        let params = linear_params(&[1.0, 2.0]);
        assert_eq!(forward(&spec, &params, &[3.0, 4.0]).unwrap(), 11.0);
    }

    #[test]
    fn zero_params_give_zero_output() {
        for spec in [NetSpec::linear(3), NetSpec::mlp(3, &[4, 2])] {
            let params = NetParams::zeros(&spec);
            assert_eq!(forward(&spec, &params, &[1.0, -2.0, 0.5]).unwrap(), 0.0);
        }
    }

    #[test]
    fn one_hidden_layer_matches_hand_evaluation() {
        // Width-2 hidden layer, slope 0.01, all parameters set by hand.
        let spec = NetSpec::new(2, vec![2], 0.01, false).unwrap();
        let params = NetParams {
            weights: vec![
                Mat64::from_rows(&[vec![0.5, -1.0], vec![2.0, 0.25]]).unwrap(),
                Mat64::from_rows(&[vec![1.5, -0.5]]).unwrap(),
            ],
            biases: vec![vec![0.1, -0.2]],
        };
        let x = [1.0, 2.0];

        // Independent step-by-step evaluation of the two layers.
        let z0 = 0.5 * 1.0 + (-1.0) * 2.0 + 0.1; // -1.4 -> negative branch
        let z1 = 2.0 * 1.0 + 0.25 * 2.0 + (-0.2); // 2.3 -> positive branch
        let a0 = 0.01 * z0;
        let a1 = z1;
        let expected = 1.5 * a0 + (-0.5) * a1;

        let got = forward(&spec, &params, &x).unwrap();
        assert!((got - expected).abs() < 1e-15, "{got} vs {expected}");
    }

    #[test]
    fn wrong_input_dim_is_rejected() {
        let spec = NetSpec::linear(2);
        let params = linear_params(&[1.0, 2.0]);
        assert!(forward(&spec, &params, &[1.0]).is_err());
        assert!(grad(&spec, &params, &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn linear_gradient_is_the_input() {
        let spec = NetSpec::linear(2);
        let params = linear_params(&[5.0, -7.0]);
        let g = grad(&spec, &params, &[3.0, 4.0]).unwrap();
        assert_eq!(g.weights[0].data(), &[3.0, 4.0]);
    }

    #[test]
    fn zero_input_linear_gives_zero_gradient() {
        let spec = NetSpec::linear(3);
        let params = linear_params(&[1.0, 2.0, 3.0]);
        let g = grad(&spec, &params, &[0.0, 0.0, 0.0]).unwrap();
        assert!(g.weights[0].data().iter().all(|&v| v == 0.0));
    }

    fn rel_err(a: f64, n: f64) -> f64 {
        (a - n).abs() / a.abs().max(n.abs()).max(1e-5)
    }

    /// Central finite differences against the analytic gradient. Draws are
    /// rejected when any pre-activation sits on the kink.
    #[test]
    fn gradient_matches_finite_differences() {
        let mut max_err: f64 = 0.0;
        let mut checked = 0;
        let mut draw = 0u64;
        while checked < 100 {
            draw += 1;
            let mut rng = rng::stream(1234, &[draw]);
            let input_dim = rng.random_range(1..5usize);
            let n_hidden = rng.random_range(0..3usize);
            let hidden: Vec<usize> = (0..n_hidden).map(|_| rng.random_range(1..6)).collect();
            let final_bias = rng.random::<f64>() < 0.5;
            let spec = NetSpec::new(input_dim, hidden, 0.01, final_bias).unwrap();
            let mut params = NetParams::init(&spec, 9000 + draw);
            let x: Vec<f64> = (0..input_dim).map(|_| rng.random_range(-2.0..2.0)).collect();

            // Skip configurations with a pre-activation at (or numerically
            // near) zero, where the subgradient is not unique.
            let mut ws = NetWorkspace::default();
            forward_ws(&spec, &params, &x, &mut ws).unwrap();
            if ws.zs.iter().any(|z| z.iter().any(|v| v.abs() < 1e-3)) {
                continue;
            }

            let analytic = grad(&spec, &params, &x).unwrap();
            let flat_a = analytic.flatten();
            let base = params.flatten();
            let h = 1e-5;
            for (i, &a) in flat_a.iter().enumerate() {
                let mut plus = base.clone();
                plus[i] += h;
                let mut minus = base.clone();
                minus[i] -= h;
                params = NetParams::unflatten(&spec, &plus).unwrap();
                let f_plus = forward(&spec, &params, &x).unwrap();
                params = NetParams::unflatten(&spec, &minus).unwrap();
                let f_minus = forward(&spec, &params, &x).unwrap();
                let numeric = (f_plus - f_minus) / (2.0 * h);
                max_err = max_err.max(rel_err(a, numeric));
            }
            params = NetParams::unflatten(&spec, &base).unwrap();
            let _ = &params;
            checked += 1;
        }
        assert!(max_err < 1e-4, "max relative gradient error {max_err}");
    }

    #[test]
    fn init_is_deterministic_and_seed_sensitive() {
        let spec = NetSpec::mlp(4, &[8, 3]);
        let a = NetParams::init(&spec, 42);
        let b = NetParams::init(&spec, 42);
        let c = NetParams::init(&spec, 43);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn flatten_round_trips() {
        let spec = NetSpec::new(3, vec![4], 0.01, true).unwrap();
        let params = NetParams::init(&spec, 5);
        let flat = params.flatten();
        assert_eq!(flat.len(), spec.n_params());
        let back = NetParams::unflatten(&spec, &flat).unwrap();
        assert_eq!(params, back);
    }
}
