//! The refinement network: an MLP over the concatenated pair (input field,
//! current estimate), with hand-rolled reverse-mode differentiation.
//!
//! The canonical architecture is two tanh hidden layers and an identity
//! output layer, but parameter stacks are generic over layer count and
//! activation so tests can hand-build exact linear operators.

use crate::field::{Field, FieldError, Grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("layer {layer}: expected input of length {expected}, got {got}")]
    Shape {
        layer: usize,
        expected: usize,
        got: usize,
    },
    #[error("network input dimension {expected} does not match fields of length {got}")]
    InputDim { expected: usize, got: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("parameter file is not a supported format: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the post-activation value.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }
}

/// One dense layer, `out = act(W.in + b)` with a row-major weight matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    fn forward(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for r in 0..self.rows {
            let row = &self.weight[r * self.cols..(r + 1) * self.cols];
            let z: f64 = row.iter().zip(input.iter()).map(|(w, x)| w * x).sum::<f64>()
                + self.bias[r];
            out.push(self.activation.apply(z));
        }
    }
}

/// Parameters of the refinement network over fields of length `n`.
/// The input dimension is `2n` (input field concatenated with the estimate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    n: usize,
    layers: Vec<Layer>,
}

/// Version tag for the on-disk parameter document.
const PARAMS_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ParamsDocument {
    format_version: u32,
    params: MlpParams,
}

impl MlpParams {
    /// Canonical two-hidden-layer stack with Xavier-uniform weights
    /// (`U(+-gain*sqrt(6/(fan_in+fan_out)))`) and zero biases.
    /// Deterministic given the seed; draws are row-major, layer by layer.
    pub fn xavier_init(seed: u64, hidden_dim: usize, n: usize, gain: f64) -> Self {
        assert!(hidden_dim >= 1, "hidden_dim must be positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = [2 * n, hidden_dim, hidden_dim, n];
        let acts = [Activation::Tanh, Activation::Tanh, Activation::Identity];
        let layers = (0..3)
            .map(|l| {
                let (fan_in, fan_out) = (dims[l], dims[l + 1]);
                let bound = gain * (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weight = (0..fan_in * fan_out)
                    .map(|_| {
                        if bound == 0.0 {
                            0.0
                        } else {
                            rng.gen_range(-bound..bound)
                        }
                    })
                    .collect();
                Layer {
                    rows: fan_out,
                    cols: fan_in,
                    weight,
                    bias: vec![0.0; fan_out],
                    activation: acts[l],
                }
            })
            .collect();
        MlpParams { n, layers }
    }

    /// Single affine layer `phi(x, h) = Wx.x + Wh.h + b` with identity
    /// activation. `wx`/`wh` are n-by-n row-major; `None` means zero block.
    pub fn single_affine(
        grid: Grid,
        wx: Option<&[f64]>,
        wh: Option<&[f64]>,
        bias: &[f64],
    ) -> Self {
        let n = grid.n();
        assert_eq!(bias.len(), n);
        let mut weight = vec![0.0; n * 2 * n];
        for r in 0..n {
            if let Some(wx) = wx {
                assert_eq!(wx.len(), n * n);
                weight[r * 2 * n..r * 2 * n + n].copy_from_slice(&wx[r * n..(r + 1) * n]);
            }
            if let Some(wh) = wh {
                assert_eq!(wh.len(), n * n);
                weight[r * 2 * n + n..(r + 1) * 2 * n].copy_from_slice(&wh[r * n..(r + 1) * n]);
            }
        }
        MlpParams {
            n,
            layers: vec![Layer {
                rows: n,
                cols: 2 * n,
                weight,
                bias: bias.to_vec(),
                activation: Activation::Identity,
            }],
        }
    }

    /// Exact residual operator `phi(x, h) = A.(y - h) + b` toward a fixed
    /// target; the linear oracle used throughout the convergence checks.
    pub fn linear_residual(a: &[f64], y: &Field, bias: &Field) -> Self {
        let n = y.n();
        assert_eq!(a.len(), n * n);
        // Wh = -A, bias row r = (A.y)_r + b_r.
        let wh: Vec<f64> = a.iter().map(|v| -v).collect();
        let mut b = vec![0.0; n];
        for r in 0..n {
            let row = &a[r * n..(r + 1) * n];
            b[r] = row
                .iter()
                .zip(y.values().iter())
                .map(|(m, v)| m * v)
                .sum::<f64>()
                + bias.values()[r];
        }
        MlpParams::single_affine(y.grid(), None, Some(&wh), &b)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn input_dim(&self) -> usize {
        2 * self.n
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    fn check_fields(&self, x: &Field, h: &Field) -> Result<(), NetError> {
        if x.n() != self.n || h.n() != self.n {
            return Err(NetError::InputDim {
                expected: self.n,
                got: if x.n() != self.n { x.n() } else { h.n() },
            });
        }
        if x.grid() != h.grid() {
            return Err(NetError::Field(FieldError::GridMismatch(x.n(), h.n())));
        }
        Ok(())
    }

    /// Forward evaluation recording the tape for a later backward pass.
    pub fn forward(&self, x: &Field, h: &Field) -> Result<(Field, Tape), NetError> {
        self.check_fields(x, h)?;
        let mut input = Vec::with_capacity(2 * self.n);
        input.extend_from_slice(x.values());
        input.extend_from_slice(h.values());

        let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for (li, layer) in self.layers.iter().enumerate() {
            let cur: &[f64] = match li {
                0 => &input,
                _ => &outputs[li - 1],
            };
            if cur.len() != layer.cols {
                return Err(NetError::Shape {
                    layer: li,
                    expected: layer.cols,
                    got: cur.len(),
                });
            }
            let mut out = Vec::with_capacity(layer.rows);
            layer.forward(cur, &mut out);
            outputs.push(out);
        }
        let out_field = Field::from_raw(
            x.grid(),
            outputs.last().expect("at least one layer").clone(),
        );
        Ok((
            out_field,
            Tape {
                grid: x.grid(),
                input,
                outputs,
            },
        ))
    }

    /// Forward evaluation when no gradients are needed.
    pub fn eval(&self, x: &Field, h: &Field) -> Result<Field, NetError> {
        Ok(self.forward(x, h)?.0)
    }

    /// Reverse pass for `<out, out_grad>`: gradients with respect to every
    /// parameter and to both input fields. Never mutates `self`.
    pub fn backward(&self, tape: &Tape, out_grad: &Field) -> (GradAccumulator, Field, Field) {
        let mut grads = GradAccumulator::zeros_like(self);
        let (x_grad, h_grad) = self.backward_into(tape, out_grad, &mut grads);
        (grads, x_grad, h_grad)
    }

    /// Reverse pass accumulating parameter gradients into an existing buffer
    /// (sums on top of whatever is there); the hot path for unrolled training.
    pub fn backward_into(
        &self,
        tape: &Tape,
        out_grad: &Field,
        grads: &mut GradAccumulator,
    ) -> (Field, Field) {
        let input_grad = self.backward_impl(tape, out_grad.values(), Some(grads));
        let x_grad = Field::from_raw(tape.grid, input_grad[..self.n].to_vec());
        let h_grad = Field::from_raw(tape.grid, input_grad[self.n..].to_vec());
        (x_grad, h_grad)
    }

    /// Vector-Jacobian product `v^T . D_h phi(x, h)`, identical arithmetic to
    /// the `h` gradient of [`MlpParams::backward`].
    pub fn vjp(&self, x: &Field, h: &Field, v: &Field) -> Result<Field, NetError> {
        let (_, tape) = self.forward(x, h)?;
        Ok(self.vjp_on_tape(&tape, v))
    }

    /// VJP reusing an existing tape; lets Jacobian assembly run one forward
    /// pass and n backward passes.
    pub fn vjp_on_tape(&self, tape: &Tape, v: &Field) -> Field {
        let input_grad = self.backward_impl(tape, v.values(), None);
        Field::from_raw(tape.grid, input_grad[self.n..].to_vec())
    }

    /// Shared reverse sweep. Returns the gradient with respect to the
    /// concatenated input; parameter gradients accumulate into `acc` when given.
    fn backward_impl(
        &self,
        tape: &Tape,
        out_grad: &[f64],
        mut acc: Option<&mut GradAccumulator>,
    ) -> Vec<f64> {
        debug_assert_eq!(tape.outputs.len(), self.layers.len());
        let mut g: Vec<f64> = out_grad.to_vec();
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let layer_in: &[f64] = if li == 0 {
                &tape.input
            } else {
                &tape.outputs[li - 1]
            };
            let layer_out = &tape.outputs[li];

            // Gradient through the activation.
            let mut g_pre = g;
            for (gp, a) in g_pre.iter_mut().zip(layer_out.iter()) {
                *gp *= layer.activation.derivative_from_output(*a);
            }

            if let Some(acc) = acc.as_deref_mut() {
                let lg = &mut acc.layers[li];
                for r in 0..layer.rows {
                    let gr = g_pre[r];
                    lg.bias[r] += gr;
                    let wrow = &mut lg.weight[r * layer.cols..(r + 1) * layer.cols];
                    for (w, x) in wrow.iter_mut().zip(layer_in.iter()) {
                        *w += gr * x;
                    }
                }
            }

            // Input gradient: W^T . g_pre, accumulated row by row.
            let mut g_in = vec![0.0; layer.cols];
            for r in 0..layer.rows {
                let gr = g_pre[r];
                let wrow = &layer.weight[r * layer.cols..(r + 1) * layer.cols];
                for (gi, w) in g_in.iter_mut().zip(wrow.iter()) {
                    *gi += gr * w;
                }
            }
            g = g_in;
        }
        g
    }

    /// Versioned JSON document; load round-trips bit-exactly.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&ParamsDocument {
            format_version: PARAMS_FORMAT_VERSION,
            params: self.clone(),
        })
        .expect("params serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, NetError> {
        let doc: ParamsDocument =
            serde_json::from_str(text).map_err(|e| NetError::Format(e.to_string()))?;
        if doc.format_version != PARAMS_FORMAT_VERSION {
            return Err(NetError::Format(format!(
                "unsupported format_version {}",
                doc.format_version
            )));
        }
        Ok(doc.params)
    }
}

/// Primal intermediates of one forward evaluation: the concatenated input and
/// every layer's post-activation output.
#[derive(Debug, Clone)]
pub struct Tape {
    grid: Grid,
    input: Vec<f64>,
    outputs: Vec<Vec<f64>>,
}

/// Running sums of parameter gradients, shape-congruent with [`MlpParams`].
#[derive(Debug, Clone)]
pub struct GradAccumulator {
    pub layers: Vec<LayerGrad>,
}

#[derive(Debug, Clone)]
pub struct LayerGrad {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl GradAccumulator {
    pub fn zero(&mut self) {
        for l in self.layers.iter_mut() {
            l.weight.fill(0.0);
            l.bias.fill(0.0);
        }
    }

    pub fn zeros_like(params: &MlpParams) -> Self {
        GradAccumulator {
            layers: params
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weight: vec![0.0; l.weight.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &GradAccumulator) {
        debug_assert_eq!(self.layers.len(), other.layers.len());
        for (a, b) in self.layers.iter_mut().zip(other.layers.iter()) {
            for (x, y) in a.weight.iter_mut().zip(b.weight.iter()) {
                *x += y;
            }
            for (x, y) in a.bias.iter_mut().zip(b.bias.iter()) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for l in self.layers.iter_mut() {
            for v in l.weight.iter_mut().chain(l.bias.iter_mut()) {
                *v *= s;
            }
        }
    }

    /// Global L2 norm over every entry (plain sum of squares).
    pub fn global_norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| {
                l.weight
                    .iter()
                    .chain(l.bias.iter())
                    .map(|v| v * v)
                    .sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    fn wobble(g: Grid, salt: u64) -> Field {
        Field::from_fn(g, |i| ((i as f64 + 1.3) * (salt as f64 * 0.61 + 0.47)).sin()).unwrap()
    }

    #[test]
    fn init_zero_gain_is_zero_operator() {
        let g = grid(8);
        let params = MlpParams::xavier_init(1, 4, 8, 0.0);
        let out = params.eval(&wobble(g, 1), &wobble(g, 2)).unwrap();
        assert_eq!(out.l2_norm(), 0.0);
    }

    #[test]
    fn init_deterministic_and_bounded() {
        let a = MlpParams::xavier_init(42, 256, 128, 0.1);
        let b = MlpParams::xavier_init(42, 256, 128, 0.1);
        assert_eq!(a, b);
        // Middle layer has fan_in = fan_out = 256; Xavier bound 0.1*sqrt(6/512).
        let bound = 0.1 * (6.0f64 / 512.0).sqrt();
        assert!((bound - 0.01082531754730548).abs() < 1e-15);
        for w in &a.layers()[1].weight {
            assert!(w.abs() < bound);
        }
        for l in a.layers() {
            assert!(l.bias.iter().all(|b| *b == 0.0));
        }
    }

    #[test]
    fn forward_is_pure_and_rejects_mismatch() {
        let g = grid(8);
        let params = MlpParams::xavier_init(7, 16, 8, 0.1);
        let x = wobble(g, 3);
        let h = wobble(g, 4);
        let o1 = params.eval(&x, &h).unwrap();
        let o2 = params.eval(&x, &h).unwrap();
        assert_eq!(o1.values(), o2.values());

        let other = Field::zeros(grid(16));
        assert!(params.eval(&x, &other).is_err());
    }

    #[test]
    fn hand_built_residual_layer_is_exact() {
        let g = grid(8);
        let y = wobble(g, 5);
        let h = wobble(g, 6);
        // Identity A, zero bias: phi(x, h) = y - h exactly.
        let mut eye = vec![0.0; 64];
        for i in 0..8 {
            eye[i * 8 + i] = 1.0;
        }
        let params = MlpParams::linear_residual(&eye, &y, &Field::zeros(g));
        let out = params.eval(&Field::zeros(g), &h).unwrap();
        for ((o, yv), hv) in out.values().iter().zip(y.values()).zip(h.values()) {
            assert_eq!(*o, yv - hv);
        }
    }

    #[test]
    fn backward_zero_out_grad() {
        let g = grid(8);
        let params = MlpParams::xavier_init(3, 16, 8, 0.1);
        let (_, tape) = params.forward(&wobble(g, 1), &wobble(g, 2)).unwrap();
        let (grads, xg, hg) = params.backward(&tape, &Field::zeros(g));
        assert_eq!(grads.global_norm(), 0.0);
        assert_eq!(xg.l2_norm(), 0.0);
        assert_eq!(hg.l2_norm(), 0.0);
    }

    #[test]
    fn negation_layer_h_grad_is_negated_out_grad() {
        let g = grid(8);
        let mut neg_eye = vec![0.0; 64];
        for i in 0..8 {
            neg_eye[i * 8 + i] = -1.0;
        }
        let params = MlpParams::single_affine(g, None, Some(&neg_eye), &vec![0.0; 8]);
        let x = wobble(g, 1);
        let h = wobble(g, 2);
        let (_, tape) = params.forward(&x, &h).unwrap();
        let og = wobble(g, 3);
        let (_, _, hg) = params.backward(&tape, &og);
        for (a, b) in hg.values().iter().zip(og.values().iter()) {
            assert_eq!(*a, -b);
        }
    }

    /// Scalar loss `<phi(x,h), og>` used by the finite-difference oracle.
    fn loss_of(params: &MlpParams, x: &Field, h: &Field, og: &Field) -> f64 {
        let out = params.eval(x, h).unwrap();
        out.values()
            .iter()
            .zip(og.values().iter())
            .map(|(a, b)| a * b)
            .sum()
    }

    fn assert_close(ad: f64, fd: f64, tol: f64) {
        let denom = ad.abs().max(fd.abs());
        assert!(
            (ad - fd).abs() <= tol * denom + 1e-8,
            "ad {ad} vs fd {fd}"
        );
    }

    #[test]
    fn gradient_check_against_central_differences() {
        let g = grid(8);
        let step = 1e-5;
        for draw in 0..20u64 {
            let mut params = MlpParams::xavier_init(100 + draw, 16, 8, 0.5);
            let x = wobble(g, draw * 3 + 1);
            let h = wobble(g, draw * 3 + 2);
            let og = wobble(g, draw * 3 + 7);
            let (_, tape) = params.forward(&x, &h).unwrap();
            let (grads, xg, hg) = params.backward(&tape, &og);

            // Every parameter entry.
            for li in 0..params.layers().len() {
                let wlen = params.layers()[li].weight.len();
                for idx in (0..wlen).step_by(17) {
                    let orig = params.layers()[li].weight[idx];
                    params.layers_mut()[li].weight[idx] = orig + step;
                    let up = loss_of(&params, &x, &h, &og);
                    params.layers_mut()[li].weight[idx] = orig - step;
                    let down = loss_of(&params, &x, &h, &og);
                    params.layers_mut()[li].weight[idx] = orig;
                    assert_close(grads.layers[li].weight[idx], (up - down) / (2.0 * step), 1e-4);
                }
                for idx in 0..params.layers()[li].bias.len() {
                    let orig = params.layers()[li].bias[idx];
                    params.layers_mut()[li].bias[idx] = orig + step;
                    let up = loss_of(&params, &x, &h, &og);
                    params.layers_mut()[li].bias[idx] = orig - step;
                    let down = loss_of(&params, &x, &h, &og);
                    params.layers_mut()[li].bias[idx] = orig;
                    assert_close(grads.layers[li].bias[idx], (up - down) / (2.0 * step), 1e-4);
                }
            }

            // Input gradients.
            for i in 0..8 {
                let bump = |f: &Field, j: usize, s: f64| {
                    let mut v = f.values().to_vec();
                    v[j] += s;
                    Field::new(g, v).unwrap()
                };
                let fd_x = (loss_of(&params, &bump(&x, i, step), &h, &og)
                    - loss_of(&params, &bump(&x, i, -step), &h, &og))
                    / (2.0 * step);
                assert_close(xg.values()[i], fd_x, 1e-4);
                let fd_h = (loss_of(&params, &x, &bump(&h, i, step), &og)
                    - loss_of(&params, &x, &bump(&h, i, -step), &og))
                    / (2.0 * step);
                assert_close(hg.values()[i], fd_h, 1e-4);
            }
        }
    }

    #[test]
    fn vjp_matches_backward_and_dense_oracle() {
        let g = grid(8);
        // phi(x, h) = M.h for a fixed dense M: vjp(v) must equal M^T v.
        let m: Vec<f64> = (0..64).map(|i| ((i * 13 + 5) % 11) as f64 * 0.1 - 0.5).collect();
        let params = MlpParams::single_affine(g, None, Some(&m), &vec![0.0; 8]);
        let x = wobble(g, 1);
        let h = wobble(g, 2);
        let v = wobble(g, 3);

        assert_eq!(params.vjp(&x, &h, &Field::zeros(g)).unwrap().l2_norm(), 0.0);

        let got = params.vjp(&x, &h, &v).unwrap();
        for j in 0..8 {
            let expect: f64 = (0..8).map(|r| m[r * 8 + j] * v.values()[r]).sum();
            assert!((got.values()[j] - expect).abs() < 1e-13);
        }

        // Same computation through the full backward pass: bit-identical.
        let nonlinear = MlpParams::xavier_init(9, 16, 8, 0.5);
        let (_, tape) = nonlinear.forward(&x, &h).unwrap();
        let (_, _, hg) = nonlinear.backward(&tape, &v);
        let vj = nonlinear.vjp(&x, &h, &v).unwrap();
        for (a, b) in vj.values().iter().zip(hg.values().iter()) {
            assert!((a - b).abs() <= 1e-14);
        }
    }

    #[test]
    fn directional_derivative_matches_vjp_reconstruction() {
        let g = grid(8);
        let params = MlpParams::xavier_init(21, 16, 8, 0.5);
        let x = wobble(g, 11);
        let h = wobble(g, 12);
        let v = wobble(g, 13);
        let t = 1e-5;

        let hp = h.add_scaled(t, &v).unwrap();
        let hm = h.add_scaled(-t, &v).unwrap();
        let fd = params
            .eval(&x, &hp)
            .unwrap()
            .sub(&params.eval(&x, &hm).unwrap())
            .unwrap()
            .scale(1.0 / (2.0 * t));

        // Row i of D_h phi is vjp with the i-th basis vector; (Jv)_i = row_i . v.
        let (_, tape) = params.forward(&x, &h).unwrap();
        for i in 0..8 {
            let e = Field::from_fn(g, |j| if j == i { 1.0 } else { 0.0 }).unwrap();
            let row = params.vjp_on_tape(&tape, &e);
            let jv: f64 = row
                .values()
                .iter()
                .zip(v.values().iter())
                .map(|(a, b)| a * b)
                .sum();
            assert_close(jv, fd.values()[i], 1e-4);
        }
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let params = MlpParams::xavier_init(5, 8, 8, 0.1);
        let text = params.to_json();
        let back = MlpParams::from_json(&text).unwrap();
        assert_eq!(params, back);
        for (a, b) in params.layers().iter().zip(back.layers().iter()) {
            for (x, y) in a.weight.iter().zip(b.weight.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        assert!(MlpParams::from_json("{\"format_version\":99}").is_err());
    }
}
