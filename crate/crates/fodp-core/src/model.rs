//! A small fully connected classifier with hand-derived per-example backprop.
//!
//! Architecture: flatten -> dense(h1, tanh) -> dense(h2, tanh) -> dense(c),
//! trained with softmax cross-entropy. The reference configuration uses 64
//! and 32 hidden units; tests exercise tiny shapes. Parameters live in one
//! flat vector so the whole model doubles as a `GradientVector`, and
//! flatten/unflatten round-trips are bit-exact by construction.

use crate::error::{FodpError, Result};
use crate::rng::StreamRng;
use crate::vector::GradientVector;

/// One labeled example: normalized, flattened features plus a class index.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: Vec<f64>,
    pub label: usize,
}

/// Layer sizes of the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpShape {
    pub input: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub classes: usize,
}

impl MlpShape {
    pub fn new(input: usize, hidden1: usize, hidden2: usize, classes: usize) -> Self {
        assert!(input > 0 && hidden1 > 0 && hidden2 > 0 && classes > 0);
        Self {
            input,
            hidden1,
            hidden2,
            classes,
        }
    }

    /// The reference classifier: two hidden layers of 64 and 32 tanh units.
    pub fn classifier(input: usize, classes: usize) -> Self {
        Self::new(input, 64, 32, classes)
    }

    /// Total number of parameters d.
    pub fn param_count(&self) -> usize {
        self.hidden1 * self.input
            + self.hidden1
            + self.hidden2 * self.hidden1
            + self.hidden2
            + self.classes * self.hidden2
            + self.classes
    }

    // Flat layout: w1 (h1 x in, row-major), b1, w2 (h2 x h1), b2,
    // w3 (c x h2), b3.
    fn b1_offset(&self) -> usize {
        self.hidden1 * self.input
    }
    fn w2_offset(&self) -> usize {
        self.b1_offset() + self.hidden1
    }
    fn b2_offset(&self) -> usize {
        self.w2_offset() + self.hidden2 * self.hidden1
    }
    fn w3_offset(&self) -> usize {
        self.b2_offset() + self.hidden2
    }
    fn b3_offset(&self) -> usize {
        self.w3_offset() + self.classes * self.hidden2
    }
}

/// Model parameters as a flat vector plus their shape.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    shape: MlpShape,
    flat: Vec<f64>,
}

/// Cached activations from one forward pass. Reusable across examples to
/// keep the per-example hot path allocation-free.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub hidden1: Vec<f64>,
    pub hidden2: Vec<f64>,
    pub logits: Vec<f64>,
}

impl ForwardPass {
    pub fn new(shape: &MlpShape) -> Self {
        Self {
            hidden1: vec![0.0; shape.hidden1],
            hidden2: vec![0.0; shape.hidden2],
            logits: vec![0.0; shape.classes],
        }
    }
}

/// Reusable workspace for backprop.
#[derive(Debug, Clone)]
pub struct GradScratch {
    pass: ForwardPass,
    d_logits: Vec<f64>,
    d_z2: Vec<f64>,
    d_z1: Vec<f64>,
    /// The most recently computed flat gradient.
    pub grad: Vec<f64>,
}

impl GradScratch {
    pub fn new(shape: &MlpShape) -> Self {
        Self {
            pass: ForwardPass::new(shape),
            d_logits: vec![0.0; shape.classes],
            d_z2: vec![0.0; shape.hidden2],
            d_z1: vec![0.0; shape.hidden1],
            grad: vec![0.0; shape.param_count()],
        }
    }
}

/// Accuracy and mean loss over a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub mean_loss: f64,
}

impl MlpParams {
    pub fn zeros(shape: MlpShape) -> Self {
        Self {
            flat: vec![0.0; shape.param_count()],
            shape,
        }
    }

    /// Uniform(-a, a) initialization per layer with a = sqrt(1 / fan_in),
    /// applied to weights and biases alike, drawn from the init substream in
    /// layout order (w1, b1, w2, b2, w3, b3).
    pub fn init(shape: MlpShape, rng: &mut StreamRng) -> Self {
        let mut params = Self::zeros(shape);
        let bounds = [
            (0, shape.w2_offset(), (1.0 / shape.input as f64).sqrt()),
            (
                shape.w2_offset(),
                shape.w3_offset(),
                (1.0 / shape.hidden1 as f64).sqrt(),
            ),
            (
                shape.w3_offset(),
                shape.param_count(),
                (1.0 / shape.hidden2 as f64).sqrt(),
            ),
        ];
        for (start, end, a) in bounds {
            for value in &mut params.flat[start..end] {
                *value = (2.0 * rng.next_uniform() - 1.0) * a;
            }
        }
        params
    }

    pub fn from_flat(shape: MlpShape, flat: &GradientVector) -> Result<Self> {
        if flat.dim() != shape.param_count() {
            return Err(FodpError::DimensionMismatch {
                left: flat.dim(),
                right: shape.param_count(),
            });
        }
        Ok(Self {
            shape,
            flat: flat.as_slice().to_vec(),
        })
    }

    pub fn to_flat(&self) -> GradientVector {
        GradientVector::new(self.flat.clone())
    }

    pub fn shape(&self) -> MlpShape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.flat.len()
    }

    /// Forward pass; caches the tanh activations for backprop.
    pub fn forward(&self, features: &[f64]) -> Result<ForwardPass> {
        let mut pass = ForwardPass::new(&self.shape);
        self.forward_into(features, &mut pass)?;
        Ok(pass)
    }

    /// Forward pass into a reusable buffer.
    pub fn forward_into(&self, features: &[f64], pass: &mut ForwardPass) -> Result<()> {
        let s = &self.shape;
        if features.len() != s.input {
            return Err(FodpError::DimensionMismatch {
                left: features.len(),
                right: s.input,
            });
        }
        let p = &self.flat;
        for (u, h) in pass.hidden1.iter_mut().enumerate() {
            let mut z = p[s.b1_offset() + u];
            let row = &p[u * s.input..(u + 1) * s.input];
            for (w, x) in row.iter().zip(features) {
                z += w * x;
            }
            *h = z.tanh();
        }
        for (v, h) in pass.hidden2.iter_mut().enumerate() {
            let mut z = p[s.b2_offset() + v];
            let row = &p[s.w2_offset() + v * s.hidden1..s.w2_offset() + (v + 1) * s.hidden1];
            for (w, x) in row.iter().zip(&pass.hidden1) {
                z += w * x;
            }
            *h = z.tanh();
        }
        for (c, l) in pass.logits.iter_mut().enumerate() {
            let mut z = p[s.b3_offset() + c];
            let row = &p[s.w3_offset() + c * s.hidden2..s.w3_offset() + (c + 1) * s.hidden2];
            for (w, x) in row.iter().zip(&pass.hidden2) {
                z += w * x;
            }
            *l = z;
        }
        Ok(())
    }

    /// Softmax cross-entropy loss of one example.
    pub fn loss(&self, example: &Example) -> Result<f64> {
        let pass = self.forward(&example.features)?;
        Ok(log_sum_exp(&pass.logits) - pass.logits[example.label])
    }

    /// Exact gradient of the softmax cross-entropy loss with respect to the
    /// flat parameter vector, by reverse-mode backprop.
    pub fn per_example_grad(&self, example: &Example) -> Result<GradientVector> {
        let mut scratch = GradScratch::new(&self.shape);
        self.per_example_grad_into(example, &mut scratch)?;
        Ok(GradientVector::new(scratch.grad))
    }

    /// Backprop into a reusable workspace; the result lands in `scratch.grad`.
    pub fn per_example_grad_into(
        &self,
        example: &Example,
        scratch: &mut GradScratch,
    ) -> Result<()> {
        let s = &self.shape;
        self.forward_into(&example.features, &mut scratch.pass)?;
        let pass = &scratch.pass;
        let lse = log_sum_exp(&pass.logits);

        // d loss / d logits = softmax(logits) - onehot(label)
        for (dl, l) in scratch.d_logits.iter_mut().zip(&pass.logits) {
            *dl = (l - lse).exp();
        }
        scratch.d_logits[example.label] -= 1.0;

        let grad = &mut scratch.grad;
        let p = &self.flat;

        // Output layer, accumulating d hidden2 on the way back.
        scratch.d_z2.fill(0.0);
        for (c, dl) in scratch.d_logits.iter().enumerate() {
            let w_row = &p[s.w3_offset() + c * s.hidden2..s.w3_offset() + (c + 1) * s.hidden2];
            let g_row =
                &mut grad[s.w3_offset() + c * s.hidden2..s.w3_offset() + (c + 1) * s.hidden2];
            for ((g, a), (dz, w)) in g_row
                .iter_mut()
                .zip(&pass.hidden2)
                .zip(scratch.d_z2.iter_mut().zip(w_row))
            {
                *g = dl * a;
                *dz += dl * w;
            }
            grad[s.b3_offset() + c] = *dl;
        }
        for (dz, a) in scratch.d_z2.iter_mut().zip(&pass.hidden2) {
            *dz *= 1.0 - a * a;
        }

        // Hidden layer 2, accumulating d hidden1.
        scratch.d_z1.fill(0.0);
        for (v, dz) in scratch.d_z2.iter().enumerate() {
            let w_row = &p[s.w2_offset() + v * s.hidden1..s.w2_offset() + (v + 1) * s.hidden1];
            let g_row =
                &mut grad[s.w2_offset() + v * s.hidden1..s.w2_offset() + (v + 1) * s.hidden1];
            for ((g, a), (du, w)) in g_row
                .iter_mut()
                .zip(&pass.hidden1)
                .zip(scratch.d_z1.iter_mut().zip(w_row))
            {
                *g = dz * a;
                *du += dz * w;
            }
            grad[s.b2_offset() + v] = *dz;
        }
        for (dz, a) in scratch.d_z1.iter_mut().zip(&pass.hidden1) {
            *dz *= 1.0 - a * a;
        }

        // Input layer.
        for (u, dz) in scratch.d_z1.iter().enumerate() {
            let g_row = &mut grad[u * s.input..(u + 1) * s.input];
            for (g, x) in g_row.iter_mut().zip(&example.features) {
                *g = dz * x;
            }
            grad[s.b1_offset() + u] = *dz;
        }

        Ok(())
    }
}

/// Accuracy (argmax ties break to the lowest class index) and mean loss.
pub fn evaluate(params: &MlpParams, examples: &[Example]) -> Result<Evaluation> {
    if examples.is_empty() {
        return Err(FodpError::EmptyDataset);
    }
    let mut correct = 0usize;
    let mut loss_sum = 0.0;
    let mut pass = ForwardPass::new(&params.shape);
    for ex in examples {
        params.forward_into(&ex.features, &mut pass)?;
        let mut best = 0usize;
        for (c, l) in pass.logits.iter().enumerate() {
            if *l > pass.logits[best] {
                best = c;
            }
        }
        if best == ex.label {
            correct += 1;
        }
        loss_sum += log_sum_exp(&pass.logits) - pass.logits[ex.label];
    }
    Ok(Evaluation {
        accuracy: correct as f64 / examples.len() as f64,
        mean_loss: loss_sum / examples.len() as f64,
    })
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
