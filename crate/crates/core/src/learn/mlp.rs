//! Fully connected rectifier network with hand-written backpropagation.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use super::LearnError;
use crate::scalar::NetScalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<F> {
    /// `fan_in x fan_out`.
    pub w: Array2<F>,
    pub b: Array1<F>,
}

/// `sizes[0]` inputs, rectifier on every hidden layer, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<F> {
    layers: Vec<Layer<F>>,
}

/// Pre-activations and activations retained for the backward pass.
#[derive(Debug, Clone)]
pub struct Tape<F> {
    inputs: Vec<Array2<F>>,
    pre: Vec<Array2<F>>,
}

pub type Gradients<F> = Vec<Layer<F>>;

impl<F: NetScalar> Mlp<F> {
    /// He-uniform hidden layers; the output layer is scaled down by `out_scale`.
    pub fn new<R: Rng>(sizes: &[usize], out_scale: f64, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need input and output sizes");
        let n = sizes.len() - 1;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, io)| {
                let limit = (6.0 / io[0] as f64).sqrt() * if i + 1 == n { out_scale } else { 1.0 };
                let w = Array2::from_shape_fn((io[0], io[1]), |_| F::lit(rng.random_range(-limit..=limit)));
                Layer { w, b: Array1::zeros(io[1]) }
            })
            .collect();
        Self { layers }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        let layers = sizes
            .windows(2)
            .map(|io| Layer { w: Array2::zeros((io[0], io[1])), b: Array1::zeros(io[1]) })
            .collect();
        Self { layers }
    }

    pub fn from_layers(layers: Vec<Layer<F>>) -> Result<Self, LearnError> {
        if layers.is_empty() {
            return Err(LearnError::Shape("network without layers".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.b.len() != l.w.ncols() {
                return Err(LearnError::Shape(format!("layer {i}: bias length {} vs width {}", l.b.len(), l.w.ncols())));
            }
            if i > 0 && layers[i - 1].w.ncols() != l.w.nrows() {
                return Err(LearnError::Shape(format!("layer {i} does not chain")));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer<F>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<F>] {
        &mut self.layers
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].w.nrows()];
        s.extend(self.layers.iter().map(|l| l.w.ncols()));
        s
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn output_len(&self) -> usize {
        self.layers.last().map(|l| l.w.ncols()).unwrap_or(0)
    }

    fn check_input(&self, x: &Array2<F>) -> Result<(), LearnError> {
        if x.ncols() != self.input_len() {
            return Err(LearnError::Shape(format!("input width {} vs {}", x.ncols(), self.input_len())));
        }
        Ok(())
    }

    /// Batched forward pass, one row per sample.
    pub fn forward(&self, x: &Array2<F>) -> Result<Array2<F>, LearnError> {
        self.check_input(x)?;
        let last = self.layers.len() - 1;
        let mut h = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            h = h.dot(&l.w) + &l.b;
            if i < last {
                h.mapv_inplace(relu);
            }
        }
        Ok(h)
    }

    pub fn forward_one(&self, x: &[F]) -> Result<Vec<F>, LearnError> {
        let x = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("row shape");
        Ok(self.forward(&x)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_tape(&self, x: &Array2<F>) -> Result<(Array2<F>, Tape<F>), LearnError> {
        self.check_input(x)?;
        let last = self.layers.len() - 1;
        let mut tape = Tape { inputs: Vec::with_capacity(self.layers.len()), pre: Vec::with_capacity(self.layers.len()) };
        let mut h = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            let z = h.dot(&l.w) + &l.b;
            tape.inputs.push(h);
            h = if i < last { z.mapv(relu) } else { z.clone() };
            tape.pre.push(z);
        }
        Ok((h, tape))
    }

    /// Gradients of `sum(dy * y)` with respect to every parameter.
    pub fn backward(&self, tape: &Tape<F>, dy: &Array2<F>) -> Result<Gradients<F>, LearnError> {
        let last = self.layers.len() - 1;
        if dy.dim() != tape.pre[last].dim() {
            return Err(LearnError::Shape(format!("upstream gradient {:?} vs output {:?}", dy.dim(), tape.pre[last].dim())));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = dy.clone();
        for i in (0..self.layers.len()).rev() {
            if i < last {
                delta.zip_mut_with(&tape.pre[i], |d, &z| {
                    if z <= F::zero() {
                        *d = F::zero();
                    }
                });
            }
            let gw = tape.inputs[i].t().dot(&delta);
            let gb = delta.sum_axis(Axis(0));
            if i > 0 {
                delta = delta.dot(&self.layers[i].w.t());
            }
            grads.push(Layer { w: gw, b: gb });
        }
        grads.reverse();
        Ok(grads)
    }

    /// Plain gradient-descent step.
    pub fn sgd(&mut self, grads: &Gradients<F>, lr: F) {
        for (l, g) in self.layers.iter_mut().zip(grads) {
            l.w.scaled_add(-lr, &g.w);
            l.b.scaled_add(-lr, &g.b);
        }
    }

    /// `self <- (1 - rate) * self + rate * src`.
    pub fn polyak(&mut self, src: &Mlp<F>, rate: F) {
        let keep = F::one() - rate;
        for (l, s) in self.layers.iter_mut().zip(&src.layers) {
            l.w.zip_mut_with(&s.w, |a, &b| *a = keep * *a + rate * b);
            l.b.zip_mut_with(&s.b, |a, &b| *a = keep * *a + rate * b);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }
}

fn relu<F: NetScalar>(v: F) -> F {
    if v > F::zero() {
        v
    } else {
        F::zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::<f64>::zeros(&[3, 4, 2]);
        assert_eq!(net.forward_one(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_weight() {
        let layer = Layer { w: Array2::from_elem((1, 1), 1.5), b: Array1::zeros(1) };
        let net = Mlp::from_layers(vec![layer]).unwrap();
        let x = Array2::from_elem((1, 1), 2.0);
        let (y, tape) = net.forward_tape(&x).unwrap();
        assert_eq!(y[[0, 0]], 3.0);
        let g = net.backward(&tape, &Array2::ones((1, 1))).unwrap();
        assert_eq!(g[0].w[[0, 0]], 2.0);
        assert_eq!(g[0].b[0], 1.0);
    }

    #[test]
    fn shape_errors() {
        let net = Mlp::<f32>::zeros(&[3, 2]);
        assert!(net.forward_one(&[1.0]).is_err());
        let bad = vec![Layer { w: Array2::<f64>::zeros((2, 3)), b: Array1::zeros(2) }];
        assert!(Mlp::from_layers(bad).is_err());
    }

    #[test]
    fn matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Mlp::<f64>::new(&[4, 6, 5, 3], 1.0, &mut rng);
        for l in net.layers_mut() {
            l.b.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        }
        let x = Array2::from_shape_fn((2, 4), |_| rng.random_range(-1.0..1.0));
        let c = Array2::from_shape_fn((2, 3), |_| rng.random_range(-1.0..1.0));
        let loss = |n: &Mlp<f64>| (n.forward(&x).unwrap() * &c).sum();
        let (_, tape) = net.forward_tape(&x).unwrap();
        let g = net.backward(&tape, &c).unwrap();
        let h = 1e-5;
        for li in 0..g.len() {
            for idx in 0..g[li].w.len() {
                let (r, col) = (idx / g[li].w.ncols(), idx % g[li].w.ncols());
                let mut p = net.clone();
                p.layers_mut()[li].w[[r, col]] += h;
                let mut m = net.clone();
                m.layers_mut()[li].w[[r, col]] -= h;
                let fd = (loss(&p) - loss(&m)) / (2.0 * h);
                let an = g[li].w[[r, col]];
                assert!((fd - an).abs() <= 1e-6 + 1e-4 * an.abs().max(fd.abs()), "layer {li} w{idx}: {an} vs {fd}");
            }
        }
    }

    #[test]
    fn sgd_reduces_loss_and_polyak_blends() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = Mlp::<f32>::new(&[2, 8, 1], 1.0, &mut rng);
        let x = Array2::from_shape_vec((2, 2), vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let target = Array2::from_shape_vec((2, 1), vec![1.0, -1.0]).unwrap();
        let mse = |n: &Mlp<f32>| (n.forward(&x).unwrap() - &target).mapv(|v| v * v).mean().unwrap();
        let before = mse(&net);
        for _ in 0..200 {
            let (y, tape) = net.forward_tape(&x).unwrap();
            let dy = (y - &target) * (2.0 / 2.0);
            let g = net.backward(&tape, &dy).unwrap();
            net.sgd(&g, 0.05);
        }
        assert!(mse(&net) < before * 0.01);
        let zero = Mlp::<f32>::zeros(&[2, 8, 1]);
        let mut t = zero.clone();
        t.polyak(&net, 1.0);
        assert_eq!(t, net);
        t.polyak(&zero, 0.5);
        assert_eq!(t.layers()[0].w[[0, 0]], net.layers()[0].w[[0, 0]] * 0.5);
    }
}
