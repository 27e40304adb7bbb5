use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fully connected layer, `y = x W + b` with `W` of shape `(inputs, outputs)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDense", into = "RawDense")]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Row-major on-disk form of a layer.
#[derive(Serialize, Deserialize)]
struct RawDense {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl From<Dense> for RawDense {
    fn from(d: Dense) -> RawDense {
        let (rows, cols) = d.w.dim();
        RawDense { rows, cols, weights: d.w.iter().copied().collect(), bias: d.b.to_vec() }
    }
}

impl TryFrom<RawDense> for Dense {
    type Error = Error;
    fn try_from(r: RawDense) -> Result<Dense> {
        if r.bias.len() != r.cols {
            return Err(Error::Shape(format!("bias of length {} for {} outputs", r.bias.len(), r.cols)));
        }
        let w = Array2::from_shape_vec((r.rows, r.cols), r.weights).map_err(|e| Error::Shape(e.to_string()))?;
        Ok(Dense { w, b: Array1::from(r.bias) })
    }
}

/// Multilayer perceptron with rectifier hidden units and a linear head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// Input of every layer; entry 0 is the network input.
    inputs: Vec<Array2<f64>>,
}

/// Gradients with the same layout as the network parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.w.iter().chain(l.b.iter()).copied()).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }
}

impl Mlp {
    /// `sizes` lists input, hidden and output widths. Weights and biases
    /// are drawn uniformly from `±1/sqrt(fan_in)`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Shape(format!("invalid layer sizes {sizes:?}")));
        }
        let layers = sizes
            .windows(2)
            .map(|io| {
                let bound = 1.0 / (io[0] as f64).sqrt();
                let w = Array2::from_shape_simple_fn((io[0], io[1]), || rng.random_range(-bound..bound));
                let b = Array1::from_shape_simple_fn(io[1], || rng.random_range(-bound..bound));
                Dense { w, b }
            })
            .collect();
        Ok(Mlp { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].w.ncols()
    }

    /// Input, hidden and output widths.
    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim()).chain(self.layers.iter().map(|l| l.w.ncols())).collect()
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape(format!("input has {} features, network expects {}", x.ncols(), self.input_dim())));
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let last = self.layers.len() - 1;
        let mut h = x.to_owned();
        for (i, l) in self.layers.iter().enumerate() {
            h = h.dot(&l.w) + &l.b;
            if i < last {
                h.mapv_inplace(|v| v.max(0.0));
            }
        }
        Ok(h)
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(&x)?;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        for (i, l) in self.layers.iter().enumerate() {
            let next = {
                let mut z = h.dot(&l.w) + &l.b;
                if i < last {
                    z.mapv_inplace(|v| v.max(0.0));
                }
                z
            };
            inputs.push(h);
            h = next;
        }
        Ok((h, ForwardCache { inputs }))
    }

    /// Parameter gradients given `dL/d(output)`.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &Array2<f64>) -> Gradients {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = grad_out.clone();
        for (i, l) in self.layers.iter().enumerate().rev() {
            let x = &cache.inputs[i];
            grads.push(Dense { w: x.t().dot(&g), b: g.sum_axis(Axis(0)) });
            if i > 0 {
                let mut gx = g.dot(&l.w.t());
                // x is the rectified output of the previous layer
                Zip::from(&mut gx).and(x).for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                g = gx;
            }
        }
        grads.reverse();
        Gradients { layers: grads }
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.w.iter().chain(l.b.iter()).copied()).collect()
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Shape(format!("{} parameters for a network of {}", params.len(), self.param_count())));
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.w.iter_mut().chain(l.b.iter_mut()).for_each(|p| *p = it.next().expect("length checked"));
        }
        Ok(())
    }

    /// `self <- tau * source + (1 - tau) * self`.
    pub fn soft_update_from(&mut self, source: &Mlp, tau: f64) -> Result<()> {
        if self.sizes() != source.sizes() {
            return Err(Error::Shape(format!("cannot blend {:?} into {:?}", source.sizes(), self.sizes())));
        }
        for (t, s) in self.layers.iter_mut().zip(&source.layers) {
            Zip::from(&mut t.w).and(&s.w).for_each(|a, &b| *a = tau * b + (1.0 - tau) * *a);
            Zip::from(&mut t.b).and(&s.b).for_each(|a, &b| *a = tau * b + (1.0 - tau) * *a);
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }
}

/// Adam moment estimates for one network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Dense>,
    v: Vec<Dense>,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        let zeros: Vec<Dense> =
            net.layers.iter().map(|l| Dense { w: Array2::zeros(l.w.raw_dim()), b: Array1::zeros(l.b.len()) }).collect();
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: zeros.clone(), v: zeros }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn apply(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != net.layers.len() || self.m.len() != net.layers.len() {
            return Err(Error::Shape("gradient layout does not match the network".into()));
        }
        self.step += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(self.step.min(i32::MAX as u64) as i32);
        let c2 = 1.0 - b2.powi(self.step.min(i32::MAX as u64) as i32);
        let lr = self.lr;
        for (((layer, g), m), v) in net.layers.iter_mut().zip(&grads.layers).zip(&mut self.m).zip(&mut self.v) {
            if layer.w.raw_dim() != g.w.raw_dim() || layer.b.len() != g.b.len() {
                return Err(Error::Shape("gradient layout does not match the network".into()));
            }
            Zip::from(&mut layer.w).and(&g.w).and(&mut m.w).and(&mut v.w).for_each(|p, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
            Zip::from(&mut layer.b).and(&g.b).and(&mut m.b).and(&mut v.b).for_each(|p, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
        }
        Ok(())
    }
}

/// Adam on a single scalar parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarAdam {
    pub lr: f64,
    step: u64,
    m: f64,
    v: f64,
}

impl ScalarAdam {
    pub fn new(lr: f64) -> Self {
        ScalarAdam { lr, step: 0, m: 0.0, v: 0.0 }
    }

    pub fn apply(&mut self, param: &mut f64, grad: f64) {
        let (b1, b2) = (0.9, 0.999);
        self.step += 1;
        self.m = b1 * self.m + (1.0 - b1) * grad;
        self.v = b2 * self.v + (1.0 - b2) * grad * grad;
        let n = self.step.min(i32::MAX as u64) as i32;
        *param -= self.lr * (self.m / (1.0 - b1.powi(n))) / ((self.v / (1.0 - b2.powi(n))).sqrt() + 1e-8);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net(seed: u64) -> Mlp {
        Mlp::new(&[3, 8, 8, 2], &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn shapes() {
        let n = net(1);
        assert_eq!(n.sizes(), [3, 8, 8, 2]);
        assert_eq!(n.param_count(), 3 * 8 + 8 + 8 * 8 + 8 + 8 * 2 + 2);
        let y = n.forward(array![[0.1, 0.2, 0.3], [1.0, -1.0, 0.0]].view()).unwrap();
        assert_eq!(y.dim(), (2, 2));
        assert!(n.forward(array![[0.1, 0.2]].view()).is_err());
        assert!(Mlp::new(&[3], &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut n = net(4);
        let x = array![[0.3, -0.7, 1.1], [0.5, 0.2, -0.4], [-1.0, 0.9, 0.05]];
        // L = sum(c * y)
        let c = array![[0.7, -1.3], [0.2, 0.4], [-0.5, 1.0]];
        let (_, cache) = n.forward_cached(x.view()).unwrap();
        let g = n.backward(&cache, &c).flatten();
        let p = n.flat_params();
        let h = 1e-6;
        for i in 0..p.len() {
            let mut q = p.clone();
            q[i] += h;
            n.set_flat_params(&q).unwrap();
            let up = (&n.forward(x.view()).unwrap() * &c).sum();
            q[i] -= 2.0 * h;
            n.set_flat_params(&q).unwrap();
            let down = (&n.forward(x.view()).unwrap() * &c).sum();
            let fd = (up - down) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-6 * (1.0 + fd.abs()), "param {i}: {fd} vs {}", g[i]);
        }
        n.set_flat_params(&p).unwrap();
    }

    #[test]
    fn soft_update_limits() {
        let src = net(1);
        let mut t = net(2);
        let orig = t.clone();
        t.soft_update_from(&src, 0.0).unwrap();
        assert_eq!(t, orig);
        t.soft_update_from(&src, 1.0).unwrap();
        assert_eq!(t, src);
        let other = Mlp::new(&[3, 4, 2], &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(t.soft_update_from(&other, 0.5).is_err());
    }

    #[test]
    fn soft_update_geometric_decay() {
        let src = net(1);
        let mut t = net(2);
        let gap0: Vec<f64> = t.flat_params().iter().zip(src.flat_params()).map(|(a, b)| a - b).collect();
        let tau = 0.2;
        for _ in 0..10 {
            t.soft_update_from(&src, tau).unwrap();
        }
        let factor = (1.0 - tau).powi(10);
        for ((a, b), g0) in t.flat_params().iter().zip(src.flat_params()).zip(gap0) {
            assert!((a - b - factor * g0).abs() < 1e-12);
        }
    }

    #[test]
    fn adam_descends_quadratic() {
        let mut n = Mlp::new(&[1, 1], &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let mut opt = Adam::new(&n, 0.05);
        let x = array![[1.0]];
        for _ in 0..500 {
            let (y, cache) = n.forward_cached(x.view()).unwrap();
            // L = (y - 3)^2 / 2
            let g = n.backward(&cache, &(&y - 3.0));
            opt.apply(&mut n, &g).unwrap();
        }
        assert!((n.forward(x.view()).unwrap()[[0, 0]] - 3.0).abs() < 1e-3);
        let mut p = 5.0;
        let mut s = ScalarAdam::new(0.1);
        for _ in 0..500 {
            let g = p - 1.0;
            s.apply(&mut p, g);
        }
        assert!((p - 1.0).abs() < 1e-2);
    }

    #[test]
    fn serde_is_row_major() {
        let n = Mlp::new(&[2, 3], &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let v: serde_json::Value = serde_json::to_value(&n).unwrap();
        let w = &v["layers"][0]["weights"];
        assert_eq!(w[1].as_f64().unwrap(), n.layers()[0].w[[0, 1]]);
        assert_eq!(w[3].as_f64().unwrap(), n.layers()[0].w[[1, 0]]);
        let back: Mlp = serde_json::from_value(v).unwrap();
        assert_eq!(back, n);
    }
}
