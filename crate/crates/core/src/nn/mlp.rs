use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};

/// Dense rectifier network with a linear output layer.
///
/// All weights live in one flat vector, layer by layer: the `out × in`
/// weight matrix in row-major order followed by the `out` biases.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Intermediate values kept for the backward pass.
#[derive(Clone, Debug)]
pub struct MlpCache {
    /// Input of every layer (the first entry is the network input).
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of every layer.
    pre: Vec<Array2<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &Array2<f64> {
        self.pre.last().expect("at least one layer")
    }
}

fn count_params(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(Error::Shape(format!("invalid layer sizes {sizes:?}")));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; count_params(sizes)],
        })
    }

    /// Fan-in scaled uniform initialization, `U(−1/√fan_in, 1/√fan_in)`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        let mut off = 0;
        for w in net.sizes.clone().windows(2) {
            let (fan_in, out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut net.params[off..off + out * fan_in + out] {
                *p = rng.random_range(-bound..bound);
            }
            off += out * fan_in + out;
        }
        Ok(net)
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        if params.len() != net.params.len() {
            return Err(Error::Shape(format!(
                "{} parameters for layer sizes {sizes:?} (expected {})",
                params.len(),
                net.params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("validated")
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    fn layer(&self, l: usize) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let start = self.layer_offset(l);
        let (out, inp) = (self.sizes[l + 1], self.sizes[l]);
        let w = ArrayView2::from_shape((out, inp), &self.params[start..start + out * inp])
            .expect("layout");
        let b = ArrayView1::from(&self.params[start + out * inp..start + out * inp + out]);
        (w, b)
    }

    fn layer_offset(&self, l: usize) -> usize {
        count_params(&self.sizes[..=l])
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim() {
            return Err(Error::Shape(format!(
                "input width {cols}, network expects {}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Batched forward pass: one row per sample.
    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        let mut a = x.to_owned();
        for l in 0..self.n_layers() {
            let (w, b) = self.layer(l);
            let mut z = a.dot(&w.t());
            z += &b;
            if l + 1 < self.n_layers() {
                z.mapv_inplace(|v| v.max(0.0));
            }
            a = z;
        }
        Ok(a)
    }

    pub fn forward_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row");
        Ok(self.forward(view)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_cached(&self, x: ArrayView2<'_, f64>) -> Result<MlpCache> {
        self.check_input(x.ncols())?;
        let mut inputs = Vec::with_capacity(self.n_layers());
        let mut pre = Vec::with_capacity(self.n_layers());
        let mut a = x.to_owned();
        for l in 0..self.n_layers() {
            let (w, b) = self.layer(l);
            let mut z = a.dot(&w.t());
            z += &b;
            let next = if l + 1 < self.n_layers() {
                z.mapv(|v| v.max(0.0))
            } else {
                Array2::zeros((0, 0))
            };
            inputs.push(a);
            pre.push(z);
            a = next;
        }
        Ok(MlpCache { inputs, pre })
    }

    /// Reverse-mode pass. `upstream` is dLoss/dOutput per sample; returns the
    /// flat parameter gradient (summed over the batch) and dLoss/dInput.
    pub fn backward(&self, cache: &MlpCache, upstream: ArrayView2<'_, f64>) -> Result<(Vec<f64>, Array2<f64>)> {
        let out = cache.output();
        if upstream.dim() != out.dim() {
            return Err(Error::Shape(format!(
                "upstream {:?} does not match output {:?}",
                upstream.dim(),
                out.dim()
            )));
        }
        let mut grads = vec![0.0; self.params.len()];
        let mut delta = upstream.to_owned();
        for l in (0..self.n_layers()).rev() {
            let (w, _) = self.layer(l);
            let (o, i) = (self.sizes[l + 1], self.sizes[l]);
            let start = self.layer_offset(l);
            let dw = delta.t().dot(&cache.inputs[l]);
            let db: Array1<f64> = delta.sum_axis(Axis(0));
            for (g, &v) in grads[start..start + o * i].iter_mut().zip(dw.iter()) {
                *g = v;
            }
            for (g, &v) in grads[start + o * i..start + o * i + o].iter_mut().zip(db.iter()) {
                *g = v;
            }
            let mut prev = delta.dot(&w);
            if l > 0 {
                ndarray::Zip::from(&mut prev)
                    .and(&cache.pre[l - 1])
                    .for_each(|d, &z| {
                        if z <= 0.0 {
                            *d = 0.0;
                        }
                    });
            }
            delta = prev;
        }
        Ok((grads, delta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use ndarray::array;

    /// Straight-line single-sample forward pass, written independently.
    fn reference_forward(net: &Mlp, x: &[f64]) -> Vec<f64> {
        let p = net.params();
        let mut a = x.to_vec();
        let mut off = 0;
        let layers = net.sizes().len() - 1;
        for l in 0..layers {
            let (inp, out) = (net.sizes()[l], net.sizes()[l + 1]);
            let mut z = vec![0.0; out];
            for (o, zo) in z.iter_mut().enumerate() {
                let mut s = p[off + out * inp + o];
                for (i, ai) in a.iter().enumerate() {
                    s += p[off + o * inp + i] * ai;
                }
                *zo = if l + 1 < layers { s.max(0.0) } else { s };
            }
            off += out * inp + out;
            a = z;
        }
        a
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::zeros(&[3, 5, 2]).unwrap();
        assert_eq!(net.forward_one(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_single_layer() {
        let net = Mlp::from_params(&[2, 2], vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(net.forward_one(&[0.3, -0.7]).unwrap(), vec![0.3, -0.7]);
    }

    #[test]
    fn matches_reference_forward() {
        let mut rng = stream(3, Stream::Init, &[]);
        let net = Mlp::new(&[4, 8, 8, 3], &mut rng).unwrap();
        for k in 0..20 {
            let x: Vec<f64> = (0..4).map(|i| ((i * 7 + k) as f64).sin()).collect();
            let a = net.forward_one(&x).unwrap();
            let b = reference_forward(&net, &x);
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_errors() {
        let net = Mlp::zeros(&[3, 2]).unwrap();
        assert!(net.forward_one(&[1.0]).is_err());
        assert!(Mlp::from_params(&[3, 2], vec![0.0; 3]).is_err());
        let cache = net.forward_cached(array![[1.0, 2.0, 3.0]].view()).unwrap();
        assert!(net.backward(&cache, array![[1.0]].view()).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = stream(11, Stream::Init, &[]);
        let mut net = Mlp::new(&[4, 8, 2], &mut rng).unwrap();
        let x = array![[0.3, -0.2, 0.8, 0.1], [-0.5, 0.4, 0.2, 0.9]];
        let up = array![[1.0, -0.5], [0.25, 2.0]];
        let loss = |n: &Mlp| -> f64 { (&n.forward(x.view()).unwrap() * &up).sum() };
        let cache = net.forward_cached(x.view()).unwrap();
        let (g, gx) = net.backward(&cache, up.view()).unwrap();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for i in 0..net.n_params() {
            let orig = net.params()[i];
            net.params_mut()[i] = orig + h;
            let lp = loss(&net);
            net.params_mut()[i] = orig - h;
            let lm = loss(&net);
            net.params_mut()[i] = orig;
            let fd = (lp - lm) / (2.0 * h);
            worst = worst.max((fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-6));
        }
        assert!(worst < 1e-4, "parameter grad rel err {worst}");
        for r in 0..2 {
            for c in 0..4 {
                let mut xp = x.clone();
                xp[[r, c]] += h;
                let mut xm = x.clone();
                xm[[r, c]] -= h;
                let fd = ((&net.forward(xp.view()).unwrap() * &up).sum()
                    - (&net.forward(xm.view()).unwrap() * &up).sum())
                    / (2.0 * h);
                assert!((fd - gx[[r, c]]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn zero_upstream_zero_gradient() {
        let mut rng = stream(5, Stream::Init, &[]);
        let net = Mlp::new(&[3, 4, 2], &mut rng).unwrap();
        let x = array![[0.1, 0.2, 0.3]];
        let cache = net.forward_cached(x.view()).unwrap();
        let (g, gx) = net.backward(&cache, Array2::zeros((1, 2)).view()).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
        assert!(gx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dead_rectifier_blocks_gradient() {
        // Hidden unit 0 has a negative pre-activation, unit 1 a positive one.
        let net = Mlp::from_params(
            &[1, 2, 1],
            vec![1.0, 1.0, -5.0, 0.0, 1.0, 1.0, 0.0],
        )
        .unwrap();
        let x = array![[1.0]];
        let cache = net.forward_cached(x.view()).unwrap();
        let (g, _) = net.backward(&cache, array![[1.0]].view()).unwrap();
        // Layer-0 weight and bias of the dead unit receive nothing.
        assert_eq!(g[0], 0.0);
        assert_eq!(g[2], 0.0);
        assert_ne!(g[1], 0.0);
    }
}
