use ndarray::{concatenate, Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use super::mlp::Mlp;
use crate::error::Result;

/// Twin Q networks over `features ‖ action`.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticParams {
    pub q1: Mlp,
    pub q2: Mlp,
}

impl CriticParams {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, action_dim: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        let mut sizes = vec![obs_dim + action_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        Ok(Self {
            q1: Mlp::new(&sizes, rng)?,
            q2: Mlp::new(&sizes, rng)?,
        })
    }

    pub fn nets(&self) -> [&Mlp; 2] {
        [&self.q1, &self.q2]
    }

    pub fn nets_mut(&mut self) -> [&mut Mlp; 2] {
        [&mut self.q1, &mut self.q2]
    }

    pub fn is_finite(&self) -> bool {
        self.q1.is_finite() && self.q2.is_finite()
    }

    /// Both critics' values, one entry per row.
    pub fn q_values(&self, features: ArrayView2<'_, f64>, actions: ArrayView2<'_, f64>) -> Result<[Array1<f64>; 2]> {
        let input = critic_input(features, actions);
        let a = self.q1.forward(input.view())?.column(0).to_owned();
        let b = self.q2.forward(input.view())?.column(0).to_owned();
        Ok([a, b])
    }

    pub fn min_q(&self, features: ArrayView2<'_, f64>, actions: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        let [a, b] = self.q_values(features, actions)?;
        Ok(ndarray::Zip::from(&a).and(&b).map_collect(|&x, &y| x.min(y)))
    }
}

pub fn critic_input(features: ArrayView2<'_, f64>, actions: ArrayView2<'_, f64>) -> Array2<f64> {
    concatenate(Axis(1), &[features, actions]).expect("row counts agree")
}
