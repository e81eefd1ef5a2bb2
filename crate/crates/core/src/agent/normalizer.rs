use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Per-feature running mean and variance (Welford) used to whiten
/// observations before they reach the networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningNormalizer {
    count: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
    clip: f64,
}

impl RunningNormalizer {
    pub fn new(dim: usize, clip: f64) -> Self {
        Self { count: 0.0, mean: vec![0.0; dim], m2: vec![0.0; dim], clip }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> f64 {
        self.count
    }

    pub fn update<T: Scalar>(&mut self, x: ArrayView1<T>) {
        self.count += 1.0;
        for ((m, s), v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x.iter()) {
            let v = v.as_f64();
            let delta = v - *m;
            *m += delta / self.count;
            *s += delta * (v - *m);
        }
    }

    pub fn std(&self, i: usize) -> f64 {
        if self.count < 2.0 {
            return 1.0;
        }
        let var = self.m2[i] / self.count;
        if var > 1e-24 {
            var.sqrt()
        } else {
            1.0
        }
    }

    pub fn normalize<T: Scalar>(&self, x: ArrayView2<T>) -> Array2<T> {
        let stds: Vec<f64> = (0..self.dim()).map(|i| self.std(i)).collect();
        Array2::from_shape_fn(x.dim(), |(b, i)| {
            let z = (x[(b, i)].as_f64() - self.mean[i]) / stds[i];
            T::of(z.clamp(-self.clip, self.clip))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn whitens_known_sample() {
        let mut n = RunningNormalizer::new(2, 10.0);
        for row in [[1.0, 5.0], [3.0, 5.0]] {
            n.update(ndarray::aview1(&row));
        }
        let z = n.normalize(array![[3.0, 5.0], [1.0, 7.0]].view());
        assert_eq!(z, array![[1.0, 0.0], [-1.0, 2.0]]);
    }

    #[test]
    fn clips_outliers() {
        let mut n = RunningNormalizer::new(1, 3.0);
        n.update(ndarray::aview1(&[0.0]));
        n.update(ndarray::aview1(&[2.0]));
        assert_eq!(n.normalize(array![[100.0]].view())[(0, 0)], 3.0);
    }
}
