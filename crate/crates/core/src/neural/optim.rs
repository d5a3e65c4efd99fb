use super::tensor::{Grads, ParamSet};
use crate::scalar::Real;

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    t: i32,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(params: &ParamSet<T>, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros = params.zero_grads().0;
        Self { lr: T::lit(lr), beta1: T::lit(beta1), beta2: T::lit(beta2), eps: T::lit(eps), t: 0, m: zeros.clone(), v: zeros }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    pub fn step(&mut self, params: &mut ParamSet<T>, grads: &Grads<T>) {
        self.t += 1;
        let c1 = T::one() - self.beta1.powi(self.t);
        let c2 = T::one() - self.beta2.powi(self.t);
        for (i, g) in grads.0.iter().enumerate() {
            let w = params.get_mut(i).values_mut();
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for k in 0..g.len() {
                m[k] = self.beta1 * m[k] + (T::one() - self.beta1) * g[k];
                v[k] = self.beta2 * v[k] + (T::one() - self.beta2) * g[k] * g[k];
                let mh = m[k] / c1;
                let vh = v[k] / c2;
                w[k] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::tensor::Tensor;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = ParamSet::default();
        p.push("w", Tensor::new(vec![2], vec![1.0f64, -1.0]).unwrap());
        let mut opt = Adam::new(&p, 0.1, 0.9, 0.999, 1e-8);
        opt.step(&mut p, &Grads(vec![vec![3.0, -0.5]]));
        assert!((p.v(0)[0] - 0.9).abs() < 1e-6);
        assert!((p.v(0)[1] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn minimises_a_quadratic() {
        let mut p = ParamSet::default();
        p.push("w", Tensor::new(vec![1], vec![5.0f64]).unwrap());
        let mut opt = Adam::new(&p, 0.05, 0.9, 0.999, 1e-8);
        for _ in 0..2000 {
            let w = p.v(0)[0];
            opt.step(&mut p, &Grads(vec![vec![2.0 * (w - 2.0)]]));
        }
        assert!((p.v(0)[0] - 2.0).abs() < 1e-3);
    }
}
