use ndarray::Array2;

use crate::tape::{Grads, ParamStore};

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64) -> Self {
        let zeros: Vec<Array2<f64>> = store.iter().map(|(_, p)| Array2::zeros(p.dim())).collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Parameters without a gradient still decay their moments.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Grads) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let (m, v) = (&mut self.m[id.0], &mut self.v[id.0]);
            match grads.get(id) {
                Some(g) => {
                    m.zip_mut_with(g, |m, &g| *m = b1 * *m + (1.0 - b1) * g);
                    v.zip_mut_with(g, |v, &g| *v = b2 * *v + (1.0 - b2) * g * g);
                }
                None => {
                    m.mapv_inplace(|m| b1 * m);
                    v.mapv_inplace(|v| b2 * v);
                }
            }
            let p = store.get_mut(id);
            ndarray::Zip::from(p).and(&*m).and(&*v).for_each(|p, &m, &v| {
                *p -= lr * (m / c1) / ((v / c2).sqrt() + eps);
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tape::Graph;
    use ndarray::array;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut store = ParamStore::new(0);
        let w = store.add("w", array![[1.0, -2.0]]);
        let mut adam = Adam::new(&store, 0.01);
        let grads = {
            let mut g = Graph::new(&store);
            let p = g.param(w);
            let s = g.sum_all(p);
            g.backward(s)
        };
        adam.step(&mut store, &grads);
        let p = store.get(w);
        assert!((p[[0, 0]] - 0.99).abs() < 1e-9);
        assert!((p[[0, 1]] + 2.01).abs() < 1e-9);
    }

    #[test]
    fn minimises_a_quadratic() {
        let mut store = ParamStore::new(0);
        let w = store.add("w", array![[3.0, -4.0]]);
        let mut adam = Adam::new(&store, 0.1);
        for _ in 0..500 {
            let grads = {
                let mut g = Graph::new(&store);
                let p = g.param(w);
                let sq = g.mul(p, p);
                let s = g.sum_all(sq);
                g.backward(s)
            };
            adam.step(&mut store, &grads);
        }
        assert!(store.get(w).iter().all(|v| v.abs() < 1e-2));
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let mut store = ParamStore::new(0);
        let w = store.add("w", array![[0.5]]);
        let mut adam = Adam::new(&store, 0.0);
        let grads = {
            let mut g = Graph::new(&store);
            let p = g.param(w);
            let s = g.sum_all(p);
            g.backward(s)
        };
        adam.step(&mut store, &grads);
        assert_eq!(store.get(w)[[0, 0]], 0.5);
    }
}
