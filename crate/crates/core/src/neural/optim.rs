use super::loss::Gradients;
use super::model::FeedbackModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    /// Plain mini-batch gradient step `θ ← θ - η ∇loss`.
    Sgd,
    Adam {
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
}

impl Optimizer {
    pub const fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Default for Optimizer {
    fn default() -> Self {
        Self::adam()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct OptimizerState {
    kind: Optimizer,
    learning_rate: f64,
    step: i32,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(kind: Optimizer, learning_rate: f64, model: &FeedbackModel) -> Self {
        let mut first = Vec::new();
        model.visit_params(|s| first.push(vec![0.0; s.len()]));
        let second = match kind {
            Optimizer::Sgd => Vec::new(),
            Optimizer::Adam { .. } => first.clone(),
        };
        if matches!(kind, Optimizer::Sgd) {
            first.clear();
        }
        Self {
            kind,
            learning_rate,
            step: 0,
            first,
            second,
        }
    }

    pub fn apply(&mut self, model: &mut FeedbackModel, grads: &Gradients) {
        let gs = grads.slices();
        self.step = self.step.saturating_add(1);
        let lr = self.learning_rate;
        let mut idx = 0;
        match self.kind {
            Optimizer::Sgd => model.visit_params_mut(|p| {
                for (pv, gv) in p.iter_mut().zip(gs[idx]) {
                    *pv -= lr * gv;
                }
                idx += 1;
            }),
            Optimizer::Adam { beta1, beta2, eps } => {
                let c1 = 1.0 - beta1.powi(self.step);
                let c2 = 1.0 - beta2.powi(self.step);
                let (first, second) = (&mut self.first, &mut self.second);
                model.visit_params_mut(|p| {
                    let (m, v) = (&mut first[idx], &mut second[idx]);
                    for (((pv, &gv), mv), vv) in p
                        .iter_mut()
                        .zip(gs[idx])
                        .zip(m.iter_mut())
                        .zip(v.iter_mut())
                    {
                        *mv = beta1 * *mv + (1.0 - beta1) * gv;
                        *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
                        let m_hat = *mv / c1;
                        let v_hat = *vv / c2;
                        *pv -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                    idx += 1;
                });
            }
        }
    }
}
