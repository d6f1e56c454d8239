//! Local training, update gradients and weighted averaging.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{mean_gradient, sgd_step, Hyperparams, ModelParams};

/// A peer's update expressed as the gradient the server infers from it:
/// `(W_t - W_next) / lr`.
#[derive(Clone, Debug, PartialEq)]
pub struct UpdateGradient(ModelParams);

impl UpdateGradient {
    pub fn new(params: ModelParams) -> Self {
        UpdateGradient(params)
    }

    pub fn params(&self) -> &ModelParams {
        &self.0
    }

    pub fn into_params(self) -> ModelParams {
        self.0
    }
}

/// Recovers the gradient implied by moving from `global` to `local` with
/// learning rate `lr`.
pub fn compute_update_gradient(global: &ModelParams, local: &ModelParams, lr: f64) -> Result<UpdateGradient> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::contract(format!("learning rate must be positive, got {lr}")));
    }
    if global.dims() != local.dims() {
        return Err(Error::Shape {
            what: "local model",
            expected: global.dims().param_count(),
            found: local.dims().param_count(),
        });
    }
    let data = global.as_slice().iter().zip(local.as_slice()).map(|(g, l)| (g - l) / lr).collect();
    Ok(UpdateGradient(ModelParams::from_vec(global.dims(), data)?))
}

/// Runs `local_epochs` of shuffled mini-batch momentum SGD from `global`.
///
/// The velocity starts at zero. Zero epochs or a zero learning rate return
/// the starting model unchanged.
pub fn local_train<R: Rng + ?Sized>(
    global: &ModelParams,
    data: &Dataset,
    hp: &Hyperparams,
    rng: &mut R,
) -> Result<ModelParams> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.dim() != global.dims().input {
        return Err(Error::Shape { what: "example", expected: global.dims().input, found: data.dim() });
    }
    if hp.batch_size == 0 {
        return Err(Error::config("batch size must be at least 1"));
    }
    let mut params = global.clone();
    let mut velocity = ModelParams::zeros(global.dims());
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..hp.local_epochs {
        order.shuffle(rng);
        for batch in order.chunks(hp.batch_size) {
            let (grad, _) = mean_gradient(&params, batch.iter().map(|&i| (data.row(i), data.labels()[i])))?;
            sgd_step(&mut params, &mut velocity, &grad, hp)?;
        }
    }
    if !params.is_finite() {
        return Err(Error::contract("local training diverged to non-finite parameters"));
    }
    Ok(params)
}

/// Weighted average `sum_k w_k W_k / sum_k w_k`.
pub fn fedavg(models: &[&ModelParams], weights: &[f64]) -> Result<ModelParams> {
    let first = models.first().ok_or_else(|| Error::Aggregation("no models to average".into()))?;
    if weights.len() != models.len() {
        return Err(Error::Shape { what: "aggregation weights", expected: models.len(), found: weights.len() });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::Aggregation("weights must be finite and non-negative".into()));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::Aggregation("weights sum to zero".into()));
    }
    let dims = first.dims();
    let mut out = vec![0.0; dims.param_count()];
    for (m, &w) in models.iter().zip(weights) {
        if m.dims() != dims {
            return Err(Error::Shape { what: "model", expected: dims.param_count(), found: m.dims().param_count() });
        }
        if w == 0.0 {
            continue;
        }
        let scale = w / total;
        out.iter_mut().zip(m.as_slice()).for_each(|(o, v)| *o += scale * v);
    }
    ModelParams::from_vec(dims, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Dims;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dims() -> Dims {
        Dims::new(2, 3, 2).unwrap()
    }

    fn filled(v: f64) -> ModelParams {
        ModelParams::from_vec(dims(), vec![v; dims().param_count()]).unwrap()
    }

    fn toy() -> Dataset {
        Dataset::new(vec![0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0], vec![0, 1, 1, 0], 2, 2).unwrap()
    }

    #[test]
    fn fedavg_examples() {
        let (a, b) = (filled(0.0), filled(2.0));
        assert_eq!(fedavg(&[&a, &b], &[1.0, 1.0]).unwrap(), filled(1.0));
        assert_eq!(fedavg(&[&b, &a], &[1.0, 1.0]).unwrap(), filled(1.0));
        assert_eq!(fedavg(&[&a, &b], &[1.0, 3.0]).unwrap(), filled(1.5));
        assert_eq!(fedavg(&[&a, &b], &[1.0, 0.0]).unwrap(), a);
        assert!(fedavg(&[&a, &b], &[0.0, 0.0]).is_err());
        assert!(fedavg(&[], &[]).is_err());
    }

    #[test]
    fn update_gradient_inverts_a_step() {
        let g = compute_update_gradient(&filled(1.0), &filled(0.5), 0.1).unwrap();
        assert!(g.params().as_slice().iter().all(|v| (v - 5.0).abs() < 1e-12));
        assert!(compute_update_gradient(&filled(1.0), &filled(0.5), 0.0).is_err());
    }

    #[test]
    fn no_op_training() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = ModelParams::glorot(dims(), &mut rng);
        let zero_epochs = Hyperparams { lr: 0.1, momentum: 0.9, local_epochs: 0, batch_size: 2 };
        assert_eq!(local_train(&w, &toy(), &zero_epochs, &mut rng).unwrap(), w);
        let zero_lr = Hyperparams { lr: 0.0, local_epochs: 3, ..zero_epochs };
        assert_eq!(local_train(&w, &toy(), &zero_lr, &mut rng).unwrap(), w);
        let empty = toy().subset(&[]);
        assert!(matches!(local_train(&w, &empty, &zero_epochs, &mut rng), Err(Error::EmptyDataset)));
    }

    #[test]
    fn training_is_seed_deterministic() {
        let w = ModelParams::glorot(dims(), &mut ChaCha8Rng::seed_from_u64(3));
        let hp = Hyperparams { lr: 0.1, momentum: 0.5, local_epochs: 2, batch_size: 3 };
        let a = local_train(&w, &toy(), &hp, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = local_train(&w, &toy(), &hp, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, w);
    }
}
