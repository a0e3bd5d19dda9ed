use rand::Rng;

use super::knowledge::{KnowledgeBuffer, KnowledgeTuple};
use super::label::ApLabel;
use super::SapError;
use crate::agents::{ActionSpace, ActionValue};
use crate::numkit::{adam_step, cross_entropy_with_l2, prob_class1, Activation, AdamState, DenseMatrix, LayerSpec, Mlp, NumError};

/// Binary classifier `E(s, a)` over concatenated state and action encoding.
///
/// The network ends in two linear logits; class 1 is "permissible". An exact
/// 0.5 tie counts as permissible.
#[derive(Debug, Clone)]
pub struct ApPredictor {
    net: Mlp,
    space: ActionSpace,
    state_dim: usize,
    lambda: f64,
    lr: f64,
    adam: AdamState,
    vacc_history: Vec<(u64, f64)>,
}

impl ApPredictor {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        space: ActionSpace,
        hidden: &[usize],
        lambda: f64,
        lr: f64,
        rng: &mut R,
    ) -> Result<Self, SapError> {
        let mut specs: Vec<LayerSpec> = hidden.iter().map(|&w| LayerSpec::new(w, Activation::Relu)).collect();
        specs.push(LayerSpec::new(2, Activation::Linear));
        let mut net = Mlp::new(state_dim + space.encoding_dim(), &specs, rng)?;
        // zero logits: an untrained predictor calls every action permissible
        let out = net.layers_mut().last_mut().expect("output layer");
        out.weights = DenseMatrix::zeros(out.weights.rows(), out.weights.cols());
        out.bias.fill(0.0);
        Self::from_net(net, state_dim, space, lambda, lr)
    }

    pub fn from_net(net: Mlp, state_dim: usize, space: ActionSpace, lambda: f64, lr: f64) -> Result<Self, SapError> {
        if net.input_dim() != state_dim + space.encoding_dim() || net.output_dim() != 2 {
            return Err(SapError::Config(format!(
                "predictor net maps {} -> {}, expected {} -> 2",
                net.input_dim(),
                net.output_dim(),
                state_dim + space.encoding_dim()
            )));
        }
        let adam = AdamState::for_net(&net);
        Ok(Self {
            net,
            space,
            state_dim,
            lambda,
            lr,
            adam,
            vacc_history: Vec::new(),
        })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn space(&self) -> ActionSpace {
        self.space
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn vacc_history(&self) -> &[(u64, f64)] {
        &self.vacc_history
    }

    pub fn last_vacc(&self) -> Option<f64> {
        self.vacc_history.last().map(|&(_, v)| v)
    }

    fn input_matrix<'a>(&self, rows: impl Iterator<Item = (&'a [f64], &'a ActionValue)>) -> Result<DenseMatrix, SapError> {
        let width = self.state_dim + self.space.encoding_dim();
        let mut data = Vec::new();
        let mut n = 0;
        for (s, a) in rows {
            if s.len() != self.state_dim {
                return Err(SapError::Num(NumError::Shape(format!(
                    "state has {} features, predictor expects {}",
                    s.len(),
                    self.state_dim
                ))));
            }
            if !self.space.contains(a) {
                return Err(SapError::Contract(format!("action {a:?} is outside {:?}", self.space)));
            }
            data.extend_from_slice(s);
            self.space.encode_into(a, &mut data);
            n += 1;
        }
        Ok(DenseMatrix::from_vec(n, width, data)?)
    }

    /// Probability that each action is permissible in `state`.
    pub fn prob_permissible(&self, state: &[f64], actions: &[ActionValue]) -> Result<Vec<f64>, SapError> {
        let x = self.input_matrix(actions.iter().map(|a| (state, a)))?;
        let out = self.net.predict_batch(&x)?;
        Ok((0..out.rows()).map(|r| prob_class1([out.get(r, 0), out.get(r, 1)])).collect())
    }

    pub fn predict(&self, state: &[f64], action: &ActionValue) -> Result<ApLabel, SapError> {
        Ok(self.predict_many(state, std::slice::from_ref(action))?[0])
    }

    pub fn predict_many(&self, state: &[f64], actions: &[ActionValue]) -> Result<Vec<ApLabel>, SapError> {
        Ok(self
            .prob_permissible(state, actions)?
            .into_iter()
            .map(|p| ApLabel::from_bool(p >= 0.5))
            .collect())
    }

    /// Mean cross-entropy plus `(lambda / 2) |theta|^2` on `dataset`, without
    /// updating.
    pub fn loss(&self, dataset: &[KnowledgeTuple]) -> Result<f64, SapError> {
        let x = self.input_matrix(dataset.iter().map(|t| (t.state.as_slice(), &t.action)))?;
        let out = self.net.predict_batch(&x)?;
        let n = dataset.len().max(1) as f64;
        let ce: f64 = dataset
            .iter()
            .enumerate()
            .map(|(r, t)| cross_entropy_with_l2([out.get(r, 0), out.get(r, 1)], t.label.class(), 0.0, 0.0).0)
            .sum();
        Ok(ce / n + 0.5 * self.lambda * self.net.sum_squares())
    }

    /// One full-batch Adam step on the regularized cross-entropy. Returns the
    /// loss before the step.
    pub fn train(&mut self, dataset: &[KnowledgeTuple]) -> Result<f64, SapError> {
        if dataset.is_empty() {
            return Err(SapError::Contract("predictor training needs a non-empty dataset".into()));
        }
        let x = self.input_matrix(dataset.iter().map(|t| (t.state.as_slice(), &t.action)))?;
        let out = self.net.forward_batch(&x)?;
        let n = dataset.len() as f64;
        let mut grad = DenseMatrix::zeros(dataset.len(), 2);
        let mut ce = 0.0;
        for (r, t) in dataset.iter().enumerate() {
            let (l, g) = cross_entropy_with_l2([out.get(r, 0), out.get(r, 1)], t.label.class(), 0.0, 0.0);
            ce += l;
            grad.set(r, 0, g[0] / n);
            grad.set(r, 1, g[1] / n);
        }
        let loss = ce / n + 0.5 * self.lambda * self.net.sum_squares();
        let (mut grads, _) = self.net.backward_batch(&grad)?;
        grads.add_l2(&self.net, self.lambda);
        adam_step(&mut self.adam, &mut self.net, &grads, self.lr)?;
        Ok(loss)
    }

    /// Fraction of `tuples` whose predicted class matches the label.
    pub fn accuracy<'a>(&self, tuples: impl IntoIterator<Item = &'a KnowledgeTuple>) -> Result<Option<f64>, SapError> {
        let tuples: Vec<&KnowledgeTuple> = tuples.into_iter().collect();
        if tuples.is_empty() {
            return Ok(None);
        }
        let x = self.input_matrix(tuples.iter().map(|t| (t.state.as_slice(), &t.action)))?;
        let out = self.net.predict_batch(&x)?;
        let hits = tuples
            .iter()
            .enumerate()
            .filter(|(r, t)| ApLabel::from_bool(prob_class1([out.get(*r, 0), out.get(*r, 1)]) >= 0.5) == t.label)
            .count();
        Ok(Some(hits as f64 / tuples.len() as f64))
    }

    /// Holdout accuracy on up to `sample_size` holdout tuples, appended to the
    /// history at `step`. `None` when the holdout lane is empty.
    pub fn validate<R: Rng + ?Sized>(
        &mut self,
        kb: &KnowledgeBuffer,
        sample_size: usize,
        step: u64,
        rng: &mut R,
    ) -> Result<Option<f64>, SapError> {
        let sample = kb.sample_holdout(sample_size, rng);
        let acc = self.accuracy(sample)?;
        if let Some(a) = acc {
            self.vacc_history.push((step, a));
        }
        Ok(acc)
    }
}

/// Training runs through the warmup (`t <= t_e`) and afterwards whenever the
/// latest validation accuracy is missing or below `delta_acc`.
pub fn should_train_predictor(vacc_history: &[(u64, f64)], delta_acc: f64, t: u64, t_e: u64) -> bool {
    if t <= t_e {
        return true;
    }
    match vacc_history.last() {
        None => true,
        Some(&(_, v)) => v < delta_acc,
    }
}
