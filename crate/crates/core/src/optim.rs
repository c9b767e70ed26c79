//! First-order update rules shared by the solvers.

/// Adam hyperparameters. Defaults: `lr = 1e-3`, `beta1 = 0.9`,
/// `beta2 = 0.999`, `eps = 1e-8`, no bias correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Divide the moments by `1 - beta^t` before the update.
    pub bias_correction: bool,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            bias_correction: false,
        }
    }
}

/// Moment accumulators for one parameter vector.
///
/// The rule applied per coordinate is
/// `m <- b1 m + (1 - b1) g`, `v <- b2 v + (1 - b2) g^2`,
/// `theta <- theta - lr * m / (sqrt(v) + eps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub hyper: AdamParams,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(len: usize, hyper: AdamParams) -> Self {
        Self {
            hyper,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Starts a new step. Coordinates updated afterwards with
    /// [`AdamState::update`] share this step count.
    pub fn begin_step(&mut self) {
        self.t += 1;
    }

    /// Applies the rule to coordinate `pos` only; all other moments are left
    /// untouched.
    #[inline]
    pub fn update(&mut self, pos: usize, theta: &mut f64, grad: f64) {
        let h = &self.hyper;
        let m = &mut self.m[pos];
        let v = &mut self.v[pos];
        *m = h.beta1 * *m + (1.0 - h.beta1) * grad;
        *v = h.beta2 * *v + (1.0 - h.beta2) * grad * grad;
        let (m_hat, v_hat) = if h.bias_correction {
            let t = self.t.max(1) as i32;
            (*m / (1.0 - h.beta1.powi(t)), *v / (1.0 - h.beta2.powi(t)))
        } else {
            (*m, *v)
        };
        *theta -= h.lr * m_hat / (v_hat.sqrt() + h.eps);
    }

    /// Dense step over the whole vector.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        assert_eq!(theta.len(), self.m.len(), "parameter length");
        assert_eq!(grad.len(), self.m.len(), "gradient length");
        self.begin_step();
        for (pos, (th, &g)) in theta.iter_mut().zip(grad).enumerate() {
            self.update(pos, th, g);
        }
    }
}

/// Strategy for the full-gradient solver: given parameters, their gradient
/// and objective value, move the parameters. `eval` computes the objective
/// at trial parameters for rules that need it.
pub trait StepRule {
    fn step(
        &mut self,
        params: &mut [f64],
        grad: &[f64],
        objective: f64,
        eval: &mut dyn FnMut(&[f64]) -> f64,
    );
}

impl StepRule for AdamState {
    fn step(&mut self, params: &mut [f64], grad: &[f64], _: f64, _: &mut dyn FnMut(&[f64]) -> f64) {
        AdamState::step(self, params, grad);
    }
}

/// Plain gradient descent with step halving until the objective decreases.
/// An accepted step doubles the trial size for the next call; after
/// `max_halvings` failures the parameters are left unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct Backtracking {
    pub step_size: f64,
    pub max_halvings: u32,
}

impl Default for Backtracking {
    fn default() -> Self {
        Self {
            step_size: 1.0,
            max_halvings: 30,
        }
    }
}

impl StepRule for Backtracking {
    fn step(
        &mut self,
        params: &mut [f64],
        grad: &[f64],
        objective: f64,
        eval: &mut dyn FnMut(&[f64]) -> f64,
    ) {
        let mut trial = vec![0.0; params.len()];
        let mut size = self.step_size;
        for _ in 0..=self.max_halvings {
            for ((t, &p), &g) in trial.iter_mut().zip(params.iter()).zip(grad) {
                *t = p - size * g;
            }
            let f = eval(&trial);
            if f < objective {
                params.copy_from_slice(&trial);
                self.step_size = size * 2.0;
                return;
            }
            size *= 0.5;
        }
        self.step_size = size;
    }
}
