use nalgebra::Vector6;

/// Adam moment estimates for a 6-dimensional parameter step.
#[derive(Debug, Clone)]
pub struct Adam {
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    m: Vector6<f64>,
    v: Vector6<f64>,
    t: i32,
}

impl Adam {
    pub fn new(learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            m: Vector6::zeros(),
            v: Vector6::zeros(),
            t: 0,
        }
    }

    pub fn set_learning_rate(&mut self, learning_rate: f64) {
        self.learning_rate = learning_rate;
    }

    /// Parameter update (a descent step) for `gradient`.
    pub fn step(&mut self, gradient: &Vector6<f64>) -> Vector6<f64> {
        self.t += 1;
        self.m = self.m * self.beta1 + gradient * (1.0 - self.beta1);
        self.v = self.v * self.beta2 + gradient.component_mul(gradient) * (1.0 - self.beta2);
        let m_hat = self.m / (1.0 - self.beta1.powi(self.t));
        let v_hat = self.v / (1.0 - self.beta2.powi(self.t));
        -m_hat.zip_map(&v_hat, |m, v| {
            self.learning_rate * m / (v.sqrt() + self.epsilon)
        })
    }
}
