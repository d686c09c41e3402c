//! First-order optimizers with decoupled weight decay and an l1 subgradient.

use super::{NetParams, NetSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptAlgo {
    Sgd,
    Adam,
}

/// Optimizer state. Weight decay multiplies weight matrices by
/// `1 - lr * weight_decay` before the gradient update; the l1 coefficient
/// adds `l1 * sign(w)` to weight gradients (`sign(0) = 0`). Neither touches
/// biases.
#[derive(Debug, Clone)]
pub struct OptState {
    pub algo: OptAlgo,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub l1: f64,
    pub step_count: u64,
    m: Option<NetParams>,
    v: Option<NetParams>,
}

impl OptState {
    pub fn sgd(lr: f64) -> Self {
        OptState {
            algo: OptAlgo::Sgd,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            l1: 0.0,
            step_count: 0,
            m: None,
            v: None,
        }
    }

    pub fn adam(lr: f64) -> Self {
        OptState {
            algo: OptAlgo::Adam,
            ..OptState::sgd(lr)
        }
    }

    pub fn with_weight_decay(mut self, wd: f64) -> Self {
        self.weight_decay = wd;
        self
    }

    pub fn with_l1(mut self, l1: f64) -> Self {
        self.l1 = l1;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::invalid("learning rate must be > 0"));
        }
        if self.weight_decay < 0.0 || self.l1 < 0.0 {
            return Err(Error::invalid("regularization coefficients must be >= 0"));
        }
        Ok(())
    }

    /// Applies one update in place. Non-finite gradients abort with a
    /// divergence error before any parameter is touched.
    pub fn step(&mut self, spec: &NetSpec, params: &mut NetParams, grads: &NetParams) -> Result<()> {
        self.validate()?;
        params.check_shapes(spec)?;
        grads.check_shapes(spec)?;
        if !grads.is_finite() {
            return Err(Error::Diverged(format!(
                "non-finite gradient at optimizer step {}",
                self.step_count + 1
            )));
        }

        if self.weight_decay > 0.0 {
            let factor = 1.0 - self.lr * self.weight_decay;
            for w in &mut params.weights {
                for v in w.data_mut() {
                    *v *= factor;
                }
            }
        }

        self.step_count += 1;
        match self.algo {
            OptAlgo::Sgd => self.sgd_update(params, grads),
            OptAlgo::Adam => self.adam_update(spec, params, grads),
        }
        Ok(())
    }

    #[inline]
    fn effective_weight_grad(&self, g: f64, w: f64) -> f64 {
        if self.l1 > 0.0 && w != 0.0 {
            g + self.l1 * w.signum()
        } else {
            g
        }
    }

    fn sgd_update(&self, params: &mut NetParams, grads: &NetParams) {
        for (w, g) in params.weights.iter_mut().zip(&grads.weights) {
            for (wv, &gv) in w.data_mut().iter_mut().zip(g.data()) {
                let eff = self.effective_weight_grad(gv, *wv);
                *wv -= self.lr * eff;
            }
        }
        for (b, g) in params.biases.iter_mut().zip(&grads.biases) {
            for (bv, &gv) in b.iter_mut().zip(g) {
                *bv -= self.lr * gv;
            }
        }
    }

    fn adam_update(&mut self, spec: &NetSpec, params: &mut NetParams, grads: &NetParams) {
        if self.m.is_none() {
            self.m = Some(NetParams::zeros(spec));
            self.v = Some(NetParams::zeros(spec));
        }
        let (beta1, beta2, eps, lr, l1) = (self.beta1, self.beta2, self.eps, self.lr, self.l1);
        let t = self.step_count as f64;
        let bc1 = 1.0 - beta1.powf(t);
        let bc2 = 1.0 - beta2.powf(t);
        let m = self.m.as_mut().unwrap();
        let v = self.v.as_mut().unwrap();

        let update = |pv: &mut f64, gv: f64, mv: &mut f64, vv: &mut f64| {
            *mv = beta1 * *mv + (1.0 - beta1) * gv;
            *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
            let m_hat = *mv / bc1;
            let v_hat = *vv / bc2;
            *pv -= lr * m_hat / (v_hat.sqrt() + eps);
        };

        for l in 0..params.weights.len() {
            let pw = params.weights[l].data_mut();
            let gw = grads.weights[l].data();
            let mw = m.weights[l].data_mut();
            let vw = v.weights[l].data_mut();
            for i in 0..pw.len() {
                let mut gv = gw[i];
                if l1 > 0.0 && pw[i] != 0.0 {
                    gv += l1 * pw[i].signum();
                }
                update(&mut pw[i], gv, &mut mw[i], &mut vw[i]);
            }
        }
        for l in 0..params.biases.len() {
            for i in 0..params.biases[l].len() {
                update(
                    &mut params.biases[l][i],
                    grads.biases[l][i],
                    &mut m.biases[l][i],
                    &mut v.biases[l][i],
                );
            }
        }
    }
}
