use super::params::ModelParams;
use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: ModelParams,
    pub v: ModelParams,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        AdamState { m: params.zeros_like(), v: params.zeros_like(), t: 0 }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<(), ModelError> {
    let shapes = |p: &ModelParams| p.tensors().iter().map(|t| t.shape.clone()).collect::<Vec<_>>();
    let expected = shapes(params);
    if shapes(grads) != expected || shapes(&state.m) != expected || shapes(&state.v) != expected {
        return Err(ModelError::ShapeMismatch("gradient or optimizer state does not match parameters".into()));
    }
    state.t += 1;
    let c1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let c2 = 1.0 - cfg.beta2.powi(state.t as i32);
    let g_all = grads.tensors();
    let m_all = state.m.tensors_mut();
    let v_all = state.v.tensors_mut();
    for (((p, g), m), v) in params.tensors_mut().into_iter().zip(g_all).zip(m_all).zip(v_all) {
        for i in 0..p.data.len() {
            let gi = g.data[i];
            m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * gi;
            v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * gi * gi;
            let mh = m.data[i] / c1;
            let vh = v.data[i] / c2;
            p.data[i] -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    fn small() -> ModelConfig {
        ModelConfig { n_frames: 2, h: 4, w: 4, stage: 1, c1: 2, num_blocks: 1, num_classes: 2, ..ModelConfig::default() }
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let cfg = small();
        let mut p = ModelParams::init(&cfg);
        let before = p.clone();
        let mut g = p.zeros_like();
        g.head_bias.data = vec![3.0, -0.5];
        let mut st = AdamState::new(&p);
        let ac = AdamConfig { lr: 0.01, ..AdamConfig::default() };
        adam_step(&mut p, &g, &mut st, &ac).unwrap();
        assert!((p.head_bias.data[0] - (before.head_bias.data[0] - 0.01)).abs() < 1e-9);
        assert!((p.head_bias.data[1] - (before.head_bias.data[1] + 0.01)).abs() < 1e-9);
        assert_eq!(p.head_weight, before.head_weight);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn mismatched_gradients_rejected() {
        let mut p = ModelParams::init(&small());
        let g = ModelParams::init(&ModelConfig { num_classes: 3, ..small() });
        let mut st = AdamState::new(&p);
        assert!(matches!(adam_step(&mut p, &g, &mut st, &AdamConfig::default()), Err(ModelError::ShapeMismatch(_))));
    }
}
