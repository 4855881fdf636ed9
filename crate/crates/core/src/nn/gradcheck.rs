//! Central finite-difference check of [`loss_and_gradients`] in double
//! precision.

use super::loss::{loss_and_gradients, TrainingSample};
use super::params::{Layout, NetConfig};

#[derive(Clone, Debug)]
pub struct TensorCheck {
    pub name: String,
    /// ‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖).
    pub relative_error: f64,
    pub analytic_norm: f64,
}

/// Compares analytic gradients with central differences of step `h` for
/// every element of every tensor.
pub fn check_gradients(
    cfg: &NetConfig,
    params: &[Vec<f64>],
    batch: &[TrainingSample],
    weight_decay: f64,
    h: f64,
) -> Vec<TensorCheck> {
    let layout = Layout::new(cfg);
    let (_, analytic) = loss_and_gradients(cfg, &layout, params, batch, weight_decay);
    let mut work: Vec<Vec<f64>> = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for (t, spec) in layout.specs.iter().enumerate() {
        let mut diff = 0.0;
        let mut a_norm = 0.0;
        let mut n_norm = 0.0;
        for i in 0..work[t].len() {
            let orig = work[t][i];
            work[t][i] = orig + h;
            let plus = loss_and_gradients(cfg, &layout, &work, batch, weight_decay).0.total;
            work[t][i] = orig - h;
            let minus = loss_and_gradients(cfg, &layout, &work, batch, weight_decay).0.total;
            work[t][i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[t][i];
            diff += (a - numeric).powi(2);
            a_norm += a * a;
            n_norm += numeric * numeric;
        }
        let denom = a_norm.sqrt().max(n_norm.sqrt());
        let relative_error = if denom == 0.0 { 0.0 } else { diff.sqrt() / denom };
        out.push(TensorCheck { name: spec.name.clone(), relative_error, analytic_norm: a_norm.sqrt() });
    }
    out
}
