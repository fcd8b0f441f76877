//! Central finite-difference checking of tape gradients.

use crate::tape::{Graph, ParamId, ParamStore, Var};

/// Step used for the central differences.
pub const FD_STEP: f64 = 1e-5;
/// Gradients smaller than this are compared in absolute terms.
pub const ABS_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(ABS_FLOOR)
}

/// Compares the analytic gradient of `loss` against central differences for
/// every scalar of every parameter in `ids` (all parameters when `None`).
///
/// `loss` is rebuilt from scratch on each evaluation, so it must be a pure
/// function of the store contents.
pub fn check_gradients<F>(store: &mut ParamStore, ids: Option<&[ParamId]>, loss: F) -> GradCheckReport
where
    F: for<'a> Fn(&mut Graph<'a>) -> Var,
{
    let eval = |store: &ParamStore| {
        let mut g = Graph::new(store);
        let l = loss(&mut g);
        g.scalar(l)
    };
    let grads = {
        let mut g = Graph::new(store);
        let l = loss(&mut g);
        g.backward(l)
    };
    let ids: Vec<ParamId> = match ids {
        Some(ids) => ids.to_vec(),
        None => store.ids().collect(),
    };
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        checked: 0,
    };
    for id in ids {
        let dim = store.get(id).dim();
        for idx in ndarray::indices(dim) {
            let orig = store.get(id)[idx];
            store.get_mut(id)[idx] = orig + FD_STEP;
            let plus = eval(store);
            store.get_mut(id)[idx] = orig - FD_STEP;
            let minus = eval(store);
            store.get_mut(id)[idx] = orig;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let analytic = grads.get(id).map_or(0.0, |g| g[idx]);
            let err = relative_error(analytic, numeric);
            report.checked += 1;
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst_param = format!("{}{:?}", store.name(id), idx);
            }
        }
    }
    report
}
