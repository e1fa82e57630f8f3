//! Central finite-difference verification of reverse-mode gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Graph, NumericsError, ParamSet, Var};

/// Denominator floor of [`relative_error`]. Coordinates whose gradients are
/// smaller than this are judged on absolute error divided by the floor, which
/// keeps floating-point cancellation in the difference quotient (about
/// `1e-16 * abs(f) / step`) from dominating near-zero gradients.
pub const REL_ERR_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub coords_checked: usize,
    /// `name[index]` of the worst coordinate.
    pub worst: String,
    pub pass: bool,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// Checks every coordinate of every parameter.
pub fn gradient_check<F, E>(params: &ParamSet, f: F, step: f64, tol: f64) -> Result<GradCheckReport, E>
where
    F: Fn(&mut Graph) -> Result<Var, E>,
    E: From<NumericsError>,
{
    check(params, f, step, tol, None)
}

/// Checks at most `per_param` randomly chosen coordinates of each parameter.
pub fn gradient_check_sampled<F, E>(
    params: &ParamSet,
    f: F,
    step: f64,
    tol: f64,
    per_param: usize,
    seed: u64,
) -> Result<GradCheckReport, E>
where
    F: Fn(&mut Graph) -> Result<Var, E>,
    E: From<NumericsError>,
{
    check(params, f, step, tol, Some((per_param, seed)))
}

fn eval<F, E>(params: &ParamSet, f: &F) -> Result<f64, E>
where
    F: Fn(&mut Graph) -> Result<Var, E>,
    E: From<NumericsError>,
{
    let mut g = Graph::with_params(params);
    let out = f(&mut g)?;
    let v = g.value(out);
    if !v.is_scalar() {
        return Err(NumericsError::Contract(format!("checked function returned shape {:?}", v.shape())).into());
    }
    let v = v.item();
    if !v.is_finite() {
        return Err(NumericsError::NonFinite("checked function value".into()).into());
    }
    Ok(v)
}

fn check<F, E>(
    params: &ParamSet,
    f: F,
    step: f64,
    tol: f64,
    sampling: Option<(usize, u64)>,
) -> Result<GradCheckReport, E>
where
    F: Fn(&mut Graph) -> Result<Var, E>,
    E: From<NumericsError>,
{
    if step <= 0.0 {
        return Err(NumericsError::Contract("finite-difference step must be positive".into()).into());
    }
    let analytic = {
        let mut g = Graph::with_params(params);
        let loss = f(&mut g)?;
        g.backward(loss)?.into_params()
    };
    for (p, a) in params.iter().zip(&analytic) {
        if !a.all_finite() {
            return Err(NumericsError::NonFinite(format!("gradient of `{}`", p.name)).into());
        }
    }

    let mut rng = sampling.map(|(_, seed)| ChaCha8Rng::seed_from_u64(seed));
    let mut work = params.clone();
    let mut report =
        GradCheckReport { max_rel_err: 0.0, max_abs_err: 0.0, coords_checked: 0, worst: String::new(), pass: true };
    for id in params.ids() {
        let n = params.get(id).value.len();
        let coords: Vec<usize> = match (sampling, rng.as_mut()) {
            (Some((k, _)), Some(r)) if k < n => sample(r, n, k).into_vec(),
            _ => (0..n).collect(),
        };
        for j in coords {
            let orig = work.get(id).value.data()[j];
            work.get_mut(id).value.data_mut()[j] = orig + step;
            let plus = eval(&work, &f)?;
            work.get_mut(id).value.data_mut()[j] = orig - step;
            let minus = eval(&work, &f)?;
            work.get_mut(id).value.data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic[id.index()].data()[j];
            let rel = relative_error(a, numeric);
            report.coords_checked += 1;
            report.max_abs_err = report.max_abs_err.max((a - numeric).abs());
            if rel > report.max_rel_err || report.worst.is_empty() {
                report.max_rel_err = rel;
                report.worst = format!("{}[{j}]", params.get(id).name);
            }
        }
    }
    report.pass = report.max_rel_err < tol;
    Ok(report)
}
