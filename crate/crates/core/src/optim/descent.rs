use super::params::{AlignStatus, OptimizerConfig, ParamVector, PoseParams};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Objective with matches frozen between calls to `refresh`.
pub(crate) trait Objective<T: Real> {
    /// Recomputes correspondences at `p` and returns the exact loss there.
    fn refresh(&mut self, p: &PoseParams<T>) -> Result<T>;
    /// Loss at `p` under the current correspondences.
    fn value(&self, p: &PoseParams<T>) -> T;
    fn gradient(&self, p: &PoseParams<T>) -> ParamVector<T>;
    /// Gradient of the smooth part alone, for objectives with a piecewise
    /// constant term.
    fn smooth_gradient(&self, _p: &PoseParams<T>) -> Option<ParamVector<T>> {
        None
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Outcome<T: Real> {
    pub params: PoseParams<T>,
    pub loss: T,
    pub initial_loss: T,
    pub iterations: usize,
    pub status: AlignStatus,
}

const MAX_HALVINGS: usize = 30;
const DIVERGENCE_FACTOR: f64 = 10.0;
const DIVERGENCE_STEPS: usize = 50;

/// Momentum descent with per-parameter adaptive steps (Adam moments) and
/// step halving whenever the frozen loss would increase. The multiplier
/// grows 4x per accepted step, never above 1.
pub(crate) fn descend<T: Real, O: Objective<T>>(
    obj: &mut O,
    init: PoseParams<T>,
    cfg: &OptimizerConfig,
    length_scale: T,
) -> Result<Outcome<T>> {
    cfg.validate()?;
    if !init.is_finite() {
        return Err(Error::NonFinite("initial pose"));
    }
    let mut p = init;
    p.clamp_scale(cfg.scale_min, cfg.scale_max);
    let initial = obj.refresh(&p)?;
    let mut current = obj.value(&p);
    let mut best = (p, initial);
    let mut window_start = initial;

    let ls = if cfg.optimize_scale { T::lit(cfg.log_scale_step) } else { T::zero() };
    let rot = T::lit(cfg.rotation_step);
    let tr = T::lit(cfg.translation_step) * length_scale;
    let steps = ParamVector::from_fn(|k, _| match k {
        0..=3 => rot,
        4..=6 => tr,
        _ => ls,
    });
    let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
    let eps = T::lit(1e-12);
    let mut m = ParamVector::<T>::zeros();
    let mut v = ParamVector::<T>::zeros();
    let (mut b1t, mut b2t) = (T::one(), T::one());
    let mut mult = T::one();
    let mut above = 0usize;
    let mut status = AlignStatus::MaxIterations;
    let mut iterations = 0;
    let mut fresh_moments = true;

    let mut g = obj.gradient(&p);
    if !cfg.optimize_scale {
        g.fixed_rows_mut::<3>(7).fill(T::zero());
    }
    if g.amax() <= T::lit(1e-13) {
        return Ok(Outcome { params: p, loss: initial, initial_loss: initial, iterations: 0, status: AlignStatus::Converged });
    }

    for it in 1..=cfg.max_iterations {
        iterations = it;
        m = m * b1 + g * (T::one() - b1);
        v = v * b2 + g.component_mul(&g) * (T::one() - b2);
        b1t *= b1;
        b2t *= b2;
        let dir = ParamVector::from_fn(|k, _| {
            let mh = m[k] / (T::one() - b1t);
            let vh = v[k] / (T::one() - b2t);
            mh / (vh.sqrt() + eps)
        })
        .component_mul(&steps);

        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let mut cand = PoseParams::from_vector(&(p.to_vector() - dir * mult))?;
            cand.clamp_scale(cfg.scale_min, cfg.scale_max);
            let val = obj.value(&cand);
            if val.is_finite_value() && val <= current {
                p = cand;
                current = val;
                accepted = true;
                mult = crate::scalar::min(T::one(), mult * T::lit(4.0));
                break;
            }
            mult *= T::lit(0.5);
        }

        if current > initial * T::lit(DIVERGENCE_FACTOR) {
            above += 1;
            if above >= DIVERGENCE_STEPS {
                status = AlignStatus::Diverged;
                break;
            }
        } else {
            above = 0;
        }

        if !accepted && fresh_moments {
            // Last resort: plain descent on the smooth part, which is a true
            // descent direction where the piecewise-constant part is flat.
            if let Some(mut gs) = obj.smooth_gradient(&p) {
                if !cfg.optimize_scale {
                    gs.fixed_rows_mut::<3>(7).fill(T::zero());
                }
                let d = gs.component_mul(&steps);
                let norm = d.amax();
                if norm > T::zero() {
                    let d = d / norm;
                    let mut h = T::one();
                    for _ in 0..MAX_HALVINGS {
                        let mut cand = PoseParams::from_vector(&(p.to_vector() - d * h))?;
                        cand.clamp_scale(cfg.scale_min, cfg.scale_max);
                        let val = obj.value(&cand);
                        if val.is_finite_value() && val < current {
                            p = cand;
                            current = val;
                            accepted = true;
                            break;
                        }
                        h *= T::lit(0.5);
                    }
                }
            }
        }
        if !accepted && !fresh_moments {
            // Momentum can point uphill; retry from plain adaptive steps
            // before treating a failed line search as convergence.
            m.fill(T::zero());
            v.fill(T::zero());
            b1t = T::one();
            b2t = T::one();
            mult = T::one();
            fresh_moments = true;
            continue;
        }
        fresh_moments = false;

        if it % cfg.refresh_period == 0 || !accepted || it == cfg.max_iterations {
            let loss = obj.refresh(&p)?;
            current = obj.value(&p);
            if loss < best.1 {
                best = (p, loss);
            }
            let drop = window_start - loss;
            if drop <= T::lit(cfg.tolerance_abs) + T::lit(cfg.tolerance_rel) * window_start.abs() {
                status = AlignStatus::Converged;
                break;
            }
            window_start = loss;
        }
        g = obj.gradient(&p);
        if !cfg.optimize_scale {
            g.fixed_rows_mut::<3>(7).fill(T::zero());
        }
    }
    Ok(Outcome { params: best.0, loss: best.1, initial_loss: initial, iterations, status })
}
