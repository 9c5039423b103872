//! Central finite-difference gradient oracle.

use super::{Network, ParamGrads};
use crate::error::{Error, Result};

/// Compares analytic gradients against central finite differences of
/// `loss_fn` over every parameter of `net`, returning the maximum relative
/// error. `loss_fn` must be deterministic; parameters are restored afterward.
///
/// Relative error per parameter is `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn finite_diff_check<L>(
    net: &mut Network,
    mut loss_fn: L,
    analytic: &ParamGrads,
    eps: f64,
) -> Result<f64>
where
    L: FnMut(&mut Network) -> f64,
{
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::config(format!("finite-difference eps must be positive, got {eps}")));
    }
    let flat_analytic = analytic.to_flat();
    if flat_analytic.len() != net.param_count() {
        return Err(Error::shape(net.param_count(), flat_analytic.len(), "analytic gradients"));
    }
    let mut max_rel = 0.0f64;
    for idx in 0..net.param_count() {
        let orig = net.param(idx);
        net.set_param(idx, orig + eps);
        let plus = loss_fn(net);
        net.set_param(idx, orig - eps);
        let minus = loss_fn(net);
        net.set_param(idx, orig);
        let numeric = (plus - minus) / (2.0 * eps);
        let a = flat_analytic[idx];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        if rel > max_rel {
            max_rel = rel;
        }
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::init_network;

    #[test]
    fn linear_net_quadratic_loss_is_exact() {
        // Single identity-activation layer, quadratic loss: central
        // differences are exact for polynomials of degree <= 2.
        let mut net = init_network(&[2, 1], 0).unwrap();
        let x = [0.7, -1.3];
        let loss = |n: &mut Network| {
            let y = n.forward(&x).unwrap()[0];
            y * y
        };
        net.forward(&x).unwrap();
        let y0 = net.apply(&x).unwrap()[0];
        net.forward(&x).unwrap();
        let analytic = net.backward(&[2.0 * y0]).unwrap();
        let err = finite_diff_check(&mut net, loss, &analytic, 1e-5).unwrap();
        assert!(err < 1e-8, "max relative error {err}");
    }

    #[test]
    fn tanh_net_passes_at_1e4() {
        let mut net = init_network(&[4, 16, 16, 1], 2).unwrap();
        let x = [0.1, -0.6, 0.9, 0.3];
        net.forward(&x).unwrap();
        let analytic = net.backward(&[1.0]).unwrap();
        let err =
            finite_diff_check(&mut net, |n| n.forward(&x).unwrap()[0], &analytic, 1e-5).unwrap();
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn zero_eps_rejected() {
        let mut net = init_network(&[2, 1], 0).unwrap();
        let analytic = ParamGrads::zeros_like(&net);
        assert!(finite_diff_check(&mut net, |_| 0.0, &analytic, 0.0).is_err());
    }

    #[test]
    fn parameters_restored_after_check() {
        let mut net = init_network(&[3, 4, 1], 5).unwrap();
        let before = net.to_flat();
        let x = [0.2, 0.4, -0.1];
        net.forward(&x).unwrap();
        let analytic = net.backward(&[1.0]).unwrap();
        finite_diff_check(&mut net, |n| n.forward(&x).unwrap()[0], &analytic, 1e-5).unwrap();
        assert_eq!(net.to_flat(), before);
    }
}
