//! Stochastic regularization: action noise whose scale decays along the
//! mini-batch axis, so every discriminator batch spans a spectrum from
//! strongly perturbed to nearly clean actions.

use rand::Rng;
use rand_distr::StandardNormal;

use super::losses::DiscBatch;
use crate::envs::ActionSpace;
use crate::error::{Error, Result};

/// Decay shape of the per-batch schedule. Both shapes are monotone
/// non-increasing and hit the endpoints exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SrShape {
    #[default]
    Linear,
    Geometric,
}

#[derive(Debug, Clone, Copy)]
pub struct SrConfig {
    pub sigma_start: f64,
    pub sigma_end: f64,
    pub shape: SrShape,
}

/// Per-sample noise standard deviations for a batch of size `batch`.
pub fn noise_sigmas(batch: usize, sigma_start: f64, sigma_end: f64, shape: SrShape) -> Result<Vec<f64>> {
    if batch == 0 {
        return Err(Error::config("noise schedule needs batch >= 1"));
    }
    if !(0.0..=1.0).contains(&sigma_start) || !(0.0..=1.0).contains(&sigma_end) {
        return Err(Error::config(format!(
            "sigma_start ({sigma_start}) and sigma_end ({sigma_end}) must be in [0,1]"
        )));
    }
    if sigma_end > sigma_start {
        return Err(Error::config(format!(
            "sigma_end ({sigma_end}) must not exceed sigma_start ({sigma_start})"
        )));
    }
    if batch == 1 {
        return Ok(vec![sigma_start]);
    }
    // Convex-combination / power forms with the last element pinned, so
    // both endpoints are hit exactly in floating point.
    match shape {
        SrShape::Linear => Ok((0..batch)
            .map(|i| {
                if i == batch - 1 {
                    return sigma_end;
                }
                let t = i as f64 / (batch - 1) as f64;
                sigma_start * (1.0 - t) + sigma_end * t
            })
            .collect()),
        SrShape::Geometric => {
            if sigma_start == 0.0 {
                return Ok(vec![0.0; batch]);
            }
            if sigma_end == 0.0 {
                return Err(Error::config(
                    "geometric decay needs sigma_end > 0 (use linear to reach exactly zero)",
                ));
            }
            let ratio = sigma_end / sigma_start;
            Ok((0..batch)
                .map(|i| {
                    if i == batch - 1 {
                        return sigma_end;
                    }
                    sigma_start * ratio.powf(i as f64 / (batch - 1) as f64)
                })
                .collect())
        }
    }
}

/// Returns a copy of the batch with perturbed action encodings.
///
/// Continuous: adds `N(0, (sigma_i * half_range)^2)` per dimension and
/// clips to the action bounds. Discrete: with probability `min(sigma_i, 1)`
/// replaces the one-hot encoding with that of a uniformly random legal
/// action. The RNG is consumed at a fixed rate regardless of sigma values,
/// so schedules can be compared draw-for-draw.
pub fn perturb_actions<R: Rng + ?Sized>(
    batch: &DiscBatch,
    sigmas: &[f64],
    space: &ActionSpace,
    rng: &mut R,
) -> Result<DiscBatch> {
    if sigmas.len() != batch.len() {
        return Err(Error::shape(batch.len(), sigmas.len(), "noise schedule length"));
    }
    let mut out = batch.clone();
    match space {
        ActionSpace::Continuous { low, high } => {
            let half: Vec<f64> = low.iter().zip(high).map(|(l, h)| (h - l) / 2.0).collect();
            for (i, enc) in out.act_enc.iter_mut().enumerate() {
                for d in 0..enc.len() {
                    let z: f64 = rng.sample(StandardNormal);
                    enc[d] = (enc[d] + sigmas[i] * half[d] * z).clamp(low[d], high[d]);
                }
            }
        }
        ActionSpace::Discrete { n } => {
            for (i, enc) in out.act_enc.iter_mut().enumerate() {
                let u: f64 = rng.gen();
                let replace = u < sigmas[i].min(1.0);
                let mask = &batch.masks[i];
                let legal: Vec<usize> =
                    (0..*n).filter(|&a| mask.is_empty() || mask[a]).collect();
                if legal.is_empty() {
                    return Err(Error::state("empty legal mask in perturbation"));
                }
                let pick = legal[rng.gen_range(0..legal.len())];
                if replace {
                    enc.iter_mut().for_each(|x| *x = 0.0);
                    enc[pick] = 1.0;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::Action;
    use crate::irl::Discriminator;

    #[test]
    fn linear_schedule_endpoints_and_midpoint() {
        let s = noise_sigmas(3, 0.9, 0.08, SrShape::Linear).unwrap();
        assert_eq!(s[0], 0.9);
        assert!((s[1] - 0.49).abs() < 1e-12);
        assert_eq!(s[2], 0.08);
    }

    #[test]
    fn degenerate_schedule_is_all_zero() {
        let s = noise_sigmas(8, 0.0, 0.0, SrShape::Linear).unwrap();
        assert!(s.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn schedules_are_monotone_non_increasing() {
        for shape in [SrShape::Linear, SrShape::Geometric] {
            for batch in [1usize, 2, 7, 64, 256] {
                let s = noise_sigmas(batch, 0.9, 0.08, shape).unwrap();
                assert_eq!(s.len(), batch);
                assert_eq!(s[0], 0.9);
                if batch > 1 {
                    assert!((s[batch - 1] - 0.08).abs() < 1e-12);
                }
                for w in s.windows(2) {
                    assert!(w[1] <= w[0] + 1e-15);
                }
            }
        }
    }

    #[test]
    fn invalid_ranges_rejected() {
        assert!(noise_sigmas(0, 0.5, 0.1, SrShape::Linear).is_err());
        assert!(noise_sigmas(4, 1.5, 0.1, SrShape::Linear).is_err());
        assert!(noise_sigmas(4, 0.1, 0.5, SrShape::Linear).is_err());
        assert!(noise_sigmas(4, 0.5, 0.0, SrShape::Geometric).is_err());
    }

    fn continuous_batch(n: usize, value: f64) -> DiscBatch {
        DiscBatch {
            obs: vec![vec![0.0]; n],
            act_enc: vec![vec![value]; n],
            logpi: vec![0.0; n],
            masks: vec![Vec::new(); n],
        }
    }

    #[test]
    fn zero_sigma_leaves_batch_unchanged() {
        let space = ActionSpace::Continuous { low: vec![-2.0], high: vec![2.0] };
        let batch = continuous_batch(32, 0.7);
        let mut rng = crate::rng::stream(0, "sr");
        let out = perturb_actions(&batch, &vec![0.0; 32], &space, &mut rng).unwrap();
        assert_eq!(out.act_enc, batch.act_enc);

        let space_d = ActionSpace::Discrete { n: 3 };
        let disc = Discriminator::new(1, &[4], &space_d, 0).unwrap();
        let batch_d = DiscBatch {
            obs: vec![vec![0.0]; 16],
            act_enc: vec![disc.encode_action(&Action::Discrete(1)).unwrap(); 16],
            logpi: vec![0.0; 16],
            masks: vec![vec![true, true, true]; 16],
        };
        let out = perturb_actions(&batch_d, &vec![0.0; 16], &space_d, &mut rng).unwrap();
        assert_eq!(out.act_enc, batch_d.act_enc);
    }

    #[test]
    fn continuous_noise_std_is_sigma_times_half_range() {
        // sigma 0.5 with half-range 2 -> std 1.0; Monte Carlo within 2%.
        let space = ActionSpace::Continuous { low: vec![-200.0], high: vec![200.0] };
        let n = 100_000;
        let batch = continuous_batch(n, 0.0);
        let sigmas = vec![0.5 / 100.0; n]; // scale down so clipping never binds
        let mut rng = crate::rng::stream(1, "sr");
        let out = perturb_actions(&batch, &sigmas, &space, &mut rng).unwrap();
        let mean: f64 = out.act_enc.iter().map(|e| e[0]).sum::<f64>() / n as f64;
        let var: f64 =
            out.act_enc.iter().map(|e| (e[0] - mean) * (e[0] - mean)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        let want = 0.5 / 100.0 * 200.0;
        assert!((std - want).abs() / want < 0.02, "std {std} vs {want}");
    }

    #[test]
    fn discrete_full_noise_is_uniform_over_legal() {
        let space = ActionSpace::Discrete { n: 3 };
        let disc = Discriminator::new(1, &[4], &space, 0).unwrap();
        let n = 10_000;
        let batch = DiscBatch {
            obs: vec![vec![0.0]; n],
            act_enc: vec![disc.encode_action(&Action::Discrete(0)).unwrap(); n],
            logpi: vec![0.0; n],
            masks: vec![vec![true, true, true]; n],
        };
        let mut rng = crate::rng::stream(2, "sr");
        let out = perturb_actions(&batch, &vec![1.0; n], &space, &mut rng).unwrap();
        let mut counts = [0usize; 3];
        for enc in &out.act_enc {
            counts[enc.iter().position(|&x| x == 1.0).unwrap()] += 1;
        }
        // Chi-squared, 2 dof, alpha = 0.001 -> critical value 13.82.
        let expected = n as f64 / 3.0;
        let chi2: f64 =
            counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 13.82, "chi2 {chi2} counts {counts:?}");
    }

    #[test]
    fn discrete_respects_legal_mask() {
        let space = ActionSpace::Discrete { n: 3 };
        let disc = Discriminator::new(1, &[4], &space, 0).unwrap();
        let n = 2000;
        let batch = DiscBatch {
            obs: vec![vec![0.0]; n],
            act_enc: vec![disc.encode_action(&Action::Discrete(1)).unwrap(); n],
            logpi: vec![0.0; n],
            masks: vec![vec![false, true, true]; n],
        };
        let mut rng = crate::rng::stream(3, "sr");
        let out = perturb_actions(&batch, &vec![1.0; n], &space, &mut rng).unwrap();
        assert!(out.act_enc.iter().all(|e| e[0] == 0.0));
    }
}
