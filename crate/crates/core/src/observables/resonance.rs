//! How often randomly placed, randomly detuned emitters in a small crystal
//! end up strongly coupled.
//!
//! Positions are uniform in a cube with a hard-core minimum distance,
//! frequencies are uniform over the inhomogeneous width, and all dipoles are
//! parallel to the z axis (aligned to the host lattice). A pair counts as
//! resonant when `|delta| < threshold_factor * |J(r)|`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{coupling_scale_mhz, MediumParams};

/// Samples drawn per independent random stream.
const BATCH: u64 = 10_000;
/// Hard-core rejection attempts per configuration before giving up.
const MAX_PLACEMENT_TRIES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResonanceEstimator {
    /// Fraction of configurations with at least one resonant pair; binomial
    /// standard error.
    HitCount,
    /// Pairs only: averages the exact detuning probability given the sampled
    /// geometry, which has much lower variance for rare events.
    Conditional,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResonanceMcParams {
    pub n_molecules: usize,
    /// Full width of the uniform frequency distribution, GHz.
    pub inhom_width_ghz: f64,
    /// Cube edge, nm.
    pub crystal_size_nm: f64,
    pub dipole_moment_debye: f64,
    pub medium: MediumParams,
    /// Resonant when |delta| < threshold_factor * |J|.
    pub threshold_factor: f64,
    /// Closest allowed approach of two emitters, nm.
    pub min_distance_nm: f64,
    pub n_samples: u64,
    pub seed: u64,
    pub estimator: ResonanceEstimator,
}

impl Default for ResonanceMcParams {
    fn default() -> Self {
        Self {
            n_molecules: 2,
            inhom_width_ghz: 100.0,
            crystal_size_nm: 500.0,
            dipole_moment_debye: 5.0,
            medium: MediumParams::default(),
            threshold_factor: 2.0,
            min_distance_nm: 1.0,
            n_samples: 1_000_000,
            seed: 0,
            estimator: ResonanceEstimator::HitCount,
        }
    }
}

impl ResonanceMcParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.n_molecules < 2 {
            return bad(format!("need at least 2 molecules, got {}", self.n_molecules));
        }
        if !(self.inhom_width_ghz >= 0.0 && self.inhom_width_ghz.is_finite()) {
            return bad(format!("inhomogeneous width must be >= 0, got {}", self.inhom_width_ghz));
        }
        if !(self.crystal_size_nm > 0.0 && self.crystal_size_nm.is_finite()) {
            return bad(format!("crystal size must be positive, got {}", self.crystal_size_nm));
        }
        if !(self.min_distance_nm > 0.0 && self.min_distance_nm < 0.5 * self.crystal_size_nm) {
            return bad(format!("minimum distance must be in (0, crystal_size/2), got {}", self.min_distance_nm));
        }
        if !(self.dipole_moment_debye > 0.0 && self.dipole_moment_debye.is_finite()) {
            return bad(format!("dipole moment must be positive, got {}", self.dipole_moment_debye));
        }
        if !(self.threshold_factor > 0.0 && self.threshold_factor.is_finite()) {
            return bad(format!("threshold factor must be positive, got {}", self.threshold_factor));
        }
        if self.n_samples < 10_000 {
            return bad(format!("need at least 10^4 samples, got {}", self.n_samples));
        }
        if self.estimator == ResonanceEstimator::Conditional && self.n_molecules != 2 {
            return bad("the conditional estimator handles pairs only".into());
        }
        self.medium.validate()
    }

    fn width_mhz(&self) -> f64 {
        self.inhom_width_ghz * 1e3
    }

    /// |J| for a separation `r` (nm) at polar angle with cosine `cos_t`.
    fn coupling(&self, r: f64, cos_t: f64) -> f64 {
        let mu2 = self.dipole_moment_debye * self.dipole_moment_debye;
        (coupling_scale_mhz(mu2, r, &self.medium) * (1.0 - 3.0 * cos_t * cos_t)).abs()
    }

    /// P(|f1 - f2| < x) for two frequencies uniform over the width.
    fn detuning_cdf(&self, x: f64) -> f64 {
        let w = self.width_mhz();
        if x >= w {
            1.0
        } else {
            let u = 1.0 - x / w;
            1.0 - u * u
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceEstimate {
    pub p_hat: f64,
    pub stderr: f64,
    pub n_samples: u64,
}

/// Monte Carlo estimate of the probability that a crystal holds at least one
/// resonant pair. Batches use independent ChaCha streams derived from the
/// seed, so the result is bit-identical for any thread count.
pub fn baseline_resonance_probability(params: &ResonanceMcParams) -> Result<ResonanceEstimate> {
    params.validate()?;
    let n_batches = params.n_samples.div_ceil(BATCH);
    let partial: Vec<(f64, f64)> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(b);
            let count = BATCH.min(params.n_samples - b * BATCH);
            run_batch(params, &mut rng, count)
        })
        .collect::<Result<_>>()?;
    // fixed-order reduction keeps the float sums reproducible
    let (s1, s2) = partial.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let n = params.n_samples as f64;
    let p_hat = s1 / n;
    let stderr = match params.estimator {
        ResonanceEstimator::HitCount => (p_hat * (1.0 - p_hat) / n).sqrt(),
        ResonanceEstimator::Conditional => ((s2 / n - p_hat * p_hat).max(0.0) / (n - 1.0)).sqrt(),
    };
    Ok(ResonanceEstimate { p_hat, stderr, n_samples: params.n_samples })
}

fn run_batch(p: &ResonanceMcParams, rng: &mut ChaCha8Rng, count: u64) -> Result<(f64, f64)> {
    let w = p.width_mhz();
    let mut pos = vec![[0.0f64; 3]; p.n_molecules];
    let mut freq = vec![0.0f64; p.n_molecules];
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..count {
        place(p, rng, &mut pos)?;
        let value = match p.estimator {
            ResonanceEstimator::Conditional => {
                let (r, cos_t) = separation(&pos[0], &pos[1]);
                p.detuning_cdf(p.threshold_factor * p.coupling(r, cos_t))
            }
            ResonanceEstimator::HitCount => {
                freq.iter_mut().for_each(|f| *f = w * rng.random::<f64>());
                let mut hit = false;
                'pairs: for a in 0..p.n_molecules {
                    for b in (a + 1)..p.n_molecules {
                        let (r, cos_t) = separation(&pos[a], &pos[b]);
                        if (freq[a] - freq[b]).abs() < p.threshold_factor * p.coupling(r, cos_t) {
                            hit = true;
                            break 'pairs;
                        }
                    }
                }
                if hit {
                    1.0
                } else {
                    0.0
                }
            }
        };
        s1 += value;
        s2 += value * value;
    }
    Ok((s1, s2))
}

fn separation(a: &[f64; 3], b: &[f64; 3]) -> (f64, f64) {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    (r, d[2] / r)
}

fn place(p: &ResonanceMcParams, rng: &mut ChaCha8Rng, pos: &mut [[f64; 3]]) -> Result<()> {
    let l = p.crystal_size_nm;
    let rc2 = p.min_distance_nm * p.min_distance_nm;
    for _ in 0..MAX_PLACEMENT_TRIES {
        for x in pos.iter_mut() {
            *x = [l * rng.random::<f64>(), l * rng.random::<f64>(), l * rng.random::<f64>()];
        }
        let ok = (0..pos.len()).all(|a| {
            ((a + 1)..pos.len()).all(|b| {
                let d: f64 = (0..3).map(|k| (pos[a][k] - pos[b][k]).powi(2)).sum();
                d >= rc2
            })
        });
        if ok {
            return Ok(());
        }
    }
    Err(Error::Numerical("could not place molecules respecting the minimum distance".into()))
}

/// Pair resonance probability by deterministic quadrature over the
/// separation vector of two uniform points in the cube, conditioned on the
/// hard-core distance. For more than two molecules pairs are treated as
/// independent: `1 - (1 - p_pair)^(n(n-1)/2)`.
pub fn resonance_probability_quadrature(params: &ResonanceMcParams) -> Result<f64> {
    let mut p = *params;
    p.n_samples = p.n_samples.max(10_000);
    p.estimator = ResonanceEstimator::HitCount;
    p.validate()?;
    let l = p.crystal_size_nm;
    let sc = p.min_distance_nm / l;
    // |J| at r = s L for unit angular factor
    let j_unit = coupling_scale_mhz(p.dipole_moment_debye.powi(2), l, &p.medium);
    let w = p.width_mhz();

    let hit = angular_integral(
        sc,
        |s, cos_t| {
            let x = p.threshold_factor * j_unit * (1.0 - 3.0 * cos_t * cos_t).abs() / (s * s * s);
            p.detuning_cdf(x)
        },
        |cos_t| {
            // radius where the detuning probability saturates at one
            let a = (1.0 - 3.0 * cos_t * cos_t).abs();
            if w == 0.0 {
                f64::INFINITY
            } else {
                (p.threshold_factor * j_unit * a / w).cbrt()
            }
        },
    );
    let excluded = ball_mass(sc);
    let pair = (hit / (1.0 - excluded)).clamp(0.0, 1.0);
    let pairs = (p.n_molecules * (p.n_molecules - 1) / 2) as i32;
    Ok(1.0 - (1.0 - pair).powi(pairs))
}

fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    quadrature::double_exponential::integrate(f, a, b, 1e-14).integral
}

// Separation density of two uniform points in the unit cube is
// prod_k (1 - |d_k|). By symmetry only the octant d >= 0 with
// phi in [0, pi/4] is integrated, times 16.
fn density(s: f64, ux: f64, uy: f64, uz: f64) -> f64 {
    (1.0 - s * ux) * (1.0 - s * uy) * (1.0 - s * uz)
}

fn angular_integral(sc: f64, f: impl Fn(f64, f64) -> f64, knee: impl Fn(f64) -> f64) -> f64 {
    let magic = (1.0 / 3.0f64.sqrt()).acos();
    16.0 * integrate(
        |phi| {
            let (sp, cp) = phi.sin_cos();
            // polar angle where the box face hit by the ray switches from z to x
            let switch = (1.0 / cp).atan();
            let mut cuts = vec![0.0, switch.min(magic), switch.max(magic), FRAC_PI_2];
            cuts.dedup();
            cuts.windows(2)
                .map(|c| {
                    integrate(
                        |theta| {
                            let (st, ct) = theta.sin_cos();
                            let (ux, uy, uz) = (st * cp, st * sp, ct);
                            let s_max = 1.0 / ux.max(uz);
                            let radial = |s: f64| s * s * density(s, ux, uy, uz) * f(s, ct);
                            let k = knee(ct).clamp(sc, s_max);
                            st * (integrate(radial, sc, k) + integrate(radial, k, s_max))
                        },
                        c[0],
                        c[1],
                    )
                })
                .sum()
        },
        0.0,
        FRAC_PI_4,
    )
}

// Probability mass of the separation density inside the ball s < sc.
fn ball_mass(sc: f64) -> f64 {
    16.0 * integrate(
        |phi| {
            let (sp, cp) = phi.sin_cos();
            integrate(
                |theta| {
                    let (st, ct) = theta.sin_cos();
                    st * integrate(|s| s * s * density(s, st * cp, st * sp, ct), 0.0, sc)
                },
                0.0,
                FRAC_PI_2,
            )
        },
        0.0,
        FRAC_PI_4,
    )
}

/// Ratio of resonance probabilities after and before narrowing the
/// inhomogeneous distribution from `params.inhom_width_ghz` to
/// `narrow_width_ghz`, both estimated by Monte Carlo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Enhancement {
    pub wide: ResonanceEstimate,
    pub narrow: ResonanceEstimate,
    pub factor: f64,
    /// First-order propagated standard error of `factor`.
    pub stderr: f64,
}

pub fn enhancement_factor(params: &ResonanceMcParams, narrow_width_ghz: f64) -> Result<Enhancement> {
    if !(narrow_width_ghz >= 0.0 && narrow_width_ghz < params.inhom_width_ghz) {
        return Err(Error::InvalidInput(format!(
            "narrow width must lie in [0, {}) GHz, got {narrow_width_ghz}",
            params.inhom_width_ghz
        )));
    }
    let wide = baseline_resonance_probability(params)?;
    let narrow = baseline_resonance_probability(&ResonanceMcParams {
        inhom_width_ghz: narrow_width_ghz,
        seed: params.seed.wrapping_add(1),
        ..*params
    })?;
    if wide.p_hat == 0.0 {
        return Err(Error::Numerical("no resonant configurations at the wide width; raise n_samples".into()));
    }
    let factor = narrow.p_hat / wide.p_hat;
    let rel =
        ((wide.stderr / wide.p_hat).powi(2) + (narrow.stderr / narrow.p_hat.max(f64::MIN_POSITIVE)).powi(2)).sqrt();
    Ok(Enhancement { wide, narrow, factor, stderr: factor * rel })
}
