//! Sparse cosine surface model fitted to scattered block samples.
//!
//! The block height `q` is approximated as a superposition of separable
//! cosines `cos(πk·ō)·cos(πl·p̄)` evaluated at the continuous sample
//! positions. The model is grown one term at a time: each iteration scores
//! every dictionary entry by the weighted residual-energy reduction it would
//! achieve (scaled by a low-frequency preference), appends the winner with a
//! damped coefficient, and updates the residual. Because the cosines are not
//! orthogonal over scattered positions the same frequency may be selected
//! more than once; the coefficients then add.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::LocalSamples;

/// Dictionary entries whose weighted norm falls below this are skipped.
pub const MIN_BASIS_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Frequencies per axis; the dictionary is `{0..k_max}²`.
    pub k_max: usize,
    pub max_iter: usize,
    /// Step damping for each coefficient update, in (0, 1].
    pub gamma: f64,
    /// Spatial decay of the sample weights, in (0, 1).
    pub rho: f64,
    /// Spectral decay of the selection weights, in (0, 1].
    pub rho_f: f64,
    /// Stop once the best weighted reduction falls to `stop_eps · E⁰`.
    pub stop_eps: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            k_max: 8,
            max_iter: 100,
            gamma: 0.5,
            rho: 0.7,
            rho_f: 0.9,
            stop_eps: 1e-10,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_max == 0 {
            return Err(Error::invalid("k_max must be positive"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::invalid(format!(
                "gamma {} outside (0, 1]",
                self.gamma
            )));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::invalid(format!("rho {} outside (0, 1)", self.rho)));
        }
        if !(self.rho_f > 0.0 && self.rho_f <= 1.0) {
            return Err(Error::invalid(format!(
                "rho_f {} outside (0, 1]",
                self.rho_f
            )));
        }
        if !(self.stop_eps >= 0.0) {
            return Err(Error::invalid("stop_eps must be non-negative"));
        }
        Ok(())
    }

    /// Frequencies per axis actually used for `n_samples` samples.
    pub fn effective_k(&self, n_samples: usize) -> usize {
        self.k_max.min(isqrt(n_samples))
    }
}

fn isqrt(n: usize) -> usize {
    let mut r = (n as f64).sqrt() as usize;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub k: usize,
    pub l: usize,
    pub coeff: f64,
}

/// Selected frequencies with their coefficients, in selection order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SurfaceModel {
    pub terms: Vec<Term>,
}

impl SurfaceModel {
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, o_bar: f64, p_bar: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coeff * basis_eval(t.k, t.l, o_bar, p_bar))
            .sum()
    }

    /// Model whose evaluation is the sum of both inputs.
    pub fn concat(&self, other: &SurfaceModel) -> SurfaceModel {
        SurfaceModel {
            terms: self.terms.iter().chain(&other.terms).copied().collect(),
        }
    }
}

/// Separable cosine `cos(πk·ō)·cos(πl·p̄)`.
#[inline]
pub fn basis_eval(k: usize, l: usize, o_bar: f64, p_bar: f64) -> f64 {
    (PI * k as f64 * o_bar).cos() * (PI * l as f64 * p_bar).cos()
}

/// Radially decaying sample weight `ρ^‖(ō, p̄) − (½, ½)‖`.
#[inline]
pub fn spatial_weight(o_bar: f64, p_bar: f64, rho: f64) -> f64 {
    let d = ((o_bar - 0.5).powi(2) + (p_bar - 0.5).powi(2)).sqrt();
    rho.powf(d)
}

/// Low-frequency preference `ρ_f^‖(k, l)‖`.
#[inline]
pub fn spectral_weight(k: usize, l: usize, rho_f: f64) -> f64 {
    rho_f.powf(((k * k + l * l) as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitStatus {
    /// `max_iter` iterations were run.
    IterationLimit,
    /// The best available reduction fell below the relative energy floor.
    EnergyFloor,
    /// Every dictionary entry vanished on the samples; the model is empty.
    DegenerateDictionary,
}

/// Fitted model plus the per-iteration energy trace.
#[derive(Debug, Clone)]
pub struct ModelFit {
    pub model: SurfaceModel,
    pub status: FitStatus,
    pub effective_k: usize,
    /// `energy[ν]` is the weighted residual energy after ν iterations.
    pub energy: Vec<f64>,
}

impl ModelFit {
    pub fn iterations(&self) -> usize {
        self.model.terms.len()
    }

    pub fn initial_energy(&self) -> f64 {
        self.energy[0]
    }

    pub fn final_energy(&self) -> f64 {
        *self.energy.last().unwrap()
    }
}

/// Selection key: larger score wins, then smaller `k² + l²`, then smaller `k`.
fn beats(score: f64, k: usize, l: usize, best: Option<(f64, usize, usize)>) -> bool {
    match best {
        None => true,
        Some((bs, bk, bl)) => {
            score > bs || (score == bs && (k * k + l * l, k) < (bk * bk + bl * bl, bk))
        }
    }
}

pub fn fit_model(samples: &LocalSamples, cfg: &ModelConfig) -> Result<ModelFit> {
    cfg.validate()?;
    let n = samples.len();
    if n == 0 {
        return Err(Error::invalid("cannot fit a model to an empty sample set"));
    }
    let kk = cfg.effective_k(n);

    let weights: Vec<f64> = samples
        .o
        .iter()
        .zip(&samples.p)
        .map(|(&o, &p)| spatial_weight(o, p, cfg.rho))
        .collect();

    // basis[(k * kk + l) * n + j] = φ_{k,l}(ō_j, p̄_j)
    let mut basis = vec![0.0; kk * kk * n];
    let mut norms = vec![0.0; kk * kk];
    let mut spectral = vec![0.0; kk * kk];
    for k in 0..kk {
        for l in 0..kk {
            let e = k * kk + l;
            let row = &mut basis[e * n..(e + 1) * n];
            for (j, f) in row.iter_mut().enumerate() {
                *f = basis_eval(k, l, samples.o[j], samples.p[j]);
            }
            norms[e] = row.iter().zip(&weights).map(|(f, w)| w * f * f).sum();
            spectral[e] = spectral_weight(k, l, cfg.rho_f);
        }
    }

    let weighted_energy =
        |r: &[f64]| -> f64 { r.iter().zip(&weights).map(|(v, w)| w * v * v).sum() };

    let mut residual = samples.q.clone();
    let e0 = weighted_energy(&residual);
    let mut energy = vec![e0];
    let mut terms = Vec::new();
    let mut status = FitStatus::IterationLimit;

    if norms.iter().all(|&nm| nm < MIN_BASIS_NORM) {
        log::warn!("all dictionary entries vanish on {n} samples; returning an empty model");
        return Ok(ModelFit {
            model: SurfaceModel::default(),
            status: FitStatus::DegenerateDictionary,
            effective_k: kk,
            energy,
        });
    }

    for _ in 0..cfg.max_iter {
        let mut best: Option<(f64, usize, usize)> = None;
        let mut best_step = 0.0;
        for k in 0..kk {
            for l in 0..kk {
                let e = k * kk + l;
                let norm = norms[e];
                if norm < MIN_BASIS_NORM {
                    continue;
                }
                let row = &basis[e * n..(e + 1) * n];
                let proj: f64 = (0..n).map(|j| weights[j] * residual[j] * row[j]).sum();
                let score = proj * proj / norm * spectral[e];
                if beats(score, k, l, best) {
                    best = Some((score, k, l));
                    best_step = proj / norm;
                }
            }
        }
        let (score, u, v) = best.expect("dictionary has at least one usable entry");
        if score <= cfg.stop_eps * e0 {
            status = FitStatus::EnergyFloor;
            break;
        }
        let coeff = cfg.gamma * best_step;
        let row = &basis[(u * kk + v) * n..(u * kk + v + 1) * n];
        for (r, f) in residual.iter_mut().zip(row) {
            *r -= coeff * f;
        }
        terms.push(Term { k: u, l: v, coeff });
        energy.push(weighted_energy(&residual));
    }

    Ok(ModelFit {
        model: SurfaceModel { terms },
        status,
        effective_k: kk,
        energy,
    })
}

/// Evaluates the model at continuous positions. Positions outside `[0, 1]²`
/// are extrapolated.
pub fn eval_model(model: &SurfaceModel, positions: &[[f64; 2]]) -> Vec<f64> {
    let outside = positions
        .iter()
        .filter(|p| !(0.0..=1.0).contains(&p[0]) || !(0.0..=1.0).contains(&p[1]))
        .count();
    if outside > 0 {
        log::debug!("{outside} evaluation positions lie outside the unit square");
    }
    positions.iter().map(|p| model.eval(p[0], p[1])).collect()
}

/// Weighted residual energy `Σ w_j (q_j − model(ō_j, p̄_j))²`.
pub fn residual_energy(samples: &LocalSamples, model: &SurfaceModel, rho: f64) -> f64 {
    (0..samples.len())
        .map(|j| {
            let (o, p) = (samples.o[j], samples.p[j]);
            let r = samples.q[j] - model.eval(o, p);
            spatial_weight(o, p, rho) * r * r
        })
        .sum()
}
