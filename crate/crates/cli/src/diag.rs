//! Drifting-field diagnostics on synthetic configurations and on the
//! candidate sets of a trained generative actor.

use std::fmt::Write as _;

use anyhow::{bail, Result};
use podpo_core::drift::{
    compute_v, compute_v_per_temperature, diagnose, ess_metrics, relative_variance,
    DriftDiagnostics, DriftInputs, DEFAULT_TEMPERATURES,
};
use podpo_core::rng::{standard_normal, stream, Rng, Stream};
use podpo_core::rollout::{collect_rollout, filter_positive, normalize_advantages};
use podpo_core::tensor::{Matrix, Tensor3};
use podpo_core::trainer::{PolicyState, Trainer};

pub const EQUILIBRIUM_BATCH: usize = 4096;
pub const EQUILIBRIUM_CANDIDATES: usize = 8;
/// Allowed distance of each mean component from zero, in standard errors.
pub const EQUILIBRIUM_Z: f64 = 4.0;

pub const MISMATCH_BATCH: usize = 512;
pub const MISMATCH_CANDIDATES: usize = 8;
pub const MISMATCH_CANDIDATE_SD: f64 = 0.5;
pub const MISMATCH_TARGET: [f64; 2] = [2.0, 0.0];
/// Required factor between the sharpest single-temperature RV and the total RV.
pub const COMPRESSION_MARGIN: f64 = 1.5;

fn normal_tensor(rng: &mut Rng, b: usize, n: usize, d: usize, sd: f64) -> Tensor3 {
    let data = (0..b * n * d).map(|_| sd * standard_normal(rng)).collect();
    Tensor3::from_vec(b, n, d, data).expect("length matches")
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumCheck {
    pub mean_v: Vec<f64>,
    pub standard_error: Vec<f64>,
    pub mean_v_norm: f64,
    /// Largest `|mean| / se` over components.
    pub max_z: f64,
    pub passed: bool,
}

/// Candidates and both target sets drawn i.i.d. from the same standard
/// normal (`B = 4096`, `G = N = M = 8`, `D = 2`, no self-masking).
pub fn equilibrium_inputs(seed: u64) -> DriftInputs {
    let (b, g, d) = (EQUILIBRIUM_BATCH, EQUILIBRIUM_CANDIDATES, 2);
    let mut rng = stream(seed, Stream::Synthetic(1000));
    let x = normal_tensor(&mut rng, b, g, d, 1.0);
    let yp = normal_tensor(&mut rng, b, g, d, 1.0);
    let yn = normal_tensor(&mut rng, b, g, d, 1.0);
    DriftInputs::new(x, yp, yn, DEFAULT_TEMPERATURES.to_vec(), false)
        .expect("valid by construction")
}

/// Batch-mean drifting vector with standard errors over batch items (the
/// candidates of one item share their targets, so items are the independent
/// unit).
pub fn equilibrium_check(seed: u64) -> Result<EquilibriumCheck> {
    let inputs = equilibrium_inputs(seed);
    let v = compute_v(&inputs)?;
    let [b, g, d] = v.shape();
    let mut mean_v = Vec::with_capacity(d);
    let mut standard_error = Vec::with_capacity(d);
    for c in 0..d {
        let per_item: Vec<f64> = (0..b)
            .map(|bi| (0..g).map(|gi| v.point(bi, gi)[c]).sum::<f64>() / g as f64)
            .collect();
        let mean = per_item.iter().sum::<f64>() / b as f64;
        let var = per_item.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
        mean_v.push(mean);
        standard_error.push((var / b as f64).sqrt());
    }
    let max_z = mean_v
        .iter()
        .zip(&standard_error)
        .map(|(m, se)| m.abs() / se)
        .fold(0.0, f64::max);
    Ok(EquilibriumCheck {
        mean_v_norm: mean_v.iter().map(|m| m * m).sum::<f64>().sqrt(),
        passed: max_z <= EQUILIBRIUM_Z,
        mean_v,
        standard_error,
        max_z,
    })
}

/// Candidates `x ~ N(0, 0.25·I)`, one positive at `(2, 0)`, the candidates as
/// negatives with self-masking; `B = 512`, `G = 8`, `D = 2`.
pub fn mismatch_inputs(seed: u64, temps: &[f64]) -> DriftInputs {
    let mut rng = stream(seed, Stream::Synthetic(1001));
    let x = normal_tensor(
        &mut rng,
        MISMATCH_BATCH,
        MISMATCH_CANDIDATES,
        2,
        MISMATCH_CANDIDATE_SD,
    );
    let yp = Tensor3::from_vec(MISMATCH_BATCH, 1, 2, MISMATCH_TARGET.repeat(MISMATCH_BATCH))
        .expect("length matches");
    DriftInputs::contrastive(x, yp, temps.to_vec()).expect("valid by construction")
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureRow {
    pub tau: f64,
    pub rv: f64,
    pub ess_ratio: f64,
    pub max_p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MismatchCheck {
    pub rows: Vec<TemperatureRow>,
    pub rv_total: f64,
    /// RV at the smallest temperature.
    pub rv_sharpest: f64,
    /// `rv_total < rv_sharpest`.
    pub compression: bool,
    /// `COMPRESSION_MARGIN · rv_total <= rv_sharpest`.
    pub compression_with_margin: bool,
}

fn pooled(t: &Tensor3) -> Matrix {
    let [b, g, d] = t.shape();
    Matrix::from_vec(b * g, d, t.as_slice().to_vec()).expect("length matches")
}

/// RV per temperature and of the total, pooling all `B·G` drifting vectors
/// (each batch item has freshly drawn candidates).
pub fn mismatch_check(seed: u64, temps: &[f64]) -> Result<MismatchCheck> {
    let inputs = mismatch_inputs(seed, temps);
    let (total, parts) = compute_v_per_temperature(&inputs)?;
    let mut rows = Vec::with_capacity(temps.len());
    for (&tau, part) in temps.iter().zip(&parts) {
        let e = ess_metrics(&inputs, tau)?;
        rows.push(TemperatureRow {
            tau,
            rv: relative_variance(&pooled(part))?,
            ess_ratio: e.ess_ratio,
            max_p: e.max_p,
        });
    }
    let rv_total = relative_variance(&pooled(&total))?;
    let rv_sharpest = rows
        .iter()
        .min_by(|a, b| a.tau.total_cmp(&b.tau))
        .map_or(f64::NAN, |r| r.rv);
    Ok(MismatchCheck {
        compression: rv_total < rv_sharpest,
        compression_with_margin: COMPRESSION_MARGIN * rv_total <= rv_sharpest,
        rows,
        rv_total,
        rv_sharpest,
    })
}

/// Diagnostics of a trained generative actor: one rollout, then the
/// contrastive candidate sets of (at most `max_positives`) positive samples.
pub fn policy_diagnostics(trainer: &mut Trainer, max_positives: usize) -> Result<DriftDiagnostics> {
    let cfg = trainer.config.clone();
    let PolicyState::Podpo { actor, .. } = &trainer.policy else {
        bail!("drift diagnostics need a generative (podpo) actor checkpoint");
    };
    let mut rng = stream(cfg.seed, Stream::Synthetic(1002));
    let mut traj = collect_rollout(
        &mut trainer.envs,
        actor,
        &trainer.critic,
        cfg.steps_per_rollout,
        &mut rng,
    )?;
    traj.compute_advantages(cfg.gamma, cfg.lambda)?;
    let adv = normalize_advantages(&traj.advantages)?;
    let positives = filter_positive(&traj.obs, &traj.actions, &adv)?;
    if positives.is_empty() {
        bail!("the rollout produced no positive-advantage samples");
    }
    let keep: Vec<usize> = (0..positives.len().min(max_positives)).collect();
    let batch = positives.select(&keep);
    let cands = actor.sample_candidates(&batch.obs, cfg.num_candidates, &mut rng)?;
    let y_pos = Tensor3::from_matrix(batch.actions.clone(), 1)?;
    let inputs = DriftInputs::contrastive(cands.actions, y_pos, cfg.temps.clone())?;
    Ok(diagnose(&inputs)?)
}

fn status(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn sweep_table(out: &mut String, rows: impl Iterator<Item = (f64, f64, f64)>) {
    let _ = writeln!(out, "{:<8} {:>10} {:>10}", "t", "ESS_ratio", "Max_p");
    for (t, e, m) in rows {
        let _ = writeln!(out, "{t:<8} {e:>10.4} {m:>10.4}");
    }
}

pub fn render_report(
    seed: u64,
    eq: &EquilibriumCheck,
    mm: &MismatchCheck,
    policy: Option<&DriftDiagnostics>,
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "seed = {seed}\n");
    let _ = writeln!(s, "[equilibrium]");
    let _ = writeln!(
        s,
        "batch = {EQUILIBRIUM_BATCH}\ncandidates = {EQUILIBRIUM_CANDIDATES}\ndim = 2"
    );
    let _ = writeln!(s, "mean_v = {:?}", eq.mean_v);
    let _ = writeln!(s, "standard_error = {:?}", eq.standard_error);
    let _ = writeln!(s, "mean_v_norm = {:e}", eq.mean_v_norm);
    let _ = writeln!(s, "max_abs_z = {:.3}", eq.max_z);
    let _ = writeln!(
        s,
        "status = {} (every component within {EQUILIBRIUM_Z} standard errors)\n",
        status(eq.passed)
    );

    let _ = writeln!(s, "[mismatch]");
    let _ = writeln!(
        s,
        "candidates = N(0, {}*I), positive = {:?}, negatives = candidates (self-masked)",
        MISMATCH_CANDIDATE_SD * MISMATCH_CANDIDATE_SD,
        MISMATCH_TARGET
    );
    for r in &mm.rows {
        let _ = writeln!(s, "rv_tau_{} = {:.6}", r.tau, r.rv);
    }
    let _ = writeln!(s, "rv_total = {:.6}", mm.rv_total);
    let _ = writeln!(
        s,
        "variance_compression = {} (rv_total < rv at smallest t)",
        status(mm.compression)
    );
    let _ = writeln!(
        s,
        "variance_compression_margin = {} ({COMPRESSION_MARGIN} * rv_total <= rv at smallest t)\n",
        status(mm.compression_with_margin)
    );
    let _ = writeln!(s, "[temperature_sweep]");
    sweep_table(
        &mut s,
        mm.rows.iter().map(|r| (r.tau, r.ess_ratio, r.max_p)),
    );

    if let Some(p) = policy {
        let _ = writeln!(s, "\n[policy]");
        for t in &p.per_temperature {
            let _ = writeln!(s, "rv_tau_{} = {:.6}", t.tau, t.rv);
        }
        let _ = writeln!(s, "rv_total = {:.6}", p.rv_total);
        sweep_table(
            &mut s,
            p.per_temperature
                .iter()
                .map(|t| (t.tau, t.ess_ratio, t.max_p)),
        );
    }
    s
}
