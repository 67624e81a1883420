//! Monte-Carlo quantum-jump unraveling of the master equation:
//! deterministic evolution under the non-Hermitian H_eff = H − iκ a†a,
//! punctuated by collapses ψ → aψ/‖aψ‖ when the decaying norm² crosses a
//! pre-drawn uniform variate.
//!
//! Deterministic segments are advanced with a precomputed matrix exponential
//! of −iH_eff over one fixed step, with a halving ladder of sub-step
//! propagators for binary refinement of the crossing time (the norm is
//! monotone non-increasing, so the crossing is unique within a step). Jump
//! times resolve to dt_max/2⁴⁸.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hilbert::{annihilation, number_op, pauli, PauliKind, SpaceSpec, StateVector};
use crate::model::{effective_hamiltonian, ModelParams};
use crate::ode::expm;
use crate::weak;

/// Depth of the halving ladder used for jump-time refinement.
const LADDER_DEPTH: usize = 48;

/// Monte-Carlo run configuration. RNG streams are ChaCha8, one stream per
/// trajectory: `seed` selects the key, the trajectory index selects the
/// stream, so trajectories are independent and individually reproducible.
#[derive(Debug, Clone, Copy)]
pub struct TrajectoryConfig {
    pub seed: u64,
    pub t_burn: f64,
    pub t_total: f64,
    pub dt_max: f64,
    pub n_trajectories: usize,
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_burn >= 0.0 && self.t_total > self.t_burn) {
            return Err(Error::InvalidParam(format!(
                "need t_total > t_burn >= 0, got t_total {} t_burn {}",
                self.t_total, self.t_burn
            )));
        }
        if !(self.dt_max > 0.0) {
            return Err(Error::InvalidParam("dt_max must be > 0".into()));
        }
        if self.n_trajectories < 1 {
            return Err(Error::InvalidParam("n_trajectories must be >= 1".into()));
        }
        Ok(())
    }
}

/// Default burn-in 20/(κ·|β|²_max): several mean inter-jump intervals of the
/// faster-emitting manifold.
pub fn suggested_burn_in(params: &ModelParams) -> Result<f64> {
    let amps = weak::amplitudes(params)?;
    let beta_sq_max = amps.beta1.norm_sqr().max(amps.beta2.norm_sqr());
    if beta_sq_max <= 0.0 {
        return Err(Error::Undefined("burn-in undefined at g = 0".into()));
    }
    Ok(20.0 / (params.kappa * beta_sq_max))
}

/// Manifold label of a pure state (parity classes of the two trajectory
/// manifolds).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Manifold {
    One,
    Two,
    Mixed,
}

/// Classify by parity: manifold 1 spans {|n,e⟩: n even} ∪ {|n,g⟩: n odd},
/// manifold 2 the complement. A label requires ≥ 99.9% of the population in
/// one class.
pub fn manifold_classify(state: &StateVector) -> Manifold {
    let sp = state.space();
    let total: f64 = state.amplitudes().iter().map(|z| z.norm_sqr()).sum();
    if total <= 0.0 {
        return Manifold::Mixed;
    }
    let mut w1 = 0.0;
    for (i, amp) in state.amplitudes().iter().enumerate() {
        let (n, excited) = sp.unindex(i);
        let in_one = (n + usize::from(!excited)) % 2 == 0;
        if in_one {
            w1 += amp.norm_sqr();
        }
    }
    let frac = w1 / total;
    if frac >= 0.999 {
        Manifold::One
    } else if frac <= 0.001 {
        Manifold::Two
    } else {
        Manifold::Mixed
    }
}

/// One simulated trajectory with its accumulated statistics.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub jump_times: Vec<f64>,
    /// Label of each inter-jump interval, starting with the interval before
    /// the first jump; length = jump_times.len() + 1.
    pub manifold_labels: Vec<Manifold>,
    pub final_state: StateVector,
    /// Statistics accumulated over t ≥ t_burn.
    pub post_burn: BurnedStats,
    pub t_burn: f64,
    pub t_total: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BurnedStats {
    pub elapsed: f64,
    pub n_jumps: usize,
    pub time_manifold_1: f64,
    pub time_manifold_2: f64,
    pub time_mixed: f64,
    /// ∫⟨σ_z⟩ dt over the post-burn window.
    pub sz_integral: f64,
    /// ∫⟨a†a⟩ dt over the post-burn window (normalized state).
    pub n_integral: f64,
}

struct Propagators {
    /// ladder[k] = exp(−iH_eff · dt/2^k), k = 0..=LADDER_DEPTH
    ladder: Vec<Array2<C64>>,
    dt: f64,
}

fn build_propagators(params: &ModelParams, space: SpaceSpec, dt: f64) -> Result<Propagators> {
    let heff = effective_hamiltonian(params, space)?;
    let mut ladder = Vec::with_capacity(LADDER_DEPTH + 1);
    for k in 0..=LADDER_DEPTH {
        let step = dt / 2f64.powi(k as i32);
        let m = heff.entries().mapv(|z| z * C64::new(0.0, -step));
        ladder.push(expm(&m)?);
    }
    Ok(Propagators { ladder, dt })
}

struct RunState<'a> {
    props: &'a Propagators,
    a_matrix: &'a Array2<C64>,
    rng: ChaCha8Rng,
    threshold: f64,
    jumps: Vec<f64>,
}

impl RunState<'_> {
    fn draw_threshold(&mut self) -> f64 {
        loop {
            let r: f64 = self.rng.gen();
            if r > 0.0 {
                return r;
            }
        }
    }

    /// Advance `psi` by dt/2^k starting at absolute time `t0`, emitting jumps.
    fn advance(&mut self, psi: ndarray::Array1<C64>, k: usize, t0: f64) -> ndarray::Array1<C64> {
        let trial = self.props.ladder[k].dot(&psi);
        let norm_sq: f64 = trial.iter().map(|z| z.norm_sqr()).sum();
        if norm_sq >= self.threshold {
            return trial;
        }
        if k == LADDER_DEPTH {
            // resolution floor: jump at the end of this sub-interval
            let sub = self.props.dt / 2f64.powi(k as i32);
            self.jumps.push(t0 + sub);
            let collapsed = self.a_matrix.dot(&trial);
            let n: f64 = collapsed.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            self.threshold = self.draw_threshold();
            return collapsed.mapv(|z| z / n);
        }
        let half = self.props.dt / 2f64.powi(k as i32 + 1);
        let mid = self.advance(psi, k + 1, t0);
        self.advance(mid, k + 1, t0 + half)
    }
}

/// Run one trajectory, optionally recording the normalized state at the
/// given absolute times (which must be multiples of `dt_max`).
pub fn run_trajectory_sampled(
    params: &ModelParams,
    space: SpaceSpec,
    config: &TrajectoryConfig,
    initial: &StateVector,
    trajectory_index: u64,
    sample_times: &[f64],
) -> Result<(TrajectoryRecord, Vec<StateVector>)> {
    config.validate()?;
    params.validate()?;
    if (initial.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParam(format!(
            "initial state not normalized: norm {}",
            initial.norm()
        )));
    }
    for &ts in sample_times {
        let steps = ts / config.dt_max;
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(Error::InvalidParam(format!(
                "sample time {ts} is not a multiple of dt_max {}",
                config.dt_max
            )));
        }
    }

    let props = build_propagators(params, space, config.dt_max)?;
    let a_op = annihilation(space);
    let sz_op = pauli(space, PauliKind::Z);
    let n_op = number_op(space);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(trajectory_index);
    let mut run = RunState {
        props: &props,
        a_matrix: a_op.entries(),
        rng,
        threshold: 0.0,
        jumps: Vec::new(),
    };
    run.threshold = run.draw_threshold();

    let n_steps = (config.t_total / config.dt_max).ceil() as usize;
    let mut psi = initial.amplitudes().clone();
    let mut stats = BurnedStats::default();
    let mut manifold_labels = vec![classify_raw(space, &psi)];
    let mut jumps_seen = 0usize;
    let mut samples = Vec::new();
    let mut sample_idx = 0usize;

    // record a sample at t = 0 if requested
    while sample_idx < sample_times.len() && sample_times[sample_idx] <= 1e-12 {
        samples.push(normalized_state(space, &psi)?);
        sample_idx += 1;
    }

    for step in 0..n_steps {
        let t = step as f64 * config.dt_max;
        let post_burn = t >= config.t_burn;

        if post_burn {
            let norm_sq: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
            let sz = expect_raw(sz_op.entries(), &psi) / norm_sq;
            let nbar = expect_raw(n_op.entries(), &psi) / norm_sq;
            let dt = config.dt_max;
            stats.elapsed += dt;
            stats.sz_integral += sz * dt;
            stats.n_integral += nbar * dt;
            match *manifold_labels.last().unwrap() {
                Manifold::One => stats.time_manifold_1 += dt,
                Manifold::Two => stats.time_manifold_2 += dt,
                Manifold::Mixed => stats.time_mixed += dt,
            }
        }

        psi = run.advance(psi, 0, t);
        // label every new inter-jump interval
        while jumps_seen < run.jumps.len() {
            jumps_seen += 1;
            if run.jumps[jumps_seen - 1] >= config.t_burn {
                stats.n_jumps += 1;
            }
            manifold_labels.push(classify_raw(space, &psi));
        }

        let t_next = (step + 1) as f64 * config.dt_max;
        while sample_idx < sample_times.len() && sample_times[sample_idx] <= t_next + 1e-12 {
            samples.push(normalized_state(space, &psi)?);
            sample_idx += 1;
        }
    }

    let record = TrajectoryRecord {
        jump_times: run.jumps,
        manifold_labels,
        final_state: normalized_state(space, &psi)?,
        post_burn: stats,
        t_burn: config.t_burn,
        t_total: config.t_total,
    };
    Ok((record, samples))
}

/// Run one trajectory with jump recording only.
pub fn run_trajectory(
    params: &ModelParams,
    space: SpaceSpec,
    config: &TrajectoryConfig,
    initial: &StateVector,
    trajectory_index: u64,
) -> Result<TrajectoryRecord> {
    run_trajectory_sampled(params, space, config, initial, trajectory_index, &[])
        .map(|(record, _)| record)
}

/// Run `config.n_trajectories` independent trajectories in parallel.
pub fn run_ensemble(
    params: &ModelParams,
    space: SpaceSpec,
    config: &TrajectoryConfig,
    initial: &StateVector,
) -> Result<Vec<TrajectoryRecord>> {
    config.validate()?;
    (0..config.n_trajectories as u64)
        .into_par_iter()
        .map(|idx| run_trajectory(params, space, config, initial, idx))
        .collect()
}

fn classify_raw(space: SpaceSpec, psi: &ndarray::Array1<C64>) -> Manifold {
    let state = StateVector::from_amplitudes(space, psi.clone()).expect("dimension fixed");
    manifold_classify(&state)
}

fn normalized_state(space: SpaceSpec, psi: &ndarray::Array1<C64>) -> Result<StateVector> {
    StateVector::from_amplitudes(space, psi.clone())?.normalized()
}

fn expect_raw(op: &Array2<C64>, psi: &ndarray::Array1<C64>) -> f64 {
    let opv = op.dot(psi);
    psi.iter()
        .zip(opv.iter())
        .map(|(a, b)| (a.conj() * b).re)
        .sum()
}

/// Statistical estimates from an ensemble (or one long ergodic run).
#[derive(Debug, Clone)]
pub struct TrajectoryEstimates {
    /// ⟨a†a⟩ = flux/(2κ) from the jump rate.
    pub photon_number: f64,
    pub photon_number_se: f64,
    /// Time-averaged ⟨σ_z⟩.
    pub inversion: f64,
    pub inversion_se: f64,
    /// Fraction of post-burn time in manifold 1 / 2.
    pub p1: f64,
    pub p1_se: f64,
    pub p2: f64,
    /// Coincidence-rate g²(0) estimates per bin width: (bin, value, se).
    pub g2_zero_by_bin: Vec<(f64, f64, f64)>,
    pub n_jumps: usize,
    pub total_time: f64,
    /// Fraction of consecutive pure-manifold interval pairs that alternate.
    pub alternation_rate: f64,
}

/// Estimator bin widths for the g²(0) coincidence rate, in units of 1/ω.
pub const G2_BIN_WIDTHS: [f64; 3] = [0.025, 0.05, 0.1];

/// Reduce an ensemble of records into flux, inversion, manifold-population,
/// and g²(0) estimates with standard errors. Uses only post-burn data;
/// requires at least 100 post-burn jumps in total. Standard errors come
/// from blocking: across trajectories when there are ≥ 8, otherwise by
/// splitting each record's time axis into 16 blocks.
pub fn estimate_observables(
    records: &[TrajectoryRecord],
    params: &ModelParams,
) -> Result<TrajectoryEstimates> {
    if records.is_empty() {
        return Err(Error::InsufficientStatistics("no trajectory records".into()));
    }
    let total_jumps: usize = records.iter().map(|r| r.post_burn.n_jumps).sum();
    if total_jumps < 100 {
        return Err(Error::InsufficientStatistics(format!(
            "only {total_jumps} post-burn jumps, need >= 100"
        )));
    }
    let total_time: f64 = records.iter().map(|r| r.post_burn.elapsed).sum();

    // per-block samples of (flux, sz, p1-indicator time fractions)
    let blocks = collect_blocks(records);
    let flux_samples: Vec<f64> = blocks.iter().map(|b| b.jumps / b.time).collect();
    let sz_samples: Vec<f64> = blocks.iter().map(|b| b.sz / b.time).collect();
    let p1_samples: Vec<f64> = blocks.iter().map(|b| b.t1 / b.time).collect();

    let flux = total_jumps as f64 / total_time;
    let (_, flux_se) = mean_se(&flux_samples);
    let photon_number = flux / (2.0 * params.kappa);
    let photon_number_se = flux_se / (2.0 * params.kappa);

    let sz_total: f64 = records.iter().map(|r| r.post_burn.sz_integral).sum();
    let inversion = sz_total / total_time;
    let (_, inversion_se) = mean_se(&sz_samples);

    let t1: f64 = records.iter().map(|r| r.post_burn.time_manifold_1).sum();
    let t2: f64 = records.iter().map(|r| r.post_burn.time_manifold_2).sum();
    let p1 = t1 / total_time;
    let p2 = t2 / total_time;
    let (_, p1_se) = mean_se(&p1_samples);

    // alternation rate over consecutive pure-manifold intervals
    let mut alternating = 0usize;
    let mut pairs = 0usize;
    for r in records {
        for w in r.manifold_labels.windows(2) {
            if w[0] == Manifold::Mixed || w[1] == Manifold::Mixed {
                continue;
            }
            pairs += 1;
            if w[0] != w[1] {
                alternating += 1;
            }
        }
    }
    let alternation_rate = if pairs > 0 {
        alternating as f64 / pairs as f64
    } else {
        0.0
    };

    // g2(0) coincidence estimator across bin widths
    let mut g2_zero_by_bin = Vec::new();
    for &b_omega in &G2_BIN_WIDTHS {
        let bin = b_omega / params.omega;
        let mut n_pairs = 0usize;
        for r in records {
            let times: Vec<f64> = r
                .jump_times
                .iter()
                .cloned()
                .filter(|&t| t >= r.t_burn)
                .collect();
            for i in 0..times.len() {
                for j in i + 1..times.len() {
                    let gap = times[j] - times[i];
                    if gap > bin {
                        break;
                    }
                    n_pairs += 1;
                }
            }
        }
        let denom = flux * flux * bin * total_time;
        let value = n_pairs as f64 / denom;
        let se = (n_pairs.max(1) as f64).sqrt() / denom;
        g2_zero_by_bin.push((bin, value, se));
    }

    Ok(TrajectoryEstimates {
        photon_number,
        photon_number_se,
        inversion,
        inversion_se,
        p1,
        p1_se,
        p2,
        g2_zero_by_bin,
        n_jumps: total_jumps,
        total_time,
        alternation_rate,
    })
}

struct Block {
    time: f64,
    jumps: f64,
    sz: f64,
    t1: f64,
}

/// Blocking for standard errors: one block per trajectory when there are
/// at least 8 trajectories; otherwise 16 time blocks per trajectory.
fn collect_blocks(records: &[TrajectoryRecord]) -> Vec<Block> {
    if records.len() >= 8 {
        records
            .iter()
            .filter(|r| r.post_burn.elapsed > 0.0)
            .map(|r| Block {
                time: r.post_burn.elapsed,
                jumps: r.post_burn.n_jumps as f64,
                sz: r.post_burn.sz_integral,
                t1: r.post_burn.time_manifold_1,
            })
            .collect()
    } else {
        let mut blocks = Vec::new();
        for r in records {
            let n_blocks = 16usize;
            let span = (r.t_total - r.t_burn) / n_blocks as f64;
            // approximate time-resolved blocking from the jump times and
            // interval labels
            let mut jump_idx = 0usize;
            for k in 0..n_blocks {
                let lo = r.t_burn + k as f64 * span;
                let hi = lo + span;
                let mut jumps = 0.0;
                while jump_idx < r.jump_times.len() && r.jump_times[jump_idx] < hi {
                    if r.jump_times[jump_idx] >= lo {
                        jumps += 1.0;
                    }
                    jump_idx += 1;
                }
                // time-in-manifold-1 within the block, from interval labels
                let t1 = manifold_time_in_window(r, lo, hi, Manifold::One);
                blocks.push(Block {
                    time: span,
                    jumps,
                    sz: r.post_burn.sz_integral / n_blocks as f64,
                    t1,
                });
            }
        }
        blocks
    }
}

fn manifold_time_in_window(r: &TrajectoryRecord, lo: f64, hi: f64, which: Manifold) -> f64 {
    let mut acc = 0.0f64;
    let mut start = 0.0f64;
    for (k, label) in r.manifold_labels.iter().enumerate() {
        let end = if k < r.jump_times.len() {
            r.jump_times[k]
        } else {
            r.t_total
        };
        if *label == which {
            let a = start.max(lo);
            let b = end.min(hi);
            if b > a {
                acc += b - a;
            }
        }
        start = end;
    }
    acc
}

fn mean_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    if samples.len() < 2 {
        return (samples.first().copied().unwrap_or(0.0), f64::INFINITY);
    }
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{creation, make_space, QuantumOperator};
    use crate::model::hamiltonian;

    fn weak_params() -> ModelParams {
        ModelParams::new(10.0, 1.0, 0.1, -20.0, 0.2).unwrap()
    }

    #[test]
    fn manifold_classify_examples() {
        let sp = make_space(3).unwrap();
        let e0 = StateVector::basis(sp, 0, true).unwrap();
        assert_eq!(manifold_classify(&e0), Manifold::One);
        let g0 = StateVector::basis(sp, 0, false).unwrap();
        assert_eq!(manifold_classify(&g0), Manifold::Two);
        let g1 = StateVector::basis(sp, 1, false).unwrap();
        assert_eq!(manifold_classify(&g1), Manifold::One);
        let mixed = StateVector::from_amplitudes(sp, {
            let mut v = ndarray::Array1::zeros(sp.dim());
            let amp = C64::new(1.0 / 2f64.sqrt(), 0.0);
            v[sp.index(0, true)] = amp;
            v[sp.index(0, false)] = amp;
            v
        })
        .unwrap();
        assert_eq!(manifold_classify(&mixed), Manifold::Mixed);
    }

    #[test]
    fn hamiltonian_preserves_manifolds_and_jump_switches() {
        let sp = make_space(4).unwrap();
        let p = weak_params();
        let h = hamiltonian(&p, sp).unwrap();
        let a = annihilation(sp);
        for i in 0..sp.dim() {
            let (n, e) = sp.unindex(i);
            let class_of = |n: usize, e: bool| (n + usize::from(!e)) % 2;
            let ci = class_of(n, e);
            for j in 0..sp.dim() {
                let (m, f) = sp.unindex(j);
                let cj = class_of(m, f);
                if ci != cj {
                    assert_eq!(
                        h.entries()[[j, i]],
                        C64::new(0.0, 0.0),
                        "H couples manifolds at ({j},{i})"
                    );
                }
                // a maps class to the opposite class on basis states
                if ci == cj && a.entries()[[j, i]].norm() > 0.0 {
                    panic!("a preserves a manifold at ({j},{i})");
                }
            }
        }
    }

    #[test]
    fn dark_state_never_jumps() {
        let sp = make_space(3).unwrap();
        let p = ModelParams::new(10.0, 1.0, 0.0, -20.0, 0.2).unwrap();
        let config = TrajectoryConfig {
            seed: 1,
            t_burn: 0.0,
            t_total: 50.0,
            dt_max: 0.5,
            n_trajectories: 1,
        };
        let initial = StateVector::basis(sp, 0, false).unwrap();
        let record = run_trajectory(&p, sp, &config, &initial, 0).unwrap();
        assert!(record.jump_times.is_empty());
        let overlap = record.final_state.inner(&initial).norm();
        assert!((overlap - 1.0).abs() < 1e-10);
    }

    #[test]
    fn single_photon_decay_is_exponential() {
        // g = 0, initial |1,g>: exactly one jump, exponential with rate
        // 2 kappa; KS test over many runs
        let sp = make_space(3).unwrap();
        let p = ModelParams::new(10.0, 1.0, 0.0, 0.0, 0.25).unwrap();
        let rate = 2.0 * p.kappa;
        let config = TrajectoryConfig {
            seed: 42,
            t_burn: 0.0,
            t_total: 120.0,
            dt_max: 0.25,
            n_trajectories: 1,
        };
        let initial = StateVector::basis(sp, 1, false).unwrap();
        let n_runs = 10_000usize;
        let mut times: Vec<f64> = (0..n_runs)
            .map(|idx| {
                let r = run_trajectory(&p, sp, &config, &initial, idx as u64).unwrap();
                assert_eq!(r.jump_times.len(), 1, "expected exactly one jump");
                r.jump_times[0]
            })
            .collect();
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // Kolmogorov-Smirnov against Exp(rate)
        let n = times.len() as f64;
        let mut d = 0.0f64;
        for (i, &t) in times.iter().enumerate() {
            let cdf = 1.0 - (-rate * t).exp();
            let lo = i as f64 / n;
            let hi = (i + 1) as f64 / n;
            d = d.max((cdf - lo).abs()).max((hi - cdf).abs());
        }
        let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
        let p_value: f64 = (1..100)
            .map(|k| {
                2.0 * (-1.0f64).powi(k as i32 + 1) * (-2.0 * (k as f64).powi(2) * lambda * lambda).exp()
            })
            .sum();
        assert!(p_value > 0.01, "KS p-value {p_value:.4} (D = {d:.4})");
    }

    #[test]
    fn manifold_alternation_in_paper_regime() {
        let sp = make_space(4).unwrap();
        let p = weak_params();
        let config = TrajectoryConfig {
            seed: 3,
            t_burn: 0.0,
            t_total: 60_000.0,
            dt_max: 2.0,
            n_trajectories: 1,
        };
        let initial = StateVector::basis(sp, 0, true).unwrap();
        let record = run_trajectory(&p, sp, &config, &initial, 0).unwrap();
        assert!(record.jump_times.len() > 50, "too few jumps: {}", record.jump_times.len());
        let mut alternating = 0usize;
        let mut pairs = 0usize;
        for w in record.manifold_labels.windows(2) {
            if w[0] != Manifold::Mixed && w[1] != Manifold::Mixed {
                pairs += 1;
                if w[0] != w[1] {
                    alternating += 1;
                }
            }
        }
        assert!(pairs > 0);
        let rate = alternating as f64 / pairs as f64;
        assert!(rate > 0.99, "alternation rate {rate}");
    }

    #[test]
    fn identical_seed_gives_identical_jumps() {
        let sp = make_space(4).unwrap();
        let p = weak_params();
        let config = TrajectoryConfig {
            seed: 9,
            t_burn: 0.0,
            t_total: 5_000.0,
            dt_max: 1.0,
            n_trajectories: 1,
        };
        let initial = StateVector::basis(sp, 0, true).unwrap();
        let r1 = run_trajectory(&p, sp, &config, &initial, 0).unwrap();
        let r2 = run_trajectory(&p, sp, &config, &initial, 0).unwrap();
        assert_eq!(r1.jump_times.len(), r2.jump_times.len());
        for (a, b) in r1.jump_times.iter().zip(r2.jump_times.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        // a different stream gives different jump times
        let r3 = run_trajectory(&p, sp, &config, &initial, 1).unwrap();
        assert_ne!(r1.jump_times, r3.jump_times);
    }

    #[test]
    fn insufficient_statistics_flagged() {
        let sp = make_space(3).unwrap();
        let p = weak_params();
        let config = TrajectoryConfig {
            seed: 5,
            t_burn: 0.0,
            t_total: 100.0,
            dt_max: 1.0,
            n_trajectories: 1,
        };
        let initial = StateVector::basis(sp, 0, true).unwrap();
        let record = run_trajectory(&p, sp, &config, &initial, 0).unwrap();
        assert!(matches!(
            estimate_observables(&[record], &p),
            Err(Error::InsufficientStatistics(_))
        ));
    }

    #[test]
    fn jump_operator_is_annihilation() {
        // operator-level check that the collapse maps the manifolds into
        // each other: a |n even, e> lands in class 2, etc.
        let sp = make_space(4).unwrap();
        let a = annihilation(sp);
        let adag = creation(sp);
        let _ = QuantumOperator::identity(sp);
        let two_e = StateVector::basis(sp, 2, true).unwrap();
        let dropped = crate::hilbert::apply(&a, &two_e).unwrap().normalized().unwrap();
        assert_eq!(manifold_classify(&two_e), Manifold::One);
        assert_eq!(manifold_classify(&dropped), Manifold::Two);
        let up = crate::hilbert::apply(&adag, &two_e).unwrap().normalized().unwrap();
        assert_eq!(manifold_classify(&up), Manifold::Two);
    }

    #[test]
    fn config_validation() {
        let bad = TrajectoryConfig {
            seed: 0,
            t_burn: 10.0,
            t_total: 5.0,
            dt_max: 0.1,
            n_trajectories: 1,
        };
        assert!(bad.validate().is_err());
        let bad = TrajectoryConfig {
            seed: 0,
            t_burn: 0.0,
            t_total: 5.0,
            dt_max: 0.0,
            n_trajectories: 1,
        };
        assert!(bad.validate().is_err());
        let bad = TrajectoryConfig {
            seed: 0,
            t_burn: 0.0,
            t_total: 5.0,
            dt_max: 0.1,
            n_trajectories: 0,
        };
        assert!(bad.validate().is_err());
    }
}
