//! Quick invariant suite and subset-selection scaling benchmark.

use std::time::Instant;

use serde::Serialize;
use swipt::fading::{sample_rician, RicianConfig};
use swipt::region::{self, Scheme};
use swipt::simo::{self, list_sizes_within_bound, subset_select};
use swipt::siso::LinkParams;
use swipt::Result;

use crate::config::ScenarioConfig;
use crate::experiment::{boundary_checks, Check};

/// Ensemble size used by [`verify`].
pub const VERIFY_STATES: usize = 2000;

/// Exhaustive subset-sum optimum not exceeding `target`.
fn best_subset_sum(values: &[f64], target: f64) -> f64 {
    (0..1u64 << values.len())
        .map(|mask| {
            values
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, v)| v)
                .sum::<f64>()
        })
        .filter(|&s| s <= target)
        .fold(0.0, f64::max)
}

/// Deterministic fractions in (0, 1) for instance targets.
fn fraction(i: usize) -> f64 {
    let golden = 0.618_033_988_749_894_9;
    0.15 + 0.7 * ((i as f64 + 1.0) * golden).fract()
}

/// Subset selection against exhaustive search on `instances` random channel
/// states with 2 to `max_antennas` antennas. Returns the number of
/// instances that broke the approximation guarantee, exceeded the target or
/// outgrew the list-size bound.
pub fn subset_selection_guarantee(
    instances: usize,
    max_antennas: usize,
    epsilon: f64,
    eta: f64,
    seed: u64,
) -> Result<usize> {
    let mut failures = 0;
    for i in 0..instances {
        let m = 2 + i % (max_antennas - 1);
        let cfg = RicianConfig {
            num_antennas: m,
            ..RicianConfig::default()
        };
        let e = sample_rician(&cfg, 1, seed.wrapping_add(i as u64))?;
        let values = e.state(0);
        let target = fraction(i) * values.iter().sum::<f64>();
        let sel = subset_select(values, target, epsilon, eta)?;
        let opt = best_subset_sum(values, target);
        let ok = sel.sum <= target * (1.0 + 1e-12)
            && sel.sum * (1.0 + epsilon) >= opt * (1.0 - 1e-12)
            && list_sizes_within_bound(&sel, m, target, epsilon);
        failures += usize::from(!ok);
    }
    Ok(failures)
}

/// Invariant suite on a small ensemble drawn from the scenario.
pub fn verify(cfg: &ScenarioConfig) -> Result<Vec<Check>> {
    let states = cfg.num_states.min(VERIFY_STATES);
    let points = cfg.n_points.min(9);
    let mut checks = Vec::new();

    let siso = RicianConfig {
        num_antennas: 1,
        ..cfg.channel
    };
    let ensemble = sample_rician(&siso, states, cfg.seed)?;
    let mut boundaries = Vec::new();
    for s in Scheme::siso_all() {
        match region::trace_boundary(&ensemble, &cfg.link, s, points, &cfg.trace) {
            Ok(b) => boundaries.push(b),
            Err(e) => checks.push(Check {
                name: format!("trace/{s}"),
                passed: false,
                detail: e.to_string(),
            }),
        }
    }
    checks.extend(boundary_checks(&boundaries));

    if cfg.channel.num_antennas > 1 {
        let ensemble = sample_rician(&cfg.channel, states / 4, cfg.seed)?;
        let mut boundaries = Vec::new();
        for s in Scheme::simo_all() {
            match region::trace_boundary(&ensemble, &cfg.link, s, points, &cfg.trace) {
                Ok(b) => boundaries.push(b),
                Err(e) => checks.push(Check {
                    name: format!("trace/{s}"),
                    passed: false,
                    detail: e.to_string(),
                }),
            }
        }
        checks.extend(boundary_checks(&boundaries));
    }

    let advantage = ups_grid_advantage(50, 2, 41, cfg.seed, &cfg.link)?;
    checks.push(Check {
        name: "ups/grid-search".into(),
        passed: advantage <= 1e-12,
        detail: format!("largest relative advantage of a per-antenna split {advantage:.3e}"),
    });

    let failures = subset_selection_guarantee(50, 10, 0.1, 0.1, cfg.seed)?;
    checks.push(Check {
        name: "subset-selection/guarantee".into(),
        passed: failures == 0,
        detail: format!("{failures} of 50 instances failed"),
    });
    Ok(checks)
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub antennas: usize,
    /// Best-of-repeats mean time per instance.
    pub seconds_per_instance: f64,
    pub mean_largest_list: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Least-squares slope of log time against log antenna count.
    pub slope: f64,
}

/// Times subset selection at each antenna count on `instances` channel
/// states, keeping the fastest of `repeats` passes.
pub fn bench_subset_selection(
    antennas: &[usize],
    instances: usize,
    repeats: usize,
    epsilon: f64,
    eta: f64,
    seed: u64,
) -> Result<BenchReport> {
    let mut rows = Vec::new();
    for &m in antennas {
        let cfg = RicianConfig {
            num_antennas: m,
            ..RicianConfig::default()
        };
        let e = sample_rician(&cfg, instances, seed)?;
        let targets: Vec<f64> = e
            .states()
            .enumerate()
            .map(|(i, s)| fraction(i) * s.iter().sum::<f64>())
            .collect();
        let mut best = f64::INFINITY;
        let mut largest = 0usize;
        for _ in 0..repeats.max(1) {
            largest = 0;
            let start = Instant::now();
            for (s, &t) in e.states().zip(&targets) {
                let sel = subset_select(s, t, epsilon, eta)?;
                largest += sel.list_sizes.iter().copied().max().unwrap_or(0);
            }
            best = best.min(start.elapsed().as_secs_f64());
        }
        rows.push(BenchRow {
            antennas: m,
            seconds_per_instance: best / instances as f64,
            mean_largest_list: largest as f64 / instances as f64,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| (r.antennas as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.seconds_per_instance.ln()).collect();
    Ok(BenchReport {
        slope: log_log_slope(&xs, &ys),
        rows,
    })
}

fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Per-state check that no per-antenna split on a grid beats uniform
/// splitting. Returns the largest relative advantage found.
pub fn ups_grid_advantage(states: usize, antennas: usize, grid: usize, seed: u64, params: &LinkParams) -> Result<f64> {
    let cfg = RicianConfig {
        num_antennas: antennas,
        ..RicianConfig::default()
    };
    let e = sample_rician(&cfg, states, seed)?;
    let mut worst = f64::NEG_INFINITY;
    let lambda_unit = 1.0 / (params.noise_power + params.tx_power_avg * cfg.mean_power_gain);
    for (i, h) in e.states().enumerate() {
        let lambda = lambda_unit * fraction(i) * 2.0;
        let ups = simo::ups_reduce(&swipt::fading::FadingEnsemble::new(h.to_vec(), antennas)?);
        let d = swipt::siso::dps_policy_no_csit(ups.state(0)[0], params, lambda)?;
        let value = d.rate + lambda * d.energy / params.harvest_efficiency;
        let mut alpha = vec![0.0; antennas];
        let mut idx = vec![0usize; antennas];
        loop {
            for (a, k) in alpha.iter_mut().zip(&idx) {
                *a = *k as f64 / (grid - 1) as f64;
            }
            let r = simo::mrc_rate(h, &alpha, params.tx_power_avg, params.noise_power)?;
            let q = simo::mrc_energy(h, &alpha, params.tx_power_avg, params.harvest_efficiency)?;
            let v = r + lambda * q / params.harvest_efficiency;
            worst = worst.max((v - value) / value.abs().max(1e-300));
            let mut j = 0;
            while j < antennas {
                idx[j] += 1;
                if idx[j] < grid {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j == antennas {
                break;
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_power_law() {
        let xs: Vec<f64> = [4.0f64, 8.0, 16.0].iter().map(|x| x.ln()).collect();
        let ys: Vec<f64> = [4.0f64, 8.0, 16.0].iter().map(|x| (3.0 * x * x).ln()).collect();
        assert!((log_log_slope(&xs, &ys) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn exhaustive_subset_sum() {
        assert_eq!(best_subset_sum(&[3.0, 5.0, 8.0], 9.0), 8.0);
        assert_eq!(best_subset_sum(&[3.0, 5.0, 8.0], 2.0), 0.0);
    }

    #[test]
    fn guarantee_holds_on_a_few_instances() {
        assert_eq!(subset_selection_guarantee(20, 8, 0.1, 0.1, 3).unwrap(), 0);
    }
}
