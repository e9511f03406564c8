//! Independent oracles for the acceptance and integration tests.

#![allow(dead_code)]

use swipt::fading::RicianConfig;
use swipt::siso::LinkParams;

/// Best average rate (nats) of power splitting at constant power `P_avg`
/// with average harvested energy at least `q`, by dynamic programming over
/// the ensemble with the energy sum on a grid of `bins` steps. Every grid
/// choice is a feasible primal point, so the result is a lower bound that
/// tightens quadratically in the step.
pub fn dp_rate_no_csit(gains: &[f64], params: &LinkParams, q: f64, bins: usize) -> f64 {
    let n = gains.len() as f64;
    let step = n * q / bins as f64;
    let p = params.tx_power_avg;
    let mut value = vec![f64::NEG_INFINITY; bins + 1];
    value[0] = 0.0;
    for &h in gains {
        let kmax = ((params.harvest_efficiency * h * p / step) as usize).min(bins);
        let rates: Vec<f64> = (0..=kmax)
            .map(|k| {
                let id = (h * p - k as f64 * step / params.harvest_efficiency).max(0.0);
                (id / params.noise_power).ln_1p()
            })
            .collect();
        let mut next = vec![f64::NEG_INFINITY; bins + 1];
        for (got, &v) in value.iter().enumerate() {
            if v == f64::NEG_INFINITY {
                continue;
            }
            for (k, &r) in rates.iter().enumerate() {
                let to = (got + k).min(bins);
                next[to] = next[to].max(v + r);
            }
        }
        value = next;
    }
    value[bins] / n
}

/// As [`dp_rate_no_csit`] with transmit power also chosen per state: the
/// total power lives on a grid of `power_bins` steps of `N P_avg`, the
/// harvested energy on `energy_bins` steps of `N q`.
pub fn dp_rate_csit(gains: &[f64], params: &LinkParams, q: f64, power_bins: usize, energy_bins: usize) -> f64 {
    let n = gains.len() as f64;
    let dp = n * params.tx_power_avg / power_bins as f64;
    let de = n * q / energy_bins as f64;
    let kpeak = ((params.tx_power_peak / dp) * (1.0 + 1e-12)) as usize;
    let kpeak = kpeak.min(power_bins);
    let width = energy_bins + 1;
    let mut value = vec![f64::NEG_INFINITY; (power_bins + 1) * width];
    value[0] = 0.0;
    for &h in gains {
        let mut choices = Vec::new();
        for kp in 0..=kpeak {
            let p = kp as f64 * dp;
            let emax = ((params.harvest_efficiency * h * p / de) as usize).min(energy_bins);
            for ke in 0..=emax {
                let id = (h * p - ke as f64 * de / params.harvest_efficiency).max(0.0);
                choices.push((kp, ke, (id / params.noise_power).ln_1p()));
            }
        }
        let mut next = vec![f64::NEG_INFINITY; value.len()];
        for used in 0..=power_bins {
            for got in 0..=energy_bins {
                let v = value[used * width + got];
                if v == f64::NEG_INFINITY {
                    continue;
                }
                for &(kp, ke, r) in &choices {
                    if used + kp > power_bins {
                        continue;
                    }
                    let to = (used + kp) * width + (got + ke).min(energy_bins);
                    if v + r > next[to] {
                        next[to] = v + r;
                    }
                }
            }
        }
        value = next;
    }
    (0..=power_bins)
        .map(|u| value[u * width + energy_bins])
        .fold(f64::NEG_INFINITY, f64::max)
        / n
}

/// `E[log2(1 + |g|^2 P / sigma^2)]` for a single Rician antenna by
/// two-dimensional Simpson quadrature over the scattered component in
/// polar coordinates.
pub fn rician_rate_quadrature(channel: &RicianConfig, params: &LinkParams) -> f64 {
    let k = channel.rician_k;
    let g = channel.mean_power_gain;
    let a2 = k / (k + 1.0) * g;
    let a = a2.sqrt();
    let v = g / (k + 1.0);
    let snr = params.tx_power_avg / params.noise_power;
    // Radial variable u = r^2/v has density e^{-u}; the phase is uniform and
    // the integrand is symmetric in it.
    let (nu, nt) = (4000, 1000);
    let u_max = 50.0;
    let simpson = |i: usize, n: usize| -> f64 {
        if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        }
    };
    let du = u_max / nu as f64;
    let dt = std::f64::consts::PI / nt as f64;
    let mut total = 0.0;
    for i in 0..=nu {
        let u = i as f64 * du;
        let r = (v * u).sqrt();
        let mut inner = 0.0;
        for j in 0..=nt {
            let t = j as f64 * dt;
            let gain = a2 + r * r + 2.0 * a * r * t.cos();
            inner += simpson(j, nt) * (gain * snr).ln_1p();
        }
        inner *= dt / 3.0 / std::f64::consts::PI;
        total += simpson(i, nu) * (-u).exp() * inner;
    }
    total * du / 3.0 / std::f64::consts::LN_2
}
