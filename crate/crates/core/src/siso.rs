//! Per-fading-state maximizers for the single-antenna schemes.
//!
//! Every function here solves the Lagrangian subproblem of one fading state
//! in closed form (or through a one-dimensional threshold). Rates are in
//! nats; energies include the harvester efficiency `xi`, while the dual
//! variable `lambda` prices the received (pre-`xi`) energy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots;

/// Relative tolerance of every threshold root solve.
pub const ROOT_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    /// Average transmit power budget; also the constant power without CSIT.
    pub tx_power_avg: f64,
    pub tx_power_peak: f64,
    /// Noise power added by the information decoder.
    pub noise_power: f64,
    /// RF-to-DC conversion efficiency of the energy harvester.
    pub harvest_efficiency: f64,
}

impl Default for LinkParams {
    fn default() -> Self {
        Self {
            tx_power_avg: 0.1,
            tx_power_peak: 0.2,
            noise_power: 1e-8,
            harvest_efficiency: 0.5,
        }
    }
}

impl LinkParams {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.tx_power_avg.is_finite() && self.tx_power_avg > 0.0) {
            problems.push(format!("tx_power_avg must be > 0 (got {})", self.tx_power_avg));
        }
        if !(self.tx_power_peak.is_finite() && self.tx_power_peak >= self.tx_power_avg) {
            problems.push(format!(
                "tx_power_avg ({}) must not exceed tx_power_peak ({})",
                self.tx_power_avg, self.tx_power_peak
            ));
        }
        if !(self.noise_power.is_finite() && self.noise_power > 0.0) {
            problems.push(format!("noise_power must be > 0 (got {})", self.noise_power));
        }
        if !(self.harvest_efficiency > 0.0 && self.harvest_efficiency <= 1.0) {
            problems.push(format!(
                "harvest_efficiency must lie in (0, 1] (got {})",
                self.harvest_efficiency
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// Largest admissible energy price, `1/sigma^2`.
    pub fn lambda_limit(&self) -> f64 {
        1.0 / self.noise_power
    }
}

/// Outcome of the policy at one fading state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateDecision {
    /// Transmit power `p`.
    pub power: f64,
    /// Fraction `alpha` of the received power routed to the decoder. For
    /// antenna switching this is the equivalent uniform ratio.
    pub split_id: f64,
    /// Instantaneous rate in nats per channel use.
    pub rate: f64,
    /// Harvested power after conversion losses.
    pub energy: f64,
}

impl StateDecision {
    /// Decision for received gain `h`, power `p` and split `alpha`.
    pub fn split(h: f64, p: f64, alpha: f64, params: &LinkParams) -> Self {
        let received = h * p;
        Self {
            power: p,
            split_id: alpha,
            rate: (alpha * received / params.noise_power).ln_1p(),
            energy: params.harvest_efficiency * (1.0 - alpha) * received,
        }
    }

    /// Silent state: nothing transmitted.
    pub fn off() -> Self {
        Self {
            power: 0.0,
            split_id: 1.0,
            rate: 0.0,
            energy: 0.0,
        }
    }

    /// Power reaching the information decoder.
    pub fn id_power(&self, h: f64) -> f64 {
        self.split_id * h * self.power
    }
}

fn check_split_args(h: f64, p: f64, alpha: f64) -> Result<()> {
    if !(h >= 0.0 && h.is_finite()) {
        return Err(Error::Argument(format!("gain must be finite and >= 0 (got {h})")));
    }
    if !(p >= 0.0 && p.is_finite()) {
        return Err(Error::Argument(format!("power must be finite and >= 0 (got {p})")));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Argument(format!("split ratio must lie in [0, 1] (got {alpha})")));
    }
    Ok(())
}

fn check_dual(name: &str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!("{name} must be finite and >= 0 (got {value})")))
    }
}

/// Instantaneous rate `ln(1 + alpha h p / sigma^2)` in nats.
pub fn rate(h: f64, p: f64, alpha: f64, sigma2: f64) -> Result<f64> {
    check_split_args(h, p, alpha)?;
    if !(sigma2 > 0.0) {
        return Err(Error::Argument(format!("noise power must be > 0 (got {sigma2})")));
    }
    Ok((alpha * h * p / sigma2).ln_1p())
}

/// Harvested power `xi (1 - alpha) h p`.
pub fn energy(h: f64, p: f64, alpha: f64, xi: f64) -> Result<f64> {
    check_split_args(h, p, alpha)?;
    if !(xi > 0.0 && xi <= 1.0) {
        return Err(Error::Argument(format!("efficiency must lie in (0, 1] (got {xi})")));
    }
    Ok(xi * (1.0 - alpha) * h * p)
}

/// Optimal dynamic power split without CSIT.
///
/// The decoder receives `min(h P, 1/lambda - sigma^2)`; the rest of the
/// received power is harvested.
pub fn dps_alpha_no_csit(h: f64, p: f64, sigma2: f64, lambda: f64) -> Result<f64> {
    check_split_args(h, p, 1.0)?;
    check_dual("lambda", lambda)?;
    if lambda > 1.0 / sigma2 {
        return Err(Error::InfeasibleDual(format!(
            "lambda = {lambda:e} exceeds 1/sigma^2 = {:e}",
            1.0 / sigma2
        )));
    }
    if lambda == 0.0 {
        return Ok(1.0);
    }
    let threshold = 1.0 / (lambda * p) - sigma2 / p;
    if h > 0.0 && h >= threshold {
        Ok(((1.0 / lambda - sigma2) / (h * p)).clamp(0.0, 1.0))
    } else {
        Ok(1.0)
    }
}

/// Full decision for dynamic power splitting without CSIT (`p = P_avg`).
pub fn dps_policy_no_csit(h: f64, params: &LinkParams, lambda: f64) -> Result<StateDecision> {
    let p = params.tx_power_avg;
    let alpha = dps_alpha_no_csit(h, p, params.noise_power, lambda)?;
    Ok(StateDecision::split(h, p, alpha, params))
}

/// Gain `h` at which decoding and harvesting are worth the same to a
/// time-switching receiver without CSIT: `ln(1 + hP/sigma^2) = lambda h P`.
///
/// `lambda = 0` maps to an infinite threshold (never harvest).
pub fn ts_threshold_no_csit(p: f64, sigma2: f64, lambda_ts: f64) -> Result<f64> {
    check_dual("lambda", lambda_ts)?;
    if !(p > 0.0 && sigma2 > 0.0) {
        return Err(Error::Argument("power and noise must be > 0".into()));
    }
    if lambda_ts == 0.0 {
        return Ok(f64::INFINITY);
    }
    // In SNR units x = hP/sigma^2 the equation reads ln(1+x) = c x.
    let c = lambda_ts * sigma2;
    if c >= 1.0 {
        return Err(Error::InfeasibleDual(format!(
            "lambda_ts = {lambda_ts:e} >= 1/sigma^2; no positive threshold exists"
        )));
    }
    let f = |x: f64| x.ln_1p() - c * x;
    // Near c -> 1 the root sits at x ~ 2(1 - c).
    let lo = (1.0 - c).min(1e-6);
    if !(f(lo) > 0.0) {
        return Err(Error::InfeasibleDual(format!(
            "lambda_ts = {lambda_ts:e} too close to 1/sigma^2 to resolve the threshold"
        )));
    }
    let hi = roots::expand_until_negative(f, 2.0 * lo.max(1.0))
        .ok_or_else(|| Error::InfeasibleDual("threshold equation has no sign change".into()))?;
    let x = roots::largest_root_log_scan(f, lo, hi, ROOT_REL_TOL);
    Ok(x * sigma2 / p)
}

/// Time-switching decision without CSIT: decode when `h <= h_bar`, harvest
/// otherwise; the transmit power is always `P_avg`.
pub fn ts_policy_no_csit(h: f64, params: &LinkParams, lambda_ts: f64) -> Result<StateDecision> {
    let threshold = ts_threshold_no_csit(params.tx_power_avg, params.noise_power, lambda_ts)?;
    check_split_args(h, params.tx_power_avg, 1.0)?;
    Ok(TimeSwitchNoCsit { threshold }.decide(h, params))
}

/// Time-switching rule without CSIT with its threshold precomputed.
#[derive(Debug, Clone, Copy)]
pub struct TimeSwitchNoCsit {
    pub threshold: f64,
}

impl TimeSwitchNoCsit {
    pub fn new(params: &LinkParams, lambda_ts: f64) -> Result<Self> {
        Ok(Self {
            threshold: ts_threshold_no_csit(params.tx_power_avg, params.noise_power, lambda_ts)?,
        })
    }

    pub fn decide(&self, h: f64, params: &LinkParams) -> StateDecision {
        let alpha = if h <= self.threshold { 1.0 } else { 0.0 };
        StateDecision::split(h, params.tx_power_avg, alpha, params)
    }
}

/// Water-filling power `[1/beta - sigma^2/h]` clipped to `[0, p_peak]`.
/// `beta = 0` means power is free and gives `p_peak` on every state with
/// `h > 0`.
pub fn water_filling_power(h: f64, beta: f64, sigma2: f64, p_peak: f64) -> f64 {
    if h <= 0.0 {
        return 0.0;
    }
    if beta == 0.0 {
        return p_peak;
    }
    (1.0 / beta - sigma2 / h).clamp(0.0, p_peak)
}

/// Joint transmit power control and receiver power splitting with CSIT.
///
/// With `h_tilde = 1/(lambda P_peak) - sigma^2/P_peak`:
///
/// * if `beta/lambda <= h_tilde`: peak power with `alpha = h_tilde/h` above
///   `h_tilde`; peak power with `alpha = 1` down to
///   `beta sigma^2 / (1 - beta P_peak)`; water-filling with `alpha = 1` down
///   to `beta sigma^2`; silence below.
/// * otherwise: peak power with `alpha = h_tilde/h` above `beta/lambda`;
///   water-filling with `alpha = 1` down to `beta sigma^2`; silence below.
///
/// `lambda = 0` is pure water-filling; `lambda = beta = 0` transmits at peak
/// power into the decoder.
pub fn dps_policy_with_csit(h: f64, params: &LinkParams, lambda: f64, beta: f64) -> Result<StateDecision> {
    check_split_args(h, 0.0, 1.0)?;
    check_dual("lambda", lambda)?;
    check_dual("beta", beta)?;
    if lambda >= params.lambda_limit() {
        return Err(Error::InfeasibleDual(format!(
            "lambda = {lambda:e} must stay below 1/sigma^2 = {:e}",
            params.lambda_limit()
        )));
    }
    Ok(DpsCsit::new(params, lambda, beta).decide(h))
}

/// Prepared form of [`dps_policy_with_csit`] for a fixed dual point.
#[derive(Debug, Clone, Copy)]
pub struct DpsCsit {
    params: LinkParams,
    lambda: f64,
    beta: f64,
    h_tilde: f64,
    /// Gain above which the transmitter uses peak power and the receiver
    /// starts splitting.
    split_from: f64,
    /// Gain above which water-filling saturates at peak power (case one only).
    peak_from: f64,
}

impl DpsCsit {
    /// Caller guarantees `0 <= lambda < 1/sigma^2` and `beta >= 0`.
    pub fn new(params: &LinkParams, lambda: f64, beta: f64) -> Self {
        let sigma2 = params.noise_power;
        let p_peak = params.tx_power_peak;
        let h_tilde = if lambda > 0.0 {
            1.0 / (lambda * p_peak) - sigma2 / p_peak
        } else {
            f64::INFINITY
        };
        let ratio = if lambda > 0.0 { beta / lambda } else { f64::INFINITY };
        let (split_from, peak_from) = if lambda > 0.0 && ratio <= h_tilde {
            let peak_from = if beta * p_peak < 1.0 {
                beta * sigma2 / (1.0 - beta * p_peak)
            } else {
                f64::INFINITY
            };
            (h_tilde, peak_from)
        } else {
            (ratio, f64::INFINITY)
        };
        Self {
            params: *params,
            lambda,
            beta,
            h_tilde,
            split_from,
            peak_from,
        }
    }

    pub fn decide(&self, h: f64) -> StateDecision {
        let params = &self.params;
        let sigma2 = params.noise_power;
        let p_peak = params.tx_power_peak;
        if self.lambda == 0.0 {
            let p = water_filling_power(h, self.beta, sigma2, p_peak);
            return if p > 0.0 {
                StateDecision::split(h, p, 1.0, params)
            } else {
                StateDecision::off()
            };
        }
        if h > 0.0 && h >= self.split_from {
            let alpha = (self.h_tilde / h).min(1.0);
            StateDecision::split(h, p_peak, alpha, params)
        } else if h > 0.0 && h >= self.peak_from {
            StateDecision::split(h, p_peak, 1.0, params)
        } else if h > 0.0 && h >= self.beta * sigma2 {
            let p = if self.beta == 0.0 {
                p_peak
            } else {
                (1.0 / self.beta - sigma2 / h).clamp(0.0, p_peak)
            };
            StateDecision::split(h, p, 1.0, params)
        } else {
            StateDecision::off()
        }
    }
}

/// Value of the best decode-only transmission at gain `h`:
/// `max_p ln(1 + hp/sigma^2) - beta p` over `0 <= p <= P_peak`.
fn decode_value(h: f64, beta: f64, params: &LinkParams) -> (f64, f64) {
    let p = water_filling_power(h, beta, params.noise_power, params.tx_power_peak);
    ((h * p / params.noise_power).ln_1p() - beta * p, p)
}

/// Largest gain at which a time-switching receiver with CSIT still prefers
/// decoding (water-filled power) over harvesting at peak power. For
/// unsaturated water-filling this is the largest root of
/// `ln(h/(beta sigma^2)) - 1 + beta sigma^2/h - lambda h P_peak + beta P_peak = 0`.
///
/// `lambda = 0` maps to an infinite threshold.
pub fn ts_threshold_with_csit(params: &LinkParams, lambda: f64, beta: f64) -> Result<f64> {
    check_dual("lambda", lambda)?;
    check_dual("beta", beta)?;
    if lambda == 0.0 {
        return Ok(f64::INFINITY);
    }
    if lambda >= params.lambda_limit() {
        return Err(Error::InfeasibleDual(format!(
            "lambda = {lambda:e} must stay below 1/sigma^2"
        )));
    }
    let sigma2 = params.noise_power;
    let p_peak = params.tx_power_peak;
    let gap = |h: f64| decode_value(h, beta, params).0 - (lambda * h - beta) * p_peak;
    // At h = beta sigma^2 decoding is worth 0 and harvesting is strictly
    // negative; with beta = 0 the gap is ~ (1 - lambda sigma^2) hP/sigma^2 > 0
    // for small h.
    let lo = if beta > 0.0 {
        beta * sigma2
    } else {
        ((1.0 - lambda * sigma2).min(1e-6)) * sigma2 / p_peak
    };
    if !(gap(lo) > 0.0) {
        return Err(Error::InfeasibleDual(format!(
            "no decode region for lambda = {lambda:e}, beta = {beta:e}"
        )));
    }
    let hi = roots::expand_until_negative(gap, 2.0 * lo.max(sigma2 / p_peak))
        .ok_or_else(|| Error::InfeasibleDual("threshold equation has no sign change".into()))?;
    Ok(roots::largest_root_log_scan(gap, lo, hi, ROOT_REL_TOL))
}

/// Time-switching decision with CSIT: silence for `h <= beta sigma^2`,
/// decoding with water-filling up to `h_hat`, harvesting at peak power above.
pub fn ts_policy_with_csit(h: f64, params: &LinkParams, lambda: f64, beta: f64) -> Result<StateDecision> {
    check_split_args(h, 0.0, 1.0)?;
    Ok(TimeSwitchCsit::new(params, lambda, beta)?.decide(h))
}

#[derive(Debug, Clone, Copy)]
pub struct TimeSwitchCsit {
    params: LinkParams,
    beta: f64,
    pub threshold: f64,
}

impl TimeSwitchCsit {
    pub fn new(params: &LinkParams, lambda: f64, beta: f64) -> Result<Self> {
        Ok(Self {
            params: *params,
            beta,
            threshold: ts_threshold_with_csit(params, lambda, beta)?,
        })
    }

    pub fn decide(&self, h: f64) -> StateDecision {
        let params = &self.params;
        if h <= 0.0 || h <= self.beta * params.noise_power {
            StateDecision::off()
        } else if h <= self.threshold {
            let (_, p) = decode_value(h, self.beta, params);
            StateDecision::split(h, p, 1.0, params)
        } else {
            StateDecision::split(h, params.tx_power_peak, 0.0, params)
        }
    }
}

/// Ideal receiver that decodes and harvests the same signal.
///
/// Peak power when `h >= beta/lambda`, otherwise
/// `[1/(beta - lambda h) - sigma^2/h]` clipped to `[0, P_peak]`. The decision
/// reports `split_id = 1` while its energy is the full received power.
pub fn upper_bound_policy(h: f64, params: &LinkParams, lambda: f64, beta: f64) -> Result<StateDecision> {
    check_split_args(h, 0.0, 1.0)?;
    check_dual("lambda", lambda)?;
    check_dual("beta", beta)?;
    Ok(upper_bound_decide(h, params, lambda, beta))
}

pub(crate) fn upper_bound_decide(h: f64, params: &LinkParams, lambda: f64, beta: f64) -> StateDecision {
    let p_peak = params.tx_power_peak;
    let p = if h <= 0.0 {
        0.0
    } else if lambda * h >= beta {
        p_peak
    } else {
        let margin = beta - lambda * h;
        assert!(margin > 0.0, "clamp branch requires beta > lambda h");
        (1.0 / margin - params.noise_power / h).clamp(0.0, p_peak)
    };
    upper_bound_at_power(h, p, params)
}

pub(crate) fn upper_bound_at_power(h: f64, p: f64, params: &LinkParams) -> StateDecision {
    let received = h * p;
    StateDecision {
        power: p,
        split_id: 1.0,
        rate: (received / params.noise_power).ln_1p(),
        energy: params.harvest_efficiency * received,
    }
}
