//! Dual decomposition of the average-constrained rate maximization problems.
//!
//! Without CSIT the transmit power is fixed and only the energy constraint is
//! dualized; its price `lambda` is found by bisection. With CSIT the average
//! power constraint adds a second price `beta` and the pair is located with a
//! two-dimensional ellipsoid method. In both cases the per-state maximizers
//! come from [`crate::siso`] (or [`crate::simo`] for antenna switching).
//!
//! All prices are quoted for the received (pre-efficiency) energy; reported
//! energies and targets include the efficiency.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fading::{total_gain, FadingEnsemble};
use crate::siso::{self, DpsCsit, LinkParams, StateDecision, TimeSwitchCsit, TimeSwitchNoCsit};

/// States per block in the parallel reductions. Fixed so that every
/// average is summed in the same order regardless of thread count.
const BLOCK_STATES: usize = 1024;
/// Dual iterates kept for primal recovery.
const RECOVERY_WINDOW: usize = 40;
/// Largest energy price considered for the ideal receiver, in units of
/// `1/sigma^2`.
const IDEAL_LAMBDA_CAP: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DualPoint {
    /// Price of the average harvested energy constraint.
    pub lambda: f64,
    /// Price of the average transmit power constraint; zero without CSIT.
    pub beta: f64,
}

impl DualPoint {
    pub fn new(lambda: f64, beta: f64) -> Self {
        Self { lambda, beta }
    }
}

/// Exact ensemble means of a policy together with its per-state decisions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolicySummary {
    /// Nats per channel use.
    pub avg_rate: f64,
    /// Watts, after conversion losses.
    pub avg_energy: f64,
    pub avg_power: f64,
    pub per_state: Vec<StateDecision>,
}

impl PolicySummary {
    pub fn from_decisions(per_state: Vec<StateDecision>) -> Self {
        let n = per_state.len().max(1) as f64;
        let (mut r, mut e, mut p) = (0.0, 0.0, 0.0);
        for d in &per_state {
            r += d.rate;
            e += d.energy;
            p += d.power;
        }
        Self {
            avg_rate: r / n,
            avg_energy: e / n,
            avg_power: p / n,
            per_state,
        }
    }
}

/// Applies `decide` to every state and averages the outcomes.
pub fn evaluate_policy<F>(ensemble: &FadingEnsemble, decide: F) -> Result<PolicySummary>
where
    F: Fn(&[f64]) -> Result<StateDecision> + Sync + Send,
{
    let per_state = ensemble
        .par_states()
        .map(decide)
        .collect::<Result<Vec<_>>>()?;
    Ok(PolicySummary::from_decisions(per_state))
}

/// Subgradient of the dual function: `(avg_energy - q_target, p_avg - avg_power)`.
pub fn subgradient(summary: &PolicySummary, q_target: f64, p_avg: f64) -> [f64; 2] {
    [summary.avg_energy - q_target, p_avg - summary.avg_power]
}

/// Means of a policy without the per-state record.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Averages {
    pub rate: f64,
    pub energy: f64,
    pub power: f64,
}

fn fold_decisions<F>(ensemble: &FadingEnsemble, decide: F) -> Averages
where
    F: Fn(usize, &[f64]) -> StateDecision + Sync + Send,
{
    let m = ensemble.num_antennas();
    let partial: Vec<[f64; 3]> = ensemble
        .gains()
        .par_chunks(BLOCK_STATES * m)
        .enumerate()
        .map(|(b, block)| {
            let mut acc = [0.0; 3];
            for (j, s) in block.chunks_exact(m).enumerate() {
                let d = decide(b * BLOCK_STATES + j, s);
                acc[0] += d.rate;
                acc[1] += d.energy;
                acc[2] += d.power;
            }
            acc
        })
        .collect();
    let mut total = [0.0; 3];
    for acc in partial {
        for k in 0..3 {
            total[k] += acc[k];
        }
    }
    let n = ensemble.num_states() as f64;
    Averages {
        rate: total[0] / n,
        energy: total[1] / n,
        power: total[2] / n,
    }
}

fn collect_decisions<F>(ensemble: &FadingEnsemble, decide: F) -> Vec<StateDecision>
where
    F: Fn(usize, &[f64]) -> StateDecision + Sync + Send,
{
    ensemble
        .par_states()
        .enumerate()
        .map(|(i, s)| decide(i, s))
        .collect()
}

/// Per-state maximizer of the Lagrangian at a fixed dual point.
pub trait StateRule: Sync + Send {
    fn decide(&self, state: &[f64]) -> StateDecision;
}

/// How decisions of different dual points may be mixed within one state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Blend {
    /// Average the transmit power and the decoder power.
    PowerSplit,
    /// Average the transmit power of an ideal receiver.
    Ideal,
    /// Decisions are combinatorial; they mix only by time sharing a state.
    Discrete,
}

/// A family of per-state rules indexed by the dual variables.
pub trait DualScheme: Sync + Send {
    type Rule: StateRule;

    fn params(&self) -> &LinkParams;

    fn rule(&self, dual: DualPoint) -> Result<Self::Rule>;

    fn blend(&self) -> Blend;

    /// Upper end of the energy-price search interval.
    fn lambda_cap(&self) -> f64 {
        (1.0 - 1e-9) / self.params().noise_power
    }

    /// Decision at a prescribed transmit power that either decodes or
    /// harvests everything.
    fn fixed_power(&self, state: &[f64], power: f64, harvest: bool) -> StateDecision {
        let alpha = if harvest { 0.0 } else { 1.0 };
        StateDecision::split(total_gain(state), power, alpha, self.params())
    }
}

pub fn averages<R: StateRule + ?Sized>(ensemble: &FadingEnsemble, rule: &R) -> Averages {
    fold_decisions(ensemble, |_, s| rule.decide(s))
}

/// Dynamic power splitting at constant power.
#[derive(Debug, Clone, Copy)]
pub struct SplitNoCsit(pub LinkParams);

#[derive(Debug, Clone, Copy)]
pub struct SplitNoCsitRule {
    params: LinkParams,
    /// Decoder power `1/lambda - sigma^2`.
    id_cap: f64,
}

impl StateRule for SplitNoCsitRule {
    fn decide(&self, state: &[f64]) -> StateDecision {
        let h = total_gain(state);
        let p = self.params.tx_power_avg;
        let received = h * p;
        let alpha = if received > 0.0 && received >= self.id_cap {
            (self.id_cap / received).min(1.0)
        } else {
            1.0
        };
        StateDecision::split(h, p, alpha, &self.params)
    }
}

impl DualScheme for SplitNoCsit {
    type Rule = SplitNoCsitRule;

    fn params(&self) -> &LinkParams {
        &self.0
    }

    fn rule(&self, dual: DualPoint) -> Result<SplitNoCsitRule> {
        // Validates the price range.
        siso::dps_alpha_no_csit(0.0, self.0.tx_power_avg, self.0.noise_power, dual.lambda)?;
        let id_cap = if dual.lambda > 0.0 {
            1.0 / dual.lambda - self.0.noise_power
        } else {
            f64::INFINITY
        };
        Ok(SplitNoCsitRule {
            params: self.0,
            id_cap,
        })
    }

    fn blend(&self) -> Blend {
        Blend::PowerSplit
    }
}

/// Time switching at constant power.
#[derive(Debug, Clone, Copy)]
pub struct SwitchNoCsit(pub LinkParams);

#[derive(Debug, Clone, Copy)]
pub struct SwitchNoCsitRule(TimeSwitchNoCsit, LinkParams);

impl StateRule for SwitchNoCsitRule {
    fn decide(&self, state: &[f64]) -> StateDecision {
        self.0.decide(total_gain(state), &self.1)
    }
}

impl DualScheme for SwitchNoCsit {
    type Rule = SwitchNoCsitRule;

    fn params(&self) -> &LinkParams {
        &self.0
    }

    fn rule(&self, dual: DualPoint) -> Result<SwitchNoCsitRule> {
        Ok(SwitchNoCsitRule(TimeSwitchNoCsit::new(&self.0, dual.lambda)?, self.0))
    }

    fn blend(&self) -> Blend {
        Blend::Discrete
    }
}

/// Joint power control and dynamic power splitting.
#[derive(Debug, Clone, Copy)]
pub struct SplitCsit(pub LinkParams);

impl StateRule for DpsCsit {
    fn decide(&self, state: &[f64]) -> StateDecision {
        DpsCsit::decide(self, total_gain(state))
    }
}

impl DualScheme for SplitCsit {
    type Rule = DpsCsit;

    fn params(&self) -> &LinkParams {
        &self.0
    }

    fn rule(&self, dual: DualPoint) -> Result<DpsCsit> {
        siso::dps_policy_with_csit(0.0, &self.0, dual.lambda, dual.beta)?;
        Ok(DpsCsit::new(&self.0, dual.lambda, dual.beta))
    }

    fn blend(&self) -> Blend {
        Blend::PowerSplit
    }
}

/// Joint power control and time switching.
#[derive(Debug, Clone, Copy)]
pub struct SwitchCsit(pub LinkParams);

impl StateRule for TimeSwitchCsit {
    fn decide(&self, state: &[f64]) -> StateDecision {
        TimeSwitchCsit::decide(self, total_gain(state))
    }
}

impl DualScheme for SwitchCsit {
    type Rule = TimeSwitchCsit;

    fn params(&self) -> &LinkParams {
        &self.0
    }

    fn rule(&self, dual: DualPoint) -> Result<TimeSwitchCsit> {
        TimeSwitchCsit::new(&self.0, dual.lambda, dual.beta)
    }

    fn blend(&self) -> Blend {
        Blend::Discrete
    }
}

/// Power control for a receiver that decodes and harvests the same signal.
#[derive(Debug, Clone, Copy)]
pub struct IdealCsit(pub LinkParams);

#[derive(Debug, Clone, Copy)]
pub struct IdealRule {
    params: LinkParams,
    dual: DualPoint,
}

impl StateRule for IdealRule {
    fn decide(&self, state: &[f64]) -> StateDecision {
        siso::upper_bound_decide(total_gain(state), &self.params, self.dual.lambda, self.dual.beta)
    }
}

impl DualScheme for IdealCsit {
    type Rule = IdealRule;

    fn params(&self) -> &LinkParams {
        &self.0
    }

    fn rule(&self, dual: DualPoint) -> Result<IdealRule> {
        siso::upper_bound_policy(0.0, &self.0, dual.lambda, dual.beta)?;
        Ok(IdealRule {
            params: self.0,
            dual,
        })
    }

    fn blend(&self) -> Blend {
        Blend::Ideal
    }

    fn lambda_cap(&self) -> f64 {
        IDEAL_LAMBDA_CAP / self.0.noise_power
    }

    fn fixed_power(&self, state: &[f64], power: f64, _harvest: bool) -> StateDecision {
        siso::upper_bound_at_power(total_gain(state), power, &self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Bisection stops once the energy is within this fraction of `Q_max`.
    pub bisection_tol: f64,
    /// Relative size of the final ellipsoid along each axis.
    pub ellipsoid_tol: f64,
    pub max_iterations: usize,
    /// Relative duality gap accepted from a search that hits
    /// `max_iterations`.
    pub residual_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            bisection_tol: 1e-6,
            ellipsoid_tol: 1e-7,
            max_iterations: 500,
            residual_tol: 1e-3,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be > 0 (got {v})")))
            }
        };
        positive("bisection_tol", self.bisection_tol)?;
        positive("ellipsoid_tol", self.ellipsoid_tol)?;
        positive("residual_tol", self.residual_tol)?;
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DualSolution {
    pub dual: DualPoint,
    pub summary: PolicySummary,
    /// Bisection steps or ellipsoid cuts spent.
    pub iterations: usize,
}

/// Largest average harvested power without CSIT: everything harvested.
pub fn q_max_no_csit(ensemble: &FadingEnsemble, params: &LinkParams) -> f64 {
    params.harvest_efficiency * ensemble.mean_total_gain() * params.tx_power_avg
}

/// Ergodic rate without CSIT when everything is decoded, in nats.
pub fn r_max_no_csit(ensemble: &FadingEnsemble, params: &LinkParams) -> f64 {
    let p = params.tx_power_avg;
    ensemble
        .states()
        .map(|s| (total_gain(s) * p / params.noise_power).ln_1p())
        .sum::<f64>()
        / ensemble.num_states() as f64
}

fn check_target(q_target: f64, q_max: f64) -> Result<()> {
    if !(q_target >= 0.0) || !q_target.is_finite() {
        return Err(Error::Argument(format!("energy target must be >= 0 (got {q_target})")));
    }
    if q_target > q_max * (1.0 + 1e-12) {
        return Err(Error::InfeasibleTarget {
            target: q_target,
            max: q_max,
        });
    }
    Ok(())
}

/// Bisection on the energy price of a constant-power scheme.
///
/// For schemes whose energy varies continuously with `lambda` the returned
/// policy meets the target within `tol` watts; for discrete schemes the
/// returned price is the smallest one found whose policy meets the target.
pub fn solve_p1<S: DualScheme>(
    scheme: &S,
    ensemble: &FadingEnsemble,
    q_target: f64,
    tol: f64,
) -> Result<DualSolution> {
    let q_max = q_max_no_csit(ensemble, scheme.params());
    check_target(q_target, q_max)?;
    if !(tol > 0.0) {
        return Err(Error::Argument(format!("tolerance must be > 0 (got {tol})")));
    }
    let energy_at = |lambda: f64| -> Result<f64> {
        Ok(averages(ensemble, &scheme.rule(DualPoint::new(lambda, 0.0))?).energy)
    };
    let finish = |lambda: f64, iterations: usize| -> Result<DualSolution> {
        let rule = scheme.rule(DualPoint::new(lambda, 0.0))?;
        Ok(DualSolution {
            dual: DualPoint::new(lambda, 0.0),
            summary: PolicySummary::from_decisions(collect_decisions(ensemble, |_, s| rule.decide(s))),
            iterations,
        })
    };

    if energy_at(0.0)? >= q_target {
        return finish(0.0, 0);
    }
    let cap = scheme.lambda_cap();
    if energy_at(cap)? < q_target - tol {
        return Err(Error::InfeasibleTarget {
            target: q_target,
            max: q_max,
        });
    }
    let continuous = scheme.blend() != Blend::Discrete;
    let (mut lo, mut hi) = (0.0, cap);
    let mut iterations = 0;
    while iterations < 400 && hi - lo > 1e-15 * cap {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let e = energy_at(mid)?;
        if continuous && (e - q_target).abs() <= tol {
            return finish(mid, iterations);
        }
        if e >= q_target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    finish(hi, iterations)
}

/// Dynamic power splitting without CSIT; returns `lambda*` and the policy.
pub fn solve_p1_bisection(
    ensemble: &FadingEnsemble,
    params: &LinkParams,
    q_target: f64,
    tol: f64,
) -> Result<(f64, PolicySummary)> {
    params.validate()?;
    let s = solve_p1(&SplitNoCsit(*params), ensemble, q_target, tol)?;
    Ok((s.dual.lambda, s.summary))
}

/// Extreme policies of the CSIT problems, shared by every scheme on the
/// same ensemble.
#[derive(Debug, Clone)]
pub struct CsitCorners {
    /// Peak power on the strongest states until the average budget is spent.
    pub greedy_powers: Vec<f64>,
    /// Water-filling with the peak-power clip.
    pub water_filling_powers: Vec<f64>,
    /// Power price at which water-filling meets the average budget.
    pub water_level_beta: f64,
    /// Largest average harvested power (after conversion losses).
    pub q_max: f64,
    /// Ergodic capacity with water-filling, in nats.
    pub r_max: f64,
    pub max_gain: f64,
}

impl CsitCorners {
    pub fn new(ensemble: &FadingEnsemble, params: &LinkParams) -> Self {
        let gains = ensemble.total_gains();
        let n = gains.len() as f64;
        let greedy_powers = greedy_peak_powers(&gains, params);
        let (water_level_beta, water_filling_powers) = water_filling_powers(&gains, params);
        let q_max = params.harvest_efficiency
            * gains.iter().zip(&greedy_powers).map(|(h, p)| h * p).sum::<f64>()
            / n;
        let r_max = gains
            .iter()
            .zip(&water_filling_powers)
            .map(|(h, p)| (h * p / params.noise_power).ln_1p())
            .sum::<f64>()
            / n;
        Self {
            greedy_powers,
            water_filling_powers,
            water_level_beta,
            q_max,
            r_max,
            max_gain: gains.iter().copied().fold(0.0, f64::max),
        }
    }
}

/// Peak power in decreasing-gain order until the average budget runs out;
/// the last state served receives the remainder.
pub fn greedy_peak_powers(gains: &[f64], params: &LinkParams) -> Vec<f64> {
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));
    let mut budget = gains.len() as f64 * params.tx_power_avg;
    let mut powers = vec![0.0; gains.len()];
    for i in order {
        if budget <= 0.0 {
            break;
        }
        let take = params.tx_power_peak.min(budget);
        powers[i] = take;
        budget -= take;
    }
    powers
}

/// Water-filling powers meeting the average budget and the power price
/// that produces them.
pub fn water_filling_powers(gains: &[f64], params: &LinkParams) -> (f64, Vec<f64>) {
    let (s2, peak) = (params.noise_power, params.tx_power_peak);
    let mean_power = |beta: f64| {
        gains
            .iter()
            .map(|&h| siso::water_filling_power(h, beta, s2, peak))
            .sum::<f64>()
            / gains.len() as f64
    };
    let beta = if mean_power(0.0) <= params.tx_power_avg {
        0.0
    } else {
        let mut hi = gains.iter().copied().fold(0.0, f64::max) / s2;
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if mean_power(mid) > params.tx_power_avg {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    let powers = gains
        .iter()
        .map(|&h| siso::water_filling_power(h, beta, s2, peak))
        .collect();
    (beta, powers)
}

/// Ellipsoid `{z : (z - c)^T A^{-1} (z - c) <= 1}` in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipsoidState {
    pub center: [f64; 2],
    pub shape: [[f64; 2]; 2],
    pub iteration: usize,
}

impl EllipsoidState {
    pub fn new(center: [f64; 2], shape: [[f64; 2]; 2]) -> Self {
        Self {
            center,
            shape,
            iteration: 0,
        }
    }

    /// Smallest disc around the unit square.
    pub fn unit_box() -> Self {
        Self::new([0.5, 0.5], [[0.5, 0.0], [0.0, 0.5]])
    }

    /// Central cut keeping the half `{z : g.(z - c) <= 0}`. Returns `false`
    /// without changing the state when `g` is degenerate.
    pub fn cut(&mut self, g: [f64; 2]) -> bool {
        let a = self.shape;
        let ag = [a[0][0] * g[0] + a[0][1] * g[1], a[1][0] * g[0] + a[1][1] * g[1]];
        let gag = g[0] * ag[0] + g[1] * ag[1];
        if !(gag > 0.0 && gag.is_finite()) {
            return false;
        }
        let s = gag.sqrt();
        let b = [ag[0] / s, ag[1] / s];
        self.center[0] -= b[0] / 3.0;
        self.center[1] -= b[1] / 3.0;
        let mut next = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                next[i][j] = 4.0 / 3.0 * (a[i][j] - 2.0 / 3.0 * b[i] * b[j]);
            }
        }
        let off = 0.5 * (next[0][1] + next[1][0]);
        next[0][1] = off;
        next[1][0] = off;
        self.shape = next;
        self.iteration += 1;
        true
    }

    /// Half-widths of the bounding box of the ellipsoid.
    pub fn half_widths(&self) -> [f64; 2] {
        [self.shape[0][0].sqrt(), self.shape[1][1].sqrt()]
    }

    pub fn contains(&self, z: [f64; 2]) -> bool {
        let a = self.shape;
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let d = [z[0] - self.center[0], z[1] - self.center[1]];
        let q = (a[1][1] * d[0] * d[0] - 2.0 * a[0][1] * d[0] * d[1] + a[0][0] * d[1] * d[1]) / det;
        q <= 1.0 + 1e-9
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Source {
    Dual(DualPoint),
    Greedy,
    WaterFilling,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    source: Source,
    avg: Averages,
}

/// Ellipsoid search over `(lambda, beta)` followed by primal recovery.
///
/// Prices are searched in the box `[0, lambda_cap] x [0, beta_cap]` with
/// `beta_cap = h_max (1/sigma^2 + lambda_cap)`, beyond which no state
/// transmits. Iterates outside the box receive a feasibility cut. After the
/// search, the recent iterates and the two corner policies are mixed by a
/// small linear program so that both constraints hold. Discrete schemes mix
/// by time sharing inside each state. A search that hits the iteration cap
/// must be certified by its duality gap.
pub fn solve_p2<S: DualScheme>(
    scheme: &S,
    ensemble: &FadingEnsemble,
    corners: &CsitCorners,
    q_target: f64,
    options: &SolverOptions,
) -> Result<DualSolution> {
    check_target(q_target, corners.q_max)?;
    let params = *scheme.params();
    let xi = params.harvest_efficiency;
    let p_avg = params.tx_power_avg;

    let wf_avg = fold_decisions(ensemble, |i, s| {
        scheme.fixed_power(s, corners.water_filling_powers[i], false)
    });
    if wf_avg.energy >= q_target {
        let per_state = collect_decisions(ensemble, |i, s| {
            scheme.fixed_power(s, corners.water_filling_powers[i], false)
        });
        return Ok(DualSolution {
            dual: DualPoint::new(0.0, corners.water_level_beta),
            summary: PolicySummary::from_decisions(per_state),
            iterations: 0,
        });
    }

    let lambda_cap = scheme.lambda_cap();
    let beta_cap = corners.max_gain * (1.0 / params.noise_power + lambda_cap);
    let to_dual = |c: [f64; 2]| {
        DualPoint::new(c[0].clamp(0.0, 1.0) * lambda_cap, c[1].clamp(0.0, 1.0) * beta_cap)
    };

    let mut ellipsoid = EllipsoidState::unit_box();
    let mut recent: VecDeque<Candidate> = VecDeque::with_capacity(RECOVERY_WINDOW);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < options.max_iterations {
        iterations += 1;
        let c = ellipsoid.center;
        let g = if c[0] < 0.0 {
            [-1.0, 0.0]
        } else if c[0] > 1.0 {
            [1.0, 0.0]
        } else if c[1] < 0.0 {
            [0.0, -1.0]
        } else if c[1] > 1.0 {
            [0.0, 1.0]
        } else {
            let dual = to_dual(c);
            let avg = averages(ensemble, &scheme.rule(dual)?);
            if recent.len() == RECOVERY_WINDOW {
                recent.pop_front();
            }
            recent.push_back(Candidate {
                source: Source::Dual(dual),
                avg,
            });
            [
                (avg.energy - q_target) / xi * lambda_cap,
                (p_avg - avg.power) * beta_cap,
            ]
        };
        if g == [0.0, 0.0] || !ellipsoid.cut(g) {
            converged = true;
            break;
        }
        let w = ellipsoid.half_widths();
        let c = ellipsoid.center;
        let tol = options.ellipsoid_tol;
        if w[0] <= tol * c[0].abs() + 1e-14 && w[1] <= tol * c[1].abs() + 1e-14 {
            converged = true;
            break;
        }
    }

    let mut candidates: Vec<Candidate> = recent.into_iter().collect();
    let c = ellipsoid.center;
    let w = ellipsoid.half_widths();
    for probe in [
        c,
        [c[0] - w[0], c[1]],
        [c[0] + w[0], c[1]],
        [c[0], c[1] - w[1]],
        [c[0], c[1] + w[1]],
    ] {
        let dual = to_dual(probe);
        candidates.push(Candidate {
            source: Source::Dual(dual),
            avg: averages(ensemble, &scheme.rule(dual)?),
        });
    }
    candidates.push(Candidate {
        source: Source::WaterFilling,
        avg: wf_avg,
    });
    candidates.push(Candidate {
        source: Source::Greedy,
        avg: fold_decisions(ensemble, |i, s| {
            scheme.fixed_power(s, corners.greedy_powers[i], true)
        }),
    });

    let final_dual = to_dual(c);
    let decide_with = |source: Source| -> Result<Box<dyn Fn(usize, &[f64]) -> StateDecision + Sync + Send + '_>> {
        Ok(match source {
            Source::Dual(d) => {
                let rule = scheme.rule(d)?;
                Box::new(move |_, s| rule.decide(s))
            }
            Source::Greedy => Box::new(|i, s| scheme.fixed_power(s, corners.greedy_powers[i], true)),
            Source::WaterFilling => {
                Box::new(|i, s| scheme.fixed_power(s, corners.water_filling_powers[i], false))
            }
        })
    };

    let blend = scheme.blend();
    let points: Vec<[f64; 3]> = candidates
        .iter()
        .map(|c| [c.avg.rate, c.avg.energy, c.avg.power])
        .collect();
    let energy_scale = corners.q_max.max(f64::MIN_POSITIVE);

    let mix = best_mixture(&points, q_target, p_avg, energy_scale).ok_or_else(|| {
        let last = recent_residuals(&candidates, q_target, p_avg);
        Error::NonConvergence {
            last: final_dual,
            iterations,
            energy_residual: last.0,
            power_residual: last.1,
        }
    })?;
    let parts = mix
        .iter()
        .map(|&(k, w)| Ok((w, decide_with(candidates[k].source)?)))
        .collect::<Result<Vec<_>>>()?;
    let per_state = collect_decisions(ensemble, |i, s| {
        let h = total_gain(s);
        let mut out = StateDecision {
            power: 0.0,
            split_id: 0.0,
            rate: 0.0,
            energy: 0.0,
        };
        let mut id = 0.0;
        for (w, decide) in &parts {
            let d = decide(i, s);
            out.power += w * d.power;
            out.split_id += w * d.split_id;
            out.rate += w * d.rate;
            out.energy += w * d.energy;
            id += w * d.id_power(h);
        }
        match blend {
            // Time sharing inside the state averages every outcome.
            Blend::Discrete => out,
            Blend::Ideal => siso::upper_bound_at_power(h, out.power, &params),
            Blend::PowerSplit => {
                let received = h * out.power;
                let alpha = if received > 0.0 { (id / received).clamp(0.0, 1.0) } else { 1.0 };
                StateDecision::split(h, out.power, alpha, &params)
            }
        }
    });
    let summary = PolicySummary::from_decisions(per_state);
    if !converged {
        // The search ran out of iterations: accept the primal point only if
        // the best dual bound seen certifies it.
        let bound = candidates
            .iter()
            .filter_map(|c| match c.source {
                Source::Dual(d) => Some(
                    c.avg.rate + d.lambda * (c.avg.energy - q_target) / xi + d.beta * (p_avg - c.avg.power),
                ),
                _ => None,
            })
            .fold(f64::INFINITY, f64::min);
        if bound - summary.avg_rate > options.residual_tol * bound.abs().max(f64::MIN_POSITIVE) {
            let last = recent_residuals(&candidates, q_target, p_avg);
            return Err(Error::NonConvergence {
                last: final_dual,
                iterations,
                energy_residual: last.0,
                power_residual: last.1,
            });
        }
    }
    Ok(DualSolution {
        dual: final_dual,
        summary,
        iterations,
    })
}

fn recent_residuals(candidates: &[Candidate], q_target: f64, p_avg: f64) -> (f64, f64) {
    candidates
        .iter()
        .rev()
        .find(|c| matches!(c.source, Source::Dual(_)))
        .map_or((f64::NAN, f64::NAN), |c| (c.avg.energy - q_target, p_avg - c.avg.power))
}

/// Largest-rate convex combination of at most three candidates with
/// `energy >= q_target` and `power <= p_avg`. Returns `(index, weight)` pairs.
fn best_mixture(points: &[[f64; 3]], q_target: f64, p_avg: f64, energy_scale: f64) -> Option<Vec<(usize, f64)>> {
    const EPS: f64 = 1e-12;
    // Normalized slacks: feasible iff e >= 0 and p <= 0.
    let e: Vec<f64> = points.iter().map(|x| (x[1] - q_target) / energy_scale).collect();
    let p: Vec<f64> = points.iter().map(|x| (x[2] - p_avg) / p_avg).collect();
    let r: Vec<f64> = points.iter().map(|x| x[0]).collect();
    let n = points.len();
    let mut best: Option<(f64, Vec<(usize, f64)>)> = None;
    let mut offer = |value: f64, mix: Vec<(usize, f64)>| {
        if best.as_ref().is_none_or(|(v, _)| value > *v) {
            best = Some((value, mix));
        }
    };

    for k in 0..n {
        if e[k] >= -EPS && p[k] <= EPS {
            offer(r[k], vec![(k, 1.0)]);
        }
    }
    // Weight w on k and 1 - w on l; both constraints are linear in w.
    let interval = |a: f64, b: f64, lo: &mut f64, hi: &mut f64| {
        // a + b w >= -EPS
        if b > 0.0 {
            *lo = lo.max((-EPS - a) / b);
        } else if b < 0.0 {
            *hi = hi.min((-EPS - a) / b);
        } else if a < -EPS {
            *hi = -1.0;
        }
    };
    for k in 0..n {
        for l in k + 1..n {
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            interval(e[l], e[k] - e[l], &mut lo, &mut hi);
            interval(-p[l], p[l] - p[k], &mut lo, &mut hi);
            if lo > hi {
                continue;
            }
            for w in [lo, hi] {
                offer(w * r[k] + (1.0 - w) * r[l], vec![(k, w), (l, 1.0 - w)]);
            }
        }
    }
    for k in 0..n {
        for l in k + 1..n {
            for m in l + 1..n {
                // [1 1 1; e; p] w = [1; 0; 0]
                let det = e[l] * p[m] - e[m] * p[l] - (e[k] * p[m] - e[m] * p[k]) + (e[k] * p[l] - e[l] * p[k]);
                if det.abs() < 1e-300 {
                    continue;
                }
                let wk = (e[l] * p[m] - e[m] * p[l]) / det;
                let wl = (e[m] * p[k] - e[k] * p[m]) / det;
                let wm = (e[k] * p[l] - e[l] * p[k]) / det;
                if wk < -1e-12 || wl < -1e-12 || wm < -1e-12 {
                    continue;
                }
                let (wk, wl, wm) = (wk.max(0.0), wl.max(0.0), wm.max(0.0));
                let s = wk + wl + wm;
                let w = [wk / s, wl / s, wm / s];
                let en = w[0] * e[k] + w[1] * e[l] + w[2] * e[m];
                let pw = w[0] * p[k] + w[1] * p[l] + w[2] * p[m];
                if en < -EPS || pw > EPS {
                    continue;
                }
                offer(
                    w[0] * r[k] + w[1] * r[l] + w[2] * r[m],
                    vec![(k, w[0]), (l, w[1]), (m, w[2])],
                );
            }
        }
    }
    best.map(|(_, mix)| mix.into_iter().filter(|&(_, w)| w > 0.0).collect())
}

/// Dynamic power splitting with CSIT; returns the prices and the policy.
pub fn solve_p2_ellipsoid(
    ensemble: &FadingEnsemble,
    params: &LinkParams,
    q_target: f64,
    tol: f64,
) -> Result<(DualPoint, PolicySummary)> {
    params.validate()?;
    let options = SolverOptions {
        ellipsoid_tol: tol,
        ..SolverOptions::default()
    };
    let corners = CsitCorners::new(ensemble, params);
    let s = solve_p2(&SplitCsit(*params), ensemble, &corners, q_target, &options)?;
    Ok((s.dual, s.summary))
}
