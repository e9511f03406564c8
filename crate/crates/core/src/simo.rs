//! Multi-antenna receivers: uniform power splitting, antenna switching and
//! trimmed-list subset selection.
//!
//! With maximal ratio combining a common splitting ratio on every antenna is
//! optimal, so uniform power splitting reduces to the single-antenna problem
//! on the summed gain ([`ups_reduce`]). Antenna switching instead routes each
//! antenna wholly to the decoder or to the harvester.

use serde::{Deserialize, Serialize};

use crate::duality::{Blend, DualPoint, DualScheme, StateRule};
use crate::error::{Error, Result};
use crate::fading::{total_gain, FadingEnsemble};
use crate::siso::{DpsCsit, LinkParams, StateDecision};

/// Largest array handled by the exhaustive partition search.
pub const MAX_EXHAUSTIVE_ANTENNAS: usize = 20;

/// Split of the receive antennas into a decoding and a harvesting group.
/// Bit `m` of the mask is set when antenna `m` feeds the decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AntennaPartition {
    id_mask: u64,
    num_antennas: usize,
}

impl AntennaPartition {
    pub fn new(id_mask: u64, num_antennas: usize) -> Result<Self> {
        if num_antennas > 64 {
            return Err(Error::Capacity {
                antennas: num_antennas,
                limit: 64,
            });
        }
        if num_antennas < 64 && id_mask >> num_antennas != 0 {
            return Err(Error::Argument(format!(
                "mask {id_mask:#b} has bits beyond {num_antennas} antennas"
            )));
        }
        Ok(Self {
            id_mask,
            num_antennas,
        })
    }

    pub fn all_id(num_antennas: usize) -> Self {
        Self {
            id_mask: full_mask(num_antennas),
            num_antennas,
        }
    }

    pub fn all_eh(num_antennas: usize) -> Self {
        Self {
            id_mask: 0,
            num_antennas,
        }
    }

    pub fn id_mask(&self) -> u64 {
        self.id_mask
    }

    pub fn eh_mask(&self) -> u64 {
        !self.id_mask & full_mask(self.num_antennas)
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn is_id(&self, antenna: usize) -> bool {
        self.id_mask >> antenna & 1 == 1
    }

    pub fn id_indices(&self) -> Vec<usize> {
        (0..self.num_antennas).filter(|&m| self.is_id(m)).collect()
    }

    pub fn eh_indices(&self) -> Vec<usize> {
        (0..self.num_antennas).filter(|&m| !self.is_id(m)).collect()
    }

    /// `(sum over decoding antennas, sum over harvesting antennas)`.
    pub fn sums(&self, values: &[f64]) -> (f64, f64) {
        masked_sums(self.id_mask, values)
    }

    /// Per-antenna split ratios `alpha_m` in `{0, 1}`.
    pub fn ratios(&self) -> Vec<f64> {
        (0..self.num_antennas)
            .map(|m| if self.is_id(m) { 1.0 } else { 0.0 })
            .collect()
    }
}

fn full_mask(m: usize) -> u64 {
    if m >= 64 {
        u64::MAX
    } else {
        (1u64 << m) - 1
    }
}

fn masked_sums(mask: u64, values: &[f64]) -> (f64, f64) {
    let (mut id, mut eh) = (0.0, 0.0);
    for (m, v) in values.iter().enumerate() {
        if mask >> m & 1 == 1 {
            id += v;
        } else {
            eh += v;
        }
    }
    (id, eh)
}

fn check_vectors(h: &[f64], alpha: &[f64]) -> Result<()> {
    if h.len() != alpha.len() {
        return Err(Error::Argument(format!(
            "{} gains but {} split ratios",
            h.len(),
            alpha.len()
        )));
    }
    if h.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
        return Err(Error::Argument("gains must be finite and >= 0".into()));
    }
    if alpha.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(Error::Argument("split ratios must lie in [0, 1]".into()));
    }
    Ok(())
}

/// Rate after maximal ratio combining of the decoder branches,
/// `ln(1 + sum_m alpha_m h_m p / sigma^2)`.
pub fn mrc_rate(h: &[f64], alpha: &[f64], p: f64, sigma2: f64) -> Result<f64> {
    check_vectors(h, alpha)?;
    if !(p >= 0.0) || !(sigma2 > 0.0) {
        return Err(Error::Argument("power must be >= 0 and noise > 0".into()));
    }
    let id: f64 = h.iter().zip(alpha).map(|(h, a)| a * h).sum();
    Ok((id * p / sigma2).ln_1p())
}

/// Power harvested from the remaining fractions,
/// `xi sum_m (1 - alpha_m) h_m p`.
pub fn mrc_energy(h: &[f64], alpha: &[f64], p: f64, xi: f64) -> Result<f64> {
    check_vectors(h, alpha)?;
    if !(p >= 0.0) || !(xi > 0.0 && xi <= 1.0) {
        return Err(Error::Argument("power must be >= 0 and efficiency in (0, 1]".into()));
    }
    let eh: f64 = h.iter().zip(alpha).map(|(h, a)| (1.0 - a) * h).sum();
    Ok(xi * eh * p)
}

/// Replaces every state by a single virtual antenna with the summed gain.
pub fn ups_reduce(ensemble: &FadingEnsemble) -> FadingEnsemble {
    if ensemble.num_antennas() == 1 {
        return ensemble.clone();
    }
    FadingEnsemble::siso(ensemble.total_gains()).expect("sums of valid gains are valid")
}

fn check_capacity(m: usize) -> Result<()> {
    if m > MAX_EXHAUSTIVE_ANTENNAS {
        Err(Error::Capacity {
            antennas: m,
            limit: MAX_EXHAUSTIVE_ANTENNAS,
        })
    } else {
        Ok(())
    }
}

/// Decision for a partition at transmit power `p`. The reported split ratio
/// is the equivalent uniform ratio `sum_ID h_m / sum_m h_m`.
pub fn partition_decision(h: &[f64], id_mask: u64, p: f64, params: &LinkParams) -> StateDecision {
    let (id, eh) = masked_sums(id_mask, h);
    let total = id + eh;
    StateDecision {
        power: p,
        split_id: if total > 0.0 { id / total } else { 1.0 },
        rate: (id * p / params.noise_power).ln_1p(),
        energy: params.harvest_efficiency * eh * p,
    }
}

fn best_mask_no_csit(h: &[f64], p: f64, sigma2: f64, lambda: f64) -> u64 {
    let mut best = (f64::NEG_INFINITY, 0u64);
    for mask in 0..1u64 << h.len() {
        let (id, eh) = masked_sums(mask, h);
        let value = (id * p / sigma2).ln_1p() + lambda * eh * p;
        if value > best.0 {
            best = (value, mask);
        }
    }
    best.1
}

/// Partition maximizing `ln(1 + sum_ID h_m P/sigma^2) + lambda sum_EH h_m P`
/// over all `2^M` candidates; ties go to the smallest mask.
pub fn antenna_switch_exhaustive_no_csit(h: &[f64], p: f64, sigma2: f64, lambda: f64) -> Result<AntennaPartition> {
    check_capacity(h.len())?;
    check_vectors(h, &vec![0.0; h.len()])?;
    if !(lambda >= 0.0) || lambda >= 1.0 / sigma2 {
        return Err(Error::InfeasibleDual(format!(
            "lambda = {lambda:e} must lie in [0, 1/sigma^2)"
        )));
    }
    AntennaPartition::new(best_mask_no_csit(h, p, sigma2, lambda), h.len())
}

/// Optimal transmit power for a fixed partition: peak power when
/// `lambda sum_EH h_m >= beta`, otherwise
/// `[1/(beta - lambda sum_EH h_m) - sigma^2 / sum_ID h_m]` clipped to
/// `[0, P_peak]`. With no decoding antenna the clipped branch gives zero.
pub fn antenna_switch_power(partition: &AntennaPartition, h: &[f64], lambda: f64, beta: f64, params: &LinkParams) -> f64 {
    let (id, eh) = partition.sums(h);
    switch_power(id, eh, lambda, beta, params)
}

fn switch_power(id: f64, eh: f64, lambda: f64, beta: f64, params: &LinkParams) -> f64 {
    let margin = beta - lambda * eh;
    if margin <= 0.0 {
        params.tx_power_peak
    } else if id <= 0.0 {
        0.0
    } else {
        (1.0 / margin - params.noise_power / id).clamp(0.0, params.tx_power_peak)
    }
}

fn best_mask_csit(h: &[f64], params: &LinkParams, lambda: f64, beta: f64) -> (u64, f64) {
    let mut best = (f64::NEG_INFINITY, 0u64, 0.0);
    for mask in 0..1u64 << h.len() {
        let (id, eh) = masked_sums(mask, h);
        let p = switch_power(id, eh, lambda, beta, params);
        let value = (id * p / params.noise_power).ln_1p() + lambda * eh * p - beta * p;
        if value > best.0 {
            best = (value, mask, p);
        }
    }
    (best.1, best.2)
}

/// Joint partition and power maximizing the per-state Lagrangian
/// `ln(1 + sum_ID h_m p/sigma^2) + lambda sum_EH h_m p - beta p`.
pub fn antenna_switch_exhaustive_csit(
    h: &[f64],
    params: &LinkParams,
    lambda: f64,
    beta: f64,
) -> Result<(AntennaPartition, f64)> {
    check_capacity(h.len())?;
    check_vectors(h, &vec![0.0; h.len()])?;
    if !(lambda >= 0.0 && beta >= 0.0 && lambda.is_finite() && beta.is_finite()) {
        return Err(Error::Argument("dual variables must be finite and >= 0".into()));
    }
    let (mask, p) = best_mask_csit(h, params, lambda, beta);
    Ok((AntennaPartition::new(mask, h.len())?, p))
}

/// Sorted subset sums kept by the trimming procedure, each with the mask of
/// antennas that produces it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrimmedList {
    pub sums: Vec<f64>,
    pub witnesses: Vec<u64>,
}

impl TrimmedList {
    fn origin() -> Self {
        Self {
            sums: vec![0.0],
            witnesses: vec![0],
        }
    }

    pub fn len(&self) -> usize {
        self.sums.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sums.is_empty()
    }

    /// Largest kept sum with its witness.
    pub fn last(&self) -> (f64, u64) {
        let n = self.sums.len() - 1;
        (self.sums[n], self.witnesses[n])
    }

    /// Smallest positive sum.
    pub fn min_positive(&self) -> Option<f64> {
        self.sums.iter().copied().find(|s| *s > 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetSelection {
    pub partition: AntennaPartition,
    /// Sum of the selected values.
    pub sum: f64,
    /// `|S_i|` after each completed iteration.
    pub list_sizes: Vec<usize>,
    /// Smallest positive element of each `S_i`.
    pub min_positive: Vec<Option<f64>>,
    /// Whether the near-target stop fired before the last antenna.
    pub early_exit: bool,
    /// Whether every antenna was assigned to the decoder up front.
    pub all_fit: bool,
}

/// Subset of `values` whose sum is as large as possible without exceeding
/// `target`, within a factor `1 + epsilon`.
///
/// Subset sums are grown one antenna at a time. After each step the merged
/// list is thinned so that consecutive kept sums differ by more than a factor
/// `1 + epsilon/(2M)`, sums above the target are dropped, and the search
/// stops once a sum of at least `target/(1 + eta)` exists. `epsilon = 0`
/// keeps every distinct sum (exhaustive search).
pub fn subset_select(values: &[f64], target: f64, epsilon: f64, eta: f64) -> Result<SubsetSelection> {
    let m = values.len();
    if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::Argument("values must be finite and >= 0".into()));
    }
    if !(target > 0.0) {
        return Err(Error::Argument(format!("target must be > 0 (got {target})")));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) || !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Argument(format!(
            "need epsilon >= 0 and eta > 0 (got {epsilon}, {eta})"
        )));
    }
    if m > 64 {
        return Err(Error::Capacity {
            antennas: m,
            limit: 64,
        });
    }
    if epsilon == 0.0 {
        check_capacity(m)?;
    }

    let total: f64 = values.iter().sum();
    if total <= target {
        return Ok(SubsetSelection {
            partition: AntennaPartition::all_id(m),
            sum: total,
            list_sizes: Vec::new(),
            min_positive: Vec::new(),
            early_exit: false,
            all_fit: true,
        });
    }

    let ratio = 1.0 + epsilon / (2.0 * m as f64);
    let stop_at = target / (1.0 + eta);
    let mut list = TrimmedList::origin();
    let mut next = TrimmedList::default();
    let mut list_sizes = Vec::with_capacity(m);
    let mut min_positive = Vec::with_capacity(m);
    let mut early_exit = false;
    for (i, &x) in values.iter().enumerate() {
        merge_and_trim(&list, x, 1u64 << i, ratio, target, &mut next);
        std::mem::swap(&mut list, &mut next);
        list_sizes.push(list.len());
        min_positive.push(list.min_positive());
        let (best, _) = list.last();
        if stop_at <= best && best <= target {
            early_exit = i + 1 < m;
            break;
        }
    }
    let (sum, mask) = list.last();
    Ok(SubsetSelection {
        partition: AntennaPartition::new(mask, m)?,
        sum,
        list_sizes,
        min_positive,
        early_exit,
        all_fit: false,
    })
}

/// Merges `list` with `list + x` (both sorted) and keeps a sum only when it
/// exceeds `ratio` times the last kept one and does not exceed `target`.
/// Equal sums keep the witness from the unshifted list.
fn merge_and_trim(list: &TrimmedList, x: f64, bit: u64, ratio: f64, target: f64, out: &mut TrimmedList) {
    out.sums.clear();
    out.witnesses.clear();
    out.sums.push(0.0);
    out.witnesses.push(0);
    let n = list.sums.len();
    let (mut a, mut b) = (1, 0);
    let mut last = 0.0;
    loop {
        let from_a = a < n;
        let from_b = b < n && list.sums[b] + x <= target;
        let (s, w) = match (from_a, from_b) {
            (false, false) => break,
            (true, false) => {
                a += 1;
                (list.sums[a - 1], list.witnesses[a - 1])
            }
            (false, true) => {
                b += 1;
                (list.sums[b - 1] + x, list.witnesses[b - 1] | bit)
            }
            (true, true) => {
                let shifted = list.sums[b] + x;
                if list.sums[a] <= shifted {
                    a += 1;
                    (list.sums[a - 1], list.witnesses[a - 1])
                } else {
                    b += 1;
                    (shifted, list.witnesses[b - 1] | bit)
                }
            }
        };
        if ratio * last < s && s <= target {
            out.sums.push(s);
            out.witnesses.push(w);
            last = s;
        }
    }
}

/// Antenna switching that mimics the uniform power splitting solution.
///
/// The transmit power comes from the single-antenna rule on the summed gain
/// (constant `P_avg` without CSIT); the decoder group is the subset whose
/// received power comes closest to `1/lambda - sigma^2` from below.
pub fn approx_switching_policy(
    h: &[f64],
    csit: bool,
    dual: DualPoint,
    params: &LinkParams,
    epsilon: f64,
    eta: f64,
) -> Result<StateDecision> {
    let lambda_limit = 1.0 / params.noise_power;
    if !(dual.lambda >= 0.0 && dual.lambda < lambda_limit && dual.beta >= 0.0) {
        return Err(Error::InfeasibleDual(format!(
            "duals ({:e}, {:e}) outside [0, 1/sigma^2) x [0, inf)",
            dual.lambda, dual.beta
        )));
    }
    check_vectors(h, &vec![0.0; h.len()])?;
    let p = if csit {
        DpsCsit::new(params, dual.lambda, dual.beta).decide(total_gain(h)).power
    } else {
        params.tx_power_avg
    };
    Ok(approx_decision(h, p, dual.lambda, params, epsilon, eta)?.0)
}

fn approx_decision(
    h: &[f64],
    p: f64,
    lambda: f64,
    params: &LinkParams,
    epsilon: f64,
    eta: f64,
) -> Result<(StateDecision, Option<SubsetSelection>)> {
    let m = h.len();
    if p <= 0.0 {
        return Ok((StateDecision::off(), None));
    }
    let target = if lambda > 0.0 {
        1.0 / lambda - params.noise_power
    } else {
        f64::INFINITY
    };
    let received: Vec<f64> = h.iter().map(|g| g * p).collect();
    if received.iter().sum::<f64>() <= target {
        return Ok((partition_decision(h, full_mask(m), p, params), None));
    }
    let sel = subset_select(&received, target, epsilon, eta)?;
    Ok((partition_decision(h, sel.partition.id_mask(), p, params), Some(sel)))
}

/// Exhaustive antenna switching at constant power.
#[derive(Debug, Clone, Copy)]
pub struct SwitchAntennasNoCsit(pub LinkParams);

#[derive(Debug, Clone, Copy)]
pub struct SwitchAntennasNoCsitRule {
    params: LinkParams,
    lambda: f64,
}

impl StateRule for SwitchAntennasNoCsitRule {
    fn decide(&self, state: &[f64]) -> StateDecision {
        let p = self.params.tx_power_avg;
        let mask = best_mask_no_csit(state, p, self.params.noise_power, self.lambda);
        partition_decision(state, mask, p, &self.params)
    }
}

impl DualScheme for SwitchAntennasNoCsit {
    type Rule = SwitchAntennasNoCsitRule;

    fn params(&self) -> &LinkParams {
        &self.0
    }

    fn rule(&self, dual: DualPoint) -> Result<Self::Rule> {
        if !(dual.lambda >= 0.0 && dual.lambda < self.0.lambda_limit()) {
            return Err(Error::InfeasibleDual(format!("lambda = {:e}", dual.lambda)));
        }
        Ok(SwitchAntennasNoCsitRule {
            params: self.0,
            lambda: dual.lambda,
        })
    }

    fn blend(&self) -> Blend {
        Blend::Discrete
    }
}

/// Exhaustive antenna switching with transmit power control.
#[derive(Debug, Clone, Copy)]
pub struct SwitchAntennasCsit(pub LinkParams);

#[derive(Debug, Clone, Copy)]
pub struct SwitchAntennasCsitRule {
    params: LinkParams,
    dual: DualPoint,
}

impl StateRule for SwitchAntennasCsitRule {
    fn decide(&self, state: &[f64]) -> StateDecision {
        let (mask, p) = best_mask_csit(state, &self.params, self.dual.lambda, self.dual.beta);
        partition_decision(state, mask, p, &self.params)
    }
}

impl DualScheme for SwitchAntennasCsit {
    type Rule = SwitchAntennasCsitRule;

    fn params(&self) -> &LinkParams {
        &self.0
    }

    fn rule(&self, dual: DualPoint) -> Result<Self::Rule> {
        if !(dual.lambda >= 0.0 && dual.lambda < self.0.lambda_limit() && dual.beta >= 0.0) {
            return Err(Error::InfeasibleDual(format!(
                "duals ({:e}, {:e})",
                dual.lambda, dual.beta
            )));
        }
        Ok(SwitchAntennasCsitRule {
            params: self.0,
            dual,
        })
    }

    fn blend(&self) -> Blend {
        Blend::Discrete
    }
}

/// Per-ensemble statistics of the subset selection runs behind one policy.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SelectionStats {
    /// States that ran the trimmed-list search.
    pub searched: usize,
    /// Searches that stopped before the last antenna.
    pub early_exits: usize,
    /// Searches whose list sizes broke the theoretical bound.
    pub size_bound_violations: usize,
}

/// Whether every `|S_i|` obeys `|S_i| <= 2 + 4M ln(tau_i)/epsilon` with
/// `tau_i = target / min positive element of S_i`.
pub fn list_sizes_within_bound(sel: &SubsetSelection, m: usize, target: f64, epsilon: f64) -> bool {
    if epsilon == 0.0 {
        return true;
    }
    sel.list_sizes.iter().zip(&sel.min_positive).all(|(&size, min)| match min {
        None => size <= 1,
        Some(s) => size as f64 <= 2.0 + 4.0 * m as f64 * (target / s).ln() / epsilon,
    })
}

/// Applies the approximate switching rule to every state given the prices
/// solved for uniform power splitting on the reduced ensemble.
pub fn approx_switching_summary(
    ensemble: &FadingEnsemble,
    csit: bool,
    dual: DualPoint,
    params: &LinkParams,
    epsilon: f64,
    eta: f64,
) -> Result<(Vec<StateDecision>, SelectionStats)> {
    use rayon::prelude::*;
    let m = ensemble.num_antennas();
    let rule = DpsCsit::new(params, dual.lambda, dual.beta);
    let target = if dual.lambda > 0.0 {
        1.0 / dual.lambda - params.noise_power
    } else {
        f64::INFINITY
    };
    let outcomes = ensemble
        .par_states()
        .map(|h| {
            let p = if csit {
                rule.decide(total_gain(h)).power
            } else {
                params.tx_power_avg
            };
            approx_decision(h, p, dual.lambda, params, epsilon, eta)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut stats = SelectionStats::default();
    let mut decisions = Vec::with_capacity(outcomes.len());
    for (d, sel) in outcomes {
        if let Some(sel) = sel {
            stats.searched += 1;
            stats.early_exits += usize::from(sel.early_exit);
            if !list_sizes_within_bound(&sel, m, target, epsilon) {
                stats.size_bound_violations += 1;
            }
        }
        decisions.push(d);
    }
    Ok((decisions, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::siso::TimeSwitchCsit;

    fn params() -> LinkParams {
        LinkParams::default()
    }

    fn exhaustive_best(values: &[f64], target: f64) -> f64 {
        let mut best = 0.0f64;
        for mask in 0..1u64 << values.len() {
            let (s, _) = masked_sums(mask, values);
            if s <= target {
                best = best.max(s);
            }
        }
        best
    }

    #[test]
    fn mrc_examples() {
        let h = [1e-4, 3e-4];
        assert_eq!(mrc_rate(&h, &[0.0, 0.0], 0.1, 1e-8).unwrap(), 0.0);
        let sum = mrc_rate(&h, &[1.0, 1.0], 0.1, 1e-8).unwrap();
        let single = crate::siso::rate(1e-4 + 3e-4, 0.1, 1.0, 1e-8).unwrap();
        assert_eq!(sum, single);
        assert!(mrc_rate(&h, &[1.0], 0.1, 1e-8).is_err());
        assert!(mrc_rate(&h, &[1.2, 0.0], 0.1, 1e-8).is_err());
        let e = mrc_energy(&h, &[1.0, 0.0], 0.1, 0.5).unwrap();
        assert!((e - 0.5 * 3e-4 * 0.1).abs() < 1e-20);
    }

    #[test]
    fn mrc_rate_matches_compensated_oracle() {
        let h = [1.234e-4, 0.567e-4, 2.891e-4];
        let a = [0.3, 0.9, 0.45];
        // Kahan-summed SNR, then log through the series around the nearest
        // power of two.
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for (h, a) in h.iter().zip(a) {
            let y = a * h * 0.1 / 1e-8 - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        let x = 1.0 + sum;
        let k = x.log2().round();
        let z = x / 2f64.powf(k) - 1.0;
        let mut series = 0.0;
        for n in 1..60 {
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            series += sign * z.powi(n) / n as f64;
        }
        let oracle = k * std::f64::consts::LN_2 + series;
        let r = mrc_rate(&h, &a, 0.1, 1e-8).unwrap();
        assert!((r - oracle).abs() <= 1e-14 * oracle, "{r} vs {oracle}");
    }

    #[test]
    fn ups_reduce_sums_antennas() {
        let e = FadingEnsemble::from_states(&[vec![1e-4, 3e-4], vec![2e-4, 2e-4]]).unwrap();
        let r = ups_reduce(&e);
        assert_eq!(r.num_antennas(), 1);
        assert_eq!(r.state(0)[0], 1e-4 + 3e-4);
        let single = FadingEnsemble::siso(vec![1.0, 2.0]).unwrap();
        assert_eq!(ups_reduce(&single), single);
    }

    #[test]
    fn exhaustive_no_csit_examples() {
        let h = [1e-4, 2e-4, 4e-4];
        assert_eq!(
            antenna_switch_exhaustive_no_csit(&h, 0.1, 1e-8, 0.0).unwrap(),
            AntennaPartition::all_id(3)
        );
        assert_eq!(
            antenna_switch_exhaustive_no_csit(&h, 0.1, 1e-8, (1.0 - 1e-9) / 1e-8).unwrap(),
            AntennaPartition::all_eh(3)
        );
        let got = antenna_switch_exhaustive_no_csit(&h, 0.1, 1e-8, 3e4).unwrap();
        // Independent enumeration by index sets.
        let sets: [&[usize]; 8] = [&[], &[0], &[1], &[0, 1], &[2], &[0, 2], &[1, 2], &[0, 1, 2]];
        let mut best = (f64::NEG_INFINITY, 0);
        for (k, set) in sets.iter().enumerate() {
            let id: f64 = set.iter().map(|&m| h[m]).sum();
            let eh: f64 = (0..3).filter(|m| !set.contains(m)).map(|m| h[m]).sum();
            let v = (1.0 + id * 0.1 / 1e-8).ln() + 3e4 * eh * 0.1;
            if v > best.0 {
                best = (v, k);
            }
        }
        assert_eq!(got.id_mask(), best.1 as u64);
        assert!(matches!(
            antenna_switch_exhaustive_no_csit(&[1e-4; 21], 0.1, 1e-8, 1.0),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn switch_power_branches() {
        let prm = params();
        let h = [1e-4, 3e-4];
        let eh_only = AntennaPartition::new(0b01, 2).unwrap();
        // sum_EH = 3e-4 >= beta/lambda.
        assert_eq!(antenna_switch_power(&eh_only, &h, 1e5, 10.0, &prm), prm.tx_power_peak);
        let all_id = AntennaPartition::all_id(2);
        let wf = (1.0 / 12.0 - prm.noise_power / 4e-4).clamp(0.0, prm.tx_power_peak);
        assert!((antenna_switch_power(&all_id, &h, 0.0, 12.0, &prm) - wf).abs() < 1e-15);
        let none = AntennaPartition::all_eh(2);
        assert_eq!(antenna_switch_power(&none, &h, 1e3, 10.0, &prm), 0.0);
    }

    #[test]
    fn switch_power_matches_dense_grid() {
        let prm = params();
        let h = [0.8e-4, 1.7e-4, 0.4e-4];
        let part = AntennaPartition::new(0b101, 3).unwrap();
        let (lambda, beta) = (2e4, 15.0);
        let (id, eh) = part.sums(&h);
        let p = antenna_switch_power(&part, &h, lambda, beta, &prm);
        let n = 200_000;
        let step = prm.tx_power_peak / n as f64;
        let best = (0..=n)
            .map(|i| i as f64 * step)
            .max_by(|a, b| {
                let f = |p: f64| (id * p / prm.noise_power).ln_1p() + lambda * eh * p - beta * p;
                f(*a).total_cmp(&f(*b))
            })
            .unwrap();
        assert!((p - best).abs() <= step, "{p} vs {best}");
    }

    #[test]
    fn exhaustive_csit_reduces_to_time_switching() {
        let prm = params();
        for (lambda, beta) in [(4e4, 20.0), (1e6, 5.0), (3e7, 40.0)] {
            let ts = TimeSwitchCsit::new(&prm, lambda, beta).unwrap();
            for k in 0..200 {
                let h = 10f64.powf(-6.0 + 3.0 * k as f64 / 199.0);
                let (part, p) = antenna_switch_exhaustive_csit(&[h], &prm, lambda, beta).unwrap();
                let d = ts.decide(h);
                assert!((p - d.power).abs() <= 1e-12 * prm.tx_power_peak, "h={h}: {p} vs {d:?}");
                if p > 0.0 {
                    assert_eq!(part.is_id(0), d.split_id == 1.0, "h={h}");
                }
            }
        }
        let (_, p) = antenna_switch_exhaustive_csit(&[1e-4, 2e-4], &prm, 1e3, 1e9).unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn exhaustive_csit_matches_grid_oracle() {
        let prm = params();
        let h = [0.9e-4, 1.9e-4, 0.3e-4];
        let (lambda, beta) = (5e6, 30.0);
        let (part, p) = antenna_switch_exhaustive_csit(&h, &prm, lambda, beta).unwrap();
        let n = 20_000;
        let mut best = (f64::NEG_INFINITY, 0u64, 0.0);
        for mask in 0..8u64 {
            let (id, eh) = masked_sums(mask, &h);
            for i in 0..=n {
                let q = prm.tx_power_peak * i as f64 / n as f64;
                let v = (id * q / prm.noise_power).ln_1p() + lambda * eh * q - beta * q;
                if v > best.0 {
                    best = (v, mask, q);
                }
            }
        }
        assert_eq!(part.id_mask(), best.1);
        assert!((p - best.2).abs() <= prm.tx_power_peak / n as f64);
    }

    #[test]
    fn subset_select_examples() {
        let all = subset_select(&[1.0, 2.0], 5.0, 0.1, 0.1).unwrap();
        assert!(all.all_fit);
        assert_eq!(all.partition, AntennaPartition::all_id(2));
        let sel = subset_select(&[3.0, 5.0, 8.0], 9.0, 0.0, 0.1).unwrap();
        assert_eq!(sel.sum, 8.0);
        assert!(sel.sum <= 9.0);
        assert_eq!(sel.partition.id_mask(), 0b011);
        assert!(subset_select(&[1.0], 0.0, 0.1, 0.1).is_err());
        assert!(subset_select(&[-1.0], 1.0, 0.1, 0.1).is_err());
        let empty = subset_select(&[], 1.0, 0.1, 0.1).unwrap();
        assert_eq!(empty.partition.id_indices(), Vec::<usize>::new());
    }

    #[test]
    fn partition_ratio_identity() {
        let prm = params();
        let h = [1e-4, 2.5e-4, 0.7e-4];
        for mask in 0..8u64 {
            let d = partition_decision(&h, mask, 0.15, &prm);
            let (id, _) = masked_sums(mask, &h);
            let expected = id * 0.15 / (total_gain(&h) * 0.15);
            assert!((d.split_id - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn approx_policy_paths() {
        let prm = params();
        // Total received power 1e-5 W is below 1/lambda - sigma^2 ~ 1e-4 W.
        let d = approx_switching_policy(&[0.5e-4, 0.5e-4], false, DualPoint::new(1e4, 0.0), &prm, 0.1, 0.1).unwrap();
        assert_eq!(d.split_id, 1.0);
        let d = approx_switching_policy(&[1e-4, 2e-4], true, DualPoint::new(1e3, 1e9), &prm, 0.1, 0.1).unwrap();
        assert_eq!(d.power, 0.0);
        // M = 2 matches exhaustive P3 enumeration for any epsilon.
        let h = [1.3e-4, 0.6e-4];
        for eps in [0.0, 0.1, 0.5] {
            let lambda = 1.0 / (1e-5 + prm.noise_power);
            let d = approx_switching_policy(&h, false, DualPoint::new(lambda, 0.0), &prm, eps, 0.1).unwrap();
            let received: Vec<f64> = h.iter().map(|g| g * prm.tx_power_avg).collect();
            let best = exhaustive_best(&received, 1.0 / lambda - prm.noise_power);
            assert!((d.split_id * total_gain(&h) * prm.tx_power_avg - best).abs() < 1e-18);
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(200))]

        #[test]
        fn subset_select_guarantee(
            values in proptest::collection::vec(1e-3f64..1.0, 1..=12),
            frac in 0.05f64..0.95,
        ) {
            let total: f64 = values.iter().sum();
            let target = frac * total;
            let sel = subset_select(&values, target, 0.1, 0.1).unwrap();
            let opt = exhaustive_best(&values, target);
            proptest::prop_assert!(sel.sum <= target);
            proptest::prop_assert!(sel.sum * 1.1 >= opt, "{} vs {}", sel.sum, opt);
            let (s, _) = sel.partition.sums(&values);
            proptest::prop_assert!((s - sel.sum).abs() <= 1e-12 * total);
            proptest::prop_assert!(list_sizes_within_bound(&sel, values.len(), target, 0.1));
        }

        #[test]
        fn uniform_split_beats_per_antenna_grid(
            h1 in 1e-5f64..5e-4, h2 in 1e-5f64..5e-4, lf in 0.0f64..0.99,
        ) {
            let prm = params();
            let lambda = lf / prm.noise_power;
            let p = prm.tx_power_avg;
            let s2 = prm.noise_power;
            let objective = |a1: f64, a2: f64| {
                ((a1 * h1 + a2 * h2) * p / s2).ln_1p() + lambda * ((1.0 - a1) * h1 + (1.0 - a2) * h2) * p
            };
            let alpha = crate::siso::dps_alpha_no_csit(h1 + h2, p, s2, lambda).unwrap();
            let ups = objective(alpha, alpha);
            for i in 0..=100 {
                for j in 0..=100 {
                    let v = objective(i as f64 / 100.0, j as f64 / 100.0);
                    proptest::prop_assert!(v <= ups + 1e-12 * ups.abs().max(1.0));
                }
            }
        }
    }
}
