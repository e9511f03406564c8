//! Rate-energy boundaries traced by sweeping the harvested-energy target.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::duality::{
    self, CsitCorners, DualPoint, DualScheme, DualSolution, IdealCsit, PolicySummary, SolverOptions,
    SplitCsit, SplitNoCsit, SwitchCsit, SwitchNoCsit,
};
use crate::error::{Error, Result};
use crate::fading::FadingEnsemble;
use crate::simo::{self, SelectionStats, SwitchAntennasCsit, SwitchAntennasNoCsit};
use crate::siso::LinkParams;

/// Targets stop this fraction short of `Q_max`, where the energy price
/// diverges.
pub const Q_MAX_BACKOFF: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SchemeKind {
    /// Dynamic power splitting on the summed gain.
    Dps,
    TimeSwitching,
    /// Receiver that decodes and harvests the same signal.
    UpperBound,
    /// Uniform power splitting over all antennas.
    Ups,
    AntennaSwitchingExhaustive,
    AntennaSwitchingApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Scheme {
    pub kind: SchemeKind,
    pub csit: bool,
}

impl Scheme {
    pub const fn new(kind: SchemeKind, csit: bool) -> Self {
        Self { kind, csit }
    }

    /// All single-antenna schemes in plotting order.
    pub fn siso_all() -> Vec<Scheme> {
        let mut out = Vec::new();
        for csit in [false, true] {
            for kind in [SchemeKind::UpperBound, SchemeKind::Dps, SchemeKind::TimeSwitching] {
                out.push(Scheme::new(kind, csit));
            }
        }
        out
    }

    pub fn simo_all() -> Vec<Scheme> {
        let mut out = Vec::new();
        for csit in [false, true] {
            for kind in [
                SchemeKind::Ups,
                SchemeKind::AntennaSwitchingExhaustive,
                SchemeKind::AntennaSwitchingApprox,
            ] {
                out.push(Scheme::new(kind, csit));
            }
        }
        out
    }

    fn kind_name(&self) -> &'static str {
        match self.kind {
            SchemeKind::Dps => "dps",
            SchemeKind::TimeSwitching => "ts",
            SchemeKind::UpperBound => "upper",
            SchemeKind::Ups => "ups",
            SchemeKind::AntennaSwitchingExhaustive => "as-exhaustive",
            SchemeKind::AntennaSwitchingApprox => "as-approx",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let csit = if self.csit { "csit" } else { "nocsit" };
        write!(f, "{}-{}", self.kind_name(), csit)
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (kind, csit) = if let Some(k) = s.strip_suffix("-nocsit") {
            (k, false)
        } else if let Some(k) = s.strip_suffix("-csit") {
            (k, true)
        } else {
            return Err(Error::Config(format!(
                "scheme '{s}' must end in -nocsit or -csit"
            )));
        };
        let kind = match kind {
            "dps" => SchemeKind::Dps,
            "ts" => SchemeKind::TimeSwitching,
            "upper" => SchemeKind::UpperBound,
            "ups" => SchemeKind::Ups,
            "as-exhaustive" => SchemeKind::AntennaSwitchingExhaustive,
            "as-approx" => SchemeKind::AntennaSwitchingApprox,
            other => return Err(Error::Config(format!("unknown scheme '{other}'"))),
        };
        Ok(Scheme::new(kind, csit))
    }
}

/// One point of a boundary. `q_target` is the abscissa; `energy` is what the
/// returned policy actually harvests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct REPoint {
    pub scheme: Scheme,
    pub q_target: f64,
    /// Watts, after conversion losses.
    pub energy: f64,
    /// Bits per second per hertz.
    pub rate: f64,
    pub lambda: f64,
    pub beta: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct REBoundary {
    pub scheme: Scheme,
    /// Ordered by strictly increasing `q_target`.
    pub points: Vec<REPoint>,
    pub corner_rate_max: REPoint,
    pub corner_energy_max: REPoint,
    /// Subset-selection diagnostics summed over all points (approximate
    /// antenna switching only).
    pub selection: Option<SelectionStats>,
}

impl REBoundary {
    pub fn q_max(&self) -> f64 {
        self.corner_energy_max.q_target
    }

    pub fn r_max(&self) -> f64 {
        self.corner_rate_max.rate
    }

    /// Rate at energy target `q` by linear interpolation; `None` outside the
    /// traced range.
    pub fn rate_at(&self, q: f64) -> Option<f64> {
        let pts = &self.points;
        let first = pts.first()?;
        let last = pts.last()?;
        if q < first.q_target || q > last.q_target {
            return None;
        }
        let k = pts.partition_point(|p| p.q_target < q);
        if k == 0 {
            return Some(first.rate);
        }
        let (a, b) = (&pts[k - 1], &pts[k]);
        let t = (q - a.q_target) / (b.q_target - a.q_target);
        Some(a.rate + t * (b.rate - a.rate))
    }

    /// Indices of points that break the non-increasing rate order.
    pub fn monotonicity_violations(&self) -> Vec<usize> {
        (1..self.points.len())
            .filter(|&i| self.points[i].rate > self.points[i - 1].rate)
            .collect()
    }

    /// Indices `i` of consecutive triples whose middle point lies more than
    /// `tol` (relative) below the chord through its neighbours.
    pub fn concavity_violations(&self, tol: f64) -> Vec<usize> {
        let p = &self.points;
        (1..p.len().saturating_sub(1))
            .filter(|&i| {
                let (a, b, c) = (&p[i - 1], &p[i], &p[i + 1]);
                let t = (b.q_target - a.q_target) / (c.q_target - a.q_target);
                let chord = a.rate + t * (c.rate - a.rate);
                b.rate < chord - tol * chord.abs()
            })
            .collect()
    }
}

/// `(R_max in bits/s/Hz, Q_max in watts)` of a scheme. Every scheme in the
/// same CSIT case shares these values.
pub fn corner_points(ensemble: &FadingEnsemble, params: &LinkParams, scheme: Scheme) -> Result<(f64, f64)> {
    params.validate()?;
    if scheme.csit {
        let c = CsitCorners::new(ensemble, params);
        Ok((c.r_max / std::f64::consts::LN_2, c.q_max))
    } else {
        Ok((
            duality::r_max_no_csit(ensemble, params) / std::f64::consts::LN_2,
            duality::q_max_no_csit(ensemble, params),
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceOptions {
    pub solver: SolverOptions,
    /// Trimming accuracy of the approximate antenna switching.
    pub epsilon: f64,
    /// Early-stop accuracy of the approximate antenna switching.
    pub eta: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            epsilon: 0.1,
            eta: 0.1,
        }
    }
}

/// Uniform energy targets `0, ..., (1 - Q_MAX_BACKOFF) Q_max`.
pub fn target_grid(q_max: f64, n_points: usize) -> Vec<f64> {
    let top = (1.0 - Q_MAX_BACKOFF) * q_max;
    (0..n_points)
        .map(|k| top * k as f64 / (n_points - 1) as f64)
        .collect()
}

fn point(scheme: Scheme, q_target: f64, summary: &PolicySummary, dual: DualPoint, iterations: usize) -> REPoint {
    REPoint {
        scheme,
        q_target,
        energy: summary.avg_energy,
        rate: summary.avg_rate / std::f64::consts::LN_2,
        lambda: dual.lambda,
        beta: dual.beta,
        iterations,
    }
}

struct Context<'a> {
    ensemble: &'a FadingEnsemble,
    reduced: FadingEnsemble,
    params: LinkParams,
    corners: Option<CsitCorners>,
    q_max: f64,
    options: TraceOptions,
}

impl Context<'_> {
    fn p1<S: DualScheme>(&self, scheme: &S, ensemble: &FadingEnsemble, q: f64) -> Result<DualSolution> {
        duality::solve_p1(scheme, ensemble, q, self.options.solver.bisection_tol * self.q_max)
    }

    fn p2<S: DualScheme>(&self, scheme: &S, ensemble: &FadingEnsemble, q: f64) -> Result<DualSolution> {
        let corners = self.corners.as_ref().expect("CSIT corners");
        duality::solve_p2(scheme, ensemble, corners, q, &self.options.solver)
    }

    fn solve(&self, scheme: Scheme, q: f64) -> Result<(REPoint, Option<SelectionStats>)> {
        let prm = self.params;
        let reduced = &self.reduced;
        let full = self.ensemble;
        let sol = match (scheme.kind, scheme.csit) {
            (SchemeKind::Dps | SchemeKind::Ups, false) => self.p1(&SplitNoCsit(prm), reduced, q)?,
            (SchemeKind::Dps | SchemeKind::Ups, true) => self.p2(&SplitCsit(prm), reduced, q)?,
            (SchemeKind::TimeSwitching, false) => self.p1(&SwitchNoCsit(prm), reduced, q)?,
            (SchemeKind::TimeSwitching, true) => self.p2(&SwitchCsit(prm), reduced, q)?,
            (SchemeKind::UpperBound, false) => {
                let r = duality::r_max_no_csit(reduced, &prm);
                let summary = PolicySummary {
                    avg_rate: r,
                    avg_energy: self.q_max,
                    avg_power: prm.tx_power_avg,
                    per_state: Vec::new(),
                };
                return Ok((point(scheme, q, &summary, DualPoint::default(), 0), None));
            }
            (SchemeKind::UpperBound, true) => self.p2(&IdealCsit(prm), reduced, q)?,
            (SchemeKind::AntennaSwitchingExhaustive, false) => self.p1(&SwitchAntennasNoCsit(prm), full, q)?,
            (SchemeKind::AntennaSwitchingExhaustive, true) => self.p2(&SwitchAntennasCsit(prm), full, q)?,
            (SchemeKind::AntennaSwitchingApprox, csit) => {
                let ups = if csit {
                    self.p2(&SplitCsit(prm), reduced, q)?
                } else {
                    self.p1(&SplitNoCsit(prm), reduced, q)?
                };
                let (decisions, stats) = simo::approx_switching_summary(
                    full,
                    csit,
                    ups.dual,
                    &prm,
                    self.options.epsilon,
                    self.options.eta,
                )?;
                let summary = PolicySummary::from_decisions(decisions);
                return Ok((point(scheme, q, &summary, ups.dual, ups.iterations), Some(stats)));
            }
        };
        Ok((point(scheme, q, &sol.summary, sol.dual, sol.iterations), None))
    }
}

/// Solves the scheme's dual problem at `n_points` uniformly spaced energy
/// targets in `[0, (1 - Q_MAX_BACKOFF) Q_max]`.
///
/// A point whose rate is beaten by a point with a larger target is replaced
/// by that point (its target kept), which removes the small non-monotone
/// steps discrete schemes show on finite ensembles.
pub fn trace_boundary(
    ensemble: &FadingEnsemble,
    params: &LinkParams,
    scheme: Scheme,
    n_points: usize,
    options: &TraceOptions,
) -> Result<REBoundary> {
    params.validate()?;
    options.solver.validate()?;
    if n_points < 2 {
        return Err(Error::Argument(format!("need at least 2 boundary points (got {n_points})")));
    }
    if scheme.kind == SchemeKind::AntennaSwitchingExhaustive
        && ensemble.num_antennas() > simo::MAX_EXHAUSTIVE_ANTENNAS
    {
        return Err(Error::Capacity {
            antennas: ensemble.num_antennas(),
            limit: simo::MAX_EXHAUSTIVE_ANTENNAS,
        });
    }
    let reduced = simo::ups_reduce(ensemble);
    let corners = scheme.csit.then(|| CsitCorners::new(&reduced, params));
    let (r_max, q_max) = match &corners {
        Some(c) => (c.r_max, c.q_max),
        None => (
            duality::r_max_no_csit(&reduced, params),
            duality::q_max_no_csit(&reduced, params),
        ),
    };
    let ctx = Context {
        ensemble,
        reduced,
        params: *params,
        corners,
        q_max,
        options: *options,
    };

    let solved = target_grid(q_max, n_points)
        .into_par_iter()
        .map(|q| {
            ctx.solve(scheme, q).map_err(|e| Error::AtTarget {
                target: q,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut selection: Option<SelectionStats> = None;
    let mut points = Vec::with_capacity(solved.len());
    for (p, stats) in solved {
        if let Some(s) = stats {
            let acc = selection.get_or_insert_with(SelectionStats::default);
            acc.searched += s.searched;
            acc.early_exits += s.early_exits;
            acc.size_bound_violations += s.size_bound_violations;
        }
        points.push(p);
    }
    for i in (0..points.len().saturating_sub(1)).rev() {
        let later = points[i + 1];
        if later.rate > points[i].rate {
            points[i] = REPoint {
                q_target: points[i].q_target,
                ..later
            };
        }
    }

    let (corner_rate_max, corner_energy_max) = corner_decisions(&ctx, scheme, r_max, q_max);
    Ok(REBoundary {
        scheme,
        points,
        corner_rate_max,
        corner_energy_max,
        selection,
    })
}

/// The two extreme policies of a scheme: everything decoded at the
/// rate-optimal power and everything harvested at the energy-optimal power.
fn corner_decisions(ctx: &Context<'_>, scheme: Scheme, r_max: f64, q_max: f64) -> (REPoint, REPoint) {
    let prm = ctx.params;
    let ln2 = std::f64::consts::LN_2;
    let mk = |q_target: f64, energy: f64, rate_nats: f64| REPoint {
        scheme,
        q_target,
        energy,
        rate: rate_nats / ln2,
        lambda: 0.0,
        beta: 0.0,
        iterations: 0,
    };
    let ideal = scheme.kind == SchemeKind::UpperBound;
    match &ctx.corners {
        None if ideal => (mk(0.0, q_max, r_max), mk(q_max, q_max, r_max)),
        None => (mk(0.0, 0.0, r_max), mk(q_max, q_max, 0.0)),
        Some(c) => {
            let gains = ctx.reduced.total_gains();
            let n = gains.len() as f64;
            if ideal {
                let at = |powers: &[f64]| {
                    let (mut r, mut e) = (0.0, 0.0);
                    for (h, p) in gains.iter().zip(powers) {
                        r += (h * p / prm.noise_power).ln_1p();
                        e += prm.harvest_efficiency * h * p;
                    }
                    (r / n, e / n)
                };
                let (r_wf, e_wf) = at(&c.water_filling_powers);
                let (r_gr, e_gr) = at(&c.greedy_powers);
                (mk(0.0, e_wf, r_wf), mk(q_max, e_gr, r_gr))
            } else {
                (mk(0.0, 0.0, r_max), mk(q_max, q_max, 0.0))
            }
        }
    }
}

/// Outcome of a dominance comparison between two boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dominance {
    pub holds: bool,
    /// Largest `(rate_b - rate_a) / rate_b` over the compared energies.
    pub worst_violation: f64,
    /// Energy target at which the worst violation occurs.
    pub at_energy: f64,
}

/// Whether boundary `a` lies on or above boundary `b` wherever both are
/// defined: `rate_a >= rate_b - tol rate_b` at every abscissa of either
/// boundary inside the common energy range, with linear interpolation.
pub fn region_dominates(a: &REBoundary, b: &REBoundary, tol: f64) -> Result<Dominance> {
    let lo_a = a.points.first().map(|p| p.q_target);
    let lo_b = b.points.first().map(|p| p.q_target);
    let hi_a = a.points.last().map(|p| p.q_target);
    let hi_b = b.points.last().map(|p| p.q_target);
    let (Some(lo_a), Some(lo_b), Some(hi_a), Some(hi_b)) = (lo_a, lo_b, hi_a, hi_b) else {
        return Err(Error::Comparison("empty boundary".into()));
    };
    let (lo, hi) = (lo_a.max(lo_b), hi_a.min(hi_b));
    if lo > hi {
        return Err(Error::Comparison(format!(
            "energy ranges of {} and {} do not overlap",
            a.scheme, b.scheme
        )));
    }
    let mut worst = Dominance {
        holds: true,
        worst_violation: f64::NEG_INFINITY,
        at_energy: lo,
    };
    let xs = a.points.iter().chain(&b.points).map(|p| p.q_target);
    for q in xs.filter(|q| (lo..=hi).contains(q)) {
        let (Some(ra), Some(rb)) = (a.rate_at(q), b.rate_at(q)) else {
            continue;
        };
        let violation = if rb > 0.0 {
            (rb - ra) / rb
        } else if ra >= rb {
            0.0
        } else {
            f64::INFINITY
        };
        if violation > worst.worst_violation {
            worst.worst_violation = violation;
            worst.at_energy = q;
        }
        if ra < rb - tol * rb {
            worst.holds = false;
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_ensemble() -> FadingEnsemble {
        let cfg = crate::fading::RicianConfig::default();
        crate::fading::sample_rician(&cfg, 2000, 9).unwrap()
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::siso_all().into_iter().chain(Scheme::simo_all()) {
            assert_eq!(s.to_string().parse::<Scheme>().unwrap(), s);
        }
        assert!("dps".parse::<Scheme>().is_err());
        assert!("foo-csit".parse::<Scheme>().is_err());
    }

    #[test]
    fn single_state_corner() {
        let e = FadingEnsemble::siso(vec![1e-4]).unwrap();
        let prm = LinkParams::default();
        let (r, q) = corner_points(&e, &prm, Scheme::new(SchemeKind::Dps, false)).unwrap();
        assert!((r - 1001f64.log2()).abs() < 1e-12);
        assert!((r - 9.97).abs() < 5e-3);
        assert!((q - 0.5 * 1e-4 * 0.1).abs() < 1e-18);
    }

    #[test]
    fn csit_energy_corner_dominates() {
        let e = small_ensemble();
        let prm = LinkParams::default();
        let (_, q0) = corner_points(&e, &prm, Scheme::new(SchemeKind::Dps, false)).unwrap();
        let (_, q1) = corner_points(&e, &prm, Scheme::new(SchemeKind::Dps, true)).unwrap();
        assert!(q1 >= q0);
    }

    #[test]
    fn two_points_are_the_corners() {
        let e = small_ensemble();
        let prm = LinkParams::default();
        let s = Scheme::new(SchemeKind::Dps, false);
        let b = trace_boundary(&e, &prm, s, 2, &TraceOptions::default()).unwrap();
        assert_eq!(b.points.len(), 2);
        assert!((b.points[0].rate - b.r_max()).abs() < 1e-12);
        assert!(b.points[1].rate <= 1e-2);
        assert!(trace_boundary(&e, &prm, s, 1, &TraceOptions::default()).is_err());
    }

    #[test]
    fn boundary_invariants_and_dominance() {
        let e = small_ensemble();
        let prm = LinkParams::default();
        let opts = TraceOptions::default();
        let dps = trace_boundary(&e, &prm, Scheme::new(SchemeKind::Dps, false), 9, &opts).unwrap();
        let ts = trace_boundary(&e, &prm, Scheme::new(SchemeKind::TimeSwitching, false), 9, &opts).unwrap();
        assert!(dps.monotonicity_violations().is_empty());
        assert!(dps.concavity_violations(2e-3).is_empty());
        assert!(region_dominates(&dps, &dps, 0.0).unwrap().holds);
        assert!(region_dominates(&dps, &ts, 5e-3).unwrap().holds);
        assert!(!region_dominates(&ts, &dps, 5e-3).unwrap().holds);
        for w in dps.points.windows(2) {
            assert!(w[1].q_target > w[0].q_target);
        }
    }

    #[test]
    fn interpolation() {
        let s = Scheme::new(SchemeKind::Dps, false);
        let mk = |q: f64, r: f64| REPoint {
            scheme: s,
            q_target: q,
            energy: q,
            rate: r,
            lambda: 0.0,
            beta: 0.0,
            iterations: 0,
        };
        let b = REBoundary {
            scheme: s,
            points: vec![mk(0.0, 4.0), mk(1.0, 2.0), mk(2.0, 0.0)],
            corner_rate_max: mk(0.0, 4.0),
            corner_energy_max: mk(2.0, 0.0),
            selection: None,
        };
        assert_eq!(b.rate_at(0.5), Some(3.0));
        assert_eq!(b.rate_at(2.0), Some(0.0));
        assert_eq!(b.rate_at(2.5), None);
        let other = REBoundary {
            points: vec![mk(3.0, 1.0), mk(4.0, 0.0)],
            ..b.clone()
        };
        assert!(matches!(region_dominates(&b, &other, 0.0), Err(Error::Comparison(_))));
    }
}
