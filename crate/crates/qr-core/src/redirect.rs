//! The redirecting construction: given two rays from the basepoint, build a
//! quasi-geodesic that coincides with the first up to a prescribed radius
//! and eventually runs along the second, measuring every constant involved.
//!
//! Two regimes per radius s:
//!
//! * Case 1 (the rays stay close at scale s): quasi-geodesic-to-geodesic
//!   surgery with guaranteed constants (9q, Q) and coincidence radius at
//!   least (1 - eps) s.
//! * Case 2 (they separate): the full pipeline - exit point p', geodesic
//!   ray zeta through p', an avoidant divergence path tau from p = zeta(s)
//!   to beta(s), its shortening sigma, two projection surgeries building
//!   gamma1 and gamma2, the annulus concatenation xi, and the final path
//!   that runs along beta from e = beta((1+C)s).
//!
//! Fractional radii are floored to integers; containment assertions carry an
//! additive slack of 2 to absorb the flooring.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::avoidant::{avoidant_shortest_path, AvoidantError, AvoidantOutcome, DisconnectInfo};
use crate::divergence::{
    divergence_profile, fit_growth, Classification, DivergenceError, DivergenceParams, PairStrategy,
};
use crate::fmath;
use crate::group::{GroupElement, GroupError};
use crate::oracle::{Distance, DistanceOracle, OracleError, OracleMode};
use crate::path::{qg_constants, DiscretePath, PathError, QGReport};
use crate::surgery::{closest_vertex, projection_surgery, shorten_path, Orientation, SurgeryError};

/// Additive slack absorbing floor-rounding in containment assertions.
pub const FLOOR_SLACK: f64 = 2.0;
/// Safety factor applied to the empirically fitted divergence constant.
pub const C_SAFETY_FACTOR: f64 = 1.5;
/// Divergence constant used when no finite profile is available.
pub const C_FALLBACK: f64 = 4.0;
/// A ray must certify as a (q, Q)-quasi-geodesic within this budget.
pub const RAY_CONSTANT_BUDGET: f64 = 10.0;
/// Verdict: measured multiplicative constants may spread by this factor.
pub const SWEEP_Q_SPREAD: f64 = 1.25;

#[derive(Debug, Clone, PartialEq)]
pub enum RedirectError {
    /// The generated ray fails to be a quasi-geodesic at any
    /// (q, Q) <= (10, 10).
    RayNotQuasigeodesic { witness: (usize, usize), q: f64 },
    NotBasedAtOrigin,
    UnknownWordLetter(String),
    EmptyWord,
    RayTooShort { needed: usize, have: usize },
    /// Greedy geodesic extension found no distance-increasing neighbor.
    ExtensionStuck { at: usize },
    NotGeodesic { index: usize },
    PathNeverExits { radius: f64 },
    OutsideBall,
    /// Case 1 hypothesis d(beta(r), gamma) <= eps r fails; route to Case 2.
    Case1HypothesisFails { dist: u32, bound: f64 },
    /// Case 2 hypothesis d(beta(s), alpha(t)) > 39s/72 fails; route to
    /// Case 1.
    Case2HypothesisFails { dist: u32, bound: f64 },
    /// The derived lower bound d(beta(s), p) >= s/36 (minus slack) failed.
    Case2GeometryViolated { dist: u32, bound: f64 },
    /// No avoidant path within length C*s: the constant C is too small.
    DivergencePathNotFound { cap: u32, info: DisconnectInfo },
    /// A named intermediate assertion from the construction failed.
    AssertionFailed { name: &'static str },
    /// A tail point's nearest vertex on xi is not e.
    NearestPointProjection { tail_index: usize },
    STooSmall { s: u32 },
    SListInvalid(String),
    OracleCapInsufficient { needed: f64, cap: u32 },
    CoincidenceRadiusViolated { dist: u32, bound: f64 },
    Group(GroupError),
    Oracle(String),
    Path(String),
    Surgery(String),
    Avoidant(String),
    Divergence(String),
}

impl From<GroupError> for RedirectError {
    fn from(e: GroupError) -> Self {
        RedirectError::Group(e)
    }
}

impl From<OracleError> for RedirectError {
    fn from(e: OracleError) -> Self {
        RedirectError::Oracle(e.to_string())
    }
}

impl From<PathError> for RedirectError {
    fn from(e: PathError) -> Self {
        RedirectError::Path(e.to_string())
    }
}

impl From<SurgeryError> for RedirectError {
    fn from(e: SurgeryError) -> Self {
        RedirectError::Surgery(e.to_string())
    }
}

impl From<AvoidantError> for RedirectError {
    fn from(e: AvoidantError) -> Self {
        RedirectError::Avoidant(e.to_string())
    }
}

impl From<DivergenceError> for RedirectError {
    fn from(e: DivergenceError) -> Self {
        RedirectError::Divergence(e.to_string())
    }
}

impl core::fmt::Display for RedirectError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            RedirectError::RayNotQuasigeodesic { witness, q } => write!(
                f,
                "ray is not a quasi-geodesic within budget: q = {q} at pair {witness:?}"
            ),
            RedirectError::NotBasedAtOrigin => write!(f, "ray must start at the identity"),
            RedirectError::UnknownWordLetter(s) => write!(f, "unknown generator label in word: {s}"),
            RedirectError::EmptyWord => write!(f, "periodic word must be nonempty"),
            RedirectError::RayTooShort { needed, have } => {
                write!(f, "ray too short: need {needed} edges, have {have}")
            }
            RedirectError::ExtensionStuck { at } => {
                write!(f, "geodesic extension stuck at index {at}")
            }
            RedirectError::NotGeodesic { index } => {
                write!(f, "path is not a geodesic from the basepoint (index {index})")
            }
            RedirectError::PathNeverExits { radius } => {
                write!(f, "path never exits the ball of radius {radius}")
            }
            RedirectError::OutsideBall => write!(f, "path endpoint outside the ball"),
            RedirectError::Case1HypothesisFails { dist, bound } => {
                write!(f, "case 1 hypothesis fails: d = {dist} > {bound}")
            }
            RedirectError::Case2HypothesisFails { dist, bound } => {
                write!(f, "case 2 hypothesis fails: d = {dist} <= {bound}")
            }
            RedirectError::Case2GeometryViolated { dist, bound } => {
                write!(f, "case 2 geometry violated: d(beta(s), p) = {dist} < {bound}")
            }
            RedirectError::DivergencePathNotFound { cap, info } => write!(
                f,
                "no divergence path within cap {cap} (proven separated: {}); C too small?",
                info.proven
            ),
            RedirectError::AssertionFailed { name } => write!(f, "assertion failed: {name}"),
            RedirectError::NearestPointProjection { tail_index } => {
                write!(f, "tail point {tail_index} does not project to e on xi")
            }
            RedirectError::STooSmall { s } => write!(f, "radius s = {s} too small (need >= 8)"),
            RedirectError::SListInvalid(s) => write!(f, "invalid s list: {s}"),
            RedirectError::OracleCapInsufficient { needed, cap } => {
                write!(f, "oracle cap {cap} below required radius {needed}")
            }
            RedirectError::CoincidenceRadiusViolated { dist, bound } => {
                write!(f, "coincidence radius {dist} below guaranteed {bound}")
            }
            RedirectError::Group(e) => write!(f, "{e}"),
            RedirectError::Oracle(e) => write!(f, "{e}"),
            RedirectError::Path(e) => write!(f, "{e}"),
            RedirectError::Surgery(e) => write!(f, "{e}"),
            RedirectError::Avoidant(e) => write!(f, "{e}"),
            RedirectError::Divergence(e) => write!(f, "{e}"),
        }
    }
}

/// How a ray is specified.
#[derive(Debug, Clone, PartialEq)]
pub enum RaySpec {
    /// Repeat a word in generator labels, e.g. "x" or "xy".
    PeriodicWord(String),
    /// Geodesic from the identity through the element, extended greedily.
    GeodesicToward(GroupElement),
    /// Use the path as given (must start at the identity).
    Custom(DiscretePath),
}

/// A built ray together with its certified constants.
#[derive(Debug, Clone, PartialEq)]
pub struct RayOutcome {
    pub path: DiscretePath,
    pub report: QGReport,
}

/// Splits a word string into generator indices by greedy longest-label
/// match.
pub fn parse_word(spec: &crate::group::GroupSpec, word: &str) -> Result<Vec<usize>, RedirectError> {
    if word.is_empty() {
        return Err(RedirectError::EmptyWord);
    }
    let mut out = Vec::new();
    let mut rest = word;
    while !rest.is_empty() {
        let mut matched: Option<(usize, usize)> = None;
        for (i, g) in spec.generators().iter().enumerate() {
            if rest.starts_with(g.label.as_str())
                && matched.map(|(_, len)| g.label.len() > len).unwrap_or(true)
            {
                matched = Some((i, g.label.len()));
            }
        }
        match matched {
            Some((i, len)) => {
                out.push(i);
                rest = &rest[len..];
            }
            None => return Err(RedirectError::UnknownWordLetter(rest.to_string())),
        }
    }
    Ok(out)
}

/// Builds a ray of the given edge length and certifies its constants: the
/// measurement runs at Q = 0 first, then at Q = 10; failing both is an
/// error.
pub fn build_ray(
    oracle: &DistanceOracle,
    ray: &RaySpec,
    length: usize,
) -> Result<RayOutcome, RedirectError> {
    let spec = oracle.spec();
    let path = match ray {
        RaySpec::PeriodicWord(word) => {
            let gens = parse_word(spec, word)?;
            let repeated: Vec<usize> = (0..length).map(|i| gens[i % gens.len()]).collect();
            DiscretePath::from_word(spec, spec.identity(), &repeated)?
        }
        RaySpec::GeodesicToward(x) => ray_through(oracle, x, length as u32)?,
        RaySpec::Custom(p) => {
            if !spec.is_identity(p.first()) {
                return Err(RedirectError::NotBasedAtOrigin);
            }
            p.clone()
        }
    };
    let report = qg_constants(&path, 0.0, oracle)?;
    if report.q <= RAY_CONSTANT_BUDGET {
        return Ok(RayOutcome { path, report });
    }
    let fallback = qg_constants(&path, RAY_CONSTANT_BUDGET, oracle)?;
    if fallback.q <= RAY_CONSTANT_BUDGET {
        return Ok(RayOutcome { path, report: fallback });
    }
    Err(RedirectError::RayNotQuasigeodesic { witness: fallback.witness, q: fallback.q })
}

/// Geodesic from the identity through `x`, extended greedily (first
/// distance-increasing neighbor in generator order) to the target radius.
/// Oracle-generic counterpart of the ball-based ray extension.
pub fn ray_through(
    oracle: &DistanceOracle,
    x: &GroupElement,
    target_radius: u32,
) -> Result<DiscretePath, RedirectError> {
    let spec = oracle.spec();
    let base = oracle.geodesic(&spec.identity(), x)?;
    let mut vertices: Vec<GroupElement> = base.vertices().to_vec();
    let mut cur = x.clone();
    let mut cur_dist = norm_exact(oracle, &cur)?;
    while cur_dist < target_radius {
        let mut extended = false;
        for n in spec.neighbors(&cur)? {
            if norm_exact(oracle, &n)? == cur_dist + 1 {
                vertices.push(n.clone());
                cur = n;
                cur_dist += 1;
                extended = true;
                break;
            }
        }
        if !extended {
            return Err(RedirectError::ExtensionStuck { at: vertices.len() - 1 });
        }
    }
    Ok(DiscretePath::from_trusted(vertices))
}

fn norm_exact(oracle: &DistanceOracle, v: &GroupElement) -> Result<u32, RedirectError> {
    match oracle.norm(v)? {
        Distance::Exact(d) => Ok(d),
        Distance::Uncertified => Err(RedirectError::OracleCapInsufficient {
            needed: f64::NAN,
            cap: oracle.cap(),
        }),
    }
}

fn dist_exact(
    oracle: &DistanceOracle,
    x: &GroupElement,
    y: &GroupElement,
) -> Result<u32, RedirectError> {
    match oracle.distance(x, y)? {
        Distance::Exact(d) => Ok(d),
        Distance::Uncertified => Err(RedirectError::OracleCapInsufficient {
            needed: f64::NAN,
            cap: oracle.cap(),
        }),
    }
}

/// Smallest index i with d(o, path[i]) >= r.
pub fn first_exit_index(
    oracle: &DistanceOracle,
    path: &DiscretePath,
    r: f64,
) -> Result<usize, RedirectError> {
    for (i, v) in path.iter().enumerate() {
        if (norm_exact(oracle, v)? as f64) >= r {
            return Ok(i);
        }
    }
    Err(RedirectError::PathNeverExits { radius: r })
}

/// Finite proxy for the geodesic representative of a ray: the parent-link
/// geodesic to the path's farthest-from-o vertex (smallest index on ties).
pub fn geodesicize(
    ball: &crate::ball::Ball,
    path: &DiscretePath,
) -> Result<DiscretePath, RedirectError> {
    let mut best: Option<(u32, usize)> = None;
    for (i, v) in path.iter().enumerate() {
        let d = ball.dist_of(v).ok_or(RedirectError::OutsideBall)?;
        if best.map(|(bd, _)| d > bd).unwrap_or(true) {
            best = Some((d, i));
        }
    }
    let (_, idx) = best.expect("path is nonempty");
    ball.geodesic_to(path.get(idx)).map_err(|_| RedirectError::OutsideBall)
}

/// Checks that every vertex sits at distance equal to its index.
pub fn is_geodesic_ray(oracle: &DistanceOracle, path: &DiscretePath) -> Result<bool, RedirectError> {
    for (i, v) in path.iter().enumerate() {
        if norm_exact(oracle, v)? != i as u32 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Which construction produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    Case1,
    Case2,
}

impl core::fmt::Display for Case {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Case::Case1 => write!(f, "case1"),
            Case::Case2 => write!(f, "case2"),
        }
    }
}

/// Whether the annulus cross-ratio assertion could run: it needs the
/// effective sphere fractions to satisfy delta > eps, which flooring denies
/// below s ~ 288.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnnulusCheck {
    Applied { cross_ratio: f64, bound: f64 },
    SkippedDeskScale { delta_eff: f64, eps_eff: f64 },
    NotApplicable,
}

/// Waypoints and traces of one Case 2 run.
#[derive(Debug, Clone, PartialEq)]
pub struct Case2Data {
    pub t_exit: usize,
    pub p_prime: GroupElement,
    pub p: GroupElement,
    pub a: GroupElement,
    pub b: GroupElement,
    pub d: GroupElement,
    pub e: GroupElement,
    pub zeta: DiscretePath,
    pub tau: DiscretePath,
    pub sigma: DiscretePath,
    pub gamma1: DiscretePath,
    pub gamma2: DiscretePath,
    pub xi: DiscretePath,
}

/// The full trace of one redirecting run at radius s.
#[derive(Debug, Clone, PartialEq)]
pub struct RedirectReport {
    pub s: u32,
    pub case: Case,
    pub final_path: DiscretePath,
    /// Measured multiplicative constant of the final path at `q_add`.
    pub final_q: f64,
    pub q_add: f64,
    /// Largest index where the final path still equals alpha, vertex by
    /// vertex.
    pub coincidence_prefix: usize,
    /// Index in the final path from which it runs along beta.
    pub landing_index: usize,
    pub c_used: f64,
    /// Measured constants of intermediate traces, by name.
    pub intermediate_q: Vec<(&'static str, f64)>,
    pub annulus_check: AnnulusCheck,
    pub case2: Option<Case2Data>,
}

/// Integer radii derived from s by the construction's fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Case2Fractions {
    /// floor(35 s / 72): the exit radius for p'.
    pub t_radius: u32,
    /// floor(71 s / 144) - 2: the sphere of the waypoint a.
    pub a_radius: i64,
    /// s/2 - 2: the avoidant-path exclusion radius.
    pub avoid_radius: f64,
    /// s/36: lower bound for d(beta(s), p) under the Case 2 hypothesis.
    pub geometry_bound: f64,
    /// 39 s / 72: the case split threshold.
    pub case2_threshold: f64,
}

pub fn case2_fractions(s: u32) -> Case2Fractions {
    let s64 = s as u64;
    Case2Fractions {
        t_radius: ((35 * s64) / 72) as u32,
        a_radius: ((71 * s64) / 144) as i64 - 2,
        avoid_radius: s as f64 / 2.0 - 2.0,
        geometry_bound: s as f64 / 36.0,
        case2_threshold: 39.0 * s as f64 / 72.0,
    }
}

/// Length budget for gamma2: (75/144 + 1 + 2C) s.
pub fn gamma2_length_budget(s: u32, c: f64) -> f64 {
    (75.0 / 144.0 + 1.0 + 2.0 * c) * s as f64
}

/// Outcome of one Case 1 surgery.
#[derive(Debug, Clone, PartialEq)]
pub struct Case1Outcome {
    pub path: DiscretePath,
    pub report: QGReport,
    pub coincidence_prefix: usize,
    pub landing_index: usize,
    /// d(o, q'_n): the radius through which the output runs along gamma.
    pub coincidence_radius: u32,
    pub waypoint: GroupElement,
}

/// Quasi-geodesic-to-geodesic redirecting surgery.
///
/// Requires d(beta(r_n), gamma) <= eps * r_n; the output coincides with
/// `gamma` out to radius (1 - eps) r_n and runs along `beta_bar` from
/// beta_bar(R_n), with constants at most (9q, Q) for gamma's (q, Q).
pub fn redirect_case1(
    oracle: &DistanceOracle,
    gamma: &DiscretePath,
    beta_bar: &DiscretePath,
    r_n: u32,
    epsilon: f64,
    q_add: f64,
) -> Result<Case1Outcome, RedirectError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(RedirectError::SListInvalid("epsilon must be in (0,1)".to_string()));
    }
    if beta_bar.len_edges() < r_n as usize {
        return Err(RedirectError::RayTooShort { needed: r_n as usize, have: beta_bar.len_edges() });
    }
    if !is_geodesic_ray(oracle, beta_bar)? {
        return Err(RedirectError::NotGeodesic { index: 0 });
    }
    let beta_rn = beta_bar.get(r_n as usize);

    // q_n: closest vertex of gamma to beta(r_n), smallest index on ties.
    let (q_idx, hyp_dist) = closest_vertex(gamma, beta_rn, oracle)?;
    if (hyp_dist as f64) > epsilon * r_n as f64 {
        return Err(RedirectError::Case1HypothesisFails {
            dist: hyp_dist,
            bound: epsilon * r_n as f64,
        });
    }

    // R_n: a radius whose ball contains the prefix [o, q_n]_gamma. Taking
    // it at least r_n keeps the distance chain of the surgery argument
    // valid.
    let mut r_big = r_n;
    for v in gamma.vertices()[..=q_idx].iter() {
        r_big = r_big.max(norm_exact(oracle, v)?);
    }
    if beta_bar.len_edges() < r_big as usize {
        return Err(RedirectError::RayTooShort { needed: r_big as usize, have: beta_bar.len_edges() });
    }
    let beta_rbig = beta_bar.get(r_big as usize);

    // q'_n: closest vertex of the prefix to beta(R_n).
    let prefix = gamma.subpath(0, q_idx);
    let (qp_idx, _) = closest_vertex(&prefix, beta_rbig, oracle)?;
    let qp = prefix.get(qp_idx).clone();
    let coincidence_radius = norm_exact(oracle, &qp)?;
    let guaranteed = (1.0 - epsilon) * r_n as f64;
    if (coincidence_radius as f64) < guaranteed - 1e-9 {
        return Err(RedirectError::CoincidenceRadiusViolated {
            dist: coincidence_radius,
            bound: guaranteed,
        });
    }

    let spec = oracle.spec();
    let bridge = oracle.geodesic(&qp, beta_rbig)?;
    let head = prefix.subpath(0, qp_idx);
    let tail = beta_bar.subpath(r_big as usize, beta_bar.len_vertices() - 1);
    let zeta = head.concat(spec, &bridge)?;
    let landing_index = zeta.len_vertices() - 1;
    let xi = zeta.concat(spec, &tail)?;

    let mut coincidence_prefix = 0;
    while coincidence_prefix + 1 < xi.len_vertices()
        && coincidence_prefix + 1 < gamma.len_vertices()
        && xi.get(coincidence_prefix + 1) == gamma.get(coincidence_prefix + 1)
    {
        coincidence_prefix += 1;
    }

    let report = qg_constants(&xi, q_add, oracle)?;
    Ok(Case1Outcome {
        path: xi,
        report,
        coincidence_prefix,
        landing_index,
        coincidence_radius,
        waypoint: qp,
    })
}

/// The Case 2 pipeline at radius s, with the divergence constant C.
///
/// `alpha` and `beta_bar` are rays from the identity; `beta_bar` must be a
/// geodesic ray of length at least (1+C)s plus a tail margin.
pub fn redirect_case2(
    oracle: &DistanceOracle,
    alpha: &RayOutcome,
    beta_bar: &DiscretePath,
    s: u32,
    c: f64,
    q_add: f64,
    budget: usize,
) -> Result<RedirectReport, RedirectError> {
    if s < 8 {
        return Err(RedirectError::STooSmall { s });
    }
    let spec = oracle.spec();
    let o = spec.identity();
    let fr = case2_fractions(s);
    let needed_radius = (1.0 + c) * s as f64;
    if (oracle.cap() as f64) < needed_radius {
        return Err(RedirectError::OracleCapInsufficient { needed: needed_radius, cap: oracle.cap() });
    }

    // p' = alpha(t_{35s/72}).
    let t_exit = first_exit_index(oracle, &alpha.path, fr.t_radius as f64)?;
    let p_prime = alpha.path.get(t_exit).clone();

    // Case 2 hypothesis.
    if beta_bar.len_edges() < s as usize {
        return Err(RedirectError::RayTooShort { needed: s as usize, have: beta_bar.len_edges() });
    }
    let beta_s = beta_bar.get(s as usize).clone();
    let hyp = dist_exact(oracle, &beta_s, &p_prime)?;
    if (hyp as f64) <= fr.case2_threshold {
        return Err(RedirectError::Case2HypothesisFails { dist: hyp, bound: fr.case2_threshold });
    }

    // zeta: geodesic ray from o through p', out to the sphere S(o, s).
    let zeta = ray_through(oracle, &p_prime, s)?;
    let p = zeta.get(s as usize).clone();

    // Derived geometry: d(beta(s), p) >= s/36, up to flooring slack.
    let geom = dist_exact(oracle, &beta_s, &p)?;
    if (geom as f64) < fr.geometry_bound - FLOOR_SLACK {
        return Err(RedirectError::Case2GeometryViolated { dist: geom, bound: fr.geometry_bound });
    }

    // tau: avoidant divergence path p -> beta(s) outside B(o, s/2 - 2).
    let cap_tau = fmath::ceil_u32(c * s as f64);
    let tau = match avoidant_shortest_path(oracle, &p, &beta_s, &o, fr.avoid_radius, cap_tau, budget)? {
        AvoidantOutcome::Path(p) => p,
        AvoidantOutcome::Disconnected(info) => {
            return Err(RedirectError::DivergencePathNotFound { cap: cap_tau, info })
        }
    };
    if tau.len_edges() as f64 > c * s as f64 {
        return Err(RedirectError::DivergencePathNotFound {
            cap: cap_tau,
            info: DisconnectInfo { cap: cap_tau, proven: false },
        });
    }

    // sigma: shortened tau within the s/144 neighborhood. When p and
    // beta(s) nearly coincide there is nothing to shorten.
    let target_reach = s as f64 / 144.0;
    let endpoint_sep = dist_exact(oracle, &p, &beta_s)?;
    let sigma = if endpoint_sep <= 2 {
        tau.clone()
    } else {
        let r_ll = (s as f64 / 36.0).min(endpoint_sep as f64 - 1.0).max(1.0);
        let rho = (target_reach / r_ll).min(1.0);
        shorten_path(&tau, rho, r_ll, oracle)?.path
    };

    // sigma stays in the annulus.
    for v in sigma.iter() {
        let d = norm_exact(oracle, v)? as f64;
        if d < 71.0 * s as f64 / 144.0 - 2.0 - 1e-9 {
            return Err(RedirectError::AssertionFailed { name: "sigma outside B(71s/144 - 2)" });
        }
        if d > (1.0 + c) * s as f64 + 1e-9 {
            return Err(RedirectError::AssertionFailed { name: "sigma inside B((1+C)s)" });
        }
    }

    // a = zeta on the sphere of radius floor(71s/144) - 2.
    if fr.a_radius < 0 {
        return Err(RedirectError::STooSmall { s });
    }
    let a_idx = fr.a_radius as usize;
    let a = zeta.get(a_idx).clone();

    // gamma1 = [a, b] + [b, beta(s)]_sigma via projection surgery.
    let (b_idx, _) = closest_vertex(&sigma, &a, oracle)?;
    let b = sigma.get(b_idx).clone();
    let gamma1 = projection_surgery(&a, &sigma, Orientation::TowardEnd, oracle)?;

    // e = beta((1+C)s); gamma2 = [e, d] + [d, a]_gamma1.
    let e_idx = fmath::floor_u32((1.0 + c) * s as f64) as usize;
    if beta_bar.len_edges() < e_idx + 1 {
        return Err(RedirectError::RayTooShort { needed: e_idx + 1, have: beta_bar.len_edges() });
    }
    let e = beta_bar.get(e_idx).clone();
    let (d_idx, _) = closest_vertex(&gamma1, &e, oracle)?;
    let d_elem = gamma1.get(d_idx).clone();
    let gamma2 = projection_surgery(&e, &gamma1, Orientation::TowardStart, oracle)?;
    if gamma2.len_edges() as f64 > gamma2_length_budget(s, c) {
        return Err(RedirectError::AssertionFailed { name: "gamma2 length budget" });
    }

    // xi = [o, p']_alpha + [p', a]_zeta + gamma2 (run from a to e).
    let alpha_prefix = alpha.path.subpath(0, t_exit);
    let zeta_link = zeta.subpath(fr.t_radius as usize, a_idx);
    let xi = alpha_prefix.concat(spec, &zeta_link)?.concat(spec, &gamma2.reversed())?;

    // Annulus cross-ratio assertion, when the effective fractions admit it.
    let eps_eff = norm_exact(oracle, &p_prime)? as f64 / s as f64;
    let delta_eff = norm_exact(oracle, &a)? as f64 / s as f64;
    let annulus_check = if delta_eff > eps_eff {
        let c_eff = gamma2.len_edges() as f64 / s as f64;
        let bound =
            (alpha.report.q + alpha.report.q_add + c_eff + delta_eff - eps_eff) / (delta_eff - eps_eff);
        let gamma2_start = xi.len_vertices() - gamma2.len_vertices();
        let mut cross = 0.0f64;
        for i in 0..=t_exit {
            for j in gamma2_start..xi.len_vertices() {
                let d = dist_exact(oracle, xi.get(i), xi.get(j))? as f64;
                let ratio = if d == 0.0 { f64::INFINITY } else { (j - i) as f64 / d };
                if ratio > cross {
                    cross = ratio;
                }
            }
        }
        if cross > bound {
            return Err(RedirectError::AssertionFailed { name: "annulus cross-pair ratio" });
        }
        AnnulusCheck::Applied { cross_ratio: cross, bound }
    } else {
        AnnulusCheck::SkippedDeskScale { delta_eff, eps_eff }
    };

    // final = xi + beta tail from e; every tail point must project to e.
    let landing_index = xi.len_vertices() - 1;
    let beta_tail = beta_bar.subpath(e_idx, beta_bar.len_vertices() - 1);
    let final_path = xi.concat(spec, &beta_tail)?;
    for (k, u) in beta_tail.iter().enumerate().skip(1) {
        let to_e = dist_exact(oracle, u, &e)?;
        for i in 0..xi.len_vertices() {
            if dist_exact(oracle, u, xi.get(i))? < to_e {
                return Err(RedirectError::NearestPointProjection { tail_index: k });
            }
        }
    }

    // Prefix and tail identities.
    let mut coincidence_prefix = 0;
    while coincidence_prefix + 1 < final_path.len_vertices()
        && coincidence_prefix + 1 < alpha.path.len_vertices()
        && final_path.get(coincidence_prefix + 1) == alpha.path.get(coincidence_prefix + 1)
    {
        coincidence_prefix += 1;
    }
    if coincidence_prefix < t_exit {
        return Err(RedirectError::AssertionFailed { name: "prefix identity through t_exit" });
    }
    for k in 0..final_path.len_vertices() - landing_index {
        if final_path.get(landing_index + k) != beta_bar.get(e_idx + k) {
            return Err(RedirectError::AssertionFailed { name: "tail identity from landing" });
        }
    }

    let mut intermediate_q = Vec::new();
    for (name, path) in [
        ("zeta", &zeta),
        ("tau", &tau),
        ("sigma", &sigma),
        ("gamma1", &gamma1),
        ("gamma2", &gamma2),
        ("xi", &xi),
    ] {
        intermediate_q.push((name, qg_constants(path, q_add, oracle)?.q));
    }
    let final_report = qg_constants(&final_path, q_add, oracle)?;

    Ok(RedirectReport {
        s,
        case: Case::Case2,
        final_path,
        final_q: final_report.q,
        q_add,
        coincidence_prefix,
        landing_index,
        c_used: c,
        intermediate_q,
        annulus_check,
        case2: Some(Case2Data {
            t_exit,
            p_prime,
            p,
            a,
            b,
            d: d_elem,
            e,
            zeta,
            tau,
            sigma,
            gamma1,
            gamma2,
            xi,
        }),
    })
}

/// Options for a redirecting sweep.
#[derive(Debug, Clone)]
pub struct SweepOptions {
    /// Override the divergence constant instead of estimating it.
    pub c_override: Option<f64>,
    /// Radii used for the C-estimation profile.
    pub profile_radii: Vec<u32>,
    /// Extra ray length past (1+C) * max(s).
    pub margin: u32,
    /// Vertex budget for searches and balls.
    pub budget: usize,
    /// Additive constant all sweep measurements run at.
    pub q_add: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            c_override: None,
            profile_radii: alloc::vec![4, 6, 8],
            margin: 8,
            budget: crate::ball::DEFAULT_VERTEX_BUDGET,
            q_add: FLOOR_SLACK,
        }
    }
}

/// Sweep verdict: bounded constants across the listed radii.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepVerdict {
    pub bounded: bool,
    pub min_q: f64,
    pub max_q: f64,
    pub q_spread_limit: f64,
    pub q_budget: f64,
    /// True when both cases fired across the sweep; per-radius cases are in
    /// the reports.
    pub mixed_cases: bool,
    pub c_used: f64,
    /// False when C came from an override or the fallback constant.
    pub c_estimated: bool,
}

impl SweepVerdict {
    pub fn label(&self) -> &'static str {
        if self.bounded {
            "Bounded"
        } else {
            "Unbounded"
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub reports: Vec<RedirectReport>,
    pub verdict: SweepVerdict,
}

/// A sweep failure, tagged with the radius that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepError {
    pub s: Option<u32>,
    pub source: RedirectError,
}

impl core::fmt::Display for SweepError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self.s {
            Some(s) => write!(f, "sweep failed at s = {s}: {}", self.source),
            None => write!(f, "sweep failed: {}", self.source),
        }
    }
}

impl From<RedirectError> for SweepError {
    fn from(source: RedirectError) -> Self {
        SweepError { s: None, source }
    }
}

/// Estimates the linear-divergence constant C from a profile: the largest
/// Div(r)/r over the profile radii, times a safety factor. Falls back to a
/// fixed constant when the profile disconnects or cannot be fitted.
pub fn estimate_c(
    oracle: &DistanceOracle,
    radii: &[u32],
    budget: usize,
) -> Result<(f64, bool), RedirectError> {
    let strategy = if oracle.mode() == OracleMode::ClosedForm && !oracle.spec().symmetries().is_empty()
    {
        PairStrategy::AllSpherePairs
    } else {
        PairStrategy::Sample { count: 200, seed: 42 }
    };
    let params = DivergenceParams::canonical(strategy);
    let max_r = radii.iter().copied().max().unwrap_or(8);
    let profile = divergence_profile(oracle, radii, &params, 4 * max_r, budget)?;
    let fit = fit_growth(&profile.values());
    match fit {
        Ok(fit) if fit.classification != Classification::DisconnectedAtScale => {
            match fit.linear_constant {
                Some(lc) => Ok((lc * C_SAFETY_FACTOR, true)),
                None => Ok((C_FALLBACK, false)),
            }
        }
        _ => Ok((C_FALLBACK, false)),
    }
}

/// Runs the construction for every radius in `s_list`: probes the case
/// split, runs the matching construction, and aggregates a boundedness
/// verdict over the measured constants.
pub fn redirect_sweep(
    oracle: &DistanceOracle,
    alpha_spec: &RaySpec,
    beta_spec: &RaySpec,
    s_list: &[u32],
    opts: &SweepOptions,
) -> Result<SweepOutcome, SweepError> {
    if s_list.len() < 2 {
        return Err(RedirectError::SListInvalid("need at least 2 radii".to_string()).into());
    }
    if !s_list.windows(2).all(|w| w[0] < w[1]) {
        return Err(RedirectError::SListInvalid("radii must be strictly increasing".to_string()).into());
    }
    if s_list.first().copied().unwrap_or(0) < 8 {
        return Err(RedirectError::SListInvalid("radii must be >= 8".to_string()).into());
    }

    let (c_used, c_estimated) = match opts.c_override {
        Some(c) => (c, false),
        None => estimate_c(oracle, &opts.profile_radii, opts.budget)?,
    };

    let max_s = *s_list.last().unwrap();
    let ray_len = fmath::ceil_u32((1.0 + c_used) * max_s as f64) as usize + opts.margin as usize;
    let alpha = build_ray(oracle, alpha_spec, ray_len)?;
    let beta = build_ray(oracle, beta_spec, ray_len)?;
    let beta_bar = if is_geodesic_ray(oracle, &beta.path)? {
        beta.path.clone()
    } else {
        // Geodesic proxy: geodesic through the ray's farthest vertex.
        let mut far = (0u32, 0usize);
        for (i, v) in beta.path.iter().enumerate() {
            let d = norm_exact(oracle, v)?;
            if d > far.0 {
                far = (d, i);
            }
        }
        ray_through(oracle, beta.path.get(far.1), ray_len as u32)?
    };

    let mut reports = Vec::with_capacity(s_list.len());
    for &s in s_list {
        let report = run_one_radius(oracle, &alpha, &beta_bar, s, c_used, opts)
            .map_err(|source| SweepError { s: Some(s), source })?;
        reports.push(report);
    }

    let min_q = reports.iter().map(|r| r.final_q).fold(f64::INFINITY, f64::min);
    let max_q = reports.iter().map(|r| r.final_q).fold(0.0f64, f64::max);
    let mixed = reports.iter().any(|r| r.case == Case::Case1)
        && reports.iter().any(|r| r.case == Case::Case2);
    let bounded =
        max_q.is_finite() && max_q <= SWEEP_Q_SPREAD * min_q && opts.q_add <= RAY_CONSTANT_BUDGET;
    Ok(SweepOutcome {
        reports,
        verdict: SweepVerdict {
            bounded,
            min_q,
            max_q,
            q_spread_limit: SWEEP_Q_SPREAD,
            q_budget: RAY_CONSTANT_BUDGET,
            mixed_cases: mixed,
            c_used,
            c_estimated,
        },
    })
}

fn run_one_radius(
    oracle: &DistanceOracle,
    alpha: &RayOutcome,
    beta_bar: &DiscretePath,
    s: u32,
    c_used: f64,
    opts: &SweepOptions,
) -> Result<RedirectReport, RedirectError> {
    let fr = case2_fractions(s);
    let t = first_exit_index(oracle, &alpha.path, fr.t_radius as f64)?;
    if beta_bar.len_edges() < s as usize {
        return Err(RedirectError::RayTooShort { needed: s as usize, have: beta_bar.len_edges() });
    }
    let probe = dist_exact(oracle, beta_bar.get(s as usize), alpha.path.get(t))?;
    if (probe as f64) <= fr.case2_threshold + FLOOR_SLACK {
        // Case 1; the flooring slack on the threshold may need a slightly
        // larger eps than 39/72 so that the surgery hypothesis still holds.
        let eps = (39.0 / 72.0f64).max(probe as f64 / s as f64 + 1e-9);
        let out = redirect_case1(oracle, &alpha.path, beta_bar, s, eps, opts.q_add)?;
        Ok(RedirectReport {
            s,
            case: Case::Case1,
            final_q: out.report.q,
            q_add: opts.q_add,
            coincidence_prefix: out.coincidence_prefix,
            landing_index: out.landing_index,
            c_used,
            intermediate_q: Vec::new(),
            annulus_check: AnnulusCheck::NotApplicable,
            case2: None,
            final_path: out.path,
        })
    } else {
        redirect_case2(oracle, alpha, beta_bar, s, c_used, opts.q_add, opts.budget)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::parse_group_spec;
    use crate::path::check_qg;

    fn z2_oracle() -> DistanceOracle {
        DistanceOracle::closed_form(parse_group_spec("z^2").unwrap()).unwrap()
    }

    fn vec2(x: i64, y: i64) -> GroupElement {
        GroupElement::Vector(alloc::vec![x, y])
    }

    #[test]
    fn fraction_arithmetic_at_144() {
        let fr = case2_fractions(144);
        assert_eq!(fr.t_radius, 70);
        assert_eq!(fr.a_radius, 69);
        assert_eq!(fr.avoid_radius, 70.0);
        assert_eq!(fr.geometry_bound, 4.0);
        assert_eq!(fr.case2_threshold, 78.0);
        // gamma2 budget at C = 3.
        assert_eq!(gamma2_length_budget(144, 3.0), 1083.0);
    }

    #[test]
    fn build_periodic_rays() {
        let o = z2_oracle();
        let straight = build_ray(&o, &RaySpec::PeriodicWord("x".into()), 100).unwrap();
        assert_eq!(straight.report.q, 1.0);
        assert_eq!(straight.path.len_edges(), 100);
        assert_eq!(straight.path.last(), &vec2(100, 0));
        let stair = build_ray(&o, &RaySpec::PeriodicWord("xy".into()), 100).unwrap();
        assert_eq!(stair.report.q, 1.0);
        assert_eq!(stair.path.get(2), &vec2(1, 1));
    }

    #[test]
    fn periodic_backtracking_word_is_rejected() {
        let o = z2_oracle();
        // A short backtracking segment still fits inside (10, 10); a long
        // one cannot.
        assert!(build_ray(&o, &RaySpec::PeriodicWord("xX".into()), 40).is_ok());
        let err = build_ray(&o, &RaySpec::PeriodicWord("xX".into()), 400).unwrap_err();
        assert!(matches!(err, RedirectError::RayNotQuasigeodesic { .. }));
    }

    #[test]
    fn free_group_periodic_word_is_geodesic() {
        let s = parse_group_spec("free:2").unwrap();
        let o = DistanceOracle::closed_form(s).unwrap();
        let ray = build_ray(&o, &RaySpec::PeriodicWord("ab".into()), 60).unwrap();
        assert_eq!(ray.report.q, 1.0);
    }

    #[test]
    fn first_exit_basics() {
        let o = z2_oracle();
        let ray = build_ray(&o, &RaySpec::PeriodicWord("x".into()), 20).unwrap();
        assert_eq!(first_exit_index(&o, &ray.path, 7.0).unwrap(), 7);
        let stair = build_ray(&o, &RaySpec::PeriodicWord("xy".into()), 20).unwrap();
        assert_eq!(first_exit_index(&o, &stair.path, 7.0).unwrap(), 7);
        assert!(matches!(
            first_exit_index(&o, &ray.path, 100.0),
            Err(RedirectError::PathNeverExits { .. })
        ));
        // A loop inside the ball does not count: first crossing only.
        let spec = o.spec().clone();
        let path = DiscretePath::new(
            &spec,
            alloc::vec![
                vec2(0, 0),
                vec2(1, 0),
                vec2(1, 1),
                vec2(0, 1),
                vec2(0, 2),
                vec2(0, 3),
            ],
        )
        .unwrap();
        assert_eq!(first_exit_index(&o, &path, 3.0).unwrap(), 5);
    }

    #[test]
    fn geodesicize_staircase() {
        let s = parse_group_spec("z^2").unwrap();
        let ball = crate::ball::grow_ball(&s, 8, 100_000).unwrap();
        let o = z2_oracle();
        let stair = build_ray(&o, &RaySpec::PeriodicWord("xy".into()), 8).unwrap();
        let g = geodesicize(&ball, &stair.path).unwrap();
        assert_eq!(g.len_edges(), 8);
        assert_eq!(g.last(), &vec2(4, 4));
        // Already-geodesic input keeps endpoints and length.
        let straight = build_ray(&o, &RaySpec::PeriodicWord("x".into()), 8).unwrap();
        let g2 = geodesicize(&ball, &straight.path).unwrap();
        assert_eq!(g2.len_edges(), 8);
        assert_eq!(g2.last(), &vec2(8, 0));
        // Single vertex path.
        let single = DiscretePath::single(s.identity());
        let g3 = geodesicize(&ball, &single).unwrap();
        assert_eq!(g3.len_vertices(), 1);
    }

    #[test]
    fn case1_axis_redirected_to_staircase() {
        let o = z2_oracle();
        let gamma = build_ray(&o, &RaySpec::PeriodicWord("x".into()), 64).unwrap();
        let beta = build_ray(&o, &RaySpec::PeriodicWord("xy".into()), 64).unwrap();
        for r_n in [8u32, 16, 32] {
            let out = redirect_case1(&o, &gamma.path, &beta.path, r_n, 0.75, 0.0).unwrap();
            assert!(
                check_qg(&out.path, 9.0, 0.0, &o).unwrap().passed(),
                "9q bound at r_n = {r_n}"
            );
            assert!(
                out.coincidence_radius as f64 >= 0.25 * r_n as f64,
                "coincidence radius at r_n = {r_n}"
            );
            // Tail runs along beta from the landing vertex onward; the
            // landing vertex beta(R_n) sits at index R_n = its norm.
            let r_big = match o.norm(out.path.get(out.landing_index)).unwrap() {
                Distance::Exact(d) => d as usize,
                Distance::Uncertified => panic!(),
            };
            for k in 0..out.path.len_vertices() - out.landing_index {
                assert_eq!(out.path.get(out.landing_index + k), beta.path.get(r_big + k));
            }
        }
    }

    #[test]
    fn case1_self_redirect_is_identity_like() {
        let o = z2_oracle();
        let beta = build_ray(&o, &RaySpec::PeriodicWord("x".into()), 40).unwrap();
        let out = redirect_case1(&o, &beta.path, &beta.path, 16, 0.5, 0.0).unwrap();
        assert_eq!(out.report.q, 1.0);
        assert_eq!(out.path.vertices(), beta.path.vertices());
    }

    #[test]
    fn case1_hypothesis_fails_in_tree() {
        let s = parse_group_spec("free:2").unwrap();
        let o = DistanceOracle::closed_form(s).unwrap();
        let a_ray = build_ray(&o, &RaySpec::PeriodicWord("a".into()), 30).unwrap();
        let b_ray = build_ray(&o, &RaySpec::PeriodicWord("b".into()), 30).unwrap();
        let err = redirect_case1(&o, &b_ray.path, &a_ray.path, 8, 0.5, 0.0).unwrap_err();
        match err {
            RedirectError::Case1HypothesisFails { dist, bound } => {
                // The basepoint itself is the nearest ray vertex to a^8.
                assert_eq!(dist, 8);
                assert_eq!(bound, 4.0);
            }
            other => panic!("expected hypothesis failure, got {other:?}"),
        }
    }

    #[test]
    fn case2_axis_instance_runs() {
        let o = z2_oracle();
        let c = 3.0;
        let len = ((1.0 + c) * 72.0) as usize + 8;
        let alpha = build_ray(&o, &RaySpec::PeriodicWord("x".into()), len).unwrap();
        let beta = build_ray(&o, &RaySpec::PeriodicWord("y".into()), len).unwrap();
        let report = redirect_case2(&o, &alpha, &beta.path, 72, c, 2.0, 100_000).unwrap();
        assert_eq!(report.case, Case::Case2);
        assert!(report.final_q.is_finite());
        let case2 = report.case2.as_ref().unwrap();
        assert_eq!(case2.p_prime, vec2(35, 0));
        assert_eq!(case2.p, vec2(72, 0));
        // Prefix identity through t_exit.
        assert!(report.coincidence_prefix >= case2.t_exit);
        for i in 0..=case2.t_exit {
            assert_eq!(report.final_path.get(i), alpha.path.get(i));
        }
        // Tail identity from the landing index.
        let e_idx = ((1.0 + c) * 72.0) as usize;
        for k in 0..report.final_path.len_vertices() - report.landing_index {
            assert_eq!(
                report.final_path.get(report.landing_index + k),
                beta.path.get(e_idx + k)
            );
        }
        assert!(case2.tau.len_edges() <= (c * 72.0) as usize);
    }

    #[test]
    fn case2_hypothesis_fails_for_parallel_rays() {
        let o = z2_oracle();
        let alpha = build_ray(&o, &RaySpec::PeriodicWord("x".into()), 300).unwrap();
        let err = redirect_case2(&o, &alpha, &alpha.path, 72, 2.0, 2.0, 100_000).unwrap_err();
        assert!(matches!(err, RedirectError::Case2HypothesisFails { .. }));
    }

    #[test]
    fn sweep_z2_axes_is_bounded() {
        let o = z2_oracle();
        let opts = SweepOptions::default();
        let out = redirect_sweep(
            &o,
            &RaySpec::PeriodicWord("x".into()),
            &RaySpec::PeriodicWord("y".into()),
            &[36, 72],
            &opts,
        )
        .unwrap();
        assert_eq!(out.reports.len(), 2);
        assert!(out.verdict.bounded, "verdict: {:?}", out.verdict);
        for r in &out.reports {
            assert_eq!(r.case, Case::Case2);
            let fr = case2_fractions(r.s);
            assert!(r.coincidence_prefix >= fr.t_radius as usize);
        }
    }

    #[test]
    fn sweep_self_redirect_is_trivially_bounded() {
        let o = z2_oracle();
        let out = redirect_sweep(
            &o,
            &RaySpec::PeriodicWord("x".into()),
            &RaySpec::PeriodicWord("x".into()),
            &[16, 32],
            &SweepOptions::default(),
        )
        .unwrap();
        assert!(out.verdict.bounded);
        for r in &out.reports {
            assert_eq!(r.case, Case::Case1);
            assert_eq!(r.final_q, 1.0);
        }
    }

    #[test]
    fn sweep_tree_fails_at_divergence_step() {
        let s = parse_group_spec("free:2").unwrap();
        let o = DistanceOracle::closed_form(s).unwrap();
        let err = redirect_sweep(
            &o,
            &RaySpec::PeriodicWord("a".into()),
            &RaySpec::PeriodicWord("b".into()),
            &[8, 16],
            &SweepOptions::default(),
        )
        .unwrap_err();
        assert_eq!(err.s, Some(8));
        match err.source {
            RedirectError::DivergencePathNotFound { info, .. } => assert!(info.proven),
            other => panic!("expected divergence failure, got {other:?}"),
        }
    }

    #[test]
    fn sweep_validates_s_list() {
        let o = z2_oracle();
        let opts = SweepOptions::default();
        let alpha = RaySpec::PeriodicWord("x".into());
        let beta = RaySpec::PeriodicWord("y".into());
        assert!(redirect_sweep(&o, &alpha, &beta, &[36], &opts).is_err());
        assert!(redirect_sweep(&o, &alpha, &beta, &[72, 36], &opts).is_err());
    }
}
