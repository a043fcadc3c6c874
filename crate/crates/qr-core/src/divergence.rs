//! Divergence measurements: per-pair avoidant path cost, the sphere
//! supremum profile, and growth classification.
//!
//! For points a, b at radius r from the center, the per-pair divergence is
//! the length of a shortest path connecting them outside the open ball of
//! radius `delta * r - gamma`. The profile takes the supremum over sphere
//! pairs per radius; a least-squares fit of log(div) against log(r)
//! classifies growth at desk scale.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use hashbrown::HashSet;
use rand_core::{RngCore, SeedableRng};

use crate::avoidant::{avoidant_shortest_path, AvoidantError, AvoidantOutcome, DisconnectInfo};
use crate::ball::{Ball, BallError};
use crate::fmath;
use crate::group::{GroupElement, GroupError};
use crate::oracle::{DistanceOracle, OracleError};

/// Classification thresholds. Small-radius data cannot witness asymptotics,
/// so these are desk-scale conventions, echoed into output metadata.
pub const LINEAR_EXPONENT_MAX: f64 = 1.25;
pub const LINEAR_RATIO_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub enum DivergenceError {
    BadParams(String),
    /// Fit needs at least 3 finite records at distinct radii.
    TooFewRecords { finite: usize },
    Avoidant(String),
    Group(GroupError),
    Oracle(String),
    Ball(String),
    UncertifiedRadius,
}

impl From<AvoidantError> for DivergenceError {
    fn from(e: AvoidantError) -> Self {
        DivergenceError::Avoidant(e.to_string())
    }
}

impl From<GroupError> for DivergenceError {
    fn from(e: GroupError) -> Self {
        DivergenceError::Group(e)
    }
}

impl From<OracleError> for DivergenceError {
    fn from(e: OracleError) -> Self {
        DivergenceError::Oracle(e.to_string())
    }
}

impl From<BallError> for DivergenceError {
    fn from(e: BallError) -> Self {
        DivergenceError::Ball(e.to_string())
    }
}

impl core::fmt::Display for DivergenceError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            DivergenceError::BadParams(s) => write!(f, "bad divergence parameters: {s}"),
            DivergenceError::TooFewRecords { finite } => {
                write!(f, "growth fit needs >= 3 finite records at distinct radii, got {finite}")
            }
            DivergenceError::Avoidant(e) => write!(f, "{e}"),
            DivergenceError::Group(e) => write!(f, "{e}"),
            DivergenceError::Oracle(e) => write!(f, "{e}"),
            DivergenceError::Ball(e) => write!(f, "{e}"),
            DivergenceError::UncertifiedRadius => write!(f, "endpoint radius uncertified"),
        }
    }
}

/// How sphere pairs are chosen for the per-radius supremum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairStrategy {
    /// Every unordered sphere pair, reduced by declared graph symmetries.
    /// Exact.
    AllSpherePairs,
    /// Seeded random sample; the result is a certified lower bound.
    Sample { count: u32, seed: u64 },
    /// Pairs (a, a^-1): cheap antipode heuristic, also a lower bound.
    AntipodalHeuristic,
}

impl PairStrategy {
    pub fn is_exact(&self) -> bool {
        matches!(self, PairStrategy::AllSpherePairs)
    }

    pub fn label(&self) -> String {
        match self {
            PairStrategy::AllSpherePairs => "all".to_string(),
            PairStrategy::Sample { count, seed } => alloc::format!("sample:{count}:{seed}"),
            PairStrategy::AntipodalHeuristic => "antipodal".to_string(),
        }
    }
}

/// Divergence parameters: the canonical paper choice is delta = 1/2,
/// gamma = 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceParams {
    pub delta: f64,
    pub gamma: f64,
    pub strategy: PairStrategy,
}

impl DivergenceParams {
    pub fn new(delta: f64, gamma: f64, strategy: PairStrategy) -> Result<Self, DivergenceError> {
        if !(delta > 0.0 && delta <= 0.5) {
            return Err(DivergenceError::BadParams("delta must be in (0, 1/2]".to_string()));
        }
        if gamma < 2.0 {
            return Err(DivergenceError::BadParams("gamma must be >= 2".to_string()));
        }
        Ok(DivergenceParams { delta, gamma, strategy })
    }

    pub fn canonical(strategy: PairStrategy) -> Self {
        DivergenceParams { delta: 0.5, gamma: 2.0, strategy }
    }
}

/// The measured value of one avoidant-path query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivValue {
    Finite(u32),
    Disconnected(DisconnectInfo),
}

impl DivValue {
    pub fn finite(&self) -> Option<u32> {
        match self {
            DivValue::Finite(v) => Some(*v),
            DivValue::Disconnected(_) => None,
        }
    }

    pub fn is_disconnected(&self) -> bool {
        matches!(self, DivValue::Disconnected(_))
    }

    /// Disconnected sorts above every finite value: it is a certified ">=
    /// cap" observation.
    fn sup_key(&self) -> (u8, u32) {
        match self {
            DivValue::Finite(v) => (0, *v),
            DivValue::Disconnected(_) => (1, 0),
        }
    }
}

/// One avoidant-path measurement between sphere points.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceRecord {
    pub r: u32,
    pub a: GroupElement,
    pub b: GroupElement,
    pub value: DivValue,
    pub delta: f64,
    pub gamma: f64,
    pub cap: u32,
    /// Filled by drivers that time the query; not part of the value.
    pub wall_time_ms: Option<f64>,
}

impl DivergenceRecord {
    /// Supremum-merge order: larger value wins, ties go to the
    /// lexicographically smaller witness pair. Total over distinct pairs,
    /// so merge results do not depend on arrival order.
    pub fn beats(&self, other: &DivergenceRecord) -> bool {
        let ka = self.value.sup_key();
        let kb = other.value.sup_key();
        ka > kb || (ka == kb && (&self.a, &self.b) < (&other.a, &other.b))
    }
}

/// div(a, b, center; delta, gamma): shortest avoidant-path length between
/// `a` and `b` outside the open ball of radius `delta * r - gamma` around
/// `center`, with `r = min(d(center, a), d(center, b))`.
pub fn div_pair(
    oracle: &DistanceOracle,
    a: &GroupElement,
    b: &GroupElement,
    center: &GroupElement,
    params: &DivergenceParams,
    cap: u32,
    budget: usize,
) -> Result<DivergenceRecord, DivergenceError> {
    let da = oracle
        .distance(center, a)?
        .exact()
        .ok_or(DivergenceError::UncertifiedRadius)?;
    let db = oracle
        .distance(center, b)?
        .exact()
        .ok_or(DivergenceError::UncertifiedRadius)?;
    let r = da.min(db);
    let avoid = params.delta * (r as f64) - params.gamma;
    let value = match avoidant_shortest_path(oracle, a, b, center, avoid, cap, budget)? {
        AvoidantOutcome::Path(p) => DivValue::Finite(p.len_edges() as u32),
        AvoidantOutcome::Disconnected(info) => DivValue::Disconnected(info),
    };
    Ok(DivergenceRecord {
        r,
        a: a.clone(),
        b: b.clone(),
        value,
        delta: params.delta,
        gamma: params.gamma,
        cap,
        wall_time_ms: None,
    })
}

/// Deterministic pair list for one sphere, per strategy. Pairs are index
/// pairs into `ball.sphere(r)`.
pub fn sphere_pairs(
    ball: &Ball,
    r: u32,
    strategy: &PairStrategy,
) -> Result<Vec<(usize, usize)>, DivergenceError> {
    let sphere = ball.sphere(r);
    let n = sphere.len();
    let mut pairs = Vec::new();
    match strategy {
        PairStrategy::AllSpherePairs => {
            let spec = ball.spec();
            let syms = spec.symmetries();
            if syms.is_empty() {
                for i in 0..n {
                    for j in (i + 1)..n {
                        pairs.push((i, j));
                    }
                }
            } else {
                // Fast path: precompute packed symmetry images once, then
                // canonicalize each pair with u64 comparisons only.
                let mut packed: Option<Vec<u64>> = Some(Vec::with_capacity(n * syms.len()));
                'pack: for v in sphere {
                    for sym in &syms {
                        match spec.packed_symmetry_image(sym, v) {
                            Some(key) => packed.as_mut().unwrap().push(key),
                            None => {
                                packed = None;
                                break 'pack;
                            }
                        }
                    }
                }
                if let Some(packed) = packed {
                    let k = syms.len();
                    let mut seen: HashSet<(u64, u64)> = HashSet::new();
                    for i in 0..n {
                        for j in (i + 1)..n {
                            let mut canon = (u64::MAX, u64::MAX);
                            for t in 0..k {
                                let x = packed[i * k + t];
                                let y = packed[j * k + t];
                                let key = if x <= y { (x, y) } else { (y, x) };
                                if key < canon {
                                    canon = key;
                                }
                            }
                            if seen.insert(canon) {
                                pairs.push((i, j));
                            }
                        }
                    }
                } else {
                    let mut seen: HashSet<(GroupElement, GroupElement)> = HashSet::new();
                    for i in 0..n {
                        for j in (i + 1)..n {
                            let mut canon: Option<(GroupElement, GroupElement)> = None;
                            for sym in &syms {
                                let x = spec.apply_symmetry(sym, &sphere[i]);
                                let y = spec.apply_symmetry(sym, &sphere[j]);
                                let key = if x <= y { (x, y) } else { (y, x) };
                                if canon.as_ref().map(|c| key < *c).unwrap_or(true) {
                                    canon = Some(key);
                                }
                            }
                            if seen.insert(canon.unwrap()) {
                                pairs.push((i, j));
                            }
                        }
                    }
                }
            }
        }
        PairStrategy::Sample { count, seed } => {
            if n >= 2 {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(
                    seed ^ (r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
                );
                let mut tries = 0u32;
                while pairs.len() < *count as usize && tries < count * 20 {
                    tries += 1;
                    let i = sample_below(&mut rng, n);
                    let j = sample_below(&mut rng, n);
                    if i != j {
                        pairs.push((i.min(j), i.max(j)));
                    }
                }
            }
        }
        PairStrategy::AntipodalHeuristic => {
            let spec = ball.spec();
            let mut seen: HashSet<(usize, usize)> = HashSet::new();
            for (i, a) in sphere.iter().enumerate() {
                let inv = spec.inverse(a)?;
                if inv == *a {
                    continue;
                }
                if let Some(j) = sphere.iter().position(|x| *x == inv) {
                    let key = (i.min(j), i.max(j));
                    if seen.insert(key) {
                        pairs.push(key);
                    }
                }
            }
        }
    }
    Ok(pairs)
}

fn sample_below(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> usize {
    // Rejection sampling keeps the draw unbiased.
    let n = n as u64;
    let zone = u64::MAX - (u64::MAX % n);
    loop {
        let v = rng.next_u64();
        if v < zone {
            return (v % n) as usize;
        }
    }
}

/// One radius of a divergence profile: the supremum record and whether the
/// strategy was exhaustive.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfilePoint {
    pub r: u32,
    pub best: DivergenceRecord,
    /// True when every sphere pair (up to symmetry) was measured.
    pub exact: bool,
}

/// A divergence profile over a list of radii.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub points: Vec<ProfilePoint>,
    pub params: DivergenceParams,
    pub cap: u32,
    /// Set when the ball budget ran out: the profile stops early.
    pub truncated: Option<String>,
}

impl Profile {
    pub fn values(&self) -> Vec<(u32, DivValue)> {
        self.points.iter().map(|p| (p.r, p.best.value)).collect()
    }
}

/// Measures the supremum divergence over sphere pairs for each radius.
///
/// Pair results within one radius are merged deterministically: maximum
/// value first, then lexicographically smallest witness pair.
pub fn divergence_profile(
    oracle: &DistanceOracle,
    radii: &[u32],
    params: &DivergenceParams,
    cap: u32,
    budget: usize,
) -> Result<Profile, DivergenceError> {
    let spec = oracle.spec();
    let max_r = radii.iter().copied().max().unwrap_or(0);
    let ball = match crate::ball::grow_ball(spec, max_r, budget) {
        Ok(b) => b,
        Err(BallError::BudgetExceeded { radius_reached }) => {
            // Partial profile from what fits.
            let ball = crate::ball::grow_ball(spec, radius_reached, budget)?;
            let reduced: Vec<u32> = radii.iter().copied().filter(|r| *r <= radius_reached).collect();
            let mut profile = divergence_profile_on(oracle, &ball, &reduced, params, cap, budget)?;
            profile.truncated =
                Some(alloc::format!("ball budget exhausted at radius {radius_reached}"));
            return Ok(profile);
        }
        Err(e) => return Err(e.into()),
    };
    divergence_profile_on(oracle, &ball, radii, params, cap, budget)
}

fn divergence_profile_on(
    oracle: &DistanceOracle,
    ball: &Ball,
    radii: &[u32],
    params: &DivergenceParams,
    cap: u32,
    budget: usize,
) -> Result<Profile, DivergenceError> {
    let center = oracle.spec().identity();
    let mut points = Vec::with_capacity(radii.len());
    for &r in radii {
        let sphere = ball.sphere(r);
        let pairs = sphere_pairs(ball, r, &params.strategy)?;
        let mut best: Option<DivergenceRecord> = None;
        for (i, j) in pairs {
            let rec = div_pair(oracle, &sphere[i], &sphere[j], &center, params, cap, budget)?;
            if best.as_ref().map(|cur| rec.beats(cur)).unwrap_or(true) {
                best = Some(rec);
            }
        }
        if let Some(best) = best {
            points.push(ProfilePoint { r, best, exact: params.strategy.is_exact() });
        }
    }
    Ok(Profile { points, params: *params, cap, truncated: None })
}

/// Desk-scale growth classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Linear,
    Superlinear,
    DisconnectedAtScale,
}

impl core::fmt::Display for Classification {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Classification::Linear => write!(f, "Linear"),
            Classification::Superlinear => write!(f, "Superlinear"),
            Classification::DisconnectedAtScale => write!(f, "DisconnectedAtScale"),
        }
    }
}

/// Fitted growth of a divergence profile.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthFit {
    /// Log-log least-squares slope; None when any record is disconnected.
    pub exponent: Option<f64>,
    /// max_r Div(r) / r over finite records.
    pub linear_constant: Option<f64>,
    pub classification: Classification,
    /// Thresholds used, for output metadata.
    pub exponent_threshold: f64,
    pub ratio_factor: f64,
}

/// Classifies growth from (radius, value) records.
///
/// Disconnected anywhere wins outright; otherwise Linear requires the fitted
/// exponent at most [`LINEAR_EXPONENT_MAX`] and the max of Div(r)/r at most
/// [`LINEAR_RATIO_FACTOR`] times its median.
pub fn fit_growth(records: &[(u32, DivValue)]) -> Result<GrowthFit, DivergenceError> {
    if records.iter().any(|(_, v)| v.is_disconnected()) {
        let finite: Vec<(u32, u32)> = records
            .iter()
            .filter_map(|(r, v)| v.finite().map(|d| (*r, d)))
            .collect();
        let linear_constant = finite
            .iter()
            .map(|(r, d)| *d as f64 / *r as f64)
            .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))));
        return Ok(GrowthFit {
            exponent: None,
            linear_constant,
            classification: Classification::DisconnectedAtScale,
            exponent_threshold: LINEAR_EXPONENT_MAX,
            ratio_factor: LINEAR_RATIO_FACTOR,
        });
    }
    let mut finite: Vec<(u32, u32)> = records
        .iter()
        .filter_map(|(r, v)| v.finite().map(|d| (*r, d)))
        .collect();
    finite.sort_unstable();
    finite.dedup_by_key(|(r, _)| *r);
    if finite.len() < 3 {
        return Err(DivergenceError::TooFewRecords { finite: finite.len() });
    }

    let logs: Vec<(f64, f64)> = finite
        .iter()
        .map(|(r, d)| (fmath::ln(*r as f64), fmath::ln((*d).max(1) as f64)))
        .collect();
    let n = logs.len() as f64;
    let mean_x = logs.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y = logs.iter().map(|(_, y)| y).sum::<f64>() / n;
    let num: f64 = logs.iter().map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let den: f64 = logs.iter().map(|(x, _)| (x - mean_x) * (x - mean_x)).sum();
    let exponent = num / den;

    let mut ratios: Vec<f64> = finite.iter().map(|(r, d)| *d as f64 / *r as f64).collect();
    ratios.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let max_ratio = *ratios.last().unwrap();
    let median = if ratios.len() % 2 == 1 {
        ratios[ratios.len() / 2]
    } else {
        (ratios[ratios.len() / 2 - 1] + ratios[ratios.len() / 2]) / 2.0
    };
    let classification = if exponent <= LINEAR_EXPONENT_MAX && max_ratio <= LINEAR_RATIO_FACTOR * median
    {
        Classification::Linear
    } else {
        Classification::Superlinear
    };
    Ok(GrowthFit {
        exponent: Some(exponent),
        linear_constant: Some(max_ratio),
        classification,
        exponent_threshold: LINEAR_EXPONENT_MAX,
        ratio_factor: LINEAR_RATIO_FACTOR,
    })
}
