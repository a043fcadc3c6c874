//! Quasi-geodesic surgery: nearest-point projection, verified path
//! shortening, and annulus concatenation.
//!
//! Each construction mirrors a surgery used by the redirecting pipeline and
//! is verified post hoc: projection outputs are checked against the 3q bound
//! by callers, shortening re-verifies the neighborhood containment it
//! promises, and the annulus concatenation measures the cross-pair ratio
//! against `(q1 + Q1 + C + delta - eps) / (delta - eps)`.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::fmath;
use crate::group::GroupError;
use crate::oracle::{Distance, DistanceOracle, OracleError};
use crate::path::{qg_constants, DiscretePath, PathError, QGReport};

#[derive(Debug, Clone, PartialEq)]
pub enum SurgeryError {
    /// shorten_path needs endpoints farther apart than `r`.
    EndpointsTooClose { dist: u32, r: f64 },
    /// Named annulus precondition failures.
    BaseNotIdentity,
    SphereMembership { expected: u32, actual: u32 },
    Containment { which: &'static str },
    RayMisses { which: &'static str },
    OuterBaseMismatch,
    LengthBudget { len: usize, budget: f64 },
    DeclaredConstantsFail { which: &'static str, measured: f64 },
    BadParams(String),
    Uncertified { i: usize, j: usize },
    Group(GroupError),
    Oracle(String),
    Path(String),
}

impl From<GroupError> for SurgeryError {
    fn from(e: GroupError) -> Self {
        SurgeryError::Group(e)
    }
}

impl From<OracleError> for SurgeryError {
    fn from(e: OracleError) -> Self {
        SurgeryError::Oracle(e.to_string())
    }
}

impl From<PathError> for SurgeryError {
    fn from(e: PathError) -> Self {
        match e {
            PathError::Uncertified { i, j } => SurgeryError::Uncertified { i, j },
            other => SurgeryError::Path(other.to_string()),
        }
    }
}

impl core::fmt::Display for SurgeryError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SurgeryError::EndpointsTooClose { dist, r } => {
                write!(f, "endpoints at distance {dist}, need > {r}")
            }
            SurgeryError::BaseNotIdentity => write!(f, "inner path must be based at the identity"),
            SurgeryError::SphereMembership { expected, actual } => {
                write!(f, "endpoint on sphere {actual}, expected {expected}")
            }
            SurgeryError::Containment { which } => write!(f, "containment violated: {which}"),
            SurgeryError::RayMisses { which } => write!(f, "ray misses required point: {which}"),
            SurgeryError::OuterBaseMismatch => write!(f, "outer path not based at p"),
            SurgeryError::LengthBudget { len, budget } => {
                write!(f, "length budget violated: {len} > {budget}")
            }
            SurgeryError::DeclaredConstantsFail { which, measured } => {
                write!(f, "declared quasi-geodesic constants fail for {which}: measured {measured}")
            }
            SurgeryError::BadParams(s) => write!(f, "bad parameters: {s}"),
            SurgeryError::Uncertified { i, j } => {
                write!(f, "uncertified distance between path vertices {i} and {j}")
            }
            SurgeryError::Group(e) => write!(f, "{e}"),
            SurgeryError::Oracle(e) => write!(f, "{e}"),
            SurgeryError::Path(e) => write!(f, "{e}"),
        }
    }
}

/// Which way the projection surgery walks along the target path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Concatenate [x, y] with [y, z] toward the path's start (the lemma's
    /// own orientation).
    TowardStart,
    /// Concatenate toward the path's end; the redirecting proof uses both.
    TowardEnd,
}

/// Index of the closest vertex of `path` to `x` (smallest index on ties).
pub fn closest_vertex(
    path: &DiscretePath,
    x: &crate::group::GroupElement,
    oracle: &DistanceOracle,
) -> Result<(usize, u32), SurgeryError> {
    let mut best: Option<(usize, u32)> = None;
    for (i, v) in path.iter().enumerate() {
        let d = match oracle.distance(x, v)? {
            Distance::Exact(d) => d,
            Distance::Uncertified => return Err(SurgeryError::Uncertified { i, j: i }),
        };
        if best.map(|(_, bd)| d < bd).unwrap_or(true) {
            best = Some((i, d));
        }
    }
    Ok(best.expect("path is nonempty"))
}

/// Nearest-point projection surgery: geodesic [x, y] to the closest vertex y
/// of `beta`, concatenated with the sub-path of `beta` from y toward its
/// start (or end). For a (q, Q)-quasi-geodesic `beta` the output is a
/// (3q, Q)-quasi-geodesic.
pub fn projection_surgery(
    x: &crate::group::GroupElement,
    beta: &DiscretePath,
    orientation: Orientation,
    oracle: &DistanceOracle,
) -> Result<DiscretePath, SurgeryError> {
    let (y_idx, _) = closest_vertex(beta, x, oracle)?;
    let tail = match orientation {
        Orientation::TowardStart => beta.subpath(y_idx, 0),
        Orientation::TowardEnd => beta.subpath(y_idx, beta.len_vertices() - 1),
    };
    let bridge = oracle.geodesic(x, beta.get(y_idx))?;
    Ok(bridge.concat(oracle.spec(), &tail)?)
}

/// Outcome of [`shorten_path`].
#[derive(Debug, Clone, PartialEq)]
pub struct ShortenOutcome {
    pub path: DiscretePath,
    /// Measured (L, 0) constant of the output.
    pub report: QGReport,
    /// The neighborhood radius rho * r the output was verified against.
    pub neighborhood: f64,
    /// False when the spacing was too small to operate and the input was
    /// returned unchanged.
    pub shortened: bool,
}

/// Verified path shortening: returns a path with the same endpoints, length
/// at most the input's, every vertex within `rho * r` of the input, and its
/// measured (L, 0) constants.
///
/// Construction: anchors at arc spacing floor(rho*r/2), inter-anchor
/// stretches replaced by geodesics, loop erasure, then exhaustive anchor
/// shortcutting (longest first) while the neighborhood constraint holds.
pub fn shorten_path(
    tau: &DiscretePath,
    rho: f64,
    r: f64,
    oracle: &DistanceOracle,
) -> Result<ShortenOutcome, SurgeryError> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(SurgeryError::BadParams("rho must be in (0, 1]".to_string()));
    }
    let spec = oracle.spec();
    let endpoint_dist = match oracle.distance(tau.first(), tau.last())? {
        Distance::Exact(d) => d,
        Distance::Uncertified => return Err(SurgeryError::Uncertified { i: 0, j: tau.len_edges() }),
    };
    if (endpoint_dist as f64) <= r {
        return Err(SurgeryError::EndpointsTooClose { dist: endpoint_dist, r });
    }
    let reach = rho * r;
    let spacing = fmath::floor_u32(reach / 2.0) as usize;
    if spacing == 0 {
        // Too tight to anchor: the input itself satisfies every
        // postcondition trivially.
        let report = qg_constants(tau, 0.0, oracle)?;
        return Ok(ShortenOutcome { path: tau.clone(), report, neighborhood: reach, shortened: false });
    }

    // Stage 1: anchor chain with geodesic chords. Every chord vertex stays
    // within spacing <= rho*r/2 of its anchor.
    let mut anchors: Vec<usize> = (0..tau.len_vertices()).step_by(spacing).collect();
    if *anchors.last().unwrap() != tau.len_vertices() - 1 {
        anchors.push(tau.len_vertices() - 1);
    }
    let mut sigma = DiscretePath::single(tau.first().clone());
    let mut anchor_pos: Vec<usize> = alloc::vec![0];
    for pair in anchors.windows(2) {
        let chord = oracle.geodesic(tau.get(pair[0]), tau.get(pair[1]))?;
        sigma = sigma.concat(spec, &chord)?;
        anchor_pos.push(sigma.len_vertices() - 1);
    }

    let sigma = erase_loops_tracking(sigma, &mut anchor_pos);
    let mut sigma = sigma;

    // Stage 2: shortcut between anchors, longest span first, while the
    // neighborhood constraint against the original input holds.
    loop {
        let mut improved = false;
        let mut i = 0;
        'outer: while i + 2 < anchor_pos.len() {
            for j in (i + 2..anchor_pos.len()).rev() {
                let from = anchor_pos[i];
                let to = anchor_pos[j];
                let chord = oracle.geodesic(sigma.get(from), sigma.get(to))?;
                if chord.len_edges() >= to - from {
                    continue;
                }
                if !within_neighborhood(&chord, tau, reach, oracle)? {
                    continue;
                }
                let mut vertices: Vec<crate::group::GroupElement> =
                    sigma.vertices()[..from].to_vec();
                vertices.extend_from_slice(chord.vertices());
                vertices.extend_from_slice(&sigma.vertices()[to + 1..]);
                let saved = (to - from) - chord.len_edges();
                let mut new_anchor_pos: Vec<usize> = Vec::with_capacity(anchor_pos.len());
                for &p in &anchor_pos[..=i] {
                    new_anchor_pos.push(p);
                }
                for &p in &anchor_pos[j..] {
                    new_anchor_pos.push(p - saved);
                }
                anchor_pos = new_anchor_pos;
                sigma = erase_loops_tracking(DiscretePath::from_trusted(vertices), &mut anchor_pos);
                improved = true;
                continue 'outer;
            }
            i += 1;
        }
        if !improved {
            break;
        }
    }

    if sigma.len_edges() > tau.len_edges() {
        // Cannot happen by construction; kept as a hard guard.
        return Err(SurgeryError::Containment { which: "length" });
    }
    if !within_neighborhood(&sigma, tau, reach, oracle)? {
        let report = qg_constants(tau, 0.0, oracle)?;
        return Ok(ShortenOutcome { path: tau.clone(), report, neighborhood: reach, shortened: false });
    }
    let report = qg_constants(&sigma, 0.0, oracle)?;
    Ok(ShortenOutcome { path: sigma, report, neighborhood: reach, shortened: true })
}

/// Loop-erases a path while remapping tracked positions onto the survivor.
fn erase_loops_tracking(path: DiscretePath, tracked: &mut Vec<usize>) -> DiscretePath {
    let erased = path.loop_erased();
    if erased.len_vertices() == path.len_vertices() {
        return erased;
    }
    // Tracked anchors that died inside a loop snap to the retained
    // occurrence of their vertex (positions only guide shortcutting, so any
    // consistent remap works; first occurrence keeps this deterministic).
    let mut remapped: Vec<usize> = Vec::with_capacity(tracked.len());
    for &pos in tracked.iter() {
        let v = path.get(pos);
        if let Some(idx) = erased.position(v) {
            remapped.push(idx);
        }
    }
    remapped.sort_unstable();
    remapped.dedup();
    *tracked = remapped;
    erased
}

fn within_neighborhood(
    candidate: &DiscretePath,
    reference: &DiscretePath,
    radius: f64,
    oracle: &DistanceOracle,
) -> Result<bool, SurgeryError> {
    for v in candidate.iter() {
        let mut ok = false;
        for w in reference.iter() {
            match oracle.distance(v, w)? {
                Distance::Exact(d) => {
                    if (d as f64) <= radius {
                        ok = true;
                        break;
                    }
                }
                Distance::Uncertified => continue,
            }
        }
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Parameters of the annulus concatenation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnulusParams {
    pub delta: f64,
    pub epsilon: f64,
    /// Outer-path length budget: l(gamma) <= c_budget * r.
    pub c_budget: f64,
    pub q1: f64,
    pub q_add1: f64,
    pub q2: f64,
    pub q_add2: f64,
}

impl AnnulusParams {
    pub fn validate(&self) -> Result<(), SurgeryError> {
        if !(self.delta > self.epsilon && self.epsilon > 0.0) {
            return Err(SurgeryError::BadParams("need delta > epsilon > 0".to_string()));
        }
        if self.c_budget <= 0.0 {
            return Err(SurgeryError::BadParams("need C > 0".to_string()));
        }
        if self.q1 < 1.0 || self.q2 < 1.0 || self.q_add1 < 0.0 || self.q_add2 < 0.0 {
            return Err(SurgeryError::BadParams("need q >= 1 and Q >= 0".to_string()));
        }
        Ok(())
    }

    /// The cross-pair ratio bound from the annulus argument.
    pub fn cross_ratio_bound(&self) -> f64 {
        (self.q1 + self.q_add1 + self.c_budget + self.delta - self.epsilon)
            / (self.delta - self.epsilon)
    }

    /// Guaranteed (M, M) constant for the concatenation.
    pub fn m_guarantee(&self) -> f64 {
        let m = (3.0 * self.q1).max(3.0 * self.q2).max(self.cross_ratio_bound());
        m.max(self.q_add1).max(self.q_add2)
    }
}

/// Outcome of [`annulus_surgery`].
#[derive(Debug, Clone, PartialEq)]
pub struct AnnulusOutcome {
    pub path: DiscretePath,
    /// Measured constants at Q = max(Q1, Q2).
    pub report: QGReport,
    /// Largest observed arc/distance ratio over pairs (x in alpha, y in
    /// gamma), and the bound it is checked against.
    pub cross_ratio: f64,
    pub cross_ratio_bound: f64,
    pub m_guarantee: f64,
}

/// Annulus concatenation `alpha ∪ [alpha_+, p]_zeta ∪ gamma`.
///
/// `alpha` runs from the identity to the sphere S(o, eps*r) and stays inside
/// that ball; `zeta` is a geodesic from the identity through alpha's
/// endpoint; `p` is where zeta first meets S(o, delta*r); `gamma` is based
/// at p, stays outside the open delta*r ball, and has length at most C*r.
/// Fractional sphere radii are floored; assertions carry that slack.
pub fn annulus_surgery(
    alpha: &DiscretePath,
    zeta: &DiscretePath,
    gamma: &DiscretePath,
    params: &AnnulusParams,
    r: f64,
    oracle: &DistanceOracle,
) -> Result<AnnulusOutcome, SurgeryError> {
    params.validate()?;
    if r <= 1.0 {
        return Err(SurgeryError::BadParams("need r > 1".to_string()));
    }
    let spec = oracle.spec();
    let norm_of = |v: &crate::group::GroupElement| -> Result<u32, SurgeryError> {
        match oracle.norm(v)? {
            Distance::Exact(d) => Ok(d),
            Distance::Uncertified => Err(SurgeryError::Uncertified { i: 0, j: 0 }),
        }
    };

    if !spec.is_identity(alpha.first()) {
        return Err(SurgeryError::BaseNotIdentity);
    }
    let eps_radius = fmath::floor_u32(params.epsilon * r);
    let alpha_end = norm_of(alpha.last())?;
    if alpha_end != eps_radius {
        return Err(SurgeryError::SphereMembership { expected: eps_radius, actual: alpha_end });
    }
    for v in alpha.iter() {
        if (norm_of(v)? as f64) > params.epsilon * r {
            return Err(SurgeryError::Containment { which: "alpha inside B(eps r)" });
        }
    }

    // zeta: geodesic from o through alpha_+.
    if !spec.is_identity(zeta.first()) {
        return Err(SurgeryError::RayMisses { which: "zeta based at o" });
    }
    for (i, v) in zeta.iter().enumerate() {
        if norm_of(v)? != i as u32 {
            return Err(SurgeryError::RayMisses { which: "zeta geodesic" });
        }
    }
    let plus_idx = eps_radius as usize;
    if zeta.len_vertices() <= plus_idx || zeta.get(plus_idx) != alpha.last() {
        return Err(SurgeryError::RayMisses { which: "zeta through alpha endpoint" });
    }
    let p_idx = zeta
        .iter()
        .position(|v| norm_of(v).map(|d| (d as f64) >= params.delta * r).unwrap_or(false))
        .ok_or(SurgeryError::RayMisses { which: "zeta reaches S(delta r)" })?;
    let p = zeta.get(p_idx);

    if gamma.first() != p {
        return Err(SurgeryError::OuterBaseMismatch);
    }
    for v in gamma.iter() {
        if (norm_of(v)? as f64) < params.delta * r {
            return Err(SurgeryError::Containment { which: "gamma outside open B(delta r)" });
        }
    }
    let budget = params.c_budget * r;
    if gamma.len_edges() as f64 > budget {
        return Err(SurgeryError::LengthBudget { len: gamma.len_edges(), budget });
    }

    // Declared quasi-geodesic constants are verified, not assumed.
    let alpha_measured = qg_constants(alpha, params.q_add1, oracle)?;
    if alpha_measured.q > params.q1 * (1.0 + 1e-12) {
        return Err(SurgeryError::DeclaredConstantsFail { which: "alpha", measured: alpha_measured.q });
    }
    let gamma_measured = qg_constants(gamma, params.q_add2, oracle)?;
    if gamma_measured.q > params.q2 * (1.0 + 1e-12) {
        return Err(SurgeryError::DeclaredConstantsFail { which: "gamma", measured: gamma_measured.q });
    }

    let middle = zeta.subpath(plus_idx, p_idx);
    let sigma = alpha.concat(spec, &middle)?.concat(spec, gamma)?;

    // Cross pairs: x in alpha against y in gamma. Positions in sigma:
    // alpha occupies [0, alpha_len], gamma starts at sigma_len - gamma_len.
    let alpha_len = alpha.len_edges();
    let gamma_start = sigma.len_edges() - gamma.len_edges();
    let mut cross_ratio = 0.0f64;
    for i in 0..=alpha_len {
        for j in gamma_start..sigma.len_vertices() {
            let d = match oracle.distance(sigma.get(i), sigma.get(j))? {
                Distance::Exact(d) => d as f64,
                Distance::Uncertified => return Err(SurgeryError::Uncertified { i, j }),
            };
            let ratio = if d == 0.0 { f64::INFINITY } else { (j - i) as f64 / d };
            if ratio > cross_ratio {
                cross_ratio = ratio;
            }
        }
    }

    let report = qg_constants(&sigma, params.q_add1.max(params.q_add2), oracle)?;
    Ok(AnnulusOutcome {
        path: sigma,
        report,
        cross_ratio,
        cross_ratio_bound: params.cross_ratio_bound(),
        m_guarantee: params.m_guarantee(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{parse_group_spec, GroupElement};
    use crate::path::check_qg;

    fn z2_oracle() -> DistanceOracle {
        DistanceOracle::closed_form(parse_group_spec("z^2").unwrap()).unwrap()
    }

    fn vec2(x: i64, y: i64) -> GroupElement {
        GroupElement::Vector(alloc::vec![x, y])
    }

    fn straight_x(from: i64, to: i64) -> Vec<GroupElement> {
        let step = if to >= from { 1 } else { -1 };
        let mut v = Vec::new();
        let mut x = from;
        loop {
            v.push(vec2(x, 0));
            if x == to {
                break;
            }
            x += step;
        }
        v
    }

    #[test]
    fn projection_surgery_spec_example() {
        let o = z2_oracle();
        let spec = o.spec().clone();
        // beta: geodesic from (5,0) to (-5,0); x = (0,5).
        let beta = DiscretePath::new(&spec, straight_x(5, -5)).unwrap();
        let x = vec2(0, 5);
        let out = projection_surgery(&x, &beta, Orientation::TowardStart, &o).unwrap();
        // y = origin (closest, smallest index on the tie-free minimum),
        // output runs x -> y -> z=(5,0) with length 10.
        assert_eq!(out.first(), &x);
        assert_eq!(out.last(), &vec2(5, 0));
        assert_eq!(out.len_edges(), 10);
        assert!(check_qg(&out, 3.0, 0.0, &o).unwrap().passed());
    }

    #[test]
    fn projection_with_x_on_beta_is_a_subpath() {
        let o = z2_oracle();
        let spec = o.spec().clone();
        let beta = DiscretePath::new(&spec, straight_x(3, -3)).unwrap();
        let x = vec2(1, 0);
        let out = projection_surgery(&x, &beta, Orientation::TowardStart, &o).unwrap();
        assert_eq!(out.first(), &x);
        assert_eq!(out.last(), &vec2(3, 0));
        assert_eq!(out.len_edges(), 2);
        let out_end = projection_surgery(&x, &beta, Orientation::TowardEnd, &o).unwrap();
        assert_eq!(out_end.last(), &vec2(-3, 0));
        assert_eq!(out_end.len_edges(), 4);
    }

    #[test]
    fn projection_in_the_tree() {
        let s = parse_group_spec("free:2").unwrap();
        let o = DistanceOracle::closed_form(s.clone()).unwrap();
        // beta: geodesic from b^-3 to b^3; x = aab.
        let mut vs = Vec::new();
        for i in (-3i64..=3).rev() {
            let letters: Vec<i8> = if i >= 0 {
                alloc::vec![2; i as usize]
            } else {
                alloc::vec![-2; (-i) as usize]
            };
            vs.push(GroupElement::Word(letters));
        }
        vs.reverse();
        let beta = DiscretePath::new(&s, vs).unwrap();
        let x = GroupElement::Word(alloc::vec![1, 1, 2]);
        let out = projection_surgery(&x, &beta, Orientation::TowardStart, &o).unwrap();
        assert!(check_qg(&out, 3.0, 0.0, &o).unwrap().passed());
    }

    #[test]
    fn shorten_fixed_point_on_geodesics() {
        let o = z2_oracle();
        let spec = o.spec().clone();
        let tau = DiscretePath::new(&spec, straight_x(0, 9)).unwrap();
        let out = shorten_path(&tau, 0.5, 6.0, &o).unwrap();
        assert_eq!(out.path.len_edges(), 9);
        assert_eq!(out.report.q, 1.0);
        assert_eq!(out.path.first(), tau.first());
        assert_eq!(out.path.last(), tau.last());
    }

    #[test]
    fn shorten_staircase_with_detours() {
        let o = z2_oracle();
        let spec = o.spec().clone();
        // A wiggly path from (6,0) to (0,6) of length 24: each of the six
        // staircase blocks wastes two moves on an up-down detour.
        let mut vs = alloc::vec![vec2(6, 0)];
        let mut moves: Vec<(i64, i64)> = Vec::new();
        for _ in 0..6 {
            moves.extend_from_slice(&[(-1, 0), (0, 1), (0, 1), (0, -1)]);
        }
        for (dx, dy) in moves {
            let last = match vs.last().unwrap() {
                GroupElement::Vector(v) => (v[0], v[1]),
                _ => unreachable!(),
            };
            vs.push(vec2(last.0 + dx, last.1 + dy));
        }
        assert_eq!(vs.last(), Some(&vec2(0, 6)));
        let tau = DiscretePath::new(&spec, vs).unwrap();
        let out = shorten_path(&tau, 0.5, 6.0, &o).unwrap();
        assert!(out.path.len_edges() <= tau.len_edges());
        assert_eq!(out.path.first(), tau.first());
        assert_eq!(out.path.last(), tau.last());
        assert!(out.report.q.is_finite());
        assert!(within_neighborhood(&out.path, &tau, 3.0, &o).unwrap());
    }

    #[test]
    fn shorten_requires_separated_endpoints() {
        let o = z2_oracle();
        let spec = o.spec().clone();
        let tau = DiscretePath::new(&spec, straight_x(0, 4)).unwrap();
        assert!(matches!(
            shorten_path(&tau, 0.5, 6.0, &o),
            Err(SurgeryError::EndpointsTooClose { dist: 4, .. })
        ));
    }

    #[test]
    fn annulus_cross_ratio_bound_value() {
        // Standard run: (1 + 0 + 3 + 1/2 - 1/4) / (1/2 - 1/4) = 17.
        let params = AnnulusParams {
            delta: 0.5,
            epsilon: 0.25,
            c_budget: 3.0,
            q1: 1.0,
            q_add1: 0.0,
            q2: 1.0,
            q_add2: 0.0,
        };
        assert!((params.cross_ratio_bound() - 17.0).abs() < 1e-12);
    }

    #[test]
    fn annulus_surgery_straight_instance() {
        let o = z2_oracle();
        let spec = o.spec().clone();
        let r = 24.0;
        // alpha: geodesic to (6,0) (eps = 1/4); zeta: x-axis ray; gamma:
        // diamond walk from (12,0) staying on the sphere of radius 12.
        let alpha = DiscretePath::new(&spec, straight_x(0, 6)).unwrap();
        let zeta = DiscretePath::new(&spec, straight_x(0, 14)).unwrap();
        let mut gvs = alloc::vec![vec2(12, 0)];
        for i in 0..6 {
            let (x, y) = match gvs.last().unwrap() {
                GroupElement::Vector(v) => (v[0], v[1]),
                _ => unreachable!(),
            };
            if i % 2 == 0 {
                gvs.push(vec2(x, y + 1));
            } else {
                gvs.push(vec2(x - 1, y));
            }
        }
        let gamma = DiscretePath::new(&spec, gvs).unwrap();
        let params = AnnulusParams {
            delta: 0.5,
            epsilon: 0.25,
            c_budget: 3.0,
            q1: 1.0,
            q_add1: 0.0,
            q2: 2.0,
            q_add2: 0.0,
        };
        let out = annulus_surgery(&alpha, &zeta, &gamma, &params, r, &o).unwrap();
        assert!(out.cross_ratio <= out.cross_ratio_bound);
        assert!(out.report.q.is_finite());
        assert_eq!(out.path.first(), &spec.identity());
        assert_eq!(out.path.last(), gamma.last());
    }

    #[test]
    fn annulus_degenerate_outer_path() {
        let o = z2_oracle();
        let spec = o.spec().clone();
        let r = 24.0;
        let alpha = DiscretePath::new(&spec, straight_x(0, 6)).unwrap();
        let zeta = DiscretePath::new(&spec, straight_x(0, 13)).unwrap();
        let gamma = DiscretePath::single(vec2(12, 0));
        let params = AnnulusParams {
            delta: 0.5,
            epsilon: 0.25,
            c_budget: 3.0,
            q1: 1.0,
            q_add1: 0.0,
            q2: 1.0,
            q_add2: 0.0,
        };
        let out = annulus_surgery(&alpha, &zeta, &gamma, &params, r, &o).unwrap();
        // Reduces to alpha + [alpha_+, p]: the 2.6-style bound (3 q1, Q1).
        assert!(check_qg(&out.path, 3.0, 0.0, &o).unwrap().passed());
    }

    #[test]
    fn annulus_rejects_bad_instances() {
        let o = z2_oracle();
        let spec = o.spec().clone();
        let r = 24.0;
        let alpha = DiscretePath::new(&spec, straight_x(0, 6)).unwrap();
        let zeta = DiscretePath::new(&spec, straight_x(0, 14)).unwrap();
        let params = AnnulusParams {
            delta: 0.5,
            epsilon: 0.25,
            c_budget: 3.0,
            q1: 1.0,
            q_add1: 0.0,
            q2: 1.0,
            q_add2: 0.0,
        };
        // Outer path dipping inside the delta sphere.
        let bad_gamma = DiscretePath::new(&spec, straight_x(12, 10)).unwrap();
        assert!(matches!(
            annulus_surgery(&alpha, &zeta, &bad_gamma, &params, r, &o),
            Err(SurgeryError::Containment { .. })
        ));
        // Outer path based at the wrong point.
        let off_gamma = DiscretePath::new(&spec, alloc::vec![vec2(13, 0), vec2(13, 1)]).unwrap();
        assert!(matches!(
            annulus_surgery(&alpha, &zeta, &off_gamma, &params, r, &o),
            Err(SurgeryError::OuterBaseMismatch)
        ));
        // Length budget.
        let mut long = alloc::vec![vec2(12, 0)];
        for i in 1..=80i64 {
            long.push(vec2(12, i));
        }
        let long_gamma = DiscretePath::new(&spec, long).unwrap();
        assert!(matches!(
            annulus_surgery(&alpha, &zeta, &long_gamma, &params, r, &o),
            Err(SurgeryError::LengthBudget { .. })
        ));
        // Alpha not ending on the eps sphere.
        let short_alpha = DiscretePath::new(&spec, straight_x(0, 5)).unwrap();
        assert!(matches!(
            annulus_surgery(&short_alpha, &zeta, &DiscretePath::single(vec2(12, 0)), &params, r, &o),
            Err(SurgeryError::SphereMembership { expected: 6, actual: 5 })
        ));
    }
}
