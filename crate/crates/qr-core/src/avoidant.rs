//! Shortest paths avoiding an open ball: breadth-first search on the
//! punctured Cayley graph.
//!
//! A vertex v is admissible when d(center, v) >= avoid_radius; the open ball
//! {d < avoid_radius} is excluded strictly. The search is a bidirectional
//! level-synchronized BFS over admissible vertices, so exponential-growth
//! families stay tractable. `cap` bounds both the path length and the
//! exploration region. Free groups take a tree fast path: every a-b walk in
//! a tree visits every vertex of the unique geodesic, so admissibility of
//! the geodesic decides the query outright.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use hashbrown::HashMap;

use crate::ball::{grow_ball, Ball, BallError};
use crate::fmath;
use crate::group::{Family, GroupElement, GroupError, GroupSpec};
use crate::oracle::{Distance, DistanceOracle, OracleError, OracleMode};
use crate::path::DiscretePath;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AvoidantError {
    /// An endpoint sits inside the forbidden open ball.
    EndpointExcluded { which: &'static str, dist: u32 },
    /// An endpoint's distance to the center could not be certified.
    UncertifiedEndpoint,
    Group(GroupError),
    Oracle(String),
    Ball(String),
}

impl From<GroupError> for AvoidantError {
    fn from(e: GroupError) -> Self {
        AvoidantError::Group(e)
    }
}

impl From<OracleError> for AvoidantError {
    fn from(e: OracleError) -> Self {
        AvoidantError::Oracle(e.to_string())
    }
}

impl From<BallError> for AvoidantError {
    fn from(e: BallError) -> Self {
        AvoidantError::Ball(e.to_string())
    }
}

impl core::fmt::Display for AvoidantError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            AvoidantError::EndpointExcluded { which, dist } => {
                write!(f, "endpoint {which} lies inside the forbidden open ball (distance {dist})")
            }
            AvoidantError::UncertifiedEndpoint => {
                write!(f, "endpoint distance to center uncertified under oracle cap")
            }
            AvoidantError::Group(e) => write!(f, "{e}"),
            AvoidantError::Oracle(e) => write!(f, "{e}"),
            AvoidantError::Ball(e) => write!(f, "{e}"),
        }
    }
}

/// Why no avoidant path was returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DisconnectInfo {
    /// The length/exploration cap in force.
    pub cap: u32,
    /// True when the admissible component of `a` was exhausted inside the
    /// cap: provably separated there. False when a length or vertex budget
    /// ran out first.
    pub proven: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AvoidantOutcome {
    Path(DiscretePath),
    Disconnected(DisconnectInfo),
}

impl AvoidantOutcome {
    pub fn path(&self) -> Option<&DiscretePath> {
        match self {
            AvoidantOutcome::Path(p) => Some(p),
            AvoidantOutcome::Disconnected(_) => None,
        }
    }
}

/// Admissibility test for one query: strict exclusion of the open ball
/// around `center`, plus the region bound d(center, .) <= cap when it can be
/// tested exactly.
struct Region<'a> {
    spec: &'a GroupSpec,
    center_inv: GroupElement,
    avoid_radius: f64,
    cap: u32,
    oracle: &'a DistanceOracle,
    /// Small ball certifying the exclusion test for families without a
    /// closed form.
    exclusion_ball: Option<Ball>,
    /// Whether the upper bound d(center, .) <= cap is enforced exactly.
    exact_upper: bool,
}

impl<'a> Region<'a> {
    fn new(
        oracle: &'a DistanceOracle,
        center: &GroupElement,
        avoid_radius: f64,
        cap: u32,
        budget: usize,
    ) -> Result<Region<'a>, AvoidantError> {
        let spec = oracle.spec();
        let closed = oracle.mode() == OracleMode::ClosedForm;
        let ball_covers_cap = matches!(oracle.mode(), OracleMode::BallLookup) && oracle.cap() >= cap;
        let exclusion_ball = if avoid_radius > 0.0 && !closed {
            let covered = matches!(oracle.mode(), OracleMode::BallLookup)
                && (oracle.cap() as f64) >= avoid_radius - 1.0;
            if covered {
                None
            } else {
                let r_ex = fmath::ceil_u32(avoid_radius).saturating_sub(1);
                Some(grow_ball(spec, r_ex, budget)?)
            }
        } else {
            None
        };
        Ok(Region {
            spec,
            center_inv: spec.inverse(center)?,
            avoid_radius,
            cap,
            oracle,
            exclusion_ball,
            exact_upper: closed || ball_covers_cap,
        })
    }

    fn admissible(&self, v: &GroupElement) -> Result<bool, AvoidantError> {
        if self.avoid_radius <= 0.0 && !self.exact_upper {
            return Ok(true);
        }
        let u = self.spec.multiply(&self.center_inv, v)?;
        if let Some(excl) = &self.exclusion_ball {
            if self.avoid_radius > 0.0 && excl.contains(&u) {
                return Ok(false);
            }
            return Ok(true);
        }
        match self.oracle.norm(&u)? {
            Distance::Exact(d) => {
                if (d as f64) < self.avoid_radius {
                    return Ok(false);
                }
                if self.exact_upper && d > self.cap {
                    return Ok(false);
                }
                Ok(true)
            }
            // Outside the oracle's ball: farther than its radius, hence
            // never inside the excluded open ball; beyond cap when the ball
            // covers the cap.
            Distance::Uncertified => Ok(!self.exact_upper),
        }
    }
}

/// Shortest unit-step path from `a` to `b` all of whose vertices satisfy
/// d(center, .) >= avoid_radius, restricted to the cap region; or a
/// [`DisconnectInfo`] lower-bound report.
pub fn avoidant_shortest_path(
    oracle: &DistanceOracle,
    a: &GroupElement,
    b: &GroupElement,
    center: &GroupElement,
    avoid_radius: f64,
    cap: u32,
    budget: usize,
) -> Result<AvoidantOutcome, AvoidantError> {
    let spec = oracle.spec();
    let da = endpoint_dist(oracle, center, a)?;
    let db = endpoint_dist(oracle, center, b)?;
    if (da as f64) < avoid_radius {
        return Err(AvoidantError::EndpointExcluded { which: "a", dist: da });
    }
    if (db as f64) < avoid_radius {
        return Err(AvoidantError::EndpointExcluded { which: "b", dist: db });
    }
    if a == b {
        return Ok(AvoidantOutcome::Path(DiscretePath::single(a.clone())));
    }

    if matches!(spec.family(), Family::Free(_)) && da <= cap && db <= cap {
        return tree_fast_path(oracle, a, b, center, avoid_radius, cap);
    }

    let region = Region::new(oracle, center, avoid_radius, cap, budget)?;
    punctured_bidirectional_bfs(spec, &region, a, b, cap, budget)
}

fn endpoint_dist(
    oracle: &DistanceOracle,
    center: &GroupElement,
    v: &GroupElement,
) -> Result<u32, AvoidantError> {
    let d = if oracle.spec().is_identity(center) {
        oracle.norm(v)?
    } else {
        oracle.distance(center, v)?
    };
    match d {
        Distance::Exact(d) => Ok(d),
        Distance::Uncertified => Err(AvoidantError::UncertifiedEndpoint),
    }
}

/// In a tree the unique geodesic is contained in every a-b walk, so the
/// query is decided by the closest approach of that geodesic to the center,
/// which is the Gromov product (d(c,a) + d(c,b) - d(a,b)) / 2. The geodesic
/// is materialized only for connected queries.
fn tree_fast_path(
    oracle: &DistanceOracle,
    a: &GroupElement,
    b: &GroupElement,
    center: &GroupElement,
    avoid_radius: f64,
    cap: u32,
) -> Result<AvoidantOutcome, AvoidantError> {
    let da = endpoint_dist(oracle, center, a)? as u64;
    let db = endpoint_dist(oracle, center, b)? as u64;
    let dab = match oracle.distance(a, b)? {
        Distance::Exact(d) => d as u64,
        Distance::Uncertified => return Err(AvoidantError::UncertifiedEndpoint),
    };
    if dab > cap as u64 {
        return Ok(AvoidantOutcome::Disconnected(DisconnectInfo { cap, proven: true }));
    }
    let closest_approach = (da + db - dab) / 2;
    if (closest_approach as f64) < avoid_radius {
        return Ok(AvoidantOutcome::Disconnected(DisconnectInfo { cap, proven: true }));
    }
    Ok(AvoidantOutcome::Path(oracle.geodesic(a, b)?))
}

fn punctured_bidirectional_bfs(
    spec: &GroupSpec,
    region: &Region<'_>,
    a: &GroupElement,
    b: &GroupElement,
    cap: u32,
    budget: usize,
) -> Result<AvoidantOutcome, AvoidantError> {
    type Info = (u32, Option<GroupElement>);
    let mut fwd: HashMap<GroupElement, Info> = HashMap::new();
    let mut bwd: HashMap<GroupElement, Info> = HashMap::new();
    fwd.insert(a.clone(), (0, None));
    bwd.insert(b.clone(), (0, None));
    let mut f_front = alloc::vec![a.clone()];
    let mut b_front = alloc::vec![b.clone()];
    let mut lf = 0u32;
    let mut lb = 0u32;
    let mut best: Option<(u32, GroupElement)> = None;

    loop {
        if let Some((d, meet)) = &best {
            if *d <= lf + lb {
                if *d > cap {
                    return Ok(AvoidantOutcome::Disconnected(DisconnectInfo { cap, proven: false }));
                }
                let path = reconstruct(meet, &fwd, &bwd);
                return Ok(AvoidantOutcome::Path(path));
            }
        }
        if lf + lb >= cap {
            return Ok(AvoidantOutcome::Disconnected(DisconnectInfo { cap, proven: false }));
        }
        if f_front.is_empty() || b_front.is_empty() {
            return Ok(AvoidantOutcome::Disconnected(DisconnectInfo { cap, proven: true }));
        }
        if fwd.len() + bwd.len() > budget {
            return Ok(AvoidantOutcome::Disconnected(DisconnectInfo { cap, proven: false }));
        }
        let expand_fwd = f_front.len() <= b_front.len();
        let (this, other, front, level) = if expand_fwd {
            (&mut fwd, &bwd, &mut f_front, &mut lf)
        } else {
            (&mut bwd, &fwd, &mut b_front, &mut lb)
        };
        let mut next = Vec::new();
        for v in front.iter() {
            for n in spec.neighbors(v)? {
                if this.contains_key(&n) {
                    continue;
                }
                if !region.admissible(&n)? {
                    continue;
                }
                this.insert(n.clone(), (*level + 1, Some(v.clone())));
                if let Some(&(od, _)) = other.get(&n) {
                    let total = *level + 1 + od;
                    if best.as_ref().map(|(cur, _)| total < *cur).unwrap_or(true) {
                        best = Some((total, n.clone()));
                    }
                }
                next.push(n);
            }
        }
        *front = next;
        *level += 1;
    }
}

fn reconstruct(
    meet: &GroupElement,
    fwd: &HashMap<GroupElement, (u32, Option<GroupElement>)>,
    bwd: &HashMap<GroupElement, (u32, Option<GroupElement>)>,
) -> DiscretePath {
    let mut vertices = Vec::new();
    let mut cur = meet.clone();
    loop {
        vertices.push(cur.clone());
        match fwd.get(&cur).and_then(|(_, p)| p.clone()) {
            Some(p) => cur = p,
            None => break,
        }
    }
    vertices.reverse();
    let mut cur = meet.clone();
    while let Some(p) = bwd.get(&cur).and_then(|(_, p)| p.clone()) {
        vertices.push(p.clone());
        cur = p;
    }
    DiscretePath::from_trusted(vertices)
}
