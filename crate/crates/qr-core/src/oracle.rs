//! Exact distance oracles over a group spec.
//!
//! Three interchangeable modes, which agree wherever more than one applies:
//!
//! * `ClosedForm` - l^1 for free abelian groups, reduced word length for
//!   free groups, factor sums for products of these; unlimited cap.
//! * `BallLookup` - d(x, y) = dist(x^-1 y) looked up in a precomputed ball;
//!   cap is the ball radius.
//! * `BidirectionalSearch` - level-synchronized breadth-first search from
//!   both endpoints on the implicit Cayley graph; cap bounds the certified
//!   distance.
//!
//! All modes can also produce an explicit geodesic between two elements.

use alloc::string::ToString;
use alloc::vec::Vec;
use hashbrown::HashMap;

use crate::ball::{grow_ball, Ball, BallError};
use crate::group::{Family, GroupElement, GroupError, GroupSpec};
use crate::path::DiscretePath;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleError {
    /// The family has no closed-form word metric.
    NoClosedForm,
    /// A distance or geodesic was requested beyond the certification cap.
    BeyondCap,
    /// Word-metric value does not fit the distance type.
    DistanceOverflow,
    Group(GroupError),
    Ball(alloc::string::String),
}

impl From<GroupError> for OracleError {
    fn from(e: GroupError) -> Self {
        OracleError::Group(e)
    }
}

impl From<BallError> for OracleError {
    fn from(e: BallError) -> Self {
        OracleError::Ball(e.to_string())
    }
}

impl core::fmt::Display for OracleError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            OracleError::NoClosedForm => write!(f, "family has no closed-form word metric"),
            OracleError::BeyondCap => write!(f, "request exceeds oracle certification cap"),
            OracleError::DistanceOverflow => write!(f, "distance exceeds representable range"),
            OracleError::Group(e) => write!(f, "{e}"),
            OracleError::Ball(e) => write!(f, "{e}"),
        }
    }
}

/// A certified distance value, or the admission that the cap was hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distance {
    Exact(u32),
    Uncertified,
}

impl Distance {
    pub fn exact(self) -> Option<u32> {
        match self {
            Distance::Exact(d) => Some(d),
            Distance::Uncertified => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    ClosedForm,
    BallLookup,
    BidirectionalSearch,
}

/// An exact distance oracle with a certification cap.
#[derive(Debug, Clone)]
pub struct DistanceOracle {
    spec: GroupSpec,
    mode: OracleMode,
    cap: u32,
    ball: Option<Ball>,
    /// Vertex budget for bidirectional searches.
    search_budget: usize,
}

/// Whether the family's word metric has a closed form.
pub fn has_closed_form(spec: &GroupSpec) -> bool {
    match spec.family() {
        Family::FreeAbelian(_) | Family::Free(_) => true,
        Family::DirectProduct(l, r) | Family::FreeProduct(l, r) => {
            has_closed_form(l) && has_closed_form(r)
        }
        _ => false,
    }
}

/// Word norm |g| for closed-form families.
fn closed_form_norm(spec: &GroupSpec, g: &GroupElement) -> Result<u64, OracleError> {
    match (spec.family(), g) {
        (Family::FreeAbelian(_), GroupElement::Vector(v)) => {
            Ok(v.iter().map(|c| c.unsigned_abs()).sum())
        }
        (Family::Free(_), GroupElement::Word(w)) => Ok(w.len() as u64),
        (Family::DirectProduct(l, r), GroupElement::Pair(a, b)) => {
            Ok(closed_form_norm(l, a)? + closed_form_norm(r, b)?)
        }
        (Family::FreeProduct(l, r), GroupElement::Alternating(w)) => {
            let mut total = 0u64;
            for letter in w {
                let factor = match letter.side {
                    crate::group::Side::Left => l,
                    crate::group::Side::Right => r,
                };
                total += closed_form_norm(factor, &letter.elem)?;
            }
            Ok(total)
        }
        _ => Err(OracleError::NoClosedForm),
    }
}

/// A minimal generator word spelling `g`, for closed-form families. The
/// route is canonical: axis order for vectors, letter order for words,
/// left factor before right factor for products.
fn closed_form_word(spec: &GroupSpec, g: &GroupElement, out: &mut Vec<usize>) -> Result<(), OracleError> {
    match (spec.family(), g) {
        (Family::FreeAbelian(_), GroupElement::Vector(v)) => {
            for (axis, &c) in v.iter().enumerate() {
                let gen = if c >= 0 { 2 * axis } else { 2 * axis + 1 };
                for _ in 0..c.unsigned_abs() {
                    out.push(gen);
                }
            }
            Ok(())
        }
        (Family::Free(_), GroupElement::Word(w)) => {
            for &letter in w {
                let axis = (letter.unsigned_abs() - 1) as usize;
                out.push(if letter > 0 { 2 * axis } else { 2 * axis + 1 });
            }
            Ok(())
        }
        (Family::DirectProduct(l, r), GroupElement::Pair(a, b)) => {
            closed_form_word(l, a, out)?;
            let mid = out.len();
            closed_form_word(r, b, out)?;
            // Right-factor generators sit after the left factor's in the
            // product's generator list.
            let offset = l.generator_count();
            for slot in out.iter_mut().skip(mid) {
                *slot += offset;
            }
            Ok(())
        }
        (Family::FreeProduct(l, r), GroupElement::Alternating(w)) => {
            for letter in w {
                let mid = out.len();
                match letter.side {
                    crate::group::Side::Left => closed_form_word(l, &letter.elem, out)?,
                    crate::group::Side::Right => {
                        closed_form_word(r, &letter.elem, out)?;
                        let offset = l.generator_count();
                        for slot in out.iter_mut().skip(mid) {
                            *slot += offset;
                        }
                    }
                }
            }
            Ok(())
        }
        _ => Err(OracleError::NoClosedForm),
    }
}

impl DistanceOracle {
    /// Closed-form oracle; errors for families without one.
    pub fn closed_form(spec: GroupSpec) -> Result<DistanceOracle, OracleError> {
        if !has_closed_form(&spec) {
            return Err(OracleError::NoClosedForm);
        }
        Ok(DistanceOracle {
            spec,
            mode: OracleMode::ClosedForm,
            cap: u32::MAX,
            ball: None,
            search_budget: crate::ball::DEFAULT_VERTEX_BUDGET,
        })
    }

    /// Lookup oracle over a precomputed ball; cap is the ball radius.
    pub fn ball_lookup(ball: Ball) -> DistanceOracle {
        DistanceOracle {
            spec: ball.spec().clone(),
            cap: ball.radius(),
            mode: OracleMode::BallLookup,
            ball: Some(ball),
            search_budget: crate::ball::DEFAULT_VERTEX_BUDGET,
        }
    }

    /// Grows a ball of the given radius and wraps it.
    pub fn grown(spec: &GroupSpec, radius: u32, budget: usize) -> Result<DistanceOracle, OracleError> {
        Ok(DistanceOracle::ball_lookup(grow_ball(spec, radius, budget)?))
    }

    /// Bidirectional-search oracle certifying distances up to `cap`.
    pub fn bidirectional(spec: GroupSpec, cap: u32, search_budget: usize) -> DistanceOracle {
        DistanceOracle { spec, mode: OracleMode::BidirectionalSearch, cap, ball: None, search_budget }
    }

    /// The most capable oracle for a spec: closed form when available,
    /// otherwise a ball of the given radius.
    pub fn best_for(spec: &GroupSpec, radius: u32, budget: usize) -> Result<DistanceOracle, OracleError> {
        if has_closed_form(spec) {
            DistanceOracle::closed_form(spec.clone())
        } else {
            DistanceOracle::grown(spec, radius, budget)
        }
    }

    pub fn spec(&self) -> &GroupSpec {
        &self.spec
    }

    pub fn mode(&self) -> OracleMode {
        self.mode
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    pub fn ball(&self) -> Option<&Ball> {
        self.ball.as_ref()
    }

    /// Exact d(x, y), or `Uncertified` past the cap.
    pub fn distance(&self, x: &GroupElement, y: &GroupElement) -> Result<Distance, OracleError> {
        match self.mode {
            OracleMode::ClosedForm => {
                let u = self.spec.multiply(&self.spec.inverse(x)?, y)?;
                let norm = closed_form_norm(&self.spec, &u)?;
                let d = u32::try_from(norm).map_err(|_| OracleError::DistanceOverflow)?;
                Ok(Distance::Exact(d))
            }
            OracleMode::BallLookup => {
                let u = self.spec.multiply(&self.spec.inverse(x)?, y)?;
                match self.ball.as_ref().unwrap().dist_of(&u) {
                    Some(d) => Ok(Distance::Exact(d)),
                    None => Ok(Distance::Uncertified),
                }
            }
            OracleMode::BidirectionalSearch => {
                match self.bidi_search(x, y)? {
                    Some((d, _, _, _)) => Ok(Distance::Exact(d)),
                    None => Ok(Distance::Uncertified),
                }
            }
        }
    }

    /// Distance from the identity.
    pub fn norm(&self, x: &GroupElement) -> Result<Distance, OracleError> {
        match self.mode {
            OracleMode::ClosedForm => {
                let norm = closed_form_norm(&self.spec, x)?;
                let d = u32::try_from(norm).map_err(|_| OracleError::DistanceOverflow)?;
                Ok(Distance::Exact(d))
            }
            OracleMode::BallLookup => match self.ball.as_ref().unwrap().dist_of(x) {
                Some(d) => Ok(Distance::Exact(d)),
                None => Ok(Distance::Uncertified),
            },
            OracleMode::BidirectionalSearch => self.distance(&self.spec.identity(), x),
        }
    }

    /// An explicit geodesic from x to y. Deterministic per mode: canonical
    /// word route for closed form, translated parent links for ball lookup,
    /// meet-in-the-middle parents for bidirectional search.
    pub fn geodesic(&self, x: &GroupElement, y: &GroupElement) -> Result<DiscretePath, OracleError> {
        match self.mode {
            OracleMode::ClosedForm => {
                let u = self.spec.multiply(&self.spec.inverse(x)?, y)?;
                let mut word = Vec::new();
                closed_form_word(&self.spec, &u, &mut word)?;
                let mut vertices = Vec::with_capacity(word.len() + 1);
                vertices.push(x.clone());
                let mut cur = x.clone();
                for gen in word {
                    cur = self.spec.multiply(&cur, self.spec.generator_elem(gen))?;
                    vertices.push(cur.clone());
                }
                Ok(DiscretePath::from_trusted(vertices))
            }
            OracleMode::BallLookup => {
                let u = self.spec.multiply(&self.spec.inverse(x)?, y)?;
                let ball = self.ball.as_ref().unwrap();
                if !ball.contains(&u) {
                    return Err(OracleError::BeyondCap);
                }
                let base = ball.geodesic_to(&u)?;
                let mut vertices = Vec::with_capacity(base.len_vertices());
                for v in base.iter() {
                    vertices.push(self.spec.multiply(x, v)?);
                }
                Ok(DiscretePath::from_trusted(vertices))
            }
            OracleMode::BidirectionalSearch => {
                let (_, meet, fwd, bwd) = self.bidi_search(x, y)?.ok_or(OracleError::BeyondCap)?;
                let mut front = Vec::new();
                let mut cur = meet.clone();
                loop {
                    front.push(cur.clone());
                    match fwd.get(&cur).and_then(|(_, p)| p.clone()) {
                        Some(p) => cur = p,
                        None => break,
                    }
                }
                front.reverse();
                let mut cur = meet;
                loop {
                    match bwd.get(&cur).and_then(|(_, p)| p.clone()) {
                        Some(p) => {
                            front.push(p.clone());
                            cur = p;
                        }
                        None => break,
                    }
                }
                Ok(DiscretePath::from_trusted(front))
            }
        }
    }

    /// Level-synchronized bidirectional BFS. Returns the exact distance, the
    /// meeting vertex and both parent maps, or None past the cap/budget.
    #[allow(clippy::type_complexity)]
    fn bidi_search(
        &self,
        x: &GroupElement,
        y: &GroupElement,
    ) -> Result<
        Option<(u32, GroupElement, HashMap<GroupElement, (u32, Option<GroupElement>)>, HashMap<GroupElement, (u32, Option<GroupElement>)>)>,
        OracleError,
    > {
        let mut fwd: HashMap<GroupElement, (u32, Option<GroupElement>)> = HashMap::new();
        let mut bwd: HashMap<GroupElement, (u32, Option<GroupElement>)> = HashMap::new();
        fwd.insert(x.clone(), (0, None));
        bwd.insert(y.clone(), (0, None));
        if x == y {
            return Ok(Some((0, x.clone(), fwd, bwd)));
        }
        let mut f_front = alloc::vec![x.clone()];
        let mut b_front = alloc::vec![y.clone()];
        let mut lf = 0u32;
        let mut lb = 0u32;
        let mut best: Option<(u32, GroupElement)> = None;
        loop {
            if let Some((d, meet)) = &best {
                if *d <= lf + lb {
                    return Ok(Some((*d, meet.clone(), fwd, bwd)));
                }
            }
            if lf + lb >= self.cap {
                return Ok(None);
            }
            if f_front.is_empty() || b_front.is_empty() {
                // One side exhausted its component: unreachable.
                return Ok(None);
            }
            if fwd.len() + bwd.len() > self.search_budget {
                return Ok(None);
            }
            let expand_fwd = f_front.len() <= b_front.len();
            let (this, other, front, level) = if expand_fwd {
                (&mut fwd, &bwd, &mut f_front, &mut lf)
            } else {
                (&mut bwd, &fwd, &mut b_front, &mut lb)
            };
            let mut next = Vec::new();
            for v in front.iter() {
                for n in self.spec.neighbors(v)? {
                    if !this.contains_key(&n) {
                        this.insert(n.clone(), (*level + 1, Some(v.clone())));
                        if let Some(&(od, _)) = other.get(&n) {
                            let total = *level + 1 + od;
                            if best.as_ref().map(|(b, _)| total < *b).unwrap_or(true) {
                                best = Some((total, n.clone()));
                            }
                        }
                        next.push(n);
                    }
                }
            }
            *front = next;
            *level += 1;
        }
    }
}
