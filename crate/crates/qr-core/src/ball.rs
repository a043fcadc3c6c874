//! Finite balls of a Cayley graph, grown by breadth-first search from the
//! identity.
//!
//! A [`Ball`] stores elements in discovery order, so spheres are contiguous
//! index ranges, iteration is deterministic, and parent links give canonical
//! geodesics back to the basepoint. Parent choice is first-discovered in
//! generator order.

use alloc::vec::Vec;
use hashbrown::HashMap;

use crate::group::{GroupElement, GroupError, GroupSpec};
use crate::path::DiscretePath;

/// Default cap on the number of vertices a single ball may hold.
pub const DEFAULT_VERTEX_BUDGET: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BallError {
    /// The vertex budget was hit; reports the last fully explored radius.
    BudgetExceeded { radius_reached: u32 },
    /// Query about an element outside the ball.
    OutsideBall,
    /// Greedy geodesic extension found no distance-increasing neighbor.
    ExtensionStuck { partial: Vec<GroupElement> },
    Group(GroupError),
}

impl From<GroupError> for BallError {
    fn from(e: GroupError) -> Self {
        BallError::Group(e)
    }
}

impl core::fmt::Display for BallError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            BallError::BudgetExceeded { radius_reached } => {
                write!(f, "vertex budget exceeded; completed radius {radius_reached}")
            }
            BallError::OutsideBall => write!(f, "element outside ball"),
            BallError::ExtensionStuck { partial } => {
                write!(f, "geodesic extension stuck after {} vertices", partial.len())
            }
            BallError::Group(e) => write!(f, "{e}"),
        }
    }
}

/// A radius-R breadth-first exploration of the Cayley graph around the
/// identity, with exact word-metric distances and geodesic parent links.
#[derive(Debug, Clone)]
pub struct Ball {
    spec: GroupSpec,
    radius: u32,
    elems: Vec<GroupElement>,
    index: HashMap<GroupElement, u32>,
    dist: Vec<u32>,
    parent: Vec<u32>,
    sphere_starts: Vec<u32>,
}

/// Breadth-first exploration of `B_R` from the identity.
///
/// Deterministic: neighbors are expanded in generator order and parents are
/// first-discovered.
pub fn grow_ball(spec: &GroupSpec, radius: u32, budget: usize) -> Result<Ball, BallError> {
    let mut elems: Vec<GroupElement> = Vec::new();
    let mut index: HashMap<GroupElement, u32> = HashMap::new();
    let mut dist: Vec<u32> = Vec::new();
    let mut parent: Vec<u32> = Vec::new();
    let mut sphere_starts: Vec<u32> = Vec::new();

    let identity = spec.identity();
    elems.push(identity.clone());
    index.insert(identity, 0);
    dist.push(0);
    parent.push(0);
    sphere_starts.push(0);
    sphere_starts.push(1);

    let mut cursor = 0usize;
    let mut current_r = 0u32;
    while current_r < radius {
        let layer_end = elems.len();
        if cursor == layer_end {
            // The group was exhausted (finite ball); remaining spheres are
            // empty.
            sphere_starts.push(elems.len() as u32);
            current_r += 1;
            continue;
        }
        while cursor < layer_end {
            let g = elems[cursor].clone();
            for n in spec.neighbors(&g)? {
                if !index.contains_key(&n) {
                    if elems.len() >= budget {
                        return Err(BallError::BudgetExceeded { radius_reached: current_r });
                    }
                    index.insert(n.clone(), elems.len() as u32);
                    elems.push(n);
                    dist.push(current_r + 1);
                    parent.push(cursor as u32);
                }
            }
            cursor += 1;
        }
        current_r += 1;
        sphere_starts.push(elems.len() as u32);
    }

    Ok(Ball { spec: spec.clone(), radius, elems, index, dist, parent, sphere_starts })
}

impl Ball {
    pub fn spec(&self) -> &GroupSpec {
        &self.spec
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        self.index.contains_key(g)
    }

    /// Exact word-metric distance from the identity, when inside the ball.
    pub fn dist_of(&self, g: &GroupElement) -> Option<u32> {
        self.index.get(g).map(|&i| self.dist[i as usize])
    }

    /// Elements at distance exactly `r`, in discovery order.
    pub fn sphere(&self, r: u32) -> &[GroupElement] {
        if r > self.radius {
            return &[];
        }
        let lo = self.sphere_starts[r as usize] as usize;
        let hi = self.sphere_starts[r as usize + 1] as usize;
        &self.elems[lo..hi]
    }

    pub fn sphere_sizes(&self) -> Vec<usize> {
        (0..=self.radius).map(|r| self.sphere(r).len()).collect()
    }

    /// All elements in discovery (breadth-first) order.
    pub fn elements(&self) -> &[GroupElement] {
        &self.elems
    }

    /// Geodesic from the identity to `x` along parent links.
    pub fn geodesic_to(&self, x: &GroupElement) -> Result<DiscretePath, BallError> {
        let &i = self.index.get(x).ok_or(BallError::OutsideBall)?;
        let mut rev = Vec::with_capacity(self.dist[i as usize] as usize + 1);
        let mut cur = i;
        rev.push(self.elems[cur as usize].clone());
        while self.dist[cur as usize] > 0 {
            cur = self.parent[cur as usize];
            rev.push(self.elems[cur as usize].clone());
        }
        rev.reverse();
        Ok(DiscretePath::from_trusted(rev))
    }

    /// Geodesic from the identity through `x`, extended greedily (first
    /// neighbor with strictly larger distance, in generator order) until it
    /// reaches the boundary sphere. The result has length exactly `radius`,
    /// a finite stand-in for a geodesic ray through `x`.
    pub fn geodesic_ray_through(&self, x: &GroupElement) -> Result<DiscretePath, BallError> {
        let base = self.geodesic_to(x)?;
        let mut vertices: Vec<GroupElement> = base.vertices().to_vec();
        let mut cur_dist = self.dist[self.index[x] as usize];
        let mut cur = x.clone();
        while cur_dist < self.radius {
            let mut extended = false;
            for n in self.spec.neighbors(&cur)? {
                if let Some(d) = self.dist_of(&n) {
                    if d == cur_dist + 1 {
                        vertices.push(n.clone());
                        cur = n;
                        cur_dist += 1;
                        extended = true;
                        break;
                    }
                }
            }
            if !extended {
                return Err(BallError::ExtensionStuck { partial: vertices });
            }
        }
        Ok(DiscretePath::from_trusted(vertices))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::parse_group_spec;

    #[test]
    fn z2_ball_sizes_match_closed_form() {
        let s = parse_group_spec("z^2").unwrap();
        for r in 0..=12u32 {
            let ball = grow_ball(&s, r, DEFAULT_VERTEX_BUDGET).unwrap();
            let expected = 2 * (r as usize) * (r as usize) + 2 * (r as usize) + 1;
            assert_eq!(ball.len(), expected, "radius {r}");
        }
    }

    #[test]
    fn free2_sphere_sizes_match_closed_form() {
        let s = parse_group_spec("free:2").unwrap();
        let ball = grow_ball(&s, 6, DEFAULT_VERTEX_BUDGET).unwrap();
        assert_eq!(ball.sphere(0).len(), 1);
        for r in 1..=6u32 {
            assert_eq!(ball.sphere(r).len(), 4 * 3usize.pow(r - 1), "radius {r}");
        }
    }

    #[test]
    fn small_examples() {
        let s = parse_group_spec("z^2").unwrap();
        assert_eq!(grow_ball(&s, 1, 1000).unwrap().len(), 5);
        assert_eq!(grow_ball(&s, 2, 1000).unwrap().len(), 13);
        let f = parse_group_spec("free:2").unwrap();
        assert_eq!(grow_ball(&f, 2, 1000).unwrap().len(), 17);
    }

    #[test]
    fn budget_reports_completed_radius() {
        let s = parse_group_spec("free:2").unwrap();
        // |B_2| = 17, so an 18-vertex budget dies somewhere inside radius 3.
        match grow_ball(&s, 3, 18) {
            Err(BallError::BudgetExceeded { radius_reached }) => assert_eq!(radius_reached, 2),
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn parent_links_are_geodesic() {
        let s = parse_group_spec("heis").unwrap();
        let ball = grow_ball(&s, 5, DEFAULT_VERTEX_BUDGET).unwrap();
        for (i, e) in ball.elements().iter().enumerate() {
            let d = ball.dist[i];
            if d > 0 {
                let p = &ball.elems[ball.parent[i] as usize];
                assert_eq!(ball.dist_of(p), Some(d - 1));
                assert!(s.adjacent(p, e).unwrap());
            }
        }
        // Sphere sizes are consistent with the total count.
        let total: usize = ball.sphere_sizes().iter().sum();
        assert_eq!(total, ball.len());
    }

    #[test]
    fn heisenberg_commutator_distance() {
        let s = parse_group_spec("heis").unwrap();
        let ball = grow_ball(&s, 4, DEFAULT_VERTEX_BUDGET).unwrap();
        // Z = [X, Y] has commutator length 4.
        let z = GroupElement::Heisenberg { x: 0, y: 0, z: 1 };
        assert_eq!(ball.dist_of(&z), Some(4));
        let path = ball.geodesic_to(&z).unwrap();
        assert_eq!(path.len_edges(), 4);
        assert_eq!(path.first(), &s.identity());
        assert_eq!(path.last(), &z);
    }

    #[test]
    fn geodesic_to_straight_line() {
        let s = parse_group_spec("z^2").unwrap();
        let ball = grow_ball(&s, 3, 1000).unwrap();
        let x = GroupElement::Vector(alloc::vec![2, 0]);
        let path = ball.geodesic_to(&x).unwrap();
        assert_eq!(
            path.vertices(),
            &[
                GroupElement::Vector(alloc::vec![0, 0]),
                GroupElement::Vector(alloc::vec![1, 0]),
                GroupElement::Vector(alloc::vec![2, 0]),
            ]
        );
        // Degenerate: geodesic to the identity is a single vertex.
        let o = ball.geodesic_to(&s.identity()).unwrap();
        assert_eq!(o.len_vertices(), 1);
        // Outside the ball is an error.
        assert!(matches!(
            ball.geodesic_to(&GroupElement::Vector(alloc::vec![4, 0])),
            Err(BallError::OutsideBall)
        ));
    }

    #[test]
    fn ray_through_reaches_boundary_sphere() {
        let s = parse_group_spec("z^2").unwrap();
        let ball = grow_ball(&s, 6, DEFAULT_VERTEX_BUDGET).unwrap();
        let x = GroupElement::Vector(alloc::vec![2, 1]);
        let ray = ball.geodesic_ray_through(&x).unwrap();
        assert_eq!(ray.len_edges(), 6);
        assert!(ray.position(&x).is_some());
        for (i, v) in ray.iter().enumerate() {
            assert_eq!(ball.dist_of(v), Some(i as u32), "distance increases along ray");
        }
        // Already on the boundary: nothing to extend.
        let far = GroupElement::Vector(alloc::vec![6, 0]);
        let ray2 = ball.geodesic_ray_through(&far).unwrap();
        assert_eq!(ray2.len_edges(), 6);
        assert_eq!(ray2.last(), &far);
    }

    #[test]
    fn free_ray_extension_never_backtracks() {
        let s = parse_group_spec("free:2").unwrap();
        let ball = grow_ball(&s, 5, DEFAULT_VERTEX_BUDGET).unwrap();
        let ab = GroupElement::Word(alloc::vec![1, 2]);
        let ray = ball.geodesic_ray_through(&ab).unwrap();
        assert_eq!(ray.len_edges(), 5);
        match ray.last() {
            GroupElement::Word(w) => assert_eq!(w.len(), 5),
            _ => panic!(),
        }
    }
}
