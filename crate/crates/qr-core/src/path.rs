//! Discrete unit-step paths and quasi-geodesic constant measurement.
//!
//! A path is a vertex sequence with consecutive vertices adjacent in the
//! Cayley graph; arc length is index difference. For a fixed additive
//! constant Q, the multiplicative constant of a path is
//!
//! ```text
//! q = max(1, max_{i<j} |i-j| / (d(v_i, v_j) + Q))
//! ```
//!
//! which makes `|i-j|/q - Q <= d(v_i, v_j)` hold for all pairs; the upper
//! bound `d <= q|i-j| + Q` is automatic for unit-step paths with q >= 1.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::group::{GroupElement, GroupError, GroupSpec};
use crate::oracle::{Distance, DistanceOracle, OracleError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathError {
    Empty,
    NotAdjacent { index: usize },
    StationaryStep { index: usize },
    Group(GroupError),
    /// A pairwise distance could not be certified under the oracle cap.
    Uncertified { i: usize, j: usize },
    Oracle(String),
}

impl From<GroupError> for PathError {
    fn from(e: GroupError) -> Self {
        PathError::Group(e)
    }
}

impl From<OracleError> for PathError {
    fn from(e: OracleError) -> Self {
        PathError::Oracle(e.to_string())
    }
}

impl core::fmt::Display for PathError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            PathError::Empty => write!(f, "path must be nonempty"),
            PathError::NotAdjacent { index } => {
                write!(f, "vertices {index} and {} are not adjacent", index + 1)
            }
            PathError::StationaryStep { index } => {
                write!(f, "stationary step at index {index} (use with_stationary_steps)")
            }
            PathError::Group(e) => write!(f, "{e}"),
            PathError::Uncertified { i, j } => {
                write!(f, "distance between vertices {i} and {j} uncertified under oracle cap")
            }
            PathError::Oracle(e) => write!(f, "{e}"),
        }
    }
}

/// A unit-step vertex sequence in a Cayley graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DiscretePath {
    vertices: Vec<GroupElement>,
}

impl DiscretePath {
    /// Validating constructor: consecutive vertices must be adjacent
    /// (stationary steps are rejected here; see
    /// [`DiscretePath::with_stationary_steps`]).
    pub fn new(spec: &GroupSpec, vertices: Vec<GroupElement>) -> Result<DiscretePath, PathError> {
        if vertices.is_empty() {
            return Err(PathError::Empty);
        }
        for i in 0..vertices.len() - 1 {
            if vertices[i] == vertices[i + 1] {
                return Err(PathError::StationaryStep { index: i });
            }
            if !spec.adjacent(&vertices[i], &vertices[i + 1])? {
                return Err(PathError::NotAdjacent { index: i });
            }
        }
        Ok(DiscretePath { vertices })
    }

    /// Degenerate constructor allowing equal consecutive vertices.
    pub fn with_stationary_steps(
        spec: &GroupSpec,
        vertices: Vec<GroupElement>,
    ) -> Result<DiscretePath, PathError> {
        if vertices.is_empty() {
            return Err(PathError::Empty);
        }
        for i in 0..vertices.len() - 1 {
            if vertices[i] != vertices[i + 1] && !spec.adjacent(&vertices[i], &vertices[i + 1])? {
                return Err(PathError::NotAdjacent { index: i });
            }
        }
        Ok(DiscretePath { vertices })
    }

    /// Internal constructor for paths that are adjacent by construction.
    pub(crate) fn from_trusted(vertices: Vec<GroupElement>) -> DiscretePath {
        debug_assert!(!vertices.is_empty());
        DiscretePath { vertices }
    }

    pub fn single(vertex: GroupElement) -> DiscretePath {
        DiscretePath { vertices: vec![vertex] }
    }

    /// Edge path starting at `base` spelled by generator indices.
    pub fn from_word(
        spec: &GroupSpec,
        base: GroupElement,
        word: &[usize],
    ) -> Result<DiscretePath, PathError> {
        let mut vertices = Vec::with_capacity(word.len() + 1);
        vertices.push(base);
        for &i in word {
            let next = spec.multiply(vertices.last().unwrap(), spec.generator_elem(i))?;
            vertices.push(next);
        }
        Ok(DiscretePath { vertices })
    }

    pub fn vertices(&self) -> &[GroupElement] {
        &self.vertices
    }

    pub fn len_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Arc length: number of edges.
    pub fn len_edges(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn first(&self) -> &GroupElement {
        &self.vertices[0]
    }

    pub fn last(&self) -> &GroupElement {
        self.vertices.last().unwrap()
    }

    pub fn get(&self, i: usize) -> &GroupElement {
        &self.vertices[i]
    }

    pub fn iter(&self) -> core::slice::Iter<'_, GroupElement> {
        self.vertices.iter()
    }

    pub fn position(&self, v: &GroupElement) -> Option<usize> {
        self.vertices.iter().position(|x| x == v)
    }

    pub fn reversed(&self) -> DiscretePath {
        DiscretePath { vertices: self.vertices.iter().rev().cloned().collect() }
    }

    /// Inclusive sub-path between indices, reversing when `from > to`.
    pub fn subpath(&self, from: usize, to: usize) -> DiscretePath {
        if from <= to {
            DiscretePath { vertices: self.vertices[from..=to].to_vec() }
        } else {
            DiscretePath { vertices: self.vertices[to..=from].iter().rev().cloned().collect() }
        }
    }

    /// Concatenation; when `self` ends where `other` begins the seam vertex
    /// is deduplicated, otherwise the junction must be an edge.
    pub fn concat(&self, spec: &GroupSpec, other: &DiscretePath) -> Result<DiscretePath, PathError> {
        let mut vertices = self.vertices.clone();
        let mut rest = other.vertices.as_slice();
        if self.last() == other.first() {
            rest = &rest[1..];
        } else if !spec.adjacent(self.last(), other.first())? {
            return Err(PathError::NotAdjacent { index: self.len_edges() });
        }
        vertices.extend_from_slice(rest);
        Ok(DiscretePath { vertices })
    }

    /// Removes cycles: whenever a vertex repeats, the loop between the two
    /// occurrences is spliced out. Scans left to right until stable.
    pub fn loop_erased(&self) -> DiscretePath {
        let mut vertices = self.vertices.clone();
        loop {
            let splice = {
                let mut seen: hashbrown::HashMap<&GroupElement, usize> = hashbrown::HashMap::new();
                let mut found: Option<(usize, usize)> = None;
                for (i, v) in vertices.iter().enumerate() {
                    if let Some(&j) = seen.get(v) {
                        found = Some((j, i));
                        break;
                    }
                    seen.insert(v, i);
                }
                found
            };
            match splice {
                Some((j, i)) => {
                    vertices.drain(j + 1..=i);
                }
                None => break,
            }
        }
        DiscretePath { vertices }
    }
}

/// Measured quasi-geodesic constants of one path at a chosen additive Q.
#[derive(Debug, Clone, PartialEq)]
pub struct QGReport {
    /// Additive constant the measurement was taken at (chosen by caller).
    pub q_add: f64,
    /// Measured multiplicative constant, >= 1 (infinite when the path
    /// revisits a vertex and Q = 0).
    pub q: f64,
    /// Index pair attaining `q`.
    pub witness: (usize, usize),
    /// Arc length of the path.
    pub length: usize,
}

/// Measures the multiplicative constant of `path` at additive constant `q_add`.
///
/// Exact over all vertex pairs, not sampled.
pub fn qg_constants(
    path: &DiscretePath,
    q_add: f64,
    oracle: &DistanceOracle,
) -> Result<QGReport, PathError> {
    let vs = path.vertices();
    let mut best = 1.0f64;
    let mut witness = (0, if vs.len() > 1 { 1 } else { 0 });
    let mut best_ratio = f64::MIN;
    for i in 0..vs.len() {
        for j in (i + 1)..vs.len() {
            let d = match oracle.distance(&vs[i], &vs[j])? {
                Distance::Exact(d) => d as f64,
                Distance::Uncertified => return Err(PathError::Uncertified { i, j }),
            };
            let denom = d + q_add;
            let ratio = if denom <= 0.0 { f64::INFINITY } else { (j - i) as f64 / denom };
            if ratio > best_ratio {
                best_ratio = ratio;
                witness = (i, j);
            }
        }
    }
    if best_ratio > best {
        best = best_ratio;
    }
    Ok(QGReport { q_add, q: best, witness, length: path.len_edges() })
}

/// Outcome of checking a path against declared constants.
#[derive(Debug, Clone, PartialEq)]
pub enum QGCheck {
    Pass(QGReport),
    Fail { report: QGReport },
}

impl QGCheck {
    pub fn passed(&self) -> bool {
        matches!(self, QGCheck::Pass(_))
    }

    pub fn report(&self) -> &QGReport {
        match self {
            QGCheck::Pass(r) => r,
            QGCheck::Fail { report } => report,
        }
    }
}

/// Checks whether `path` is a (q, Q)-quasi-geodesic: passes iff the measured
/// constant at Q is at most `q` (tiny relative slack for float round-off).
pub fn check_qg(
    path: &DiscretePath,
    q: f64,
    q_add: f64,
    oracle: &DistanceOracle,
) -> Result<QGCheck, PathError> {
    let report = qg_constants(path, q_add, oracle)?;
    if report.q <= q * (1.0 + 1e-12) {
        Ok(QGCheck::Pass(report))
    } else {
        Ok(QGCheck::Fail { report })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::parse_group_spec;
    use crate::oracle::DistanceOracle;

    fn z2() -> crate::group::GroupSpec {
        parse_group_spec("z^2").unwrap()
    }

    fn vec2(x: i64, y: i64) -> GroupElement {
        GroupElement::Vector(alloc::vec![x, y])
    }

    #[test]
    fn straight_path_is_geodesic() {
        let s = z2();
        let oracle = DistanceOracle::closed_form(s.clone()).unwrap();
        let path = DiscretePath::new(&s, (0..=8).map(|i| vec2(i, 0)).collect()).unwrap();
        let report = qg_constants(&path, 0.0, &oracle).unwrap();
        assert_eq!(report.q, 1.0);
        assert!(check_qg(&path, 1.0, 0.0, &oracle).unwrap().passed());
    }

    #[test]
    fn backtracking_path_constants() {
        let s = z2();
        let oracle = DistanceOracle::closed_form(s.clone()).unwrap();
        let path = DiscretePath::new(
            &s,
            alloc::vec![vec2(0, 0), vec2(1, 0), vec2(0, 0)],
        )
        .unwrap();
        // Pair (0, 2) sits at distance 0: with Q = 1 the ratio is 2/(0+1).
        let report = qg_constants(&path, 1.0, &oracle).unwrap();
        assert_eq!(report.q, 2.0);
        assert_eq!(report.witness, (0, 2));
        // At Q = 0 the same pair forces an infinite constant.
        let report0 = qg_constants(&path, 0.0, &oracle).unwrap();
        assert!(report0.q.is_infinite());
        assert!(!check_qg(&path, 1.0, 0.0, &oracle).unwrap().passed());
        match check_qg(&path, 1.0, 0.0, &oracle).unwrap() {
            QGCheck::Fail { report } => assert_eq!(report.witness, (0, 2)),
            _ => panic!(),
        }
    }

    #[test]
    fn l_shaped_path_is_l1_geodesic() {
        let s = z2();
        let oracle = DistanceOracle::closed_form(s.clone()).unwrap();
        let mut vs: Vec<GroupElement> = (0..=4).map(|i| vec2(i, 0)).collect();
        vs.extend((1..=4).map(|j| vec2(4, j)));
        let path = DiscretePath::new(&s, vs).unwrap();
        let report = qg_constants(&path, 0.0, &oracle).unwrap();
        assert_eq!(report.q, 1.0);
    }

    #[test]
    fn qg_constant_monotone_in_q_add() {
        let s = z2();
        let oracle = DistanceOracle::closed_form(s.clone()).unwrap();
        let path = DiscretePath::new(
            &s,
            alloc::vec![vec2(0, 0), vec2(1, 0), vec2(1, 1), vec2(0, 1), vec2(0, 2)],
        )
        .unwrap();
        let mut prev = f64::INFINITY;
        for q_add in [0.0, 0.5, 1.0, 2.0, 4.0] {
            let report = qg_constants(&path, q_add, &oracle).unwrap();
            assert!(report.q <= prev);
            prev = report.q;
        }
    }

    #[test]
    fn constructors_enforce_adjacency() {
        let s = z2();
        assert!(matches!(
            DiscretePath::new(&s, alloc::vec![vec2(0, 0), vec2(2, 0)]),
            Err(PathError::NotAdjacent { index: 0 })
        ));
        assert!(matches!(
            DiscretePath::new(&s, alloc::vec![vec2(0, 0), vec2(0, 0)]),
            Err(PathError::StationaryStep { index: 0 })
        ));
        assert!(DiscretePath::with_stationary_steps(&s, alloc::vec![vec2(0, 0), vec2(0, 0)]).is_ok());
        assert!(matches!(DiscretePath::new(&s, alloc::vec![]), Err(PathError::Empty)));
    }

    #[test]
    fn loop_erasure_removes_cycles() {
        let s = z2();
        let path = DiscretePath::new(
            &s,
            alloc::vec![
                vec2(0, 0),
                vec2(1, 0),
                vec2(1, 1),
                vec2(1, 0),
                vec2(2, 0),
            ],
        )
        .unwrap();
        let erased = path.loop_erased();
        assert_eq!(
            erased.vertices(),
            &[vec2(0, 0), vec2(1, 0), vec2(2, 0)],
        );
    }

    #[test]
    fn subpath_reverses_when_needed() {
        let s = z2();
        let path = DiscretePath::new(&s, (0..=4).map(|i| vec2(i, 0)).collect()).unwrap();
        let sub = path.subpath(3, 1);
        assert_eq!(sub.vertices(), &[vec2(3, 0), vec2(2, 0), vec2(1, 0)]);
    }
}
