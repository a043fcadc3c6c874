//! Property tests over randomized paths and words.

use proptest::prelude::*;
use qr_core::group::{parse_group_spec, GroupElement, GroupSpec};
use qr_core::path::{qg_constants, DiscretePath};
use qr_core::{avoidant, DistanceOracle};

fn z2() -> GroupSpec {
    parse_group_spec("z^2").unwrap()
}

fn z2_oracle() -> DistanceOracle {
    DistanceOracle::closed_form(z2()).unwrap()
}

/// A random walk as generator indices; pairs of opposite moves are allowed,
/// so paths may backtrack and revisit vertices.
fn walk_strategy(max_len: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0usize..4, 1..max_len)
}

fn walk_path(spec: &GroupSpec, moves: &[usize]) -> DiscretePath {
    DiscretePath::from_word(spec, spec.identity(), moves).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Raising the additive constant never raises the multiplicative one.
    #[test]
    fn qg_constant_monotone_in_q(moves in walk_strategy(40), q_lo in 0.0f64..4.0, q_hi in 0.0f64..4.0) {
        let spec = z2();
        let oracle = z2_oracle();
        let path = walk_path(&spec, &moves);
        let (lo, hi) = if q_lo <= q_hi { (q_lo, q_hi) } else { (q_hi, q_lo) };
        let at_lo = qg_constants(&path, lo, &oracle).unwrap().q;
        let at_hi = qg_constants(&path, hi, &oracle).unwrap().q;
        prop_assert!(at_hi <= at_lo * (1.0 + 1e-12));
    }

    /// Geodesics measure q = 1 at every additive constant.
    #[test]
    fn geodesics_measure_one(x in -12i64..12, y in -12i64..12, q_add in 0.0f64..6.0) {
        let oracle = z2_oracle();
        let a = GroupElement::Vector(vec![x, y]);
        let b = GroupElement::Vector(vec![-y, x + 1]);
        let g = oracle.geodesic(&a, &b).unwrap();
        let report = qg_constants(&g, q_add, &oracle).unwrap();
        prop_assert_eq!(report.q, 1.0);
    }

    /// Word evaluation round-trips through reversed inverse generators.
    #[test]
    fn words_round_trip(moves in prop::collection::vec(0usize..6, 0..12)) {
        for text in ["heis", "sol:2,1,1,1", "bs:1,2"] {
            let spec = parse_group_spec(text).unwrap();
            let n = spec.generator_count();
            let mut g = spec.identity();
            for &m in &moves {
                g = spec.multiply(&g, spec.generator_elem(m % n)).unwrap();
            }
            let mut h = g.clone();
            for &m in moves.iter().rev() {
                h = spec
                    .multiply(&h, spec.generator_elem(spec.inverse_generator(m % n)))
                    .unwrap();
            }
            prop_assert_eq!(&h, &spec.identity());
        }
    }

    /// Avoidant outputs stay outside the open ball and never beat the plain
    /// distance.
    #[test]
    fn avoidant_paths_respect_exclusion(
        ax in 3i64..8, bx in 3i64..8, by in -6i64..6, avoid in 0u32..3,
    ) {
        let oracle = z2_oracle();
        let origin = GroupElement::Vector(vec![0, 0]);
        let a = GroupElement::Vector(vec![ax, 0]);
        let b = GroupElement::Vector(vec![-bx, by]);
        let avoid = avoid as f64;
        let out =
            avoidant::avoidant_shortest_path(&oracle, &a, &b, &origin, avoid, 64, 100_000).unwrap();
        match out {
            avoidant::AvoidantOutcome::Path(p) => {
                let direct = oracle.distance(&a, &b).unwrap().exact().unwrap() as usize;
                prop_assert!(p.len_edges() >= direct);
                for v in p.iter() {
                    let d = oracle.distance(&origin, v).unwrap().exact().unwrap();
                    prop_assert!((d as f64) >= avoid);
                }
            }
            avoidant::AvoidantOutcome::Disconnected(_) => {
                // Plane minus a bounded ball stays connected at these radii.
                prop_assert!(false, "unexpected disconnect");
            }
        }
    }
}
