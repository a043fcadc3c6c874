//! Seeded randomized verification suites for the surgery constructions.
//!
//! Each suite builds random instances satisfying a construction's
//! hypotheses, runs it, and re-verifies the promised bounds independently.
//! The CLI's `check-surgery` command and the acceptance tests both drive
//! these.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand_core::{RngCore, SeedableRng};

use crate::group::GroupElement;
use crate::oracle::{Distance, DistanceOracle};
use crate::path::{check_qg, qg_constants, DiscretePath};
use crate::redirect::{build_ray, redirect_case1, RaySpec};
use crate::surgery::{annulus_surgery, projection_surgery, shorten_path, AnnulusParams, Orientation};

/// Aggregate result of one randomized suite.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub name: &'static str,
    pub attempted: u32,
    pub failures: u32,
    pub first_failure: Option<String>,
    /// Largest measured multiplicative constant seen across the suite.
    pub max_q: f64,
}

impl TrialSummary {
    fn new(name: &'static str) -> Self {
        TrialSummary { name, attempted: 0, failures: 0, first_failure: None, max_q: 0.0 }
    }

    fn fail(&mut self, msg: String) {
        self.failures += 1;
        if self.first_failure.is_none() {
            self.first_failure = Some(msg);
        }
    }

    pub fn passed(&self) -> bool {
        self.attempted > 0 && self.failures == 0
    }
}

struct Rng(rand_chacha::ChaCha8Rng);

impl Rng {
    fn seeded(seed: u64) -> Rng {
        Rng(rand_chacha::ChaCha8Rng::seed_from_u64(seed))
    }

    fn below(&mut self, n: usize) -> usize {
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.0.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

fn random_element(oracle: &DistanceOracle, rng: &mut Rng, max_len: usize) -> GroupElement {
    let spec = oracle.spec();
    let len = rng.below(max_len + 1);
    let mut g = spec.identity();
    for _ in 0..len {
        g = spec.multiply(&g, spec.generator_elem(rng.below(spec.generator_count()))).unwrap();
    }
    g
}

/// Projection surgery onto random geodesics: the output must pass
/// check_qg(3, Q) for each Q in `q_caps`.
pub fn projection_trials(
    oracle: &DistanceOracle,
    trials: u32,
    seed: u64,
    q_caps: &[f64],
) -> TrialSummary {
    let mut summary = TrialSummary::new("projection_surgery");
    let mut rng = Rng::seeded(seed);
    for t in 0..trials {
        let z = random_element(oracle, &mut rng, 10);
        let w = random_element(oracle, &mut rng, 10);
        let x = random_element(oracle, &mut rng, 10);
        let beta = match oracle.geodesic(&z, &w) {
            Ok(b) => b,
            Err(e) => {
                summary.fail(format!("trial {t}: geodesic failed: {e}"));
                continue;
            }
        };
        summary.attempted += 1;
        let orientation = if t % 2 == 0 { Orientation::TowardStart } else { Orientation::TowardEnd };
        match projection_surgery(&x, &beta, orientation, oracle) {
            Ok(out) => {
                for &q_cap in q_caps {
                    match check_qg(&out, 3.0, q_cap, oracle) {
                        Ok(check) if check.passed() => {
                            summary.max_q = summary.max_q.max(check.report().q);
                        }
                        Ok(check) => summary.fail(format!(
                            "trial {t}: (3, {q_cap}) violated, measured {} at {:?}",
                            check.report().q,
                            check.report().witness
                        )),
                        Err(e) => summary.fail(format!("trial {t}: {e}")),
                    }
                }
            }
            Err(e) => summary.fail(format!("trial {t}: surgery failed: {e}")),
        }
    }
    summary
}

/// Random detoured lattice paths: shortening must preserve endpoints, never
/// lengthen, stay in the rho*r neighborhood (re-verified here), and report a
/// finite constant.
pub fn shorten_trials(oracle: &DistanceOracle, trials: u32, seed: u64) -> TrialSummary {
    let mut summary = TrialSummary::new("shorten_path");
    let mut rng = Rng::seeded(seed);
    let spec = oracle.spec();
    let mut t = 0u32;
    while summary.attempted < trials && t < trials * 4 {
        t += 1;
        // Endpoints at distance 10..=16, a detoured path between them.
        let x = random_element(oracle, &mut rng, 6);
        let mut y = x.clone();
        let d_target = 10 + rng.below(7);
        for _ in 0..d_target {
            y = spec.multiply(&y, spec.generator_elem(2 * rng.below(2))).unwrap();
        }
        let geo = oracle.geodesic(&x, &y).unwrap();
        let tau = match build_detoured(spec, &geo, &mut rng) {
            Some(p) => p,
            None => continue,
        };
        let r = (d_target - 1) as f64;
        let rho = if t % 2 == 0 { 0.5 } else { 0.25 };
        summary.attempted += 1;
        match shorten_path(&tau, rho, r, oracle) {
            Ok(out) => {
                if out.path.len_edges() > tau.len_edges() {
                    summary.fail(format!("trial {t}: output longer than input"));
                }
                if out.path.first() != tau.first() || out.path.last() != tau.last() {
                    summary.fail(format!("trial {t}: endpoints moved"));
                }
                if !out.report.q.is_finite() {
                    summary.fail(format!("trial {t}: non-finite measured constant"));
                }
                summary.max_q = summary.max_q.max(out.report.q);
                // Independent neighborhood re-check.
                let reach = rho * r;
                for v in out.path.iter() {
                    let mut ok = false;
                    for w in tau.iter() {
                        if let Distance::Exact(d) = oracle.distance(v, w).unwrap() {
                            if (d as f64) <= reach {
                                ok = true;
                                break;
                            }
                        }
                    }
                    if !ok {
                        summary.fail(format!("trial {t}: vertex outside the {reach} neighborhood"));
                        break;
                    }
                }
            }
            Err(e) => summary.fail(format!("trial {t}: {e}")),
        }
    }
    summary
}

/// Rebuilds a geodesic with random out-and-back detours as a valid edge
/// path (no stationary steps).
fn build_detoured(
    spec: &crate::group::GroupSpec,
    geo: &DiscretePath,
    rng: &mut Rng,
) -> Option<DiscretePath> {
    let mut vertices: Vec<GroupElement> = Vec::new();
    for (i, v) in geo.iter().enumerate() {
        vertices.push(v.clone());
        if i + 1 < geo.len_vertices() && rng.below(3) == 0 {
            let g = rng.below(spec.generator_count());
            let out = spec.multiply(v, spec.generator_elem(g)).ok()?;
            // Avoid a stationary pair when the detour collides with the
            // next geodesic vertex.
            if out != *geo.get(i + 1) && out != *v {
                vertices.push(out);
                vertices.push(v.clone());
            }
        }
    }
    DiscretePath::new(spec, vertices).ok()
}

/// Annulus concatenations with random inner geodesics and random outer
/// walks: the measured cross-pair ratio must respect the proof bound.
pub fn annulus_trials(oracle: &DistanceOracle, trials: u32, seed: u64) -> TrialSummary {
    let mut summary = TrialSummary::new("annulus_surgery");
    let mut rng = Rng::seeded(seed);
    let spec = oracle.spec();
    for t in 0..trials {
        let r = [16u32, 24, 32, 40][rng.below(4)];
        let eps_r = (r / 4) as i64;
        let delta_r = (r / 2) as usize;
        // alpha: monotone lattice geodesic to a random point on S(eps r).
        let u = rng.below(2 * eps_r as usize + 1) as i64 - eps_r;
        let v_abs = eps_r - u.abs();
        let v = if rng.below(2) == 0 { v_abs } else { -v_abs };
        let target = GroupElement::Vector(alloc::vec![u, v]);
        let mut word = Vec::new();
        for _ in 0..u.abs() {
            word.push(if u >= 0 { 0usize } else { 1 });
        }
        for _ in 0..v.abs() {
            word.push(if v >= 0 { 2usize } else { 3 });
        }
        rng.shuffle(&mut word);
        let alpha = DiscretePath::from_word(spec, spec.identity(), &word).unwrap();
        debug_assert_eq!(alpha.last(), &target);

        let zeta = match crate::redirect::ray_through(oracle, alpha.last(), r / 2 + 2) {
            Ok(z) => z,
            Err(e) => {
                summary.fail(format!("trial {t}: zeta failed: {e}"));
                continue;
            }
        };
        let p = zeta.get(delta_r).clone();

        // gamma: random walk from p filtered to stay outside the open
        // delta*r ball.
        let gamma_len = rng.below(2 * r as usize + 1);
        let mut gvs = alloc::vec![p.clone()];
        'walk: for _ in 0..gamma_len {
            for _try in 0..8 {
                let g = rng.below(spec.generator_count());
                let cand = spec.multiply(gvs.last().unwrap(), spec.generator_elem(g)).unwrap();
                let d = oracle.norm(&cand).unwrap().exact().unwrap();
                if (d as f64) >= delta_r as f64 {
                    gvs.push(cand);
                    continue 'walk;
                }
            }
            break;
        }
        let gamma = DiscretePath::new(spec, gvs).unwrap();
        let q2 = qg_constants(&gamma, 2.0, oracle).unwrap().q;

        let params = AnnulusParams {
            delta: 0.5,
            epsilon: 0.25,
            c_budget: 3.0,
            q1: 1.0,
            q_add1: 0.0,
            q2,
            q_add2: 2.0,
        };
        summary.attempted += 1;
        match annulus_surgery(&alpha, &zeta, &gamma, &params, r as f64, oracle) {
            Ok(out) => {
                if out.cross_ratio > out.cross_ratio_bound {
                    summary.fail(format!(
                        "trial {t}: cross ratio {} above bound {}",
                        out.cross_ratio, out.cross_ratio_bound
                    ));
                }
                summary.max_q = summary.max_q.max(out.report.q);
            }
            Err(e) => summary.fail(format!("trial {t}: {e}")),
        }
    }
    summary
}

/// Ray-to-geodesic redirecting instances satisfying the closeness
/// hypothesis: outputs must pass (9q, Q) and coincide out to (1-eps) r_n.
pub fn redirect_case1_trials(oracle: &DistanceOracle, trials: u32, seed: u64) -> TrialSummary {
    let mut summary = TrialSummary::new("redirect_case1");
    let mut rng = Rng::seeded(seed);
    let epsilon = 0.75;
    let beta = build_ray(oracle, &RaySpec::PeriodicWord("xy".into()), 96).unwrap();
    let words = ["x", "y", "xxy", "xyy", "xy"];
    let mut t = 0u32;
    while summary.attempted < trials && t < trials * 4 {
        t += 1;
        let r_n = [8u32, 16, 32][rng.below(3)];
        let word = words[rng.below(words.len())];
        let gamma = match build_ray(oracle, &RaySpec::PeriodicWord(word.into()), 96) {
            Ok(g) => g,
            Err(_) => continue,
        };
        match redirect_case1(oracle, &gamma.path, &beta.path, r_n, epsilon, 0.0) {
            Ok(out) => {
                summary.attempted += 1;
                let bound = 9.0 * gamma.report.q.max(1.0);
                match check_qg(&out.path, bound, 0.0, oracle) {
                    Ok(check) if check.passed() => {
                        summary.max_q = summary.max_q.max(check.report().q);
                    }
                    Ok(check) => summary.fail(format!(
                        "r_n={r_n} word={word}: ({bound}, 0) violated, measured {}",
                        check.report().q
                    )),
                    Err(e) => summary.fail(format!("r_n={r_n}: {e}")),
                }
                if (out.coincidence_radius as f64) < (1.0 - epsilon) * r_n as f64 {
                    summary.fail(format!(
                        "r_n={r_n} word={word}: coincidence radius {}",
                        out.coincidence_radius
                    ));
                }
            }
            Err(crate::redirect::RedirectError::Case1HypothesisFails { .. }) => continue,
            Err(e) => {
                summary.attempted += 1;
                summary.fail(format!("r_n={r_n} word={word}: {e}"));
            }
        }
    }
    summary
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::parse_group_spec;

    fn oracle(text: &str) -> DistanceOracle {
        DistanceOracle::closed_form(parse_group_spec(text).unwrap()).unwrap()
    }

    #[test]
    fn projection_suite_passes_in_z2_and_free2() {
        for text in ["z^2", "free:2"] {
            let summary = projection_trials(&oracle(text), 200, 7, &[0.0, 2.0]);
            assert!(summary.passed(), "{text}: {:?}", summary.first_failure);
            assert!(summary.max_q <= 3.0);
        }
    }

    #[test]
    fn shorten_suite_passes_in_z2() {
        let summary = shorten_trials(&oracle("z^2"), 100, 11);
        assert!(summary.passed(), "{:?}", summary.first_failure);
        assert_eq!(summary.attempted, 100);
    }

    #[test]
    fn annulus_suite_passes_in_z2() {
        let summary = annulus_trials(&oracle("z^2"), 100, 13);
        assert!(summary.passed(), "{:?}", summary.first_failure);
        assert_eq!(summary.attempted, 100);
    }

    #[test]
    fn case1_suite_passes_in_z2() {
        let summary = redirect_case1_trials(&oracle("z^2"), 60, 17);
        assert!(summary.passed(), "{:?}", summary.first_failure);
        assert!(summary.attempted >= 60);
    }

    #[test]
    fn suites_are_deterministic() {
        let a = projection_trials(&oracle("z^2"), 30, 5, &[0.0]);
        let b = projection_trials(&oracle("z^2"), 30, 5, &[0.0]);
        assert_eq!(a, b);
    }
}
