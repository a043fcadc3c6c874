//! Worker-pool divergence profiles.
//!
//! Pair searches within one radius are independent; chunks run on scoped
//! threads and the per-pair records are merged with the same supremum order
//! as the sequential driver, so the result is identical for any thread
//! count.

use qr_core::ball::grow_ball;
use qr_core::divergence::{
    div_pair, sphere_pairs, DivergenceError, DivergenceParams, DivergenceRecord, Profile,
    ProfilePoint,
};
use qr_core::DistanceOracle;

/// Multi-threaded equivalent of `qr_core::divergence::divergence_profile`.
pub fn parallel_divergence_profile(
    oracle: &DistanceOracle,
    radii: &[u32],
    params: &DivergenceParams,
    cap: u32,
    budget: usize,
    threads: usize,
) -> Result<Profile, DivergenceError> {
    if threads <= 1 {
        return qr_core::divergence::divergence_profile(oracle, radii, params, cap, budget);
    }
    let spec = oracle.spec();
    let max_r = radii.iter().copied().max().unwrap_or(0);
    let ball = grow_ball(spec, max_r, budget)?;
    let center = spec.identity();
    let mut points = Vec::with_capacity(radii.len());
    for &r in radii {
        let sphere = ball.sphere(r);
        let pairs = sphere_pairs(&ball, r, &params.strategy)?;
        let chunk = pairs.len().div_ceil(threads).max(1);
        let results: Vec<Result<Vec<DivergenceRecord>, DivergenceError>> =
            std::thread::scope(|scope| {
                let mut handles = Vec::new();
                for slice in pairs.chunks(chunk) {
                    let center = &center;
                    handles.push(scope.spawn(move || {
                        let mut out = Vec::with_capacity(slice.len());
                        for &(i, j) in slice {
                            out.push(div_pair(
                                oracle, &sphere[i], &sphere[j], center, params, cap, budget,
                            )?);
                        }
                        Ok(out)
                    }));
                }
                handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
            });
        let mut best: Option<DivergenceRecord> = None;
        for chunk in results {
            for rec in chunk? {
                if best.as_ref().map(|cur| rec.beats(cur)).unwrap_or(true) {
                    best = Some(rec);
                }
            }
        }
        if let Some(best) = best {
            points.push(ProfilePoint { r, best, exact: params.strategy.is_exact() });
        }
    }
    Ok(Profile { points, params: *params, cap, truncated: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use qr_core::divergence::{divergence_profile, PairStrategy};
    use qr_core::parse_group_spec;

    #[test]
    fn parallel_equals_sequential() {
        let spec = parse_group_spec("z^2").unwrap();
        let oracle = DistanceOracle::closed_form(spec).unwrap();
        let params = DivergenceParams::canonical(PairStrategy::AllSpherePairs);
        let seq = divergence_profile(&oracle, &[4, 6, 8], &params, 32, 100_000).unwrap();
        for threads in [2, 3, 8] {
            let par =
                parallel_divergence_profile(&oracle, &[4, 6, 8], &params, 32, 100_000, threads)
                    .unwrap();
            assert_eq!(par, seq, "threads = {threads}");
        }
    }

    #[test]
    fn sampled_strategy_is_thread_invariant() {
        let spec = parse_group_spec("heis").unwrap();
        let oracle = DistanceOracle::grown(&spec, 10, 500_000).unwrap();
        let params = DivergenceParams::canonical(PairStrategy::Sample { count: 40, seed: 42 });
        let seq = divergence_profile(&oracle, &[4, 5], &params, 20, 500_000).unwrap();
        let par = parallel_divergence_profile(&oracle, &[4, 5], &params, 20, 500_000, 4).unwrap();
        assert_eq!(par, seq);
    }
}
