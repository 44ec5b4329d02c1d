use excursion_core::pickands::*;
use std::time::Instant;
fn main() {
    for (a, n, k, sp, reps) in [(2.0, 1, 8.0, 0.05, 10000), (2.0, 1, 4.0, 0.05, 10000), (1.0, 1, 8.0, 0.05, 10000), (2.0, 2, 4.0, 0.1, 5000), (1.0, 2, 4.0, 0.1, 5000)] {
        let t = Instant::now();
        let c = PickandsConfig { alpha: a, dim: n, k, spacing: sp, reps, seed: 42, estimator: PickandsEstimator::ExtremalRatio };
        let e = estimate_pickands(&c).unwrap();
        println!("{a} {n} {k} {sp}: {} ± {} jitter {} ({:?})", e.estimate, e.stderr, e.jitter, t.elapsed());
    }
}
