use lookahead_core::objective::kkt_stationarity_telescoped;
use lookahead_core::solver::stable_ratio;
use lookahead_core::{
    brute_force_oracle, epsilon_n, eval_t_infinity, eval_t_n, kkt_residuals, offline_bound,
    recursion_step, solve_finite, solve_infinite, verify_structure, AllocationSequence,
    ShootingSignal, SystemParams, DEFAULT_TOL,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn base() -> SystemParams {
    SystemParams::new(0.3, 0.5, 100.0, 4).unwrap()
}

fn random_params(rng: &mut ChaCha8Rng) -> SystemParams {
    SystemParams::new(
        rng.random_range(0.05..0.95),
        rng.random_range(0.1..5.0),
        rng.random_range(1.0..200.0),
        rng.random_range(1..=10),
    )
    .unwrap()
}

/// Bisection on ξ_1 with the forward recursion, classifying each trajectory
/// by how it fails or by the sign of ξ_N - R_N/w. Only usable for short
/// horizons: the forward map amplifies rounding error geometrically.
fn forward_shooting(params: &SystemParams, n: usize) -> Vec<f64> {
    let b = params.battery_capacity();
    let w = params.window() as f64;
    let classify = |first: f64| -> (bool, Vec<f64>) {
        let mut values = vec![first];
        let mut consumed = first;
        for _ in 1..n {
            match recursion_step(params, *values.last().unwrap(), consumed) {
                Ok(next) => {
                    consumed += next;
                    values.push(next);
                }
                Err(ShootingSignal::TooLarge) => return (true, values),
                Err(ShootingSignal::TooSmall) => return (false, values),
            }
        }
        if consumed > b {
            return (true, values);
        }
        (*values.last().unwrap() > (b - consumed) / w, values)
    };
    let (mut lo, mut hi) = (0.0, b);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if classify(mid).0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    classify(lo).1
}

#[test]
fn backward_solver_agrees_with_forward_shooting() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut cases = vec![base()];
    cases.extend((0..5).map(|_| random_params(&mut rng)));
    for params in cases {
        for n in 1..=8 {
            let solved = solve_finite(&params, n, DEFAULT_TOL).unwrap();
            let forward = forward_shooting(&params, n);
            assert_eq!(forward.len(), n, "{params:?} n={n}");
            for (a, b) in solved.xi.values().iter().zip(&forward) {
                assert!(
                    (a - b).abs() <= 1e-7 * params.battery_capacity(),
                    "{params:?} n={n}: {a} vs {b}"
                );
            }
        }
    }
}

#[test]
fn one_term_equals_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let params = random_params(&mut rng);
        let b = params.battery_capacity();
        let xi = solve_finite(&params, 1, DEFAULT_TOL).unwrap().xi;
        let expected = b / (params.window() as f64 + 1.0);
        assert!((xi.values()[0] - expected).abs() <= 1e-10 * b);
    }
}

#[test]
fn frozen_objective_values() {
    // Reference values from a 40-digit evaluation of the four-term sum.
    let params = base();
    let one = AllocationSequence::new(vec![20.0], 100.0).unwrap();
    assert!((eval_t_n(&params, &one).unwrap() - 1.680_227_414_387_941_1).abs() < 1e-14);
    let two = AllocationSequence::new(vec![23.5, 17.25], 100.0).unwrap();
    assert!((eval_t_n(&params, &two).unwrap() - 1.728_601_601_479_300_6).abs() < 1e-14);
    let offline = offline_bound(&params, 1e-14).unwrap();
    assert!((offline - 1.823_553_931_834_044_2).abs() < 1e-13);
}

#[test]
fn t_n_is_t_infinity_with_zero_tail() {
    let params = base();
    let solved = solve_finite(&params, 6, DEFAULT_TOL).unwrap().xi;
    for tol in [1e-4, 1e-8, 1e-12] {
        let finite = eval_t_n(&params, &solved).unwrap();
        let infinite = eval_t_infinity(&params, &solved, tol).unwrap();
        assert!((finite - infinite).abs() < tol);
    }
}

#[test]
fn oracle_matches_solver() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut cases = vec![base()];
    cases.extend((0..3).map(|_| random_params(&mut rng)));
    for params in cases {
        let b = params.battery_capacity();
        for n in 1..=3 {
            let solved = solve_finite(&params, n, DEFAULT_TOL).unwrap();
            let oracle = brute_force_oracle(&params, n, 1e-10).unwrap();
            let t_solver = eval_t_n(&params, &solved.xi).unwrap();
            let t_oracle = eval_t_n(&params, &oracle).unwrap();
            assert!((t_solver - t_oracle).abs() <= 1e-6 * t_solver.abs());
            assert!(t_solver >= t_oracle - 1e-14);
            for (a, o) in solved.xi.values().iter().zip(oracle.values()) {
                assert!((a - o).abs() <= 1e-4 * b, "{params:?} n={n}: {a} vs {o}");
            }
        }
    }
}

#[test]
fn oracle_beats_random_admissible_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let params = random_params(&mut rng);
    let b = params.battery_capacity();
    let best = eval_t_n(&params, &brute_force_oracle(&params, 2, 1e-10).unwrap()).unwrap();
    for _ in 0..1000 {
        let x1 = rng.random_range(0.0..b);
        let x2 = rng.random_range(0.0..(b - x1));
        let point = AllocationSequence::new(vec![x1, x2], b).unwrap();
        assert!(best >= eval_t_n(&params, &point).unwrap());
    }
}

#[test]
fn oracle_kkt_residual_shrinks_with_tolerance() {
    let params = base();
    let loose = brute_force_oracle(&params, 3, 1e-3).unwrap();
    let tight = brute_force_oracle(&params, 3, 1e-9).unwrap();
    let loose = kkt_residuals(&params, &loose).unwrap().relative_max();
    let tight = kkt_residuals(&params, &tight).unwrap().relative_max();
    assert!(tight < loose, "{tight} vs {loose}");
    assert!(tight < 1e-5);
}

#[test]
fn kkt_certificate_of_solver_output() {
    let params = base();
    let solved = solve_finite(&params, 3, DEFAULT_TOL).unwrap();
    let report = kkt_residuals(&params, &solved.xi).unwrap();
    assert!(report.max_abs_residual < 1e-8);
    assert_eq!(report.stationarity.len(), 3);

    let mut bumped = solved.xi.values().to_vec();
    bumped[0] += 1.0;
    let bumped = AllocationSequence::new(bumped, 100.0).unwrap();
    assert!(kkt_residuals(&params, &bumped).unwrap().max_abs_residual > 1e-5);
}

#[test]
fn kkt_rows_direct_and_telescoped_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..10 {
        let params = random_params(&mut rng);
        let b = params.battery_capacity();
        let n = rng.random_range(1..12);
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
        let scale = rng.random_range(0.1..0.99) * b / raw.iter().sum::<f64>();
        let xi = AllocationSequence::new(raw.iter().map(|x| x * scale).collect(), b).unwrap();
        let direct = kkt_residuals(&params, &xi).unwrap().stationarity;
        let telescoped = kkt_stationarity_telescoped(&params, &xi).unwrap();
        for (d, t) in direct.iter().zip(&telescoped) {
            assert!((d - t).abs() < 1e-12, "{d} vs {t}");
        }
    }
}

#[test]
fn finite_solutions_tighten_with_horizon() {
    let params = base();
    let w = params.window() as f64;
    let b = params.battery_capacity();
    let reports: Vec<_> = (1..=30)
        .map(|n| solve_finite(&params, n, DEFAULT_TOL).unwrap())
        .collect();
    for pair in reports.windows(2) {
        assert!(pair[1].objective > pair[0].objective);
        assert!(pair[1].xi.residual() < pair[0].xi.residual());
    }
    for (n, report) in (1..).zip(&reports) {
        assert!(report.xi.residual() < w * b / n as f64);
        assert!(verify_structure(&params, &report.xi, report.horizon).all_hold());
    }
    // Each fixed index decreases with the horizon.
    for j in 0..10 {
        for pair in reports[j..].windows(2) {
            assert!(pair[1].xi.values()[j] < pair[0].xi.values()[j]);
        }
    }
}

#[test]
fn finite_solutions_converge_from_above_to_infinite_one() {
    let params = base();
    let limit = solve_infinite(&params, DEFAULT_TOL).unwrap();
    let mut previous_gap = f64::INFINITY;
    for n in [5, 10, 20, 40, 80, 160] {
        let finite = solve_finite(&params, n, DEFAULT_TOL).unwrap();
        let gap = finite
            .xi
            .values()
            .iter()
            .zip(limit.xi.values())
            .map(|(f, l)| {
                assert!(f >= l);
                f - l
            })
            .fold(0.0, f64::max);
        assert!(gap < previous_gap);
        previous_gap = gap;
        // A few ulps of slack once ε_N drops below double resolution.
        let slack = 8.0 * f64::EPSILON * limit.objective;
        assert!(limit.objective - finite.objective <= epsilon_n(&params, n) + slack);
    }
    assert!(previous_gap < 1e-9);
}

#[test]
fn infinite_solution_structure() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let mut cases = vec![base()];
    cases.extend((0..8).map(|_| random_params(&mut rng)));
    for params in cases {
        let report = solve_infinite(&params, DEFAULT_TOL).unwrap();
        let b = params.battery_capacity();
        assert!(report.xi.residual() < 1e-8 * b);
        assert!(report.max_recursion_residual < 1e-10);
        let structure = verify_structure(&params, &report.xi, report.horizon);
        assert!(structure.all_hold(), "{params:?}: {structure:?}");
        assert!(report.bracket_width_final <= DEFAULT_TOL);
        assert!(offline_bound(&params, 1e-13).unwrap() >= report.objective);
    }
}

#[test]
fn optimum_grows_with_window() {
    let base = base();
    let values: Vec<f64> = (1..=12)
        .map(|w| {
            solve_infinite(&base.with_window(w).unwrap(), DEFAULT_TOL)
                .unwrap()
                .objective
        })
        .collect();
    for pair in values.windows(2) {
        assert!(pair[1] > pair[0]);
    }
}

#[test]
fn drought_tail_matches_stable_direction() {
    let params = base();
    let b = params.battery_capacity();
    let report = solve_infinite(&params, DEFAULT_TOL).unwrap();
    let values = report.xi.values();
    let residuals = report.xi.residuals();
    // Deep in the tail R_j is lost to cancellation in B - Σξ, so compare
    // where the residual is small but still well resolved.
    let j = residuals.iter().position(|&r| r < 1e-5 * b).unwrap();
    let s = stable_ratio(&params);
    assert!((values[j] / residuals[j] - s).abs() < 1e-5 * s);
}
