use miattack_core::bsc::{
    bsc_gradient, bsc_grid_oracle, bsc_mi, eq8_joint, solve_bsc, BscJoint, BscSolverConfig, FlipProbs,
};
use miattack_core::info::{
    discrete_mi, empirical_gaussian_mi, gaussian_entropy, gaussian_mi, svd, CovarianceMatrix, DiscreteJoint,
    JointGaussian,
};
use miattack_core::projection::{
    falling_bar, min_mi, min_mi_from_spectrum, optimal_perturbation_law, waterfill_bisect_oracle, ProjectionProblem,
};
use miattack_core::scalar::{grid_oracle, mi_curve, solve, ScalarProblem, ScalarSolverConfig};
use miattack_core::subset::{brute_force_subset_oracle, choose_subset, SubsetProblem};
use miattack_core::RngStream;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn random_matrix(rng: &mut RngStream, n: usize, m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, m, |_, _| rng.standard_normal())
}

fn random_orthogonal(rng: &mut RngStream, n: usize) -> DMatrix<f64> {
    random_matrix(rng, n, n).qr().q()
}

fn random_spd(rng: &mut RngStream, n: usize) -> DMatrix<f64> {
    let a = random_matrix(rng, n, n);
    &a * a.transpose() + DMatrix::identity(n, n) * 0.1
}

fn random_joint(rng: &mut RngStream) -> BscJoint {
    let w: Vec<f64> = (0..4).map(|_| 0.02 + rng.uniform()).collect();
    BscJoint::normalized(w[0], w[1], w[2], w[3]).unwrap()
}

// ---- shared analytics ----

#[test]
fn gaussian_mi_invariant_under_blockwise_bijections() {
    let mut rng = RngStream::new(101, 0);
    for _ in 0..50 {
        let du = 1 + (rng.uniform() * 3.0) as usize;
        let dy = 1 + (rng.uniform() * 3.0) as usize;
        let n = du + dy;
        let cov = random_spd(&mut rng, n);
        let base =
            gaussian_mi(&JointGaussian::stacked(CovarianceMatrix::new(cov.clone()).unwrap(), du).unwrap()).unwrap();
        let mut t = DMatrix::zeros(n, n);
        t.view_mut((0, 0), (du, du)).copy_from(&(random_matrix(&mut rng, du, du) + DMatrix::identity(du, du) * 3.0));
        t.view_mut((du, du), (dy, dy)).copy_from(&(random_matrix(&mut rng, dy, dy) + DMatrix::identity(dy, dy) * 3.0));
        let moved = &t * cov * t.transpose();
        let moved = (&moved + moved.transpose()) * 0.5;
        let after = gaussian_mi(&JointGaussian::stacked(CovarianceMatrix::new(moved).unwrap(), du).unwrap()).unwrap();
        assert!((base - after).abs() < 1e-8, "{base} vs {after}");
    }
}

#[test]
fn gaussian_mi_equals_log_determinant_formula() {
    let mut rng = RngStream::new(102, 0);
    for _ in 0..50 {
        let cov = random_spd(&mut rng, 4);
        let ld = |m: DMatrix<f64>| m.determinant().ln();
        let expected = 0.5
            * (ld(cov.view((0, 0), (2, 2)).into_owned()) + ld(cov.view((2, 2), (2, 2)).into_owned()) - ld(cov.clone()));
        let mi = gaussian_mi(&JointGaussian::stacked(CovarianceMatrix::new(cov).unwrap(), 2).unwrap()).unwrap();
        assert!((mi - expected).abs() < 1e-9);
    }
}

#[test]
fn entropy_is_additive_over_diagonal() {
    let mut rng = RngStream::new(103, 0);
    for _ in 0..100 {
        let v: Vec<f64> = (0..5).map(|_| 0.01 + 10.0 * rng.uniform()).collect();
        let joint = gaussian_entropy(&CovarianceMatrix::diagonal(&v).unwrap()).unwrap();
        let sum: f64 = v.iter().map(|x| gaussian_entropy(&CovarianceMatrix::diagonal(&[*x]).unwrap()).unwrap()).sum();
        assert!((joint - sum).abs() < 1e-10);
    }
}

#[test]
fn svd_contract_on_random_matrices() {
    let mut rng = RngStream::new(104, 0);
    for _ in 0..50 {
        let n = 1 + (rng.uniform() * 8.0) as usize;
        let m = 1 + (rng.uniform() * 8.0) as usize;
        let h = random_matrix(&mut rng, n, m);
        let r = svd(&h).unwrap();
        let k = r.rank();
        assert!((r.q.transpose() * &r.q - DMatrix::identity(k, k)).amax() < 1e-9);
        assert!((r.v.transpose() * &r.v - DMatrix::identity(k, k)).amax() < 1e-9);
        assert!((r.reconstruct() - &h).norm() <= 1e-8 * h.norm());
        assert!(r.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }
    // rank-deficient input keeps only the numerical rank
    let u = random_matrix(&mut rng, 6, 2);
    let w = random_matrix(&mut rng, 2, 5);
    assert_eq!(svd(&(u * w)).unwrap().rank(), 2);
}

#[test]
fn empirical_mi_converges_for_random_joints() {
    let mut rng = RngStream::new(105, 0);
    let n = 100_000;
    for trial in 0..5 {
        let du = 1 + trial % 3;
        let dy = 1 + (trial + 1) % 3;
        let dim = du + dy;
        let cov = random_spd(&mut rng, dim);
        let truth =
            gaussian_mi(&JointGaussian::stacked(CovarianceMatrix::new(cov.clone()).unwrap(), du).unwrap()).unwrap();
        let chol = cov.cholesky().unwrap().unpack();
        let mut draws = DMatrix::zeros(n, dim);
        let mut sampler = RngStream::new(106, trial as u64);
        for r in 0..n {
            let z = DVector::from_fn(dim, |_, _| sampler.standard_normal());
            draws.row_mut(r).copy_from(&(&chol * z).transpose());
        }
        let est =
            empirical_gaussian_mi(&draws.columns(0, du).into_owned(), &draws.columns(du, dy).into_owned()).unwrap();
        let ok = if truth < 0.2 { (est - truth).abs() < 0.01 } else { (est - truth).abs() < 0.05 * truth };
        assert!(ok, "truth {truth}, estimate {est}");
    }
}

proptest! {
    #[test]
    fn discrete_mi_matches_direct_sum(w in prop::array::uniform4(0.0f64..1.0)) {
        prop_assume!(w.iter().sum::<f64>() > 1e-3);
        let total: f64 = w.iter().sum();
        let t = w.map(|x| x / total);
        let j = DiscreteJoint::from_row_slice(2, 2, &t).unwrap();
        let pu = [t[0] + t[1], t[2] + t[3]];
        let py = [t[0] + t[2], t[1] + t[3]];
        let mut brute = 0.0;
        for u in 0..2 {
            for y in 0..2 {
                let p = t[2 * u + y];
                if p > 0.0 {
                    brute += p * (p / (pu[u] * py[y])).ln();
                }
            }
        }
        prop_assert!((discrete_mi(&j) - brute.max(0.0)).abs() < 1e-12);
    }
}

// ---- scalar attack ----

#[test]
fn scalar_oracle_dominance_and_psd() {
    let mut rng = RngStream::new(201, 0);
    let cfg = ScalarSolverConfig::default();
    for i in 0..30 {
        let p =
            ScalarProblem::new(0.05 + 2.0 * rng.uniform(), 0.05 + 2.0 * rng.uniform(), 2.0 * rng.uniform()).unwrap();
        let s = solve(&p, &cfg).unwrap();
        for res in [2, 17, 100, 333, 500] {
            let g = grid_oracle(&p, res).unwrap();
            assert!(s.mi_nats <= g.mi_nats + 1e-9, "trial {i} res {res}: {} > {}", s.mi_nats, g.mi_nats);
        }
        assert!(s.covariance().unwrap().smallest_eigenvalue() >= -1e-9);
        assert!(s.x * s.x / p.a2 + s.y * s.y / p.sigma2 <= p.d + 1e-9);
        // larger Var(Y) only helps, so a nonzero optimum never pulls y negative
        if s.ratio > 1e-12 {
            assert!(s.y >= -1e-9, "trial {i}: y = {}", s.y);
        }
        if p.d >= p.a2 {
            assert!(s.mi_nats <= 1e-6);
        }
    }
}

#[test]
fn scalar_curve_is_nonincreasing() {
    let cfg = ScalarSolverConfig::default();
    let ds: Vec<f64> = (0..=20).map(|i| i as f64 * 0.06).collect();
    for (a2, s2) in [(1.0, 0.1), (0.75, 1.0), (0.25, 0.5), (2.0, 0.3)] {
        let c = mi_curve(a2, s2, &ds, &cfg).unwrap();
        assert!((c[0].mi_nats - 0.5 * (a2 / s2).ln_1p()).abs() < 1e-9);
        for w in c.windows(2) {
            assert!(w[1].mi_nats <= w[0].mi_nats + 1e-6);
        }
    }
}

// ---- projection attack ----

fn random_spectrum(rng: &mut RngStream, k: usize) -> Vec<f64> {
    let mut s: Vec<f64> = (0..k).map(|_| 1e-3 + 5.0 * rng.uniform()).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

#[test]
fn falling_bar_matches_bisection_and_conserves_budget() {
    let mut rng = RngStream::new(301, 0);
    for _ in 0..1000 {
        let k = 1 + (rng.uniform() * 50.0) as usize;
        let s = random_spectrum(&mut rng, k);
        let total: f64 = s.iter().sum();
        let d = total * (1e-4 + (1.0 - 1e-4) * rng.uniform());
        let fb = falling_bar(&s, d).unwrap();
        let bi = waterfill_bisect_oracle(&s, d, 1e-13).unwrap();
        assert!((fb.tau - bi.tau).abs() < 1e-8);
        for (x, y) in fb.budgets.iter().zip(&bi.budgets) {
            assert!((x - y).abs() < 1e-8);
        }
        assert!((fb.total() - d).abs() < 1e-9 * total.max(1.0));
        for (b, v) in fb.budgets.iter().zip(&s) {
            assert!(*b >= 0.0 && *b <= *v);
            assert!((b - fb.tau.min(*v)).abs() < 1e-9);
        }
    }
}

#[test]
fn min_mi_depends_only_on_singular_values() {
    let mut rng = RngStream::new(302, 0);
    for _ in 0..30 {
        let n = 2 + (rng.uniform() * 6.0) as usize;
        let m = 2 + (rng.uniform() * 6.0) as usize;
        let h = random_matrix(&mut rng, n, m);
        let d = 0.4 * h.norm_squared();
        let rotated = random_orthogonal(&mut rng, n) * &h * random_orthogonal(&mut rng, m);
        let a = min_mi(&ProjectionProblem::new(h, d).unwrap()).unwrap();
        let b = min_mi(&ProjectionProblem::new(rotated, d).unwrap()).unwrap();
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn min_mi_is_strictly_decreasing_below_saturation() {
    let mut rng = RngStream::new(303, 0);
    for _ in 0..50 {
        let k = 1 + (rng.uniform() * 10.0) as usize;
        let s = random_spectrum(&mut rng, k);
        let total: f64 = s.iter().sum();
        let mut prev = f64::INFINITY;
        for i in 1..=40 {
            let mi = min_mi_from_spectrum(&s, total * i as f64 / 40.0).unwrap();
            if i < 40 {
                assert!(mi < prev);
            } else {
                assert_eq!(mi, 0.0);
            }
            prev = mi;
        }
    }
}

#[test]
fn perturbation_law_identities_and_closed_form() {
    let mut rng = RngStream::new(304, 0);
    for _ in 0..40 {
        let n = 1 + (rng.uniform() * 8.0) as usize;
        let m = 1 + (rng.uniform() * 8.0) as usize;
        let h = random_matrix(&mut rng, n, m);
        let frac = 0.05 + 0.9 * rng.uniform();
        let s = 0.5 + rng.uniform();
        let p = ProjectionProblem::with_source_variance(h.clone(), frac * s * h.norm_squared(), s).unwrap();
        let law = optimal_perturbation_law(&p).unwrap();
        for i in 0..law.rank() {
            assert!((law.perturbation_variance(i) - law.budgets[i]).abs() < 1e-9);
            assert!((law.cross_covariance(i) + law.budgets[i]).abs() < 1e-9);
            assert!(law.noise_vars[i] >= 0.0);
        }
        let closed = min_mi(&p).unwrap();
        assert!((law.analytic_mi().unwrap() - closed).abs() < 1e-9, "{} vs {closed}", law.analytic_mi().unwrap());
    }
}

#[test]
fn sampled_distortion_matches_budget() {
    let mut rng = RngStream::new(305, 0);
    let h = random_matrix(&mut rng, 4, 6);
    let d = 0.3 * h.norm_squared();
    let law = optimal_perturbation_law(&ProjectionProblem::new(h, d).unwrap()).unwrap();
    let mut draws = RngStream::new(306, 0);
    let n = 100_000;
    let mut total = 0.0;
    for _ in 0..n {
        let u = DVector::from_fn(6, |_, _| draws.standard_normal());
        total += miattack_core::projection::sample_attack(&law, &u, &mut draws).unwrap().norm_squared();
    }
    assert!((total / n as f64 - d).abs() < 0.02 * d);
}

// ---- binary attack ----

#[test]
fn bsc_two_routes_agree() {
    let mut rng = RngStream::new(401, 0);
    for _ in 0..1000 {
        let j = random_joint(&mut rng);
        let f = FlipProbs::from_array([rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()]);
        let table = discrete_mi(&eq8_joint(&j, &f).unwrap());
        assert!((bsc_mi(&j, &f) - table).abs() < 1e-12);
    }
}

#[test]
fn bsc_relabeling_symmetry() {
    let mut rng = RngStream::new(402, 0);
    for _ in 0..1000 {
        let j = random_joint(&mut rng);
        let f = FlipProbs::from_array([rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()]);
        assert!((bsc_mi(&j, &f) - bsc_mi(&j.relabel_x(), &f.relabel_x())).abs() < 1e-12);
    }
}

#[test]
fn bsc_gradient_against_finite_differences() {
    let mut rng = RngStream::new(403, 0);
    for _ in 0..1000 {
        let j = random_joint(&mut rng);
        let p = [0.0; 4].map(|_| 0.02 + 0.96 * rng.uniform());
        let g = bsc_gradient(&j, &FlipProbs::from_array(p)).unwrap();
        for i in 0..4 {
            let (mut up, mut dn) = (p, p);
            up[i] += 1e-6;
            dn[i] -= 1e-6;
            let fd = (bsc_mi(&j, &FlipProbs::from_array(up)) - bsc_mi(&j, &FlipProbs::from_array(dn))) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-5);
        }
    }
}

#[test]
fn bsc_solution_nonincreasing_in_budget() {
    let cfg = BscSolverConfig::default();
    for j in [
        BscJoint::new(0.45, 0.05, 0.05, 0.45).unwrap(),
        BscJoint::new(0.4, 0.1, 0.1, 0.4).unwrap(),
        BscJoint::new(0.6, 0.1, 0.2, 0.1).unwrap(),
    ] {
        let mut prev = f64::INFINITY;
        for i in 0..=12 {
            let s = solve_bsc(&j, i as f64 * 0.05, &cfg).unwrap();
            assert!(s.mi_nats <= prev + 1e-9);
            prev = s.mi_nats;
        }
        assert!(prev < 1e-9);
    }
}

#[test]
fn bsc_grid_refines_on_nested_meshes() {
    let j = BscJoint::new(0.4, 0.1, 0.1, 0.4).unwrap();
    let s = solve_bsc(&j, 0.15, &BscSolverConfig::default()).unwrap();
    let mut prev = f64::INFINITY;
    for res in [3, 5, 9, 17, 33] {
        let g = bsc_grid_oracle(&j, 0.15, res).unwrap();
        assert!(g.mi_nats <= prev + 1e-15);
        assert!(s.mi_nats <= g.mi_nats + 1e-6);
        prev = g.mi_nats;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]
    #[test]
    fn bsc_mi_is_midpoint_convex(
        w in prop::array::uniform4(0.0f64..1.0),
        p in prop::array::uniform4(0.0f64..=1.0),
        q in prop::array::uniform4(0.0f64..=1.0),
    ) {
        prop_assume!(w.iter().sum::<f64>() > 1e-3);
        let j = BscJoint::normalized(w[0], w[1], w[2], w[3]).unwrap();
        let mid: [f64; 4] = std::array::from_fn(|i| 0.5 * (p[i] + q[i]));
        let f = |x: [f64; 4]| bsc_mi(&j, &FlipProbs::from_array(x));
        prop_assert!(f(mid) <= 0.5 * (f(p) + f(q)) + 1e-10);
    }
}

// ---- subset attack ----

#[test]
fn subset_matches_enumeration_and_decreases_in_k() {
    let mut rng = RngStream::new(501, 0);
    for _ in 0..500 {
        let m = 2 + (rng.uniform() * 11.0) as usize;
        // above 1/(2 pi e) every coordinate carries positive entropy
        let v: Vec<f64> = (0..m).map(|_| 0.1 + 3.0 * rng.uniform()).collect();
        let mut prev = f64::INFINITY;
        for k in 0..m {
            let p = SubsetProblem::new(v.clone(), k).unwrap();
            let fast = choose_subset(&p);
            let slow = brute_force_subset_oracle(&p).unwrap();
            assert!((fast.residual_mi_nats - slow.residual_mi_nats).abs() < 1e-12);
            assert!(fast.residual_mi_nats < prev);
            prev = fast.residual_mi_nats;
        }
    }
}

#[test]
fn subset_is_permutation_equivariant() {
    let mut rng = RngStream::new(502, 0);
    for _ in 0..100 {
        let m = 3 + (rng.uniform() * 8.0) as usize;
        let v: Vec<f64> = (0..m).map(|_| 0.05 + 3.0 * rng.uniform()).collect();
        let k = (rng.uniform() * m as f64) as usize % m;
        let mut perm: Vec<usize> = (0..m).collect();
        for i in (1..m).rev() {
            perm.swap(i, (rng.uniform() * (i + 1) as f64) as usize % (i + 1));
        }
        let permuted: Vec<f64> = perm.iter().map(|&i| v[i]).collect();
        let a = choose_subset(&SubsetProblem::new(v.clone(), k).unwrap());
        let b = choose_subset(&SubsetProblem::new(permuted, k).unwrap());
        let mut mapped: Vec<usize> = b.attacked.iter().map(|&i| perm[i]).collect();
        mapped.sort_unstable();
        assert_eq!(mapped, a.attacked);
        assert!((a.residual_mi_nats - b.residual_mi_nats).abs() < 1e-12);
    }
}
