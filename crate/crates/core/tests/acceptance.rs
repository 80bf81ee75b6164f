//! Acceptance checks, one PASS/FAIL line each.
//!
//! Runs as a plain binary (`harness = false`). The process fails when a
//! check fails that is not listed in `KNOWN_FAILURES`.

mod common;

use common::*;
use rand::Rng;
use serde_json::Value;
use std::time::{Duration, Instant};
use wdro::calibrate::{hinge_coverage, CoverageConfig};
use wdro::cli;
use wdro::convex::{NormSpec, SetSpec};
use wdro::learn::{
    self, dro_objective_crosscheck, dro_train_classifier, dro_train_regressor, Dataset, TrainOptions, UnivariateLoss,
};
use wdro::mmse::{fw_solve, mmse_gradient, mmse_objective, JointMoments};
use wdro::shrinkage::{shrink_eigenvalue, wasserstein_shrinkage};
use wdro::transport::{gelbrich_distance, wasserstein_p};
use wdro::wc_empirical::{
    extremal_pwa, extremal_quadratic, lipschitz_modulus_pwa, wc_risk_pwa, wc_risk_pwa_lp, wc_risk_quadratic, AffinePiece,
    BallSpec, ExtremalReport, PiecewiseAffineLoss, QuadraticLoss,
};
use wdro::wc_moments::{gelbrich_risk_quadratic, GelbrichBall};
use wdro::{DiscreteDistribution, Mat, MomentPair, Vector};

/// Checks whose stated tolerance is tighter than the exact answer allows.
/// They still print FAIL but do not fail the run. Check 1: the family
/// member at `n` has risk exactly `eps - 1/n`, above the `2 eps / n` bound
/// once `eps < 1/2`.
const KNOWN_FAILURES: &[u32] = &[1];

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64, what: &str) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || format!("{what} took {:.2}s, limit {limit_s}s", elapsed.as_secs_f64()))
}

fn hinge_shift() -> PiecewiseAffineLoss {
    PiecewiseAffineLoss::new(vec![AffinePiece::new(vec![0.0], 0.0), AffinePiece::new(vec![1.0], -1.0)]).unwrap()
}

fn origin() -> DiscreteDistribution {
    DiscreteDistribution::dirac(Vector::zeros(1))
}

fn non_existence() -> Check {
    let start = Instant::now();
    let loss = hinge_shift();
    let n = 1e6;
    let mut worst = 0.0f64;
    let mut errors = Vec::new();
    for eps in [0.1, 0.5, 1.0, 3.0] {
        let ball = BallSpec::type1(eps, NormSpec::l1());
        let v = wc_risk_pwa(&loss, &origin(), &ball).map_err(|e| e.to_string())?.value;
        ensure((v - eps).abs() <= 1e-9, || format!("eps {eps}: value {v}"))?;
        let (_, report) = extremal_pwa(&loss, &origin(), &ball).map_err(|e| e.to_string())?;
        let ExtremalReport::Asymptotic { family } = report else {
            return Err(format!("eps {eps}: expected an asymptotic family"));
        };
        let member = family.at(n).merged(0.0);
        let far = member.iter().find(|(x, _)| x[0] > 0.0).ok_or("no escaping atom")?;
        ensure((far.0[0] - eps * n).abs() <= 1e-6 * eps * n && (far.1 - 1.0 / n).abs() <= 1e-15, || {
            format!("eps {eps}: escaping atom {} with weight {}", far.0[0], far.1)
        })?;
        let dev = (loss.expected(&member) - eps).abs();
        worst = worst.max(dev);
        let bound = 2.0 * eps / n + 1e-9;
        if dev > bound {
            errors.push(format!("eps {eps}: risk deviation {dev:.3e} > {bound:.3e}"));
        }
    }
    within(start.elapsed(), 1.0, "all radii")?;
    if errors.is_empty() {
        Ok(format!("max deviation at n=1e6 {worst:.2e}"))
    } else {
        Err(errors.join("; "))
    }
}

fn n_atoms() -> Check {
    let loss = hinge_shift();
    let support = SetSpec::Polyhedron { c: Mat::from_element(1, 1, 1.0), d: Vector::from_element(1, 2.0) };
    for eps in [0.5, 1.0, 1.5] {
        let ball = BallSpec::new(eps, 1.0, NormSpec::l1(), support.clone());
        let v = wc_risk_pwa(&loss, &origin(), &ball).map_err(|e| e.to_string())?.value;
        ensure((v - eps / 2.0).abs() <= 1e-9, || format!("eps {eps}: value {v}"))?;
        let (_, report) = extremal_pwa(&loss, &origin(), &ball).map_err(|e| e.to_string())?;
        let ExtremalReport::Attained { distribution } = report else {
            return Err(format!("eps {eps}: expected an attained distribution"));
        };
        let d = distribution.merged(1e-12).pruned(1e-12);
        let expect = [(0.0, 1.0 - eps / 2.0), (2.0, eps / 2.0)];
        let weight_at = |loc: f64| d.iter().filter(|(x, _)| (x[0] - loc).abs() <= 1e-9).map(|(_, w)| w).sum::<f64>();
        ensure(d.len() == 2 && expect.iter().all(|&(x, w)| (weight_at(x) - w).abs() <= 1e-9), || {
            format!("eps {eps}: got {:?}", d.iter().map(|(x, w)| (x[0], w)).collect::<Vec<_>>())
        })?;
    }
    Ok("3 radii".into())
}

fn lp_identity() -> Check {
    let mut r = rng(3);
    let mut worst = 0.0f64;
    let start = Instant::now();
    for t in 0..100 {
        let (n, m, j) = (r.random_range(1..=20), r.random_range(1..=5), r.random_range(1..=4));
        let samples = distribution(&mut r, n, m, 2.0);
        let loss = pwa(&mut r, m, j);
        let eps = r.random_range(0.0..2.0);
        let norm = [NormSpec::l1(), NormSpec::l2(), NormSpec::linf()][t % 3].clone();
        // polyhedral norms go through the full program with an empty constraint block
        let support =
            if norm.is_polyhedral() { SetSpec::Polyhedron { c: Mat::zeros(0, m), d: Vector::zeros(0) } } else { SetSpec::Whole };
        let ball = BallSpec::new(eps, 1.0, norm.clone(), support);
        let v = wc_risk_pwa_lp(&loss, &samples, &ball).map_err(|e| format!("instance {t}: {e}"))?.value;
        let expect = loss.expected(&samples) + eps * lipschitz_modulus_pwa(&loss, &norm);
        let d = (v - expect).abs();
        worst = worst.max(d);
        ensure(d <= 1e-8, || format!("instance {t}: |{v} - {expect}| = {d:.3e}"))?;
    }
    Ok(format!("max error {worst:.2e}, {:.2}s", start.elapsed().as_secs_f64()))
}

fn transport_duality() -> Check {
    let mut r = rng(4);
    let l2 = NormSpec::l2();
    let w = |a: &DiscreteDistribution, b: &DiscreteDistribution, p: f64| wasserstein_p(a, b, p, &l2).map_err(|e| e.to_string());
    let mut worst_gap = 0.0f64;
    for t in 0..100 {
        let m = r.random_range(1..=3);
        let a = {
            let k = r.random_range(1..=20);
            distribution(&mut r, k, m, 1.0)
        };
        let b = {
            let k = r.random_range(1..=20);
            distribution(&mut r, k, m, 1.0)
        };
        let c = {
            let k = r.random_range(1..=20);
            distribution(&mut r, k, m, 1.0)
        };
        let p = if t % 2 == 0 { 1.0 } else { 2.0 };
        let ab = w(&a, &b, p)?;
        worst_gap = worst_gap.max(ab.duality_gap.abs());
        ensure(ab.duality_gap.abs() <= 1e-8, || format!("instance {t}: gap {:.3e}", ab.duality_gap))?;
        let aa = w(&a, &a, p)?.distance;
        let ba = w(&b, &a, p)?.distance;
        let ac = w(&a, &c, p)?.distance;
        let bc = w(&b, &c, p)?.distance;
        ensure(aa <= 1e-8, || format!("instance {t}: W(a,a) = {aa}"))?;
        ensure((ab.distance - ba).abs() <= 1e-8, || format!("instance {t}: asymmetric {} vs {ba}", ab.distance))?;
        ensure(ac <= ab.distance + bc + 1e-8, || format!("instance {t}: triangle {ac} > {} + {bc}", ab.distance))?;
        let w1 = w(&a, &b, 1.0)?.distance;
        let w2 = w(&a, &b, 2.0)?.distance;
        ensure(w2 >= w1 - 1e-8, || format!("instance {t}: W2 {w2} < W1 {w1}"))?;
        let g = gelbrich_distance(&a.moments(), &b.moments()).map_err(|e| e.to_string())?;
        ensure(g <= w2 + 1e-8, || format!("instance {t}: Gelbrich {g} > W2 {w2}"))?;
    }
    Ok(format!("max gap {worst_gap:.2e}"))
}

fn type2(eps: f64) -> BallSpec {
    BallSpec::new(eps, 2.0, NormSpec::l2(), SetSpec::Whole)
}

fn quadratic_dual() -> Check {
    let loss = QuadraticLoss::new(Mat::identity(1, 1), Vector::zeros(1)).unwrap();
    let n = 1e6;
    for eps in [0.0, 0.1, 0.5, 1.0, 2.0, 5.0] {
        let v = wc_risk_quadratic(&loss, &origin(), &type2(eps)).map_err(|e| e.to_string())?.value;
        ensure((v - eps * eps).abs() <= 1e-9, || format!("eps {eps}: value {v}"))?;
        let (_, report) = extremal_quadratic(&loss, &origin(), &type2(eps)).map_err(|e| e.to_string())?;
        let member = match report {
            ExtremalReport::Attained { distribution } => distribution,
            ExtremalReport::Asymptotic { family } => family.at(n),
        };
        let risk = loss.expected(&member);
        ensure((risk - eps * eps).abs() <= (1.0 + eps * eps) / n + 1e-8, || format!("eps {eps}: member risk {risk}"))?;
        let dist = wasserstein_p(&member, &origin(), 2.0, &NormSpec::l2()).map_err(|e| e.to_string())?.distance;
        ensure(dist <= eps + 1e-8, || format!("eps {eps}: member outside the ball ({dist})"))?;
    }
    let mut r = rng(5);
    let mut worst = 0.0f64;
    for t in 0..50 {
        let m = r.random_range(1..=5);
        let samples = {
            let k = r.random_range(1..=10);
            distribution(&mut r, k, m, 2.0)
        };
        let q = uniform_vec(&mut r, m, 2.0);
        let eps = r.random_range(0.0..2.0);
        let loss = QuadraticLoss::new(Mat::zeros(m, m), q.clone()).unwrap();
        let v = wc_risk_quadratic(&loss, &samples, &type2(eps)).map_err(|e| e.to_string())?.value;
        let expect = 2.0 * q.dot(&samples.mean()) + 2.0 * eps * q.norm();
        let d = (v - expect).abs();
        worst = worst.max(d);
        ensure(d <= 1e-8, || format!("linear instance {t}: {v} vs {expect}"))?;
    }
    Ok(format!("linear max error {worst:.2e}"))
}

fn gelbrich_quadratic() -> Check {
    let loss = QuadraticLoss::new(Mat::identity(1, 1), Vector::zeros(1)).unwrap();
    let center = MomentPair::new(Vector::zeros(1), Mat::identity(1, 1)).unwrap();
    for eps in [0.1, 0.5, 1.0, 2.0] {
        let ball = GelbrichBall::new(center.clone(), eps).unwrap();
        let res = gelbrich_risk_quadratic(&loss, &ball).map_err(|e| e.to_string())?;
        let expect = (1.0 + eps) * (1.0 + eps);
        ensure((res.value - expect).abs() <= 1e-8, || format!("eps {eps}: value {}", res.value))?;
        ensure(res.extremal.mean[0].abs() <= 1e-8 && (res.extremal.cov[(0, 0)] - expect).abs() <= 1e-8, || {
            format!("eps {eps}: extremal ({}, {})", res.extremal.mean[0], res.extremal.cov[(0, 0)])
        })?;
    }
    let mut r = rng(6);
    let (mut gap, mut boundary) = (0.0f64, 0.0f64);
    for t in 0..100 {
        let m = r.random_range(2..=5);
        let loss = QuadraticLoss::new(indefinite(&mut r, m), uniform_vec(&mut r, m, 1.0)).unwrap();
        let center = moments(&mut r, m);
        let eps = r.random_range(0.05..2.0);
        let ball = GelbrichBall::new(center.clone(), eps).unwrap();
        let res = gelbrich_risk_quadratic(&loss, &ball).map_err(|e| format!("instance {t}: {e}"))?;
        let d = (res.primal_value - res.dual_value).abs();
        gap = gap.max(d);
        ensure(d <= 1e-7, || format!("instance {t}: primal {} dual {}", res.primal_value, res.dual_value))?;
        let dist = gelbrich_distance(&res.extremal, &center).map_err(|e| e.to_string())?;
        boundary = boundary.max((dist - eps).abs());
        ensure((dist - eps).abs() <= 1e-6, || format!("instance {t}: extremal at distance {dist}, radius {eps}"))?;
    }
    for t in 0..50 {
        let m = r.random_range(1..=4);
        let samples = {
            let k = r.random_range(m + 1..=12);
            empirical(&mut r, k, m, 1.5)
        };
        let loss = QuadraticLoss::new(indefinite(&mut r, m), uniform_vec(&mut r, m, 1.0)).unwrap();
        let eps = r.random_range(0.05..1.5);
        let empirical = wc_risk_quadratic(&loss, &samples, &type2(eps)).map_err(|e| format!("shared {t}: {e}"))?.value;
        let ball = GelbrichBall::new(samples.moments(), eps).unwrap();
        let moment = gelbrich_risk_quadratic(&loss, &ball).map_err(|e| format!("shared {t}: {e}"))?.value;
        ensure(moment >= empirical - 1e-8 * empirical.abs().max(1.0), || {
            format!("shared {t}: moment bound {moment} < empirical {empirical}")
        })?;
    }
    Ok(format!("max primal-dual {gap:.2e}, max boundary error {boundary:.2e}"))
}

fn shrinkage() -> Check {
    let start = Instant::now();
    let unit = MomentPair::new(Vector::zeros(1), Mat::identity(1, 1)).unwrap();
    let res = wasserstein_shrinkage(&unit, 1.0).map_err(|e| e.to_string())?;
    ensure((res.gamma - 0.5).abs() <= 1e-10 && (res.precision[(0, 0)] - 0.25).abs() <= 1e-10, || {
        format!("unit case gamma {} x {}", res.gamma, res.precision[(0, 0)])
    })?;
    let mut r = rng(7);
    let grid: Vec<f64> = (0..20).map(|k| 10f64.powf(-3.0 + 5.0 * k as f64 / 19.0)).collect();
    let mut worst_recovery = 0.0f64;
    for t in 0..20 {
        let m = r.random_range(1..=20);
        let cov = spd(&mut r, m, 0.5) / m as f64;
        let inv = cov.clone().try_inverse().ok_or("singular draw")?;
        let pair = MomentPair::new(Vector::zeros(m), cov).unwrap();
        let near = wasserstein_shrinkage(&pair, 1e-6).map_err(|e| e.to_string())?;
        let rel = (&near.precision - &inv).norm() / inv.norm();
        worst_recovery = worst_recovery.max(rel);
        ensure(rel <= 1e-4, || format!("instance {t}: recovery error {rel:.3e}"))?;

        let runs: Vec<_> =
            grid.iter().map(|&e| wasserstein_shrinkage(&pair, e)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
        for (k, res) in runs.iter().enumerate() {
            // larger sample eigenvalue, smaller precision eigenvalue
            ensure(res.eigen_map.windows(2).all(|w| w[0].0 >= w[1].0 && w[0].1 <= w[1].1 * (1.0 + 1e-12)), || {
                format!("instance {t}, eps {}: ordering broken", grid[k])
            })?;
            ensure(res.condition_number() >= 1.0 - 1e-12, || format!("instance {t}: condition number below one"))?;
            let x_back: Vec<f64> = res.eigen_map.iter().map(|&(l, _)| shrink_eigenvalue(l, res.gamma)).collect();
            ensure(x_back.iter().zip(&res.eigen_map).all(|(a, b)| a == &b.1), || {
                format!("instance {t}: eigen map inconsistent")
            })?;
        }
        for (k, pair) in runs.windows(2).enumerate() {
            let (a, b) = (&pair[0], &pair[1]);
            ensure(b.gamma <= a.gamma, || format!("instance {t}: gamma increases at eps {}", grid[k + 1]))?;
            ensure(a.eigen_map.iter().zip(&b.eigen_map).all(|(x, y)| y.1 <= x.1 * (1.0 + 1e-12)), || {
                format!("instance {t}: eigenvalue increases at eps {}", grid[k + 1])
            })?;
            ensure(b.condition_number() <= a.condition_number() * (1.0 + 1e-10), || {
                format!("instance {t}: condition number increases at eps {}", grid[k + 1])
            })?;
        }
        let last = runs.last().unwrap().condition_number();
        let first = runs[0].condition_number();
        ensure(last - 1.0 <= 0.1 * (first - 1.0) + 1e-12, || format!("instance {t}: condition number {first} -> {last}"))?;
    }
    within(start.elapsed(), 5.0, "shrinkage suite")?;
    Ok(format!("max recovery error {worst_recovery:.2e}, {:.2}s", start.elapsed().as_secs_f64()))
}

fn joint(r: &mut rand_chacha::ChaCha8Rng, mx: usize, my: usize) -> JointMoments {
    JointMoments::new(mx, my, moments(r, mx + my)).unwrap()
}

fn mmse() -> Check {
    let mut r = rng(8);
    let (mx, my) = (3, 3);
    for t in 0..5 {
        let j = joint(&mut r, mx, my);
        let res = fw_solve(&j, 0.0, 10, 1e-12).map_err(|e| e.to_string())?;
        let s = &j.moments.cov;
        let sxy = s.view((0, mx), (mx, my)).clone_owned();
        let syy = s.view((mx, mx), (my, my)).clone_owned();
        let classical = &sxy * syy.try_inverse().ok_or("singular draw")?;
        let d = (&res.estimator.gain - &classical).amax();
        ensure(d <= 1e-8, || format!("instance {t}: gain error {d:.3e}"))?;
    }

    let mut worst_fd = 0.0f64;
    for t in 0..10 {
        let j = joint(&mut r, mx, my);
        let s = &j.moments.cov;
        let g = mmse_gradient(s, mx).map_err(|e| e.to_string())?;
        let e = uniform_mat(&mut r, 6, 6, 1.0);
        let e = (&e + e.transpose()) * 0.5;
        let h = 1e-5;
        let f = |x: &Mat| mmse_objective(x, mx).map_err(|e| e.to_string());
        let fd = (f(&(s + &e * h))? - f(&(s - &e * h))?) / (2.0 * h);
        let an = (&g * &e).trace();
        let rel = (fd - an).abs() / an.abs().max(1e-12);
        worst_fd = worst_fd.max(rel);
        ensure(rel <= 1e-5, || format!("instance {t}: directional derivative {an} vs {fd}"))?;
    }

    let mut worst_infeasible = 0.0f64;
    let mut worst_ratio = 0.0f64;
    for t in 0..10 {
        let j = joint(&mut r, mx, my);
        let eps = r.random_range(0.1..1.0);
        let res = fw_solve(&j, eps, 1000, 0.0).map_err(|e| e.to_string())?;
        worst_infeasible = worst_infeasible.max(res.max_infeasibility);
        ensure(res.max_infeasibility <= 1e-6, || format!("instance {t}: infeasibility {:.3e}", res.max_infeasibility))?;
        let c = res.gaps.iter().take(10).enumerate().map(|(k, g)| g * (k as f64 + 2.0)).fold(0.0, f64::max);
        for (k, g) in res.gaps.iter().enumerate() {
            let bound = c / (k as f64 + 2.0);
            worst_ratio = worst_ratio.max(g / bound);
            ensure(*g <= bound * (1.0 + 1e-12), || format!("instance {t}, iteration {k}: gap {g:.3e} > {bound:.3e}"))?;
        }
    }

    let mut cov = spd(&mut r, 6, 0.3);
    for i in 0..mx {
        for k in mx..6 {
            cov[(i, k)] = 0.0;
            cov[(k, i)] = 0.0;
        }
    }
    let j = JointMoments::new(mx, my, MomentPair::new(uniform_vec(&mut r, 6, 1.0), cov).unwrap()).unwrap();
    let res = fw_solve(&j, 0.5, 50, 1e-9).map_err(|e| e.to_string())?;
    ensure(res.estimator.gain.iter().all(|&v| v == 0.0), || format!("block diagonal gain {}", res.estimator.gain))?;
    Ok(format!("fd error {worst_fd:.1e}, infeasibility {worst_infeasible:.1e}, largest gap/bound {worst_ratio:.3}"))
}

fn learning() -> Check {
    let one = Dataset::new(vec![Vector::from_element(1, 1.0)], vec![1.0]).unwrap();
    for eps in [0.1, 0.5, 0.9, 1.1, 2.0, 5.0] {
        let model = dro_train_classifier(&one, UnivariateLoss::Hinge, &TrainOptions::new(eps, NormSpec::l2()))
            .map_err(|e| e.to_string())?;
        let (w, v) = if eps < 1.0 { (1.0, eps) } else { (0.0, 1.0) };
        ensure((model.weights[0] - w).abs() <= 1e-8 && (model.objective - v).abs() <= 1e-8, || {
            format!("eps {eps}: w {} value {}", model.weights[0], model.objective)
        })?;
    }

    let mut r = rng(9);
    let mut worst = 0.0f64;
    for t in 0..50 {
        let n = r.random_range(2..=15);
        let m = r.random_range(1..=3);
        let features: Vec<Vector> = (0..n).map(|_| uniform_vec(&mut r, m, 2.0)).collect();
        let norm = [NormSpec::l1(), NormSpec::l2(), NormSpec::linf()][t % 3].clone();
        let opts = TrainOptions::new(r.random_range(0.01..0.5), norm.clone());
        let (data, loss, model) = if t % 2 == 0 {
            let labels: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
            let data = Dataset::new(features, labels).unwrap();
            let model = dro_train_classifier(&data, UnivariateLoss::Hinge, &opts).map_err(|e| format!("instance {t}: {e}"))?;
            (data, UnivariateLoss::Hinge, model)
        } else {
            let labels: Vec<f64> = features.iter().map(|x| x.sum() + r.random_range(-0.5..0.5)).collect();
            let data = Dataset::new(features, labels).unwrap();
            let loss = UnivariateLoss::Pinball { tau: r.random_range(0.1..0.9) };
            let model = dro_train_regressor(&data, loss, 1, &opts).map_err(|e| format!("instance {t}: {e}"))?;
            (data, loss, model)
        };
        let x = dro_objective_crosscheck(&model, &data, loss, opts.eps, &norm).map_err(|e| format!("instance {t}: {e}"))?;
        worst = worst.max(x.diff);
        ensure(x.diff <= 1e-6, || format!("instance {t}: crosscheck diff {:.3e}", x.diff))?;
    }

    let (n, m) = (25, 3);
    let features: Vec<Vector> = (0..n).map(|_| uniform_vec(&mut r, m, 2.0)).collect();
    let labels: Vec<f64> = features.iter().map(|x| 0.7 * x[0] - x[1] + 0.2 * x[2] + r.random_range(-0.3..0.3)).collect();
    let x = Mat::from_fn(n, m, |i, k| features[i][k]);
    let y = Vector::from_column_slice(&labels);
    let ols = (x.transpose() * &x).cholesky().ok_or("singular design")?.solve(&(x.transpose() * &y));
    let data = Dataset::new(features, labels).unwrap();
    let model = dro_train_regressor(&data, learn::UnivariateLoss::Squared, 2, &TrainOptions::new(0.0, NormSpec::l2()))
        .map_err(|e| e.to_string())?;
    let d = (&model.weights - &ols).amax();
    ensure(d <= 1e-8, || format!("OLS mismatch {d:.3e}"))?;
    Ok(format!("max crosscheck diff {worst:.2e}, OLS error {d:.1e}"))
}

fn coverage() -> Check {
    let start = Instant::now();
    let cfg = CoverageConfig::default();
    let rep = hinge_coverage(&cfg).map_err(|e| e.to_string())?;
    let need = 1.0 - cfg.eta - 0.05;
    ensure(rep.fraction >= need, || format!("coverage {} < {need}", rep.fraction))?;
    within(start.elapsed(), 30.0, "coverage experiment")?;
    Ok(format!("coverage {:.3} at radius {:.4}, {:.2}s", rep.fraction, rep.radius, start.elapsed().as_secs_f64()))
}

fn data(name: &str) -> String {
    format!("{}/examples/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn determinism() -> Check {
    let runs: Vec<Vec<String>> = vec![
        vec![
            "transport".into(),
            "--source".into(),
            data("source.json"),
            "--target".into(),
            data("target.json"),
            "--order".into(),
            "2".into(),
        ],
        vec![
            "wc-risk".into(),
            "--samples".into(),
            data("origin.json"),
            "--loss".into(),
            data("hinge_shift.json"),
            "--eps".into(),
            "0.5".into(),
            "--order".into(),
            "1".into(),
            "--norm".into(),
            "l1".into(),
            "--extremal".into(),
        ],
        vec![
            "gelbrich".into(),
            "--moments".into(),
            data("moments.json"),
            "--loss".into(),
            data("quadratic.json"),
            "--eps".into(),
            "0.5".into(),
        ],
        vec!["shrink".into(), "--input".into(), data("returns.csv"), "--eps".into(), "0.1".into()],
        vec![
            "mmse".into(),
            "--moments".into(),
            data("joint_moments.json"),
            "--signal-dim".into(),
            "2".into(),
            "--eps".into(),
            "0.3".into(),
            "--iters".into(),
            "100".into(),
        ],
        vec![
            "train".into(),
            "--input".into(),
            data("classify.csv"),
            "--loss".into(),
            "logloss".into(),
            "--eps".into(),
            "0.1".into(),
            "--norm".into(),
            "l2".into(),
        ],
        vec![
            "calibrate".into(),
            "--method".into(),
            "coverage".into(),
            "--eta".into(),
            "0.1".into(),
            "--trials".into(),
            "20".into(),
        ],
    ];
    let render = |args: &[String]| -> Result<String, String> {
        let argv = std::iter::once("wdro".to_string()).chain(args.iter().cloned());
        let config = cli::parse_config(argv).map_err(|e| format!("{}: {e}", args[0]))?;
        let report = cli::run(&config).map_err(|e| format!("{}: {e}", args[0]))?;
        if report.error.is_some() {
            return Err(format!("{}: {:?}", args[0], report.error));
        }
        let mut v: Value = serde_json::from_str(&report.to_json()).map_err(|e| e.to_string())?;
        v.as_object_mut().unwrap().remove("timings");
        Ok(serde_json::to_string(&v).unwrap())
    };
    for args in &runs {
        let a = render(args)?;
        let b = render(args)?;
        ensure(a == b, || format!("{} reports differ", args[0]))?;
    }
    Ok(format!("{} commands", runs.len()))
}

type Criterion = (u32, &'static str, fn() -> Check);

fn main() {
    let checks: [Criterion; 11] = [
        (1, "asymptotic extremal family for the shifted hinge", non_existence),
        (2, "attained extremal on a half line", n_atoms),
        (3, "LP path equals nominal plus radius times Lipschitz modulus", lp_identity),
        (4, "transport duality and metric properties", transport_duality),
        (5, "quadratic worst case over type-2 balls", quadratic_dual),
        (6, "Gelbrich quadratic risk", gelbrich_quadratic),
        (7, "shrinkage estimator", shrinkage),
        (8, "minimax MMSE by Frank-Wolfe", mmse),
        (9, "robust learning", learning),
        (10, "radius calibration coverage", coverage),
        (11, "CLI determinism", determinism),
    ];
    let mut unexpected = 0;
    for (id, name, check) in checks {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{id:>2}] {name}: {detail} ({secs:.2}s)"),
            Err(why) => {
                let known = KNOWN_FAILURES.contains(&id);
                println!("FAIL [{id:>2}] {name}: {why}{} ({secs:.2}s)", if known { " [known]" } else { "" });
                if !known {
                    unexpected += 1;
                }
            }
        }
    }
    if unexpected > 0 {
        std::process::exit(1);
    }
}
