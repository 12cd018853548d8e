//! Acceptance suite. Prints one `criterion N: PASS|FAIL ...` line per
//! criterion and exits nonzero when any gating criterion fails.
//!
//! Criterion 11 runs only when `CREVE_REAL_DATA` names a dataset directory
//! in the canonical CSV layout. It never gates.

mod common;

use std::f64::consts::{FRAC_PI_2, PI};
use std::process::ExitCode;
use std::time::Instant;

use creve::estimator::compute_gamma;
use creve::sim::{generate, ScenarioConfig, TrajectoryKind};
use creve::{
    ate, evaluate, load_dataset, rmse_per_axis, run_estimator, solve_box_lsq, AlignmentMode, BoxConstraint, Dataset,
    GammaBounds, Method, RadarTarget, Rotation, RunConfig, RunOutput, Stamped, TimingStats, Trajectory, Vec3,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{box_lsq_oracle, clean_scenario, outlier_run_config};

type Outcome = Result<(bool, String), String>;

const SEEDS: u64 = 10;

fn run(dataset: &Dataset, config: &RunConfig, method: Method) -> Result<RunOutput, String> {
    run_estimator(dataset, config, method).map_err(|e| e.to_string())
}

fn dataset(config: &ScenarioConfig, name: &str) -> Result<(creve::sim::Scenario, Dataset), String> {
    let scenario = generate(config).map_err(|e| e.to_string())?;
    let ds = Dataset::from_scenario(&scenario, name);
    Ok((scenario, ds))
}

fn fmt3(v: &Vec3) -> String {
    format!("({:.4}, {:.4}, {:.4})", v.x, v.y, v.z)
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let instances = 1000;
    let mut worst = 0.0f64;
    let mut elapsed = 0.0;
    let mut slowest = 0.0f64;
    let mut binding = 0;
    for _ in 0..instances {
        let rows: Vec<Vec3> = (0..20)
            .map(|_| {
                let d = Vec3::new(rng.random_range(0.2..1.0), rng.random_range(-1.0..1.0), rng.random_range(-0.5..0.5));
                d.normalize()
            })
            .collect();
        let truth = Vec3::from_fn(|_, _| rng.random_range(-3.0..3.0));
        let y: Vec<f64> = rows.iter().map(|h| h.dot(&truth) + rng.random_range(-0.5..0.5)).collect();
        let center = truth + Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let half = Vec3::from_fn(|_, _| rng.random_range(0.01..1.0));
        let bounds = BoxConstraint::centered(center, half).map_err(|e| e.to_string())?;

        let started = Instant::now();
        let solution = solve_box_lsq(&rows, &y, &bounds).map_err(|e| e.to_string())?;
        let dt = started.elapsed().as_secs_f64();
        elapsed += dt;
        slowest = slowest.max(dt);

        let (expected, _) = box_lsq_oracle(&rows, &y, &bounds);
        worst = worst.max((solution.velocity - expected).amax());
        if !bounds.contains(&truth) {
            binding += 1;
        }
    }
    let mean_ms = elapsed / instances as f64 * 1e3;
    let pass = worst <= 1e-8 && mean_ms < 1.0;
    Ok((
        pass,
        format!(
            "{instances} instances, max |solver - oracle| = {worst:.2e} (tol 1e-8), mean {mean_ms:.4} ms, slowest {:.4} ms, truth outside box in {binding}",
            slowest * 1e3
        ),
    ))
}

/// Largest |a| per axis over the truth model, sampled on the IMU grid.
fn max_accel(scenario: &creve::sim::Scenario) -> Vec3 {
    let mut m = Vec3::zeros();
    for s in &scenario.truth {
        let a = scenario.body_state(s.timestamp).acceleration;
        m = m.zip_map(&a, |acc, x| acc.max(x.abs()));
    }
    m
}

fn criterion_2() -> Outcome {
    let trajectories = [
        (
            "sinusoid",
            TrajectoryKind::Sinusoid {
                amplitude: Vec3::new(6.0, 4.0, 0.5),
                frequency_hz: Vec3::new(0.05, 0.07, 0.1),
                phase: Vec3::repeat(-FRAC_PI_2),
            },
        ),
        (
            "spline",
            TrajectoryKind::WaypointSpline {
                points: vec![
                    [0.0, 0.0, 0.0, 0.0],
                    [6.0, 4.0, 2.0, 0.2],
                    [12.0, 9.0, -1.0, 0.5],
                    [18.0, 12.0, 3.0, 0.1],
                    [25.0, 8.0, 6.0, 0.0],
                ],
            },
        ),
    ];
    let mut pass = true;
    let mut details = Vec::new();
    for (name, kind) in trajectories {
        for seed in 0..3 {
            let cfg = clean_scenario(seed, kind.clone());
            let (scenario, ds) = dataset(&cfg, name)?;
            let mut rc = RunConfig::default();
            rc.scenario = cfg;
            rc.alignment_duration = 4.0;
            // noiseless Doppler is exactly zero at rest and nonzero otherwise
            rc.z_threshold = 1e-9;
            let bound_axes = max_accel(&scenario);
            for method in [Method::Reve, Method::Creve] {
                let out = run(&ds, &rc, method)?;
                let mut worst = 0.0f64;
                for e in &out.estimates {
                    let truth = scenario.truth_at(e.timestamp).map_err(|e| e.to_string())?;
                    worst = worst.max((e.velocity_radar - truth.velocity_radar).amax());
                }
                let (report, _) = evaluate(&out.records(), &ds, AlignmentMode::None, rc.evaluation.max_dt)
                    .map_err(|e| e.to_string())?;
                let ate_max = report.ate.ok_or("no ATE")?.max;
                let t_first = out.estimates[0].timestamp;
                let t_last = out.estimates.last().unwrap().timestamp;
                let dt = 1.0 / rc.scenario.radar_rate;
                let bound = (bound_axes * ((t_last - t_first) * dt / 2.0)).norm();
                let ok = worst <= 1e-6 && ate_max < bound;
                pass &= ok;
                if !ok || seed == 0 {
                    details.push(format!(
                        "{name}/{method:?}/seed {seed}: vel err {worst:.1e}, ATE max {ate_max:.4} < bound {bound:.4}"
                    ));
                }
            }
        }
    }
    Ok((pass, details.join("; ")))
}

struct FamilyRun {
    rmse: [Vec3; 2],
    ate: [f64; 2],
    final_bias: Vec3,
    planted_bias: Vec3,
}

fn outlier_family() -> Result<Vec<FamilyRun>, String> {
    let mut runs = Vec::new();
    for seed in 0..SEEDS {
        let rc = outlier_run_config(seed);
        let (_, ds) = dataset(&rc.scenario, "outliers")?;
        let mut rmse = [Vec3::zeros(); 2];
        let mut ates = [0.0; 2];
        let mut final_bias = Vec3::zeros();
        for (i, method) in [Method::Reve, Method::Creve].into_iter().enumerate() {
            let out = run(&ds, &rc, method)?;
            let (report, _) = evaluate(&out.records(), &ds, AlignmentMode::PosYaw, rc.evaluation.max_dt)
                .map_err(|e| e.to_string())?;
            rmse[i] = Vec3::from(report.rmse_velocity_radar.ok_or("no velocity truth")?);
            ates[i] = report.ate.ok_or("no ATE")?.rmse;
            if method == Method::Creve {
                final_bias = out.estimates.last().ok_or("no estimates")?.bias_accel;
            }
        }
        runs.push(FamilyRun {
            rmse,
            ate: ates,
            final_bias,
            planted_bias: rc.scenario.accel_bias,
        });
    }
    Ok(runs)
}

fn criterion_3(runs: &[FamilyRun]) -> Outcome {
    let n = runs.len() as f64;
    let reve = runs.iter().map(|r| r.rmse[0]).sum::<Vec3>() / n;
    let creve = runs.iter().map(|r| r.rmse[1]).sum::<Vec3>() / n;
    let ratio = creve.component_div(&reve);
    let axes = ratio.iter().filter(|r| **r <= 0.7).count();
    Ok((
        axes >= 2,
        format!(
            "mean RMSE over {} seeds: REVE {} CREVE {} ratio {} ({axes}/3 axes <= 0.7)",
            runs.len(),
            fmt3(&reve),
            fmt3(&creve),
            fmt3(&ratio)
        ),
    ))
}

fn criterion_4(runs: &[FamilyRun]) -> Outcome {
    let n = runs.len() as f64;
    let reve = runs.iter().map(|r| r.ate[0]).sum::<f64>() / n;
    let creve = runs.iter().map(|r| r.ate[1]).sum::<f64>() / n;
    Ok((
        creve <= 0.8 * reve,
        format!("mean pos-yaw ATE: REVE {reve:.4} m, CREVE {creve:.4} m, ratio {:.4} (limit 0.8)", creve / reve),
    ))
}

fn criterion_5() -> Outcome {
    let mut configs = Vec::new();
    for seed in 0..3 {
        let mut rc = outlier_run_config(100 + seed);
        rc.scenario.duration = 40.0;
        configs.push(rc);
    }
    for seed in 0..3 {
        let mut rc = RunConfig::default();
        rc.scenario.rng_seed = 200 + seed;
        rc.scenario.duration = 40.0;
        rc.ransac.rng_seed = seed;
        configs.push(rc);
    }
    let mut compared = 0;
    let mut degenerate = 0;
    for mut rc in configs {
        rc.gamma_min = Vec3::repeat(1e6);
        rc.gamma_max = Vec3::repeat(1e6);
        let (_, ds) = dataset(&rc.scenario, "wide")?;
        let reve = run(&ds, &rc, Method::Reve)?;
        let creve = run(&ds, &rc, Method::Creve)?;
        degenerate += reve.estimates.iter().filter(|e| e.degenerate).count();
        if reve.estimates.len() != creve.estimates.len() {
            return Ok((false, "estimate counts differ".into()));
        }
        for (a, b) in reve.estimates.iter().zip(&creve.estimates) {
            let same = a.timestamp.to_bits() == b.timestamp.to_bits()
                && a.velocity_radar.iter().zip(b.velocity_radar.iter()).all(|(x, y)| x.to_bits() == y.to_bits())
                && a.velocity_nav.iter().zip(b.velocity_nav.iter()).all(|(x, y)| x.to_bits() == y.to_bits())
                && a.zero_velocity == b.zero_velocity
                && !b.constrained;
            if !same {
                return Ok((false, format!("first mismatch at t = {}", a.timestamp)));
            }
            compared += 1;
        }
    }
    Ok((
        degenerate == 0,
        format!("{compared} epochs bitwise equal over 6 datasets, {degenerate} degenerate scans"),
    ))
}

fn criterion_6() -> Outcome {
    let wide = GammaBounds::uniform(0.04, 2.0).map_err(|e| e.to_string())?;
    let g = |r: f64, b: &GammaBounds| compute_gamma(r, b).map_err(|e| e.to_string());
    let mut pass = g(0.0, &wide)? == wide.gamma_min && g(1.0, &wide)? == wide.gamma_max;
    let mid = g(0.5, &wide)?;
    pass &= (mid - Vec3::repeat(0.53)).amax() <= 1e-15;

    let bounds = GammaBounds::new(Vec3::new(0.01, 0.04, 0.1), Vec3::new(0.2, 2.0, 0.75)).map_err(|e| e.to_string())?;
    let mut prev = g(0.0, &bounds)?;
    for i in 1..=1000 {
        let cur = g(i as f64 / 1000.0, &bounds)?;
        pass &= (0..3).all(|a| cur[a] >= prev[a] && cur[a] >= bounds.gamma_min[a] && cur[a] <= bounds.gamma_max[a]);
        prev = cur;
    }

    // emitted values over a run, sorted by inlier ratio
    let rc = outlier_run_config(3);
    let (_, ds) = dataset(&rc.scenario, "gamma")?;
    let out = run(&ds, &rc, Method::Creve)?;
    let mut emitted: Vec<(f64, Vec3)> = out.estimates.iter().map(|e| (e.inlier_ratio, e.gamma_used)).collect();
    emitted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone = emitted
        .windows(2)
        .all(|w| (0..3).all(|a| w[1].1[a] >= w[0].1[a]));
    pass &= monotone;
    Ok((
        pass,
        format!(
            "r=0 -> gamma_min, r=1 -> gamma_max, r=0.5 -> {}, 1001-point sweep and {} emitted epochs monotone: {monotone}",
            fmt3(&mid),
            emitted.len()
        ),
    ))
}

fn criterion_7(runs: &[FamilyRun]) -> Outcome {
    let worst = runs
        .iter()
        .map(|r| (r.final_bias - r.planted_bias).amax())
        .fold(0.0f64, f64::max);
    let mean = runs.iter().map(|r| r.final_bias).sum::<Vec3>() / runs.len() as f64;
    Ok((
        worst <= 0.02,
        format!(
            "planted {}, mean final estimate {}, worst axis error over {} seeds {worst:.4} (tol 0.02)",
            fmt3(&runs[0].planted_bias),
            fmt3(&mean),
            runs.len()
        ),
    ))
}

fn criterion_8() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;

    // stationary prefix
    let rc = RunConfig::default();
    let (scenario, mut ds) = dataset(&rc.scenario, "zupt")?;
    let stationary_end = rc.scenario.stationary_duration;
    let mut stationary = 0;
    for method in [Method::Reve, Method::Creve] {
        let out = run(&ds, &rc, method)?;
        for e in out.estimates.iter().filter(|e| e.timestamp < stationary_end) {
            pass &= e.zero_velocity && e.velocity_radar == Vec3::zeros();
            stationary += 1;
        }
    }
    details.push(format!("{stationary} stationary epochs exactly zero"));

    // plant a false near-zero scan during fast motion
    let gamma_max = rc.gamma_max.amin();
    let (k, truth) = ds
        .radar
        .iter()
        .enumerate()
        .filter(|(_, s)| s.timestamp > stationary_end + 5.0)
        .map(|(k, s)| (k, scenario.truth_at(s.timestamp).unwrap().velocity_radar))
        .find(|(_, v)| v.amax() > gamma_max + 0.5)
        .ok_or("no fast scan")?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let t = ds.radar[k].timestamp;
    for target in &mut ds.radar[k].targets {
        *target = RadarTarget::new(target.position, rng.random_range(-0.01..0.01)).map_err(|e| e.to_string())?;
    }
    let reve = run(&ds, &rc, Method::Reve)?;
    let creve = run(&ds, &rc, Method::Creve)?;
    let r = reve.estimates.iter().find(|e| e.timestamp == t).ok_or("scan missing")?;
    let c = creve.estimates.iter().find(|e| e.timestamp == t).ok_or("scan missing")?;
    let reve_fooled = r.zero_velocity && r.velocity_radar == Vec3::zeros();
    let overridden = c.constrained && !c.zero_velocity && (c.velocity_radar - truth).norm() < truth.norm();
    pass &= reve_fooled && overridden;
    details.push(format!(
        "planted zero scan at t = {t:.1}: truth {}, REVE {}, CREVE {} (constrained {}, error {:.3} vs {:.3} for zero)",
        fmt3(&truth),
        fmt3(&r.velocity_radar),
        fmt3(&c.velocity_radar),
        c.constrained,
        (c.velocity_radar - truth).norm(),
        truth.norm()
    ));
    Ok((pass, details.join("; ")))
}

fn criterion_9() -> Outcome {
    let mut rc = RunConfig::default();
    rc.scenario.n_static_targets = 210;
    rc.scenario.duration = 30.0;
    let (_, ds) = dataset(&rc.scenario, "dense")?;
    let sizes_ok = ds.radar.iter().all(|s| s.targets.len() == 256);
    let out = run(&ds, &rc, Method::Creve)?;
    let timing = TimingStats::from_seconds(&out.step_seconds);
    Ok((
        sizes_ok && timing.mean_ms < 10.0,
        format!(
            "256 targets/scan: {sizes_ok}, {} steps, mean {:.3} ms, p95 {:.3} ms, max {:.3} ms (limit mean 10 ms)",
            timing.count, timing.mean_ms, timing.p95_ms, timing.max_ms
        ),
    ))
}

fn random_trajectory(rng: &mut ChaCha8Rng, n: usize) -> Trajectory {
    let mut p = Vec3::zeros();
    Trajectory::from_positions((0..n).map(|i| {
        p += Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        (i as f64 * 0.1, p)
    }))
    .unwrap()
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    // no alignment and pos-yaw are exact on identical input; SVD-based SE(3)
    // leaves roundoff in the rotation
    let mut self_exact = 0.0f64;
    let mut self_se3 = 0.0f64;
    let mut absorb_worst = 0.0f64;
    let mut rmse_worst = 0.0f64;
    for _ in 0..200 {
        let traj = random_trajectory(&mut rng, 50);
        for mode in [AlignmentMode::None, AlignmentMode::Se3, AlignmentMode::PosYaw] {
            let r = ate(&traj, &traj, mode, 0.05).map_err(|e| e.to_string())?;
            match mode {
                AlignmentMode::Se3 => self_se3 = self_se3.max(r.max),
                _ => self_exact = self_exact.max(r.max),
            }
        }

        let yaw = rng.random_range(-PI..PI);
        let shift = Vec3::from_fn(|_, _| rng.random_range(-50.0..50.0));
        let moved = traj.transformed(&Rotation::from_yaw(yaw), &shift);
        let r = ate(&moved, &traj, AlignmentMode::PosYaw, 0.05).map_err(|e| e.to_string())?;
        absorb_worst = absorb_worst.max(r.max);

        let est: Vec<_> = (0..40)
            .map(|i| Stamped::new(i as f64 * 0.1, Vec3::from_fn(|_, _| rng.random_range(-2.0..2.0))))
            .collect();
        let gt: Vec<_> = est
            .iter()
            .map(|s| Stamped::new(s.t, s.value + Vec3::from_fn(|_, _| rng.random_range(-0.3..0.3))))
            .collect();
        let got = rmse_per_axis(&est, &gt, 0.05).map_err(|e| e.to_string())?;
        for axis in 0..3 {
            let mut sum = 0.0;
            for (e, g) in est.iter().zip(&gt) {
                let d = e.value[axis] - g.value[axis];
                sum += d * d;
            }
            let direct = (sum / est.len() as f64).sqrt();
            rmse_worst = rmse_worst.max((got[axis] - direct).abs());
        }
    }
    Ok((
        self_exact == 0.0 && self_se3 <= 1e-12 && absorb_worst < 1e-9 && rmse_worst <= 1e-12,
        format!(
            "200 trials: self ATE max {self_exact:.1e} (none, pos-yaw), {self_se3:.1e} (se3, roundoff tol 1e-12), pos-yaw residual {absorb_worst:.1e} (tol 1e-9), RMSE vs direct sum {rmse_worst:.1e} (tol 1e-12)"
        ),
    ))
}

fn criterion_11() -> Option<Outcome> {
    let dir = std::env::var_os("CREVE_REAL_DATA")?;
    let result = (|| {
        let ds = load_dataset(&dir).map_err(|e| e.to_string())?;
        let rc = RunConfig::default();
        let out = run(&ds, &rc, Method::Creve)?;
        let (report, _) =
            evaluate(&out.records(), &ds, AlignmentMode::PosYaw, rc.evaluation.max_dt).map_err(|e| e.to_string())?;
        let got = Vec3::from(report.rmse_velocity_radar.ok_or("dataset has no velocity truth")?);
        let reference = Vec3::new(0.081, 0.040, 0.088);
        let within = (0..3).all(|a| (got[a] - reference[a]).abs() <= 0.25 * reference[a]);
        Ok((within, format!("RMSE {} vs reference {} (+-25%)", fmt3(&got), fmt3(&reference))))
    })();
    Some(result)
}

fn report(n: u32, outcome: Outcome) -> bool {
    match outcome {
        Ok((true, detail)) => {
            println!("criterion {n}: PASS {detail}");
            true
        }
        Ok((false, detail)) => {
            println!("criterion {n}: FAIL {detail}");
            false
        }
        Err(e) => {
            println!("criterion {n}: FAIL error: {e}");
            false
        }
    }
}

fn main() -> ExitCode {
    let mut ok = true;
    ok &= report(1, criterion_1());
    ok &= report(2, criterion_2());
    match outlier_family() {
        Ok(runs) => {
            ok &= report(3, criterion_3(&runs));
            ok &= report(4, criterion_4(&runs));
            ok &= report(5, criterion_5());
            ok &= report(6, criterion_6());
            ok &= report(7, criterion_7(&runs));
        }
        Err(e) => {
            for n in [3, 4, 7] {
                ok &= report(n, Err(e.clone()));
            }
            ok &= report(5, criterion_5());
            ok &= report(6, criterion_6());
        }
    }
    ok &= report(8, criterion_8());
    ok &= report(9, criterion_9());
    ok &= report(10, criterion_10());
    match criterion_11() {
        Some(outcome) => {
            // informational only
            report(11, outcome);
        }
        None => println!("criterion 11: SKIP set CREVE_REAL_DATA to a converted dataset directory"),
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
