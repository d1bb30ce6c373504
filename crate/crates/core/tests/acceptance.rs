//! Acceptance criteria. Runs as a plain binary: one PASS/FAIL line per
//! criterion, nonzero exit if any fails.

use congesta::cli;
use congesta::continuity::{
    continuity_step, renormalized_balance, DensityField, Entropy, FaceVelocity, Identity, MassLedger, Square,
};
use congesta::domain::{build_mesh, extend_boundary, BoundarySpec};
use congesta::limits::{
    estimate_defect, lemma_equivalence_check, run_sweep, sweep_grid, Axis, DefectSample, LemmaSlice, LemmaTolerances,
    SweepReport,
};
use congesta::potential::{MollifiedPotential, PotentialSpec};
use congesta::run::{simulate_with, DensityProfile, InitialSpec, RunOutput, RunParams, Setup};
use congesta::tensors::SymTensor;
use proptest::prelude::Rng;
use proptest::test_runner::{RngAlgorithm, TestRng};
use std::path::{Path, PathBuf};
use std::time::Instant;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn bench_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../bench")
}

fn base() -> RunParams {
    RunParams {
        dim: 1,
        resolution: 128,
        boundary: BoundarySpec::at_rest(0.5),
        initial: InitialSpec { density: DensityProfile::Uniform { value: 0.8 }, velocity: [0.0, 0.0], modes: vec![0.0, 1.0] },
        potential: PotentialSpec::quadratic(0.05),
        delta: 0.0,
        eps: 1e-3,
        alpha: 40.0,
        rho_star: 1.0,
        modes: 8,
        dt: 1e-3,
        t_end: 0.5,
        tol: 1e-10,
        max_iter: 50,
        tau_c: 0.01,
        frozen_density: false,
        energy_tol: 1e-5,
    }
}

fn q32() -> PotentialSpec<f64> {
    PotentialSpec { mu0: 1.0, mu1: 0.0, eta0: 1.0, eta1: 0.1, q: 1.5 }
}

/// Inflow through the left wall at unit speed, 10^3 steps.
fn inflow_benchmark() -> RunParams {
    RunParams {
        resolution: 64,
        boundary: BoundarySpec::from_ends(1.0, 1.0, 0.6),
        initial: InitialSpec { density: DensityProfile::Step { left: 0.6, right: 0.3, at: 0.5 }, velocity: [0.0, 0.0], modes: vec![] },
        potential: PotentialSpec::quadratic(0.5),
        modes: 4,
        alpha: 10.0,
        t_end: 1.0,
        ..base()
    }
}

/// Expanding affine boundary field with a q = 3/2 potential.
fn energy_benchmark(dt: f64) -> RunParams {
    RunParams {
        resolution: 64,
        boundary: BoundarySpec::from_ends(0.5, 0.8, 0.9),
        initial: InitialSpec {
            density: DensityProfile::Linear { left: 0.3, right: 0.7 },
            velocity: [0.0, 0.0],
            modes: vec![0.3, -0.2, 0.1],
        },
        potential: q32(),
        modes: 3,
        alpha: 6.0,
        eps: 0.05,
        dt,
        t_end: 0.2,
        tol: 1e-12,
        max_iter: 30,
        ..base()
    }
}

fn test_matrix() -> Vec<(&'static str, RunParams)> {
    let smooth = cli::load_config(&bench_dir().join("uniform.cfg")).expect("uniform.cfg").config.params();
    let bump = DensityProfile::Bump { base: 0.4, amplitude: 0.3, center: [0.5, 0.5], width: 0.2 };
    vec![
        ("congested alpha 40", base()),
        ("congested alpha 160", RunParams { alpha: 160.0, ..base() }),
        ("smooth benchmark", smooth),
        ("inflow benchmark", inflow_benchmark()),
        ("expanding affine q=3/2", energy_benchmark(5e-3)),
        (
            "pure transport eps=0",
            RunParams {
                eps: 0.0,
                boundary: BoundarySpec::from_ends(0.5, 0.5, 0.7),
                initial: InitialSpec { density: DensityProfile::Step { left: 0.2, right: 0.5, at: 0.3 }, velocity: [0.0, 0.0], modes: vec![0.2] },
                potential: PotentialSpec::quadratic(0.5),
                resolution: 64,
                modes: 4,
                t_end: 0.3,
                ..base()
            },
        ),
        (
            "outflow only",
            RunParams {
                boundary: BoundarySpec::from_ends(0.0, 0.6, 0.5),
                initial: InitialSpec { density: DensityProfile::Cosine { base: 0.5, amplitude: 0.2, wavenumber: 2.0 }, velocity: [0.0, 0.0], modes: vec![] },
                potential: PotentialSpec::quadratic(0.2),
                resolution: 64,
                modes: 4,
                t_end: 0.3,
                ..base()
            },
        ),
        (
            "closed box q=3",
            RunParams {
                potential: PotentialSpec { mu0: 1.0, mu1: 0.0, eta0: 0.3, eta1: 0.0, q: 3.0 },
                initial: InitialSpec { density: bump.clone(), velocity: [0.0, 0.0], modes: vec![0.5, -0.5] },
                resolution: 64,
                modes: 6,
                t_end: 0.3,
                ..base()
            },
        ),
        (
            "mollified delta=1e-2",
            RunParams { delta: 1e-2, potential: q32(), resolution: 64, t_end: 0.3, ..base() },
        ),
        (
            "2d closed box",
            RunParams {
                dim: 2,
                resolution: 16,
                modes: 8,
                dt: 5e-3,
                t_end: 0.2,
                potential: PotentialSpec::quadratic(0.2),
                initial: InitialSpec { density: bump.clone(), velocity: [0.0, 0.0], modes: vec![0.3, 0.0, -0.3] },
                ..base()
            },
        ),
        (
            "2d uniform through-flow",
            RunParams {
                dim: 2,
                resolution: 16,
                modes: 6,
                dt: 5e-3,
                t_end: 0.2,
                boundary: BoundarySpec::uniform([0.5, 0.25], 0.5),
                potential: PotentialSpec::quadratic(0.2),
                initial: InitialSpec { density: DensityProfile::Uniform { value: 0.3 }, velocity: [0.0, 0.0], modes: vec![0.1] },
                ..base()
            },
        ),
        (
            "2d expanding affine",
            RunParams {
                dim: 2,
                resolution: 16,
                modes: 6,
                dt: 5e-3,
                t_end: 0.2,
                boundary: BoundarySpec { offset: [0.2, 0.1], gradient: [[0.3, 0.0], [0.0, 0.1]], rho_b: 0.4 },
                potential: q32(),
                initial: InitialSpec { density: bump, velocity: [0.0, 0.0], modes: vec![] },
                ..base()
            },
        ),
    ]
}

struct MatrixRun {
    name: &'static str,
    out: Result<RunOutput, String>,
}

fn run_matrix() -> (Vec<MatrixRun>, f64) {
    let t = Instant::now();
    let runs = test_matrix()
        .into_iter()
        .map(|(name, p)| MatrixRun { name, out: Setup::new(&p).and_then(|s| simulate_with(&s, &p)).map_err(|e| e.to_string()) })
        .collect();
    (runs, t.elapsed().as_secs_f64())
}

fn c01_max_principle(runs: &[MatrixRun], secs: f64) -> Outcome {
    let mut pass = runs.len() >= 12 && secs <= 120.0;
    let (mut worst, mut running) = (0.0f64, 0.0f64);
    for r in runs {
        match &r.out {
            Ok(out) => {
                let sup = out.frames.iter().flat_map(|f| f.rho.iter().copied()).fold(0.0, f64::max);
                let ratio = sup / out.max_principle.bound();
                worst = worst.max(ratio);
                running = running.max(out.steps.iter().map(|s| s.max_rho / s.max_principle_bound).fold(0.0, f64::max));
                pass &= ratio <= 1.0 + 1e-10;
            }
            Err(e) => {
                eprintln!("  {}: {e}", r.name);
                pass = false;
            }
        }
    }
    outcome(
        pass,
        format!("{} configs in {secs:.1} s, max sup/bound(T) {worst:.6}, max running sup/bound(t) {running:.7}", runs.len()),
    )
}

fn c02_mass_ledger(runs: &[MatrixRun]) -> Outcome {
    let Some(out) = runs.iter().find(|r| r.name == "inflow benchmark").and_then(|r| r.out.as_ref().ok()) else {
        return outcome(false, "inflow benchmark failed".into());
    };
    let step = out.mass.max_step_residual();
    let cum = out.mass.cumulative_residual().abs();
    let n = out.mass.entries.len();
    outcome(n >= 1000 && step <= 1e-10 && cum <= 1e-8, format!("{n} steps, max step {step:.2e}, cumulative {cum:.2e}"))
}

fn c03_renormalized() -> Outcome {
    // B(z) = z on an inflow/outflow transport run against the mass ledger
    let spec = BoundarySpec::from_ends(0.5, 0.8, 0.7);
    let mesh = build_mesh(1, 64, &spec).unwrap();
    let bd = extend_boundary(&mesh, &spec).unwrap();
    let field = |x: [f64; 2]| [0.5 + 0.3 * x[0] + 0.2 * (std::f64::consts::PI * x[0]).sin(), 0.0];
    let faces = FaceVelocity::from_field(&mesh, 4, field);
    let rho0: Vec<f64> = (0..64).map(|k| 0.3 + 0.2 * mesh.cell_center(k)[0]).collect();
    let mut rho = DensityField::new(rho0, 1e-3);
    let mut ledger = MassLedger::new(rho.mass(&mesh));
    let mut mismatch = 0.0f64;
    for _ in 0..200 {
        let dt = 2e-3;
        let (next, fl) = continuity_step(&mesh, &bd, &rho, &faces, dt).unwrap();
        let prev = ledger.entries.last().cloned();
        ledger.record(next.t, next.mass(&mesh), &fl, dt);
        let e = ledger.entries.last().unwrap();
        let (m0, out0, inc0, ind0) = prev.map_or((ledger.initial_mass, 0.0, 0.0, 0.0), |p| {
            (p.interior_mass, p.outflow_cumulative, p.inflow_cumulative, p.diffusive_boundary_cumulative)
        });
        let terms = renormalized_balance(&mesh, &bd, &faces, &rho, &next, dt, &Identity);
        let d_mass = e.interior_mass - m0;
        let d_flux = (e.outflow_cumulative - out0) - (e.inflow_cumulative - inc0) - (e.diffusive_boundary_cumulative - ind0);
        mismatch = mismatch
            .max((terms.time * dt - d_mass).abs())
            .max(((terms.transport - terms.boundary) * dt - d_flux).abs())
            .max((terms.residual * dt - e.step_residual).abs());
        rho = next;
    }
    let identity_ok = mismatch <= 1e-14;

    // B(z) = z^2 with u = 0: discrete heat entropy identity
    let rest = BoundarySpec::at_rest(0.5);
    let mesh = build_mesh(1, 128, &rest).unwrap();
    let bd = extend_boundary(&mesh, &rest).unwrap();
    let still = FaceVelocity::from_field(&mesh, 2, |_| [0.0, 0.0]);
    let mut rho = DensityField::new((0..128).map(|k| 0.5 + 0.3 * (std::f64::consts::PI * mesh.cell_center(k)[0]).cos()).collect(), 0.05);
    let mut heat = 0.0f64;
    for _ in 0..100 {
        let (next, _) = continuity_step(&mesh, &bd, &rho, &still, 1e-3).unwrap();
        let t = renormalized_balance(&mesh, &bd, &still, &rho, &next, 1e-3, &Square);
        heat = heat.max((t.time + t.diffusion - t.chain_defect).abs() / t.time.abs());
        rho = next;
    }
    let heat_ok = heat <= 1e-8;

    // B(z) = z log z: time-integrated residual against dt
    let totals: Vec<f64> = [4e-3, 2e-3, 1e-3]
        .iter()
        .map(|&dt: &f64| {
            let faces = FaceVelocity::from_field(&mesh, 4, |x| [0.5 * (std::f64::consts::PI * x[0]).sin(), 0.0]);
            let mut rho = DensityField::new((0..128).map(|k| 0.5 + 0.2 * (std::f64::consts::PI * mesh.cell_center(k)[0]).cos()).collect(), 1e-3);
            let mut total = 0.0;
            for _ in 0..(0.2 / dt).round() as usize {
                let (next, _) = continuity_step(&mesh, &bd, &rho, &faces, dt).unwrap();
                total += dt * renormalized_balance(&mesh, &bd, &faces, &rho, &next, dt, &Entropy).residual.abs();
                rho = next;
            }
            total
        })
        .collect();
    let ratios: Vec<f64> = totals.windows(2).map(|w| w[1] / w[0]).collect();
    let entropy_ok = ratios.iter().all(|r| (0.35..=0.65).contains(r));
    outcome(
        identity_ok && heat_ok && entropy_ok,
        format!(
            "z: ledger mismatch {mismatch:.1e}; z^2 heat identity rel {heat:.1e}; z log z halving ratios {:.3}, {:.3}",
            ratios[0], ratios[1]
        ),
    )
}

fn uniform(rng: &mut TestRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn random_tensor(rng: &mut TestRng, dim: usize, r: f64) -> SymTensor<f64> {
    let v: Vec<f64> = (0..SymTensor::<f64>::components(dim)).map(|_| uniform(rng, -r, r)).collect();
    SymTensor::from_upper(dim, &v)
}

fn c04_fenchel_young() -> Outcome {
    let mut rng = TestRng::from_seed(RngAlgorithm::ChaCha, &[7u8; 32]);
    let (mut min_gap, mut max_rel, mut count) = (f64::INFINITY, 0.0f64, 0usize);
    let mut errors = 0;
    for q in [1.5, 2.0, 3.0] {
        for delta in [1e-8, 1e-2] {
            let spec = PotentialSpec { mu0: 1.0, mu1: 0.0, eta0: 0.5, eta1: 0.0, q };
            let pot = MollifiedPotential::new(spec, delta).unwrap();
            for i in 0..1700 {
                let dim = 1 + i % 2;
                let d = random_tensor(&mut rng, dim, 2.0);
                let s = random_tensor(&mut rng, dim, 2.0);
                match pot.fenchel_gap(&d, &s) {
                    Ok(p) => min_gap = min_gap.min(p.gap),
                    Err(_) => errors += 1,
                }
                count += 1;
                match pot.subgradient(&d).and_then(|sd| pot.fenchel_gap(&d, &sd)) {
                    Ok(p) => {
                        let scale = p.f_value.abs() + p.fstar_value.abs() + p.stress.dot(&d).abs();
                        max_rel = max_rel.max(p.gap / (1.0 + scale));
                    }
                    Err(_) => errors += 1,
                }
            }
        }
    }
    outcome(
        count >= 10_000 && errors == 0 && min_gap >= -1e-8 && max_rel <= 1e-5,
        format!("{count} random pairs, min gap {min_gap:.2e}, max subgradient gap/(1+scale) {max_rel:.2e}, errors {errors}"),
    )
}

fn c05_conjugate_oracle() -> Outcome {
    let mut worst = 0.0f64;
    for q in [1.5, 2.0, 3.0] {
        let qp = q / (q - 1.0);
        let closed = |a: f64, s: f64| a.powf(1.0 - qp) / qp * s.powf(qp);
        let spec = PotentialSpec { mu0: 1.3, mu1: 0.0, eta0: 0.7, eta1: 0.0, q };
        let pot = MollifiedPotential::new(spec, 0.0).unwrap();
        for i in 0..=40 {
            // off the table nodes except for the last point
            let s = 10f64.powf(-2.0 + 4.0 * (i as f64 + if i < 40 { 0.37 } else { 0.0 }) / 40.0);
            // deviatoric profile mu0/q t^q, probed with a traceless 2D stress of norm s
            let dev = SymTensor::from_upper(2, &[s / 2f64.sqrt(), 0.0, -s / 2f64.sqrt()]);
            let num = pot.conjugate(&dev).unwrap_or(f64::NAN);
            worst = worst.max((num / closed(spec.mu0, s) - 1.0).abs());
            // trace profile eta0 t^q = (q eta0)/q t^q, probed in 1D
            let tr = SymTensor::from_upper(1, &[s]);
            let num = pot.conjugate(&tr).unwrap_or(f64::NAN);
            worst = worst.max((num / closed(q * spec.eta0, s) - 1.0).abs());
        }
    }
    outcome(worst <= 1e-4, format!("max relative error {worst:.2e} over q in {{3/2, 2, 3}}, s in [1e-2, 1e2]"))
}

fn c06_energy(runs: &[MatrixRun]) -> Outcome {
    let (mut steps, mut failed, mut worst) = (0usize, 0usize, f64::NEG_INFINITY);
    for r in runs {
        if let Ok(out) = &r.out {
            steps += out.energy_verdicts.len();
            failed += out.energy_verdicts.iter().filter(|v| !v.pass).count();
            worst = out.ledgers.iter().map(|l| l.residual_dual / (1.0 + out.e0.abs())).fold(worst, f64::max);
        }
    }
    let totals: Vec<f64> = [0.01, 0.005, 0.0025]
        .iter()
        .map(|&dt| {
            let p = energy_benchmark(dt);
            let out = Setup::new(&p).and_then(|s| simulate_with(&s, &p)).expect("energy benchmark");
            out.ledgers.iter().map(|l| l.residual).sum::<f64>().abs()
        })
        .collect();
    let slopes: Vec<f64> = totals.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let slopes_ok = slopes.iter().all(|s| (0.8..=1.3).contains(s));
    outcome(
        failed == 0 && steps > 0 && slopes_ok,
        format!(
            "{steps} steps, {failed} above 1e-5(1+E0), worst residual/(1+E0) {worst:.2e}; dt slopes {:.3}, {:.3}",
            slopes[0], slopes[1]
        ),
    )
}

fn c07_linear_mode() -> Outcome {
    let t = Instant::now();
    // rho u_t = 2 eta0 u_xx with rho = 1/2, eta0 = 1/4: rate pi^2
    let p = RunParams {
        resolution: 256,
        modes: 1,
        potential: PotentialSpec::quadratic(0.25),
        initial: InitialSpec { density: DensityProfile::Uniform { value: 0.5 }, velocity: [0.0, 0.0], modes: vec![1.0] },
        eps: 0.0,
        alpha: 10.0,
        frozen_density: true,
        t_end: 1.0,
        tol: 1e-12,
        ..base()
    };
    let out = match Setup::new(&p).and_then(|s| simulate_with(&s, &p)) {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    let last = out.frames.last().unwrap();
    let exact = (-std::f64::consts::PI.powi(2)).exp();
    let err = (last.v[0] - exact).abs();
    let secs = t.elapsed().as_secs_f64();
    outcome(err <= 1e-4 && (last.t - 1.0).abs() < 1e-9 && secs <= 5.0, format!("|v(1) - e^-pi^2| = {err:.2e} in {secs:.2} s"))
}

fn alpha_ladder() -> (Result<SweepReport, String>, f64) {
    let t = Instant::now();
    let lc = cli::load_config(&bench_dir().join("alpha_ladder.cfg")).expect("alpha_ladder.cfg");
    let report = sweep_grid(&lc.config.params(), &lc.config.sweep_axes())
        .and_then(|pts| run_sweep(&pts, 3))
        .map_err(|e| e.to_string());
    (report, t.elapsed().as_secs_f64())
}

fn ladder_values(report: &SweepReport, f: impl Fn(&congesta::limits::PointSummary) -> f64) -> Option<Vec<f64>> {
    report.points.iter().filter(|p| p.axis == Axis::Alpha).map(|p| p.summary.as_ref().map(&f)).collect()
}

fn c08_congestion_rate(report: &Result<SweepReport, String>, secs: f64) -> Outcome {
    let Some(l2) = report.as_ref().ok().and_then(|r| ladder_values(r, |s| s.max_overshoot_l2)) else {
        return outcome(false, format!("ladder failed: {:?}", report.as_ref().err()));
    };
    let ratios: Vec<f64> = l2.windows(2).map(|w| w[1] / w[0]).collect();
    let target = 0.5;
    let pass = l2.len() == 3
        && l2.windows(2).all(|w| w[1] < w[0])
        && ratios.iter().all(|r| *r >= target / 2.0 && *r <= target * 2.0)
        && secs <= 600.0;
    outcome(pass, format!("overshoot L2 {:.3e}, {:.3e}, {:.3e}; ratios {:.3}, {:.3}; {secs:.1} s", l2[0], l2[1], l2[2], ratios[0], ratios[1]))
}

fn c09_complementarity(report: &Result<SweepReport, String>) -> Outcome {
    let Some(c) = report.as_ref().ok().and_then(|r| ladder_values(r, |s| s.mean_complementarity)) else {
        return outcome(false, "ladder failed".into());
    };
    let pass = c.windows(2).all(|w| w[1] <= w[0]) && c[c.len() - 1] <= 0.1 * c[0];
    outcome(pass, format!("time-mean complementarity {:.3e}, {:.3e}, {:.3e}; final/initial {:.3}", c[0], c[1], c[2], c[2] / c[0]))
}

fn c10_congested_divergence(report: &Result<SweepReport, String>) -> Outcome {
    let Some(d) = report.as_ref().ok().and_then(|r| ladder_values(r, |s| s.mean_congested_divergence)) else {
        return outcome(false, "ladder failed".into());
    };
    let monotone = d.windows(2).all(|w| w[1] <= w[0]);
    let tol = LemmaTolerances::default();
    let rho0 = vec![0.5; 4];
    let case = |rho: Vec<f64>, div: Vec<f64>| lemma_equivalence_check(0.25, &rho0, &[LemmaSlice { dt: 0.1, rho, div }], 0.01, &tol);
    let positive = case(vec![0.7, 0.5, 0.6, 0.4], vec![1.0, -2.0, 0.5, 0.0]);
    let congested = case(vec![1.0, 1.0, 0.6, 0.4], vec![0.0, 0.0, 0.5, -1.0]);
    let violated = case(vec![1.2, 0.5, 0.6, 0.4], vec![1.0, 0.0, 0.5, -1.0]);
    let lemma_ok = positive.consistent
        && positive.bounded
        && congested.consistent
        && congested.bounded
        && violated.consistent
        && !violated.bounded
        && !violated.divergence_free;
    outcome(
        monotone && lemma_ok,
        format!("congested |div u| {:.3e}, {:.3e}, {:.3e}; lemma cases consistent: {lemma_ok}", d[0], d[1], d[2]),
    )
}

fn c11_defect(report: &Result<SweepReport, String>, runs: &[MatrixRun]) -> Outcome {
    let mut worst = 0.0f64;
    for blocks in [4usize, 8, 16] {
        for per_block in [16usize, 24, 64] {
            let k = (per_block * blocks) as f64;
            let n = 64 * per_block * blocks;
            let w = 1.0 / n as f64;
            let samples: Vec<DefectSample> = (0..n)
                .map(|i| {
                    let x = (i as f64 + 0.5) * w;
                    DefectSample { x: [x, 0.5], w, rho: 1.0, u: [(2.0 * std::f64::consts::PI * k * x).sin(), 0.0] }
                })
                .collect();
            let d = estimate_defect(&samples, 1, blocks, 1.0, 2.0).unwrap();
            for b in 0..blocks {
                worst = worst.max((d.reynolds_trace[b] - 0.5).abs()).max((d.kinetic_defect[b] - 0.25).abs());
            }
        }
    }
    // every run: the ladder verdicts and the matrix frames
    let mut min_trace = f64::INFINITY;
    if let Ok(r) = report {
        for p in &r.points {
            if let Some(s) = &p.summary {
                min_trace = min_trace.min(s.verdict.min_block_trace);
            }
        }
    }
    let mut estimator_errors = 0;
    for (r, (_, p)) in runs.iter().zip(test_matrix()) {
        let (Ok(out), Ok(setup)) = (&r.out, Setup::new(&p)) else { continue };
        for f in &out.frames {
            let s = congesta::limits::frame_samples(&setup, &f.rho, &f.v);
            match estimate_defect(&s, p.dim, 8, 1.0, 2.0) {
                Ok(d) => min_trace = d.reynolds_trace.iter().copied().fold(min_trace, f64::min),
                Err(_) => estimator_errors += 1,
            }
        }
    }
    outcome(
        worst <= 1e-3 && min_trace >= -1e-8 && estimator_errors == 0 && report.is_ok(),
        format!("oscillation error {worst:.2e}; min block trace over all runs {min_trace:.2e}"),
    )
}

fn c12_compatibility() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let lc = cli::load_config(&bench_dir().join("uniform.cfg")).unwrap();
    let summary = match cli::execute_run(&lc, dir.path()) {
        Ok(s) => s,
        Err(e) => return outcome(false, format!("smooth run failed: {e}")),
    };
    let comp = &summary.verdicts.compatibility;
    let label = comp["label"].as_str().unwrap_or("");
    let (defect, gap, pairing) =
        (comp["defect"].as_f64().unwrap(), comp["max_gap"].as_f64().unwrap(), comp["congested_pairing"].as_f64().unwrap());
    let classical = label == "classical-compatible" && defect <= 1e-5 && gap <= 1e-5 && pairing <= 1e-6;

    // negative control: every stored stress doubled
    let setup = Setup::new(&lc.config.params()).unwrap();
    let mut frames = cli::load_frames(dir.path(), &setup, &summary.config_hash).unwrap();
    frames.iter_mut().for_each(|f| f.stress.iter_mut().for_each(|s| s.iter_mut().for_each(|x| *x *= 2.0)));
    let opts = lc.config.verdict_options();
    let bad = congesta::limits::dissipative_verdict(&setup, &frames, &congesta::limits::test_bank(1), &opts).unwrap();
    outcome(
        classical && !bad.energy_pass,
        format!(
            "smooth benchmark: {label} (defect {defect:.1e}, gap {gap:.1e}, pairing {pairing:.1e}); doubled stress energy margin {:.2e}, pass {}",
            bad.energy_margin, bad.energy_pass
        ),
    )
}

fn c13_determinism() -> Outcome {
    let exe = env!("CARGO_BIN_EXE_congesta");
    let cfg = bench_dir().join("uniform.cfg");
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let status = |args: &[&std::ffi::OsStr]| std::process::Command::new(exe).args(args).output().map(|o| o.status.code());
    let mut codes = vec![];
    for d in [&a, &b] {
        codes.push(status(&["run".as_ref(), cfg.as_os_str(), "--out".as_ref(), d.as_os_str()]));
    }
    let mut reports = vec![];
    for d in [&a, &a, &b] {
        codes.push(status(&["verify".as_ref(), d.as_os_str()]));
        reports.push(std::fs::read(d.join("verify.json")).unwrap_or_default());
    }
    let files = ["steps.csv", "energy.csv", "mass.csv", "summary.json", "fields/fields.csv", "fields/coeffs.csv", "verify.json"];
    let identical = files.iter().all(|f| {
        let (x, y) = (std::fs::read(a.join(f)), std::fs::read(b.join(f)));
        matches!((&x, &y), (Ok(x), Ok(y)) if x == y && !x.is_empty())
    });
    let verify_stable = reports[0] == reports[1] && reports[1] == reports[2] && !reports[0].is_empty();
    let codes_ok = codes.iter().all(|c| matches!(c, Ok(Some(0))));
    outcome(
        identical && verify_stable && codes_ok,
        format!("{} artifacts identical across runs: {identical}; verify byte-stable: {verify_stable}", files.len()),
    )
}

fn main() {
    let t = Instant::now();
    let (runs, matrix_secs) = run_matrix();
    let (ladder, ladder_secs) = alpha_ladder();
    let results = [
        ("maximum principle", c01_max_principle(&runs, matrix_secs)),
        ("mass ledger", c02_mass_ledger(&runs)),
        ("renormalized balance", c03_renormalized()),
        ("Fenchel-Young", c04_fenchel_young()),
        ("conjugate oracle", c05_conjugate_oracle()),
        ("energy inequality", c06_energy(&runs)),
        ("linear-mode exactness", c07_linear_mode()),
        ("congestion rate", c08_congestion_rate(&ladder, ladder_secs)),
        ("complementarity", c09_complementarity(&ladder)),
        ("congested divergence", c10_congested_divergence(&ladder)),
        ("Reynolds defect", c11_defect(&ladder, &runs)),
        ("compatibility", c12_compatibility()),
        ("determinism", c13_determinism()),
    ];
    let mut failed = 0;
    for (i, (name, o)) in results.iter().enumerate() {
        println!("criterion {:>2} {name}: {} ({})", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed in {:.1} s", results.len() - failed, t.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
