//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::time::Instant;

use clap::Parser;
use hsdenoise::cli::{cmd_experiment, Cli, Command};
use hsdenoise::cube::{adjoint_diff, forward_diff, second_order_diff, second_order_diff_adjoint};
use hsdenoise::degrade::{calibrate_radii, simulate, Degraded, NoiseCase};
use hsdenoise::metrics::{mpsnr, mssim, PSNR_CAP_DB};
use hsdenoise::prox::{self, prox_conjugate};
use hsdenoise::regularizer::{
    extract_blocks, s3ttv_value, scatter_blocks_adjoint, BlockShape, Regularizer, StructureTensorBlock,
};
use hsdenoise::solver::{compute_stepsizes, solve, DenoiseProblem, Radii, Solution, StoppingRule};
use hsdenoise::synthetic::piecewise_constant_cube;
use hsdenoise::{Axis, DMatrix, HSCube};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Optimum of the 6x6x3 miniature problem from three independent conic
/// solvers (CLARABEL, SCS, CVXOPT agree to 1e-8), see
/// `fixtures/miniature_oracle.py`.
const MINIATURE_OPTIMUM: f64 = 0.083396495;

const SUITE_SEED: u64 = 7;
const SUITE_BLOCK: usize = 4;

struct Outcome {
    pass: bool,
    detail: String,
}

fn gaussian_cube(rng: &mut ChaCha8Rng, n1: usize, n2: usize, n3: usize) -> HSCube {
    HSCube::from_fn(n1, n2, n3, |_, _, _| rng.sample(StandardNormal)).unwrap()
}

fn uniform_cube(rng: &mut ChaCha8Rng, n1: usize, n2: usize, n3: usize) -> HSCube {
    HSCube::from_fn(n1, n2, n3, |_, _, _| rng.random_range(0.0..1.0)).unwrap()
}

fn adjoint_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0_f64;
    let mut check = |lhs: f64, rhs: f64, scale: f64| worst = worst.max((lhs - rhs).abs() / scale);
    for _ in 0..100 {
        let (n1, n2, n3) = (rng.random_range(1..9), rng.random_range(1..9), rng.random_range(1..7));
        let x = gaussian_cube(&mut rng, n1, n2, n3);
        let y = gaussian_cube(&mut rng, n1, n2, n3);
        let z = gaussian_cube(&mut rng, n1, n2, n3);
        for axis in Axis::ALL {
            check(forward_diff(&x, axis).dot(&y), x.dot(&adjoint_diff(&y, axis)), x.norm2() * y.norm2());
        }
        // D = (Dv; Dh) against the pair (y, z).
        let d_lhs = forward_diff(&x, Axis::Vertical).dot(&y) + forward_diff(&x, Axis::Horizontal).dot(&z);
        let d_rhs = x.dot(&adjoint_diff(&y, Axis::Vertical).add(&adjoint_diff(&z, Axis::Horizontal)));
        check(d_lhs, d_rhs, x.norm2() * (y.norm2().hypot(z.norm2())));
        // Second-order differences.
        let (a, b) = second_order_diff(&x);
        check(a.dot(&y) + b.dot(&z), x.dot(&second_order_diff_adjoint(&y, &z)), x.norm2() * y.norm2().hypot(z.norm2()));

        // Block extraction against scattering, random block shape and stride.
        let (bh, bw) = (rng.random_range(1..=n1), rng.random_range(1..=n2));
        let stride = rng.random_range(1..=bh.min(bw));
        let geom = BlockShape::tiled(bh, bw).with_stride(stride).bind(n1, n2).unwrap();
        let blocks = extract_blocks(&x, &y, &geom).unwrap();
        let duals: Vec<StructureTensorBlock> = blocks
            .iter()
            .map(|blk| StructureTensorBlock {
                matrix: DMatrix::from_fn(blk.matrix.nrows(), blk.matrix.ncols(), |_, _| rng.sample(StandardNormal)),
                block_index: blk.block_index,
            })
            .collect();
        let lhs: f64 = blocks.iter().zip(&duals).map(|(l, w)| l.matrix.dot(&w.matrix)).sum();
        let (sa, sb) = scatter_blocks_adjoint(&duals, &geom, (n1, n2, n3)).unwrap();
        let dual_norm = duals.iter().map(|w| w.matrix.norm_squared()).sum::<f64>().sqrt();
        check(lhs, x.dot(&sa) + y.dot(&sb), x.norm2().hypot(y.norm2()) * dual_norm);
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: worst <= 1e-10 && secs < 10.0,
        detail: format!("100 instances x (Dv, Dh, Ds, D, DDs, Phi); worst relative gap {worst:.1e}; {secs:.2} s"),
    }
}

fn sort_projection(x: &[f64], radius: f64) -> Vec<f64> {
    if x.iter().map(|v| v.abs()).sum::<f64>() <= radius {
        return x.to_vec();
    }
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (r, m) in mags.iter().enumerate() {
        cum += m;
        let t = (cum - radius) / (r + 1) as f64;
        if *m > t {
            theta = t;
        }
    }
    x.iter().map(|v| (v.abs() - theta).max(0.0).copysign(*v)).collect()
}

fn svd_clip(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let mut svd = m.clone().svd(true, true);
    svd.singular_values.iter_mut().for_each(|s| *s = f(*s));
    svd.recompose().unwrap()
}

fn prox_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);

    let mut l1_gap = 0.0_f64;
    for _ in 0..1000 {
        let len = (10f64.powf(rng.random_range(0.0..=4.0))).round() as usize;
        let x: Vec<f64> = (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm: f64 = x.iter().map(|v| v.abs()).sum();
        let radius = norm * rng.random_range(0.0..1.2);
        let got = prox::project_l1_ball_slice(&x, radius);
        let want = sort_projection(&x, radius);
        for (a, b) in got.iter().zip(&want) {
            l1_gap = l1_gap.max((a - b).abs());
        }
    }

    // Nuclear prox against singular value soft thresholding, and the
    // subgradient condition (M - Z) / gamma in the subdifferential of the
    // nuclear norm at Z: spectral norm <= 1 and <W, Z> = ||Z||_*.
    let (mut nuc_gap, mut sub_gap) = (0.0_f64, 0.0_f64);
    for b in 0..50 {
        let (r, c) = (rng.random_range(1..=10), rng.random_range(1..=10));
        let m = DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal));
        let top = m.clone().svd(false, false).singular_values.max();
        let gamma = top * rng.random_range(0.05..1.1);
        let z = prox::prox_nuclear(&m, gamma, b).unwrap();
        nuc_gap = nuc_gap.max((&z - svd_clip(&m, |s| (s - gamma).max(0.0))).norm());
        let w = (&m - &z) / gamma;
        let spectral = w.clone().svd(false, false).singular_values.max();
        let z_nuc = z.clone().svd(false, false).singular_values.sum();
        sub_gap = sub_gap.max((spectral - 1.0).max(0.0)).max((w.dot(&z) - z_nuc).abs());
    }

    // Conjugate prox through Moreau's identity against the closed forms of
    // the four conjugates.
    let mut moreau = 0.0_f64;
    for b in 0..50 {
        let gamma = rng.random_range(0.1..3.0);
        let m = DMatrix::from_fn(6, 8, |_, _| 2.0 * rng.sample::<f64, _>(StandardNormal));
        let got = prox_conjugate(&m, gamma, |z: &DMatrix<f64>, l| prox::prox_nuclear(z, l, b)).unwrap();
        moreau = moreau.max((got - svd_clip(&m, |s| s.min(1.0))).norm());

        let x = gaussian_cube(&mut rng, 5, 4, 3).scale(2.0);
        let got = prox_conjugate(&x, gamma, |z: &HSCube, l| Ok(prox::prox_l1_norm(z, l))).unwrap();
        moreau = moreau.max(got.sub(&x.map(|v| v.clamp(-1.0, 1.0))).norm2());

        let got = prox_conjugate(&x, gamma, |z: &HSCube, _| prox::BallSpec::ZeroSet.project(z)).unwrap();
        moreau = moreau.max(got.sub(&x).norm2());

        let center = gaussian_cube(&mut rng, 5, 4, 3);
        let eps = rng.random_range(0.1..4.0);
        let got = prox_conjugate(&x, gamma, |z: &HSCube, _| prox::project_l2_ball(z, &center, eps)).unwrap();
        let shifted = x.add_scaled(-gamma, &center);
        let norm = shifted.norm2();
        let want = shifted.scale((1.0 - gamma * eps / norm).max(0.0));
        moreau = moreau.max(got.sub(&want).norm2());
    }

    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: l1_gap <= 1e-10 && nuc_gap <= 1e-6 && sub_gap <= 1e-8 && moreau <= 1e-10 && secs < 60.0,
        detail: format!(
            "l1 vs sort {l1_gap:.1e} (1000 vectors); nuclear vs SVT {nuc_gap:.1e}, subgradient {sub_gap:.1e} (50); \
             Moreau {moreau:.1e} (nuclear, l1, zero set, l2 ball); {secs:.2} s"
        ),
    }
}

struct CaseRun {
    case: NoiseCase,
    clean: HSCube,
    degraded: Degraded,
    s3ttv: Solution,
    sstv: Solution,
    s3ttv_secs: f64,
    sstv_secs: f64,
}

fn run_cases() -> Vec<CaseRun> {
    let clean = piecewise_constant_cube(32, 32, 16, SUITE_SEED).unwrap();
    let geom = BlockShape::tiled(SUITE_BLOCK, SUITE_BLOCK).bind(32, 32).unwrap();
    NoiseCase::ALL
        .iter()
        .map(|&case| {
            let spec = case.spec(SUITE_SEED);
            let degraded = simulate(&clean, &spec).unwrap();
            let radii = calibrate_radii(&spec, clean.len());
            let run = |kind| {
                let start = Instant::now();
                let p = DenoiseProblem::new(degraded.observed.clone(), radii, (0.0, 1.0), geom.clone(), kind).unwrap();
                let sol = solve(&p, &StoppingRule::default()).unwrap();
                (sol, start.elapsed().as_secs_f64())
            };
            let (s3ttv, s3ttv_secs) = run(Regularizer::S3ttv);
            let (sstv, sstv_secs) = run(Regularizer::Sstv);
            CaseRun { case, clean: clean.clone(), degraded, s3ttv, sstv, s3ttv_secs, sstv_secs }
        })
        .collect()
}

fn feasibility(runs: &[CaseRun]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for r in runs {
        for (sol, secs) in [(&r.s3ttv, r.s3ttv_secs), (&r.sstv, r.sstv_secs)] {
            let rep = &sol.report;
            let v = rep.residuals.max_violation();
            pass &= rep.converged && rep.iterations <= 20_000 && v <= 1e-6 && secs < 300.0;
        }
        parts.push(format!(
            "{}: {} it {:.1e} / {} it {:.1e}",
            r.case.number(),
            r.s3ttv.report.iterations,
            r.s3ttv.report.residuals.max_violation(),
            r.sstv.report.iterations,
            r.sstv.report.residuals.max_violation()
        ));
    }
    let slowest = runs.iter().map(|r| r.s3ttv_secs.max(r.sstv_secs)).fold(0.0, f64::max);
    Outcome {
        pass,
        detail: format!(
            "32x32x16, {SUITE_BLOCK}x{SUITE_BLOCK} blocks, S3TTV / SSTV per case [{}]; slowest {slowest:.1} s",
            parts.join("; ")
        ),
    }
}

fn gain(runs: &[CaseRun]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for r in runs {
        let noisy = mpsnr(&r.degraded.observed, &r.clean).unwrap().0;
        let ours = mpsnr(&r.s3ttv.u, &r.clean).unwrap().0;
        let base = mpsnr(&r.sstv.u, &r.clean).unwrap().0;
        pass &= ours >= base - 0.5;
        match r.case {
            NoiseCase::Case1 => pass &= ours >= noisy + 5.0,
            NoiseCase::Case6 => pass &= ours >= noisy + 3.0,
            _ => {}
        }
        parts.push(format!("{}: {noisy:.2}/{ours:.2}/{base:.2}", r.case.number()));
    }
    Outcome {
        pass,
        detail: format!("MPSNR noisy/S3TTV/SSTV dB [{}]", parts.join("; ")),
    }
}

fn destriping(runs: &[CaseRun]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for r in runs.iter().filter(|r| r.degraded.stripe.norm2() > 0.0) {
        let t = &r.s3ttv.t;
        let flat = forward_diff(t, Axis::Vertical).norm2() / t.norm2();
        let err = r.degraded.stripe.sub(t).norm2() / r.degraded.stripe.norm2();
        pass &= flat <= 1e-6 && err <= 0.5;
        parts.push(format!("{}: flat {flat:.1e}, err {err:.3}", r.case.number()));
    }
    Outcome {
        pass: pass && parts.len() == 4,
        detail: parts.join("; "),
    }
}

fn stepsizes() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (n, b) in [(10, 1usize), (20, 4), (100, 100)] {
        let geom = BlockShape::tiled(10, 10).bind(n, n).unwrap();
        let s = compute_stepsizes(&geom);
        let want = (1.0 / (8.0 * b as f64 + 1.0), 1.0, 1.0 / 3.0, 1.0 / 4.0, 1.0 / 2.0, 1.0 / 3.0);
        let got = (s.tau_u, s.tau_s, s.tau_t, s.sigma_blocks, s.sigma_stripe, s.sigma_fidelity);
        pass &= geom.block_count() == b && got == want;
        parts.push(format!("B={b}: tau_u=1/{}", 1.0 / s.tau_u));
    }
    Outcome { pass, detail: parts.join(", ") }
}

fn naive_psnr(a: &HSCube, b: &HSCube, k: usize) -> f64 {
    let mut err = 0.0;
    for j in 0..a.n2() {
        for i in 0..a.n1() {
            err += (a.get(i, j, k) - b.get(i, j, k)).powi(2);
        }
    }
    10.0 * ((a.n1() * a.n2()) as f64 / err).log10()
}

fn naive_ssim(x: &HSCube, y: &HSCube, k: usize) -> f64 {
    let (n1, n2) = (x.n1() as isize, x.n2() as isize);
    let mut w = [[0.0; 11]; 11];
    let mut total = 0.0;
    for (a, row) in w.iter_mut().enumerate() {
        for (b, cell) in row.iter_mut().enumerate() {
            let (da, db) = (a as f64 - 5.0, b as f64 - 5.0);
            *cell = (-(da * da + db * db) / 4.5).exp();
            total += *cell;
        }
    }
    let mirror = |i: isize, n: isize| -> usize {
        let mut i = i;
        while i < 0 || i >= n {
            i = if i < 0 { -i - 1 } else { 2 * n - i - 1 };
        }
        i as usize
    };
    let mut acc = 0.0;
    for j in 0..n2 {
        for i in 0..n1 {
            let mut s = [0.0; 5];
            for a in 0..11 {
                for b in 0..11 {
                    let (ii, jj) = (mirror(i + a as isize - 5, n1), mirror(j + b as isize - 5, n2));
                    let wt = w[a][b] / total;
                    let (p, q) = (x.get(ii, jj, k), y.get(ii, jj, k));
                    s[0] += wt * p;
                    s[1] += wt * q;
                    s[2] += wt * p * p;
                    s[3] += wt * q * q;
                    s[4] += wt * p * q;
                }
            }
            let (c1, c2) = (1e-4, 9e-4);
            let (vx, vy, cxy) = (s[2] - s[0] * s[0], s[3] - s[1] * s[1], s[4] - s[0] * s[1]);
            acc += (2.0 * s[0] * s[1] + c1) * (2.0 * cxy + c2) / ((s[0] * s[0] + s[1] * s[1] + c1) * (vx + vy + c2));
        }
    }
    acc / (n1 * n2) as f64
}

fn metric_conformance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut pass = true;
    let (mut psnr_gap, mut ssim_gap) = (0.0_f64, 0.0_f64);
    for _ in 0..10 {
        let (n1, n2, n3) = (rng.random_range(4..20), rng.random_range(4..20), rng.random_range(1..5));
        let x = uniform_cube(&mut rng, n1, n2, n3);
        let y = x.zip_map(&uniform_cube(&mut rng, n1, n2, n3), |a, b| 0.8 * a + 0.2 * b);
        let (self_psnr, _) = mpsnr(&x, &x).unwrap();
        let (self_ssim, _) = mssim(&x, &x).unwrap();
        pass &= self_psnr == PSNR_CAP_DB && self_ssim == 1.0;
        let (m, per) = mpsnr(&y, &x).unwrap();
        let (s, per_s) = mssim(&y, &x).unwrap();
        let mut mean_p = 0.0;
        let mut mean_s = 0.0;
        for k in 0..n3 {
            let p = naive_psnr(&y, &x, k);
            let q = naive_ssim(&y, &x, k);
            psnr_gap = psnr_gap.max((p - per[k]).abs());
            ssim_gap = ssim_gap.max((q - per_s[k]).abs());
            mean_p += p / n3 as f64;
            mean_s += q / n3 as f64;
        }
        psnr_gap = psnr_gap.max((mean_p - m).abs());
        ssim_gap = ssim_gap.max((mean_s - s).abs());
    }
    Outcome {
        pass: pass && psnr_gap <= 1e-10 && ssim_gap <= 1e-8,
        detail: format!("self -> {PSNR_CAP_DB} dB / 1.0; 10 random pairs: PSNR gap {psnr_gap:.1e} dB, SSIM gap {ssim_gap:.1e}"),
    }
}

/// Same closed-form instance as `fixtures/miniature_oracle.py`.
fn miniature() -> Outcome {
    let (mut noise_sq, mut sparse_l1, mut stripe_l1) = (0.0_f64, 0.0_f64, 0.0_f64);
    let v = HSCube::from_fn(6, 6, 3, |i, j, k| {
        let p = i + 6 * (j + 6 * k);
        let clean = 0.2 + 0.15 * k as f64 + if i >= 3 { 0.3 } else { 0.0 } + if j >= 3 { 0.2 } else { 0.0 };
        let noise = 0.04 * (1.7 * p as f64 + 0.3).sin();
        let sparse = match (p % 17 == 5, p % 2 == 0) {
            (true, true) => 0.4,
            (true, false) => -0.4,
            _ => 0.0,
        };
        let stripe = if j == 4 && k == 1 { 0.15 } else { 0.0 };
        noise_sq += noise * noise;
        sparse_l1 += f64::abs(sparse);
        stripe_l1 += stripe;
        clean + noise + sparse + stripe
    })
    .unwrap();
    let radii = Radii { alpha: 0.95 * sparse_l1, beta: 0.95 * stripe_l1, epsilon: 0.95 * noise_sq.sqrt() };
    let geom = BlockShape::tiled(3, 3).bind(6, 6).unwrap();
    let problem = DenoiseProblem::new(v, radii, (0.0, 1.0), geom.clone(), Regularizer::S3ttv).unwrap();
    let stop = StoppingRule {
        relative_change_threshold: 1e-9,
        max_iterations: 200_000,
        objective_every: 0,
        feasibility_tolerance: Some(1e-8),
    };
    let sol = solve(&problem, &stop).unwrap();
    let value = s3ttv_value(&sol.u, &geom).unwrap();
    let rel = (value - MINIATURE_OPTIMUM).abs() / MINIATURE_OPTIMUM;
    Outcome {
        pass: sol.report.converged && sol.report.residuals.max_violation() <= 1e-8 && rel <= 1e-3,
        detail: format!(
            "6x6x3, 3x3 blocks: P-PDS {value:.9} vs conic oracle {MINIATURE_OPTIMUM:.9}, relative {rel:.1e}, {} iterations",
            sol.report.iterations
        ),
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, jobs: &str| {
        let out = dir.path().join(name);
        let cli = Cli::try_parse_from([
            "hsdenoise", "experiment", "--out", out.to_str().unwrap(), "--block", "4x4",
            "--seed", "7", "--jobs", jobs,
        ])
        .unwrap();
        let Command::Experiment(args) = cli.command else { unreachable!() };
        let table = cmd_experiment(&args).unwrap();
        (table, std::fs::read(out.join("table.csv")).unwrap())
    };
    let (table, first) = run("a", "1");
    let (_, second) = run("b", "2");
    let rows = String::from_utf8_lossy(&first).lines().count() - 1;
    Outcome {
        pass: first == second && rows == 18 && table.all_ok(),
        detail: format!(
            "Cases 1-6 x (Noisy, S3TTV, SSTV) on 32x32x16, --jobs 1 vs --jobs 2: {rows} rows, byte-identical: {}",
            first == second
        ),
    }
}

fn main() {
    let mut failed = 0;
    let mut report = |name: &str, o: Outcome| {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    };
    report("adjoint suite", adjoint_suite());
    report("prox oracle suite", prox_suite());
    let runs = run_cases();
    report("solver feasibility", feasibility(&runs));
    report("denoising gain", gain(&runs));
    report("destriping", destriping(&runs));
    drop(runs);
    report("stepsize conformance", stepsizes());
    report("metric conformance", metric_conformance());
    report("miniature equivalence", miniature());
    report("determinism", determinism());
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
