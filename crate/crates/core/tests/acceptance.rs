//! One PASS/FAIL line per acceptance criterion.

use std::time::Instant;

use affine_lp::analysis::{analyze_scale, holder_constant, quasi_interp};
use affine_lp::conditions::{bite_sigma, find_lambda, path_demo, tachev_classify, tachev_f, TachevClass};
use affine_lp::decomposer::{decompose, decompose_undersynth, DecomposeOptions};
use affine_lp::dictionary::SynthesizerSpec;
use affine_lp::numerics::{dp_distance, lp_power, Grid, LatticeConfig, Signal};
use affine_lp::riesz::{
    cell_grid, empirical_riesz_bounds, injectivity_scan, lower_riesz_constant, near_kernel_sequence, riesz_ratio,
    split_pieces, SAMPLES_PER_CELL,
};
use affine_lp::stretch::{check_holder_lemma, check_lipschitz_lemma};
use affine_lp::synthesis::{synthesize, CoeffSeq};
use affine_lp::{cli, signals};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

fn report(n: &str, ok: bool, detail: String) {
    println!("{} criterion {n}: {detail}", if ok { "PASS" } else { "FAIL" });
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn gauss(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn cfg(p: f64) -> LatticeConfig {
    LatticeConfig::new(p, 2.0, 1.0).unwrap()
}

fn default_grid() -> Grid {
    Grid::covering(-4.0, 4.0, 15).unwrap()
}

#[test]
fn criterion_01_stretch_lemmas() {
    let start = Instant::now();
    let mut bad = 0usize;
    for (pi, p) in [0.25, 0.5, 0.75, 1.0].into_iter().enumerate() {
        bad += (0..1000u64)
            .into_par_iter()
            .map(|chunk| {
                let mut rng = ChaCha8Rng::seed_from_u64(pi as u64);
                rng.set_stream(chunk);
                let mut bad = 0;
                for _ in 0..1000 {
                    // moduli over many decades, and near-coincident pairs
                    let w = gauss(&mut rng) * 10f64.powf(rng.gen_range(-6.0..6.0));
                    let z = if rng.gen_bool(0.25) {
                        w + gauss(&mut rng) * w.norm() * 10f64.powf(rng.gen_range(-9.0..0.0))
                    } else {
                        gauss(&mut rng) * 10f64.powf(rng.gen_range(-6.0..6.0))
                    };
                    if !check_holder_lemma(w, z, p) || !check_lipschitz_lemma(w, z, p) {
                        bad += 1;
                    }
                }
                bad
            })
            .sum::<usize>();
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = bad == 0 && secs < 10.0;
    report("1", ok, format!("4 x 10^6 pairs, {bad} violations, {secs:.2} s"));
    assert!(ok);
}

fn random_family(rng: &mut ChaCha8Rng) -> SynthesizerSpec {
    let one = SynthesizerSpec::indicator(0.0, 1.0).unwrap();
    match rng.gen_range(0..6) {
        0 => one,
        1 => SynthesizerSpec::haar(),
        2 => SynthesizerSpec::bspline(rng.gen_range(1..=3)).unwrap(),
        3 => SynthesizerSpec::step_difference(one),
        4 => SynthesizerSpec::second_difference(one),
        _ => SynthesizerSpec::indicator(0.0, 2.0).unwrap().times(Complex64::new(0.6, -0.8)),
    }
}

#[test]
fn criterion_02_synthesis_bound() {
    let grid = Grid::covering(-4.0, 4.0, 14).unwrap();
    let mut worst = 0.0f64;
    for trial in 0..500u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(trial);
        let psi = random_family(&mut rng);
        let p = [0.25, 0.5, 0.75, 1.0][rng.gen_range(0..4)];
        let conf = cfg(p);
        let mut coeffs = CoeffSeq::new();
        for _ in 0..rng.gen_range(1..=24) {
            let j = rng.gen_range(0..=4u32);
            let span = 2i64.pow(j);
            coeffs.accumulate(j, rng.gen_range(-2 * span..span), gauss(&mut rng));
        }
        let s = synthesize(&coeffs, &psi, &conf, &grid).unwrap();
        let lhs = lp_power(&s, p).unwrap().powf(1.0 / p);
        let rhs = psi.lp_norm(p).unwrap() * coeffs.lp_norm(p);
        worst = worst.max(lhs / rhs);
    }
    // equality for disjoint atoms
    let haar = SynthesizerSpec::haar();
    let g = Grid::covering(-4.0, 4.0, 12).unwrap();
    let mut eq_err = 0.0f64;
    for p in [0.25, 0.5, 1.0] {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut coeffs = CoeffSeq::new();
        for k in -10..10 {
            coeffs.insert(2, k, gauss(&mut rng));
        }
        for psi in [haar.clone(), SynthesizerSpec::indicator(0.0, 1.0).unwrap()] {
            let s = synthesize(&coeffs, &psi, &cfg(p), &g).unwrap();
            let lhs = lp_power(&s, p).unwrap().powf(1.0 / p);
            let rhs = psi.lp_norm(p).unwrap() * coeffs.lp_norm(p);
            eq_err = eq_err.max((lhs / rhs - 1.0).abs());
        }
    }
    let ok = worst <= 1.0 + 1e-3 && eq_err <= 1e-9;
    report("2", ok, format!("max ratio {worst:.6} over 500 trials, disjoint-support equality error {eq_err:.1e}"));
    assert!(ok);
}

#[test]
fn criterion_03_analysis_holder() {
    let grid = Grid::covering(-2.0, 2.0, 12).unwrap();
    let phi = SynthesizerSpec::normalized_indicator(1.0).unwrap();
    let mut worst = 0.0f64;
    for trial in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
        let p = rng.gen_range(0.2..=1.0);
        let conf = cfg(p);
        let pieces: Vec<Complex64> = (0..64).map(|_| gauss(&mut rng)).collect();
        let f = Signal::from_fn(grid, |x| pieces[((x + 2.0) * 16.0) as usize % 64]).unwrap();
        let eps = 10f64.powf(rng.gen_range(-6.0..0.0));
        let noise: Vec<Complex64> = (0..grid.len()).map(|_| gauss(&mut rng) * eps).collect();
        let g = f.add(&Signal::new(grid, noise).unwrap()).unwrap();
        let d_fg = dp_distance(&f, &g, p).unwrap();
        let m = lp_power(&f, p).unwrap() + lp_power(&g, p).unwrap();
        let constant = holder_constant(&phi, &conf);
        for j in [1, 4, 8] {
            let tf = analyze_scale(&f, j, &phi, &conf).unwrap();
            let tg = analyze_scale(&g, j, &phi, &conf).unwrap();
            let mut diff = tf.clone();
            diff.merge(&tg.scaled(c(-1.0)));
            let rhs = constant * m.powf(1.0 - p) * d_fg.powf(p);
            worst = worst.max(diff.lp_power(p) / rhs);
        }
    }
    let ok = worst <= 1.0 + 1e-6;
    report("3", ok, format!("max lhs/rhs {worst:.6} over 200 pairs at j in {{1,4,8}}"));
    assert!(ok);
}

#[test]
fn criterion_04_quasi_interpolation() {
    let conf = cfg(0.5);
    let grid = default_grid();
    let f = signals::gaussian_bump(grid);
    let fp = lp_power(&f, 0.5).unwrap();
    let phi = SynthesizerSpec::indicator(0.0, 1.0).unwrap();

    let start = Instant::now();
    let e = dp_distance(&quasi_interp(&f, 8, &phi, &phi, &conf).unwrap(), &f, 0.5).unwrap() / fp;
    let t_a = start.elapsed().as_secs_f64();
    let ok_a = e < 0.01 && t_a < 60.0;
    report("4a", ok_a, format!("indicator, j=8: relative error {e:.4} (need < 0.01), {t_a:.2} s"));

    let start = Instant::now();
    let scaled = phi.times(c(1.5));
    let sigma = bite_sigma(&scaled, &conf, c(1.0)).unwrap();
    let e = dp_distance(&quasi_interp(&f, 8, &scaled, &phi, &conf).unwrap(), &f, 0.5).unwrap() / fp;
    let t_b = start.elapsed().as_secs_f64();
    let ok_b = (e / sigma - 1.0).abs() < 0.05 && t_b < 60.0;
    report("4b", ok_b, format!("1.5 x indicator, j=8: relative error {e:.4} vs sigma {sigma:.4}, {t_b:.2} s"));
    assert!(ok_a && ok_b);
}

#[test]
fn criterion_05_surjectivity() {
    let conf = cfg(0.5);
    let grid = default_grid();
    let phi = SynthesizerSpec::normalized_indicator(1.0).unwrap();
    let synths = [
        ("indicator", SynthesizerSpec::indicator(0.0, 1.0).unwrap()),
        ("haar", SynthesizerSpec::haar()),
        ("power_singular(1/2)", SynthesizerSpec::power_singular(0.5).unwrap()),
    ];
    let sigs = [
        ("bump", signals::gaussian_bump(grid)),
        ("triangle", signals::triangle(grid)),
        ("smoothed_step", signals::smoothed_step(grid)),
    ];
    let mut all = true;
    for (sn, psi) in &synths {
        for (fname, f) in &sigs {
            let start = Instant::now();
            let r = decompose(f, psi, &phi, &conf, &DecomposeOptions::default());
            let secs = start.elapsed().as_secs_f64();
            let (ok, detail) = match r {
                Ok(r) => {
                    let mut prev = r.f_power;
                    let decay = r.scale_trace.iter().all(|t| {
                        let ok = t.residual_power <= r.sigma_prime * prev;
                        prev = t.residual_power;
                        ok
                    });
                    let resid = r.residual_power / r.f_power;
                    let cert = r.coeff_power <= r.bound * 1.01;
                    (
                        r.converged && resid <= 1e-3 && decay && cert && secs < 300.0,
                        format!("residual {resid:.2e} in {} steps, coeff/bound {:.3}", r.iterations, r.coeff_power / r.bound),
                    )
                }
                Err(e) => (false, e.to_string()),
            };
            all &= ok;
            report(&format!("5 [{sn} x {fname}]"), ok, format!("{detail}, {secs:.1} s"));
        }
    }
    report("5", all, "decomposition of 3 signals x 3 synthesizers".into());
    assert!(all);
}

#[test]
fn criterion_06_tachev_threshold() {
    let mut ok = true;
    let mut cells = Vec::new();
    for i in 0..10 {
        let beta = 1.0 + 0.1 * i as f64;
        let r = tachev_classify(beta, 0.5).unwrap();
        let min_f = 1.0 + r.min_excess;
        let cell = match r.numeric {
            TachevClass::Boundary => "band".to_string(),
            _ => {
                let want_below = beta < 4.0 / 3.0;
                ok &= (min_f < 1.0) == want_below;
                format!("{min_f:.6}")
            }
        };
        cells.push(format!("{beta:.1}:{cell}"));
    }
    let f1 = tachev_f(1.0, 0.5, 1.0).unwrap();
    // ∫_0^1 (x^{-1/2} - 1) dx = [2√x - x]_0^1
    let exact = 1.0;
    ok &= (f1 - exact).abs() < 1e-6;
    report("6", ok, format!("min F at p=1/2: {}; F(1) for beta=1/2, p=1: {f1:.9}", cells.join(" ")));
    assert!(ok);
}

#[test]
fn criterion_07_undersynthesis() {
    let conf = cfg(0.5);
    let sd = SynthesizerSpec::step_difference(SynthesizerSpec::indicator(0.0, 1.0).unwrap());
    let scan = injectivity_scan(&sd, &conf, 256, 8);
    let scan_ok = !scan.ok && scan.worst_xi == 0.0;
    let search = find_lambda(&sd, &conf).unwrap();
    let lambda_ok = search.sigma >= 1.0 - 1e-9;
    let f = signals::gaussian_bump(default_grid());
    let (run_ok, detail) = match decompose_undersynth(&f, &sd, &conf, &DecomposeOptions::default(), 8) {
        Ok(r) => (
            r.multiplier == 2 && r.converged && r.residual_power <= 1e-3 * r.f_power,
            format!("beta {} residual {:.2e}", r.multiplier, r.residual_power / r.f_power),
        ),
        Err(e) => (false, e.to_string()),
    };
    let ok = scan_ok && lambda_ok && run_ok;
    report(
        "7",
        ok,
        format!(
            "scan fails at xi={} ({:.1e}); best sigma {:.6}; under-synthesis: {detail}",
            scan.worst_xi, scan.worst_value, search.sigma
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_08_riesz() {
    let conf = cfg(0.5);
    let haar = SynthesizerSpec::haar();
    let norm = haar.lp_norm(0.5).unwrap();
    let mut dev = 0.0f64;
    let mut per_j = Vec::new();
    for j in 1..=3 {
        let (lo, hi) = empirical_riesz_bounds(&haar, &conf, j, 200, j as u64).unwrap();
        dev = dev.max((lo - norm).abs()).max((hi - norm).abs());
        per_j.push(format!("j={j}:[{lo:.9},{hi:.9}]"));
    }
    let sd = SynthesizerSpec::step_difference(SynthesizerSpec::indicator(0.0, 1.0).unwrap());
    let tele = riesz_ratio(&sd, &conf, &near_kernel_sequence(0.0, 64, 1, &conf), SAMPLES_PER_CELL).unwrap();
    let cell = cell_grid(&conf, 10).unwrap();
    let mut c_err = 0.0f64;
    for psi in [haar.clone(), SynthesizerSpec::indicator(0.0, 1.0).unwrap(), SynthesizerSpec::bspline(1).unwrap()] {
        let system = split_pieces(&psi, &conf, &cell).unwrap();
        let est = lower_riesz_constant(&system, 0.5, 64, 0);
        // one piece: supp ψ lies in a single cell
        let exact = psi.lp_norm(0.5).unwrap();
        c_err = c_err.max((est - exact).abs());
    }
    let ok = dev <= 1e-3 * norm && tele < 0.1 && c_err <= 1e-6;
    report(
        "8",
        ok,
        format!("Haar {}; telescoping ratio at width 64: {tele:.2e}; single-piece C error {c_err:.1e}", per_j.join(" ")),
    );
    assert!(ok);
}

#[test]
fn criterion_09_path_identity() {
    let conf = cfg(0.5);
    let cases = [
        ("2 x haar", SynthesizerSpec::haar().times(c(2.0))),
        ("power_singular(1/2)", SynthesizerSpec::power_singular(0.5).unwrap()),
    ];
    let mut worst = 0.0f64;
    for (_, psi) in &cases {
        for pt in path_demo(psi, &conf, 11).unwrap() {
            worst = worst.max(pt.rel_err);
        }
    }
    let ok = worst < 1e-6;
    report("9", ok, format!("max relative error {worst:.1e} over 11 t-values for 2 x haar and power_singular"));
    assert!(ok);
}

fn run_capture(args: &[&str]) -> (i32, Vec<u8>) {
    let mut out = Vec::new();
    let code = cli::run(args.iter().map(|s| s.to_string()), &mut out);
    (code, out)
}

fn dir_bytes(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_10_determinism() {
    let commands: [&[&str]; 5] = [
        &["check", "--synth", "haar"],
        &["decompose", "--synth", "indicator", "--signal", "random_pc", "--grid", "-4:4:13", "--seed", "7"],
        &["quasi-interp", "--synth", "haar", "--signal", "triangle", "--grid", "-4:4:13", "--jmax", "5"],
        &["tachev", "--betas", "1.0,1.2,1.5"],
        &["riesz", "--synth", "bspline", "--order", "2", "--j", "1,2", "--trials", "20", "--seed", "3"],
    ];
    let mut ok = true;
    let mut files = 0;
    for args in commands {
        let mut runs = Vec::new();
        for _ in 0..2 {
            let tmp = tempfile::tempdir().unwrap();
            let mut full = vec!["affine-lp"];
            full.extend_from_slice(args);
            let out = tmp.path().to_str().unwrap().to_string();
            full.extend_from_slice(&["--out", &out]);
            let (code, stdout) = run_capture(&full);
            runs.push((code, stdout, dir_bytes(tmp.path())));
        }
        files += runs[0].2.len();
        ok &= runs[0] == runs[1] && runs[0].0 == 0 && !runs[0].2.is_empty();
    }
    report("10", ok, format!("5 subcommands run twice, {files} output files byte-identical"));
    assert!(ok);
}
