//! One PASS/FAIL line per acceptance criterion. Criteria that miss their
//! target are reported, not panicked on.

use std::f64::consts::PI;
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use wgident::bspline::{
    fourier_magnitude, gaussian_fourier, gaussian_fourier_bound, make_coefficient_basis, matched_gaussian_sigma,
    SplineBasis,
};
use wgident::gpsp::{fit_support, gpsp_solve, gpsp_sweep, group_columns};
use wgident::grid::{add_noise, write_grid, NoiseSpec};
use wgident::metrics::{e2, e_res, GroundTruth};
use wgident::pipeline::{identify, RunConfig};
use wgident::select::{gf_trim, rr_select};
use wgident::simulate::{simulate, NamedProfile, PdeSpec};
use wgident::spectrum::{changepoint, periodic_count, plan_test_functions, support_half_width};
use wgident::weak::{assemble, find_group, FeatureGroup, WeakSystem};

const TRIALS: u64 = 10;
const NSRS: [f64; 4] = [0.0, 0.03, 0.05, 0.10];

fn line(id: usize, pass: bool, text: String) -> bool {
    println!("[{}] criterion {id}: {text}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn default_dict() -> Vec<FeatureGroup> {
    RunConfig::default().dictionary_groups(1).unwrap()
}

fn truth_support(spec: &PdeSpec) -> Vec<usize> {
    let dict = default_dict();
    let mut s: Vec<usize> = spec.truth_terms().iter().map(|(l, _)| find_group(&dict, l).unwrap()).collect();
    s.sort_unstable();
    s
}

struct Trial {
    exact: bool,
    e2: f64,
    e_res: f64,
}

fn recovery_trials(spec: &PdeSpec) -> Vec<(f64, Vec<Trial>)> {
    let clean = simulate(spec).unwrap();
    let cfg = RunConfig::default();
    let truth = truth_support(spec);
    let basis = make_coefficient_basis(spec.x0, spec.length, cfg.m, cfg.d).unwrap();
    let gt = GroundTruth::from_labels(&default_dict(), &basis, &spec.truth_terms()).unwrap();
    NSRS.iter()
        .map(|&nsr| {
            let trials = (0..TRIALS)
                .into_par_iter()
                .map(|seed| {
                    let data = add_noise(&clean, &NoiseSpec::new(nsr, seed)).unwrap();
                    let rep = identify(&data, &cfg).unwrap().reports.remove(0);
                    Trial {
                        exact: rep.support == truth,
                        e2: e2(&rep.coefficients, &gt.c_star).unwrap(),
                        e_res: rep.e_res,
                    }
                })
                .collect();
            (nsr, trials)
        })
        .collect()
}

fn hits(trials: &[Trial]) -> usize {
    trials.iter().filter(|t| t.exact).count()
}

fn criterion_1() -> bool {
    let start = Instant::now();
    let levels = recovery_trials(&PdeSpec::advection_diffusion(256, 200));
    let secs = start.elapsed().as_secs_f64();
    let counts: Vec<String> = levels.iter().map(|(n, t)| format!("nsr {n}: {}/{TRIALS}", hits(t))).collect();
    let ok = levels.iter().all(|(_, t)| hits(t) >= 9) && secs < 120.0;
    line(1, ok, format!("advection-diffusion {{u_x, u_xx}} exact recovery [{}] in {secs:.1} s (need >= 9/10, < 120 s)", counts.join(", ")))
}

fn criterion_2() -> bool {
    let levels = recovery_trials(&PdeSpec::viscous_burgers(256, 200));
    let counts: Vec<String> = levels.iter().map(|(n, t)| format!("nsr {n}: {}/{TRIALS}", hits(t))).collect();
    let recovery = levels.iter().all(|(_, t)| hits(t) >= 9);
    let med_e2: Vec<f64> = levels.iter().map(|(_, t)| median(t.iter().map(|x| x.e2).collect())).collect();
    let med_res: Vec<f64> = levels.iter().map(|(_, t)| median(t.iter().map(|x| x.e_res).collect())).collect();
    let at5 = NSRS.iter().position(|&n| n == 0.05).unwrap();
    let errors = med_e2[at5] < 0.2 && med_res[at5] < 0.3;
    let monotone = med_e2.windows(2).all(|w| w[1] >= w[0]);
    line(
        2,
        recovery && errors && monotone,
        format!(
            "viscous Burgers {{u^2_x, u_xx}} exact recovery [{}] (need >= 9/10); median E2 {:?}, median E_res {:?} (need E2 < 0.2 and E_res < 0.3 at 5%, E2 nondecreasing)",
            counts.join(", "),
            med_e2.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>(),
            med_res.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>(),
        ),
    )
}

/// Endpoints of the maximal run of correct flags, or `None`.
fn interval(rhos: &[f64], correct: &[bool]) -> Option<(f64, f64)> {
    let lo = correct.iter().position(|&c| c)?;
    let hi = correct.iter().rposition(|&c| c)?;
    Some((rhos[lo], rhos[hi]))
}

fn criterion_3() -> bool {
    let mut spec = PdeSpec::viscous_burgers(256, 200);
    spec.initial = NamedProfile::parse("2.5*(sin(2*pi*x)+2.5*cos(2*pi*x+0.25))").unwrap();
    let truth = truth_support(&spec);
    let data = simulate(&spec).unwrap();
    let cfg = RunConfig::default();
    let plan = plan_test_functions(&data, cfg.d + 1, cfg.tau_x, cfg.tau_t).unwrap();
    let basis = make_coefficient_basis(spec.x0, spec.length, cfg.m, cfg.d).unwrap();
    let sys = assemble(&data, &default_dict(), &basis, &plan).unwrap().remove(0);
    let sweep = gpsp_sweep(&sys.f, &sys.b, &sys.group_of_column).unwrap();
    let trims: Vec<_> = sweep.iter().map(|s| gf_trim(&sys, s, cfg.tau).unwrap()).collect();
    let q_plain: Vec<f64> = sweep.iter().map(|s| s.residual_norm.powi(2)).collect();
    let q_trim: Vec<f64> = trims.iter().map(|t| t.refit.residual_norm.powi(2)).collect();
    let rhos: Vec<f64> = (0..=240).map(|i| 10f64.powf(-6.0 + i as f64 / 40.0)).collect();
    let plain: Vec<bool> = rhos
        .iter()
        .map(|&r| sweep[rr_select(&q_plain, cfg.l, r).unwrap().theta_star - 1].support == truth)
        .collect();
    let trimmed: Vec<bool> = rhos
        .iter()
        .map(|&r| trims[rr_select(&q_trim, cfg.l, r).unwrap().theta_star - 1].refit.support == truth)
        .collect();
    let show = |i: Option<(f64, f64)>| match i {
        Some((a, b)) => format!("[{a:.3e}, {b:.3e}]"),
        None => "empty".into(),
    };
    let (ip, it) = (interval(&rhos, &plain), interval(&rhos, &trimmed));
    let contains = plain.iter().zip(&trimmed).all(|(p, t)| !p || *t) && trimmed.iter().filter(|&&t| t).count() > plain.iter().filter(|&&p| p).count();
    let ratio = match (ip, it) {
        (Some((_, a)), Some((_, b))) => b / a,
        (None, Some(_)) => f64::INFINITY,
        _ => 0.0,
    };
    let note = if ip.is_none() { " (no rho recovers the truth without trimming)" } else { "" };
    line(
        3,
        contains && ratio >= 5.0,
        format!(
            "correct-rho interval without trim {} vs with trim {}{note}; upper-endpoint ratio {ratio:.2} (need strict containment, ratio >= 5)",
            show(ip),
            show(it)
        ),
    )
}

fn criterion_4() -> bool {
    let spec = PdeSpec::viscous_burgers(256, 200);
    let truth = truth_support(&spec);
    let clean = simulate(&spec).unwrap();
    let cfg = RunConfig::default();
    let basis = make_coefficient_basis(spec.x0, spec.length, cfg.m, cfg.d).unwrap();
    let outcomes: Vec<(bool, bool, bool)> = (0..TRIALS)
        .into_par_iter()
        .map(|seed| {
            let data = add_noise(&clean, &NoiseSpec::new(0.05, seed)).unwrap();
            let plan = plan_test_functions(&data, cfg.d + 1, cfg.tau_x, cfg.tau_t).unwrap();
            let sys: WeakSystem = assemble(&data, &default_dict(), &basis, &plan).unwrap().remove(0);
            let cand = gpsp_solve(&sys.f, &sys.b, &sys.group_of_column, 6).unwrap();
            let contains = truth.iter().all(|g| cand.support.contains(g));
            let direct = contains && gf_trim(&sys, &cand, 0.1).unwrap().refit.support == truth;
            // Superset built from the truth plus the pursuit's other picks.
            let mut sup = truth.clone();
            sup.extend(cand.support.iter().filter(|g| !truth.contains(g)).take(6 - truth.len()));
            sup.sort_unstable();
            let built = fit_support(&sys.f, &sys.b, &group_columns(&sys.group_of_column), &sup);
            let rebuilt = gf_trim(&sys, &built, 0.1).unwrap().refit.support == truth;
            (contains, direct, rebuilt)
        })
        .collect();
    let contain = outcomes.iter().filter(|o| o.0).count();
    let direct = outcomes.iter().filter(|o| o.1).count();
    let built = outcomes.iter().filter(|o| o.2).count();
    line(
        4,
        direct.max(built) >= 9,
        format!(
            "nsr 0.05: pursuit theta = 6 support contains the truth {contain}/{TRIALS}, trimmed to the truth {direct}/{TRIALS}; constructed 6-group superset trimmed to the truth {built}/{TRIALS} (need >= 9/10)"
        ),
    )
}

fn criterion_5() -> bool {
    let (k, m, s) = (8usize, 3usize, 60usize);
    let groups: Vec<usize> = (0..k * m).map(|c| c / m).collect();
    let cols = group_columns(&groups);
    let subsets = |theta: usize| -> Vec<Vec<usize>> {
        (0u32..1 << k)
            .filter(|mask| mask.count_ones() as usize == theta)
            .map(|mask| (0..k).filter(|i| mask >> i & 1 == 1).collect())
            .collect()
    };
    let mut matched = 0;
    for inst in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(50_000 + inst);
        let f = loop {
            let f = DMatrix::from_fn(s, k * m, |_, _| rng.sample::<f64, _>(StandardNormal));
            let sv = f.singular_values();
            if sv.max() / sv.min() < 100.0 {
                break f;
            }
        };
        let theta = 1 + (inst % 2) as usize;
        let mut planted = Vec::new();
        while planted.len() < theta {
            let g = rng.random_range(0..k);
            if !planted.contains(&g) {
                planted.push(g);
            }
        }
        let mut c = DVector::zeros(k * m);
        for &g in &planted {
            for j in 0..m {
                c[g * m + j] = rng.sample::<f64, _>(StandardNormal);
            }
        }
        let b = &f * c + DVector::from_fn(s, |_, _| 1e-3 * rng.sample::<f64, _>(StandardNormal));
        let best = subsets(theta)
            .into_iter()
            .map(|sup| (fit_support(&f, &b, &cols, &sup).residual_norm, sup))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap()
            .1;
        if gpsp_solve(&f, &b, &groups, theta).unwrap().support == best {
            matched += 1;
        }
    }
    line(5, matched >= 95, format!("GPSP support equals the exhaustive optimum in {matched}/100 instances (need >= 95)"))
}

fn criterion_6() -> bool {
    let start = Instant::now();
    let basis = make_coefficient_basis(0.0, 2.0, 7, 6).unwrap();
    let mut unity = 0.0f64;
    let mut deriv = 0.0f64;
    let h = basis.knot_spacing();
    for i in 0..2000 {
        let x = 0.0005 + i as f64 * 0.001;
        let sum: f64 = (0..7).map(|m| basis.eval(m, 0, x).unwrap()).sum();
        unity = unity.max((sum - 1.0).abs());
        let frac = (x / h).fract();
        if frac < 1e-3 || frac > 1.0 - 1e-3 {
            continue;
        }
        for m in 0..7 {
            for r in 1..=4 {
                let step = 1e-6;
                let fd = (basis.eval(m, r - 1, x + step).unwrap() - basis.eval(m, r - 1, x - step).unwrap()) / (2.0 * step);
                let exact = basis.eval(m, r, x).unwrap();
                deriv = deriv.max((fd - exact).abs() / exact.abs().max(1.0));
            }
        }
    }
    let mut moments = 0.0f64;
    for (degree, hh) in [(6, 0.4), (3, 0.25), (0, 1.0)] {
        let b = SplineBasis::dirichlet_interior(0.0, 5.0, degree, hh).unwrap();
        let p = (degree + 1) as f64;
        for m in 0..b.count().min(4) {
            let mo = b.moments(m).unwrap();
            let mu1 = b.start(m) + p * hh / 2.0;
            let mu2 = mu1 * mu1 + p * hh * hh / 12.0;
            moments = moments.max((mo.m0 - 1.0).abs()).max((mo.m1 - mu1).abs()).max((mo.m2 - mu2).abs());
        }
    }
    let centred = SplineBasis::centered(6, 0.4).unwrap().moments(0).unwrap();
    let sigma = matched_gaussian_sigma(7, 0.4);
    moments = moments.max(centred.m1.abs()).max((centred.m2 - sigma * sigma).abs());
    let (bound, limit) = gaussian_fourier_bound(7, 0.4);
    let worst = (0..=20_000)
        .map(|i| {
            let w = -limit + 2.0 * limit * i as f64 / 20_000.0;
            (gaussian_fourier(7, 0.4, w) - fourier_magnitude(7, 0.4, w)).abs()
        })
        .fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    let ok = unity < 1e-12 && deriv < 1e-5 && moments < 1e-8 && worst <= bound && secs < 10.0;
    line(
        6,
        ok,
        format!("unity {unity:.1e} (< 1e-12), derivatives {deriv:.1e} (< 1e-5), moments {moments:.1e} (< 1e-8), Gaussian gap {worst:.3e} <= bound {bound:.3e}, {secs:.2} s (< 10 s)"),
    )
}

fn truth_residual(nx: usize, nt: usize) -> f64 {
    let spec = PdeSpec::viscous_burgers(nx, nt);
    let data = simulate(&spec).unwrap();
    let cfg = RunConfig::default();
    let plan = plan_test_functions(&data, cfg.d + 1, cfg.tau_x, cfg.tau_t).unwrap();
    let basis = make_coefficient_basis(spec.x0, spec.length, cfg.m, cfg.d).unwrap();
    let dict = default_dict();
    let sys = assemble(&data, &dict, &basis, &plan).unwrap().remove(0);
    let gt = GroundTruth::from_labels(&dict, &basis, &spec.truth_terms()).unwrap();
    e_res(&sys.f, &gt.c_star, &sys.b).unwrap()
}

fn criterion_7() -> bool {
    let coarse = truth_residual(256, 200);
    let fine = truth_residual(512, 400);
    let ratio = coarse / fine;
    line(
        7,
        coarse < 5e-2 && ratio >= 2.0,
        format!("projected-truth relative residual {coarse:.3e} at 256x200 (< 5e-2), {fine:.3e} at 512x400, reduction {ratio:.2}x (need >= 2x)"),
    )
}

fn criterion_8() -> bool {
    let alpha = support_half_width(7, 256, 2.0 / 256.0, 3.5, 20).unwrap();
    let want = 21f64.sqrt() * 255.0 * (2.0 / 256.0) * 3.5 / (2.0 * PI * 20.0);
    let alpha_ok = ((alpha - want) / want).abs() < 1e-6 && (alpha - 0.2543).abs() < 5e-5;
    let j = periodic_count(2.0, 7, 0.25);
    let y: Vec<f64> = (0..80).map(|k| if k <= 31 { 2.0 * k as f64 } else { 62.0 + 0.1 * (k - 31) as f64 }).collect();
    let bp = changepoint(&y).unwrap().breakpoint;
    line(
        8,
        alpha_ok && j == 28 && bp == 31,
        format!("alpha_x {alpha:.6} (~0.2543), J {j} (28), synthetic breakpoint {bp} (31)"),
    )
}

fn criterion_9() -> bool {
    let dir = tempfile::TempDir::new().unwrap();
    let input = dir.path().join("b.grid");
    let clean = simulate(&PdeSpec::viscous_burgers(256, 200)).unwrap();
    write_grid(&add_noise(&clean, &NoiseSpec::new(0.05, 3)).unwrap(), &input).unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_wgident"))
            .args(["identify", "--quiet", "--seed", "9", "--trials", "2", "--input"])
            .arg(&input)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        status.success().then(|| std::fs::read(out).unwrap())
    };
    let (a, b) = (run("a.json"), run("b.json"));
    let same = a.is_some() && a == b;
    line(9, same, format!("two identify runs produce byte-identical reports: {same}"))
}

fn main() {
    let checks: [(usize, fn() -> bool); 9] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
    ];
    let mut failed = Vec::new();
    for (id, check) in checks {
        if !check() {
            failed.push(id);
        }
    }
    println!("acceptance: {}/9 criteria pass; failing: {failed:?}", 9 - failed.len());
}
