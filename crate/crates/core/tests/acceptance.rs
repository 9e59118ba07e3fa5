//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::f64::consts::{FRAC_PI_2, PI};

use muband::bubble::{
    check_width, rigidity_audit, ricci_cs_gap, scalar_cs_gap, solve_critical, stability_q, width_bound,
    BubbleProblem,
};
use muband::geometry::{curvature, riemann_fd_oracle, Band, Warp};
use muband::grid::{Grid, Profile};
use muband::models::{
    check_beta_restriction, exponent_report, ricci_warp_exponent, ricci_warp_exponent_alt, ModelSpec,
};
use muband::ode::{h_kappa, perturbed_profile, sign_dichotomy, AlphaSpec, HProfile, SpectralParams};
use muband::report::ORACLE_WINDOW;
use muband::spectral::{bound_residual, principal_eigenvalue, SturmLiouville};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_band, SmoothWarp};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg)
    }
}

const GAMMAS: [f64; 3] = [0.5, 1.0, 1.5];
const LAMBDAS: [f64; 3] = [1.0, 2.0, 4.0];

fn ricci_models() -> Vec<ModelSpec> {
    let mut out = Vec::new();
    for g in GAMMAS {
        for l in LAMBDAS {
            // half of the admissible anisotropy
            let beta = 0.5 * (0.25 * (1.0 - 0.5 * g) * l).sqrt();
            out.push(ModelSpec::ricci(g, l, beta));
        }
    }
    out
}

fn scalar_models() -> Vec<ModelSpec> {
    let mut out = Vec::new();
    for (j, g) in GAMMAS.into_iter().enumerate() {
        for (k, l) in LAMBDAS.into_iter().enumerate() {
            out.push(ModelSpec::scalar(3 + (j + k) % 3, g, l));
        }
    }
    out
}

fn kappa_models() -> Vec<ModelSpec> {
    let mut out = Vec::new();
    for k in [-1, 0, 1] {
        for c in [0.0, 0.5, 1.0] {
            out.push(ModelSpec::kappa(k, c));
        }
    }
    out
}

fn with_spacing(spec: &ModelSpec, dt: f64) -> ModelSpec {
    let (a, b) = spec.interval().unwrap();
    spec.clone().with_points(((b - a) / dt).round() as usize + 1)
}

fn width_reduction_ricci() -> Outcome {
    let b = width_bound(&SpectralParams::ricci(0.0, 4.0).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure((b - FRAC_PI_2).abs() <= 1e-12, format!("bound {b}"))?;
    let near = width_bound(&SpectralParams::ricci(1e-14, 4.0).unwrap()).unwrap();
    ensure((near - FRAC_PI_2).abs() <= 1e-12, format!("γ→0 bound {near}"))?;
    Ok(format!("bound = {b:.15}"))
}

fn width_reduction_scalar() -> Outcome {
    let mut worst = 0.0f64;
    for n in 3..=7 {
        let nf = n as f64;
        for gamma in [0.0, 1e-14] {
            let p = SpectralParams::scalar(n, gamma, nf * (nf - 1.0) / 2.0).map_err(|e| e.to_string())?;
            let b = width_bound(&p).map_err(|e| e.to_string())?;
            worst = worst.max((b - 2.0 * PI / nf).abs());
        }
    }
    ensure(worst <= 1e-12, format!("max deviation {worst:e}"))?;
    Ok(format!("max |bound − 2π/n| = {worst:.1e}"))
}

fn spectral_equality() -> Outcome {
    let (mut res, mut eig) = (0.0f64, 0.0f64);
    for spec in ricci_models().into_iter().chain(scalar_models()) {
        let band = spec.build().map_err(|e| e.to_string())?;
        let params = spec.params().unwrap();
        let u = spec.u_profile(*band.grid()).unwrap();
        let r = bound_residual(&band, &u, &params).map_err(|e| e.to_string())?;
        let rel = r.max_abs() / params.lambda;
        let report = principal_eigenvalue(&band, &params).map_err(|e| e.to_string())?;
        let lam = report.principal_eigenvalue.ok_or("no eigenvalue")?;
        let e = (lam - params.lambda).abs() / params.lambda;
        ensure(
            rel <= 1e-6 && e <= 1e-3,
            format!("{:?} γ={} Λ={}: residual {rel:e}, eigenvalue {lam}", spec.family, spec.gamma, spec.lambda),
        )?;
        res = res.max(rel);
        eig = eig.max(e);
    }
    Ok(format!("18 models, residual ≤ {res:.1e}, |λ₁−Λ|/Λ ≤ {eig:.1e}"))
}

/// Largest oracle deviation over the central window of a band.
fn oracle_gap(band: &Band) -> Result<f64, String> {
    let c = curvature(band).map_err(|e| e.to_string())?;
    let g = band.grid();
    let (a, b) = (g.t_min(), g.t_max());
    let mut worst = 0.0f64;
    for j in 0..=10 {
        let t = a + (b - a) * (0.5 - 0.5 * ORACLE_WINDOW + ORACLE_WINDOW * j as f64 / 10.0);
        let i = g.nearest(t);
        let o = riemann_fd_oracle(band, g.point(i)).map_err(|e| e.to_string())?;
        let k = i - c.offset;
        worst = worst.max((o.ric[0] - c.ric_t.values()[k]).abs());
        for (m, f) in c.ric_fiber.iter().enumerate() {
            worst = worst.max((o.ric[m + 1] - f.values()[k]).abs());
        }
        worst = worst.max((o.scalar - c.scalar.values()[k]).abs());
    }
    Ok(worst)
}

fn oracle_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    for spec in ricci_models().iter().chain(&scalar_models()).chain(&kappa_models()) {
        let band = with_spacing(spec, 1e-3).build().map_err(|e| e.to_string())?;
        let gap = oracle_gap(&band)?;
        ensure(
            gap <= 1e-5,
            format!("{:?} γ={} Λ={} κ={} c={}: {gap:e}", spec.family, spec.gamma, spec.lambda, spec.kappa, spec.c),
        )?;
        worst = worst.max(gap);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let grid = Grid::new(0.0, 1.0, 1001).unwrap();
    for j in 0..20 {
        let band = random_band(&mut rng, grid, 3 + j % 5, j % 2 == 0);
        let gap = oracle_gap(&band)?;
        ensure(gap <= 1e-5, format!("random warp {j}: {gap:e}"))?;
        worst = worst.max(gap);
    }
    Ok(format!("27 models + 20 random warps, max deviation {worst:.1e}"))
}

fn ricci_model_identities() -> Outcome {
    let mut worst = 0.0f64;
    for gamma in [0.5f64, 1.0, 1.5, 2.0] {
        for lambda in [1.0, 2.0, 4.0] {
            let beta = (0.25 * (1.0 - 0.5 * gamma) * lambda).sqrt();
            check_beta_restriction(gamma, lambda, beta).map_err(|e| e.to_string())?;
            ensure(
                check_beta_restriction(gamma, lambda, beta * 1.01 + 1e-9).is_err(),
                format!("β above the boundary accepted at γ={gamma}"),
            )?;
            let spec = ModelSpec::ricci(gamma, lambda, beta);
            let band = spec.build().map_err(|e| e.to_string())?;
            let h = spec.h_profile().unwrap();
            let Warp::DoublyWarped { phi1, phi2 } = band.warp() else {
                return Err("not doubly warped".into());
            };
            let k = (lambda * (1.0 - 0.25 * gamma)).sqrt();
            let sum = 2.0 * ricci_warp_exponent(gamma);
            for i in band.regular_range() {
                let t = band.grid().point(i);
                let prod = phi1.value(i) * phi2.value(i) / (k * t).cos().powf(sum) - 1.0;
                // flat warps at γ = 2 stay regular at the poles, where h is infinite
                let Ok(hv) = h.value(t) else { continue };
                let mean = (band.mean_curvature_at(i) - (1.0 - 0.5 * gamma) * hv) / hv.abs().max(1.0);
                let (r1, r2) = (phi1.ratio_second(i), phi2.ratio_second(i));
                let ratio = (r1 - r2) / r1.abs().max(1.0);
                worst = worst.max(prod.abs()).max(mean.abs()).max(ratio.abs());
            }
            let rep = exponent_report(gamma, lambda, 1e-8).map_err(|e| e.to_string())?;
            let named = rep.satisfying.ok_or(format!("no satisfying exponent at γ={gamma}"))?;
            ensure(
                (named - ricci_warp_exponent(gamma)).abs() < 1e-12,
                format!("γ={gamma}: named exponent {named}"),
            )?;
            if gamma < 2.0 {
                ensure(
                    rep.alternative.max() > 1e-6,
                    format!("γ={gamma}: alternative exponent {} also satisfies", ricci_warp_exponent_alt(gamma)),
                )?;
            }
        }
    }
    ensure(worst <= 1e-6, format!("identity residual {worst:e}"))?;
    Ok(format!("β at the boundary, identity residual {worst:.1e}, exponent (1−γ/2)/(2−γ/2) named"))
}

fn kappa_models_check() -> Outcome {
    let (mut mean, mut deficit) = (0.0f64, 0.0f64);
    for spec in kappa_models() {
        let band = spec.build().map_err(|e| e.to_string())?;
        let (a, b) = spec.interval().unwrap();
        for i in band.regular_range() {
            let t = band.grid().point(i);
            mean = mean.max((band.mean_curvature_at(i) - h_kappa(spec.kappa, t).unwrap()).abs());
        }
        let c = curvature(&band).map_err(|e| e.to_string())?;
        let lower = 2.0 * spec.kappa as f64;
        deficit = deficit.max(c.ric_min.values().iter().fold(0.0f64, |m, r| m.max(lower - r)));
        ensure(band.width() == b - a, format!("κ={} c={}: width {}", spec.kappa, spec.c, band.width()))?;
        let w = check_width(&band, &spec.params().unwrap()).map_err(|e| e.to_string())?;
        ensure((w.bound - w.width).abs() <= 1e-12, format!("κ={}: bound {} width {}", spec.kappa, w.bound, w.width))?;
    }
    ensure(mean <= 1e-8, format!("|H − η| = {mean:e}"))?;
    ensure(deficit <= 1e-9, format!("Ric deficit {deficit:e}"))?;
    let band = ModelSpec::kappa(0, 0.5).build().map_err(|e| e.to_string())?;
    let c = curvature(&band).unwrap();
    let i = band.grid().nearest(1.0);
    ensure((band.grid().point(i) - 1.0).abs() < 1e-12, "t = 1 is not a node".into())?;
    let ric = c.ric_t.values()[i - c.offset];
    ensure((ric - 0.375).abs() <= 1e-12, format!("Ric(∂t,∂t)(1) = {ric}"))?;
    Ok(format!("|H − η| ≤ {mean:.1e}, Ric deficit {deficit:.1e}, Ric(∂t,∂t)(1) = {ric:.15}"))
}

fn random_problem(rng: &mut ChaCha8Rng) -> (BubbleProblem, SpectralParams) {
    let grid = Grid::new(-0.5, 0.5, 1001).unwrap();
    let n = rng.gen_range(3..=5);
    let doubly = rng.gen_bool(0.5);
    let band = random_band(rng, grid, n, doubly);
    let u = SmoothWarp::random(rng).profile(grid);
    let gamma = rng.gen_range(0.5..1.5);
    let params = if n == 3 && rng.gen_bool(0.5) {
        SpectralParams::ricci(gamma, rng.gen_range(0.5..1.5)).unwrap()
    } else {
        SpectralParams::scalar(n, gamma, rng.gen_range(0.5..1.5)).unwrap()
    };
    let h = HProfile::new(params).unwrap();
    (BubbleProblem::new(band, u, h, gamma, None).unwrap(), params)
}

fn model_problem(spec: &ModelSpec) -> Result<(BubbleProblem, SpectralParams), String> {
    let band = spec.build().map_err(|e| e.to_string())?;
    let params = spec.params().unwrap();
    let u = spec.u_profile(*band.grid()).unwrap();
    let problem = BubbleProblem::new(band, u, spec.h_profile().unwrap(), params.gamma, None)
        .map_err(|e| e.to_string())?;
    Ok((problem, params))
}

fn detuned_problems() -> Vec<(BubbleProblem, SpectralParams)> {
    let bump = |t: f64| [1.0 + 0.05 * t * t, 0.1 * t, 0.1];
    let times = |f: [f64; 3], g: [f64; 3]| [f[0] * g[0], f[1] * g[0] + f[0] * g[1], f[2] * g[0] + 2.0 * f[1] * g[1] + f[0] * g[2]];
    let mut out = Vec::new();

    let spec = ModelSpec::scalar(3, 0.0, 4.0 / 3.0);
    let grid = spec.grid().unwrap();
    // exact zeros at the poles, as in the model
    let cos = |t: f64| if (t.abs() - FRAC_PI_2).abs() < 1e-12 { 0.0 } else { t.cos() };
    let xi = Profile::from_closed_form(grid, |t| times([cos(t), -t.sin(), -cos(t)], bump(t))).unwrap();
    let band = Band::single_warp_unit(3, xi).unwrap();
    let u = spec.u_profile(grid).unwrap();
    let params = spec.params().unwrap();
    out.push((BubbleProblem::new(band, u, spec.h_profile().unwrap(), 0.0, None).unwrap(), params));

    let spec = ModelSpec::ricci(1.0, 2.0, 0.0);
    let model = spec.build().unwrap();
    let Warp::DoublyWarped { phi1, phi2 } = model.warp() else { unreachable!() };
    let grid = *model.grid();
    let detune = |p: &Profile| {
        let r = p.regular();
        let vals: Vec<[f64; 3]> = (0..grid.len())
            .map(|i| if r.contains(&i) { [p.value(i), p.first(i), p.second(i)] } else { [p.value(i), 0.0, 0.0] })
            .collect();
        Profile::from_closed_form(grid, |t| times(vals[grid.nearest(t)], bump(t))).unwrap()
    };
    let band = Band::doubly_warped_unit(detune(phi1), detune(phi2)).unwrap();
    let u = spec.u_profile(grid).unwrap();
    let params = spec.params().unwrap();
    out.push((BubbleProblem::new(band, u, spec.h_profile().unwrap(), 1.0, None).unwrap(), params));
    out
}

fn variational_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut deriv = 0.0f64;
    for _ in 0..20 {
        let (p, _) = random_problem(&mut rng);
        let g = *p.working_grid();
        let delta = 1e-6;
        for j in 1..10 {
            let t = g.t_min() + (g.t_max() - g.t_min()) * (0.05 + 0.09 * j as f64);
            let fd = (p.energy(t + delta).unwrap() - p.energy(t - delta).unwrap()) / (2.0 * delta);
            let b = p.boundary_density_at(t);
            let f = p.first_variation_at(t).unwrap();
            let scale = b * (p.h().value(t).unwrap().abs() + f.abs() + 1.0);
            deriv = deriv.max((fd - f * b).abs() / scale);
        }
    }
    ensure(deriv <= 1e-5, format!("dE/dt mismatch {deriv:e}"))?;

    let (mut fmax, mut emax, mut qmax) = (0.0f64, 0.0f64, 0.0f64);
    for spec in ricci_models().iter().chain(&scalar_models()).chain(&kappa_models()) {
        let (p, params) = model_problem(spec)?;
        let label = format!("{:?} γ={} Λ={} κ={} c={}", spec.family, spec.gamma, spec.lambda, spec.kappa, spec.c);
        let f = p.first_variation().map_err(|e| e.to_string())?.max_abs();
        let trace = p.energy_trace().map_err(|e| e.to_string())?;
        let e0 = p.energy(p.reference_t0()).unwrap();
        let wg = *p.working_grid();
        let off = p.band().grid().nearest(wg.t_min());
        let drift = (0..wg.len()).fold(0.0f64, |m, k| m.max((trace.values()[k + off] - e0).abs())) / e0.abs();
        let q = wg.points().fold(0.0f64, |m, t| m.max(stability_q(&p, &params, t).unwrap().abs()));
        let res = solve_critical(&p).map_err(|e| format!("{label}: {e}"))?;
        let audit = rigidity_audit(&p, &params, res.t_star).map_err(|e| e.to_string())?;
        ensure(
            f <= 1e-7 && drift <= 1e-6 && q <= 1e-8 && audit.all_pass(),
            format!("{label}: F {f:e}, E drift {drift:e}, Q {q:e}, audit {:?}", audit.max_failing_residual()),
        )?;
        fmax = fmax.max(f);
        emax = emax.max(drift);
        qmax = qmax.max(q);
    }
    for (p, params) in detuned_problems() {
        let t = solve_critical(&p).map(|r| r.t_star).unwrap_or(p.reference_t0());
        let audit = rigidity_audit(&p, &params, t).map_err(|e| e.to_string())?;
        let r = audit.max_failing_residual().unwrap_or(0.0);
        ensure(r > 1e-3, format!("detuned band failing residual {r:e}"))?;
    }
    Ok(format!(
        "dE/dt {deriv:.1e}; models F ≤ {fmax:.1e}, E drift ≤ {emax:.1e}, Q ≤ {qmax:.1e}; detuned bands rejected"
    ))
}

fn perturbation_dichotomy() -> Outcome {
    let params = [
        SpectralParams::ricci(0.5, 1.0),
        SpectralParams::ricci(1.0, 2.0),
        SpectralParams::ricci(2.0, 2.0),
        SpectralParams::scalar(3, 0.5, 1.0),
        SpectralParams::scalar(4, 1.0, 2.0),
        SpectralParams::scalar(6, 1.5, 3.0),
    ];
    for p in params {
        let p = p.map_err(|e| e.to_string())?;
        for eps in [1e-4, 1e-3, 1e-2] {
            let prof = perturbed_profile(&p, eps, AlphaSpec::new(p.half_width())).map_err(|e| e.to_string())?;
            let d = sign_dichotomy(&prof, 2000).map_err(|e| e.to_string())?;
            ensure(d.holds, format!("{:?} γ={} ε={eps}: {d:?}", p.kind, p.gamma))?;
        }
    }
    Ok("6 bounds × 3 ε".into())
}

fn eigen_calibration() -> Outcome {
    let mut flat = 0.0f64;
    for len in [1.0, 2.5] {
        for gamma in [0.5, 1.0, 2.0] {
            let band = Band::flat(3, Grid::new(0.0, len, 2001).unwrap()).unwrap();
            let params = SpectralParams::ricci(gamma, 1.0).unwrap();
            let lam = principal_eigenvalue(&band, &params)
                .map_err(|e| e.to_string())?
                .principal_eigenvalue
                .ok_or("no eigenvalue")?;
            let exact = gamma * PI * PI / (len * len);
            flat = flat.max((lam - exact).abs() / exact);
        }
    }
    ensure(flat <= 1e-6, format!("flat band error {flat:e}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let grid = Grid::new(0.0, 1.0, 401).unwrap();
    let (mut shift_err, mut violations) = (0.0f64, 0);
    for _ in 0..10 {
        let band = random_band(&mut rng, grid, 3, true);
        let params = SpectralParams::ricci(rng.gen_range(0.2..2.0), 1.0).unwrap();
        let op = SturmLiouville::from_band(&band, &params).map_err(|e| e.to_string())?;
        let base = op.principal().map_err(|e| e.to_string())?.value;
        let s = rng.gen_range(-3.0..3.0);
        let shifted = op.shifted(s).principal().map_err(|e| e.to_string())?.value;
        shift_err = shift_err.max((shifted - base - s).abs() / base.abs().max(1.0));
        let bigger: Vec<f64> = op.potential().iter().map(|v| v + rng.gen_range(0.0..1.0)).collect();
        let upper = op.with_potential(bigger).unwrap().principal().map_err(|e| e.to_string())?.value;
        if upper < base - 1e-10 {
            violations += 1;
        }
    }
    ensure(shift_err <= 1e-9 && violations == 0, format!("shift {shift_err:e}, monotonicity violations {violations}"))?;
    Ok(format!("flat error {flat:.1e}, shift error {shift_err:.1e}, monotone on 10 pairs"))
}

fn cauchy_schwarz() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut neg, mut eq) = (0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let gamma = rng.gen_range(0.0..2.0);
        let n = rng.gen_range(3..=7);
        let (w, h): (f64, f64) = (rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
        let scale = 1.0 + w * w + h * h;
        neg = neg.max(-ricci_cs_gap(gamma, w, h) / scale).max(-scalar_cs_gap(n, gamma, w, h) / scale);
        let d = 2.0 * (n as f64 - 1.0) + gamma * (2.0 - n as f64);
        eq = eq.max(ricci_cs_gap(gamma, h / 2.0, h).abs()).max(scalar_cs_gap(n, gamma, h / d, h).abs());
    }
    ensure(neg <= 1e-14, format!("negative gap {neg:e}"))?;
    ensure(eq <= 1e-12, format!("equality residual {eq:e}"))?;
    Ok(format!("10⁴ samples, equality residual {eq:.1e}"))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("1 width bound, Ricci γ→0", width_reduction_ricci),
        ("2 width bound, scalar γ→0", width_reduction_scalar),
        ("3 model spectral equality", spectral_equality),
        ("4 curvature oracle equivalence", oracle_equivalence),
        ("5 doubly warped model identities", ricci_model_identities),
        ("6 kappa models", kappa_models_check),
        ("7 variational identities", variational_identities),
        ("8 perturbation dichotomy", perturbation_dichotomy),
        ("9 eigensolver calibration", eigen_calibration),
        ("10 Cauchy-Schwarz gaps", cauchy_schwarz),
    ];
    let mut failed = Vec::new();
    for (name, run) in criteria {
        let start = std::time::Instant::now();
        match run() {
            Ok(msg) => println!("PASS {name}: {msg} ({:.2} s)", start.elapsed().as_secs_f64()),
            Err(msg) => {
                println!("FAIL {name}: {msg}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
