//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use surfdyn::action::{
    asymptotic_mean_integral, birkhoff_mean, build_action, calabi, inequality_check, mean_actions, ActionOptions,
    CensusVerdict,
};
use surfdyn::equidist::restrict_orbit_set;
use surfdyn::geometry::{verify_cap_chart, IntegrationOptions};
use surfdyn::homology::{flux_report, isotopy_flux, sweep_area, CycleSpec, Isotopy, Verdict};
use surfdyn::linalg::Mat2;
use surfdyn::maps::{
    annulus_flip, annulus_shear, annulus_twist, area_preservation_defect, extend_boundary_rotation,
    hamiltonian_time_one, identity, moser_interpolate, moser_pullback_defect, perturbed_twist, radial_twist,
    rigid_rotation, Density, Hamiltonian, IntegratorConfig, MoserConfig, OneForm,
};
use surfdyn::orbits::toy::GridPermutation;
use surfdyn::orbits::{find_orbits, OrbitSet, SearchConfig};
use surfdyn::{cap_surface, ChartId, Jet2, Point, Surface, SurfaceMap};
use surfdyn_cli::{execute, Command, ExperimentConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Criterion = fn() -> Outcome;

fn main() {
    let criteria: [(&str, f64, Criterion); 10] = [
        ("capping exactness", 1.0, capping_exactness),
        ("area preservation", 10.0, area_preservation),
        ("closed-form Calabi oracle", 30.0, calabi_oracle),
        ("primitive independence, Monte Carlo, Birkhoff", 60.0, action_consistency_suite),
        ("rigid rotation degenerate case", 30.0, rigid_rotation_case),
        ("flux and rationality", 5.0, flux_rationality),
        ("orbit-finder oracle", 30.0, orbit_finder),
        ("Moser interpolation", 10.0, moser),
        ("restriction operator", 30.0, restriction),
        ("determinism", 120.0, determinism),
    ];
    let mut failed = 0;
    for (k, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            check(false, format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let pass = out.pass && secs < *budget;
        if !pass {
            failed += 1;
        }
        println!(
            "{} [{:>2}] {name} ({secs:.2} s, budget {budget} s): {}",
            if pass { "PASS" } else { "FAIL" },
            k + 1,
            out.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn capping_exactness() -> Outcome {
    let (a, b, n, delta) = (1.0, 2.0, 1.0, 0.1);
    let disk = Surface::disk(a).unwrap();
    let capped = cap_surface(&disk, b, delta).unwrap();
    let chart = capped.capping().unwrap().chart;
    let r0 = ((b - a) / (n * PI)).sqrt();
    let r1 = ((b - a + n * delta) / (n * PI)).sqrt();
    let (e0, e1) = ((chart.r0 - r0).abs(), (chart.r1 - r1).abs());
    let defect = verify_cap_chart(&chart, a, b, 1, delta, 100);
    check(
        e0 < 1e-14 && e1 < 1e-14 && defect < 1e-10,
        format!("|r0 err| = {e0:.1e}, |r1 err| = {e1:.1e}, pullback defect = {defect:.1e}"),
    )
}

fn area_preservation() -> Outcome {
    let disk = Surface::disk(1.0).unwrap();
    let ann = Surface::annulus(1.0).unwrap();
    let capped = cap_surface(&disk, 2.0, 0.1).unwrap();
    let rot = Arc::new(rigid_rotation(&disk, 0.3).unwrap());
    let families: Vec<(&str, SurfaceMap)> = vec![
        ("identity", identity(&disk)),
        ("disk rotation", rigid_rotation(&disk, 0.3).unwrap()),
        ("annulus rotation", rigid_rotation(&ann, 0.3).unwrap()),
        ("radial twist", radial_twist(&disk, &[0.5, -0.5]).unwrap()),
        ("annulus shear", annulus_shear(&ann, 0.3).unwrap()),
        ("annulus twist", annulus_twist(&ann, &[0.1, 0.7, -0.2]).unwrap()),
        ("annulus flip", annulus_flip(&ann, 0.2).unwrap()),
        ("perturbed twist", perturbed_twist(&ann, 0.05, 0.6, 0.1).unwrap()),
        ("capped extension", extend_boundary_rotation(&rot, &capped).unwrap()),
    ];
    let mut worst: f64 = 0.0;
    let mut detail = Vec::new();
    for (name, m) in &families {
        let d = area_preservation_defect(m, 1000, 11).unwrap();
        worst = worst.max(d);
        if d > 1e-8 {
            detail.push(format!("{name}: {d:.1e}"));
        }
    }
    let cfg = IntegratorConfig::default();
    let mut ham_worst: f64 = 0.0;
    for (s, h) in [(&disk, "(1 - r2)^2 * sin(3*x + y)"), (&ann, "s^2 * (1 - s)^2 * cos(2*pi*(t - time))")] {
        let m = hamiltonian_time_one(s, &Hamiltonian::from_expression(h, s).unwrap(), &cfg).unwrap();
        ham_worst = ham_worst.max(area_preservation_defect(&m, 1000, 12).unwrap());
    }
    check(
        worst <= 1e-8 && ham_worst <= cfg.tol && detail.is_empty(),
        format!(
            "{} families, max |det Dφ − 1| = {worst:.1e}; Hamiltonian max = {ham_worst:.1e} (tol {:.0e}) {}",
            families.len(),
            cfg.tol,
            detail.join(", ")
        ),
    )
}

fn calabi_oracle() -> Outcome {
    let disk = Surface::disk(1.0).unwrap();
    // Θ(r) = π(1 − r²) = 2π(1/2 − r²/2)
    let m = Arc::new(radial_twist(&disk, &[0.5, -0.5]).unwrap());
    let beta = OneForm::new("(2π)⁻¹(x dy − y dx)", Arc::new(|_, y| -y / (2.0 * PI)), Arc::new(|x, _| x / (2.0 * PI)));
    let prof = build_action(&m, &beta, 0, None, ActionOptions::default()).unwrap();
    // f(r) = (1 − r⁴)/4 and Cal = (1/π)·2π∫₀¹ f r dr = 1/6
    let oracle_f = |r2: f64| (1.0 - r2 * r2) / 4.0;
    let mut f_err: f64 = 0.0;
    for k in 0..50 {
        let (r, th) = (k as f64 / 49.0, 2.4 * k as f64);
        let p = Point::base(r * th.cos(), r * th.sin());
        f_err = f_err.max((prof.f(&p).unwrap() - oracle_f(r * r)).abs());
    }
    let cal = calabi(&prof, IntegrationOptions::default(), 20_000, 3).unwrap();
    let cal_err = (cal.cal - 1.0 / 6.0).abs();
    let found = find_orbits(&m, &SearchConfig { max_period: 3, grid: 8, boundary_search: false, ..Default::default() })
        .unwrap();
    let records = mean_actions(&prof, &found.orbits).unwrap();
    let center = found
        .orbits
        .iter()
        .zip(&records)
        .find(|(o, _)| o.period == 1 && o.points[0].coords().norm() < 1e-9)
        .map(|(_, r)| r.mean_action);
    let center_err = center.map_or(f64::INFINITY, |c| (c - 0.25).abs());
    let boundary = birkhoff_mean(&m, |p| prof.f(p), &Point::base(0.6, 0.8), 200, false).unwrap();
    let ineq = inequality_check(cal.cal, &records, 1e-9).unwrap();
    check(
        f_err < 1e-10
            && cal_err < 1e-6
            && center_err < 1e-8
            && boundary.estimate.abs() < 1e-8
            && ineq.verdict == CensusVerdict::HoldsOnCensus,
        format!(
            "max |f − (1−r⁴)/4| = {f_err:.1e}, |Cal − 1/6| = {cal_err:.1e}, center err = {center_err:.1e}, \
             boundary mean = {:.1e}, census of {} orbits {:?}",
            boundary.estimate, ineq.census_size, ineq.verdict
        ),
    )
}

fn action_consistency_suite() -> Outcome {
    // (a) primitives differing by an exact form
    let disk = Surface::disk(1.0).unwrap();
    let twist = Arc::new(radial_twist(&disk, &[0.5, -0.5]).unwrap());
    let beta = OneForm::standard_primitive(&disk).unwrap();
    let other = beta.plus(&OneForm::exact_from_expression("x^3*y + sin(2*y) + x", &disk).unwrap());
    let pa = build_action(&twist, &beta, 0, None, ActionOptions::default()).unwrap();
    let pb = build_action(&twist, &other, 0, Some(Point::base(0.2, 0.1)), ActionOptions::default()).unwrap();
    let found =
        find_orbits(&twist, &SearchConfig { max_period: 3, grid: 8, boundary_search: false, ..Default::default() })
            .unwrap();
    let ra = mean_actions(&pa, &found.orbits).unwrap();
    let rb = mean_actions(&pb, &found.orbits).unwrap();
    let a_err = ra.iter().zip(&rb).map(|(x, y)| (x.mean_action - y.mean_action).abs()).fold(0.0, f64::max);
    let a_ok = ra.len() >= 10 && a_err < 1e-8;

    // (b) Monte Carlo ∫f^∞ω against quadrature ∫fω on a non-integrable map
    let ann = Surface::annulus(1.0).unwrap();
    let pt = Arc::new(perturbed_twist(&ann, 0.05, 0.6, 0.1).unwrap());
    let beta0 = OneForm::standard_primitive(&ann).unwrap();
    // the path tolerance only needs to sit far below the Monte Carlo band
    let loose = ActionOptions { path_tol: 1e-10, ..Default::default() };
    let mc_prof = build_action(&pt, &beta0, 0, None, loose).unwrap();
    let prof = build_action(&pt, &beta0, 0, None, ActionOptions::default()).unwrap();
    let cal = calabi(&prof, IntegrationOptions::default(), 1000, 5).unwrap();
    let mc = asymptotic_mean_integral(&mc_prof, 2000, 100, 6).unwrap();
    let gap = (mc.estimate - cal.cal).abs();
    let band = mc.half_width + cal.quadrature_tolerance + 2.0 * loose.path_tol;
    let b_ok = gap <= band;

    // (c) d-step Birkhoff average at a period-d point
    let orbits = find_orbits(&pt, &SearchConfig { max_period: 10, grid: 6, ..Default::default() }).unwrap();
    let mut c_err: f64 = 0.0;
    let mut c_count = 0;
    for o in orbits.orbits.iter().filter(|o| o.residual < 1e-10) {
        let s = o.sum(|p| prof.f(p).unwrap());
        let bm = birkhoff_mean(&pt, |p| prof.f(p), &o.points[0], o.period, false).unwrap();
        c_err = c_err.max((bm.estimate - s / o.period as f64).abs());
        c_count += 1;
    }
    let c_ok = c_count > 0 && c_err < 1e-10;
    check(
        a_ok && b_ok && c_ok,
        format!(
            "(a) {} orbits, max diff {a_err:.1e}; (b) |MC − quad| = {gap:.1e} ≤ {band:.1e}: {b_ok}; \
             (c) {c_count} orbits, max diff {c_err:.1e}",
            ra.len()
        ),
    )
}

fn rigid_rotation_case() -> Outcome {
    let disk = Surface::disk(1.0).unwrap();
    let m = Arc::new(rigid_rotation(&disk, 0.3).unwrap());
    let prof = build_action(&m, &OneForm::standard_primitive(&disk).unwrap(), 0, None, ActionOptions::default())
        .unwrap();
    let cal = calabi(&prof, IntegrationOptions::default(), 1000, 1).unwrap();
    let found = find_orbits(&m, &SearchConfig { max_period: 10, grid: 6, ..Default::default() }).unwrap();
    let records = mean_actions(&prof, &found.orbits).unwrap();
    let worst = records.iter().map(|r| r.mean_action.abs()).fold(0.0, f64::max);
    check(
        cal.cal.abs() < 1e-10 && !records.is_empty() && worst < 1e-10,
        format!("Cal = {:.1e}, {} orbits, max |mean action| = {worst:.1e}", cal.cal, records.len()),
    )
}

fn flux_rationality() -> Outcome {
    let ann = Surface::annulus(1.0).unwrap();
    let disk = Surface::disk(1.0).unwrap();
    let core = CycleSpec::builtin(&ann, "core").unwrap();
    let radial = CycleSpec::builtin(&ann, "radial").unwrap();
    let mut ham: f64 = 0.0;
    for h in ["s^2 * (1 - s)^2 * sin(2*pi*t)", "s^3 * (1 - s)^3 * cos(2*pi*(t - time)) + 0.2"] {
        let iso = Isotopy::Hamiltonian(Hamiltonian::from_expression(h, &ann).unwrap());
        for c in [&core, &radial] {
            ham = ham.max(isotopy_flux(&ann, &iso, c, 1e-12).unwrap().abs());
        }
    }
    let b0 = CycleSpec::builtin(&disk, "boundary-0").unwrap();
    let iso = Isotopy::Hamiltonian(Hamiltonian::from_expression("(1 - r2)^2 * x * y", &disk).unwrap());
    ham = ham.max(isotopy_flux(&disk, &iso, &b0, 1e-12).unwrap().abs());

    let mut ok = ham < 1e-8;
    let mut detail = vec![format!("Hamiltonian max |flux| = {ham:.1e}")];
    for (c, want) in [(0.5, Some((1, 2))), (0.3, Some((3, 10))), (FRAC_1_SQRT_2, None)] {
        let iso = Isotopy::Shear { c };
        let rep = flux_report(&ann, &iso, std::slice::from_ref(&radial), 1.0, 50, 1e-9).unwrap();
        let f = &rep.fluxes[0];
        // sweep-area route, independent of the flux integrand
        let swept = sweep_area(&ann, &iso, &radial, 64).unwrap();
        let verdict_ok = match (want, f.verdict) {
            (Some((p, q)), Verdict::Rational { p: gp, q: gq }) => (p, q) == (gp, gq),
            (None, Verdict::IrrationalWithinTolerance { .. }) => true,
            _ => false,
        };
        ok &= (f.flux - c).abs() < 1e-8 && (swept - c).abs() < 1e-8 && verdict_ok;
        detail.push(format!("c = {c:.6}: flux err {:.1e}, sweep err {:.1e}, {:?}", (f.flux - c).abs(), (swept - c).abs(), f.verdict));
    }
    check(ok, detail.join("; "))
}

fn orbit_finder() -> Outcome {
    let g = GridPermutation::cat_map(64);
    let max_period = 48;
    let found: BTreeSet<_> = g.find_cycles(max_period).orbits.into_iter().collect();
    // brute force: walk each unvisited cell's cycle
    let mut seen = BTreeSet::new();
    let mut expect = BTreeSet::new();
    for i in 0..64 {
        for j in 0..64 {
            if seen.contains(&(i, j)) {
                continue;
            }
            let mut cycle = vec![(i, j)];
            seen.insert((i, j));
            let (mut a, mut b) = ((2 * i + j) % 64, (i + j) % 64);
            while (a, b) != (i, j) {
                seen.insert((a, b));
                cycle.push((a, b));
                (a, b) = ((2 * a + b) % 64, (a + b) % 64);
            }
            if cycle.len() <= max_period {
                let k = (0..cycle.len()).min_by_key(|&k| cycle[k]).unwrap();
                cycle.rotate_left(k);
                expect.insert(cycle);
            }
        }
    }
    let toy_ok = found == expect;

    let disk = Surface::disk(1.0).unwrap();
    let m = rigid_rotation(&disk, 1.0 / 3.0).unwrap();
    let rep = find_orbits(&m, &SearchConfig { max_period: 3, grid: 6, ..Default::default() }).unwrap();
    let three: Vec<_> = rep.orbits.iter().filter(|o| o.period == 3).collect();
    let residual = three.iter().map(|o| o.residual).fold(0.0, f64::max);
    let monodromy = three
        .iter()
        .map(|o| (o.monodromy_matrix() - Mat2::identity()).abs().max())
        .fold(0.0, f64::max);
    check(
        toy_ok && !three.is_empty() && residual < 1e-10 && monodromy < 1e-8,
        format!(
            "cat map: {} cycles found, {} enumerated, equal = {toy_ok}; rotation 1/3: {} period-3 orbits, \
             max residual {residual:.1e}, max |Dφ³ − I| {monodromy:.1e}",
            found.len(),
            expect.len(),
            three.len()
        ),
    )
}

fn moser() -> Outcome {
    let ann = Surface::annulus(1.0).unwrap();
    let eps = 0.1;
    let rho0 = Density::constant(1.0);
    // ∫(1 + ε cos 2πt) ds dt = 1, so no rescaling is needed
    let rho1 = Density::new("1 + ε cos 2πt", Arc::new(move |_, t| 1.0 + eps * (2.0 * PI * t).cos()));
    let sigma = OneForm::new(
        "−(ε/2π) sin(2πt) ds",
        Arc::new(move |_, t| -(eps / (2.0 * PI)) * (2.0 * PI * t).sin()),
        Arc::new(|_, _| Jet2::constant(0.0)),
    );
    let tau = moser_interpolate(&ann, &rho0, &rho1, &sigma, &MoserConfig::default()).unwrap();
    let defect = moser_pullback_defect(&tau, &rho0, &rho1, 64).unwrap();
    let same = moser_interpolate(&ann, &rho0, &rho0, &OneForm::zero(), &MoserConfig::default()).unwrap();
    let mut id_err: f64 = 0.0;
    for p in ann.seed_grid(16) {
        let (q, d) = same.apply_with_derivative(&p).unwrap();
        id_err = id_err.max(ann.distance(&p, &q)).max((d - Mat2::identity()).abs().max());
    }
    check(defect < 1e-7 && id_err < 1e-14, format!("pullback defect {defect:.1e}, identity error {id_err:.1e}"))
}

fn restriction() -> Outcome {
    let (a, b, delta) = (1.0, 2.0, 0.1);
    let disk = Surface::disk(a).unwrap();
    let capped = cap_surface(&disk, b, delta).unwrap();
    let rot = Arc::new(rigid_rotation(&disk, 1.0 / 3.0).unwrap());
    let ext = extend_boundary_rotation(&rot, &capped).unwrap();
    let found = find_orbits(&ext, &SearchConfig { max_period: 3, grid: 6, ..Default::default() }).unwrap();
    let set = OrbitSet::uniform(&capped, &found.orbits).unwrap();
    let restricted = match restrict_orbit_set(&set, &capped) {
        Ok(r) => r,
        Err(e) => return check(false, format!("restriction failed: {e}")),
    };
    // membership oracle: a cap-chart point lies in Z iff its radius is at least r0
    let r0 = ((b - a) / PI).sqrt();
    let in_z = |p: &Point| match p.chart {
        ChartId::Cap(_) => p.u.hypot(p.v) >= r0 - 1e-9,
        _ => true,
    };
    let expect: Vec<usize> =
        found.orbits.iter().filter(|o| o.points.iter().all(in_z)).map(|o| o.id).collect();
    let straddle = found.orbits.iter().filter(|o| {
        let k = o.points.iter().filter(|p| in_z(p)).count();
        k > 0 && k < o.points.len()
    });
    let got: Vec<usize> = restricted.terms.iter().map(|(_, o)| o.id).collect();
    let caps = found.orbits.len() - expect.len();
    let straddling = straddle.count();
    check(
        got == expect && caps > 0 && !expect.is_empty() && straddling == 0,
        format!(
            "{} orbits: {} retained in Z (oracle {}), {caps} in caps, {straddling} straddling",
            found.orbits.len(),
            got.len(),
            expect.len()
        ),
    )
}

fn determinism() -> Outcome {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let runs = [
        (Command::CapCheck, "cap_check.toml"),
        (Command::Calabi, "twist_calabi.toml"),
        (Command::Inequality, "twist_calabi.toml"),
        (Command::Census, "twist_calabi.toml"),
        (Command::Flux, "shear_flux.toml"),
        (Command::Orbits, "perturbed_equidist.toml"),
        (Command::Equidist, "perturbed_equidist.toml"),
        (Command::Extend, "rotation_extend.toml"),
    ];
    let mut compared = 0;
    let mut mismatches = Vec::new();
    for (cmd, file) in runs {
        let cfg = ExperimentConfig::load(&dir.join(file)).unwrap();
        assert_eq!(cfg.workers, 1);
        let (x, y) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let (ea, eb) = (execute(cmd, &cfg, x.path()).exit_code, execute(cmd, &cfg, y.path()).exit_code);
        if ea != 0 || eb != 0 {
            mismatches.push(format!("{cmd} exited {ea}/{eb}"));
            continue;
        }
        let names: BTreeSet<_> =
            fs::read_dir(x.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
        for name in names.iter().filter(|n| *n != "manifest.json") {
            compared += 1;
            if fs::read(x.path().join(name)).ok() != fs::read(y.path().join(name)).ok() {
                mismatches.push(format!("{cmd}/{name}"));
            }
        }
    }
    check(
        mismatches.is_empty() && compared > 0,
        format!("{compared} artifacts compared byte for byte, mismatches: {mismatches:?}"),
    )
}
