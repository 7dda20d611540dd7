//! Subcommand dispatch, artifact emission and run manifests.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use surfdyn::action::{
    build_action, calabi, inequality_check, mean_actions, p_epsilon_census, ActionProfile, CalabiReport,
    MeanActionRecord,
};
use surfdyn::equidist::{defect_sequence_experiment, restrict_orbit_set, LevelReport, TestDictionary};
use surfdyn::geometry::{verify_area_form, verify_cap_chart, IntegrationOptions};
use surfdyn::homology::{capping_compatibility, default_basis, flux_report, CycleSpec, Isotopy};
use surfdyn::linalg::Vec2;
use surfdyn::maps::{
    annulus_flip, annulus_shear, annulus_twist, area_preservation_defect, extend_boundary_rotation,
    hamiltonian_time_one, identity, perturbed_twist, radial_twist, rigid_rotation, Hamiltonian, OneForm,
};
use surfdyn::orbits::{find_orbits, OrbitSet, PeriodicOrbit};
use surfdyn::{cap_surface, Point, Surface, SurfaceMap};

use crate::config::{ExperimentConfig, MapSpec, SurfaceSpec, SCHEMA_VERSION};
use crate::error::CliError;

/// Environment variable overriding `output.dir`.
pub const OUTPUT_DIR_ENV: &str = "SURFDYN_OUTPUT_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    CapCheck,
    Orbits,
    Calabi,
    Inequality,
    Census,
    Equidist,
    Flux,
    Extend,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::CapCheck => "cap-check",
            Command::Orbits => "orbits",
            Command::Calabi => "calabi",
            Command::Inequality => "inequality",
            Command::Census => "census",
            Command::Equidist => "equidist",
            Command::Flux => "flux",
            Command::Extend => "extend",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A named file produced by a run.
#[derive(Clone, Debug)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StageTime {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ArtifactDigest {
    pub name: String,
    pub sha256: String,
}

/// Provenance of one run. Timing fields vary between runs; every other
/// artifact is reproducible.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub workers: usize,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub stages: Vec<StageTime>,
    pub convergence: Value,
    pub artifacts: Vec<ArtifactDigest>,
    pub exit_code: i32,
}

/// Outcome of [`execute`].
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub output_dir: PathBuf,
    /// Headline numbers of the run, or the diagnostic on failure.
    pub summary: Value,
}

struct Stages(Vec<StageTime>);

impl Stages {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.0.push(StageTime { stage: stage.to_string(), seconds: start.elapsed().as_secs_f64() });
        out
    }
}

struct Report {
    artifacts: Vec<Artifact>,
    convergence: Value,
    summary: Value,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn unix_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

/// `output.dir`, unless overridden by [`OUTPUT_DIR_ENV`].
pub fn resolve_output_dir(cfg: &ExperimentConfig) -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| cfg.output.dir.clone())
}

/// SHA-256 of the canonical JSON form of the config.
pub fn config_hash(cfg: &ExperimentConfig) -> Result<String, CliError> {
    Ok(sha256_hex(&serde_json::to_vec(cfg)?))
}

fn json_artifact<T: Serialize>(name: &str, command: Command, report: &T) -> Result<Artifact, CliError> {
    let doc = json!({ "schema_version": SCHEMA_VERSION, "command": command.name(), "report": report });
    let mut bytes = serde_json::to_vec_pretty(&doc)?;
    bytes.push(b'\n');
    Ok(Artifact { name: name.to_string(), bytes })
}

/// Headered CSV with a fixed column order; fields are quoted when needed.
pub fn csv_artifact(name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<Artifact, CliError> {
    if rows.is_empty() {
        return Err(CliError::Core(surfdyn::Error::EmptyCensus(format!("{name} has no rows"))));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(Artifact { name: name.to_string(), bytes })
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

/// Runs `command`, writes its artifacts (or `error.json`) and `manifest.json`
/// to `dir`, and returns the exit code.
pub fn execute(command: Command, cfg: &ExperimentConfig, dir: &Path) -> RunOutcome {
    let started = unix_ms();
    let mut stages = Stages(Vec::new());
    let result = (|| -> Result<Report, CliError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?;
        pool.install(|| dispatch(command, cfg, &mut stages))
    })();
    let (exit_code, artifacts, convergence, summary) = match result {
        Ok(r) => (0, r.artifacts, r.convergence, r.summary),
        Err(e) => {
            let diag = e.diagnostic();
            let mut bytes = serde_json::to_vec_pretty(&diag).unwrap_or_default();
            bytes.push(b'\n');
            let summary = serde_json::to_value(&diag).unwrap_or(Value::Null);
            (e.exit_code(), vec![Artifact { name: "error.json".into(), bytes }], Value::Null, summary)
        }
    };
    let written = write_all(dir, &artifacts).and_then(|_| {
        let manifest = RunManifest {
            schema_version: SCHEMA_VERSION,
            command: command.name().to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash(cfg)?,
            seed: cfg.seed,
            workers: cfg.workers,
            started_unix_ms: started,
            finished_unix_ms: unix_ms(),
            stages: stages.0,
            convergence,
            artifacts: artifacts
                .iter()
                .map(|a| ArtifactDigest { name: a.name.clone(), sha256: sha256_hex(&a.bytes) })
                .collect(),
            exit_code,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        write_all(dir, &[Artifact { name: "manifest.json".into(), bytes }])
    });
    match written {
        Ok(()) => RunOutcome { exit_code, output_dir: dir.to_path_buf(), summary },
        Err(e) => RunOutcome {
            exit_code: e.exit_code(),
            output_dir: dir.to_path_buf(),
            summary: serde_json::to_value(e.diagnostic()).unwrap_or(Value::Null),
        },
    }
}

fn write_all(dir: &Path, artifacts: &[Artifact]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    for a in artifacts {
        let path = dir.join(&a.name);
        std::fs::write(&path, &a.bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn dispatch(command: Command, cfg: &ExperimentConfig, stages: &mut Stages) -> Result<Report, CliError> {
    match command {
        Command::CapCheck => cap_check(cfg, stages),
        Command::Orbits => orbits(cfg, stages),
        Command::Calabi => calabi_cmd(cfg, stages),
        Command::Inequality => inequality(cfg, stages),
        Command::Census => census(cfg, stages),
        Command::Equidist => equidist(cfg, stages),
        Command::Flux => flux(cfg, stages),
        Command::Extend => extend(cfg, stages),
    }
}

pub fn build_surface(spec: &SurfaceSpec) -> Result<Arc<Surface>, CliError> {
    Ok(match spec {
        SurfaceSpec::Disk { area } => Surface::disk(*area)?,
        SurfaceSpec::Annulus { width } => Surface::annulus(*width)?,
    })
}

pub fn build_map(cfg: &ExperimentConfig, surface: &Arc<Surface>) -> Result<Arc<SurfaceMap>, CliError> {
    let m = match &cfg.map {
        MapSpec::Identity => identity(surface),
        MapSpec::RigidRotation { turns } => rigid_rotation(surface, *turns)?,
        MapSpec::RadialTwist { profile } => radial_twist(surface, profile)?,
        MapSpec::AnnulusShear { c } => annulus_shear(surface, *c)?,
        MapSpec::AnnulusTwist { profile } => annulus_twist(surface, profile)?,
        MapSpec::AnnulusFlip { shift } => annulus_flip(surface, *shift)?,
        MapSpec::PerturbedTwist { epsilon, kappa, margin } => perturbed_twist(surface, *epsilon, *kappa, *margin)?,
        MapSpec::Hamiltonian { expression } => {
            hamiltonian_time_one(surface, &Hamiltonian::from_expression(expression, surface)?, &cfg.integrator)?
        }
    };
    Ok(Arc::new(m))
}

/// The isotopy from the identity that generates the configured map.
pub fn build_isotopy(cfg: &ExperimentConfig, surface: &Surface) -> Result<Isotopy, CliError> {
    let disk = surface.disk_area().is_some();
    let iso = match &cfg.map {
        MapSpec::Identity => Isotopy::Identity,
        MapSpec::RigidRotation { turns } if !disk => Isotopy::Shear { c: *turns },
        MapSpec::AnnulusShear { c } => Isotopy::Shear { c: *c },
        MapSpec::RigidRotation { turns } => disk_rotation_isotopy(vec![*turns]),
        MapSpec::RadialTwist { profile } => disk_rotation_isotopy(profile.clone()),
        MapSpec::AnnulusTwist { profile } => {
            let profile = profile.clone();
            Isotopy::VectorField {
                label: "annulus twist".into(),
                field: Arc::new(move |_, z: Vec2| Vec2::new(0.0, poly(&profile, z[0]))),
            }
        }
        MapSpec::Hamiltonian { expression } => Isotopy::Hamiltonian(Hamiltonian::from_expression(expression, surface)?),
        MapSpec::AnnulusFlip { .. } | MapSpec::PerturbedTwist { .. } => {
            return Err(CliError::Core(surfdyn::Error::InvalidInput(
                "no generating isotopy is known for this map family".into(),
            )))
        }
    };
    Ok(iso)
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, k| acc * x + k)
}

/// `θ̇ = 2π P(r²)` on the disk.
fn disk_rotation_isotopy(profile: Vec<f64>) -> Isotopy {
    Isotopy::VectorField {
        label: "radial twist".into(),
        field: Arc::new(move |_, z: Vec2| {
            let w = 2.0 * PI * poly(&profile, z.norm_squared());
            Vec2::new(-w * z[1], w * z[0])
        }),
    }
}

fn action_profile(cfg: &ExperimentConfig, map: &Arc<SurfaceMap>) -> Result<ActionProfile, CliError> {
    let surface = map.surface();
    let mut beta = OneForm::standard_primitive(surface)?;
    if let Some(g) = &cfg.action.exact_term {
        beta = beta.plus(&OneForm::exact_from_expression(g, surface)?);
    }
    let basepoint = cfg.action.basepoint.map(|[u, v]| Point::base(u, v));
    Ok(build_action(map, &beta, cfg.action.gamma, basepoint, cfg.action.options)?)
}

fn calabi_report(cfg: &ExperimentConfig, profile: &ActionProfile) -> Result<CalabiReport, CliError> {
    let opts = IntegrationOptions { tol: cfg.action.quadrature_tol, max_level: cfg.action.quadrature_max_level };
    Ok(calabi(profile, opts, cfg.action.mc_samples, cfg.seed)?)
}

fn orbit_rows(orbits: &[PeriodicOrbit]) -> Vec<Vec<String>> {
    let mut sorted: Vec<&PeriodicOrbit> = orbits.iter().collect();
    sorted.sort_by_key(|o| (o.period, o.id));
    sorted
        .iter()
        .map(|o| {
            let p = o.points[0];
            vec![
                o.id.to_string(),
                o.period.to_string(),
                format!("{:?}", p.chart),
                num(p.u),
                num(p.v),
                num(o.residual),
                num(o.determinant),
                num(o.floquet[0].re),
                num(o.floquet[0].im),
                num(o.floquet[1].re),
                num(o.floquet[1].im),
                o.nondegenerate.to_string(),
                o.boundary_circle.map(|c| c.to_string()).unwrap_or_default(),
            ]
        })
        .collect()
}

const ORBIT_HEADER: [&str; 13] = [
    "orbit_id",
    "period",
    "chart",
    "u",
    "v",
    "residual",
    "determinant",
    "floquet0_re",
    "floquet0_im",
    "floquet1_re",
    "floquet1_im",
    "nondegenerate",
    "boundary_circle",
];

fn mean_action_rows(records: &[MeanActionRecord], cal: f64) -> Vec<Vec<String>> {
    let mut sorted: Vec<&MeanActionRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.period, r.orbit_id));
    sorted
        .iter()
        .map(|r| {
            vec![r.orbit_id.to_string(), r.period.to_string(), num(r.mean_action), num(r.mean_action - cal)]
        })
        .collect()
}

fn cap_check(cfg: &ExperimentConfig, stages: &mut Stages) -> Result<Report, CliError> {
    let cap = cfg.capping.as_ref().ok_or_else(|| CliError::Config("cap-check needs a [capping] section".into()))?;
    let base = build_surface(&cfg.surface)?;
    let capped = stages.time("capping", || cap_surface(&base, cap.target_area, cap.delta))?;
    let chart = capped.capping().expect("capped").chart;
    let n = base.boundary_circles().len();
    let a = base.total_area();
    let (pullback, area_form) = stages.time("verify", || {
        (verify_cap_chart(&chart, a, cap.target_area, n, cap.delta, 100), verify_area_form(&capped, 100))
    });
    let report = json!({
        "base_area": a,
        "target_area": cap.target_area,
        "circles": n,
        "delta": cap.delta,
        "r0": chart.r0,
        "r1": chart.r1,
        "pullback_defect": pullback,
        "area_form_defect": area_form,
        "surface": capped.summary(),
    });
    let summary = json!({ "r0": chart.r0, "r1": chart.r1, "pullback_defect": pullback });
    Ok(Report {
        artifacts: vec![json_artifact("cap_check.json", Command::CapCheck, &report)?],
        convergence: json!({ "pullback_defect": pullback, "area_form_defect": area_form }),
        summary,
    })
}

fn orbits(cfg: &ExperimentConfig, stages: &mut Stages) -> Result<Report, CliError> {
    let surface = build_surface(&cfg.surface)?;
    let map = stages.time("map", || build_map(cfg, &surface))?;
    let found = stages.time("search", || find_orbits(&map, &cfg.orbits))?;
    let summary = json!({
        "orbits": found.orbits.len(),
        "nondegenerate": found.orbits.iter().filter(|o| o.nondegenerate).count(),
    });
    let mut artifacts = vec![json_artifact("orbits.json", Command::Orbits, &found)?];
    if !found.orbits.is_empty() {
        artifacts.push(csv_artifact("orbits.csv", &ORBIT_HEADER, &orbit_rows(&found.orbits))?);
    }
    Ok(Report { artifacts, convergence: serde_json::to_value(found.stats)?, summary })
}

fn level_rows(profile: &ActionProfile, n: usize) -> Result<Vec<Vec<String>>, CliError> {
    let surface = profile.surface();
    let mut rows = Vec::new();
    let (u_range, v_range) = match surface.annulus_width() {
        Some(w) => ((0.0, w), (0.0, 1.0)),
        None => ((-1.0, 1.0), (-1.0, 1.0)),
    };
    for i in 0..n {
        for j in 0..n {
            let u = u_range.0 + (u_range.1 - u_range.0) * i as f64 / (n - 1) as f64;
            let v = v_range.0 + (v_range.1 - v_range.0) * j as f64 / (n - 1) as f64;
            let p = Point::base(u, v);
            if !surface.contains(&p) {
                continue;
            }
            rows.push(vec![num(u), num(v), num(profile.f(&p)?)]);
        }
    }
    Ok(rows)
}

fn calabi_cmd(cfg: &ExperimentConfig, stages: &mut Stages) -> Result<Report, CliError> {
    let surface = build_surface(&cfg.surface)?;
    let map = stages.time("map", || build_map(cfg, &surface))?;
    let profile = stages.time("action", || action_profile(cfg, &map))?;
    let cal = stages.time("calabi", || calabi_report(cfg, &profile))?;
    let rows = stages.time("level-sets", || level_rows(&profile, cfg.action.level_grid))?;
    let report = json!({ "calabi": cal, "action": profile.summary() });
    Ok(Report {
        artifacts: vec![
            json_artifact("calabi.json", Command::Calabi, &report)?,
            csv_artifact("action_levels.csv", &["u", "v", "f"], &rows)?,
        ],
        convergence: json!({
            "quadrature_tolerance": cal.quadrature_tolerance,
            "quadrature_converged": cal.quadrature_converged,
            "monte_carlo_half_width": cal.monte_carlo.half_width,
            "boundary_fluctuation": profile.boundary.fluctuation,
            "exactness_defect": profile.exactness.defect,
        }),
        summary: json!({ "cal": cal.cal, "boundary_mean": profile.boundary.value }),
    })
}

struct Census {
    profile: ActionProfile,
    cal: CalabiReport,
    orbits: Vec<PeriodicOrbit>,
    records: Vec<MeanActionRecord>,
}

fn census_data(cfg: &ExperimentConfig, stages: &mut Stages) -> Result<Census, CliError> {
    let surface = build_surface(&cfg.surface)?;
    let map = stages.time("map", || build_map(cfg, &surface))?;
    let profile = stages.time("action", || action_profile(cfg, &map))?;
    let cal = stages.time("calabi", || calabi_report(cfg, &profile))?;
    let found = stages.time("search", || find_orbits(&map, &cfg.orbits))?;
    if found.orbits.is_empty() {
        return Err(CliError::Core(surfdyn::Error::EmptyCensus("no periodic orbits found".into())));
    }
    let records = stages.time("mean-actions", || mean_actions(&profile, &found.orbits))?;
    Ok(Census { profile, cal, orbits: found.orbits, records })
}

fn inequality(cfg: &ExperimentConfig, stages: &mut Stages) -> Result<Report, CliError> {
    let c = census_data(cfg, stages)?;
    let check = inequality_check(c.cal.cal, &c.records, cfg.action.inequality_tol)?;
    let report = json!({ "inequality": check, "calabi": c.cal, "mean_actions": c.records });
    Ok(Report {
        artifacts: vec![
            json_artifact("inequality.json", Command::Inequality, &report)?,
            csv_artifact(
                "mean_actions.csv",
                &["orbit_id", "period", "mean_action", "cal_gap"],
                &mean_action_rows(&c.records, c.cal.cal),
            )?,
        ],
        convergence: json!({
            "quadrature_tolerance": c.cal.quadrature_tolerance,
            "max_birkhoff_spread": c.records.iter().map(|r| r.spread).fold(0.0, f64::max),
            "boundary_fluctuation": c.profile.boundary.fluctuation,
        }),
        summary: json!({ "cal": c.cal.cal, "verdict": check.verdict, "census": check.census_size }),
    })
}

fn census(cfg: &ExperimentConfig, stages: &mut Stages) -> Result<Report, CliError> {
    let c = census_data(cfg, stages)?;
    let rep = stages.time("census", || {
        p_epsilon_census(
            c.profile.surface(),
            c.cal.cal,
            &c.orbits,
            &c.records,
            cfg.action.census_epsilon,
            cfg.action.census_samples,
            cfg.seed,
        )
    })?;
    let report = json!({ "census": rep, "calabi": c.cal });
    Ok(Report {
        artifacts: vec![
            json_artifact("census.json", Command::Census, &report)?,
            csv_artifact(
                "mean_actions.csv",
                &["orbit_id", "period", "mean_action", "cal_gap"],
                &mean_action_rows(&c.records, c.cal.cal),
            )?,
        ],
        convergence: json!({ "quadrature_tolerance": c.cal.quadrature_tolerance }),
        summary: json!({ "cal": c.cal.cal, "p_plus": rep.p_plus, "p_minus": rep.p_minus }),
    })
}

fn defect_rows(levels: &[LevelReport]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for l in levels {
        if let Some(r) = &l.report {
            for (name, d) in r.names.iter().zip(&r.defects) {
                rows.push(vec![l.max_period.to_string(), l.orbits.to_string(), name.clone(), num(*d)]);
            }
        }
    }
    rows
}

fn equidist(cfg: &ExperimentConfig, stages: &mut Stages) -> Result<Report, CliError> {
    let surface = build_surface(&cfg.surface)?;
    let map = stages.time("map", || build_map(cfg, &surface))?;
    let dict = stages.time("dictionary", || TestDictionary::standard(&surface, cfg.dictionary.size))?;
    let levels = stages.time("defects", || {
        defect_sequence_experiment(
            &map,
            &dict,
            &cfg.dictionary.schedule,
            cfg.dictionary.weighting,
            &cfg.orbits,
            cfg.seed,
        )
    })?;
    let report = json!({ "dictionary": dict.names(), "averages": dict.averages(), "levels": levels });
    let rows = defect_rows(&levels);
    let mut artifacts = vec![json_artifact("equidist.json", Command::Equidist, &report)?];
    if !rows.is_empty() {
        artifacts.push(csv_artifact("defects.csv", &["max_period", "orbits", "function", "defect"], &rows)?);
    }
    let max_defects: Vec<Option<f64>> = levels.iter().map(|l| l.report.as_ref().map(|r| r.max_defect)).collect();
    Ok(Report {
        artifacts,
        convergence: json!({ "locality_defect": dict.locality_defect() }),
        summary: json!({ "levels": levels.len(), "max_defects": max_defects }),
    })
}

fn flux(cfg: &ExperimentConfig, stages: &mut Stages) -> Result<Report, CliError> {
    let surface = build_surface(&cfg.surface)?;
    let iso = build_isotopy(cfg, &surface)?;
    let cycles = if cfg.flux.cycles.is_empty() {
        default_basis(&surface)?
    } else {
        cfg.flux.cycles.iter().map(|c| CycleSpec::builtin(&surface, c)).collect::<surfdyn::Result<_>>()?
    };
    let base = stages.time("flux", || {
        flux_report(&surface, &iso, &cycles, surface.total_area(), cfg.flux.q_max, cfg.flux.tol)
    })?;
    let compat = match &cfg.capping {
        Some(c) => Some(capping_compatibility(&base, c.target_area)?),
        None => None,
    };
    let report = json!({ "flux": base, "capping": compat });
    let summary = json!({
        "overall": base.overall,
        "fluxes": base.fluxes.iter().map(|f| json!({ "cycle": f.cycle, "flux": f.flux, "verdict": f.verdict })).collect::<Vec<_>>(),
    });
    Ok(Report {
        artifacts: vec![json_artifact("flux.json", Command::Flux, &report)?],
        convergence: json!({ "uncertainties": base.fluxes.iter().map(|f| f.uncertainty).collect::<Vec<_>>() }),
        summary,
    })
}

fn extend(cfg: &ExperimentConfig, stages: &mut Stages) -> Result<Report, CliError> {
    let cap = cfg.capping.as_ref().ok_or_else(|| CliError::Config("extend needs a [capping] section".into()))?;
    let base = build_surface(&cfg.surface)?;
    let capped = cap_surface(&base, cap.target_area, cap.delta)?;
    let phi0 = stages.time("map", || build_map(cfg, &base))?;
    let ext = Arc::new(stages.time("extend", || extend_boundary_rotation(&phi0, &capped))?);
    let area_defect = stages.time("area-check", || area_preservation_defect(&ext, 1000, cfg.seed))?;
    let found = stages.time("search", || find_orbits(&ext, &cfg.orbits))?;
    let (kept, total) = if found.orbits.is_empty() {
        (0, 0)
    } else {
        let set = OrbitSet::uniform(&capped, &found.orbits)?;
        let restricted = stages.time("restrict", || restrict_orbit_set(&set, &capped))?;
        (restricted.terms.len(), set.terms.len())
    };
    let ext_report = ext.extension_report().cloned();
    let report = json!({
        "extension": ext_report,
        "area_defect": area_defect,
        "boundary_permutation": ext.boundary_permutation()?,
        "orbits": found.orbits.len(),
        "orbits_in_base": kept,
        "orbits_in_caps": total - kept,
        "surface": capped.summary(),
    });
    let mut artifacts = vec![json_artifact("extend.json", Command::Extend, &report)?];
    if !found.orbits.is_empty() {
        artifacts.push(csv_artifact("orbits.csv", &ORBIT_HEADER, &orbit_rows(&found.orbits))?);
    }
    Ok(Report {
        artifacts,
        convergence: json!({ "area_defect": area_defect, "search": found.stats }),
        summary: json!({ "area_defect": area_defect, "orbits_in_base": kept, "orbits_in_caps": total - kept }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_and_orders_columns() {
        let rows = vec![vec!["1".into(), "a,b".into()], vec!["2".into(), "c\"d".into()]];
        let a = csv_artifact("x.csv", &["k", "v"], &rows).unwrap();
        assert_eq!(String::from_utf8(a.bytes).unwrap(), "k,v\n1,\"a,b\"\n2,\"c\"\"d\"\n");
        assert!(csv_artifact("x.csv", &["k"], &[]).is_err());
    }

    #[test]
    fn disk_isotopy_matches_rotation() {
        let iso = disk_rotation_isotopy(vec![0.25]);
        let disk = Surface::disk(1.0).unwrap();
        let v = iso.field(&disk, 0.0, Vec2::new(0.5, 0.0));
        assert!((v - Vec2::new(0.0, 0.25 * PI)).norm() < 1e-15);
    }
}
