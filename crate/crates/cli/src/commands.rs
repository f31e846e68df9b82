//! One function per verb. Each returns whether the analysis found a
//! violation; errors carry the exit-code class.

use kinetica::dsl::serialize_network;
use kinetica::fluctuations::{
    check_onsager, empirical_fluctuations, kubo_check, linearize, ou_covariance, OnsagerReport,
    OnsagerVerdict,
};
use kinetica::io::{csv_document, g17};
use kinetica::kinetics::schloegl::schloegl_pattern;
use kinetica::kinetics::{
    find_fixed_points, ode_first_integrals, schloegl_classify, uniform_grid, SchloeglClass,
    Stability,
};
use kinetica::lattice::pde::PdeGrid;
use kinetica::lattice::sim::mean_fields;
use kinetica::lattice::{
    fields_csv, reference_pde, run_lattice_ensemble, scaling_convergence, ScalingOptions,
};
use kinetica::model::{ReactionNetwork, State};
use kinetica::reversibility::kolmogorov::truncated_chain;
use kinetica::reversibility::{
    check_detailed_balance, check_poisson_invariance_flows, check_unitarity, kolmogorov_check,
    solve_reversible_measure, PoissonParams, ReversibilityReport, StateBox,
};
use kinetica::ssa::{meanfield_convergence, run_ensemble, InitialLaw, SimConfig};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::config::{
    default_seeds, load_network, overlay, resolve_seed, AnalyzeConfig, ConvergenceConfig,
    ConvergenceKind, FixedPointsConfig, FluctuationsConfig, LatticeCmdConfig, SeedSource,
    SimulateConfig,
};
use crate::output::OutDir;
use crate::{CliError, Common, Verdict};

#[derive(Serialize)]
struct Manifest<'a, S: Serialize> {
    command: &'a str,
    version: &'a str,
    network: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed_source: Option<SeedSource>,
    settings: &'a S,
    artifacts: Vec<String>,
    violation: bool,
}

fn finish<S: Serialize>(
    out: &mut OutDir,
    common: &Common,
    command: &str,
    seed: Option<(u64, SeedSource)>,
    settings: &S,
    verdict: Verdict,
) -> Result<Verdict, CliError> {
    let manifest = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        network: common.network.display().to_string(),
        seed: seed.map(|s| s.0),
        seed_source: seed.map(|s| s.1),
        settings,
        artifacts: out.written().to_vec(),
        violation: verdict == Verdict::Violation,
    };
    out.json("manifest.json", &manifest)?;
    Ok(verdict)
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn check_len(net: &ReactionNetwork, what: &str, v: &[f64]) -> Result<(), CliError> {
    if v.len() != net.num_species() {
        return Err(CliError::usage(format!(
            "{what} has {} entries, the network has {} species",
            v.len(),
            net.num_species()
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct SchloeglInfo {
    rates: [f64; 4],
    #[serde(flatten)]
    class: SchloeglClass,
}

#[derive(Serialize)]
struct ValidateReport {
    species: Vec<String>,
    reactions: usize,
    inverse_pairs: Vec<(usize, usize)>,
    closed: bool,
    conservation_laws: Vec<Vec<i64>>,
    ode_first_integrals: Vec<Vec<i64>>,
    schloegl: Option<SchloeglInfo>,
    canonical: String,
}

pub fn validate(common: &Common) -> Result<Verdict, CliError> {
    let net = load_network(&common.network)?;
    let schloegl = match schloegl_pattern(&net) {
        Some(rates) => {
            let [a01, a10, a23, a32] = rates;
            let class = schloegl_classify(a01, a10, a23, a32).map_err(CliError::runtime)?;
            eprintln!("schloegl pattern detected: {:?}", class.case);
            Some(SchloeglInfo { rates, class })
        }
        None => None,
    };
    let report = ValidateReport {
        species: net.species_names().iter().map(|s| s.to_string()).collect(),
        reactions: net.num_reactions(),
        inverse_pairs: net.inverse_pairs(),
        closed: net.is_closed(),
        conservation_laws: net.conservation_laws(),
        ode_first_integrals: ode_first_integrals(&net),
        schloegl,
        canonical: serialize_network(&net),
    };
    eprintln!(
        "{} species, {} reactions, {} conservation laws",
        report.species.len(),
        report.reactions,
        report.conservation_laws.len()
    );
    let mut out = OutDir::create(&common.out)?;
    out.json("validate.json", &report)?;
    finish(&mut out, common, "validate", None, &(), Verdict::Clean)
}

#[derive(Serialize)]
struct KolmogorovSummary {
    report: ReversibilityReport,
    states: usize,
    components: usize,
}

#[derive(Serialize)]
struct AnalysisReport {
    reversible: bool,
    evaluated_at: Vec<f64>,
    reversible_measure: ReversibilityReport,
    unitarity: ReversibilityReport,
    detailed_balance: ReversibilityReport,
    poisson_invariance_flows: ReversibilityReport,
    kolmogorov: KolmogorovSummary,
}

pub fn analyze(common: &Common, tolerance: Option<f64>, m: Option<f64>) -> Result<Verdict, CliError> {
    let net = load_network(&common.network)?;
    let mut cfg: AnalyzeConfig = overlay(common)?;
    if let Some(t) = tolerance {
        cfg.tolerance = t;
    }
    if let Some(m) = m {
        cfg.m = m;
    }
    let tol = cfg.tolerance;
    let solved = solve_reversible_measure(&net, tol);
    let b = match (&solved.witness, &cfg.b) {
        (Some(w), _) => w.clone(),
        (None, Some(b)) => PoissonParams::for_network(&net, b.clone()).map_err(CliError::usage)?,
        (None, None) => PoissonParams::for_network(&net, vec![1.0; net.num_species()])
            .map_err(CliError::usage)?,
    };
    let upper = cfg
        .box_upper
        .clone()
        .unwrap_or_else(|| vec![6; net.num_species()]);
    let bx = StateBox {
        upper,
        scale: cfg.m,
    };
    let chain = truncated_chain(&net, &bx, cfg.max_states).map_err(CliError::usage)?;
    let states: Vec<State> = chain
        .states
        .iter()
        .map(|c| State::new(c.clone(), cfg.m))
        .collect::<Result<_, _>>()
        .map_err(CliError::usage)?;
    let flows = check_poisson_invariance_flows(&net, &b, &states, tol).map_err(CliError::runtime)?;
    let mut kol = kolmogorov_check(&chain.graph, tol);
    kol.report
        .notes
        .push("chain truncated to a finite box; transitions leaving the box are dropped".into());
    let unitarity = check_unitarity(&net, &b, tol);
    let detailed = check_detailed_balance(&net, &b, tol);
    let reversible = solved.holds() && unitarity.holds() && flows.holds() && kol.report.holds();
    for (name, r) in [
        ("reversible measure", &solved),
        ("unitarity", &unitarity),
        ("detailed balance", &detailed),
        ("poisson invariance", &flows),
        ("kolmogorov", &kol.report),
    ] {
        eprintln!("{name}: {:?} (max residual {:.3e})", r.status, r.max_residual());
    }
    let report = AnalysisReport {
        reversible,
        evaluated_at: b.b.clone(),
        reversible_measure: solved,
        unitarity,
        detailed_balance: detailed,
        poisson_invariance_flows: flows,
        kolmogorov: KolmogorovSummary {
            report: kol.report,
            states: chain.states.len(),
            components: kol.components,
        },
    };
    let mut out = OutDir::create(&common.out)?;
    out.json("analysis.json", &report)?;
    let verdict = if reversible { Verdict::Clean } else { Verdict::Violation };
    finish(&mut out, common, "analyze", None, &cfg, verdict)
}

fn mean_csv(names: &[&str], times: &[f64], mean: &[Vec<f64>]) -> String {
    let mut header = vec!["t".to_string()];
    header.extend(names.iter().map(|n| format!("n_{n}")));
    csv_document(
        &header,
        times.iter().zip(mean).map(|(t, row)| {
            let mut r = vec![g17(*t)];
            r.extend(row.iter().map(|x| g17(*x)));
            r
        }),
    )
}

pub fn simulate(
    common: &Common,
    m: Option<f64>,
    t_end: Option<f64>,
    replicas: Option<usize>,
) -> Result<Verdict, CliError> {
    let net = load_network(&common.network)?;
    let mut cfg: SimulateConfig = overlay(common)?;
    if let Some(m) = m {
        cfg.m = m;
    }
    if let Some(t) = t_end {
        cfg.t_end = t;
    }
    if let Some(r) = replicas {
        cfg.replicas = r;
    }
    let seed = resolve_seed(common.seed, cfg.seed)?;
    cfg.seed = Some(seed.0);
    let mut sim = SimConfig::uniform(cfg.m, cfg.t_end, cfg.samples, seed.0);
    sim.max_events = cfg.max_events;
    sim.validate().map_err(CliError::usage)?;
    let law = match (&cfg.poisson_b, &cfg.c0) {
        (Some(b), _) => {
            check_len(&net, "poisson_b", b)?;
            InitialLaw::Poisson { b: b.clone() }
        }
        (None, c0) => {
            let c0 = c0.clone().unwrap_or_else(|| vec![1.0; net.num_species()]);
            check_len(&net, "c0", &c0)?;
            let s = State::from_concentrations(&c0, cfg.m).map_err(CliError::usage)?;
            InitialLaw::Deterministic { counts: s.counts }
        }
    };
    let ens = run_ensemble(&net, &law, &sim, cfg.replicas, common.workers).map_err(CliError::runtime)?;
    let names = net.species_names();
    let mut out = OutDir::create(&common.out)?;
    let mut failed = 0;
    for r in &ens.replicas {
        match &r.outcome {
            Ok(tr) => out.text(&format!("replica_{:04}.csv", r.index), &tr.to_csv(&names))?,
            Err(e) => {
                failed += 1;
                eprintln!("replica {} failed: {e}", r.index);
            }
        }
    }
    out.text("mean.csv", &mean_csv(&names, &sim.sample_grid, &ens.mean_counts()))?;
    let source = format!("{:?}", seed.1).to_lowercase();
    out.json("ensemble.json", &ens.manifest(&source))?;
    eprintln!(
        "{} replicas, {} complete, seed {} ({source})",
        ens.replicas.len(),
        ens.complete().len(),
        seed.0
    );
    finish(&mut out, common, "simulate", Some(seed), &cfg, Verdict::Clean)?;
    if failed > 0 {
        return Err(CliError::runtime(format!("{failed} replicas failed")));
    }
    Ok(Verdict::Clean)
}

pub fn fixed_points(common: &Common) -> Result<Verdict, CliError> {
    let net = load_network(&common.network)?;
    let mut cfg: FixedPointsConfig = overlay(common)?;
    let seeds = cfg
        .seeds
        .clone()
        .unwrap_or_else(|| default_seeds(net.num_species()));
    for s in &seeds {
        check_len(&net, "seed point", s)?;
    }
    cfg.seeds = Some(seeds.clone());
    let result = find_fixed_points(&net, &seeds, &cfg.options).map_err(CliError::usage)?;
    for p in &result.points {
        eprintln!("fixed point {:?}: {:?}", p.c, p.stability);
    }
    let mut out = OutDir::create(&common.out)?;
    out.json("fixed_points.json", &result)?;
    finish(&mut out, common, "fixed-points", None, &cfg, Verdict::Clean)
}

#[derive(Serialize)]
struct KuboSummary {
    lhs: Vec<Vec<f64>>,
    gamma: Vec<Vec<f64>>,
    residual: f64,
    residual_opposite: f64,
    sign: f64,
    horizon: f64,
    tail: f64,
    quadrature_error: f64,
}

#[derive(Serialize)]
struct EmpiricalSummary {
    replicas: usize,
    origins: usize,
    /// Largest `|empirical - phi| / stderr` over lags and entries.
    max_abs_z: f64,
}

#[derive(Serialize)]
struct FluctuationReport {
    fixed_point: Vec<f64>,
    spectral_gap: Option<f64>,
    onsager: OnsagerReport,
    kubo: Option<KuboSummary>,
    kubo_error: Option<String>,
    empirical: Option<EmpiricalSummary>,
}

fn first_stable(net: &ReactionNetwork, seeds: Vec<Vec<f64>>) -> Result<Vec<f64>, CliError> {
    let fp = find_fixed_points(net, &seeds, &Default::default()).map_err(CliError::runtime)?;
    fp.points
        .iter()
        .find(|p| p.stability == Stability::Stable && p.c.iter().all(|&x| x > 0.0))
        .map(|p| p.c.clone())
        .ok_or_else(|| CliError::runtime("no stable positive fixed point found; set c_bar"))
}

pub fn fluctuations(
    common: &Common,
    tolerance: Option<f64>,
    replicas: Option<usize>,
    m: Option<f64>,
    t_end: Option<f64>,
) -> Result<Verdict, CliError> {
    let net = load_network(&common.network)?;
    let mut cfg: FluctuationsConfig = overlay(common)?;
    if let Some(t) = tolerance {
        cfg.tolerance = t;
    }
    if replicas.is_some() || m.is_some() || t_end.is_some() {
        let e = cfg.empirical.get_or_insert_with(Default::default);
        if let Some(r) = replicas {
            e.replicas = r;
        }
        if let Some(m) = m {
            e.m = m;
        }
        if let Some(t) = t_end {
            e.t_end = t;
        }
    }
    let c_bar = match &cfg.c_bar {
        Some(c) => {
            check_len(&net, "c_bar", c)?;
            c.clone()
        }
        None => first_stable(
            &net,
            cfg.seeds
                .clone()
                .unwrap_or_else(|| default_seeds(net.num_species())),
        )?,
    };
    cfg.c_bar = Some(c_bar.clone());
    let lin = linearize(&net, &c_bar).map_err(CliError::usage)?;
    let onsager = check_onsager(&lin, cfg.tolerance);
    let (kubo, kubo_error) = match kubo_check(&lin, &cfg.kubo) {
        Ok(k) => (
            Some(KuboSummary {
                lhs: matrix_rows(&k.lhs),
                gamma: matrix_rows(&k.rhs),
                residual: k.residual,
                residual_opposite: k.residual_opposite,
                sign: k.sign,
                horizon: k.horizon,
                tail: k.tail,
                quadrature_error: k.quadrature_error,
            }),
            None,
        ),
        Err(e) => (None, Some(e.to_string())),
    };
    let names = lin.name_refs();
    let mut out = OutDir::create(&common.out)?;
    out.text("lambda.csv", &lin.lambda_csv())?;
    out.text("gamma.csv", &lin.gamma_csv())?;
    let header: Vec<String> = ["lag", "v", "w", "value"].iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for &lag in &cfg.lags {
        let phi = ou_covariance(&lin, lag);
        for (i, a) in names.iter().enumerate() {
            for (j, b) in names.iter().enumerate() {
                rows.push(vec![g17(lag), a.to_string(), b.to_string(), g17(phi[(i, j)])]);
            }
        }
    }
    out.text("ou_covariance.csv", &csv_document(&header, rows))?;

    let mut seed = None;
    let mut empirical = None;
    if let Some(e) = &cfg.empirical {
        let s = resolve_seed(common.seed, cfg.seed)?;
        seed = Some(s);
        let mut sim = SimConfig::uniform(e.m, e.t_end, e.samples, s.0);
        sim.max_events = e.max_events;
        sim.validate().map_err(CliError::usage)?;
        let law = InitialLaw::Poisson { b: c_bar.clone() };
        let ens = run_ensemble(&net, &law, &sim, e.replicas, common.workers).map_err(CliError::runtime)?;
        let (_, cov) = empirical_fluctuations(&ens, e.burn_in, e.max_lag, 2).map_err(CliError::usage)?;
        out.text("empirical_covariance.csv", &cov.to_csv(&names))?;
        let mut max_z = 0.0f64;
        for (k, &lag) in cov.lag_times.iter().enumerate() {
            let phi = ou_covariance(&lin, lag);
            for i in 0..phi.nrows() {
                for j in 0..phi.ncols() {
                    let se = cov.stderr[k][(i, j)];
                    if se > 0.0 {
                        max_z = max_z.max((cov.value[k][(i, j)] - phi[(i, j)]).abs() / se);
                    }
                }
            }
        }
        eprintln!("empirical covariance: max |z| = {max_z:.2} over {} lags", cov.lag_times.len());
        empirical = Some(EmpiricalSummary {
            replicas: cov.replicas,
            origins: cov.origins,
            max_abs_z: max_z,
        });
    }
    cfg.seed = seed.map(|s| s.0);
    let gap = lin.spectral_gap();
    let report = FluctuationReport {
        fixed_point: c_bar,
        spectral_gap: gap.is_finite().then_some(gap),
        onsager,
        kubo,
        kubo_error,
        empirical,
    };
    eprintln!(
        "onsager: {:?} (max residual {:.3e})",
        onsager.verdict, onsager.max_residual
    );
    out.json("fluctuations.json", &report)?;
    let verdict = if onsager.verdict == OnsagerVerdict::Asymmetric {
        Verdict::Violation
    } else {
        Verdict::Clean
    };
    finish(&mut out, common, "fluctuations", seed, &cfg, verdict)
}

#[derive(Serialize)]
struct LatticeSummary {
    replica: usize,
    seed: u64,
    reaction_events: u64,
    jump_events: u64,
}

pub fn lattice(common: &Common, replicas: Option<usize>) -> Result<Verdict, CliError> {
    let net = load_network(&common.network)?;
    let mut cfg: LatticeCmdConfig = overlay(common)?;
    if let Some(r) = replicas {
        cfg.replicas = r;
    }
    let lat = cfg
        .lattice
        .clone()
        .ok_or_else(|| CliError::usage("the config overlay must define `lattice`"))?;
    let profiles = cfg
        .profiles
        .clone()
        .ok_or_else(|| CliError::usage("the config overlay must define `profiles`"))?;
    lat.validate(&net).map_err(CliError::usage)?;
    let seed = resolve_seed(common.seed, cfg.seed)?;
    cfg.seed = Some(seed.0);
    let runs = run_lattice_ensemble(
        &net,
        &lat,
        &profiles,
        &cfg.tau_grid,
        cfg.replicas,
        seed.0,
        cfg.max_events,
        common.workers,
    )
    .map_err(CliError::runtime)?;
    let names = net.species_names();
    let spacing: Vec<f64> = (0..lat.dimension).map(|a| lat.axis_scale(a)).collect();
    let origin = vec![0.0; lat.dimension];
    let mut out = OutDir::create(&common.out)?;
    let mut summary = Vec::with_capacity(runs.len());
    for (i, run) in runs.iter().enumerate() {
        out.text(
            &format!("lattice_replica_{i:04}.csv"),
            &fields_csv(&run.fields, &lat.extent, &spacing, &origin, &names),
        )?;
        summary.push(LatticeSummary {
            replica: i,
            seed: run.seed,
            reaction_events: run.reaction_events,
            jump_events: run.jump_events,
        });
    }
    out.text(
        "lattice_mean.csv",
        &fields_csv(&mean_fields(&runs), &lat.extent, &spacing, &origin, &names),
    )?;
    out.json("lattice_runs.json", &summary)?;
    if cfg.pde {
        let cells = cfg.pde_cells.clone().unwrap_or_else(|| lat.extent.clone());
        let pde = reference_pde(&net, &lat, &profiles, &cfg.tau_grid, &PdeGrid::new(cells))
            .map_err(CliError::usage)?;
        eprintln!("reference PDE: {} steps of {:.3e}", pde.steps, pde.dt);
        out.text("pde.csv", &pde.to_csv(&names))?;
    }
    finish(&mut out, common, "lattice", Some(seed), &cfg, Verdict::Clean)
}

pub fn convergence(
    common: &Common,
    m: Option<Vec<f64>>,
    epsilon_list: Option<Vec<f64>>,
    replicas: Option<usize>,
    t_end: Option<f64>,
) -> Result<Verdict, CliError> {
    let net = load_network(&common.network)?;
    let mut cfg: ConvergenceConfig = overlay(common)?;
    if let Some(m) = m {
        cfg.m_list = m;
        cfg.kind = ConvergenceKind::Meanfield;
    }
    if let Some(e) = epsilon_list {
        cfg.epsilons = e;
        cfg.kind = ConvergenceKind::Scaling;
    }
    if let Some(r) = replicas {
        cfg.replicas = r;
    }
    if let Some(t) = t_end {
        cfg.t_end = t;
    }
    let seed = resolve_seed(common.seed, cfg.seed)?;
    cfg.seed = Some(seed.0);
    let mut out = OutDir::create(&common.out)?;
    let decreasing = match cfg.kind {
        ConvergenceKind::Meanfield => {
            let c0 = cfg.c0.clone().unwrap_or_else(|| vec![1.0; net.num_species()]);
            check_len(&net, "c0", &c0)?;
            let grid = uniform_grid(cfg.t_end, cfg.samples.max(1));
            let table = meanfield_convergence(&net, &c0, &cfg.m_list, &grid, cfg.replicas, seed.0, common.workers)
                .map_err(CliError::runtime)?;
            eprintln!("fitted exponent {:.3}", table.exponent);
            out.text("convergence.csv", &table.to_csv())?;
            out.json("convergence.json", &table)?;
            table.decreasing
        }
        ConvergenceKind::Scaling => {
            let lat = cfg
                .lattice
                .clone()
                .ok_or_else(|| CliError::usage("scaling convergence needs `lattice` in the overlay"))?;
            let profiles = cfg
                .profiles
                .clone()
                .ok_or_else(|| CliError::usage("scaling convergence needs `profiles` in the overlay"))?;
            let macro_length = cfg
                .macro_length
                .clone()
                .ok_or_else(|| CliError::usage("scaling convergence needs `macro_length` in the overlay"))?;
            let opts = ScalingOptions {
                macro_length,
                epsilons: cfg.epsilons.clone(),
                tau_grid: cfg.tau_grid.clone(),
                replicas: cfg.replicas,
                seed: seed.0,
                pde_cells_per_unit: cfg.pde_cells_per_unit,
                max_events: cfg.max_events,
            };
            let table = scaling_convergence(&net, &lat, &profiles, &opts, common.workers)
                .map_err(CliError::runtime)?;
            for r in &table.rows {
                eprintln!("eps {}: max error {:.4} (stderr {:.4})", r.epsilon, r.max_error, r.max_stderr);
            }
            out.text("convergence.csv", &table.to_csv())?;
            out.json("convergence.json", &table)?;
            table.decreasing
        }
    };
    let verdict = if decreasing { Verdict::Clean } else { Verdict::Violation };
    finish(&mut out, common, "convergence", Some(seed), &cfg, verdict)
}
