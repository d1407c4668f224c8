use std::path::Path;

use mvtorus::grid::DEFAULT_GRID;
use mvtorus::io::read_columns;
use mvtorus::particles::{self, SdeManifest, DEFAULT_PARTICLES, DEFAULT_SDE_DT};
use mvtorus::pde::DEFAULT_DT;
use mvtorus::stability::{
    bichromatic_numeric, growth_rate_report, harmonic_table, kuramoto_numeric, perturbation_eigenvalue_bichromatic,
    perturbation_eigenvalue_kuramoto, second_variation_spectrum, write_table, TableRow,
};
use mvtorus::*;
use serde_json::json;

use crate::config::{missing, Settings};
use crate::error::{CliError, CliResult, Context};
use crate::output::OutDir;

/// Mutable state of one command invocation.
pub struct Run {
    pub settings: Settings,
    pub out: OutDir,
    pub seeds: Vec<u64>,
    pub summary: serde_json::Value,
    pub notes: Vec<String>,
}

impl Run {
    pub fn new(settings: Settings, out: OutDir) -> Self {
        Run {
            settings,
            out,
            seeds: Vec::new(),
            summary: serde_json::Value::Null,
            notes: Vec::new(),
        }
    }

    pub fn grid(&mut self) -> usize {
        *self.settings.grid.get_or_insert(DEFAULT_GRID)
    }

    /// W and β required; V = 0 and κ = 1 unless given.
    pub fn model(&mut self) -> CliResult<Model> {
        let s = &mut self.settings;
        let w = s.interaction()?;
        let beta = s.beta()?;
        let v = s.v.get_or_insert_with(FourierPotential::zero).clone();
        let kappa = *s.kappa.get_or_insert(1.0);
        let model = Model::new(w, beta).with_confinement(v).with_kappa(kappa);
        model.validate().context("invalid model")?;
        Ok(model)
    }

    pub fn initial(&mut self) -> CliResult<TorusDensity> {
        let g = self.grid();
        let init = self.settings.init.get_or_insert_with(|| "default".into()).clone();
        match init.as_str() {
            "default" => default_initial(g).context("initial density"),
            "uniform" => TorusDensity::uniform(g).context("initial density"),
            path => {
                let rho = read_density(Path::new(path))?;
                if rho.len() != g {
                    return Err(CliError::Config(format!(
                        "initial density has {} points but grid is {g}",
                        rho.len()
                    )));
                }
                Ok(rho)
            }
        }
    }

    fn method(&mut self) -> CliResult<Method> {
        match self.settings.method.get_or_insert_with(|| "picard".into()).as_str() {
            "picard" => Ok(Method::Picard),
            "newton" => Ok(Method::Newton),
            m => Err(CliError::Config(format!("unknown method `{m}` (picard or newton)"))),
        }
    }

    fn sector(&mut self) -> CliResult<Sector> {
        match self.settings.sector.get_or_insert_with(|| "full".into()).as_str() {
            "full" => Ok(Sector::Full),
            "even" => Ok(Sector::Even),
            "odd" => Ok(Sector::Odd),
            s => Err(CliError::Config(format!("unknown sector `{s}` (full, even or odd)"))),
        }
    }
}

/// Read a density CSV with an `rho` column.
pub fn read_density(path: &Path) -> CliResult<TorusDensity> {
    let (headers, cols) = read_columns(path).context(format!("reading {}", path.display()))?;
    let idx = headers
        .iter()
        .position(|h| h == "rho")
        .ok_or_else(|| CliError::Config(format!("{} has no `rho` column", path.display())))?;
    TorusDensity::new(cols[idx].clone()).context(format!("density in {}", path.display()))
}

pub fn linspace(t: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![t],
        _ => (0..count).map(|i| t * i as f64 / (count - 1) as f64).collect(),
    }
}

/// x column followed by one column per density.
pub fn wide_table(labels: &[String], dens: &[&TorusDensity]) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut headers = vec!["x".to_owned()];
    let mut cols = vec![dens.first().map(|d| d.grid().points()).unwrap_or_default()];
    for (l, d) in labels.iter().zip(dens) {
        headers.push(l.clone());
        cols.push(d.values().to_vec());
    }
    (headers, cols)
}

pub fn critical(run: &mut Run) -> CliResult<()> {
    let w = run.settings.interaction()?;
    let bc = critical_beta(&w);
    match bc {
        Some(b) => println!("beta_c = {b}"),
        None => println!("beta_c = none (no negative mode: uniform state stable for all beta)"),
    }
    run.out.json("critical.json", &json!({ "W": w, "beta_c": bc, "h_stable": w.is_h_stable() }))?;
    if let Some(beta) = run.settings.beta {
        let j = *run.settings.k.get_or_insert(w.modes() + 2);
        let growth = growth_rate_report(&w, beta, j);
        growth.write_csv(run.out.file("growth_rates.csv"))?;
        run.out.json("growth_rates.json", &growth)?;
        let sv = second_variation_spectrum(&w, beta, j);
        run.out.json("second_variation.json", &sv)?;
        println!("largest growth rate at beta = {beta}: {}", growth.top().unwrap_or(f64::NAN));
    }
    run.summary = json!({ "beta_c": bc });
    Ok(())
}

pub fn branches(run: &mut Run) -> CliResult<()> {
    let model = run.model()?;
    let g = run.grid();
    let opts = SolverOptions {
        grid: g,
        ..SolverOptions::default()
    };
    let mut seeds = standard_seeds(model.order());
    if let Some(r) = &run.settings.r {
        seeds.push(r.clone());
    }
    let sols = enumerate_branches(&model, &seeds, &opts);
    let mut records = Vec::new();
    for (i, sol) in sols.iter().enumerate() {
        run.out.density(&format!("branch_{i}.csv"), &sol.density)?;
        println!(
            "branch {i}: {:?} r = {:?} residual = {:.1e}",
            sol.branch,
            sol.params.as_slice(),
            sol.residual
        );
        records.push(sol.record(&model));
    }
    run.out.json("branches.json", &records)?;
    run.summary = json!({ "count": sols.len(), "branches": records });
    Ok(())
}

pub fn evolve_cmd(run: &mut Run) -> CliResult<()> {
    let model = run.model()?;
    let t_final = run.settings.t_final()?;
    let g = run.grid();
    let dt = *run.settings.dt.get_or_insert(DEFAULT_DT);
    let count = *run.settings.snapshot_count.get_or_insert(11);
    let times = run.settings.snapshots.clone().unwrap_or_else(|| linspace(t_final, count));
    let to_end = *run.settings.run_to_end.get_or_insert(false);
    let rho0 = run.initial()?;
    let mut cfg = PdeConfig::new(model, t_final).with_grid(g).with_dt(dt).with_snapshots(times);
    if to_end {
        cfg = cfg.run_to_end();
    }
    let traj = evolve(&rho0, &cfg).context("PDE evolution")?;

    let labels: Vec<String> = traj.snapshots.iter().map(|(t, _)| format!("t={t}")).collect();
    let dens: Vec<&TorusDensity> = traj.snapshots.iter().map(|(_, r)| r).collect();
    let (h, c) = wide_table(&labels, &dens);
    run.out.table("snapshots.csv", &h, &c)?;
    let fin = traj.final_density();
    run.out.density("final.csv", fin)?;
    traj.write_free_energy(run.out.file("free_energy.csv"))?;
    run.out.json("free_energy.json", &traj.free_energy)?;

    println!(
        "final t = {} converged = {} peaks = {} L-inf from uniform = {:.3e}",
        traj.final_time,
        traj.converged,
        fin.peaks().len(),
        fin.deviation_from_uniform()
    );
    run.summary = json!({
        "converged": traj.converged,
        "final_time": traj.final_time,
        "dt_used": traj.dt,
        "max_mass_drift": traj.max_mass_drift,
        "max_free_energy_increase": traj.max_free_energy_increase(),
        "final_peaks": fin.peaks(),
        "deviation_from_uniform": fin.deviation_from_uniform(),
        "snapshot_times": traj.snapshots.iter().map(|(t, _)| *t).collect::<Vec<_>>(),
    });
    Ok(())
}

pub fn sde_config(run: &mut Run, default_n: usize, default_runs: usize) -> CliResult<SdeConfig> {
    let model = run.model()?;
    let g = run.grid();
    let s = &mut run.settings;
    let t_final = s.t_final()?;
    let cfg = SdeConfig {
        model,
        n_particles: *s.n_particles.get_or_insert(default_n),
        dt: *s.dt.get_or_insert(DEFAULT_SDE_DT),
        t_final,
        seed: *s.seed.get_or_insert(0),
        n_runs: *s.runs.get_or_insert(default_runs),
        snapshot_times: s.snapshots.clone().unwrap_or_default(),
        grid: g,
        bandwidth: s.bandwidth,
    };
    cfg.validate().context("invalid particle configuration")?;
    run.seeds = vec![cfg.seed];
    Ok(cfg)
}

pub fn particles_cmd(run: &mut Run) -> CliResult<()> {
    let cfg = sde_config(run, DEFAULT_PARTICLES, 1)?;
    let rho0 = run.initial()?;
    let started = std::time::Instant::now();
    let mut pooled = Vec::new();
    for r in 0..cfg.n_runs as u64 {
        let result = particles::run(&cfg, &rho0, r).context(format!("particle run {r}"))?;
        result
            .final_state
            .write_csv(run.out.file(&format!("positions_run_{r:03}.csv")))?;
        let single = result.final_state.density(cfg.grid, cfg.bandwidth()).context("density estimate")?;
        run.out.density(&format!("density_run_{r:03}.csv"), &single)?;
        if !result.snapshots.is_empty() {
            let labels: Vec<String> = result.snapshots.iter().map(|(t, _)| format!("t={t}")).collect();
            let dens = result
                .snapshots
                .iter()
                .map(|(_, x)| empirical_density(x, cfg.grid, cfg.bandwidth()))
                .collect::<Result<Vec<_>>>()
                .context("snapshot density")?;
            let refs: Vec<&TorusDensity> = dens.iter().collect();
            let (h, c) = wide_table(&labels, &refs);
            run.out.table(&format!("snapshots_run_{r:03}.csv"), &h, &c)?;
        }
        pooled.push(result.final_state.density(cfg.grid, cfg.ensemble_bandwidth()).context("density estimate")?);
    }
    let manifest = SdeManifest::new(&cfg, started.elapsed().as_secs_f64());
    let mut summary = json!({ "sde": manifest });
    if cfg.n_runs > 1 {
        let avg = particles::average(&pooled).context("ensemble average")?;
        run.out.density("average.csv", &avg)?;
        println!(
            "{} runs averaged: L-inf from uniform = {:.3e}, peaks = {}",
            cfg.n_runs,
            avg.deviation_from_uniform(),
            avg.peaks().len()
        );
        summary["average_deviation_from_uniform"] = json!(avg.deviation_from_uniform());
    } else {
        println!("run finished: peaks = {}", pooled[0].peaks().len());
    }
    run.summary = summary;
    Ok(())
}

pub fn spectrum(run: &mut Run) -> CliResult<()> {
    let op = run.settings.operator.get_or_insert_with(|| "schroedinger".into()).clone();
    let k = *run.settings.k.get_or_insert(8);
    let report = match op.as_str() {
        "growth" => growth_rate_report(&run.settings.interaction()?, run.settings.beta()?, k),
        "second-variation" => second_variation_spectrum(&run.settings.interaction()?, run.settings.beta()?, k),
        "schroedinger" => {
            let model = run.model()?;
            let g = run.grid();
            let method = run.method()?;
            let sector = run.sector()?;
            let seed = run
                .settings
                .r
                .get_or_insert_with(|| vec![0.5; model.order()])
                .clone();
            let opts = SolverOptions {
                grid: g,
                ..SolverOptions::default()
            };
            let sol = solve_fixed_point(&model, &seed, method, &opts).context("stationary state")?;
            run.out.density("state.csv", &sol.density)?;
            run.notes.push(format!("stationary state {:?} with r = {:?}", sol.branch, sol.params.as_slice()));
            SchroedingerOperator::from_density(&sol.density, &model)
                .and_then(|h| h.spectrum(sector, k))
                .context("Schroedinger spectrum")?
        }
        o => {
            return Err(CliError::Config(format!(
                "unknown operator `{o}` (growth, second-variation or schroedinger)"
            )))
        }
    };
    report.write_csv(run.out.file("spectrum.csv"))?;
    run.out.json("spectrum.json", &report)?;
    for (i, e) in report.eigenvalues.iter().enumerate() {
        println!("{i}: {e:.10}");
    }
    run.summary = serde_json::to_value(&report).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(())
}

pub fn perturbation_rows(family: &str, s: &mut Settings, g: usize) -> CliResult<Vec<TableRow>> {
    let k = *s.k.get_or_insert(4);
    let rows = match family {
        "kuramoto" => {
            let delta = s.delta.ok_or_else(|| missing("delta"))?;
            let num = kuramoto_numeric(delta, k, g).context("Kuramoto spectrum")?;
            (1..=k)
                .zip(num)
                .map(|(m, numerical)| TableRow {
                    m,
                    perturbation: perturbation_eigenvalue_kuramoto(m, delta),
                    perturbation_alt: None,
                    numerical,
                })
                .collect()
        }
        "harmonic" => {
            let n = s.n.ok_or_else(|| missing("n"))?;
            let delta = s.delta.ok_or_else(|| missing("delta"))?;
            harmonic_table(n, delta, k, g).context("harmonic spectrum")?
        }
        "bichromatic" => {
            let eta = s.eta.ok_or_else(|| missing("eta"))?;
            let num = bichromatic_numeric(eta, k, g).context("bichromatic spectrum")?;
            (1..=k)
                .zip(num)
                .map(|(m, numerical)| TableRow {
                    m,
                    perturbation: perturbation_eigenvalue_bichromatic(m, eta),
                    perturbation_alt: None,
                    numerical,
                })
                .collect()
        }
        f => {
            return Err(CliError::Config(format!(
                "unknown family `{f}` (kuramoto, harmonic or bichromatic)"
            )))
        }
    };
    Ok(rows)
}

pub fn print_rows(rows: &[TableRow]) {
    println!("{:>3} {:>14} {:>14} {:>14}", "m", "perturbation", "alternative", "numerical");
    for r in rows {
        let alt = r.perturbation_alt.map_or("-".to_owned(), |a| format!("{a:.4}"));
        println!("{:>3} {:>14.4} {:>14} {:>14.4}", r.m, r.perturbation, alt, r.numerical);
    }
}

pub fn perturb(run: &mut Run) -> CliResult<()> {
    let family = run.settings.family.clone().ok_or_else(|| missing("family"))?;
    let g = run.grid();
    let rows = perturbation_rows(&family, &mut run.settings, g)?;
    write_table(run.out.file("perturbation.csv"), &rows)?;
    run.out.json("perturbation.json", &rows)?;
    print_rows(&rows);
    run.summary = json!({ "rows": rows });
    Ok(())
}

pub fn design_v(run: &mut Run) -> CliResult<()> {
    let w = run.settings.interaction()?;
    let beta = run.settings.beta()?;
    let kappa = *run.settings.kappa.get_or_insert(1.0);
    let g = run.grid();
    let target = match (&run.settings.target, &run.settings.target_cos) {
        (Some(path), None) => read_density(Path::new(path))?,
        (None, Some(cos)) => {
            let sin = run.settings.target_sin.clone().unwrap_or_default();
            let grid = Grid::new(g).context("grid")?;
            TorusDensity::from_moments(grid, cos, &sin).context("target density")?
        }
        (Some(_), Some(_)) => {
            return Err(CliError::Config("give either `target` or `target_cos`, not both".into()))
        }
        (None, None) => return Err(missing("target or target_cos")),
    };
    run.settings.grid = Some(target.len());
    let v = design_confinement(&target, &w, beta, kappa).context("confinement design")?;
    let model = Model::new(w, beta).with_kappa(kappa).with_confinement(v.clone());
    let residual = model.stationary_residual(&target);
    run.out.density("target.csv", &target)?;
    run.out.columns("V.csv", &["x", "V"], &[&target.grid().points(), v.samples()])?;
    run.out.json("V_series.json", v.series())?;
    println!("designed V on {} points, stationary residual = {residual:.3e}", target.len());
    run.summary = json!({ "stationary_residual": residual });
    Ok(())
}
