//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::f64::consts::TAU;
use std::process::ExitCode;
use std::time::Instant;

use mvtorus::density::UNIFORM_LEVEL;
use mvtorus::particles::{drift, drift_naive, sample_initial};
use mvtorus::self_consistency::{bichromatic_r_approx, kuramoto_r_approx};
use mvtorus::stability::{extract_decay_rate, harmonic_table, kuramoto_numeric};
use mvtorus::*;

const SEED: u64 = 0;
const G: usize = 256;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into() }
    }
}

fn w(c: &[f64]) -> FourierPotential {
    FourierPotential::new(c.to_vec())
}

fn rho0() -> TorusDensity {
    default_initial(G).expect("initial density")
}

/// Mass and free-energy bookkeeping shared by all PDE runs.
struct Ledger {
    mass: f64,
    energy: f64,
}

impl Ledger {
    fn record(&mut self, t: &Trajectory) {
        self.mass = self.mass.max(t.max_mass_drift);
        self.energy = self.energy.max(t.max_free_energy_increase());
    }

    fn ok(&self) -> bool {
        self.mass < 1e-12 && self.energy <= 1e-9
    }
}

fn critical_temperatures() -> Outcome {
    let cases: [(&[f64], f64); 4] = [
        (&[-1.0], 2.0),
        (&[-3.0, -1.0], 2.0 / 3.0),
        (&[-1.0, -1.0, -3.0], 2.0 / 3.0),
        (&[-1.0, -2.0], 1.0),
    ];
    let mut pass = true;
    let mut got = Vec::new();
    for (c, want) in cases {
        let bc = critical_beta(&w(c));
        pass &= bc == Some(want);
        got.push(format!("{:?}", bc));
    }
    Outcome::new(pass, format!("beta_c = [{}]", got.join(", ")))
}

fn tables() -> Outcome {
    let printed: [(usize, [f64; 4]); 3] = [
        (2, [-1.2154, -4.0267, -9.0221, -16.0213]),
        (3, [-0.9653, -4.1015, -9.0600, -16.0524]),
        (4, [-0.9739, -4.8615, -9.1434, -16.067]),
    ];
    let mut worst: f64 = 0.0;
    let mut misses = Vec::new();
    for (n, want) in printed {
        let rows = match harmonic_table(n, 0.1, 4, G) {
            Ok(r) => r,
            Err(e) => return Outcome::new(false, format!("n={n}: {e}")),
        };
        for (row, p) in rows.iter().zip(want) {
            let err = (row.numerical - p).abs();
            worst = worst.max(err);
            if err > 1e-2 {
                misses.push(format!("n={n} m={}: {:.4} vs {p}", row.m, row.numerical));
            }
        }
    }
    let mut detail = format!("max |error| = {worst:.2e} (tol 1e-2)");
    if !misses.is_empty() {
        detail.push_str(&format!("; off: {}", misses.join(", ")));
    }
    Outcome::new(misses.is_empty(), detail)
}

fn kuramoto_asymptotics() -> Outcome {
    let mut worst: f64 = 0.0;
    for delta in [0.05, 0.1, 0.2, 0.3] {
        match kuramoto_numeric(delta, 1, G) {
            Ok(e) => worst = worst.max((e[0] - (-1.0 - 2.0 / 3.0 * delta * delta)).abs()),
            Err(e) => return Outcome::new(false, format!("delta={delta}: {e}")),
        }
    }
    Outcome::new(worst <= 0.02, format!("max |E - (-1 - 2/3 d^2)| = {worst:.2e} (tol 0.02)"))
}

fn branch_structure() -> Outcome {
    let opts = SolverOptions::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for (beta, want) in [(1.5, 1usize), (3.0, 3), (10.0, 3)] {
        let model = Model::new(w(&[-1.0, -1.0]), beta);
        let branches = enumerate_branches(&model, &standard_seeds(2), &opts);
        let residual = branches
            .iter()
            .map(|b| b.residual.max(model.stationary_residual(&b.density)))
            .fold(0.0, f64::max);
        let mut labels: Vec<BranchLabel> = branches.iter().map(|b| b.branch).collect();
        labels.sort_by_key(|l| *l as u8);
        let labels_ok = if want == 1 {
            labels == [BranchLabel::Uniform]
        } else {
            labels == [BranchLabel::Uniform, BranchLabel::SinglePeak, BranchLabel::MultiPeak]
                && branches
                    .iter()
                    .filter(|b| b.branch == BranchLabel::MultiPeak)
                    .all(|b| b.density.peaks().len() == 2)
        };
        pass &= branches.len() == want && labels_ok && residual < 1e-8;
        parts.push(format!("beta={beta}: {} branches {labels:?}, residual {residual:.1e}", branches.len()));
    }
    Outcome::new(pass, parts.join("; "))
}

fn order_parameters() -> Outcome {
    let opts = SolverOptions::default();
    let mut kura: f64 = 0.0;
    let kuramoto = Model::new(w(&[-1.0]), 2.0);
    for i in 0..=19 {
        let beta = 2.01 + 0.01 * i as f64;
        let m = kuramoto.clone().with_beta(beta);
        match solve_fixed_point(&m, &[0.5], Method::Picard, &opts) {
            Ok(s) => kura = kura.max((s.params.get(1).abs() - kuramoto_r_approx(beta).unwrap()).abs()),
            Err(e) => return Outcome::new(false, format!("kuramoto beta={beta}: {e}")),
        }
    }
    let mut bi: f64 = 0.0;
    let bichromatic = Model::new(w(&[-1.0, -0.5]), 2.0);
    for i in 0..=25 {
        let beta = 2.05 + 0.01 * i as f64;
        let m = bichromatic.clone().with_beta(beta);
        let (r1, r2) = bichromatic_r_approx(beta).unwrap();
        match solve_fixed_point(&m, &[0.5, 0.5], Method::Picard, &opts) {
            Ok(s) => {
                let d = (s.params.get(1) - r1).abs().max((s.params.get(2) - r2).abs());
                bi = bi.max(d);
            }
            Err(e) => return Outcome::new(false, format!("bichromatic beta={beta}: {e}")),
        }
    }
    Outcome::new(
        kura <= 0.02 && bi <= 0.05,
        format!("kuramoto max dev {kura:.3} (tol 0.02), bichromatic max dev {bi:.3} (tol 0.05)"),
    )
}

fn pde(ledger: &mut Ledger, cfg: &PdeConfig, init: &TorusDensity) -> mvtorus::Result<Trajectory> {
    let t = evolve(init, cfg)?;
    ledger.record(&t);
    Ok(t)
}

fn subcritical(ledger: &mut Ledger) -> mvtorus::Result<Outcome> {
    let mut worst: f64 = 0.0;
    for (c, beta) in [(&[-3.0, -1.0][..], 0.5), (&[-1.0][..], 1.0)] {
        let cfg = PdeConfig::new(Model::new(w(c), beta), 1000.0);
        let t = pde(ledger, &cfg, &rho0())?;
        worst = worst.max(t.final_density().deviation_from_uniform());
    }
    Ok(Outcome::new(worst < 1e-4, format!("max L-inf from uniform {worst:.1e} (tol 1e-4)")))
}

fn transient_peaks(ledger: &mut Ledger) -> mvtorus::Result<Outcome> {
    let horizon = 1500.0;
    let times: Vec<f64> = (0..=300).map(|i| horizon * i as f64 / 300.0).collect();
    let cfg = PdeConfig::new(Model::new(w(&[-1.0, -2.0]), 2.0), horizon)
        .with_snapshots(times)
        .run_to_end();
    let t = pde(ledger, &cfg, &rho0())?;
    let two = t.snapshots.iter().find(|(_, r)| r.peaks().len() == 2).map(|(s, _)| *s);
    let last = t.final_density().peaks().len();
    Ok(Outcome::new(
        two.is_some() && last == 1,
        format!("first 2-peak snapshot at t={two:?}, final peaks {last}"),
    ))
}

fn two_peak(ledger: &mut Ledger, init: &TorusDensity) -> mvtorus::Result<(usize, f64)> {
    let cfg = PdeConfig::new(Model::new(w(&[0.0, -1.0]), 3.0), 1000.0);
    let t = pde(ledger, &cfg, init)?;
    let f = t.final_density();
    Ok((f.peaks().len(), f.deviation_from_uniform()))
}

fn linf_against(rho: &TorusDensity, level: f64) -> f64 {
    rho.values().iter().map(|v| (v - level).abs()).fold(0.0, f64::max)
}

fn confined_agreement() -> mvtorus::Result<Outcome> {
    let model = Model::new(w(&[-1.0]), 3.0).with_confinement(w(&[-0.2]));
    let reference = evolve(&rho0(), &PdeConfig::new(model.clone(), 1000.0))?;
    let cfg = SdeConfig::new(model, 1000.0).with_runs(10).with_seed(SEED);
    let avg = ensemble_average(&cfg, &rho0())?;
    let d = avg.distance_l1(reference.final_density())?;
    Ok(Outcome::new(d <= 0.05, format!("L1 = {d:.3} (tol 0.05, seed {SEED}, N=500, R=10, T=1000)")))
}

fn single_run_agreement() -> mvtorus::Result<Outcome> {
    let model = Model::new(w(&[-1.0]), 3.0);
    let reference = evolve(&rho0(), &PdeConfig::new(model.clone(), 200.0))?;
    let cfg = SdeConfig::new(model, 200.0).with_seed(SEED);
    let run = mvtorus::particles::run(&cfg, &rho0(), 0)?;
    let emp = run.final_state.density(G, cfg.bandwidth())?;
    let d = reference.final_density().align(&emp)?.distance;
    Ok(Outcome::new(d <= 0.1, format!("aligned L1 = {d:.3} (tol 0.1, seed {SEED}, N=500, T=200)")))
}

fn ensemble_uniform() -> mvtorus::Result<Outcome> {
    let model = Model::new(w(&[-1.0]), 3.0);
    let cfg = SdeConfig::new(model, 200.0).with_runs(100).with_seed(SEED);
    let avg = ensemble_average(&cfg, &rho0())?;
    let d = linf_against(&avg, UNIFORM_LEVEL);
    Ok(Outcome::new(d <= 0.05, format!("L-inf from uniform = {d:.3} (tol 0.05, seed {SEED}, R=100, T=200)")))
}

fn linear_rates() -> mvtorus::Result<Outcome> {
    let kuramoto = w(&[-1.0]);
    let mut parts = Vec::new();
    let mut pass = true;
    for (beta, horizon) in [(1.0, 4.0), (3.0, 8.0)] {
        let times: Vec<f64> = (0..=(horizon * 10.0) as usize).map(|i| 0.1 * i as f64).collect();
        let cfg = PdeConfig::new(Model::new(kuramoto.clone(), beta), horizon).with_snapshots(times);
        let t = evolve(&rho0(), &cfg)?;
        let rate = extract_decay_rate(&t, 1)?;
        let gamma = growth_rates(&kuramoto, beta, 1)[0];
        let rel = (rate - gamma).abs() / gamma.abs();
        pass &= rel <= 0.05;
        parts.push(format!("beta={beta}: fit {rate:.4} vs {gamma:.4} ({:.2}%)", 100.0 * rel));
    }
    Ok(Outcome::new(pass, parts.join("; ")))
}

fn oracles() -> mvtorus::Result<Outcome> {
    let grid = Grid::new(128)?;
    let targets = [
        TorusDensity::from_fn(grid, |x| (2.0 * x.cos()).exp())?,
        TorusDensity::from_fn(grid, |x| ((2.0 * x).cos() + 0.5 * x.sin()).exp())?,
        TorusDensity::from_moments(grid, &[0.1, -0.05, 0.02], &[0.03, 0.0, -0.04])?,
    ];
    let interactions = [w(&[-1.0]), w(&[-1.0, -0.5]), w(&[-1.0, 0.5, -0.3])];

    let mut conv: f64 = 0.0;
    for wk in &interactions {
        for rho in &targets {
            let series = wk.convolve(rho);
            for x in [0.0, 0.3, 1.7, 3.1, 4.4, 6.0] {
                let integrand: Vec<f64> = grid
                    .points()
                    .iter()
                    .zip(rho.values())
                    .map(|(y, r)| wk.value(x - y) * r)
                    .collect();
                conv = conv.max((series.value(x) - grid.integrate(&integrand)).abs());
            }
        }
    }

    let model = Model::new(w(&[-1.0, -0.5]), 3.0).with_confinement(w(&[-0.2]));
    let pos = sample_initial(&rho0(), 100, SEED, 0)?.positions().to_vec();
    let drift_err = drift(&pos, &model)
        .iter()
        .zip(drift_naive(&pos, &model))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let mut design: f64 = 0.0;
    for (rho, wk) in targets.iter().zip(&interactions) {
        let v = design_confinement(rho, wk, 2.5, 1.0)?;
        let m = Model::new(wk.clone(), 2.5).with_confinement(v);
        design = design.max(m.stationary_residual(rho));
    }
    Ok(Outcome::new(
        conv < 1e-10 && drift_err < 1e-12 && design < 1e-10,
        format!("convolution {conv:.1e} (1e-10), drift {drift_err:.1e} (1e-12), design residual {design:.1e} (1e-10)"),
    ))
}

fn main() -> ExitCode {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut run = |name: &'static str, f: &mut dyn FnMut() -> mvtorus::Result<Outcome>| {
        let start = Instant::now();
        let out = f().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        let line = format!(
            "{} {name}: {} [{:.1}s]",
            if out.pass { "PASS" } else { "FAIL" },
            out.detail,
            start.elapsed().as_secs_f64()
        );
        println!("{line}");
        results.push((name, out));
    };

    run("1 critical temperature", &mut || Ok(critical_temperatures()));
    run("2 table reproduction", &mut || Ok(tables()));
    run("3 perturbation asymptotics", &mut || Ok(kuramoto_asymptotics()));
    run("4 branch structure", &mut || Ok(branch_structure()));
    run("5 order-parameter approximations", &mut || Ok(order_parameters()));

    let mut ledger = Ledger { mass: 0.0, energy: 0.0 };
    run("6a sub-critical runs flatten", &mut || subcritical(&mut ledger));
    run("6b transient two-peak regime", &mut || transient_peaks(&mut ledger));
    run("6c two-peak state for W = -cos 2x", &mut || {
        let (peaks, dev) = two_peak(&mut ledger, &rho0())?;
        Ok(Outcome::new(peaks == 2, format!("final peaks {peaks}, L-inf from uniform {dev:.1e}")))
    });
    let mut seeded = (0, 0.0);
    let mode_two = TorusDensity::from_fn(Grid::new(G).unwrap(), |x| UNIFORM_LEVEL + 0.01 * (2.0 * x - TAU / 4.0).sin())
        .and_then(|init| two_peak(&mut ledger, &init));
    if let Ok(s) = &mode_two {
        seeded = *s;
    }
    println!(
        "INFO 6c with a mode-2 initial perturbation: final peaks {}, L-inf from uniform {:.1e}",
        seeded.0, seeded.1
    );
    let (mass, energy, ok) = (ledger.mass, ledger.energy, ledger.ok());
    run("6 mass and free energy", &mut || {
        Ok(Outcome::new(ok, format!("max mass drift {mass:.1e} (1e-12), max free-energy increase {energy:.1e} (1e-9)")))
    });

    run("7a confined PDE/SDE agreement", &mut confined_agreement);
    run("7b single-run aligned agreement", &mut single_run_agreement);
    run("7c ensemble average is uniform", &mut ensemble_uniform);
    run("8 linear rates", &mut linear_rates);
    run("9 oracle equivalences", &mut oracles);

    let failed: Vec<&str> = results.iter().filter(|(_, o)| !o.pass).map(|(n, _)| *n).collect();
    println!("acceptance: {} passed, {} failed", results.len() - failed.len(), failed.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
