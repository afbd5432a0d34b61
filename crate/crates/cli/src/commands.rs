//! Subcommand implementations. Each returns the files it wrote.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use coex_core::ctmc::{on_probability, overlap, CtmcParams, Sensed};
use coex_core::frame_alloc::solve_p1;
use coex_core::multiuser::{exhaustive_assign, greedy_power_assign, AssignmentProblem, UserSpec, DEFAULT_BUDGET};
use coex_core::sim::{
    mc_on_probability, mc_overlap, run_experiment, sample_rayleigh_gains_with_means, stream_rng, ExperimentConfig,
    ExperimentMode, GainModel, OverlapCurve,
};
use coex_core::Error;
use rand::Rng;

use crate::config::{CheckKind, Config};
use crate::output::{bits, num, write_atomic, Table};

/// Marker error for a failed `validate` run.
#[derive(Debug, thiserror::Error)]
#[error("{failed} of {total} validation checks failed")]
pub struct ValidationFailed {
    pub failed: usize,
    pub total: usize,
}

pub const CURVE_HEADER: [&str; 7] =
    ["scheme", "R_target", "R_achieved_bits", "overlap_mean", "overlap_stderr", "outage", "sum_power"];

fn save(out: &Path, name: &str, table: &Table) -> Result<PathBuf> {
    let path = out.join(name);
    write_atomic(&path, &table.to_bytes()?)?;
    Ok(path)
}

pub fn frame(config: &Config, out: &Path) -> Result<Vec<PathBuf>> {
    let beta = config.fixed_beta()?;
    let sensing = config.sensing()?;
    let tol = config.tolerances();
    let mut table = Table::new(&[
        "R_target", "R_achieved_bits", "channel", "beta", "y", "rho", "power", "start", "end", "gamma", "nu",
        "objective",
    ]);
    for rate in config.rates()? {
        let spec = config.spec(beta.clone(), rate)?;
        let a = solve_p1(&spec, &sensing, tol)?;
        let placements = a.placements(&spec, &sensing)?;
        println!(
            "R = {} bits: achieved {} bits, power {}, overlap {}, gamma {}, nu {}",
            bits(rate),
            bits(a.achieved_rate),
            a.sum_power,
            a.objective,
            a.duals.gamma,
            a.duals.nu
        );
        for n in 0..spec.channels() {
            table.push(vec![
                num(bits(rate)),
                num(bits(a.achieved_rate)),
                n.to_string(),
                num(spec.beta[n]),
                sensing.for_channel(&spec, n).bit().to_string(),
                num(a.rho[n]),
                num(a.p[n]),
                num(placements[n].start),
                num(placements[n].end),
                num(a.duals.gamma),
                num(a.duals.nu),
                num(a.objective),
            ]);
        }
    }
    Ok(vec![save(out, "frame.csv", &table)?])
}

fn experiment_config(config: &Config, mode: ExperimentMode) -> Result<ExperimentConfig> {
    let (gains, realizations) = match (mode, &config.channels.mean_gain, &config.channels.beta) {
        (ExperimentMode::Average, None, Some(beta)) => (GainModel::Fixed(beta.clone()), 1),
        (ExperimentMode::Average, Some(_), _) => (GainModel::Rayleigh(config.mean_gain()?), config.simulation.realizations),
        (ExperimentMode::RandomChannel, _, _) => (GainModel::Rayleigh(config.mean_gain()?), config.simulation.samples),
        _ => bail!("config needs channels.mean_gain or channels.beta"),
    };
    Ok(ExperimentConfig {
        mode,
        frame: config.constraints.frame,
        bands: config.bands()?,
        band_of: config.channels.band_of.clone(),
        gains,
        power: config.constraints.power,
        rates: config.rates()?,
        realizations,
        trajectories: if mode == ExperimentMode::Average { config.simulation.trajectories } else { 0 },
        seed: config.seeds.seed,
        tol: config.tolerances(),
    })
}

pub fn curves_table(curves: &[OverlapCurve]) -> Table {
    let mut table = Table::new(&CURVE_HEADER);
    for curve in curves {
        for row in &curve.rows {
            table.push(vec![
                curve.scheme.clone(),
                num(bits(row.rate_target)),
                num(bits(row.achieved_rate)),
                num(row.overlap_mean),
                num(row.overlap_stderr),
                num(row.outage),
                num(row.sum_power),
            ]);
        }
    }
    table
}

pub fn sweep(config: &Config, out: &Path, mode: ExperimentMode) -> Result<Vec<PathBuf>> {
    let curves = run_experiment(&experiment_config(config, mode)?)?;
    let mut files = vec![save(out, "curves.csv", &curves_table(&curves))?];
    if curves.iter().any(|c| c.rows.iter().any(|r| r.simulated_mean.is_some())) {
        let mut sim = Table::new(&["scheme", "R_target", "overlap_mean", "sim_overlap_mean", "sim_overlap_stderr"]);
        for curve in &curves {
            for row in &curve.rows {
                sim.push(vec![
                    curve.scheme.clone(),
                    num(bits(row.rate_target)),
                    num(row.overlap_mean),
                    num(row.simulated_mean.unwrap_or(f64::NAN)),
                    num(row.simulated_stderr.unwrap_or(f64::NAN)),
                ]);
            }
        }
        files.push(save(out, "simulated.csv", &sim)?);
    }
    for curve in &curves {
        let worst = curve.rows.iter().map(|r| r.outage).fold(0.0, f64::max);
        println!("{}: {} rate points, max outage {}", curve.scheme, curve.rows.len(), worst);
    }
    Ok(files)
}

fn sets_label(sets: &[Vec<usize>]) -> String {
    sets.iter()
        .map(|s| s.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join("|")
}

pub fn multiuser(config: &Config, out: &Path) -> Result<Vec<PathBuf>> {
    let section = config.multiuser.as_ref().context("config needs a [multiuser] section")?;
    if section.users == 0 {
        bail!("multiuser.users must be at least 1");
    }
    let means = config.mean_gain()?;
    let power = section.power.unwrap_or(config.constraints.power);
    let budget = section.budget.map_or(DEFAULT_BUDGET, u128::from);
    let tol = config.tolerances();
    let bands = config.bands()?;
    let draws = config.simulation.realizations;

    let mut detail = Table::new(&[
        "R_target", "draw", "exhaustive", "greedy", "relative_gap", "exhaustive_sets", "greedy_sets",
    ]);
    let mut summary = Table::new(&[
        "R_target", "exhaustive_mean", "greedy_mean", "median_relative_gap", "greedy_failures", "outage",
    ]);
    for rate in config.rates()? {
        let results = (0..draws)
            .into_par_iter()
            .map(|d| {
                let mut rng = stream_rng(config.seeds.seed, d as u64);
                let users = (0..section.users)
                    .map(|_| Ok(UserSpec { beta: sample_rayleigh_gains_with_means(&means, &mut rng)?, rate, power }))
                    .collect::<coex_core::Result<Vec<_>>>()?;
                let problem = AssignmentProblem {
                    frame: config.constraints.frame,
                    bands: bands.clone(),
                    band_of: config.channels.band_of.clone(),
                    users,
                };
                let greedy = match greedy_power_assign(&problem, tol) {
                    Ok(g) => g,
                    Err(Error::Infeasible { .. }) => return Ok(None),
                    Err(e) => return Err(e),
                };
                let exhaustive = exhaustive_assign(&problem, tol, budget)?;
                Ok(if exhaustive.1.is_finite() { Some((exhaustive, greedy)) } else { None })
            })
            .collect::<coex_core::Result<Vec<_>>>()?;

        let mut gaps = Vec::new();
        let (mut e_sum, mut g_sum, mut ok) = (0.0, 0.0, 0usize);
        for (d, r) in results.iter().enumerate() {
            let Some(((ea, e), (ga, g))) = r else { continue };
            let gap = if *e > 0.0 { (g - e) / e } else if *g == 0.0 { 0.0 } else { f64::INFINITY };
            gaps.push(gap);
            e_sum += e;
            g_sum += g;
            ok += 1;
            detail.push(vec![
                num(bits(rate)),
                d.to_string(),
                num(*e),
                num(*g),
                num(gap),
                sets_label(&ea.sets),
                sets_label(&ga.sets),
            ]);
        }
        gaps.sort_by(f64::total_cmp);
        let median = match gaps.len() {
            0 => f64::NAN,
            n if n % 2 == 1 => gaps[n / 2],
            n => 0.5 * (gaps[n / 2 - 1] + gaps[n / 2]),
        };
        let mean = |s: f64| if ok > 0 { s / ok as f64 } else { f64::NAN };
        summary.push(vec![
            num(bits(rate)),
            num(mean(e_sum)),
            num(mean(g_sum)),
            num(median),
            gaps.iter().filter(|g| g.is_infinite()).count().to_string(),
            num((draws - ok) as f64 / draws.max(1) as f64),
        ]);
        println!(
            "R = {} bits: exhaustive {}, greedy {}, median gap {}, outage {}/{}",
            bits(rate),
            mean(e_sum),
            mean(g_sum),
            median,
            draws - ok,
            draws
        );
    }
    Ok(vec![save(out, "multiuser.csv", &detail)?, save(out, "multiuser_summary.csv", &summary)?])
}

struct CheckResult {
    row: Vec<String>,
    pass: bool,
}

/// One analytic-versus-Monte-Carlo comparison on a random parameter tuple.
fn run_check(kind: CheckKind, index: usize, seed: u64, trials: usize, sigmas: f64) -> Result<CheckResult> {
    let kind_index = kind as u64;
    let mut rng = stream_rng(seed, (kind_index << 32) | index as u64);
    let params = CtmcParams::new(rng.random_range(0.2..5.0), rng.random_range(0.2..5.0))?;
    let frame: f64 = rng.random_range(0.1..2.0);
    let x: f64 = rng.random_range(0.05..1.0);
    let (sensed, analytic, est, label) = match kind {
        CheckKind::Transition => {
            let from = Sensed::from_bit(rng.random_range(0..2u8))?;
            let tau = x * frame;
            let est = mc_on_probability(&params, from, tau, trials, &mut rng)?;
            (from, on_probability(&params, from, tau)?, est, "transition")
        }
        CheckKind::IdleOverlap => {
            let est = mc_overlap(&params, frame, x, Sensed::Idle, trials, &mut rng)?;
            (Sensed::Idle, overlap(&params, frame, x, Sensed::Idle)?, est, "idle-overlap")
        }
        CheckKind::BusyOverlap => {
            let est = mc_overlap(&params, frame, x, Sensed::Busy, trials, &mut rng)?;
            (Sensed::Busy, overlap(&params, frame, x, Sensed::Busy)?, est, "busy-overlap")
        }
    };
    let z = est.z_score(analytic);
    let pass = z <= sigmas;
    Ok(CheckResult {
        row: vec![
            label.to_string(),
            index.to_string(),
            num(params.lambda),
            num(params.mu),
            num(frame),
            num(x),
            sensed.bit().to_string(),
            num(analytic),
            num(est.mean),
            num(est.stderr),
            num(z),
            pass.to_string(),
        ],
        pass,
    })
}

/// Runs every configured check; the files are written even when some fail.
pub fn validate(config: &Config, out: &Path) -> Result<(Vec<PathBuf>, Option<ValidationFailed>)> {
    let section = config.validate.as_ref().context("config needs a [validate] section")?;
    let trials = match config.simulation.trajectories {
        0 => 100_000,
        t => t,
    };
    let jobs: Vec<(CheckKind, usize)> =
        section.checks.iter().flat_map(|&k| (0..section.tuples).map(move |i| (k, i))).collect();
    let results = jobs
        .par_iter()
        .map(|&(k, i)| run_check(k, i, config.seeds.seed, trials, section.sigmas))
        .collect::<Result<Vec<_>>>()?;

    let mut table = Table::new(&[
        "check", "tuple", "lambda", "mu", "frame", "x", "y", "analytic", "mc_mean", "mc_stderr", "z", "pass",
    ]);
    let mut failed = 0;
    for r in results {
        failed += usize::from(!r.pass);
        table.push(r.row);
    }
    let files = vec![save(out, "validate.csv", &table)?];
    let total = jobs.len();
    println!("{} of {total} checks within {} standard errors", total - failed, section.sigmas);
    Ok((files, (failed > 0).then_some(ValidationFailed { failed, total })))
}
