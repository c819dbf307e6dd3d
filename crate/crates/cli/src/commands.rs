//! One function per subcommand. Each returns a [`Report`]; writing it out and
//! mapping infeasibility to an exit status is left to the caller.

use qosgame::delay::sir_target_infinite;
use qosgame::dynamics::{run_best_response, BestResponseConfig, Start, Termination};
use qosgame::pcg::{mf_load, utility_loss_point};
use qosgame::prcg::{admissible, capacity_for_size, prcg_equilibrium, total_goodput};
use qosgame::{AverageDelaySpec, EfficiencyModel};
use rayon::prelude::*;
use rayon::ThreadPool;
use serde_json::{json, Value};

use crate::error::{CliError, Result};
use crate::output::{csv_writer, finish, num, opt, to_db};
use crate::scenario::{Scenario, SweepVariable};

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    /// CSV table, if the command produces one.
    pub csv: Option<Vec<u8>>,
    /// Machine-readable summary.
    pub summary: Value,
    /// Why the scenario is infeasible, if it is.
    pub infeasible: Option<String>,
}

fn summary(command: &str, scenario: &Scenario, result: Value) -> Value {
    json!({
        "command": command,
        "seed": scenario.seed,
        "scenario": serde_json::to_value(scenario).expect("scenario serializes"),
        "result": result,
    })
}

pub fn gamma_star(packet_bits: u32) -> Result<Report> {
    let model = EfficiencyModel::exponential(packet_bits)
        .map_err(|e| CliError::Config(format!("--packet-bits: {e}")))?;
    let g = model.gamma_star();
    Ok(Report {
        csv: None,
        summary: json!({
            "command": "gamma-star",
            "packet_bits": packet_bits,
            "gamma_star": g,
            "gamma_star_db": to_db(g),
            "psr_at_gamma_star": model.psr_at_gamma_star(),
        }),
        infeasible: None,
    })
}

/// Utility-loss ratios of a two-class scenario over the load split.
pub fn pcg_sweep(scenario: &Scenario, pool: &ThreadPool) -> Result<Report> {
    let pcg = scenario.pcg()?;
    if pcg.classes.len() != 2 {
        return Err(CliError::Config(format!(
            "pcg.classes: pcg-sweep needs exactly two classes, got {}",
            pcg.classes.len()
        )));
    }
    let splits = match &scenario.sweep {
        Some(s) if s.variable == SweepVariable::Split => s.points(),
        Some(_) => {
            return Err(CliError::Config(
                "sweep.variable must be `split` for pcg-sweep".into(),
            ))
        }
        None => (0..=10).map(|i| i as f64 / 10.0).collect(),
    };
    let model = scenario.model()?;
    let req_a = pcg.classes[0].requirement()?;
    let req_b = pcg.classes[1].requirement()?;
    let receivers = scenario.receivers();

    let rows: Vec<_> = pool.install(|| {
        splits
            .par_iter()
            .flat_map_iter(|&s| receivers.iter().map(move |&rx| (s, rx)))
            .map(|(s, rx)| {
                utility_loss_point(
                    rx,
                    pcg.total_load,
                    s,
                    req_a.as_ref(),
                    req_b.as_ref(),
                    &model,
                )
            })
            .collect()
    });

    let mut w = csv_writer();
    w.write_record([
        "split_ratio",
        "receiver",
        "u_a_over_u_ratio",
        "u_b_over_u_ratio",
        "feasible",
    ])?;
    for r in &rows {
        w.write_record([
            num(r.split),
            r.receiver.name().to_string(),
            opt(r.ratio_a),
            opt(r.ratio_b),
            r.feasible.to_string(),
        ])?;
    }
    let infeasible_points = rows.iter().filter(|r| !r.feasible).count();
    let targets: Vec<f64> = [&req_a, &req_b]
        .iter()
        .map(|r| sir_target_infinite(r.as_ref(), &model))
        .collect();
    Ok(Report {
        csv: Some(finish(w)?),
        summary: summary(
            "pcg-sweep",
            scenario,
            json!({
                "rows": rows.len(),
                "infeasible_rows": infeasible_points,
                "gamma_star": model.gamma_star(),
                "sir_targets": targets,
                "sir_targets_db": targets.iter().map(|&t| to_db(t)).collect::<Vec<_>>(),
            }),
        ),
        infeasible: (infeasible_points > 0).then(|| {
            format!(
                "{infeasible_points} of {} sweep points are infeasible",
                rows.len()
            )
        }),
    })
}

/// Rate, size, capacity and goodput over a source-rate sweep, one curve per
/// delay bound.
pub fn prcg_sweep(scenario: &Scenario, pool: &ThreadPool) -> Result<Report> {
    let prcg = scenario.prcg()?;
    let params = scenario.system_params()?;
    let bits = scenario.system.packet_bits as f64;
    let sweep = scenario.sweep.as_ref().ok_or_else(|| {
        CliError::Config(
            "prcg-sweep needs a `sweep` over source_rate_bps or arrival_rate_pps".into(),
        )
    })?;
    let to_lambda: fn(f64, f64) -> f64 = match sweep.variable {
        SweepVariable::SourceRateBps => |r, m| r / m,
        SweepVariable::ArrivalRatePps => |l, _| l,
        SweepVariable::Split => {
            return Err(CliError::Config(
                "sweep.variable must be source_rate_bps or arrival_rate_pps for prcg-sweep".into(),
            ))
        }
    };
    if prcg.delay_bounds_s.is_empty() {
        return Err(CliError::Config(
            "prcg.delay_bounds_s must not be empty".into(),
        ));
    }
    let points = sweep.points();
    let grid: Vec<(f64, f64)> = prcg
        .delay_bounds_s
        .iter()
        .flat_map(|&d| points.iter().map(move |&x| (d, x)))
        .collect();

    let rows: Vec<[f64; 7]> = pool.install(|| {
        grid.par_iter()
            .map(|&(d, x)| {
                let lambda = to_lambda(x, bits);
                let qos = AverageDelaySpec::new(lambda, d)
                    .map_err(|e| CliError::Config(format!("sweep point {x}: {e}")))?;
                let omega = params.omega_star(&qos);
                let phi = params.user_size(&qos);
                let cap = capacity_for_size(phi);
                Ok([
                    lambda * bits,
                    lambda,
                    d,
                    omega,
                    phi,
                    cap as f64,
                    total_goodput(cap, omega, params.psr_star()),
                ])
            })
            .collect::<Result<_>>()
    })?;

    let mut w = csv_writer();
    w.write_record([
        "source_rate_bps",
        "arrival_rate_pps",
        "delay_bound_s",
        "omega_star_bps",
        "phi_star_ratio",
        "capacity_count",
        "total_goodput_bps",
    ])?;
    for r in &rows {
        w.write_record(r.iter().map(|&x| num(x)))?;
    }
    Ok(Report {
        csv: Some(finish(w)?),
        summary: summary(
            "prcg-sweep",
            scenario,
            json!({
                "rows": rows.len(),
                "gamma_star": params.gamma_star(),
                "psr_at_gamma_star": params.psr_star(),
                "min_capacity": rows.iter().map(|r| r[5] as usize).min(),
            }),
        ),
        infeasible: None,
    })
}

/// Admission test and efficient equilibrium for the listed PRCG users.
pub fn prcg_admit(scenario: &Scenario) -> Result<Report> {
    let params = scenario.system_params()?;
    let users = scenario.prcg_users()?;
    if users.is_empty() {
        return Err(CliError::Config("prcg.users must not be empty".into()));
    }
    let admission = admissible(&users, &params);
    let eq = admission
        .admissible
        .then(|| prcg_equilibrium(&users, &params))
        .transpose()?;

    let mut w = csv_writer();
    w.write_record([
        "user",
        "arrival_rate_pps",
        "delay_bound_s",
        "rate_bps",
        "phi_star_ratio",
        "power_w",
        "sir_ratio",
        "sir_db",
        "utility_bits_per_joule",
        "clipped",
    ])?;
    for (k, u) in users.iter().enumerate() {
        let out = eq.as_ref().map(|e| &e.outcome.users[k]);
        w.write_record([
            k.to_string(),
            num(u.qos.arrival_rate()),
            num(u.qos.delay_bound()),
            num(params.omega_star(&u.qos)),
            num(admission.sizes[k]),
            opt(out.map(|o| o.power)),
            opt(out.map(|o| o.achieved_sir)),
            opt(out.map(|o| to_db(o.achieved_sir))),
            opt(out.map(|o| o.utility)),
            out.map(|o| o.clipped.to_string()).unwrap_or_default(),
        ])?;
    }

    let clipped = eq
        .as_ref()
        .map(|e| e.outcome.clipped_users())
        .unwrap_or_default();
    let infeasible = if !admission.admissible {
        Some(format!(
            "total size {} is not below 1",
            admission.total_size
        ))
    } else if !clipped.is_empty() {
        Some(format!("users {clipped:?} exceed their power limit"))
    } else {
        None
    };
    Ok(Report {
        csv: Some(finish(w)?),
        summary: summary(
            "prcg-admit",
            scenario,
            json!({
                "admissible": admission.admissible,
                "total_size": admission.total_size,
                "total_received_power_w": eq.as_ref().map(|e| e.total_received),
                "clipped_users": clipped,
            }),
        ),
        infeasible,
    })
}

/// Best-response power dynamics for the finite user population. The CSV is
/// the trajectory.
pub fn best_response(scenario: &Scenario) -> Result<Report> {
    let pcg = scenario.pcg()?;
    let model = scenario.model()?;
    let (env, members) = scenario.radio_env()?;
    let class_targets: Vec<f64> = pcg
        .classes
        .iter()
        .map(|c| Ok(sir_target_infinite(c.requirement()?.as_ref(), &model)))
        .collect::<Result<_>>()?;
    let targets: Vec<f64> = members.iter().map(|m| class_targets[m.class]).collect();
    let rates = vec![pcg.rate_bps; members.len()];
    let config = BestResponseConfig {
        record_trajectory: true,
        ..Default::default()
    };
    let run = run_best_response(&env, &targets, &rates, &model, &config, Start::Zero)?;

    let mut csv = Vec::new();
    run.write_trajectory_csv(&mut csv)?;

    let load = mf_load(&targets, env.processing_gain());
    let termination = match run.termination {
        Termination::Converged => "converged",
        Termination::PowerLimited => "power_limited",
        Termination::IterationLimit => "iteration_limit",
    };
    let users: Vec<Value> = run
        .outcome
        .users
        .iter()
        .zip(&pcg.users)
        .map(|(u, m)| {
            json!({
                "class": m.class,
                "sir_target": u.sir_target,
                "achieved_sir": u.achieved_sir,
                "power_w": u.power,
                "utility_bits_per_joule": u.utility,
                "clipped": u.clipped,
            })
        })
        .collect();
    let infeasible = if load >= 1.0 {
        Some(format!("matched-filter load {load} is not below 1"))
    } else if !run.converged() || !run.outcome.feasible {
        Some(format!("best response ended with {termination}"))
    } else {
        None
    };
    Ok(Report {
        csv: Some(csv),
        summary: summary(
            "best-response",
            scenario,
            json!({
                "termination": termination,
                "iterations": run.iterations,
                "load_measure": load,
                "feasible": run.outcome.feasible,
                "users": users,
            }),
        ),
        infeasible,
    })
}
