//! One function per subcommand. Each computes its results, writes its
//! CSV files through the [`OutputDir`] and returns the summary payload.

use std::io::Write;

use rayon::prelude::*;
use serde_json::json;

use spikefield::engine::aux::AuxParams;
use spikefield::engine::coupling::{chaos_bound, couple_chaos, couple_synchronous, couple_u_z, CouplingDiagnostics};
use spikefield::engine::io::{write_events, write_trajectory, TrajectoryPoint};
use spikefield::engine::{simulate_until_extinction, Simulator, SpikeEvent, SystemState};
use spikefield::ldp::{extinction_scaling, quasi_potential_bounds, w_zero, LdpConfig};
use spikefield::meanfield::particles::{surrogate_rate_path, InitLaw};
use spikefield::meanfield::picard::{picard_z, PicardOptions};
use spikefield::meanfield::solve_pstar;
use spikefield::metastab::{calibrate_beta_from_samples, estimate_eps, exit_ensemble, DomainSpec, EpsDesign};
use spikefield::model::{classify_ab, classify_regime};
use spikefield::rng::{Purpose, StreamKey};
use spikefield::stats::{mean_se, median};
use spikefield::ModelParams;

use crate::config::{CouplingKind, DomainKind, InitConfig, RunConfig};
use crate::error::CliError;
use crate::output::{OutputDir, Report, COUNT, ONE, POTENTIAL, RATE, TIME};

/// Cell width of the surrogate mean-field rate of the chaos coupling.
const SURROGATE_DT: f64 = 1e-3;

fn setting(msg: impl Into<String>) -> CliError {
    CliError::Setting(msg.into())
}

fn params(cfg: &RunConfig) -> Result<ModelParams, CliError> {
    Ok(ModelParams::try_from(&cfg.model)?)
}

fn law(init: &InitConfig) -> Result<InitLaw, CliError> {
    match init {
        InitConfig::Uniform { lo, hi } => {
            if !(0.0 <= *lo && lo <= hi) {
                return Err(setting(format!("uniform init needs 0 ≤ lo ≤ hi, got [{lo}, {hi}]")));
            }
            Ok(InitLaw::Uniform { lo: *lo, hi: *hi })
        }
        InitConfig::Pattern { values } => {
            if values.is_empty() {
                return Err(setting("pattern init needs at least one value"));
            }
            Ok(InitLaw::Samples(values.clone()))
        }
    }
}

fn draw(init: &InitConfig, n: usize, key: &StreamKey) -> Result<Vec<f64>, CliError> {
    match init {
        InitConfig::Pattern { values } if !values.is_empty() => Ok(cyclic(values, n)),
        _ => Ok(law(init)?.draw(n, key)),
    }
}

fn cyclic(values: &[f64], n: usize) -> Vec<f64> {
    values.iter().copied().cycle().take(n).collect()
}

fn positive(name: &str, x: f64) -> Result<(), CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(setting(format!("{name} must be positive, got {x}")))
    }
}

pub fn simulate(cfg: &RunConfig, out: &OutputDir) -> Result<Report, CliError> {
    let p = params(cfg)?;
    let sc = &cfg.simulate;
    if !(sc.horizon >= 0.0 && sc.horizon.is_finite()) {
        return Err(setting(format!("horizon must be non-negative, got {}", sc.horizon)));
    }
    positive("dt", sc.dt)?;
    let key = StreamKey::new(cfg.seed, 0, Purpose::NOISE);
    let state = SystemState::new(draw(&sc.init, p.n, &key)?, &p)?;
    let mut sim = Simulator::new(&p, state, sc.backend, &key)?;
    let mut events: Vec<SpikeEvent> = Vec::new();
    let mut traj = Vec::new();
    let outcome = sim.run_with_grid(
        sc.horizon,
        sc.dt,
        sc.cap,
        |e, _| events.push(*e),
        |s| {
            traj.push(TrajectoryPoint {
                t: s.t,
                lambda_bar: s.lambda_bar(),
                mean_potential: s.mean_potential(),
            })
        },
    );
    out.write("events.csv", |w| write_events(w, &events))?;
    out.write("trajectory.csv", |w| write_trajectory(w, &traj))?;
    let max_rate = traj.iter().map(|x| x.lambda_bar).fold(0.0, f64::max);
    let last = traj.last().copied().expect("initial grid point");
    Ok(Report {
        payload: json!({
            "n": p.n,
            "horizon": sc.horizon,
            "end_time": last.t,
            "spikes": outcome.spikes,
            "truncated": outcome.truncated,
            "final_lambda_bar": last.lambda_bar,
            "max_lambda_bar": max_rate,
            "final_mean_potential": last.mean_potential,
        }),
        units: vec![
            ("n", COUNT),
            ("horizon", TIME),
            ("end_time", TIME),
            ("spikes", COUNT),
            ("final_lambda_bar", RATE),
            ("max_lambda_bar", RATE),
            ("final_mean_potential", POTENTIAL),
        ],
        partial: outcome.truncated,
    })
}

pub fn extinction(cfg: &RunConfig, out: &OutputDir) -> Result<Report, CliError> {
    let p = params(cfg)?;
    let ec = &cfg.extinction;
    if ec.replicas == 0 {
        return Err(setting("replicas must be positive"));
    }
    let runs = (0..ec.replicas as u64)
        .into_par_iter()
        .map(|r| {
            let key = StreamKey::new(cfg.seed, r, Purpose::EXTINCTION);
            let init = draw(&ec.init, p.n, &key)?;
            Ok(simulate_until_extinction(&init, &p, &key, ec.cap, false)?)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    out.write("extinction.csv", |w| {
        writeln!(w, "replica,last_spike,spikes,truncated")?;
        for (r, run) in runs.iter().enumerate() {
            writeln!(w, "{r},{},{},{}", run.last_spike, run.spikes, run.truncated)?;
        }
        Ok(())
    })?;
    let times: Vec<f64> = runs.iter().map(|r| r.last_spike).collect();
    let (mean, se) = mean_se(&times);
    let truncated = runs.iter().filter(|r| r.truncated).count();
    let regime = classify_regime(&p)?;
    Ok(Report {
        payload: json!({
            "replicas": ec.replicas,
            "mean": mean,
            "se": se,
            "median": median(&times),
            "mean_spikes": runs.iter().map(|r| r.spikes as f64).sum::<f64>() / runs.len() as f64,
            "truncated": truncated,
            "a": regime.a,
            "b": regime.b,
            "flags": regime.flags,
        }),
        units: vec![
            ("replicas", COUNT),
            ("mean", TIME),
            ("se", TIME),
            ("median", TIME),
            ("mean_spikes", COUNT),
            ("truncated", COUNT),
            ("a", ONE),
            ("b", ONE),
        ],
        partial: truncated > 0,
    })
}

pub fn exit_times(cfg: &RunConfig, out: &OutputDir) -> Result<Report, CliError> {
    let p = params(cfg)?;
    let xc = &cfg.exit_times;
    let domain = match xc.domain {
        DomainKind::LevelSet => DomainSpec::level_set(xc.gamma, xc.delta)?,
        DomainKind::Band => {
            let centre = match xc.p_star {
                Some(c) => c,
                None => solve_pstar(&p)?.p_star,
            };
            DomainSpec::band(centre, xc.delta, xc.gamma)?
        }
    };
    if xc.inits.is_empty() || xc.inits.iter().any(|v| v.is_empty()) {
        return Err(setting("exit_times.inits needs at least one non-empty pattern"));
    }
    let inits: Vec<Vec<f64>> = xc.inits.iter().map(|v| cyclic(v, p.n)).collect();
    let key = StreamKey::new(cfg.seed, 0, Purpose::NOISE);
    let report = exit_ensemble(&domain, &inits, &p, xc.replicas, &key, xc.cap)?;
    out.write("exit_times.csv", |w| report.write_csv(w))?;
    out.write("exit_cdf.csv", |w| {
        writeln!(w, "t,abs_error")?;
        for (t, e) in &report.sup_cdf_error {
            writeln!(w, "{t},{e}")?;
        }
        Ok(())
    })?;

    let trap = domain.trap();
    let beta = if trap.contains(p.lambda_bar(&inits[0])) {
        let first: Vec<_> = report.samples.iter().filter(|s| s.init_id == 0).collect();
        let taus: Vec<f64> = first.iter().map(|s| s.tau).collect();
        let censored = first.iter().filter(|s| s.truncated).map(|s| s.tau).reduce(f64::min);
        calibrate_beta_from_samples(&taus, censored).ok()
    } else {
        None
    };

    let mut partial = report.partial;
    let eps = if xc.eps {
        let trap_inits: Vec<Vec<f64>> = inits
            .iter()
            .filter(|u| trap.contains(p.lambda_bar(u)))
            .cloned()
            .collect();
        if trap_inits.is_empty() {
            return Err(setting("eps estimation needs an initial state inside the trap"));
        }
        let pairs = if trap_inits.len() > 1 {
            trap_inits.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect()
        } else {
            vec![(trap_inits[0].clone(), trap_inits[0].clone())]
        };
        let design = EpsDesign {
            s1: xc.s1,
            s2: xc.s2,
            domain_inits: inits.clone(),
            pairs,
            trap_inits,
            description: "configured initial states".into(),
            calibrate: false,
        };
        let e = estimate_eps(
            &domain,
            trap,
            &design,
            &p,
            xc.eps_replicas,
            &key.child(u64::MAX),
            xc.cap,
        )?;
        partial |= e.partial;
        Some(e)
    } else {
        None
    };

    let per_init: Vec<_> = report
        .per_init
        .iter()
        .map(|s| json!({ "init_id": s.init_id, "replicas": s.replicas, "mean": s.mean, "se": s.se, "truncated": s.truncated }))
        .collect();
    let mut units = vec![
        ("mean", TIME),
        ("se", TIME),
        ("ks", ONE),
        ("ks_leave_one_out", ONE),
        ("max_ratio_minus_1", ONE),
        ("mean_ratio", ONE),
        (
            "per_init",
            "mean and se in model time; replicas and truncated are counts",
        ),
        ("domain_lo", RATE),
        ("domain_hi", RATE),
        ("trap_lo", RATE),
        ("trap_hi", RATE),
    ];
    if beta.is_some() {
        units.push(("beta", TIME));
    }
    if eps.is_some() {
        units.push(("eps", ONE));
    }
    let dom = domain.domain();
    Ok(Report {
        payload: json!({
            "mean": report.mean,
            "se": report.se,
            "ks": report.ks,
            "ks_leave_one_out": report.ks_leave_one_out,
            "max_ratio_minus_1": report.max_ratio_deviation,
            "mean_ratio": report.mean_ratio,
            "per_init": per_init,
            "domain_lo": dom.lo,
            "domain_hi": finite_or_null(dom.hi),
            "trap_lo": trap.lo,
            "trap_hi": finite_or_null(trap.hi),
            "beta": beta,
            "eps": eps,
        }),
        units,
        partial,
    })
}

fn finite_or_null(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else {
        serde_json::Value::Null
    }
}

pub fn meanfield(cfg: &RunConfig, out: &OutputDir) -> Result<Report, CliError> {
    let p = params(cfg)?;
    let mc = &cfg.meanfield;
    let table = solve_pstar(&p)?;
    out.write("density.csv", |w| table.write_csv(w))?;
    let mut units = vec![
        ("p_star", RATE),
        ("a_star", "potential per model time"),
        ("residual", "potential per model time"),
        ("mass", ONE),
        ("support_end", POTENTIAL),
        ("roots", "potential per model time"),
    ];
    let mut payload = json!({
        "p_star": table.p_star,
        "a_star": table.a_star,
        "residual": table.residual,
        "mass": table.mass,
        "support_end": table.support_end(),
        "roots": table.roots,
        "non_unique": table.non_unique(),
    });
    if mc.picard_horizon > 0.0 {
        let opts = PicardOptions::for_params(&p, mc.picard_replicas);
        let key = StreamKey::new(cfg.seed, 0, Purpose::MEAN_FIELD);
        let res = picard_z(&law(&mc.init)?, &p, mc.picard_horizon, opts, &key)?;
        out.write("picard.csv", |w| {
            writeln!(w, "t,z,se")?;
            for (j, (z, se)) in res.path.values.iter().zip(&res.se).enumerate() {
                writeln!(w, "{},{z},{se}", j as f64 * res.path.dt)?;
            }
            Ok(())
        })?;
        payload["picard_final_z"] = json!(res.path.values.last());
        payload["picard_max_iterations"] = json!(res.iterations.iter().max());
        units.push(("picard_final_z", RATE));
        units.push(("picard_max_iterations", COUNT));
    }
    Ok(Report {
        payload,
        units,
        partial: false,
    })
}

pub fn phase(cfg: &RunConfig, out: &OutputDir) -> Result<Report, CliError> {
    let pc = &cfg.phase;
    if pc.resolution < 2 {
        return Err(setting(format!(
            "phase.resolution must be at least 2, got {}",
            pc.resolution
        )));
    }
    if !(pc.a_min <= pc.a_max && pc.b_min <= pc.b_max && pc.a_min >= 0.0 && pc.b_min >= 0.0) {
        return Err(setting("phase bounds must satisfy 0 ≤ min ≤ max"));
    }
    let m = pc.resolution;
    let at = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (m - 1) as f64;
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(m * m + pc.points.len());
    for i in 0..m {
        for j in 0..m {
            points.push((at(pc.a_min, pc.a_max, i), at(pc.b_min, pc.b_max, j)));
        }
    }
    points.extend(pc.points.iter().map(|&[a, b]| (a, b)));
    let reports: Vec<_> = points.iter().map(|&(a, b)| classify_ab(a, b)).collect();
    out.write("phase.csv", |w| {
        writeln!(
            w,
            "a,b,flag_extinction_attractive,flag_unstable,flag_exp_extinction,flag_contraction,flag_exit"
        )?;
        for r in &reports {
            let f = r.flags;
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.a,
                r.b,
                u8::from(f.delta0_unique_attractive),
                u8::from(f.delta0_unstable),
                u8::from(f.exponential_extinction),
                u8::from(f.contraction_condition),
                u8::from(f.exit_condition)
            )?;
        }
        Ok(())
    })?;
    let count = |f: fn(&spikefield::model::RegimeFlags) -> bool| reports.iter().filter(|r| f(&r.flags)).count();
    let model = ModelParams::try_from(&cfg.model)
        .ok()
        .and_then(|p| classify_regime(&p).ok());
    Ok(Report {
        payload: json!({
            "points": reports.len(),
            "extinction_attractive": count(|f| f.delta0_unique_attractive),
            "unstable": count(|f| f.delta0_unstable),
            "exp_extinction": count(|f| f.exponential_extinction),
            "contraction": count(|f| f.contraction_condition),
            "exit": count(|f| f.exit_condition),
            "model": model,
        }),
        units: vec![
            ("points", COUNT),
            ("extinction_attractive", COUNT),
            ("unstable", COUNT),
            ("exp_extinction", COUNT),
            ("contraction", COUNT),
            ("exit", COUNT),
            ("model", ONE),
        ],
        partial: false,
    })
}

pub fn ldp(cfg: &RunConfig, out: &OutputDir) -> Result<Report, CliError> {
    let p = params(cfg)?;
    let lc = &cfg.ldp;
    let config = LdpConfig::new(&p, lc.eta)?;
    let bounds = quasi_potential_bounds(&config)?;
    let w0 = w_zero(&p)?;
    let mut units = vec![
        ("eta", RATE),
        ("x_inf", RATE),
        ("lower", ONE),
        ("upper", ONE),
        ("w_zero", ONE),
        ("w_zero_quadrature", ONE),
    ];
    let mut payload = json!({
        "eta": lc.eta,
        "x_inf": config.limit.x_inf,
        "lower": bounds.lower,
        "upper": bounds.upper,
        "w_zero": w0.closed_form,
        "w_zero_quadrature": w0.quadrature,
    });
    let mut partial = false;
    if !lc.ns.is_empty() {
        let key = StreamKey::new(cfg.seed, 0, Purpose::AUX);
        let rep = extinction_scaling(&p, lc.eta, &lc.ns, lc.replicas, lc.cap, &key)?;
        out.write("scaling.csv", |w| rep.write_csv(w))?;
        partial = rep.rows.iter().any(|r| r.truncated > 0);
        payload["scaling"] = json!({
            "rows": rep.rows,
            "growth": rep.growth,
            "monotone": rep.monotone,
            "growth_ok": rep.growth_ok,
            "within_bounds": rep.within_bounds,
            "slack": rep.slack,
            "verdict": rep.verdict,
        });
        units.push((
            "scaling",
            "rows: median, mean, se in model time; log_mean_over_n dimensionless",
        ));
    }
    Ok(Report {
        payload,
        units,
        partial,
    })
}

fn write_coupling(out: &OutputDir, d: &CouplingDiagnostics) -> Result<(), CliError> {
    out.write("coupling.csv", |w| {
        writeln!(w, "t,discrepancy")?;
        for (t, x) in d.times.iter().zip(&d.discrepancy) {
            writeln!(w, "{t},{x}")?;
        }
        Ok(())
    })
}

pub fn couple(cfg: &RunConfig, out: &OutputDir) -> Result<Report, CliError> {
    let p = params(cfg)?;
    let cc = &cfg.couple;
    positive("horizon", cc.horizon)?;
    positive("dt", cc.dt)?;
    let key = StreamKey::new(cfg.seed, 0, Purpose::COUPLING);
    let init = draw(&cc.init, p.n, &key.child(1))?;
    let (diag, bound, unit) = match cc.kind {
        CouplingKind::UZ => {
            let aux = AuxParams::new(&p)?;
            let z0 = p.lambda_bar(&init).min(aux.z_n);
            (couple_u_z(&init, z0, &p, cc.horizon, &key)?, None, RATE)
        }
        CouplingKind::Chaos => {
            if cc.surrogate == 0 {
                return Err(setting("couple.surrogate must be positive"));
            }
            let rate = surrogate_rate_path(
                &p,
                &law(&cc.init)?,
                cc.surrogate,
                cc.horizon,
                SURROGATE_DT,
                &key.child(2),
            )?;
            let d = couple_chaos(&init, &p, Some(&rate), cc.horizon, cc.dt, &key)?;
            (d, Some(chaos_bound(&p, cc.horizon)), POTENTIAL)
        }
        CouplingKind::Synchronous => {
            let other = draw(&cc.other, p.n, &key.child(3))?;
            (
                couple_synchronous(&init, &other, &p, cc.horizon, cc.dt, &key)?,
                None,
                RATE,
            )
        }
    };
    write_coupling(out, &diag)?;
    let mut units = vec![
        ("final_discrepancy", unit),
        ("max_discrepancy", unit),
        ("domination_violations", COUNT),
        ("events", COUNT),
    ];
    if diag.coalescence_time.is_some() {
        units.push(("coalescence_time", TIME));
    }
    if bound.is_some() {
        units.push(("chaos_bound", POTENTIAL));
    }
    Ok(Report {
        payload: json!({
            "kind": cc.kind,
            "final_discrepancy": diag.discrepancy.last(),
            "max_discrepancy": diag.discrepancy.iter().copied().fold(0.0, f64::max),
            "coalescence_time": diag.coalescence_time,
            "domination_violations": diag.domination_violations,
            "events": diag.events,
            "chaos_bound": bound,
        }),
        units,
        partial: false,
    })
}
