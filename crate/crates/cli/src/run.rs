use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use madmm::data::{libsvm_read, normalize_columns, synthetic_generate, Dataset, Rng, DATA_STREAM};
use madmm::logistic::{initial_point, LogisticConfig, LogisticProblem};
use madmm::madmm::{DiagnosticsLevel, SolverConfig, TraceSampling};
use madmm::model::Iterate;
use madmm::proxlinear::{run_proxlinear, LogisticProxModel, ProxLinearConfig};
use madmm::trace::{emit_summary, DataSummary, Trace};
use serde_json::json;

use crate::args::{Args, Diagnostics, Mode};
use crate::CliError;

struct Loaded {
    data: Arc<Dataset>,
    source: String,
    synthetic: bool,
}

fn load(args: &Args) -> Result<Loaded, CliError> {
    if let Some((d, q)) = args.synthetic {
        let data = synthetic_generate(d, q, &mut Rng::new(args.seed, DATA_STREAM))?;
        return Ok(Loaded {
            data: Arc::new(data),
            source: format!("synthetic:{d}x{q}"),
            synthetic: true,
        });
    }
    let path = args.data.as_ref().expect("clap enforces a data source");
    let raw = libsvm_read(path).map_err(|source| CliError::DataFile {
        path: path.display().to_string(),
        source,
    })?;
    Ok(Loaded {
        data: Arc::new(normalize_columns(&raw)?),
        source: path.display().to_string(),
        synthetic: false,
    })
}

fn trace_path(base: &Path, solver: &str, compare: bool) -> PathBuf {
    if !compare {
        return base.to_path_buf();
    }
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
    let name = match base.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}.{solver}.{ext}"),
        None => format!("{stem}.{solver}"),
    };
    base.with_file_name(name)
}

fn run_madmm(problem: &LogisticProblem, config: SolverConfig, init: Iterate) -> Result<Trace, CliError> {
    let out = madmm::madmm::run(problem.spec(), problem.surrogates(), config, init)?;
    Ok(out.trace)
}

fn run_prox(model: &LogisticProxModel, config: &ProxLinearConfig, init: Iterate) -> Result<Trace, CliError> {
    Ok(run_proxlinear(model, init.x, config)?)
}

pub fn execute(args: &Args) -> Result<(), CliError> {
    args.validate()?;
    let loaded = load(args)?;
    let data = loaded.data.clone();
    let (d, q) = (data.d(), data.q());
    let lambda1 = args.lambda1;
    let lambda2 = args.lambda2_for(loaded.synthetic);
    let budget = args.resolve_budget(d, q)?;
    let max_iters = args.max_iters.unwrap_or(usize::MAX);
    let sampling = if args.every_iteration || budget.is_none() {
        TraceSampling::EveryIteration
    } else {
        TraceSampling::Adaptive
    };

    let problem = LogisticProblem::new(
        data.clone(),
        lambda1,
        lambda2,
        LogisticConfig {
            kappa1: args.kappa1,
            ..LogisticConfig::default()
        },
    )?;
    let mut madmm_cfg = problem.solver_config();
    if let Some(beta) = args.beta {
        madmm_cfg.beta = beta;
    }
    madmm_cfg.delta_tilde = args.delta_tilde;
    madmm_cfg.max_outer_iters = max_iters;
    madmm_cfg.wall_clock_budget = budget;
    madmm_cfg.stop_epsilon = args.solve.unwrap_or(0.0);
    madmm_cfg.seed = args.seed;
    madmm_cfg.strict = args.strict;
    madmm_cfg.enforce_beta_condition = args.strict;
    madmm_cfg.sampling = sampling;
    madmm_cfg.diagnostics = match (args.strict, args.diagnostics) {
        (true, _) | (_, Diagnostics::Full) => DiagnosticsLevel::FullLyapunov,
        (_, Diagnostics::Decrease) => DiagnosticsLevel::DecreaseChecks,
        (_, Diagnostics::Off) => DiagnosticsLevel::Off,
    };
    madmm_cfg.validate()?;

    let model = LogisticProxModel::new(data.clone(), lambda1, lambda2);
    let mut prox_cfg = ProxLinearConfig::new(model.default_tau());
    prox_cfg.wall_clock_budget = budget;
    prox_cfg.max_outer_iters = max_iters;
    prox_cfg.seed = args.seed;
    prox_cfg.sampling = sampling;
    prox_cfg.validate()?;

    let init = initial_point(&data, args.seed);
    log::info!(
        "{} on {} (d = {d}, q = {q}), lambda1 = {lambda1}, lambda2 = {lambda2}, beta = {}, budget = {:?}",
        args.mode.name(),
        loaded.source,
        madmm_cfg.beta,
        budget.map(|b| b.as_secs_f64())
    );

    let traces = match args.mode {
        Mode::Madmm => vec![run_madmm(&problem, madmm_cfg.clone(), init)?],
        Mode::Proxlinear => vec![run_prox(&model, &prox_cfg, init)?],
        Mode::Compare if args.parallel => {
            let (a, b) = std::thread::scope(|s| {
                let init_a = init.clone();
                let cfg = madmm_cfg.clone();
                let ha = s.spawn(|| run_madmm(&problem, cfg, init_a));
                let hb = s.spawn(|| run_prox(&model, &prox_cfg, init));
                (
                    ha.join().expect("mADMM thread panicked"),
                    hb.join().expect("prox-linear thread panicked"),
                )
            });
            vec![a?, b?]
        }
        Mode::Compare => vec![
            run_madmm(&problem, madmm_cfg.clone(), init.clone())?,
            run_prox(&model, &prox_cfg, init)?,
        ],
    };

    for t in &traces {
        log::info!(
            "{}: final fitting error {:.6} after {} iterations ({:.2} s, {:?})",
            t.solver,
            t.final_fit,
            t.iterations,
            t.elapsed_sec,
            t.stop_reason
        );
    }

    if let Some(base) = &args.trace {
        let compare = traces.len() > 1;
        for t in &traces {
            let path = trace_path(base, &t.solver, compare);
            let mut file = std::io::BufWriter::new(fs::File::create(&path)?);
            t.write_csv(&mut file)?;
            file.flush()?;
        }
    }

    let config = json!({
        "mode": args.mode.name(),
        "lambda1": lambda1,
        "lambda2": lambda2,
        "beta": madmm_cfg.beta,
        "delta_tilde": madmm_cfg.delta_tilde,
        "kappa1": args.kappa1,
        "seed": args.seed,
        "budget_sec": budget.map(|b: Duration| b.as_secs_f64()),
        "max_iters": args.max_iters,
        "stop_epsilon": madmm_cfg.stop_epsilon,
        "strict": args.strict,
        "parallel": args.parallel,
        "tau": prox_cfg.tau,
        "inner_max_iters": prox_cfg.inner_max_iters,
        "inner_tol": prox_cfg.inner_tol,
    });
    let summary = emit_summary(
        &traces,
        DataSummary {
            source: loaded.source,
            d,
            q,
            checksum: data.checksum(),
        },
        config,
    );
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    match &args.summary {
        Some(path) => fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}
