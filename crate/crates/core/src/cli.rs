//! Command-line entry point wiring the configuration file to the
//! modules.
//!
//! Artifacts land in the output directory (flag beats the
//! `MEMCTRL_OUT` environment variable beats the config), which always
//! receives an echo of the fully-resolved configuration. Exit codes:
//! 0 success, 1 runtime failure (with `error.txt` diagnostics),
//! 2 usage error.

use crate::checkpoint::{Checkpoint, CheckpointMeta, Payload};
use crate::config::{Algo, RunConfig};
use crate::error::{Error, Result};
use crate::fmc::FmcWeights;
use crate::harness::{
    avg_tracking_error, max_tracking_error, run_episode, write_report_csv, write_trace_csv,
    CompareReport, Controller, ReportRow, TraceMeta,
};
use crate::lstm_ctrl::{
    generate_dataset, read_dataset_csv, train_inverse, write_dataset_csv, ClosedLoopLstm,
    InverseModel, OpenLoopLstm,
};
use crate::nn::{max_relative_error, Activation, LayerSpec, Network, State, Tape};
use crate::pid::{tune_gains, write_tuning_csv, PidController};
use crate::plant::{Plant, SurrogateFinger};
use crate::rl::{
    train_baseline_ddpg, train_baseline_dqn, train_baseline_sac, train_fmc_ddpg, train_fmc_dqn,
    train_fmc_sac, DqnPolicy, MlpPolicy, TrainLog, TrainResult,
};
use crate::seeds::derive_seed;
use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const OUT_ENV: &str = "MEMCTRL_OUT";

#[derive(Parser)]
#[command(name = "memctrl", version, about = "Memory-based controller benchmark toolkit")]
struct Cli {
    /// TOML run configuration; built-in defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the output directory (also via MEMCTRL_OUT).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum AlgoArg {
    FmcDdpg,
    FmcDqn,
    FmcSac,
    BaselineDdpg,
    BaselineDqn,
    BaselineSac,
    LstmInverse,
}

impl From<AlgoArg> for Algo {
    fn from(a: AlgoArg) -> Algo {
        match a {
            AlgoArg::FmcDdpg => Algo::FmcDdpg,
            AlgoArg::FmcDqn => Algo::FmcDqn,
            AlgoArg::FmcSac => Algo::FmcSac,
            AlgoArg::BaselineDdpg => Algo::BaselineDdpg,
            AlgoArg::BaselineDqn => Algo::BaselineDqn,
            AlgoArg::BaselineSac => Algo::BaselineSac,
            AlgoArg::LstmInverse => Algo::LstmInverse,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum EvalMode {
    Open,
    Closed,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the excitation dataset for the inverse model.
    GenData,
    /// Train one controller and write its checkpoint and log.
    Train {
        #[arg(long, value_enum)]
        algo: AlgoArg,
    },
    /// Evaluate a checkpoint on the test reference.
    Eval {
        /// Checkpoint file to load.
        #[arg(long)]
        controller: PathBuf,
        /// Loop closure for inverse-model checkpoints.
        #[arg(long, value_enum, default_value_t = EvalMode::Closed)]
        mode: EvalMode,
    },
    /// Grid-search the PID gains on the test reference.
    TunePid,
    /// Train, tune, and evaluate every controller head to head.
    Compare {
        /// Concurrent workers for independent runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Check analytic gradients against central finite differences.
    Gradcheck,
}

pub fn entry() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = format!("error: {e}");
            eprintln!("{line}");
            let dir = cli
                .out
                .clone()
                .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("out"));
            if std::fs::create_dir_all(&dir).is_ok() {
                let _ = std::fs::write(dir.join("error.txt"), format!("{line}\n"));
            }
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    if let Command::Gradcheck = cli.command {
        return gradcheck();
    }
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(&config.out_dir));
    config.out_dir = out.display().to_string();
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("config.toml"), config.to_toml()?)?;

    match &cli.command {
        Command::GenData => gen_data(&config, &out),
        Command::Train { algo } => train(&config, &out, (*algo).into()),
        Command::Eval { controller, mode } => eval(&config, &out, controller, *mode),
        Command::TunePid => tune_pid(&config, &out),
        Command::Compare { jobs } => compare(&config, &out, *jobs),
        Command::Gradcheck => unreachable!("handled above"),
    }
}

fn meta_for(config: &RunConfig) -> TraceMeta {
    TraceMeta { config_hash: config.hash(), seed: config.seed }
}

fn checkpoint_meta(config: &RunConfig, algorithm: &str, seed: u64) -> CheckpointMeta {
    CheckpointMeta {
        algorithm: algorithm.to_string(),
        seed,
        config_hash: config.hash(),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn gen_data(config: &RunConfig, out: &Path) -> Result<()> {
    let mut plant = SurrogateFinger::new(config.plant.clone())?;
    let mut excitation = config.lstm.excitation;
    excitation.seed = config.seed;
    let ds = generate_dataset(&mut plant, &excitation, config.lstm.samples)?;
    let mut file = create(&out.join("dataset.csv"))?;
    file.write_all(meta_for(config).comment().as_bytes())?;
    write_dataset_csv(&mut file, &ds)?;
    file.flush()?;
    println!(
        "dataset: {} samples, {} clamped, angles in [{:.3}, {:.3}]",
        ds.u.len(),
        ds.clamped_samples,
        ds.p.iter().copied().fold(f64::INFINITY, f64::min),
        ds.p.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    Ok(())
}

/// A finished RL training run, tagged by checkpoint payload kind.
enum Trained {
    Fmc(TrainResult<FmcWeights>),
    Mlp(TrainResult<MlpPolicy>),
    Dqn(TrainResult<DqnPolicy>),
}

impl Trained {
    fn log(&self) -> &TrainLog {
        match self {
            Trained::Fmc(r) => &r.log,
            Trained::Mlp(r) => &r.log,
            Trained::Dqn(r) => &r.log,
        }
    }

    fn best_episode(&self) -> usize {
        match self {
            Trained::Fmc(r) => r.best_episode,
            Trained::Mlp(r) => r.best_episode,
            Trained::Dqn(r) => r.best_episode,
        }
    }

    fn best_payload(&self) -> Payload {
        match self {
            Trained::Fmc(r) => Payload::Fmc(r.best.clone()),
            Trained::Mlp(r) => Payload::Mlp(r.best.clone()),
            Trained::Dqn(r) => Payload::Dqn(r.best.clone()),
        }
    }

    fn literal_payload(&self) -> Option<(usize, Payload)> {
        match self {
            Trained::Fmc(r) => r.literal.as_ref().map(|(e, w)| (*e, Payload::Fmc(w.clone()))),
            Trained::Mlp(r) => r.literal.as_ref().map(|(e, w)| (*e, Payload::Mlp(w.clone()))),
            Trained::Dqn(r) => r.literal.as_ref().map(|(e, w)| (*e, Payload::Dqn(w.clone()))),
        }
    }
}

fn run_trainer(
    config: &RunConfig,
    algo: Algo,
    seed: u64,
    reference: &[f64],
) -> Result<Trained> {
    let mut plant = SurrogateFinger::new(config.plant.clone())?;
    let t = config.trainer_for(algo, seed);
    Ok(match algo {
        Algo::FmcDdpg => Trained::Fmc(train_fmc_ddpg(&mut plant, reference, &t)?),
        Algo::FmcSac => Trained::Fmc(train_fmc_sac(&mut plant, reference, &t)?),
        Algo::FmcDqn => Trained::Dqn(train_fmc_dqn(&mut plant, reference, &t)?),
        Algo::BaselineDdpg => Trained::Mlp(train_baseline_ddpg(&mut plant, reference, &t)?),
        Algo::BaselineSac => Trained::Mlp(train_baseline_sac(&mut plant, reference, &t)?),
        Algo::BaselineDqn => Trained::Dqn(train_baseline_dqn(&mut plant, reference, &t)?),
        Algo::LstmInverse => {
            return Err(Error::Input("lstm-inverse is trained from the dataset path".into()))
        }
    })
}

fn write_train_log(
    out: &Path,
    name: &str,
    log: &TrainLog,
    meta: &TraceMeta,
) -> Result<()> {
    let mut file = create(&out.join(format!("train_{name}.csv")))?;
    file.write_all(meta.comment().as_bytes())?;
    log.write_csv(&mut file)?;
    file.flush()?;
    Ok(())
}

fn train(config: &RunConfig, out: &Path, algo: Algo) -> Result<()> {
    if algo == Algo::LstmInverse {
        return train_lstm(config, out);
    }
    let reference = config
        .harness
        .train
        .build(config.harness.episode_steps, config.plant.theta_max)?;
    let trained = run_trainer(config, algo, config.seed, &reference.values)?;
    let name = algo.name();
    let meta = checkpoint_meta(config, name, config.seed);
    Checkpoint::new(meta.clone(), trained.best_payload())
        .save(&out.join(format!("checkpoint_{name}.json")))?;
    if let Some((episode, payload)) = trained.literal_payload() {
        let mut literal_meta = meta;
        literal_meta.algorithm = format!("{name}@literal-{episode}");
        Checkpoint::new(literal_meta, payload)
            .save(&out.join(format!("checkpoint_{name}_literal.json")))?;
    }
    write_train_log(out, name, trained.log(), &meta_for(config))?;
    let last = trained.log().episodes.last().expect("at least one episode");
    println!(
        "trained {name}: {} episodes, best at {}, final mean reward {:.4}",
        trained.log().episodes.len(),
        trained.best_episode(),
        last.mean_reward
    );
    Ok(())
}

fn train_lstm(config: &RunConfig, out: &Path) -> Result<()> {
    let dataset_path = out.join("dataset.csv");
    let ds = if dataset_path.exists() {
        read_dataset_csv(BufReader::new(File::open(&dataset_path)?))?
    } else {
        let mut plant = SurrogateFinger::new(config.plant.clone())?;
        let mut excitation = config.lstm.excitation;
        excitation.seed = config.seed;
        generate_dataset(&mut plant, &excitation, config.lstm.samples)?
    };
    let mut tcfg = config.lstm.train;
    tcfg.seed = config.seed;
    let (model, stats) = train_inverse(&ds, &tcfg)?;
    let name = Algo::LstmInverse.name();
    Checkpoint::new(
        checkpoint_meta(config, name, config.seed),
        Payload::LstmInverse(model),
    )
    .save(&out.join(format!("checkpoint_{name}.json")))?;
    let mut file = create(&out.join("lstm_loss.csv"))?;
    file.write_all(meta_for(config).comment().as_bytes())?;
    file.write_all(b"epoch,train_loss\n")?;
    for (epoch, loss) in stats.train_loss.iter().enumerate() {
        writeln!(file, "{},{}", epoch + 1, loss)?;
    }
    file.flush()?;
    println!(
        "trained {name}: {} epochs, held-out mse {:.6}",
        stats.train_loss.len(),
        stats.val_mse
    );
    Ok(())
}

fn build_controller(
    payload: &Payload,
    mode: EvalMode,
    limits: (f64, f64),
) -> Result<Box<dyn Controller>> {
    payload.controller(mode == EvalMode::Open, limits)
}

fn eval(config: &RunConfig, out: &Path, controller_path: &Path, mode: EvalMode) -> Result<()> {
    let checkpoint = Checkpoint::load(controller_path)?;
    let mut plant = SurrogateFinger::new(config.plant.clone())?;
    let limits = plant.actuation_limits();
    let reference = config
        .harness
        .test
        .build(config.harness.episode_steps, config.plant.theta_max)?;
    let mut controller = build_controller(&checkpoint.payload, mode, limits)?;
    let trace = run_episode(
        controller.as_mut(),
        &mut plant,
        &reference,
        config.harness.reward_scale,
        None,
    )?;
    let mut file = create(&out.join("trace.csv"))?;
    write_trace_csv(&mut file, &trace, &meta_for(config))?;
    file.flush()?;
    if let Some(step) = trace.aborted_at {
        return Err(Error::Training(format!(
            "controller emitted a non-finite actuation at step {step}; partial trace written"
        )));
    }
    println!(
        "eval {}: avg error {:.5} deg, max error {:.5} deg",
        checkpoint.meta.algorithm,
        avg_tracking_error(&trace),
        max_tracking_error(&trace)
    );
    Ok(())
}

fn tune_pid(config: &RunConfig, out: &Path) -> Result<()> {
    let mut plant = SurrogateFinger::new(config.plant.clone())?;
    let reference = config
        .harness
        .test
        .build(config.harness.episode_steps, config.plant.theta_max)?;
    let (gains, rows) = tune_gains(&mut plant, &reference, &config.pid)?;
    let mut file = create(&out.join("pid_tuning.csv"))?;
    file.write_all(meta_for(config).comment().as_bytes())?;
    write_tuning_csv(&mut file, &rows)?;
    file.flush()?;
    Checkpoint::new(checkpoint_meta(config, "pid", config.seed), Payload::Pid(gains))
        .save(&out.join("checkpoint_pid.json"))?;
    let best = rows
        .iter()
        .map(|r| r.avg_error)
        .fold(f64::INFINITY, f64::min);
    println!(
        "tuned pid: kp={} ki={} kd={} avg error {:.5} deg",
        gains.kp, gains.ki, gains.kd, best
    );
    Ok(())
}

/// Runs `f` over `items` with up to `jobs` concurrent workers,
/// returning results in input order.
fn parallel_map<T, R, F>(items: Vec<T>, jobs: usize, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync,
{
    let jobs = jobs.max(1);
    let mut results = Vec::with_capacity(items.len());
    let mut iter = items.into_iter();
    loop {
        let wave: Vec<T> = iter.by_ref().take(jobs).collect();
        if wave.is_empty() {
            break;
        }
        std::thread::scope(|scope| {
            let handles: Vec<_> = wave
                .into_iter()
                .map(|item| scope.spawn(|| f(item)))
                .collect();
            for handle in handles {
                results.push(handle.join().expect("worker panicked"));
            }
        });
    }
    results
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    }
}

fn compare(config: &RunConfig, out: &Path, jobs: usize) -> Result<()> {
    let theta_max = config.plant.theta_max;
    let steps = config.harness.episode_steps;
    let test = config.harness.test.build(steps, theta_max)?;
    let train_ref = config.harness.train.build(steps, theta_max)?;
    let seeds = config.harness.eval_seeds.clone();

    // Independent trainings fan out across workers; everything after
    // is a deterministic sequential reduction in fixed order.
    let fmc_algos = [Algo::FmcDdpg, Algo::FmcDqn, Algo::FmcSac];
    let rl_tasks: Vec<(u64, Algo)> = seeds
        .iter()
        .flat_map(|&s| fmc_algos.iter().map(move |&a| (s, a)))
        .collect();
    let rl_results = parallel_map(rl_tasks, jobs, |(seed, algo)| {
        run_trainer(config, algo, seed, &train_ref.values)
    });
    let mut trained = Vec::with_capacity(rl_results.len());
    for result in rl_results {
        trained.push(result?);
    }

    let lstm_results = parallel_map(seeds.clone(), jobs, |seed| -> Result<InverseModel> {
        let mut plant = SurrogateFinger::new(config.plant.clone())?;
        let mut excitation = config.lstm.excitation;
        excitation.seed = seed;
        let ds = generate_dataset(&mut plant, &excitation, config.lstm.samples)?;
        let mut tcfg = config.lstm.train;
        tcfg.seed = seed;
        Ok(train_inverse(&ds, &tcfg)?.0)
    });
    let mut models = Vec::with_capacity(lstm_results.len());
    for result in lstm_results {
        models.push(result?);
    }

    let mut pid_plant = SurrogateFinger::new(config.plant.clone())?;
    let (gains, tuning_rows) = tune_gains(&mut pid_plant, &test, &config.pid)?;
    let mut file = create(&out.join("pid_tuning.csv"))?;
    file.write_all(meta_for(config).comment().as_bytes())?;
    write_tuning_csv(&mut file, &tuning_rows)?;
    file.flush()?;

    let controller_names =
        ["fmc-ddpg", "fmc-dqn", "fmc-sac", "lstm-open", "lstm-closed", "pi"];
    let mut per_seed: Vec<Vec<(f64, f64)>> = vec![Vec::new(); controller_names.len()];
    let mut seed_rows = String::from("controller,seed,avg_error,max_error\n");

    for (si, &seed) in seeds.iter().enumerate() {
        let limits = SurrogateFinger::new(config.plant.clone())?.actuation_limits();
        let mut controllers: Vec<(String, Box<dyn Controller>)> = Vec::new();
        for ai in 0..fmc_algos.len() {
            let run = &trained[si * fmc_algos.len() + ai];
            controllers.push((
                controller_names[ai].to_string(),
                build_controller(&run.best_payload(), EvalMode::Closed, limits)?,
            ));
        }
        controllers.push((
            "lstm-open".into(),
            Box::new(OpenLoopLstm::new(models[si].clone())),
        ));
        controllers.push((
            "lstm-closed".into(),
            Box::new(ClosedLoopLstm::new(models[si].clone())),
        ));
        controllers.push(("pi".into(), Box::new(PidController::new(gains, limits))));

        for (ci, (name, controller)) in controllers.iter_mut().enumerate() {
            let mut plant = SurrogateFinger::new(config.plant.clone())?;
            let trace = run_episode(
                controller.as_mut(),
                &mut plant,
                &test,
                config.harness.reward_scale,
                None,
            )?;
            let avg = avg_tracking_error(&trace);
            let max = max_tracking_error(&trace);
            per_seed[ci].push((avg, max));
            seed_rows.push_str(&format!("{name},{seed},{avg},{max}\n"));
            let mut trace_file =
                create(&out.join(format!("trace_{name}_seed{seed}.csv")))?;
            write_trace_csv(
                &mut trace_file,
                &trace,
                &TraceMeta { config_hash: config.hash(), seed },
            )?;
            trace_file.flush()?;
        }

        for (ai, &algo) in fmc_algos.iter().enumerate() {
            let run = &trained[si * fmc_algos.len() + ai];
            let mut log_file =
                create(&out.join(format!("rewards_{}_seed{seed}.csv", algo.name())))?;
            log_file
                .write_all(TraceMeta { config_hash: config.hash(), seed }.comment().as_bytes())?;
            run.log().write_csv(&mut log_file)?;
            log_file.flush()?;
        }
    }

    let mut seeds_file = create(&out.join("comparison_seeds.csv"))?;
    seeds_file.write_all(meta_for(config).comment().as_bytes())?;
    seeds_file.write_all(seed_rows.as_bytes())?;
    seeds_file.flush()?;

    // Median-over-seeds table in a fixed controller order, then the
    // ranking by median average error.
    let report = median_report(&controller_names, &per_seed);
    let mut report_file = create(&out.join("comparison.csv"))?;
    write_report_csv(&mut report_file, &report, &meta_for(config))?;
    report_file.flush()?;

    for row in &report.rows {
        println!(
            "{}: median avg error {:.5} deg, median max error {:.5} deg",
            row.name, row.avg_error, row.max_error
        );
    }
    println!("ranking: {}", report.ranking.join(" < "));
    Ok(())
}

/// Collapses per-seed (avg, max) pairs into one row of medians per
/// controller, ranked by median average error.
fn median_report(names: &[&str], per_seed: &[Vec<(f64, f64)>]) -> CompareReport {
    let rows: Vec<ReportRow> = names
        .iter()
        .zip(per_seed)
        .map(|(name, stats)| {
            let avgs: Vec<f64> = stats.iter().map(|s| s.0).collect();
            let maxes: Vec<f64> = stats.iter().map(|s| s.1).collect();
            ReportRow {
                name: name.to_string(),
                avg_error: median(&avgs),
                max_error: median(&maxes),
            }
        })
        .collect();
    let mut ranked: Vec<&ReportRow> = rows.iter().collect();
    ranked.sort_by(|a, b| a.avg_error.total_cmp(&b.avg_error));
    let ranking = ranked.iter().map(|r| r.name.clone()).collect();
    CompareReport { rows, ranking }
}

fn gradcheck() -> Result<()> {
    let mut worst: f64 = 0.0;
    let mut check = |name: &str, err: f64| {
        println!("gradcheck {name}: {err:.3e}");
        worst = worst.max(err);
    };

    for activation in [Activation::Linear, Activation::Relu, Activation::Sigmoid, Activation::Tanh]
    {
        let label = format!("dense-{activation:?}").to_lowercase();
        let specs = vec![
            LayerSpec::Dense { input: 4, output: 6, activation, bias: true },
            LayerSpec::Dense { input: 6, output: 2, activation, bias: true },
        ];
        let mut net = Network::new(specs);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(11, &label));
        net.init(&mut rng);
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();

        let mut tape = Tape::new();
        let mut state = State::default();
        let y = net.step_traced(&x, &mut state, &mut tape);
        let mut grads = vec![0.0; net.param_count()];
        net.backward(&tape, &[y.clone()], &mut grads);

        let probe = net.clone();
        let x_probe = x.clone();
        let mut params = net.params().to_vec();
        let err = max_relative_error(
            &mut params,
            &grads,
            |p| {
                let mut candidate = probe.clone();
                candidate.set_params(p);
                candidate.apply(&x_probe).iter().map(|v| 0.5 * v * v).sum()
            },
            1e-5,
        );
        check(&label, err);
    }

    for unroll in [1usize, 3, 10] {
        let label = format!("lstm-unroll-{unroll}");
        let specs = vec![
            LayerSpec::Lstm { input: 3, hidden: 5 },
            LayerSpec::Dense { input: 5, output: 1, activation: Activation::Linear, bias: true },
        ];
        let mut net = Network::new(specs);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(13, &label));
        net.init(&mut rng);
        let xs: Vec<Vec<f64>> = (0..unroll)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();

        let mut tape = Tape::new();
        let mut state = net.new_state();
        let mut d_out = Vec::with_capacity(unroll);
        for x in &xs {
            let y = net.step_traced(x, &mut state, &mut tape)[0];
            d_out.push(vec![y]);
        }
        let mut grads = vec![0.0; net.param_count()];
        net.backward(&tape, &d_out, &mut grads);

        let probe = net.clone();
        let xs_probe = xs.clone();
        let mut params = net.params().to_vec();
        let err = max_relative_error(
            &mut params,
            &grads,
            |p| {
                let mut candidate = probe.clone();
                candidate.set_params(p);
                let mut s = candidate.new_state();
                xs_probe
                    .iter()
                    .map(|x| {
                        let y = candidate.step(x, &mut s)[0];
                        0.5 * y * y
                    })
                    .sum()
            },
            1e-5,
        );
        check(&label, err);
    }

    println!("gradcheck max_relative_error={worst:e}");
    if worst < 1e-4 {
        Ok(())
    } else {
        Err(Error::Training(format!(
            "gradient check failed: max relative error {worst:e} is not below 1e-4"
        )))
    }
}
