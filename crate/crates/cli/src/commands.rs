use std::fs;
use std::path::{Path, PathBuf};

use blockca::ca::{evolve, random_grid, random_grid_with, step, Direction, EdgeMode, Grid, Phase};
use blockca::io::{format_trajectory, parse_grid};
use blockca::learn::report::{direction_name, edge_name, phase_name};
use blockca::learn::{
    build_model, commute_experiment, divergence_histogram, evaluate, generate_dataset, train,
    verify_commuting_solutions, Chain, CommuteConfig, Dataset, ExactRule, GridMap, IdentityMap, Manifest,
    TrainConfig,
};
use blockca::linops::{build_full_step_operator, check_full_step, conv_to_matrix, deconv_to_matrix, KernelSpec};
use blockca::nn::gradcheck::{grad_check, min_relu_margin};
use blockca::nn::{checkpoint, conv_forward, deconv_forward, NetworkSpec, OptimizerConfig, Tensor};
use blockca::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

pub enum Status {
    Pass,
    Fail,
}

impl Status {
    fn from_bool(ok: bool) -> Status {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse(_) | Error::InvalidCell(_) | Error::Io(_) => 2,
        Error::NonFinite { .. } => 4,
        _ => 3,
    }
}

pub fn run(command: Command) -> Result<Status> {
    match command {
        Command::Simulate(a) => simulate(&a.source, a.steps, a.edge.into(), a.direction.into(), a.out.as_deref()),
        Command::Invert(a) => simulate(&a.source, a.steps, a.edge.into(), Direction::Backward, a.out.as_deref()),
        Command::OperatorCheck(a) => operator_check(&a),
        Command::LowerCheck(a) => lower_check(&a),
        Command::Train(a) => train_cmd(&a),
        Command::Eval(a) => eval_cmd(&a),
        Command::Rollout(a) => rollout_cmd(&a),
        Command::Commute(a) => commute_cmd(&a),
        Command::Gradcheck(a) => gradcheck_cmd(&a),
        Command::GenData(a) => gen_data(&a),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    Ok(fs::write(path, contents)?)
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest");
    PathBuf::from(name)
}

fn load_checkpoint(path: &Path) -> Result<NetworkSpec> {
    checkpoint::load(path).map_err(|e| match e {
        Error::Io(io) => Error::Parse(format!("{}: {io}", path.display())),
        other => other,
    })
}

fn source_grid(source: &GridSource) -> Result<Grid> {
    match (&source.grid, &source.random) {
        (Some(path), _) => parse_grid(&read(path)?),
        (None, Some(r)) => random_grid(r.n, r.density, r.seed),
        (None, None) => unreachable!("clap requires one grid source"),
    }
}

fn simulate(source: &GridSource, steps: usize, edge: EdgeMode, direction: Direction, out: Option<&Path>) -> Result<Status> {
    let grid = source_grid(source)?;
    let text = format_trajectory(&evolve(&grid, steps, edge, direction)?);
    match out {
        Some(path) => write(path, &text)?,
        None => print!("{text}"),
    }
    Ok(Status::Pass)
}

fn operator_check(a: &OperatorCheckArgs) -> Result<Status> {
    if a.n == 0 || a.n % 2 != 0 {
        return Err(Error::InvalidSide(a.n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let (mut matched, mut invertible) = (0, 0);
    for trial in 0..a.trials {
        // on 2×2 grids the trials walk through all 16 states
        let grid = if a.n == 2 {
            Grid::from_cells(2, (0..4).map(|k| ((trial % 16) >> k) as u8 & 1).collect())?
        } else {
            random_grid_with(a.n, 0.5, &mut rng)?
        };
        if trial == 0 {
            if let Some(path) = &a.dump {
                write(path, &build_full_step_operator(&grid)?.dump())?;
            }
        }
        let (m, inv) = check_full_step(&grid)?;
        matched += m as usize;
        invertible += inv as usize;
    }
    let pass = matched == a.trials && invertible == a.trials;
    println!(
        "operator-check n={} trials={} seed={}: {matched}/{} match, {invertible}/{} invertible: {}",
        a.n,
        a.trials,
        a.seed,
        a.trials,
        a.trials,
        if pass { "PASS" } else { "FAIL" }
    );
    Ok(Status::from_bool(pass))
}

const LOWERING_TOL: f64 = 1e-10;

fn random_kernel(rng: &mut ChaCha8Rng, transposed: bool) -> Result<(KernelSpec, (usize, usize, usize))> {
    let (size, stride) = if rng.gen_bool(0.5) { (2, 2) } else { (1, 1) };
    let (out, inp) = (rng.gen_range(1..=8), rng.gen_range(1..=8));
    let mut vals = |len: usize| (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
    let weights = vals(out * inp * size * size);
    let bias = vals(if transposed { inp } else { out });
    let kernel = KernelSpec::new(out, inp, size, size, stride, weights, bias)?;
    let side = if transposed { rng.gen_range(1..=8) } else { 2 * rng.gen_range(1..=8) };
    Ok((kernel, (if transposed { out } else { inp }, side, side)))
}

/// Largest deviation between the lowered matrix and the direct layer.
fn lowering_error(kernel: &KernelSpec, shape: (usize, usize, usize), x: &[f64], transposed: bool) -> Result<f64> {
    let input = Tensor::from_vec(&[1, shape.0, shape.1, shape.2], x.to_vec())?;
    let (lowered, direct) = if transposed {
        (deconv_to_matrix(kernel, shape)?.apply(x)?, deconv_forward(kernel, &input)?)
    } else {
        (conv_to_matrix(kernel, shape)?.apply(x)?, conv_forward(kernel, &input)?)
    };
    Ok(lowered.iter().zip(direct.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

fn lower_check(a: &LowerCheckArgs) -> Result<Status> {
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut failures = 0;
    let mut worst = 0.0f64;

    let identity = KernelSpec::new(1, 1, 1, 1, 1, vec![1.0], vec![0.0])?;
    let x: Vec<f64> = (0..16).map(|i| i as f64 - 7.5).collect();
    let exact = conv_to_matrix(&identity, (1, 4, 4))?.apply(&x)? == x && deconv_to_matrix(&identity, (1, 4, 4))?.apply(&x)? == x;
    failures += !exact as usize;

    for _ in 0..a.trials {
        for transposed in [false, true] {
            let (kernel, shape) = random_kernel(&mut rng, transposed)?;
            let x: Vec<f64> = (0..shape.0 * shape.1 * shape.2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let err = lowering_error(&kernel, shape, &x, transposed)?;
            worst = worst.max(err);
            failures += (err > LOWERING_TOL) as usize;
        }
    }
    println!(
        "lower-check seed={} trials={}: identity 1x1 exact={exact}, {} random cases, max error {worst:.3e}, {failures} failures: {}",
        a.seed,
        a.trials,
        2 * a.trials,
        if failures == 0 { "PASS" } else { "FAIL" }
    );
    Ok(Status::from_bool(failures == 0))
}

fn optimizer(o: &OptimArgs) -> OptimizerConfig {
    OptimizerConfig { algorithm: o.optimizer.into(), learning_rate: o.lr, beta1: o.beta1, beta2: o.beta2, epsilon: o.eps }
}

fn train_config(o: &OptimArgs, seed: u64, bypass: bool) -> Result<TrainConfig> {
    if o.epochs == 0 {
        return Err(Error::Config("--epochs must be at least 1".into()));
    }
    let config = TrainConfig { epochs: o.epochs, batch_size: o.batch_size, optimizer: optimizer(o), seed, bypass_endpoints: bypass };
    config.validate()?;
    Ok(config)
}

fn task_manifest(m: &mut Manifest, t: &TaskArgs) {
    m.set("direction", direction_name(t.direction.into()))
        .set("phase", phase_name(t.phase.into()))
        .set("edge", edge_name(t.edge.into()))
        .set("n", t.n);
}

fn load_dataset(path: &Path, t: &TaskArgs) -> Result<Dataset> {
    let d = Dataset::from_text(&read(path)?, t.direction.into(), t.phase.into(), t.edge.into(), 0)?;
    if d.n != t.n {
        return Err(Error::Config(format!("dataset grids are {}×{0}, --n is {}", d.n, t.n)));
    }
    if !d.verify()? {
        return Err(Error::Config(format!("{} does not hold exact pairs for the requested task", path.display())));
    }
    Ok(d)
}

fn train_cmd(a: &TrainArgs) -> Result<Status> {
    let t = &a.task;
    let data_seed = a.data_seed.unwrap_or(a.seed);
    let init_seed = a.init_seed.unwrap_or(a.seed);
    let config = train_config(&a.optim, a.seed, a.bypass)?;
    let dataset = match &a.data {
        Some(path) => load_dataset(path, t)?,
        None => generate_dataset(t.n, a.train_pairs + a.test_pairs, t.direction.into(), t.phase.into(), t.edge.into(), data_seed)?,
    };
    if a.test_pairs == 0 || a.test_pairs >= dataset.len() {
        return Err(Error::Config(format!("--test-pairs must lie in 1..{}", dataset.len())));
    }
    let holdout = a.test_pairs as f64 / dataset.len() as f64;
    let model = build_model(t.phase.into(), t.edge.into(), a.bypass, init_seed);
    let (history, network) = train(model, &dataset, &config, holdout)?;

    let mut m = Manifest::new("train");
    task_manifest(&mut m, t);
    m.set("pairs", dataset.len())
        .set("test_pairs", a.test_pairs)
        .set("data", a.data.as_ref().map_or("generated".to_string(), |p| p.display().to_string()))
        .set("data_seed", data_seed)
        .set("init_seed", init_seed)
        .train_config(&config);
    write(&a.out, &history.to_csv())?;
    write(&manifest_path(&a.out), &m.to_text())?;
    if let Some(path) = &a.checkpoint {
        checkpoint::save(&network, path)?;
    }
    let last = history.last().expect("at least one epoch");
    println!(
        "train: {} epochs, final train_loss={:.6e} test_loss={:.6e} cell_accuracy={:.6} exact_grid_rate={:.4}",
        last.epoch, last.train_loss, last.test_loss, last.cell_accuracy, last.exact_grid_rate
    );
    Ok(Status::Pass)
}

fn eval_cmd(a: &EvalArgs) -> Result<Status> {
    let t = &a.task;
    let network = load_checkpoint(&a.checkpoint)?;
    let dataset = match &a.data {
        Some(path) => load_dataset(path, t)?,
        None => generate_dataset(t.n, a.count, t.direction.into(), t.phase.into(), t.edge.into(), a.seed)?,
    };
    let e = evaluate(&network, &dataset.pairs)?;
    let summary = format!(
        "pairs={}\ncell_accuracy={:.8e}\nexact_grid_rate={:.8e}\nmean_loss={:.8e}\n",
        dataset.len(),
        e.cell_accuracy,
        e.exact_grid_rate,
        e.mean_loss
    );
    print!("{summary}");
    if let Some(out) = &a.out {
        let mut m = Manifest::new("eval");
        task_manifest(&mut m, t);
        m.set("checkpoint", a.checkpoint.display())
            .set("data", a.data.as_ref().map_or("generated".to_string(), |p| p.display().to_string()))
            .set("count", dataset.len())
            .set("seed", a.seed);
        write(out, &summary)?;
        write(&manifest_path(out), &m.to_text())?;
    }
    Ok(Status::Pass)
}

fn rollout_cmd(a: &RolloutArgs) -> Result<Status> {
    let aligned = load_checkpoint(&a.aligned)?;
    let offset = load_checkpoint(&a.offset)?;
    if a.grids == 0 {
        return Err(Error::Config("--grids must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let grids = (0..a.grids).map(|_| random_grid_with(a.n, 0.5, &mut rng)).collect::<Result<Vec<_>>>()?;
    let hist = divergence_histogram(&aligned, &offset, &grids, a.steps, a.edge.into())?;
    let mut csv = String::from("divergence_step,count\n");
    for (k, c) in hist.iter().enumerate().skip(1) {
        csv.push_str(&format!("{k},{c}\n"));
    }
    let mean = hist.iter().enumerate().map(|(k, &c)| (k * c) as f64).sum::<f64>() / a.grids as f64;
    println!(
        "rollout: {} grids, {} steps, {} never diverged, mean divergence step {mean:.3}",
        a.grids,
        a.steps,
        hist[a.steps + 1]
    );
    if let Some(out) = &a.out {
        let mut m = Manifest::new("rollout");
        m.set("aligned", a.aligned.display())
            .set("offset", a.offset.display())
            .set("edge", edge_name(a.edge.into()))
            .set("n", a.n)
            .set("grids", a.grids)
            .set("steps", a.steps)
            .set("seed", a.seed);
        write(out, &csv)?;
        write(&manifest_path(out), &m.to_text())?;
    } else {
        print!("{csv}");
    }
    Ok(Status::Pass)
}

fn commute_cmd(a: &CommuteArgs) -> Result<Status> {
    let trained_step = a.step_checkpoint.as_deref().map(load_checkpoint).transpose()?;
    let exact = ExactRule { direction: Direction::Forward, phase: Phase::Aligned, edge: EdgeMode::TorusWrap };
    let b: &dyn GridMap = match &trained_step {
        Some(net) => net,
        None => &exact,
    };
    let config = CommuteConfig {
        n: a.n,
        train_grids: a.train_grids,
        test_grids: a.test_grids,
        init_seed: a.init_seed.unwrap_or(a.seed),
        data_seed: a.data_seed.unwrap_or(a.seed),
        train: train_config(&a.optim, a.seed, false)?,
    };
    if a.trials == 0 {
        return Err(Error::Config("--trials must be at least 1".into()));
    }
    let (history, network) = commute_experiment(b, &config)?;
    let bb = Chain(vec![b, b]);
    let report = verify_commuting_solutions(
        b,
        &[("identity", &IdentityMap), ("B", b), ("B∘B", &bb), ("trained N", &network)],
        a.n,
        a.trials,
        a.seed,
    )?;

    let mut m = Manifest::new("commute");
    m.set("step", a.step_checkpoint.as_ref().map_or("exact-fwd-aligned-torus".to_string(), |p| p.display().to_string()))
        .set("trials", a.trials)
        .set("certificate_seed", a.seed)
        .commute_config(&config);
    write(&a.out, &history.to_csv())?;
    write(&manifest_path(&a.out), &m.to_text())?;
    if let Some(path) = &a.checkpoint {
        checkpoint::save(&network, path)?;
    }
    let last = history.last().expect("at least one epoch");
    println!("commute: final train_loss={:.6e} test_loss={:.6e}", last.train_loss, last.test_loss);
    print!("{}", report.summary());
    Ok(Status::from_bool(report.non_unique()))
}

fn gradcheck_cmd(a: &GradcheckArgs) -> Result<Status> {
    let (phase, edge): (Phase, EdgeMode) = (a.phase.into(), a.edge.into());
    if a.batch == 0 {
        return Err(Error::Config("--batch must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let xs = (0..a.batch).map(|_| random_grid_with(a.n, 0.5, &mut rng)).collect::<Result<Vec<_>>>()?;
    let ys = xs.iter().map(|g| step(g, phase, edge)).collect::<Result<Vec<_>>>()?;
    let (x, t) = (Tensor::from_grids(&xs)?, Tensor::from_grids(&ys)?);
    let (network, init) = match &a.checkpoint {
        Some(path) => (load_checkpoint(path)?, "checkpoint".to_string()),
        None => {
            // resample the initialisation until no ReLU input sits on a kink
            let mut found = None;
            for s in a.seed..a.seed + 200 {
                let net = build_model(phase, edge, a.bypass, s);
                if min_relu_margin(&net, &x)? >= 1e-4 {
                    found = Some((net, format!("init_seed={s}")));
                    break;
                }
            }
            found.ok_or_else(|| Error::Config("no initialisation clear of the ReLU kinks in 200 tries".into()))?
        }
    };
    let report = grad_check(&network, &x, &t)?;
    let pass = report.max_relative_error <= a.tolerance;
    println!(
        "gradcheck {init} parameters={} max_relative_error={:.3e} at {:?} relu_margin={:.3e}: {}",
        report.parameters,
        report.max_relative_error,
        report.worst,
        min_relu_margin(&network, &x)?,
        if pass { "PASS" } else { "FAIL" }
    );
    Ok(Status::from_bool(pass))
}

fn gen_data(a: &GenDataArgs) -> Result<Status> {
    let t = &a.task;
    let d = generate_dataset(t.n, a.count, t.direction.into(), t.phase.into(), t.edge.into(), a.seed)?;
    let mut m = Manifest::new("gen-data");
    task_manifest(&mut m, t);
    m.set("count", a.count).set("seed", a.seed).set("density", blockca::learn::dataset::DEFAULT_DENSITY);
    write(&a.out, &d.to_text())?;
    write(&manifest_path(&a.out), &m.to_text())?;
    println!("gen-data: {} pairs of {}×{} grids written to {}", d.len(), t.n, t.n, a.out.display());
    Ok(Status::Pass)
}
