use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use decorr::cultivation::{
    fit_params, integrate, perturb, perturb_initial, simulate, CultivationState, FitConfig, Observations,
    PerturbationConfig, STATE_COLUMNS,
};
use decorr::dataset::{
    build_dataset, experiment_specs, read_dataset, write_dataset, Dataset, DatasetKind, NormRecord, SubstrateMix,
};
use decorr::decorrelation::{AugmentConfig, AugmentMode, AugmentStats, AugmentStatsDocument};
use decorr::fixtures::{self, CultivationFixture, FIG1_OBSERVATIONS_CSV};
use decorr::spectra::{extract_components, generate_components, ComponentLibrary, PeakTable};
use decorr::train::{
    augmentation_stats, build_experiment_data, evaluate, run_seed, summarize, train, ExperimentConfig, LinearRegressor,
    TrainConfig, TrainingSetup,
};
use decorr::{rng, DatasetF64};
use serde::Serialize;

use crate::output::{create_dir, read_json, write_checksums, write_echo, write_json, Echo};
use crate::{
    AugmentArgs, AugmentStatsArgs, Command, ComponentsArgs, EvaluateArgs, Failure, FitArgs, GenDataArgs, ReplayArgs,
    ReproduceArgs, SimulateArgs, TrainArgs,
};

pub fn run(command: Command) -> Result<(), Failure> {
    match &command {
        Command::Fit(a) => finish(&a.out, &command, fit(a)),
        Command::Simulate(a) => finish(&a.out, &command, simulate_cmd(a)),
        Command::Components(a) => finish(&a.out, &command, components(a)),
        Command::GenData(a) => finish(&a.out, &command, gen_data(a)),
        Command::AugmentStats(a) => finish(&a.out, &command, augment_stats(a)),
        Command::Train(a) => finish(&a.out, &command, train_cmd(a)),
        Command::Evaluate(a) => finish(&a.out, &command, evaluate_cmd(a)),
        Command::Reproduce(a) => finish(&a.out, &command, reproduce(a)),
        Command::Replay(a) => replay(a),
    }
}

/// Writes the echo and checksums whenever artifacts were produced, including
/// a fit that stopped short of convergence.
fn finish(out: &Path, command: &Command, result: Result<(), Failure>) -> Result<(), Failure> {
    if result.is_ok() || matches!(result, Err(Failure::Numerical(_))) && out.is_dir() {
        write_echo(out, command)?;
        write_checksums(out)?;
    }
    result
}

fn replay(a: &ReplayArgs) -> Result<(), Failure> {
    let echo: Echo = read_json(&a.echo)?;
    let mut command = echo.command;
    if let Some(out) = &a.out {
        match &mut command {
            Command::Fit(c) => c.out = out.clone(),
            Command::Simulate(c) => c.out = out.clone(),
            Command::Components(c) => c.out = out.clone(),
            Command::GenData(c) => c.out = out.clone(),
            Command::AugmentStats(c) => c.out = out.clone(),
            Command::Train(c) => c.out = out.clone(),
            Command::Evaluate(c) => c.out = out.clone(),
            Command::Reproduce(c) => c.out = out.clone(),
            Command::Replay(_) => unreachable!("replay is never echoed"),
        }
    }
    run(command)
}

fn load_fixture(path: Option<&Path>) -> Result<CultivationFixture<f64>, Failure> {
    Ok(match path {
        Some(p) => CultivationFixture::load(p)?,
        None => fixtures::nominal(),
    })
}

fn load_dataset(dir: &Path) -> Result<DatasetF64, Failure> {
    read_dataset(dir).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write_with<F>(path: &Path, f: F) -> Result<(), Failure>
where
    F: FnOnce(&mut Vec<u8>) -> decorr::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    fs::write(path, buf).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn fit(a: &FitArgs) -> Result<(), Failure> {
    let fixture = load_fixture(a.fixture.as_deref())?;
    let obs: Observations<f64> = match &a.observations {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?;
            Observations::read_csv(text.as_bytes(), &p.display().to_string())?
        }
        None => Observations::read_csv(FIG1_OBSERVATIONS_CSV.as_bytes(), "reference observations")?,
    };
    SubstrateMix::new(a.oil_pct)?;
    let fallback = fixture.initial.state_for_mix(a.oil_pct);
    let cfg = FitConfig {
        max_iters: a.max_iters,
        prior_weight: a.prior_weight,
        ..FitConfig::default()
    };
    let report = fit_params(&obs, &fixture.params, &fallback, &cfg)?;

    create_dir(&a.out)?;
    let fitted = CultivationFixture {
        params: report.params,
        initial: fixture.initial,
    };
    write_text(&a.out.join("fitted_params.txt"), &fitted.to_kv_string())?;
    write_json(&a.out.join("fit_report.json"), &report)?;

    let y0 = obs.initial_state(&fallback);
    let fitted_obs = simulate(&y0, &report.params, &obs.times, cfg.dt)?;
    let mut csv = String::from("time_h");
    for c in STATE_COLUMNS {
        let _ = write!(csv, ",{c}_observed,{c}_fitted");
    }
    csv.push('\n');
    for ((t, row), s) in obs.times.iter().zip(&obs.values).zip(&fitted_obs.states) {
        let _ = write!(csv, "{t}");
        for (v, f) in row.iter().zip(s.to_array()) {
            let _ = write!(csv, ",{},{f}", v.map(|v| v.to_string()).unwrap_or_default());
        }
        csv.push('\n');
    }
    write_text(&a.out.join("residuals.csv"), &csv)?;

    let t_end = *obs.times.last().expect("observations are non-empty");
    let mut dense: Vec<f64> = (0..)
        .map(|i| obs.times[0] + 0.5 * i as f64)
        .take_while(|&t| t < t_end)
        .collect();
    dense.push(t_end);
    let curve = simulate(&y0, &report.params, &dense, cfg.dt)?;
    write_with(&a.out.join("fitted_trajectory.csv"), |b| curve.write_csv(b))?;

    println!(
        "converged {} after {} iterations, objective {:.3e}",
        report.converged, report.iterations, report.objective
    );
    for (c, r) in STATE_COLUMNS.iter().zip(report.rmse) {
        if let Some(r) = r {
            println!("  rmse {c:<6} {r:.4}");
        }
    }
    if report.degenerate {
        return Err(Failure::Numerical(
            "observations are constant, parameters are not identifiable; guess written".into(),
        ));
    }
    if !report.converged {
        return Err(Failure::Numerical(format!(
            "fit did not converge within {} iterations; best parameters written",
            a.max_iters
        )));
    }
    Ok(())
}

fn simulate_cmd(a: &SimulateArgs) -> Result<(), Failure> {
    let fixture = load_fixture(a.fixture.as_deref())?;
    SubstrateMix::new(a.oil_pct)?;
    let mut params = fixture.params;
    let mut y0 = fixture.initial.state_for_mix(a.oil_pct);
    if a.perturb {
        let cfg = PerturbationConfig {
            seed: a.seed,
            ..PerturbationConfig::default()
        };
        let mut r = rng::seeded(a.seed);
        params = perturb(&params, &cfg, &mut r);
        let p = perturb_initial(
            &CultivationState {
                urea: y0.urea,
                biomass: y0.biomass,
                ..CultivationState::zero()
            },
            &cfg,
            &mut r,
        );
        y0.urea = p.urea;
        y0.biomass = p.biomass;
    }
    let traj = integrate(&y0, &params, a.horizon, a.interval, a.dt)?;
    create_dir(&a.out)?;
    write_with(&a.out.join("trajectory.csv"), |b| traj.write_csv(b))?;
    write_text(&a.out.join("params.txt"), &params.to_kv_string())?;
    let end = traj.last().expect("trajectory has the initial state");
    println!(
        "{} samples, final X_r {:.3} g/L, PHA {:.3} g/L, HHx {:.2} wt.%",
        traj.len(),
        end.biomass,
        end.pha(),
        end.hhx_wt_pct()
    );
    Ok(())
}

fn peak_table(path: Option<&Path>) -> Result<PeakTable, Failure> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?;
            Ok(PeakTable::from_toml(&text)?)
        }
        None => Ok(PeakTable::default_table()),
    }
}

fn similarity_csv(lib: &ComponentLibrary<f64>) -> String {
    let cos = lib.cosine_similarity();
    let mut out = format!("substance,{}\n", lib.names.join(","));
    for (i, name) in lib.names.iter().enumerate() {
        out.push_str(name);
        for v in cos.row(i) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct ExtractionSummary {
    dataset: String,
    samples: usize,
    channels: usize,
    residual: f64,
    relative_residual: f64,
}

fn components(a: &ComponentsArgs) -> Result<(), Failure> {
    let table = peak_table(a.peaks.as_deref())?;
    let lib: ComponentLibrary<f64> = generate_components(&table, a.seed)?;
    create_dir(&a.out)?;
    write_with(&a.out.join("components.csv"), |b| lib.write_csv(b))?;
    write_text(&a.out.join("similarity.csv"), &similarity_csv(&lib))?;
    println!("{} components on {} channels", lib.k(), lib.m());

    if let Some(dir) = &a.extract_from {
        let data = load_dataset(dir)?;
        let y = data.raw_labels();
        let ex = extract_components(data.x.view(), y.view())?;
        let names = decorr::spectra::SUBSTANCES[..y.ncols()]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let extracted = ComponentLibrary::new(data.grid, names, ex.h)?;
        write_with(&a.out.join("extracted.csv"), |b| extracted.write_csv(b))?;
        write_json(
            &a.out.join("extraction.json"),
            &ExtractionSummary {
                dataset: data.spec.name.clone(),
                samples: data.len(),
                channels: data.x.ncols(),
                residual: ex.residual,
                relative_residual: ex.relative_residual,
            },
        )?;
        println!(
            "extracted from {}: residual {:.4e} (relative {:.3e})",
            data.spec.name, ex.residual, ex.relative_residual
        );
    }
    Ok(())
}

fn default_library() -> Result<ComponentLibrary<f64>, Failure> {
    Ok(generate_components(&PeakTable::default_table(), 0)?)
}

fn normalize_with(d: &mut Dataset<f64>, record: &NormRecord) {
    d.y = record.normalize(d.y.view());
    d.norm = Some(record.clone());
}

fn gen_data(a: &GenDataArgs) -> Result<(), Failure> {
    let mut specs = experiment_specs(a.scale.experiment(), a.seed);
    for s in &mut specs {
        s.sigma = a.sigma;
    }
    let names: Vec<&str> = specs.iter().map(|s| s.name.as_str()).collect();
    if let Some(bad) = a.only.iter().find(|n| !names.contains(&n.as_str())) {
        return Err(Failure::Input(format!(
            "unknown dataset `{bad}`; expected one of {}",
            names.join(", ")
        )));
    }
    let selected = |name: &str| a.only.is_empty() || a.only.iter().any(|n| n == name);
    let library = default_library()?;
    let fixture = fixtures::nominal::<f64>();
    create_dir(&a.out)?;

    // The training set defines the label ranges of `no_corr` and the
    // normalization of every set, so it is built even when not written.
    let started = Instant::now();
    let mut train = Some(build_dataset(&specs[0], &fixture, &library, None)?);
    let record = NormRecord::from_labels(train.as_ref().expect("built").y.view(), "train")?;
    let mut ledger = Vec::new();
    for spec in &specs {
        if !selected(&spec.name) {
            continue;
        }
        let mut d = match (&spec.kind, spec.name.as_str()) {
            (_, "train") => train.take().expect("train written once"),
            (DatasetKind::Uniform { .. }, _) => build_dataset(spec, &fixture, &library, Some(&record.maxima))?,
            _ => build_dataset(spec, &fixture, &library, None)?,
        };
        normalize_with(&mut d, &record);
        write_dataset(&a.out.join(&spec.name), &d)?;
        log::info!("{}: {} samples ({:.1?})", spec.name, d.len(), started.elapsed());
        ledger.push((spec.name.clone(), d.len(), d.terminal_hhx_wt_pct()));
    }
    write_json(&a.out.join("norm.json"), &record)?;

    let mut text = String::from("dataset,samples,terminal_hhx_wt_pct\n");
    println!("{:<10}{:>9}{:>12}", "dataset", "samples", "HHx wt.%");
    for (name, n, hhx) in &ledger {
        let _ = writeln!(text, "{name},{n},{}", hhx.map(|h| h.to_string()).unwrap_or_default());
        let h = hhx.map(|h| format!("{h:.2}")).unwrap_or_else(|| "-".into());
        println!("{name:<10}{n:>9}{h:>12}");
    }
    write_text(&a.out.join("ledger.csv"), &text)?;
    Ok(())
}

fn augment_config(mode: AugmentMode, a: &AugmentArgs) -> AugmentConfig {
    AugmentConfig {
        mode,
        compensation: a.compensation,
        sigma: a.sigma,
        ..AugmentConfig::default()
    }
}

fn augment_stats(a: &AugmentStatsArgs) -> Result<(), Failure> {
    let data = load_dataset(&a.data)?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.augment.batch_size,
        augment: augment_config(a.mode, &a.augment),
        seed: a.augment.seed,
        ..TrainConfig::default()
    };
    let stats = augmentation_stats(&data, &cfg)?;
    create_dir(&a.out)?;
    write_stats(&a.out, &cfg, stats)
}

fn write_stats(dir: &Path, cfg: &TrainConfig, stats: AugmentStats) -> Result<(), Failure> {
    write_text(&dir.join("rejection_histogram.csv"), &stats.histogram_csv())?;
    let doc = AugmentStatsDocument::new(cfg.augment, cfg.batch_size, cfg.epochs, stats);
    println!(
        "{} batches, {} generated, {} rejected, mean rejection {:.3}, {} occupied bins",
        doc.stats.batches_processed,
        doc.stats.samples_generated,
        doc.stats.samples_rejected,
        doc.rejection_fraction,
        doc.stats.occupied_bins()
    );
    write_json(&dir.join("augment_stats.json"), &doc)
}

#[derive(Serialize)]
struct TrainingSummary<'a> {
    dataset: &'a str,
    config: &'a TrainConfig,
    loss_history: &'a [f64],
    stats: &'a AugmentStats,
    rejection_fraction: f64,
}

fn train_cmd(a: &TrainArgs) -> Result<(), Failure> {
    let data = load_dataset(&a.data)?;
    if data.norm.is_none() {
        return Err(Failure::Input(format!(
            "{}: labels are not normalized",
            a.data.display()
        )));
    }
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.augment.batch_size,
        learning_rate: a.learning_rate,
        l2: a.l2,
        augment: augment_config(a.mode, &a.augment),
        seed: a.augment.seed,
    };
    let out = train(&data, &cfg)?;
    create_dir(&a.out)?;
    write_json(&a.out.join("model.json"), &out.model)?;
    write_json(
        &a.out.join("training.json"),
        &TrainingSummary {
            dataset: &data.spec.name,
            config: &cfg,
            loss_history: &out.loss_history,
            stats: &out.stats,
            rejection_fraction: out.stats.rejection_fraction(),
        },
    )?;
    println!(
        "trained {} epochs on {} ({} samples), final loss {:.5}",
        cfg.epochs,
        data.spec.name,
        data.len(),
        out.loss_history.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

#[derive(Serialize)]
struct EvaluationRow {
    dataset: String,
    samples: usize,
    mse: f64,
}

fn evaluate_cmd(a: &EvaluateArgs) -> Result<(), Failure> {
    let model: LinearRegressor<f64> = read_json(&a.model)?;
    let mut rows = Vec::new();
    for dir in &a.data {
        let data = load_dataset(dir)?;
        let mse = evaluate(&model, &data).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))?;
        println!("{:<10}{mse:>10.5}", data.spec.name);
        rows.push(EvaluationRow {
            dataset: data.spec.name.clone(),
            samples: data.len(),
            mse,
        });
    }
    create_dir(&a.out)?;
    write_json(&a.out.join("evaluation.json"), &rows)
}

fn stage<T, E: Into<Failure>>(name: &str, r: Result<T, E>) -> Result<T, Failure> {
    r.map_err(|e| {
        let msg = match e.into() {
            Failure::Input(m) | Failure::Numerical(m) => m,
        };
        Failure::Input(format!("stage `{name}` failed: {msg}"))
    })
}

/// Spectra of two training cultivations (one per substrate when possible)
/// every 24 h, one column per sample.
fn sample_spectra(train: &Dataset<f64>) -> (String, String) {
    let per = train.spec.samples_per_cultivation();
    let first_oil = train.meta[0].oil_pct;
    let other = (0..train.len() / per)
        .find(|&c| train.meta[c * per].oil_pct != first_oil)
        .unwrap_or(1.min(train.len() / per - 1));
    let picks: Vec<usize> = [0, other]
        .iter()
        .flat_map(|&c| (0..per).filter(|i| i % 8 == 0).map(move |i| c * per + i))
        .collect();
    let raw = train.raw_labels();

    let mut spectra = String::from("wavenumber");
    let mut labels = String::from("sample,cultivation,oil_pct,time_h,");
    labels.push_str(&decorr::spectra::SUBSTANCES.join(","));
    labels.push('\n');
    for &i in &picks {
        let m = train.meta[i];
        let name = format!("c{}_t{}", m.cultivation.unwrap_or(0), m.time_h.unwrap_or(0.0));
        let _ = write!(spectra, ",{name}");
        let _ = write!(
            labels,
            "{name},{},{},{}",
            m.cultivation.unwrap_or(0),
            m.oil_pct.unwrap_or(f64::NAN),
            m.time_h.unwrap_or(f64::NAN)
        );
        for v in raw.row(i) {
            let _ = write!(labels, ",{v}");
        }
        labels.push('\n');
    }
    spectra.push('\n');
    for j in 0..train.x.ncols() {
        let _ = write!(spectra, "{}", train.grid.position(j));
        for &i in &picks {
            let _ = write!(spectra, ",{}", train.x[(i, j)]);
        }
        spectra.push('\n');
    }
    (spectra, labels)
}

fn reproduce(a: &ReproduceArgs) -> Result<(), Failure> {
    let mut config = ExperimentConfig::new(a.scale.experiment(), a.seed, a.epochs);
    config.train.batch_size = a.batch_size;
    config.train.augment.compensation = a.compensation;
    config.sigma = a.sigma;
    stage("config", config.train.validate())?;

    let started = Instant::now();
    let library = stage("components", generate_components::<f64>(&PeakTable::default_table(), 0))?;
    let fixture = fixtures::nominal::<f64>();
    stage("output", create_dir(&a.out))?;
    stage(
        "output",
        write_with(&a.out.join("components.csv"), |b| library.write_csv(b)),
    )?;

    let mut per_seed = Vec::new();
    let mut validation_sets = Vec::new();
    for (i, &seed) in config.seeds.iter().enumerate() {
        let data = stage(
            "datasets",
            build_experiment_data(config.scale, seed, config.sigma, &fixture, &library),
        )?;
        log::info!("seed {seed}: datasets built ({:.1?})", started.elapsed());
        if i == 0 {
            let (spectra, labels) = sample_spectra(&data.train);
            stage("output", write_text(&a.out.join("sample_spectra.csv"), &spectra))?;
            stage("output", write_text(&a.out.join("sample_labels.csv"), &labels))?;
        }
        validation_sets = data.validation.iter().map(|d| d.spec.name.clone()).collect();
        per_seed.push(stage("training", run_seed(&data, &config, seed))?);
        log::info!("seed {seed}: trained ({:.1?})", started.elapsed());
    }
    let report = summarize(per_seed, validation_sets, config.clone());

    let filter_row = TrainingSetup::ALL
        .iter()
        .position(|&s| s == TrainingSetup::CultivationDecorrelateFilter)
        .expect("setup listed");
    let mut stats = AugmentStats::default();
    for g in &report.per_seed {
        stats.merge(&g.stats[filter_row]);
    }
    let mut filter_cfg = config.train;
    filter_cfg.augment.mode = AugmentMode::DecorrelateFilter;
    filter_cfg.augment.sigma = config.sigma;

    let table = report.to_table();
    stage("report", write_json(&a.out.join("report.json"), &report))?;
    stage("report", write_text(&a.out.join("table.txt"), &table))?;
    stage("report", write_stats(&a.out, &filter_cfg, stats))?;
    print!("{table}");
    let mean = |s| report.row_mean(s).unwrap_or(f64::NAN);
    let ordered = mean(TrainingSetup::NoCorrelation) < mean(TrainingSetup::CultivationDecorrelateFilter)
        && mean(TrainingSetup::CultivationDecorrelateFilter) < mean(TrainingSetup::Cultivation)
        && mean(TrainingSetup::Cultivation) < mean(TrainingSetup::CultivationDecorrelate);
    println!("row-mean ordering no_corr < filter < plain < decorrelate: {ordered}");
    log::info!("reproduce finished in {:.1?}", started.elapsed());
    Ok(())
}
