use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use firecast_core::dataset::{
    generate_dataset, read_dataset, render_rgb, sim_seed, write_dataset, Dataset,
};
use firecast_core::models::{Model, ModelSpec, Variant};
use firecast_core::sim::{run, RunSummary, SimParams, SimState};
use firecast_core::train::{
    self, check_compatible, cost_report, evaluate_windows, loss_csv, windows_csv, ModelScorer,
    OracleScorer, Scorer, WindowMetrics,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::error::CliError;

const TRAJECTORY_MAGIC: &[u8; 4] = b"FCTR";
const TRAJECTORY_VERSION: u32 = 1;

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(CliError::io(path))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(CliError::io(path))
}

/// Raw trajectory: magic, version, width, height and frame count as
/// little-endian `u32`, then one state code per cell per frame.
fn write_trajectory(path: &Path, traj: &[SimState]) -> Result<(), CliError> {
    let first = &traj[0].states;
    let mut w = BufWriter::new(File::create(path).map_err(CliError::io(path))?);
    let mut bytes = Vec::with_capacity(20 + traj.len() * first.as_slice().len());
    bytes.extend_from_slice(TRAJECTORY_MAGIC);
    for v in [
        TRAJECTORY_VERSION,
        first.width() as u32,
        first.height() as u32,
        traj.len() as u32,
    ] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    for s in traj {
        bytes.extend(s.states.iter().map(|c| c.code()));
    }
    w.write_all(&bytes)
        .and_then(|_| w.flush())
        .map_err(CliError::io(path))
}

fn export_frames(dir: &Path, traj: &[SimState], cfg: &RunConfig) -> Result<(), CliError> {
    create_dir(dir)?;
    for s in traj {
        let path = dir.join(format!("step_{:04}.ppm", s.step_index));
        let file = File::create(&path).map_err(CliError::io(&path))?;
        let mut w = BufWriter::new(file);
        render_rgb(&s.states, &cfg.dataset.palette)
            .write_ppm(&mut w)
            .and_then(|_| w.flush())
            .map_err(CliError::io(&path))?;
    }
    Ok(())
}

pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.sim.validate()?;
    let out = &cfg.paths.out;
    let traj_dir = out.join("trajectories");
    create_dir(&traj_dir)?;
    cfg.write_snapshot(out)?;

    let mut csv = String::from("sim_id,rng_seed,steps,extinguished,trees,burned,burned_fraction\n");
    let (mut steps, mut burned) = (0.0, 0.0);
    for id in 0..cfg.simulate.sims as u64 {
        let params = SimParams {
            rng_seed: sim_seed(cfg.sim.rng_seed, id),
            ..cfg.sim.clone()
        };
        let traj = run(&params)?;
        let s = RunSummary::of(&traj);
        let _ = writeln!(
            csv,
            "{id},{},{},{},{},{},{:.6}",
            params.rng_seed, s.steps, s.extinguished, s.trees, s.burned, s.burned_fraction
        );
        steps += s.steps as f64;
        burned += s.burned_fraction;
        write_trajectory(&traj_dir.join(format!("sim_{id:04}.fctr")), &traj)?;
        if cfg.simulate.export_frames {
            export_frames(&out.join("frames").join(format!("sim_{id:04}")), &traj, cfg)?;
        }
    }
    write_file(&out.join("summary.csv"), &csv)?;
    let n = cfg.simulate.sims.max(1) as f64;
    let summary = format!(
        "sims = {}\ndensity = {}\nmean_steps = {:.3}\nmean_burned_fraction = {:.6}\n",
        cfg.simulate.sims,
        cfg.sim.density,
        steps / n,
        burned / n
    );
    write_file(&out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

pub fn dataset(cfg: &RunConfig) -> Result<(), CliError> {
    let dc = cfg.dataset_config();
    dc.validate()?;
    let sets = generate_dataset(&dc, cfg.threads)?;
    let out = &cfg.paths.out;
    write_dataset(&sets.train, &out.join("train"))?;
    write_dataset(&sets.test, &out.join("test"))?;
    cfg.write_snapshot(out)?;
    println!(
        "train: {} sims, {} chunks\ntest: {} sims, {} chunks",
        sets.train.manifest.sims.len(),
        sets.train.len(),
        sets.test.manifest.sims.len(),
        sets.test.len()
    );
    Ok(())
}

fn load_split(dir: &Path) -> Result<Dataset, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Io {
            path: dir.to_path_buf(),
            source: std::io::ErrorKind::NotFound.into(),
        });
    }
    Ok(read_dataset(dir)?)
}

fn data_root(cfg: &RunConfig) -> Result<&Path, CliError> {
    cfg.paths
        .data
        .as_deref()
        .ok_or_else(|| CliError::Config("no dataset given (--data or paths.data)".into()))
}

fn checkpoint_name(variant: Variant, data: &Dataset, cfg: &RunConfig) -> PathBuf {
    let aoi = cfg
        .train
        .aoi_for(data.manifest.width(), data.manifest.height());
    PathBuf::from(format!(
        "{}_d{}_x{}_y{}_s{}.fckp",
        variant,
        data.manifest.density(),
        aoi.x,
        aoi.y,
        cfg.train.seed
    ))
}

pub fn train(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.train.validate()?;
    let root = data_root(cfg)?;
    let train_set = load_split(&root.join("train"))?;
    let test_dir = root.join("test");
    let test_set = if test_dir.exists() {
        Some(load_split(&test_dir)?)
    } else {
        None
    };
    let spec = cfg
        .model
        .spec(train_set.manifest.width(), train_set.manifest.height())?;
    let mut model = Model::<f32>::new(spec, &mut ChaCha8Rng::seed_from_u64(cfg.train.seed))?;
    let report = train::train(&mut model, &train_set, test_set.as_ref(), &cfg.train)?;

    let out = &cfg.paths.out;
    create_dir(out)?;
    cfg.write_snapshot(out)?;
    let ckpt = out.join(checkpoint_name(cfg.model.variant, &train_set, cfg));
    model.save(&ckpt)?;
    write_file(&out.join("loss.csv"), loss_csv(&report.epochs))?;
    let last = report.epochs.last();
    let mut summary = format!(
        "variant = {}\naoi = {}\nseed = {}\nepochs = {}\nupdates = {}\ncheckpoint = {}\n",
        cfg.model.variant,
        report.aoi,
        report.seed,
        report.epochs.len(),
        report.updates,
        ckpt.display()
    );
    if let Some(e) = last {
        let _ = writeln!(summary, "final_train_loss = {:.8}", e.train_loss);
        if let Some(t) = e.test_loss {
            let _ = writeln!(summary, "final_test_loss = {t:.8}");
        }
    }
    write_file(&out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn window_summary(windows: &[WindowMetrics]) -> String {
    let mut s = String::new();
    for w in windows {
        let auc = w
            .auc()
            .map_or("undefined".to_string(), |a| format!("{a:.6}"));
        let _ = writeln!(
            s,
            "t{}: samples = {}, positives = {}, auc = {auc}, f1 = {:.6}",
            w.label_step, w.samples, w.positives, w.f1
        );
    }
    s
}

pub fn eval(cfg: &RunConfig) -> Result<(), CliError> {
    let root = data_root(cfg)?;
    let split = cfg.eval.split.as_deref().unwrap_or("test");
    if split != "test" && split != "train" {
        return Err(CliError::Config(format!(
            "unknown split `{split}` (train, test)"
        )));
    }
    let data = load_split(&root.join(split))?;
    let aoi = cfg
        .train
        .aoi_for(data.manifest.width(), data.manifest.height());
    let model;
    let mut scorer: Box<dyn Scorer> = if cfg.eval.oracle {
        Box::new(OracleScorer {
            aoi,
            label_mode: cfg.train.label_mode,
        })
    } else {
        let path = cfg.eval.checkpoint.as_deref().ok_or_else(|| {
            CliError::Config(
                "no checkpoint given (--checkpoint, eval.checkpoint or --oracle)".into(),
            )
        })?;
        model = Model::<f32>::load(path)?;
        check_compatible(&model, &data)?;
        Box::new(ModelScorer {
            model: &model,
            aoi,
            batch_size: cfg.train.batch_size.max(8),
            threads: cfg.threads,
        })
    };
    let windows = evaluate_windows(scorer.as_mut(), &data, aoi, cfg.train.label_mode)?;

    let out = &cfg.paths.out;
    create_dir(out)?;
    cfg.write_snapshot(out)?;
    write_file(&out.join("windows.csv"), windows_csv(&windows))?;
    let summary = format!("aoi = {aoi}\nsplit = {split}\n{}", window_summary(&windows));
    write_file(&out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

pub fn cost(cfg: &RunConfig) -> Result<(), CliError> {
    let specs = Variant::ALL
        .iter()
        .map(|&v| {
            ModelSpec::named(&cfg.model.profile, v).ok_or_else(|| {
                CliError::Config(format!("unknown model profile `{}`", cfg.model.profile))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let report = cost_report(&specs)?;
    let out = &cfg.paths.out;
    create_dir(out)?;
    cfg.write_snapshot(out)?;
    write_file(&out.join("cost.csv"), report.to_csv())?;
    let text = report.to_text();
    write_file(&out.join("cost.txt"), &text)?;
    print!("{text}");
    Ok(())
}
