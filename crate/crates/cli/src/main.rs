//! `plantrack`: generate scenes, render sequences, track, evaluate and run
//! ablation studies. Every subcommand reads one JSON config with a single
//! top-level seed; logs go to stderr, results to files.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use plantrack::detector::assign_latents;
use plantrack::harness::{
    annotations, build_scene, build_sequence, detect_frame, embedding_for, locate_detections, perturb_pose,
    run_ablation, track_frames, viewpoint_pool, write_report, Arm, PreparedFrame, Study, StudyResult,
    TrialConfig, TrialSeeds,
};
use plantrack::io::{count_frames, load_frame, read_json, save_frame, write_json, DetectionFile, TrackFile};
use plantrack::metrics::{evaluate, MetricsReport};
use plantrack::render::render_frame_with;
use plantrack::rng::derive_seed;
use plantrack::scene::PlantScene;
use plantrack::{Error, Result};

#[derive(Parser)]
#[command(name = "plantrack", version, about)]
struct Cli {
    /// JSON config: `{"seed": .., "trial": {..}, "study": {..}}`.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the scene of the configured trial as JSON.
    Generate {
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Render the configured viewpoint sequence into a frame directory.
    Render {
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Track a rendered sequence, with simulated or supplied detections.
    Track {
        #[arg(long)]
        frames: PathBuf,
        /// Detections per frame; simulated from the config when absent.
        #[arg(long)]
        detections: Option<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Score tracks against the ground truth stored with the frames.
    Eval {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        tracks: PathBuf,
        /// Metrics JSON; a one-row CSV is written next to it.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Run the configured ablation study.
    Ablate {
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Write CSV tables and SVG plots from ablation results.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Config {
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    trial: TrialConfig,
    #[serde(default)]
    study: Option<StudySection>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StudySection {
    #[serde(default = "default_repetitions")]
    repetitions: usize,
    baseline: String,
    arms: Vec<Arm>,
}

fn default_repetitions() -> usize {
    5
}

/// Sequence metadata written by `render`.
#[derive(Debug, Serialize, Deserialize)]
struct SequenceFile {
    seed: u64,
    sequence: Vec<usize>,
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    let cfg: Config = match path {
        Some(p) => read_json(p)?,
        None => Config::default(),
    };
    cfg.trial.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn generate(cfg: &Config, out: &Path) -> Result<()> {
    let scene = build_scene(&cfg.trial, TrialSeeds::new(cfg.seed).scene)?;
    info!("scene: {} tomatoes, {} primitives", scene.tomato_count(), scene.all_primitives().count());
    write_json(out, &scene)
}

fn render(cfg: &Config, out: &Path) -> Result<()> {
    let t = &cfg.trial;
    let seeds = TrialSeeds::new(cfg.seed);
    let scene = build_scene(t, seeds.scene)?;
    let pool = viewpoint_pool(&scene, &t.sampler, t.viewpoint_pool_size, seeds.viewpoints)?;
    let sequence = build_sequence(&pool, &t.sequence_spec(seeds.sequence))?;
    create_dir(out)?;
    write_json(&out.join("scene.json"), &scene)?;
    write_json(&out.join("sequence.json"), &SequenceFile { seed: cfg.seed, sequence: sequence.clone() })?;
    sequence.par_iter().enumerate().try_for_each(|(k, &i)| {
        let mut frame = render_frame_with(&scene, &pool[i], &t.intrinsics, t.min_visibility)?;
        frame.camera_pose = perturb_pose(&pool[i], &t.pose_noise, derive_seed(seeds.pose_noise, &[i as u64]))?;
        save_frame(out, k, i, &frame)
    })?;
    info!("rendered {} frames into {}", sequence.len(), out.display());
    Ok(())
}

fn track(cfg: &Config, frames_dir: &Path, detections: Option<&Path>, out: &Path) -> Result<()> {
    let t = &cfg.trial;
    let n = count_frames(frames_dir);
    if n == 0 {
        return Err(Error::InvalidInput(format!("no frames in {}", frames_dir.display())));
    }
    let supplied = detections.map(read_json::<DetectionFile>).transpose()?;
    if let Some(d) = &supplied {
        if d.frames.len() != n {
            return Err(Error::InvalidInput(format!(
                "{} frames of detections for {n} rendered frames",
                d.frames.len()
            )));
        }
    }
    let seeds = TrialSeeds::new(cfg.seed);
    let scene: PlantScene = read_json(&frames_dir.join("scene.json"))?;
    let latents = assign_latents(&scene, t.detector.feature_dim, seeds.latents)?;
    let embedding = embedding_for(t)?;
    let frames = (0..n)
        .into_par_iter()
        .map(|k| {
            let (meta, frame) = load_frame(frames_dir, k)?;
            match &supplied {
                Some(d) => {
                    let mut dets = d.frames[k].clone();
                    locate_detections(&mut dets, &frame, t.association.mad_k);
                    Ok(PreparedFrame {
                        viewpoint: meta.viewpoint,
                        camera_pose: frame.camera_pose,
                        gt: frame.gt,
                        detections: dets,
                    })
                }
                None => detect_frame(frame, meta.viewpoint, t, &latents, embedding.as_ref(), &seeds),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let (tracker, records) = track_frames(&frames, &t.association, &t.kalman)?;
    info!("{} tracklets over {n} frames", tracker.tracklets().len());
    write_json(
        out,
        &TrackFile {
            sequence: frames.iter().map(|f| f.viewpoint).collect(),
            records,
        },
    )
}

fn eval(cfg: &Config, frames_dir: &Path, tracks: &Path, out: &Path) -> Result<()> {
    let n = count_frames(frames_dir);
    let gt = (0..n)
        .map(|k| plantrack::io::load_frame_meta(frames_dir, k).map(|m| m.gt))
        .collect::<Result<Vec<_>>>()?;
    let tracks: TrackFile = read_json(tracks)?;
    if let Some(r) = tracks.records.iter().find(|r| r.frame >= n) {
        return Err(Error::InvalidInput(format!("track record for frame {} but only {n} frames", r.frame)));
    }
    let seen: BTreeSet<u32> = gt.iter().flatten().map(|g| g.object_id).collect();
    let report = evaluate(&annotations(&gt, &tracks.records), &cfg.trial.metrics)?;
    info!("HOTA {:.2} over {n} frames, {} annotated tomatoes", report.hota, seen.len());
    write_json(out, &report)?;
    let csv = out.with_extension("csv");
    std::fs::write(&csv, format!("{}\n{}\n", MetricsReport::CSV_HEADER, report.csv_row()))
        .map_err(|source| Error::Io { path: csv, source })
}

fn ablate(cfg: Config, out: &Path) -> Result<()> {
    let section = cfg
        .study
        .ok_or_else(|| Error::InvalidConfig("config has no \"study\" section".into()))?;
    let study = Study {
        seed: cfg.seed,
        repetitions: section.repetitions,
        baseline: section.baseline,
        base: cfg.trial,
        arms: section.arms,
    };
    let result = run_ablation(&study)?;
    for arm in &result.arms {
        let hota = &arm.metrics["hota"];
        info!("{:24} HOTA {:6.2} (delta {:+.2}, p {:?})", arm.label, hota.mean, hota.delta, hota.p_value);
    }
    write_json(out, &result)
}

fn report(results: &Path, out: &Path) -> Result<()> {
    let result: StudyResult = read_json(results)?;
    create_dir(out)?;
    for p in write_report(&result, out)? {
        info!("wrote {}", p.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Generate { out } => generate(&cfg, &out),
        Command::Render { out } => render(&cfg, &out),
        Command::Track { frames, detections, out } => track(&cfg, &frames, detections.as_deref(), &out),
        Command::Eval { frames, tracks, out } => eval(&cfg, &frames, &tracks, &out),
        Command::Ablate { out } => ablate(cfg, &out),
        Command::Report { results, out } => report(&results, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::FAILURE
        }
    }
}
