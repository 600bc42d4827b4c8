//! `rtg` — run explorations, evaluate maps, render views and benchmark
//! collision checking.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand};
use nalgebra::Vector3;
use rtg_core::eval::{bench_csv, bench_planner, evaluate, sample_test_poses};
use rtg_core::info_gain::VariantKind;
use rtg_core::sim::{run, truncate_range, ExplorationConfig, Scene};
use rtg_core::snapshot;
use rtg_core::splat::{render, CameraIntrinsics, Frame, Pose};

#[derive(Parser)]
#[command(name = "rtg", version, about = "Gaussian-splat active mapping simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a closed-loop exploration and write the map and logs to a directory.
    Explore {
        /// Scene file (JSON): generator parameters or an explicit Gaussian list.
        #[arg(long)]
        scene: PathBuf,
        /// Run configuration (JSON); omitted fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Override the step budget.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// standard | sum | squared
        #[arg(long)]
        variant: Option<VariantKind>,
        /// Depth noise standard deviation, metres.
        #[arg(long)]
        depth_noise: Option<f64>,
    },
    /// Evaluate a map snapshot on held-out poses sampled from the scene.
    Eval {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 100)]
        poses: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run configuration supplying camera and robot parameters.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Report path (JSON); per-pose rows go next to it as CSV.
        #[arg(long, default_value = "metrics.json")]
        out: PathBuf,
    },
    /// Serial vs data-parallel collision checking and planning time per map size.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = vec![100_000usize, 1_000_000])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 129)]
        points: usize,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "bench.csv")]
        out: PathBuf,
    },
    /// Render a map snapshot from a camera pose to PNG.
    Render {
        #[arg(long)]
        map: PathBuf,
        /// Camera-to-world pose "x,y,z,qw,qx,qy,qz" (camera x right, y down, z forward).
        #[arg(long, allow_hyphen_values = true)]
        pose: String,
        #[arg(long)]
        out: PathBuf,
        /// Optional depth image (16-bit PNG, millimetres; 0 = invalid).
        #[arg(long)]
        depth_out: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
        #[arg(long, default_value_t = 90.0)]
        hfov_deg: f64,
        #[arg(long, default_value_t = 5.0)]
        max_range: f64,
    },
}

/// Failure classes mapped to exit codes.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

trait Classify<T> {
    fn config(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn config(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Config(e.into()))
    }
    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn load_scene(path: &Path) -> anyhow::Result<Scene> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading scene {}", path.display()))?;
    Scene::from_json(&text).with_context(|| format!("parsing scene {}", path.display()))
}

fn load_config(path: Option<&Path>) -> anyhow::Result<ExplorationConfig> {
    let Some(path) = path else {
        return Ok(ExplorationConfig::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

fn parse_pose(s: &str) -> anyhow::Result<Pose> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("pose {s:?} is not a list of numbers"))?;
    if v.len() != 7 {
        bail!("pose needs 7 values x,y,z,qw,qx,qy,qz, got {}", v.len());
    }
    Ok(Pose::from_quaternion(Vector3::new(v[0], v[1], v[2]), v[3], v[4], v[5], v[6])?)
}

fn write_png(frame: &Frame, path: &Path) -> anyhow::Result<()> {
    let mut img = image::RgbImage::new(frame.width as u32, frame.height as u32);
    for (i, px) in img.pixels_mut().enumerate() {
        let c = frame.color[i];
        *px = image::Rgb(c.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    }
    img.save(path).with_context(|| format!("writing {}", path.display()))
}

fn write_depth_png(frame: &Frame, path: &Path) -> anyhow::Result<()> {
    let mut img = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::new(frame.width as u32, frame.height as u32);
    for (i, px) in img.pixels_mut().enumerate() {
        let d = frame.depth[i];
        let mm = if d > 0.0 { (d * 1000.0).round().min(u16::MAX as f64) as u16 } else { 0 };
        *px = image::Luma([mm]);
    }
    img.save(path).with_context(|| format!("writing {}", path.display()))
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Explore {
            scene,
            config,
            out,
            steps,
            seed,
            variant,
            depth_noise,
        } => {
            let scene = load_scene(&scene).config()?;
            let mut cfg = load_config(config.as_deref()).config()?;
            if let Some(s) = steps {
                cfg.budget_steps = s;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(v) = variant {
                cfg.variant = v;
            }
            if let Some(n) = depth_noise {
                cfg.depth_noise_sigma = n;
            }
            cfg.validate().config()?;
            log::info!("exploring for up to {} steps (variant {:?}, seed {})", cfg.budget_steps, cfg.variant, cfg.seed);
            let art = run(scene, cfg, Some(&out)).runtime()?;
            std::fs::write(out.join("config.json"), serde_json::to_string_pretty(&cfg).expect("config serialises"))
                .runtime()?;
            log::info!(
                "stopped after {} steps ({:?}); {} Gaussians; outputs in {}",
                art.world.step_index,
                art.stop,
                art.world.map.len(),
                out.display()
            );
        }
        Command::Eval {
            map,
            scene,
            poses,
            seed,
            config,
            out,
        } => {
            let scene = load_scene(&scene).config()?;
            let cfg = load_config(config.as_deref()).config()?;
            let (map, _) = snapshot::load(&map).config()?;
            let sensor = cfg.sensor().config()?;
            let test = sample_test_poses(&scene, poses, seed, &cfg.planner).runtime()?;
            let report = evaluate(&map, &scene, &test, &sensor, cfg.planner.robot_height).runtime()?;
            std::fs::write(&out, serde_json::to_string_pretty(&report).expect("report serialises")).runtime()?;
            std::fs::write(out.with_extension("csv"), report.per_pose_csv().runtime()?).runtime()?;
            println!(
                "poses={} psnr_db={:.3} ssim={:.4} depth_rmse_m={}",
                report.pose_count,
                report.psnr_db,
                report.ssim,
                report.depth_rmse_m.map_or("n/a".to_string(), |v| format!("{v:.4}"))
            );
        }
        Command::Bench {
            sizes,
            points,
            repeats,
            seed,
            out,
        } => {
            if sizes.is_empty() || points == 0 {
                return Err(Failure::Config(anyhow!("need at least one size and one point")));
            }
            let rows = bench_planner(&sizes, points, repeats, seed).config()?;
            let text = bench_csv(&rows).runtime()?;
            std::fs::write(&out, &text).runtime()?;
            print!("{text}");
        }
        Command::Render {
            map,
            pose,
            out,
            depth_out,
            width,
            height,
            hfov_deg,
            max_range,
        } => {
            let pose = parse_pose(&pose).config()?;
            let intr = CameraIntrinsics::from_hfov(width, height, hfov_deg.to_radians(), max_range).config()?;
            let (map, _) = snapshot::load(&map).config()?;
            // Same post-processing as the simulated sensor.
            let mut frame = render(&map, &pose, &intr);
            frame.mask_background();
            truncate_range(&mut frame, max_range);
            write_png(&frame, &out).runtime()?;
            if let Some(p) = depth_out {
                write_depth_png(&frame, &p).runtime()?;
            }
        }
    }
    Ok(())
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("RTG_THREADS") {
        let n: usize = v.trim().parse().with_context(|| format!("RTG_THREADS={v:?} is not a count"))?;
        if n > 0 {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
