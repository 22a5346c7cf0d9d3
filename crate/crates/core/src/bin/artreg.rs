use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use artreg::articulation::{detect, PartTracks};
use artreg::bench::{builtin_suite, run_benchmark, BenchObject};
use artreg::cloud::{load_ply, save_ply, PointCloud};
use artreg::config::RunConfig;
use artreg::controller::{ground_truth_errors, pull_to_goal, push_to_goal, BodyPoint, GoalSpec};
use artreg::error::BestSoFar;
use artreg::liegroup::{Pose, PoseRecord};
use artreg::mukf::{FilterConfig, MultiTracker};
use artreg::segmentation::segment_scene;
use artreg::sim::{
    builtin_config, build_scene, default_camera, random_walk, CameraSpec, Environment, KinematicScene, SceneConfig, SimEnvironment, TrajectoryFrame, BUILTIN_SCENES,
};
use artreg::{Error, Result};

#[derive(Parser)]
#[command(name = "artreg", version, about = "Point-cloud pose tracking, articulation detection and goal-driven pushing")]
struct Cli {
    /// Seed for every random draw; overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (directory for simgen). Reports go to stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track objects through a frame sequence or a simulated trajectory.
    Track {
        /// Directory of frame_*.ply files with init.json, a scene JSON, or a builtin scene name.
        #[arg(long)]
        scene: Option<String>,
        /// Object model PLYs in their body frames, one per tracked object.
        #[arg(long, value_delimiter = ',')]
        objects: Vec<PathBuf>,
        /// Number of simulated steps (scene descriptions only).
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Interactively detect the joint type of a two-part object.
    Detect {
        #[arg(long)]
        scene: Option<String>,
    },
    /// Push or pull parts of a scene to a goal.
    Push {
        #[arg(long)]
        scene: Option<String>,
        /// Goal JSON: {"action":"push","parts":{"name":[x,y,yaw]}} or {"action":"pull","joint":0,"value":v}.
        #[arg(long)]
        goal: Option<PathBuf>,
        /// Also write the trajectory as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run the ADI benchmark.
    Bench {
        /// Subset of the builtin suite.
        #[arg(long, value_delimiter = ',')]
        objects: Vec<String>,
        #[arg(long)]
        trials: Option<usize>,
        /// Also write one CSV row per link and trial.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Write a builtin scene as scene JSON plus part PLYs.
    Simgen {
        name: String,
        /// Also simulate a trajectory and write frames, init.json and truth.json.
        #[arg(long)]
        frames: Option<usize>,
    },
}

/// A failure with its exit code: 2 for bad input, 1 for runtime failures.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config { .. } | Error::UnknownScene(_) | Error::Parse { .. } | Error::UnsupportedProperty(_) => 2,
            _ => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> std::result::Result<(), Failure> {
    let config = match (&cli.config, cli.seed) {
        (Some(path), seed) => {
            if !path.exists() {
                return Err(usage(format!("config file not found: {}", path.display())));
            }
            let mut cfg = RunConfig::load(path)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg
        }
        (None, Some(seed)) => RunConfig::with_seed(seed),
        (None, None) => return Err(usage("a seed is required: pass --seed or a --config with `seed`")),
    };
    let ctx = Ctx { cli, config };
    match &cli.command {
        Command::Track { scene, objects, frames } => ctx.track(scene.as_deref(), objects, *frames),
        Command::Detect { scene } => ctx.detect(scene.as_deref()),
        Command::Push { scene, goal, csv } => ctx.push(scene.as_deref(), goal.as_deref(), csv.as_deref()),
        Command::Bench { objects, trials, csv } => ctx.bench(objects, *trials, csv.as_deref()),
        Command::Simgen { name, frames } => ctx.simgen(name, *frames),
    }
}

struct Ctx<'a> {
    cli: &'a Cli,
    config: RunConfig,
}

#[derive(Serialize)]
struct TrackFrame {
    frame: usize,
    poses: Vec<PoseRecord>,
}

#[derive(Serialize)]
struct TrackErrors {
    /// Mean distance between tracked and true model centroids, per object.
    per_object: Vec<f64>,
    mean: f64,
}

#[derive(Serialize)]
struct TrackReport {
    seed: u64,
    objects: Vec<String>,
    frames: Vec<TrackFrame>,
    #[serde(skip_serializing_if = "Option::is_none")]
    errors: Option<TrackErrors>,
}

#[derive(Serialize, Deserialize)]
struct InitFile {
    poses: Vec<PoseRecord>,
}

#[derive(Serialize, Deserialize)]
struct TruthFile {
    frames: Vec<Vec<PoseRecord>>,
}

#[derive(Deserialize)]
#[serde(tag = "action", rename_all = "lowercase", deny_unknown_fields)]
enum GoalFile {
    Push {
        parts: BTreeMap<String, [f64; 3]>,
        #[serde(default)]
        tolerance: Option<f64>,
    },
    Pull {
        joint: usize,
        value: f64,
        #[serde(default)]
        tolerance: Option<f64>,
    },
}

#[derive(Serialize)]
struct ControlOutput<R: Serialize> {
    action: &'static str,
    success: bool,
    /// Final distance of each tracked part's body point from its goal,
    /// measured on the simulated scene.
    ground_truth_errors: Vec<f64>,
    report: R,
}

impl Ctx<'_> {
    fn log(&self, msg: impl AsRef<str>) {
        if self.cli.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn emit(&self, text: &str) -> std::result::Result<(), Failure> {
        match &self.cli.out {
            Some(path) => write_file(path, text),
            None => {
                let mut out = std::io::stdout().lock();
                match writeln!(out, "{text}") {
                    // a closed pipe (`artreg ... | head`) is not a failure
                    Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::io(Path::new("<stdout>"), e).into()),
                    _ => Ok(()),
                }
            }
        }
    }

    fn scene_arg(&self, scene: Option<&str>) -> std::result::Result<String, Failure> {
        scene
            .map(str::to_string)
            .or_else(|| self.config.paths.scene.as_ref().map(|p| p.display().to_string()))
            .ok_or_else(|| usage("no scene given: pass --scene or set paths.scene"))
    }

    /// A builtin name or a scene JSON file, with run-config overrides applied.
    fn load_scene(&self, arg: &str) -> std::result::Result<(KinematicScene, SceneConfig), Failure> {
        let path = Path::new(arg);
        let (cfg, base) = if path.is_file() {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let cfg: SceneConfig = serde_json::from_str(&text).map_err(|e| Error::Config {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            (cfg, path.parent().map(Path::to_path_buf))
        } else if BUILTIN_SCENES.contains(&arg) {
            (builtin_config(arg)?, None)
        } else {
            return Err(usage(format!("scene not found: {arg} (not a file or builtin scene)")));
        };
        let mut scene = build_scene(&cfg, base.as_deref())?;
        if let Some(k) = self.config.sim.kappa_com {
            scene.kappa_com = k;
        }
        Ok((scene, cfg))
    }

    fn environment(&self, scene: KinematicScene, cfg: &SceneConfig) -> SimEnvironment {
        let camera = match &cfg.camera {
            Some(spec) => spec.to_camera(self.config.seed),
            None => default_camera().with_noise(0.0, 0.0, self.config.seed),
        };
        let noise = self.config.sim.noise_sigma.unwrap_or(camera.noise_sigma);
        let dropout = self.config.sim.dropout.unwrap_or(camera.dropout_prob);
        SimEnvironment::new(scene, camera.with_noise(noise, dropout, self.config.seed))
    }

    fn track(&self, scene: Option<&str>, objects: &[PathBuf], frames: Option<usize>) -> std::result::Result<(), Failure> {
        let arg = self.scene_arg(scene)?;
        let objects = if objects.is_empty() { &self.config.paths.objects[..] } else { objects };
        for p in objects {
            if !p.exists() {
                return Err(usage(format!("object model not found: {}", p.display())));
            }
        }
        let load_models = || -> Result<Vec<PointCloud>> { objects.iter().map(load_ply).collect() };

        let (names, models, init, clouds, truth) = if Path::new(&arg).is_dir() {
            let dir = Path::new(&arg);
            let (names, models) = if !objects.is_empty() {
                (object_names(objects), load_models()?)
            } else if dir.join("scene.json").is_file() {
                let (scene, _) = self.load_scene(&dir.join("scene.json").display().to_string())?;
                (scene.parts.iter().map(|p| p.name.clone()).collect(), scene.parts.iter().map(|p| p.cloud.clone()).collect())
            } else {
                return Err(usage("no object models: pass --objects or put scene.json in the sequence directory"));
            };
            let init_path = dir.join("init.json");
            if !init_path.is_file() {
                return Err(usage(format!("initial poses not found: {}", init_path.display())));
            }
            let init: InitFile = read_json(&init_path)?;
            let init: Vec<Pose> = init.poses.iter().map(Pose::from).collect();
            let clouds = frame_files(dir)?.iter().map(load_ply).collect::<Result<Vec<_>>>()?;
            let truth = match dir.join("truth.json") {
                p if p.is_file() => {
                    let t: TruthFile = read_json(&p)?;
                    Some(t.frames.iter().map(|f| f.iter().map(Pose::from).collect::<Vec<_>>()).collect::<Vec<_>>())
                }
                _ => None,
            };
            (names, models, init, clouds, truth)
        } else {
            let (mut scene, cfg) = self.load_scene(&arg)?;
            let steps = frames.unwrap_or(self.config.track.frames);
            let trajectory = random_walk(&mut scene, steps, &self.config.track.walk, self.config.seed)?;
            let (names, models) = if objects.is_empty() {
                (scene.parts.iter().map(|p| p.name.clone()).collect(), scene.parts.iter().map(|p| p.cloud.clone()).collect())
            } else {
                (object_names(objects), load_models()?)
            };
            let mut env = self.environment(scene, &cfg);
            let mut clouds = Vec::new();
            for f in &trajectory {
                f.apply(&mut env.scene)?;
                clouds.push(env.observe()?);
            }
            let truth: Vec<Vec<Pose>> = trajectory.iter().map(|f| f.poses.clone()).collect();
            (names, models, truth[0].clone(), clouds, Some(truth))
        };
        if init.len() != models.len() {
            return Err(usage(format!("{} initial poses for {} object models", init.len(), models.len())));
        }
        if let Some(t) = &truth {
            if t.len() != clouds.len() || t.iter().any(|f| f.len() != models.len()) {
                return Err(usage("ground truth does not match the frames and objects"));
            }
        }

        let centroids = models.iter().map(|m| m.centroid()).collect::<Result<Vec<_>>>()?;
        let filter = self.config.filter_or(FilterConfig::tracking());
        let mut tracker = MultiTracker::new(models, &init, &filter, self.config.segmentation, self.config.seed)?;
        let mut out = Vec::new();
        let mut sums = vec![0.0; centroids.len()];
        let mut failure = None;
        for (k, cloud) in clouds.iter().enumerate() {
            if let Err(e) = tracker.step(cloud) {
                failure = Some(e);
                break;
            }
            let poses = tracker.poses();
            if let Some(t) = &truth {
                for (i, c) in centroids.iter().enumerate() {
                    sums[i] += (poses[i].apply(c) - t[k][i].apply(c)).norm();
                }
            }
            self.log(format!("frame {k}: {} objects", poses.len()));
            out.push(TrackFrame {
                frame: k,
                poses: poses.iter().map(PoseRecord::from).collect(),
            });
        }
        let errors = truth.as_ref().filter(|_| !out.is_empty()).map(|_| {
            let per_object: Vec<f64> = sums.iter().map(|s| s / out.len() as f64).collect();
            let mean = per_object.iter().sum::<f64>() / per_object.len().max(1) as f64;
            TrackErrors { per_object, mean }
        });
        let report = TrackReport {
            seed: self.config.seed,
            objects: names,
            frames: out,
            errors,
        };
        self.emit(&to_json(&report)?)?;
        match failure {
            Some(e) => Err(e.into()),
            None => Ok(()),
        }
    }

    fn detect(&self, scene: Option<&str>) -> std::result::Result<(), Failure> {
        let (scene, cfg) = self.load_scene(&self.scene_arg(scene)?)?;
        let mut env = self.environment(scene, &cfg);
        let filter = self.config.filter_or(FilterConfig::interaction());
        let mut detection = self.config.detection.clone();
        detection.seed = self.config.seed;
        match detect(&mut env, &filter, &self.config.segmentation, &detection) {
            Ok(report) => {
                self.log(format!("hypothesis {:?} after {} actions", report.hypothesis, report.actions));
                self.emit(&report.to_json()?)
            }
            Err(Error::BudgetExhausted(best)) => {
                if let BestSoFar::Detection(report) = &*best {
                    self.emit(&report.to_json()?)?;
                }
                Err(Error::BudgetExhausted(best).into())
            }
            Err(e) => Err(e.into()),
        }
    }

    fn push(&self, scene: Option<&str>, goal: Option<&Path>, csv: Option<&Path>) -> std::result::Result<(), Failure> {
        let (scene, cfg) = self.load_scene(&self.scene_arg(scene)?)?;
        let goal_path = goal
            .map(Path::to_path_buf)
            .or_else(|| self.config.paths.goal.clone())
            .ok_or_else(|| usage("no goal given: pass --goal or set paths.goal"))?;
        if !goal_path.is_file() {
            return Err(usage(format!("goal file not found: {}", goal_path.display())));
        }
        let goal: GoalFile = read_json(&goal_path)?;

        let filter = match goal {
            GoalFile::Push { .. } => FilterConfig::pushing(),
            GoalFile::Pull { .. } => FilterConfig::interaction(),
        };
        let filter = self.config.filter_or(filter);
        let mut env = self.environment(scene, &cfg);
        let cloud = env.observe()?;
        let segments = segment_scene(&cloud, &self.config.segmentation, None)?;
        let mut tracks = PartTracks::initialize(&segments, &filter, &self.config.segmentation, self.config.seed)?;
        let tracked = tracks.centroids();
        let ctl = &self.config.controller;

        match goal {
            GoalFile::Push { parts, tolerance } => {
                let mut targets: Vec<Pose> = env.scene.parts.iter().map(|p| p.pose).collect();
                for (name, [x, y, yaw]) in &parts {
                    let i = env
                        .scene
                        .parts
                        .iter()
                        .position(|p| &p.name == name)
                        .ok_or_else(|| usage(format!("goal names unknown part `{name}`")))?;
                    let z = env.scene.parts[i].pose.translation.z;
                    targets[i] = Pose::planar(*x, *y, z, *yaw);
                }
                let (goal, points) = GoalSpec::from_part_targets(&env.scene, &tracked, &targets, tolerance.unwrap_or(ctl.tolerance))?;
                let result = push_to_goal(&mut env, &mut tracks, &goal, ctl);
                let (report, failed) = match result {
                    Ok(r) => (r, false),
                    Err(Error::BudgetExhausted(best)) => match *best {
                        BestSoFar::Push(r) => (r, true),
                        other => return Err(Error::BudgetExhausted(Box::new(other)).into()),
                    },
                    Err(e) => return Err(e.into()),
                };
                if let Some(p) = csv {
                    write_file(p, &report.to_csv())?;
                }
                let output = ControlOutput {
                    action: "push",
                    success: report.success,
                    ground_truth_errors: ground_truth_errors(&env.scene, &points, &goal),
                    report,
                };
                self.log(format!("push: {} increments", output.report.increments));
                self.emit(&to_json(&output)?)?;
                if failed {
                    return Err(runtime("increment budget exhausted before reaching the goal"));
                }
                Ok(())
            }
            GoalFile::Pull { joint, value, tolerance } => {
                let j = env
                    .scene
                    .joints
                    .get(joint)
                    .ok_or_else(|| usage(format!("goal names joint {joint}, scene has {}", env.scene.joints.len())))?
                    .clone();
                let mut moved = env.scene.clone();
                moved.set_joint_value(joint, value)?;
                let targets: Vec<Pose> = moved.parts.iter().map(|p| p.pose).collect();
                let (goal, points) = GoalSpec::from_part_targets(&env.scene, &tracked, &targets, tolerance.unwrap_or(ctl.tolerance))?;
                let find = |part: usize| points.iter().position(|b: &BodyPoint| b.part == part);
                let (Some(hold), Some(pull)) = (find(j.parent), find(j.child)) else {
                    return Err(Error::DegenerateGeometry("the jointed parts were not segmented separately".into()).into());
                };
                let result = pull_to_goal(&mut env, &mut tracks, hold, pull, &goal, ctl);
                let (report, failed) = match result {
                    Ok(r) => (r, false),
                    Err(Error::BudgetExhausted(best)) => match *best {
                        BestSoFar::Pull(r) => (r, true),
                        other => return Err(Error::BudgetExhausted(Box::new(other)).into()),
                    },
                    Err(e) => return Err(e.into()),
                };
                if let Some(p) = csv {
                    write_file(p, &report.to_csv())?;
                }
                let output = ControlOutput {
                    action: "pull",
                    success: report.success,
                    ground_truth_errors: ground_truth_errors(&env.scene, &points, &goal),
                    report,
                };
                self.emit(&to_json(&output)?)?;
                if failed {
                    return Err(runtime("pull left a residual above tolerance"));
                }
                Ok(())
            }
        }
    }

    fn bench(&self, objects: &[String], trials: Option<usize>, csv: Option<&Path>) -> std::result::Result<(), Failure> {
        let suite = if objects.is_empty() {
            builtin_suite()?
        } else {
            objects.iter().map(|n| BenchObject::builtin(n)).collect::<Result<Vec<_>>>()?
        };
        let mut config = self.config.bench.clone();
        if let Some(t) = trials {
            config.trials_per_object = t;
        }
        let report = run_benchmark(&suite, &config, self.config.seed)?;
        self.log(format!(
            "{} trials, {} failed, median ADI {:.5} m",
            report.trials.len(),
            report.failed,
            report.all.median
        ));
        if let Some(p) = csv {
            write_file(p, &report.to_csv())?;
        }
        self.emit(&report.to_json()?)
    }

    fn simgen(&self, name: &str, frames: Option<usize>) -> std::result::Result<(), Failure> {
        let dir = self.cli.out.clone().ok_or_else(|| usage("simgen needs --out <directory>"))?;
        let (mut scene, mut cfg) = self.load_scene(name)?;
        fs::create_dir_all(dir.join("parts")).map_err(|e| Error::io(&dir, e))?;
        for (spec, part) in cfg.parts.iter_mut().zip(&scene.parts) {
            let rel = format!("parts/{}.ply", part.name);
            save_ply(dir.join(&rel), &part.cloud)?;
            spec.ply_path = Some(rel);
            spec.primitive = None;
            spec.color = Some(part.color);
        }
        let env = self.environment(scene.clone(), &cfg);
        let target = scene.workspace.center();
        cfg.camera = Some(cfg.camera.clone().unwrap_or_else(|| CameraSpec::from_camera(&env.camera, target)));
        if let Some(c) = cfg.camera.as_mut() {
            c.noise_sigma = env.camera.noise_sigma;
            c.dropout_prob = env.camera.dropout_prob;
        }
        cfg.seed = Some(self.config.seed);
        cfg.kappa_com = Some(scene.kappa_com);
        cfg.sample_spacing = None;
        write_file(&dir.join("scene.json"), &to_json(&cfg)?)?;

        if let Some(steps) = frames {
            let trajectory = random_walk(&mut scene, steps, &self.config.track.walk, self.config.seed)?;
            let mut env = self.environment(scene, &cfg);
            fs::create_dir_all(dir.join("frames")).map_err(|e| Error::io(&dir, e))?;
            for (k, f) in trajectory.iter().enumerate() {
                f.apply(&mut env.scene)?;
                save_ply(dir.join(format!("frames/frame_{k:04}.ply")), &env.observe()?)?;
            }
            let records = |f: &TrajectoryFrame| f.poses.iter().map(PoseRecord::from).collect::<Vec<_>>();
            write_file(&dir.join("init.json"), &to_json(&InitFile { poses: records(&trajectory[0]) })?)?;
            write_file(
                &dir.join("truth.json"),
                &to_json(&TruthFile {
                    frames: trajectory.iter().map(records).collect(),
                })?,
            )?;
        }
        self.log(format!("wrote {}", dir.display()));
        Ok(())
    }
}

fn runtime(message: &str) -> Failure {
    Failure {
        code: 1,
        message: message.to_string(),
    }
}

fn object_names(paths: &[PathBuf]) -> Vec<String> {
    paths
        .iter()
        .map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default())
        .collect()
}

/// Frame files of a sequence directory in name order: `frame_*.ply` at the
/// top level or under `frames/`.
fn frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let sub = dir.join("frames");
    let root = if sub.is_dir() { sub } else { dir.to_path_buf() };
    let mut files: Vec<PathBuf> = fs::read_dir(&root)
        .map_err(|e| Error::io(&root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.starts_with("frame_") && name.ends_with(".ply")
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Config {
            path: root.display().to_string(),
            message: "no frame_*.ply files".into(),
        });
    }
    Ok(files)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
        path: format!("{}: {}", path.display(), e.path()),
        message: e.inner().to_string(),
    })
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::InvalidArgument(e.to_string()))
}

fn write_file(path: &Path, text: &str) -> std::result::Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e).into())
}
