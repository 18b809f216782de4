use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use lidarseg::baseline::baseline_label_map;
use lidarseg::config::{read_config, read_sensor, PipelineConfig};
use lidarseg::evaluator::{bench, edge_prf, EvalConfig, EvalReport};
use lidarseg::io::{self, write_atomic};
use lidarseg::pipeline::{run_pipeline, run_scene};
use lidarseg::scan::SensorConfig;
use lidarseg::simulator::{generate_scene, read_scene, scan_scene, write_scene, GeneratorParams};

#[derive(Parser)]
#[command(
    name = "lidarseg",
    version,
    about = "Surface segmentation of spinning-Lidar scans"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ray-cast a scene file into a scan file with ground-truth labels.
    Simulate {
        #[arg(long)]
        scene: PathBuf,
        /// Sensor TOML; the default 32-ring, 1800-step sensor when omitted.
        #[arg(long)]
        sensor: Option<PathBuf>,
        /// Overrides the scene's noise seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a directory of random scene files.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        count: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Segment a scan and write its label grid.
    Segment {
        #[arg(long)]
        scan: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dump_mesh: Option<PathBuf>,
        #[arg(long)]
        dump_normals: Option<PathBuf>,
        /// Labeled cloud as PLY.
        #[arg(long)]
        ply: Option<PathBuf>,
        /// Labeled cloud as `i j x y z label` lines.
        #[arg(long)]
        points: Option<PathBuf>,
        /// Mesh triangles with normals as PLY.
        #[arg(long)]
        mesh_ply: Option<PathBuf>,
    },
    /// Edge precision/recall/F1 of a label grid against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        /// Label grid, or a scan file with a LABELS block.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value_t = lidarseg::evaluator::DEFAULT_DILATION_RADIUS)]
        radius: usize,
        /// JSON report path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time the pipeline stages, optionally against the region-growing baseline.
    Bench {
        #[arg(long)]
        scan: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 9)]
        reps: usize,
        #[arg(long)]
        baseline: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate, segment and score every scene in a directory at every configured interval.
    Suite {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also score the region-growing baseline.
        #[arg(long)]
        baseline: bool,
    },
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => Ok(read_config(p)?),
        None => Ok(PipelineConfig::default()),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn report_line(r: &EvalReport) -> String {
    serde_json::to_string(r).expect("reports serialize")
}

fn simulate(scene: &Path, sensor: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut scene = read_scene(scene)?;
    if let Some(seed) = seed {
        scene = scene.with_seed(seed);
    }
    let sensor = match sensor {
        Some(p) => read_sensor(p)?,
        None => SensorConfig::default(),
    };
    let grid = scan_scene(&scene, &sensor);
    io::write_scan(out, &grid)?;
    eprintln!("{}: {} valid returns", out.display(), grid.valid_count());
    Ok(())
}

fn generate(out: &Path, count: u64, seed: u64) -> Result<()> {
    let params = GeneratorParams::default();
    let scenes = (0..count)
        .map(|k| generate_scene(seed + k, &params))
        .collect::<lidarseg::Result<Vec<_>>>()?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for (k, scene) in scenes.iter().enumerate() {
        write_scene(&out.join(format!("scene_{k:03}.toml")), scene)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn segment(
    scan: &Path,
    config: Option<&Path>,
    out: &Path,
    dump_mesh: Option<&Path>,
    dump_normals: Option<&Path>,
    ply: Option<&Path>,
    points: Option<&Path>,
    mesh_ply: Option<&Path>,
) -> Result<()> {
    let cfg = load_config(config)?;
    let grid = io::read_scan(scan)?;
    let result = run_pipeline(&grid, &cfg)?;
    let mut outputs = vec![(out, io::labels_to_string(&result.labels))];
    if let Some(p) = dump_mesh {
        outputs.push((p, result.mesh.to_adjacency_text()));
    }
    if let Some(p) = dump_normals {
        outputs.push((p, result.normals.to_text()));
    }
    if let Some(p) = ply {
        outputs.push((p, io::labeled_cloud_ply(&grid, &result.labels)));
    }
    if let Some(p) = points {
        outputs.push((p, io::labeled_cloud_text(&grid, &result.labels)));
    }
    if let Some(p) = mesh_ply {
        outputs.push((p, io::mesh_ply(&grid, &result.mesh, Some(&result.normals))));
    }
    for (path, text) in outputs {
        write_atomic(path, &text)?;
    }
    eprintln!(
        "{} segments, {} nodes, {:.3} ms",
        result.labels.segment_count(),
        result.mesh.node_count(),
        result.timings.total
    );
    Ok(())
}

fn eval(pred: &Path, truth: &Path, radius: usize, out: Option<&Path>) -> Result<()> {
    let pred = io::read_label_source(pred)?;
    let truth = io::read_label_source(truth)?;
    let scores = edge_prf(
        &pred,
        &truth,
        &EvalConfig {
            dilation_radius: radius,
        },
    )?;
    emit(out, &report_line(&EvalReport::new(scores)))
}

fn bench_cmd(
    scan: &Path,
    config: Option<&Path>,
    reps: usize,
    baseline: bool,
    out: Option<&Path>,
) -> Result<()> {
    let cfg = load_config(config)?;
    let grid = io::read_scan(scan)?;
    let proposed = bench(reps, || Ok(run_pipeline(&grid, &cfg)?.timings))?;
    let mut report = json!({
        "scan": scan.display().to_string(),
        "interval": cfg.interval,
        "points": grid.valid_count(),
        "proposed": proposed,
    });
    if baseline {
        let base = bench(reps, || {
            Ok(baseline_label_map(&grid, &cfg.baseline)?.1.timings)
        })?;
        let ratio = base.stage("total").expect("total stage").median
            / proposed.stage("total").expect("total stage").median;
        report["baseline"] = serde_json::to_value(&base)?;
        report["speedup_median"] = json!(ratio);
    }
    emit(out, &serde_json::to_string_pretty(&report)?)
}

fn suite(scenes_dir: &Path, config: Option<&Path>, out: &Path, with_baseline: bool) -> Result<()> {
    let cfg = load_config(config)?;
    let mut files: Vec<PathBuf> = fs::read_dir(scenes_dir)
        .with_context(|| format!("reading {}", scenes_dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no .toml scene files in {}", scenes_dir.display());
    }
    let scenes = files
        .iter()
        .map(|p| {
            let name = p
                .file_stem()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned();
            read_scene(p).map(|s| (name, s))
        })
        .collect::<lidarseg::Result<Vec<_>>>()?;

    let mut results = Vec::with_capacity(scenes.len());
    for (name, scene) in &scenes {
        results.push(run_scene(name, scene, &cfg, with_baseline)?);
        eprintln!("{name}: done");
    }

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut csv = String::from("scene,method,interval,precision,recall,f1,total_ms\n");
    for r in &results {
        io::write_scan(&out.join(format!("{}.lseg", r.name)), &r.scan)?;
        for (report, labels) in &r.runs {
            let interval = report.interval.expect("suite reports carry the interval");
            let stem = format!("{}_i{interval}", r.name);
            write_atomic(&out.join(format!("{stem}.json")), &report_line(report))?;
            io::write_labels(&out.join(format!("{stem}.labels")), labels)?;
            csv.push_str(&format!(
                "{},proposed,{interval},{:.6},{:.6},{:.6},{:.3}\n",
                r.name,
                report.precision,
                report.recall,
                report.f1,
                report.timings_ms.map_or(0.0, |t| t.total)
            ));
        }
        if let Some((report, timings, labels)) = &r.baseline {
            io::write_labels(&out.join(format!("{}_baseline.labels", r.name)), labels)?;
            csv.push_str(&format!(
                "{},baseline,,{:.6},{:.6},{:.6},{:.3}\n",
                r.name, report.precision, report.recall, report.f1, timings.total
            ));
        }
    }
    let n = results.len() as f64;
    for (k, interval) in cfg.intervals.iter().enumerate() {
        let mean =
            |f: fn(&EvalReport) -> f64| results.iter().map(|r| f(&r.runs[k].0)).sum::<f64>() / n;
        let time = results
            .iter()
            .map(|r| r.runs[k].0.timings_ms.map_or(0.0, |t| t.total))
            .sum::<f64>()
            / n;
        csv.push_str(&format!(
            "mean,proposed,{interval},{:.6},{:.6},{:.6},{time:.3}\n",
            mean(|r| r.precision),
            mean(|r| r.recall),
            mean(|r| r.f1)
        ));
    }
    if with_baseline {
        let base: Vec<_> = results.iter().filter_map(|r| r.baseline.as_ref()).collect();
        let mean = |f: fn(&EvalReport) -> f64| base.iter().map(|b| f(&b.0)).sum::<f64>() / n;
        let time = base.iter().map(|b| b.1.total).sum::<f64>() / n;
        csv.push_str(&format!(
            "mean,baseline,,{:.6},{:.6},{:.6},{time:.3}\n",
            mean(|r| r.precision),
            mean(|r| r.recall),
            mean(|r| r.f1)
        ));
    }
    write_atomic(&out.join("summary.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            scene,
            sensor,
            seed,
            out,
        } => simulate(&scene, sensor.as_deref(), seed, &out),
        Command::Generate { out, count, seed } => generate(&out, count, seed),
        Command::Segment {
            scan,
            config,
            out,
            dump_mesh,
            dump_normals,
            ply,
            points,
            mesh_ply,
        } => segment(
            &scan,
            config.as_deref(),
            &out,
            dump_mesh.as_deref(),
            dump_normals.as_deref(),
            ply.as_deref(),
            points.as_deref(),
            mesh_ply.as_deref(),
        ),
        Command::Eval {
            pred,
            truth,
            radius,
            out,
        } => eval(&pred, &truth, radius, out.as_deref()),
        Command::Bench {
            scan,
            config,
            reps,
            baseline,
            out,
        } => bench_cmd(&scan, config.as_deref(), reps, baseline, out.as_deref()),
        Command::Suite {
            scenes,
            config,
            out,
            baseline,
        } => suite(&scenes, config.as_deref(), &out, baseline),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
