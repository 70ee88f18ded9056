//! Command-line front end. Every subcommand reads and writes the formats
//! of [`crate::io`]; failures print `error[<stage>]: ...` and exit nonzero.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bench::{bench, BenchConfig, BenchScene, N_H_SWEEP};
use crate::corners::extract_corner_candidates;
use crate::error::{Error, Result, Stage, StageExt};
use crate::evaluation::{eop, pick_best, render_labels, score_hypotheses, LabeledImage};
use crate::hypotheses::generate_hypotheses;
use crate::io::{
    create_dir, export_model, load_inputs, load_view_maps, read_json, read_labels, read_normals,
    read_panorama, read_probability, scene_inputs, write_corner_overlay, write_json, write_labels,
    write_line_overlay, write_normals, write_probability, write_scene, write_stub_outputs,
    write_view_batch, CornersDoc, HypothesesDoc, LayoutDoc, LinesDoc,
};
use crate::lines::detect_lines;
use crate::pipeline::{run_pipeline_on, write_outputs, Mode, PipelineConfig};
use crate::structural::{filter_structural_lines, label_normals, threshold_probability};
use crate::synthetic::{SceneSpec, DEFAULT_EDGE_SIGMA_PX};

#[derive(Debug, Parser)]
#[command(
    name = "panolayout",
    version,
    about = "Manhattan room layouts from equirectangular panoramas"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect great-circle lines and vanishing points.
    Lines(LinesArgs),
    /// Intersect classified lines into corner candidates.
    Corners(CornersArgs),
    /// Sample corner groups into layout hypotheses.
    Hypotheses(HypothesesArgs),
    /// Score hypotheses against a reference labelling and keep the best.
    Evaluate(EvaluateArgs),
    /// Write a layout as JSON and OBJ.
    Export(ExportArgs),
    /// Render a synthetic scene directory.
    Synth(SynthArgs),
    /// Repeated runs over a scene set, summarised by medians.
    Bench(BenchArgs),
    /// Full pipeline from a panorama and optional maps.
    Run(RunArgs),
    /// Cut a panorama into perspective views for per-view networks.
    Views(ViewsArgs),
    /// Stitch per-view network outputs back into panorama maps.
    Stitch(StitchArgs),
    /// Print the default configuration as TOML.
    Config,
}

/// Configuration file plus the most common overrides.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML configuration; defaults apply to anything it omits.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of hypotheses.
    #[arg(long = "n-h")]
    pub n_h: Option<usize>,
    /// Edge-probability threshold.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Inlier angle, degrees.
    #[arg(long = "theta-th")]
    pub theta_th_deg: Option<f64>,
    /// Rows of the scoring raster.
    #[arg(long = "eval-rows")]
    pub eval_rows: Option<usize>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg = cfg.with_seed(s);
        }
        if let Some(n) = self.n_h {
            cfg.hypotheses.n_h = n;
        }
        if let Some(t) = self.tau {
            cfg.filter.tau = t;
        }
        if let Some(t) = self.theta_th_deg {
            cfg.lines.theta_th_deg = t;
        }
        if let Some(r) = self.eval_rows {
            cfg.eval_rows = r;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct LinesArgs {
    #[arg(long)]
    pub panorama: PathBuf,
    /// Edge-probability map; keeps only lines it supports.
    #[arg(long)]
    pub filter: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct CornersArgs {
    /// Output of `lines`.
    #[arg(long)]
    pub lines: PathBuf,
    /// Draw an overlay on this panorama.
    #[arg(long)]
    pub panorama: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct HypothesesArgs {
    /// Output of `corners`.
    #[arg(long)]
    pub corners: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Output of `hypotheses`.
    #[arg(long)]
    pub hypotheses: PathBuf,
    /// Reference label PNG.
    #[arg(
        long = "ref",
        conflicts_with = "normals",
        required_unless_present = "normals"
    )]
    pub reference: Option<PathBuf>,
    /// Normal-map PNG, labelled against the hypotheses' basis.
    #[arg(long)]
    pub normals: Option<PathBuf>,
    /// Ground-truth labels; reports the EOP of the chosen layout.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Layout JSON (as written by `evaluate` or `run`).
    #[arg(long)]
    pub layout: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "layout")]
    pub stem: String,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 4)]
    pub walls: usize,
    /// Clutter rectangles on the walls.
    #[arg(long, default_value_t = 0, conflicts_with = "clutter_ratio")]
    pub clutter: usize,
    /// Clutter edges per structural edge; overrides `--clutter`.
    #[arg(long = "clutter-ratio")]
    pub clutter_ratio: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 512)]
    pub rows: usize,
    /// Share of corrupted normal-map pixels.
    #[arg(long = "flip-rate", default_value_t = 0.0)]
    pub flip_rate: f64,
    #[arg(long = "line-noise-deg", default_value_t = 0.0)]
    pub line_noise_deg: f64,
    #[arg(long = "edge-sigma", default_value_t = DEFAULT_EDGE_SIGMA_PX)]
    pub edge_sigma_px: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Directory of scene directories.
    #[arg(long, required_unless_present = "synthetic")]
    pub scenes: Option<PathBuf>,
    /// Generate this many synthetic scenes instead.
    #[arg(long, conflicts_with = "scenes")]
    pub synthetic: Option<usize>,
    /// Wall counts cycled over synthetic scenes.
    #[arg(long, value_delimiter = ',', default_values_t = [4, 6, 8])]
    pub walls: Vec<usize>,
    #[arg(long = "clutter-ratio", default_value_t = 0.0)]
    pub clutter_ratio: f64,
    #[arg(long, default_value_t = 512)]
    pub rows: usize,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    /// Hypothesis budgets, e.g. `10,100`.
    #[arg(long, value_delimiter = ',', conflicts_with = "sweep")]
    pub budgets: Vec<usize>,
    /// Use the budgets 5, 10, 20, 40, 60, 80, 100.
    #[arg(long)]
    pub sweep: bool,
    /// `G`, `G+DL` or both, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "G+DL")]
    pub modes: Vec<Mode>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scene directory written by `synth`; explicit paths override it.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long)]
    pub panorama: Option<PathBuf>,
    #[arg(long = "edge-map")]
    pub edge_map: Option<PathBuf>,
    #[arg(long = "normal-map")]
    pub normal_map: Option<PathBuf>,
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// View manifest whose per-view outputs replace the maps.
    #[arg(long)]
    pub views: Option<PathBuf>,
    /// Skip line filtering even if an edge map is given.
    #[arg(long = "no-edge-map")]
    pub no_edge_map: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct ViewsArgs {
    #[arg(long)]
    pub panorama: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long = "fov")]
    pub fov_deg: Option<f64>,
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Also write per-view outputs cut from these panorama maps (edge
    /// map, then normal map), in place of the networks.
    #[arg(long, num_args = 2, value_names = ["EDGE", "NORMALS"])]
    pub stub: Option<Vec<PathBuf>>,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct StitchArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Panorama rows of the stitched maps.
    #[arg(long, default_value_t = 512)]
    pub rows: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Exit code for a failure: 2 bad arguments or config, 3 malformed input,
/// 4 file system, 5 estimation or generation failure.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Staged { source, .. } => exit_code(source),
        Error::InvalidArgument(_) => 2,
        Error::Format(_) | Error::Json(_) | Error::Image { .. } => 3,
        Error::Io { .. } => 4,
        Error::Estimation(_) | Error::Generation(_) => 5,
    }
}

/// Diagnostic line for a failure.
pub fn diagnostic(e: &Error) -> String {
    match e {
        Error::Staged { stage, source } => format!("error[{stage}]: {source}"),
        other => format!("error: {other}"),
    }
}

/// Parse `args`, run, and return the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", diagnostic(&e));
            exit_code(&e)
        }
    }
}

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Lines(a) => lines(&a),
        Command::Corners(a) => corners(&a),
        Command::Hypotheses(a) => hypotheses(&a),
        Command::Evaluate(a) => evaluate(&a),
        Command::Export(a) => export(&a),
        Command::Synth(a) => synth(&a),
        Command::Bench(a) => bench_cmd(&a),
        Command::Run(a) => run_cmd(&a),
        Command::Views(a) => views(&a),
        Command::Stitch(a) => stitch(&a),
        Command::Config => {
            print!("{}", PipelineConfig::default().to_toml()?);
            Ok(())
        }
    }
}

fn lines(a: &LinesArgs) -> Result<()> {
    let cfg = a.cfg.resolve().stage(Stage::Input)?;
    let pano = read_panorama(&a.panorama).stage(Stage::Input)?;
    let edge = a
        .filter
        .as_deref()
        .map(read_probability)
        .transpose()
        .stage(Stage::Input)?;
    let det = detect_lines(&pano, &cfg.lines).stage(Stage::Lines)?;
    let segments = match edge {
        Some(m) => {
            let m = threshold_probability(&m.resample(pano.dims()), cfg.filter.tau)
                .stage(Stage::Filter)?;
            filter_structural_lines(&det.classified, &m, cfg.filter.score_fraction)
        }
        None => det.classified.clone(),
    };
    create_dir(&a.out).stage(Stage::Export)?;
    write_json(
        &LinesDoc {
            basis: det.basis.clone(),
            segments: segments.clone(),
            all_segments: det.segments.clone(),
        },
        &a.out.join("lines.json"),
    )
    .stage(Stage::Export)?;
    write_line_overlay(&pano, &segments, &a.out.join("lines.png")).stage(Stage::Export)?;
    println!(
        "lines: {} detected, {} classified, {} kept",
        det.segments.len(),
        det.classified.len(),
        segments.len()
    );
    Ok(())
}

fn corners(a: &CornersArgs) -> Result<()> {
    let cfg = a.cfg.resolve().stage(Stage::Input)?;
    let doc: LinesDoc = read_json(&a.lines).stage(Stage::Input)?;
    let cands = extract_corner_candidates(&doc.segments, &doc.basis, &cfg.corners);
    if cands.is_empty() {
        return Err(Error::Estimation("no corner candidates".into()).at(Stage::Corners));
    }
    create_dir(&a.out).stage(Stage::Export)?;
    if let Some(p) = &a.panorama {
        let pano = read_panorama(p).stage(Stage::Input)?;
        write_corner_overlay(
            &pano,
            &doc.segments,
            &cands,
            &doc.basis,
            &a.out.join("corners.png"),
        )
        .stage(Stage::Export)?;
    }
    println!("corners: {}", cands.len());
    write_json(
        &CornersDoc {
            basis: doc.basis,
            corners: cands,
        },
        &a.out.join("corners.json"),
    )
    .stage(Stage::Export)
}

fn hypotheses(a: &HypothesesArgs) -> Result<()> {
    let cfg = a.cfg.resolve().stage(Stage::Input)?;
    let doc: CornersDoc = read_json(&a.corners).stage(Stage::Input)?;
    let hyps =
        generate_hypotheses(&doc.corners, &doc.basis, &cfg.hypotheses).stage(Stage::Hypotheses)?;
    println!("hypotheses: {}", hyps.len());
    create_dir(&a.out).stage(Stage::Export)?;
    write_json(
        &HypothesesDoc {
            basis: doc.basis,
            hypotheses: hyps,
        },
        &a.out.join("hypotheses.json"),
    )
    .stage(Stage::Export)
}

fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let cfg = a.cfg.resolve().stage(Stage::Input)?;
    let doc: HypothesesDoc = read_json(&a.hypotheses).stage(Stage::Input)?;
    if doc.hypotheses.is_empty() {
        return Err(Error::Format("hypothesis list is empty".into()).at(Stage::Input));
    }
    let reference: LabeledImage = match (&a.reference, &a.normals) {
        (Some(p), _) => read_labels(p).stage(Stage::Input)?,
        (None, Some(p)) => label_normals(
            &read_normals(p).stage(Stage::Input)?,
            &doc.basis,
            cfg.filter.normal_angle_tol_deg,
        ),
        (None, None) => return Err(Error::invalid("give --ref or --normals").at(Stage::Input)),
    };
    let reference = reference.resample(cfg.eval_dims());
    let scores = score_hypotheses(&doc.hypotheses, &reference).stage(Stage::Evaluate)?;
    let best = pick_best(&doc.hypotheses, &scores);
    let layout = doc.hypotheses[best].clone();
    let labels = render_labels(&layout, reference.dims()).stage(Stage::Evaluate)?;
    println!(
        "best: hypothesis {best}, {} walls, score {:.6}",
        layout.wall_count(),
        scores[best]
    );
    if let Some(p) = &a.gt {
        let gt = read_labels(p).stage(Stage::Input)?;
        let e = eop(
            &render_labels(&layout, gt.dims()).stage(Stage::Evaluate)?,
            &gt,
        )
        .stage(Stage::Evaluate)?;
        println!("eop vs gt: {e:.6}");
    }
    create_dir(&a.out).stage(Stage::Export)?;
    write_json(
        &LayoutDoc {
            layout,
            score: Some(scores[best]),
        },
        &a.out.join("layout.json"),
    )
    .stage(Stage::Export)?;
    write_labels(&labels, &a.out.join("labels.png")).stage(Stage::Export)
}

fn export(a: &ExportArgs) -> Result<()> {
    let doc: LayoutDoc = read_json(&a.layout).stage(Stage::Input)?;
    let (j, o) = export_model(&doc.layout, &a.out, &a.stem).stage(Stage::Export)?;
    println!("wrote {} and {}", j.display(), o.display());
    Ok(())
}

fn synth(a: &SynthArgs) -> Result<()> {
    let mut spec = match a.clutter_ratio {
        Some(r) => SceneSpec::random_cluttered(a.walls, r, a.seed),
        None => SceneSpec::random(a.walls, a.clutter, a.seed),
    }
    .stage(Stage::Synth)?;
    spec.flip_rate = a.flip_rate;
    spec.line_noise_deg = a.line_noise_deg;
    write_scene(&spec, a.rows, a.edge_sigma_px, &a.out).stage(Stage::Synth)?;
    println!(
        "scene: {} walls, {} clutter rectangles, in {}",
        a.walls,
        spec.clutter.len(),
        a.out.display()
    );
    Ok(())
}

fn scene_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(root).map_err(|source| Error::Io {
        path: root.to_path_buf(),
        source,
    })?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("manifest.json").exists() || p.join("panorama.png").exists())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::invalid(format!(
            "no scene directories in {}",
            root.display()
        )));
    }
    Ok(dirs)
}

fn bench_cmd(a: &BenchArgs) -> Result<()> {
    let pipeline = a.cfg.resolve().stage(Stage::Input)?;
    let scenes = match (&a.scenes, a.synthetic) {
        (Some(root), _) => scene_dirs(root)
            .and_then(|dirs| {
                dirs.iter()
                    .map(|d| BenchScene::from_dir(d))
                    .collect::<Result<Vec<_>>>()
            })
            .stage(Stage::Input)?,
        (None, Some(n)) => {
            if a.walls.is_empty() {
                return Err(Error::invalid("no wall counts").at(Stage::Input));
            }
            (0..n)
                .map(|i| {
                    let walls = a.walls[i % a.walls.len()];
                    let spec = SceneSpec::random_cluttered(walls, a.clutter_ratio, i as u64)?;
                    BenchScene::synthetic(&spec, a.rows)
                })
                .collect::<Result<Vec<_>>>()
                .stage(Stage::Synth)?
        }
        (None, None) => return Err(Error::invalid("give --scenes or --synthetic").at(Stage::Input)),
    };
    let n_h_values = if a.sweep {
        N_H_SWEEP.to_vec()
    } else if a.budgets.is_empty() {
        vec![pipeline.hypotheses.n_h]
    } else {
        a.budgets.clone()
    };
    let cfg = BenchConfig {
        repeats: a.repeats,
        base_seed: a.cfg.seed.unwrap_or(0),
        n_h_values,
        modes: a.modes.clone(),
        pipeline,
    };
    let report = bench(&scenes, &cfg)?;
    report.write(&a.out).stage(Stage::Export)?;
    println!("mode  n_h  scenes  eop_median  eop_mean  eop_std  ms_median  lines_kept/classified");
    for g in &report.groups {
        println!(
            "{:<5} {:>4} {:>7} {:>11.4} {:>9.4} {:>8.4} {:>10.0}  {}/{}",
            g.mode.to_string(),
            g.n_h,
            g.scenes,
            g.eop.median,
            g.eop.mean,
            g.eop.std,
            g.ms_total.median,
            g.median_lines_kept,
            g.median_lines_classified
        );
    }
    Ok(())
}

fn run_cmd(a: &RunArgs) -> Result<()> {
    let mut cfg = a.cfg.resolve().stage(Stage::Input)?;
    if let Some(dir) = &a.scene {
        let from_scene = scene_inputs(dir).stage(Stage::Input)?;
        cfg.inputs = crate::pipeline::InputPaths {
            panorama: a.panorama.clone().or(from_scene.panorama),
            edge_map: a.edge_map.clone().or(from_scene.edge_map),
            normal_map: a.normal_map.clone().or(from_scene.normal_map),
            gt_labels: a.gt.clone().or(from_scene.gt_labels),
        };
    } else {
        let p = &mut cfg.inputs;
        p.panorama = a.panorama.clone().or(p.panorama.take());
        p.edge_map = a.edge_map.clone().or(p.edge_map.take());
        p.normal_map = a.normal_map.clone().or(p.normal_map.take());
        p.gt_labels = a.gt.clone().or(p.gt_labels.take());
    }
    if a.no_edge_map {
        cfg.use_edge_map = false;
    }
    if let Some(out) = &a.out {
        cfg.output_dir = Some(out.clone());
    }
    let mut inputs = load_inputs(&cfg.inputs).stage(Stage::Input)?;
    if let Some(m) = &a.views {
        let (edge, normals) = load_view_maps(m, inputs.panorama.dims()).stage(Stage::Input)?;
        inputs.edge_map = edge.or(inputs.edge_map);
        inputs.normal_map = normals.or(inputs.normal_map);
    }
    let out = run_pipeline_on(&inputs, &cfg)?;
    if let Some(dir) = &cfg.output_dir {
        write_outputs(&out, &inputs.panorama, dir).stage(Stage::Export)?;
    }
    let r = &out.report;
    println!(
        "mode {}: {} lines ({} kept), {} corners, {} hypotheses, best {} ({} walls), score {:.6}",
        r.mode,
        r.lines_classified,
        r.lines_kept,
        r.corners,
        r.hypotheses,
        r.best_index,
        out.best.wall_count(),
        r.score
    );
    if let Some(e) = r.eop_gt {
        println!("eop vs gt: {e:.6}");
    }
    Ok(())
}

fn views(a: &ViewsArgs) -> Result<()> {
    let mut cfg = a.cfg.resolve().stage(Stage::Input)?;
    cfg.views.count = a.count.unwrap_or(cfg.views.count);
    cfg.views.fov_deg = a.fov_deg.unwrap_or(cfg.views.fov_deg);
    cfg.views.resolution = a.resolution.unwrap_or(cfg.views.resolution);
    cfg.validate().stage(Stage::Input)?;
    let pano = read_panorama(&a.panorama).stage(Stage::Input)?;
    let m = write_view_batch(&pano, &cfg.views, &a.out).stage(Stage::Export)?;
    if let Some(stub) = &a.stub {
        let edge = read_probability(&stub[0]).stage(Stage::Input)?;
        let normals = read_normals(&stub[1]).stage(Stage::Input)?;
        write_stub_outputs(&m, &a.out, &edge, &normals).stage(Stage::Export)?;
    }
    println!("views: {} in {}", m.views.len(), a.out.display());
    Ok(())
}

fn stitch(a: &StitchArgs) -> Result<()> {
    let dims = crate::geometry::Dims::new(a.rows, 2 * a.rows).stage(Stage::Input)?;
    let (edge, normals) = load_view_maps(&a.manifest, dims).stage(Stage::Input)?;
    if edge.is_none() && normals.is_none() {
        return Err(Error::Format("no per-view outputs found".into()).at(Stage::Input));
    }
    create_dir(&a.out).stage(Stage::Export)?;
    if let Some(m) = &edge {
        write_probability(m, &a.out.join("edge_map.png")).stage(Stage::Export)?;
    }
    if let Some(m) = &normals {
        write_normals(m, &a.out.join("normals.png")).stage(Stage::Export)?;
    }
    println!(
        "stitched:{}{}",
        if edge.is_some() { " edge_map.png" } else { "" },
        if normals.is_some() {
            " normals.png"
        } else {
            ""
        }
    );
    Ok(())
}
