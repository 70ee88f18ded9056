//! End-to-end orchestration: lines, structural filter, corners,
//! hypotheses, selection.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corners::{extract_corner_candidates, CornerCandidate, CornerConfig};
use crate::error::{Error, Result, Stage};
use crate::evaluation::{eop, pick_best, render_labels_on, Label, LabeledImage};
use crate::geometry::{Dims, EquirectImage, RayGrid};
use crate::hypotheses::{generate_hypotheses, HypothesisConfig, LayoutModel};
use crate::io::{
    export_model, load_inputs, write_json, write_labels, write_line_overlay, CornersDoc,
    HypothesesDoc, LinesDoc, ReportDoc, TimingsDoc,
};
use crate::lines::{detect_lines, GreatCircleSegment, LineDetection, ThresholdConfig};
use crate::structural::{
    filter_structural_lines, label_normals, threshold_probability, FilterConfig, NormalMap,
    ProbabilityMap,
};

/// Perspective split used when maps come from per-view networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ViewConfig {
    pub count: usize,
    pub fov_deg: f64,
    pub resolution: usize,
}

impl Default for ViewConfig {
    fn default() -> Self {
        ViewConfig {
            count: 60,
            fov_deg: 70.0,
            resolution: 320,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InputPaths {
    pub panorama: Option<PathBuf>,
    pub edge_map: Option<PathBuf>,
    pub normal_map: Option<PathBuf>,
    pub gt_labels: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub lines: ThresholdConfig,
    pub filter: FilterConfig,
    pub corners: CornerConfig,
    pub hypotheses: HypothesisConfig,
    pub views: ViewConfig,
    /// Rows of the raster hypotheses are scored on (columns = 2 × rows).
    pub eval_rows: usize,
    /// Use the edge map when one is given; `false` forces geometry-only.
    pub use_edge_map: bool,
    pub inputs: InputPaths,
    pub output_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            lines: ThresholdConfig::default(),
            filter: FilterConfig::default(),
            corners: CornerConfig::default(),
            hypotheses: HypothesisConfig::default(),
            views: ViewConfig::default(),
            eval_rows: 256,
            use_edge_map: true,
            inputs: InputPaths::default(),
            output_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.lines.validate()?;
        self.filter.validate()?;
        self.corners.validate()?;
        self.hypotheses.validate()?;
        if self.eval_rows < 2 {
            return Err(Error::invalid("eval_rows must be at least 2"));
        }
        if self.views.count == 0
            || !(self.views.fov_deg > 0.0 && self.views.fov_deg < 180.0)
            || self.views.resolution < 2
        {
            return Err(Error::invalid(
                "views need count >= 1, fov in (0, 180), resolution >= 2",
            ));
        }
        Ok(())
    }

    /// Same config with every stage seeded from `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.lines.seed = seed;
        self.hypotheses.seed = seed;
        self
    }

    pub fn eval_dims(&self) -> Dims {
        Dims::panorama(self.eval_rows)
    }
}

/// "G" uses geometry alone; "G+DL" also filters lines with an edge map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "G")]
    Geometry,
    #[serde(rename = "G+DL")]
    GeometryDl,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Geometry => "G",
            Mode::GeometryDl => "G+DL",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "G" | "g" => Ok(Mode::Geometry),
            "G+DL" | "g+dl" => Ok(Mode::GeometryDl),
            _ => Err(Error::invalid(format!(
                "unknown mode {s:?}, expected G or G+DL"
            ))),
        }
    }
}

/// What hypotheses were scored against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Labels from the normal map.
    Normals,
    /// Per-pixel majority over all hypotheses (no normal map given).
    Consensus,
}

/// Wall-clock time per stage, milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub lines: f64,
    pub filter: f64,
    pub corners: f64,
    pub hypotheses: f64,
    pub evaluate: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: Mode,
    pub filtering_skipped: bool,
    pub selection: Selection,
    pub lines_detected: usize,
    pub lines_classified: usize,
    pub lines_kept: usize,
    pub corners: usize,
    pub hypotheses: usize,
    pub best_index: usize,
    /// Score of the best hypothesis against the selection reference.
    pub score: f64,
    /// EOP of the best hypothesis against ground truth, when given.
    pub eop_gt: Option<f64>,
    pub timings: StageTimings,
}

/// In-memory inputs of one run.
#[derive(Debug, Clone)]
pub struct PipelineInputs {
    pub panorama: EquirectImage,
    pub edge_map: Option<ProbabilityMap>,
    pub normal_map: Option<NormalMap>,
    pub gt: Option<LabeledImage>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub lines: LineDetection,
    /// Classified lines that survived the structural filter.
    pub structural: Vec<GreatCircleSegment>,
    pub corners: Vec<CornerCandidate>,
    pub hypotheses: Vec<LayoutModel>,
    pub best: LayoutModel,
    /// Best layout rendered at the evaluation size.
    pub labels: LabeledImage,
    pub report: RunReport,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Per-pixel majority label over a set of label images.
pub fn consensus_labels(images: &[LabeledImage]) -> Result<LabeledImage> {
    let first = images
        .first()
        .ok_or_else(|| Error::invalid("no label images"))?;
    let dims = first.dims();
    let labels = (0..dims.len())
        .map(|i| {
            let mut counts = [0usize; 4];
            for img in images {
                counts[img.labels()[i] as usize] += 1;
            }
            let k = (1..4)
                .max_by_key(|&k| (counts[k], std::cmp::Reverse(k)))
                .unwrap();
            [Label::None, Label::X, Label::Y, Label::Z][k]
        })
        .collect();
    LabeledImage::from_labels(dims, labels)
}

/// Run every stage on in-memory inputs.
pub fn run_pipeline_on(inputs: &PipelineInputs, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let mut outs = run_pipeline_sweep(inputs, cfg, &[cfg.hypotheses.n_h])?;
    Ok(outs.pop().expect("one budget requested"))
}

/// Run once with the largest budget in `n_h_values` and report the
/// selection each smaller budget would have made. Hypothesis generation
/// is prefix-stable, so this equals separate runs per budget.
pub fn run_pipeline_sweep(
    inputs: &PipelineInputs,
    cfg: &PipelineConfig,
    n_h_values: &[usize],
) -> Result<Vec<PipelineOutput>> {
    cfg.validate().map_err(|e| e.at(Stage::Input))?;
    let max_n_h = *n_h_values
        .iter()
        .max()
        .ok_or_else(|| Error::invalid("no hypothesis budget given").at(Stage::Input))?;
    if n_h_values.contains(&0) {
        return Err(Error::invalid("N_h must be at least 1").at(Stage::Input));
    }
    let start = Instant::now();
    let mut timings = StageTimings::default();
    let pano_dims = inputs.panorama.dims();

    let t = Instant::now();
    let lines = detect_lines(&inputs.panorama, &cfg.lines).map_err(|e| e.at(Stage::Lines))?;
    timings.lines = ms(t);

    let t = Instant::now();
    let edge_map = inputs.edge_map.as_ref().filter(|_| cfg.use_edge_map);
    let (structural, mode) = match edge_map {
        Some(m) => {
            let m = threshold_probability(&m.resample(pano_dims), cfg.filter.tau)
                .map_err(|e| e.at(Stage::Filter))?;
            (
                filter_structural_lines(&lines.classified, &m, cfg.filter.score_fraction),
                Mode::GeometryDl,
            )
        }
        None => (lines.classified.clone(), Mode::Geometry),
    };
    timings.filter = ms(t);

    let t = Instant::now();
    let corners = extract_corner_candidates(&structural, &lines.basis, &cfg.corners);
    timings.corners = ms(t);
    if corners.is_empty() {
        return Err(Error::Estimation("no corner candidates".into()).at(Stage::Corners));
    }

    let t = Instant::now();
    let hcfg = HypothesisConfig {
        n_h: max_n_h,
        ..cfg.hypotheses.clone()
    };
    let hypotheses =
        generate_hypotheses(&corners, &lines.basis, &hcfg).map_err(|e| e.at(Stage::Hypotheses))?;
    timings.hypotheses = ms(t);

    let t = Instant::now();
    let grid = RayGrid::new(cfg.eval_dims());
    let renders = hypotheses
        .iter()
        .map(|h| render_labels_on(h, &grid))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.at(Stage::Evaluate))?;
    let normals_ref = inputs.normal_map.as_ref().map(|nm| {
        label_normals(nm, &lines.basis, cfg.filter.normal_angle_tol_deg).resample(grid.dims)
    });
    let gt_grid = inputs.gt.as_ref().map(|gt| RayGrid::new(gt.dims()));
    let mut selections = Vec::with_capacity(n_h_values.len());
    for &n_h in n_h_values {
        let k = n_h.min(hypotheses.len());
        let (reference, selection) = match &normals_ref {
            Some(r) => (r.clone(), Selection::Normals),
            None => (consensus_labels(&renders[..k])?, Selection::Consensus),
        };
        let scores = renders[..k]
            .iter()
            .map(|r| eop(r, &reference))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.at(Stage::Evaluate))?;
        let best_index = pick_best(&hypotheses[..k], &scores);
        let eop_gt = match (&inputs.gt, &gt_grid) {
            (Some(gt), Some(g)) => Some(
                eop(&render_labels_on(&hypotheses[best_index], g)?, gt)
                    .map_err(|e| e.at(Stage::Evaluate))?,
            ),
            _ => None,
        };
        selections.push((k, selection, best_index, scores[best_index], eop_gt));
    }
    timings.evaluate = ms(t);
    timings.total = ms(start);

    Ok(selections
        .into_iter()
        .map(|(k, selection, best_index, score, eop_gt)| {
            let report = RunReport {
                mode,
                filtering_skipped: mode == Mode::Geometry,
                selection,
                lines_detected: lines.segments.len(),
                lines_classified: lines.classified.len(),
                lines_kept: structural.len(),
                corners: corners.len(),
                hypotheses: k,
                best_index,
                score,
                eop_gt,
                timings,
            };
            PipelineOutput {
                lines: lines.clone(),
                structural: structural.clone(),
                corners: corners.clone(),
                hypotheses: hypotheses[..k].to_vec(),
                best: hypotheses[best_index].clone(),
                labels: renders[best_index].clone(),
                report,
            }
        })
        .collect())
}

/// Load inputs from the configured paths, run, and write every output
/// into `cfg.output_dir` when one is set.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let inputs = load_inputs(&cfg.inputs).map_err(|e| e.at(Stage::Input))?;
    let out = run_pipeline_on(&inputs, cfg)?;
    if let Some(dir) = &cfg.output_dir {
        write_outputs(&out, &inputs.panorama, dir).map_err(|e| e.at(Stage::Export))?;
    }
    Ok(out)
}

/// Stage documents, the selected layout and its mesh, the rendered label
/// image and a line overlay. Timings go to their own file so every other
/// output is reproducible byte for byte.
pub fn write_outputs(out: &PipelineOutput, panorama: &EquirectImage, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let basis = out.lines.basis.clone();
    write_json(
        &LinesDoc {
            basis: basis.clone(),
            segments: out.lines.classified.clone(),
            all_segments: out.lines.segments.clone(),
        },
        &dir.join("lines.json"),
    )?;
    write_json(
        &CornersDoc {
            basis: basis.clone(),
            corners: out.corners.clone(),
        },
        &dir.join("corners.json"),
    )?;
    write_json(
        &HypothesesDoc {
            basis,
            hypotheses: out.hypotheses.clone(),
        },
        &dir.join("hypotheses.json"),
    )?;
    export_model(&out.best, dir, "layout")?;
    let mut report = out.report.clone();
    report.timings = StageTimings::default();
    write_json(&ReportDoc { report }, &dir.join("report.json"))?;
    write_json(
        &TimingsDoc {
            timings: out.report.timings,
        },
        &dir.join("timings.json"),
    )?;
    write_labels(&out.labels, &dir.join("labels.png"))?;
    write_line_overlay(panorama, &out.structural, &dir.join("lines.png"))?;
    Ok(())
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::Format(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }
}
