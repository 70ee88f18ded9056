//! Benchmark harness: every scene run `repeats` times with distinct seeds,
//! per mode and hypothesis budget, summarised by medians.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Stage, StageExt};
use crate::io::{create_dir, load_inputs, read_json, scene_inputs, write_json};
use crate::pipeline::{run_pipeline_sweep, InputPaths, Mode, PipelineConfig, PipelineInputs};
use crate::synthetic::{synthetic_inputs, SceneSpec, DEFAULT_EDGE_SIGMA_PX};

/// Budgets of the hypothesis sweep.
pub const N_H_SWEEP: [usize; 7] = [5, 10, 20, 40, 60, 80, 100];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub repeats: usize,
    /// Seed of the first repeat; repeat `r` uses `base_seed + r`.
    pub base_seed: u64,
    pub n_h_values: Vec<usize>,
    pub modes: Vec<Mode>,
    pub pipeline: PipelineConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            repeats: 10,
            base_seed: 0,
            n_h_values: vec![100],
            modes: vec![Mode::GeometryDl],
            pipeline: PipelineConfig::default(),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::invalid("repeats must be at least 1"));
        }
        if self.n_h_values.is_empty() || self.n_h_values.contains(&0) {
            return Err(Error::invalid("need at least one N_h, all >= 1"));
        }
        if self.modes.is_empty() {
            return Err(Error::invalid("need at least one mode"));
        }
        self.pipeline.validate()
    }
}

/// A named scene held in memory. Ground-truth labels are required.
#[derive(Debug, Clone)]
pub struct BenchScene {
    pub name: String,
    pub inputs: PipelineInputs,
}

impl BenchScene {
    pub fn synthetic(spec: &SceneSpec, rows: usize) -> Result<Self> {
        Ok(BenchScene {
            name: format!("w{}_s{}", spec.walls(), spec.seed),
            inputs: synthetic_inputs(spec, rows, DEFAULT_EDGE_SIGMA_PX)?,
        })
    }

    /// A scene directory: either one written by `synth` (with a
    /// manifest), or any directory holding `panorama.png` and optionally
    /// `edge_map.png`, `normals.png`, `gt_labels.png`.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let paths = if dir.join("manifest.json").exists() {
            scene_inputs(dir)?
        } else {
            let opt = |name: &str| Some(dir.join(name)).filter(|p| p.exists());
            InputPaths {
                panorama: Some(dir.join("panorama.png")),
                edge_map: opt("edge_map.png"),
                normal_map: opt("normals.png"),
                gt_labels: opt("gt_labels.png"),
            }
        };
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string());
        Ok(BenchScene {
            name,
            inputs: load_inputs(&paths)?,
        })
    }
}

/// One pipeline run of one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scene: String,
    pub mode: Mode,
    pub n_h: usize,
    pub repeat: usize,
    pub seed: u64,
    pub eop: f64,
    pub score: f64,
    pub walls: usize,
    pub lines_classified: usize,
    pub lines_kept: usize,
    pub corners: usize,
    pub hypotheses: usize,
    pub ms_lines: f64,
    pub ms_filter: f64,
    pub ms_corners: f64,
    pub ms_hypotheses: f64,
    pub ms_evaluate: f64,
    pub ms_total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub median: f64,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        let n = values.len();
        let median = median(values)?;
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Summary {
            count: n,
            median,
            mean,
            std,
        })
    }
}

/// Median of `values`; the mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mut v = values.to_vec();
    let (lower, &mut mid, _) = v.select_nth_unstable_by(n / 2, f64::total_cmp);
    if n % 2 == 1 {
        return Some(mid);
    }
    let below = lower
        .iter()
        .copied()
        .max_by(f64::total_cmp)
        .expect("n >= 2");
    Some(0.5 * (below + mid))
}

/// Repeats of one scene under one mode and budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSummary {
    pub scene: String,
    pub mode: Mode,
    pub n_h: usize,
    pub eop: Summary,
    pub ms_total: Summary,
}

/// All scenes under one mode and budget; `eop` summarises the per-scene
/// medians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub mode: Mode,
    pub n_h: usize,
    pub scenes: usize,
    pub eop: Summary,
    /// Over every run rather than per-scene medians.
    pub eop_all_runs: Summary,
    pub ms_total: Summary,
    pub median_lines_classified: f64,
    pub median_lines_kept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub repeats: usize,
    pub runs: Vec<RunRecord>,
    pub scenes: Vec<SceneSummary>,
    pub groups: Vec<GroupSummary>,
}

impl BenchReport {
    pub fn group(&self, mode: Mode, n_h: usize) -> Option<&GroupSummary> {
        self.groups.iter().find(|g| g.mode == mode && g.n_h == n_h)
    }

    /// Run records as CSV, one row per run.
    pub fn runs_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.runs {
            w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
    }

    /// Group summaries as CSV.
    pub fn groups_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Format(e.to_string());
        w.write_record([
            "mode",
            "n_h",
            "scenes",
            "eop_median",
            "eop_mean",
            "eop_std",
            "ms_total_median",
            "lines_classified_median",
            "lines_kept_median",
        ])
        .map_err(err)?;
        for g in &self.groups {
            w.write_record([
                g.mode.to_string(),
                g.n_h.to_string(),
                g.scenes.to_string(),
                g.eop.median.to_string(),
                g.eop.mean.to_string(),
                g.eop.std.to_string(),
                g.ms_total.median.to_string(),
                g.median_lines_classified.to_string(),
                g.median_lines_kept.to_string(),
            ])
            .map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
    }

    /// `report.json`, `runs.csv` and `summary.csv` in `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        create_dir(dir)?;
        let json = dir.join("report.json");
        write_json(self, &json)?;
        let mut paths = vec![json];
        for (name, text) in [
            ("runs.csv", self.runs_csv()?),
            ("summary.csv", self.groups_csv()?),
        ] {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|source| Error::Io {
                path: p.clone(),
                source,
            })?;
            paths.push(p);
        }
        Ok(paths)
    }

    pub fn read(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

fn run_scene(
    scene: &BenchScene,
    mode: Mode,
    repeat: usize,
    cfg: &BenchConfig,
) -> Result<Vec<RunRecord>> {
    let seed = cfg.base_seed + repeat as u64;
    let mut pcfg = cfg.pipeline.clone().with_seed(seed);
    pcfg.use_edge_map = mode == Mode::GeometryDl;
    let outs = run_pipeline_sweep(&scene.inputs, &pcfg, &cfg.n_h_values).map_err(|e| {
        Error::Estimation(format!("scene {} ({mode}, seed {seed}): {e}", scene.name))
    })?;
    outs.into_iter()
        .zip(&cfg.n_h_values)
        .map(|(out, &n_h)| {
            let r = out.report;
            if r.mode != mode {
                return Err(Error::invalid(format!(
                    "scene {} has no edge map for {mode}",
                    scene.name
                )));
            }
            Ok(RunRecord {
                scene: scene.name.clone(),
                mode,
                n_h,
                repeat,
                seed,
                eop: r.eop_gt.expect("checked before running"),
                score: r.score,
                walls: out.best.wall_count(),
                lines_classified: r.lines_classified,
                lines_kept: r.lines_kept,
                corners: r.corners,
                hypotheses: r.hypotheses,
                ms_lines: r.timings.lines,
                ms_filter: r.timings.filter,
                ms_corners: r.timings.corners,
                ms_hypotheses: r.timings.hypotheses,
                ms_evaluate: r.timings.evaluate,
                ms_total: r.timings.total,
            })
        })
        .collect()
}

/// Run every scene `cfg.repeats` times per mode. Every repeat evaluates
/// all budgets of `cfg.n_h_values` from one hypothesis set.
pub fn bench(scenes: &[BenchScene], cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate().stage(Stage::Bench)?;
    if scenes.is_empty() {
        return Err(Error::invalid("no scenes").at(Stage::Bench));
    }
    if let Some(s) = scenes.iter().find(|s| s.inputs.gt.is_none()) {
        return Err(
            Error::invalid(format!("scene {} has no ground-truth labels", s.name)).at(Stage::Bench),
        );
    }
    let tasks: Vec<(usize, Mode, usize)> = (0..scenes.len())
        .flat_map(|s| {
            cfg.modes
                .iter()
                .flat_map(move |&m| (0..cfg.repeats).map(move |r| (s, m, r)))
        })
        .collect();
    let per_task = tasks
        .par_iter()
        .map(|&(s, m, r)| run_scene(&scenes[s], m, r, cfg))
        .collect::<Result<Vec<_>>>()
        .stage(Stage::Bench)?;
    Ok(summarise(
        cfg.repeats,
        per_task.into_iter().flatten().collect(),
    ))
}

/// Build scene and group summaries from run records.
pub fn summarise(repeats: usize, runs: Vec<RunRecord>) -> BenchReport {
    let mut keys: Vec<(Mode, usize)> = Vec::new();
    let mut scene_keys: Vec<(&str, Mode, usize)> = Vec::new();
    for r in &runs {
        if !keys.contains(&(r.mode, r.n_h)) {
            keys.push((r.mode, r.n_h));
        }
        if !scene_keys.contains(&(&r.scene, r.mode, r.n_h)) {
            scene_keys.push((&r.scene, r.mode, r.n_h));
        }
    }
    let scenes: Vec<SceneSummary> = scene_keys
        .iter()
        .map(|&(scene, mode, n_h)| {
            let sel: Vec<&RunRecord> = runs
                .iter()
                .filter(|r| r.scene == scene && r.mode == mode && r.n_h == n_h)
                .collect();
            let eops: Vec<f64> = sel.iter().map(|r| r.eop).collect();
            let ms: Vec<f64> = sel.iter().map(|r| r.ms_total).collect();
            SceneSummary {
                scene: scene.to_string(),
                mode,
                n_h,
                eop: Summary::of(&eops).expect("at least one run"),
                ms_total: Summary::of(&ms).expect("at least one run"),
            }
        })
        .collect();
    let groups = keys
        .iter()
        .map(|&(mode, n_h)| {
            let medians: Vec<f64> = scenes
                .iter()
                .filter(|s| s.mode == mode && s.n_h == n_h)
                .map(|s| s.eop.median)
                .collect();
            let sel: Vec<&RunRecord> = runs
                .iter()
                .filter(|r| r.mode == mode && r.n_h == n_h)
                .collect();
            let col = |f: fn(&RunRecord) -> f64| sel.iter().map(|r| f(r)).collect::<Vec<_>>();
            GroupSummary {
                mode,
                n_h,
                scenes: medians.len(),
                eop: Summary::of(&medians).expect("at least one scene"),
                eop_all_runs: Summary::of(&col(|r| r.eop)).expect("at least one run"),
                ms_total: Summary::of(&col(|r| r.ms_total)).expect("at least one run"),
                median_lines_classified: median(&col(|r| r.lines_classified as f64))
                    .expect("at least one run"),
                median_lines_kept: median(&col(|r| r.lines_kept as f64)).expect("at least one run"),
            }
        })
        .collect();
    BenchReport {
        repeats,
        runs,
        scenes,
        groups,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sorted_median(values: &[f64]) -> f64 {
        let mut v = values.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        }
    }

    #[test]
    fn median_small_cases() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[0.7]), Some(0.7));
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), Some(2.5));
    }

    proptest! {
        #[test]
        fn median_matches_sort_oracle(v in prop::collection::vec(-10.0f64..10.0, 1..40)) {
            prop_assert_eq!(median(&v).unwrap(), sorted_median(&v));
        }
    }

    #[test]
    fn summary_std() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((s.count, s.median, s.mean), (4, 2.5, 2.5));
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(Summary::of(&[0.3]).unwrap().std, 0.0);
    }

    fn record(scene: &str, repeat: usize, eop: f64) -> RunRecord {
        RunRecord {
            scene: scene.into(),
            mode: Mode::GeometryDl,
            n_h: 10,
            repeat,
            seed: repeat as u64,
            eop,
            score: eop,
            walls: 4,
            lines_classified: 12,
            lines_kept: 4,
            corners: 8,
            hypotheses: 10,
            ms_lines: 1.0,
            ms_filter: 0.0,
            ms_corners: 0.0,
            ms_hypotheses: 1.0,
            ms_evaluate: 1.0,
            ms_total: 3.0,
        }
    }

    #[test]
    fn group_median_is_over_scene_medians() {
        let runs = vec![
            record("a", 0, 0.9),
            record("a", 1, 0.8),
            record("a", 2, 1.0),
            record("b", 0, 0.5),
            record("b", 1, 0.6),
            record("b", 2, 0.4),
        ];
        let rep = summarise(3, runs);
        assert_eq!(rep.scenes.len(), 2);
        assert!(rep.scenes.iter().all(|s| s.eop.count == 3));
        let g = rep.group(Mode::GeometryDl, 10).unwrap();
        assert!((g.eop.median - 0.7).abs() < 1e-12);
        assert!((g.eop_all_runs.median - 0.7).abs() < 1e-12);
        assert_eq!(rep.runs_csv().unwrap().lines().count(), 7);
        assert_eq!(rep.groups_csv().unwrap().lines().count(), 2);
    }

    #[test]
    fn single_repeat_median_is_the_run() {
        let scene = BenchScene::synthetic(&SceneSpec::random(4, 0, 3).unwrap(), 128).unwrap();
        let cfg = BenchConfig {
            repeats: 1,
            n_h_values: vec![5, 20],
            ..Default::default()
        };
        let rep = bench(std::slice::from_ref(&scene), &cfg).unwrap();
        assert_eq!(rep.runs.len(), 2);
        for s in &rep.scenes {
            let run = rep.runs.iter().find(|r| r.n_h == s.n_h).unwrap();
            assert_eq!(s.eop.count, 1);
            assert_eq!(s.eop.median, run.eop);
        }
    }

    #[test]
    fn missing_ground_truth_is_rejected() {
        let mut scene = BenchScene::synthetic(&SceneSpec::unit_box(), 64).unwrap();
        scene.inputs.gt = None;
        let err = bench(&[scene], &BenchConfig::default()).unwrap_err();
        assert_eq!(err.stage(), Some(Stage::Bench));
        assert!(bench(&[], &BenchConfig::default()).is_err());
    }
}
