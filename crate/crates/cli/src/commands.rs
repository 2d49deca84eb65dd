use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use serde::Serialize;
use voidmap::io::{
    labels_file_name, list_scans, load_sequence, read_labels, read_pcd, write_labels, write_pcd, write_sequence,
    CloudFile, DataMode, Mode, RunConfig,
};
use voidmap::synth::{generate, SceneSpec};
use voidmap::{
    confusion, export_cleaned, run_offline, run_online, LabeledSequence, Params, PointLabel, PosedScan, ScanLabels,
};

use crate::report::{AblationRow, Counts, MetricsReport, ParamsEcho, RunReport, ScanEntry, Timing};
use crate::{AblateArgs, EvalArgs, RunArgs, SynthArgs};

fn data_mode(ascii: bool) -> DataMode {
    if ascii {
        DataMode::Ascii
    } else {
        DataMode::Binary
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn cloud_of(points: &[voidmap::Point3<f64>]) -> CloudFile {
    CloudFile {
        points: points.iter().map(|p| [p.x as f32, p.y as f32, p.z as f32]).collect(),
        labels: None,
        viewpoint: None,
    }
}

fn ground_truth(scans: &[PosedScan]) -> Result<LabeledSequence> {
    LabeledSequence::ground_truth(scans)?.context("ground truth requested but some input scans have no `label` field")
}

pub fn clean(args: &RunArgs, cfg: RunConfig) -> Result<()> {
    let scans = load_sequence(&args.input.input, &args.input.pose_source()?, args.input.world_frame)?;
    let out = match cfg.mode {
        Mode::Offline => run_offline(&scans, &cfg.params)?,
        Mode::Online => run_online(&scans, &cfg.params, cfg.online_order)?,
    };

    let labels_dir = args.out.join("labels");
    fs::create_dir_all(&labels_dir).with_context(|| format!("creating {}", labels_dir.display()))?;
    for labels in &out.labels.scans {
        write_labels(labels_dir.join(labels_file_name(labels.scan_id)), labels)?;
    }
    let cleaned = export_cleaned(&scans, &out.labels)?;
    let mode = data_mode(args.ascii);
    write_pcd(args.out.join("static.pcd"), &cloud_of(&cleaned.static_points), mode)?;
    write_pcd(args.out.join("dynamic.pcd"), &cloud_of(&cleaned.dynamic_points), mode)?;

    let mut totals = Counts::default();
    let mut entries = Vec::with_capacity(scans.len());
    for (i, (scan, labels)) in scans.iter().zip(&out.labels.scans).enumerate() {
        let dynamic = labels.dynamic_count();
        let counts = Counts {
            points_in: scan.points.len(),
            retained: labels.labels.len(),
            dropped: scan.points.len() - labels.labels.len(),
            r#static: labels.labels.len() - dynamic,
            dynamic,
        };
        totals += counts;
        entries.push(ScanEntry {
            scan_id: scan.scan_id,
            integrate_seconds: out.integrate_seconds[i],
            new_voids: out.integrations[i].new_voids,
            counts,
        });
    }
    let metrics = if args.gt {
        let gt = ground_truth(&scans)?;
        Some(MetricsReport::from(confusion(&out.labels, &gt)?))
    } else {
        None
    };
    let report = RunReport {
        params: ParamsEcho::from(&cfg),
        scans: entries,
        timing: Timing::of(&out.integrate_seconds),
        totals,
        void_voxels: out.void_map.len(),
        metrics,
    };
    write_json(&args.out.join("report.json"), &report)?;

    println!(
        "{} scans, {} points: {} static, {} dynamic, {} dropped",
        scans.len(),
        totals.points_in,
        totals.r#static,
        totals.dynamic,
        totals.dropped
    );
    println!(
        "integrate per scan: {:.4} +- {:.4} s",
        report.timing.mean_seconds, report.timing.std_seconds
    );
    if let Some(m) = &report.metrics {
        println!("     SA      DA      AA\n{}", m.metrics.table_row());
    }
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let files = list_scans(&args.gt)?;
    ensure!(!files.is_empty(), "{}: no .pcd files", args.gt.display());
    let mut pred = LabeledSequence::default();
    let mut gt = LabeledSequence::default();
    for (id, path) in files {
        let cloud = read_pcd(&path)?;
        let codes = cloud
            .labels
            .with_context(|| format!("{} has no `label` field", path.display()))?;
        let predicted = read_labels(args.pred.join(labels_file_name(id)), id)?;
        let retained: Vec<usize> = cloud
            .points
            .iter()
            .enumerate()
            .filter(|(_, p)| p.iter().all(|c| c.is_finite()))
            .map(|(i, _)| i)
            .collect();
        if predicted.indices != retained {
            bail!(
                "scan {id}: {} predicted labels do not line up with the {} finite points of {}",
                predicted.indices.len(),
                retained.len(),
                path.display()
            );
        }
        let labels = retained
            .iter()
            .map(|i| {
                PointLabel::from_code(codes[*i])
                    .with_context(|| format!("{}: point {i} has label {}", path.display(), codes[*i]))
            })
            .collect::<Result<Vec<_>>>()?;
        gt.scans.push(ScanLabels {
            scan_id: id,
            indices: retained,
            labels,
        });
        pred.scans.push(predicted);
    }
    let report = MetricsReport::from(confusion(&pred, &gt)?);
    println!("{}", serde_json::to_string_pretty(&report)?);
    println!("     SA      DA      AA\n{}", report.metrics.table_row());
    if let Some(out) = &args.out {
        write_json(out, &report)?;
    }
    Ok(())
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let mut spec = SceneSpec::load(&args.spec)?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let scans = generate(&spec)?;
    write_sequence(&args.out, &scans, data_mode(args.ascii))?;
    let dynamic: usize = scans
        .iter()
        .flat_map(|s| s.ground_truth.iter().flatten())
        .filter(|l| l.is_dynamic())
        .count();
    let total: usize = scans.iter().map(|s| s.points.len()).sum();
    println!(
        "wrote {} scans ({total} points, {dynamic} dynamic) to {}",
        scans.len(),
        args.out.display()
    );
    Ok(())
}

/// The ablation settings as `(d_s, d_p, voxel_size)`.
const DEFAULT_GRID: [(f64, u32, f64); 5] = [
    (0.0, 0, 0.1),
    (0.2, 0, 0.1),
    (0.0, 1, 0.1),
    (0.2, 1, 0.2),
    (0.2, 1, 0.1),
];

fn parse_grid(text: &str) -> Result<Vec<(f64, u32, f64)>> {
    text.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|entry| {
            let parts: Vec<&str> = entry.split(',').map(str::trim).collect();
            let [ds, dp, v] = parts[..] else {
                bail!("grid entry '{entry}' must be d_s,d_p,voxel_size");
            };
            Ok((
                ds.parse().with_context(|| format!("grid entry '{entry}': d_s"))?,
                dp.parse().with_context(|| format!("grid entry '{entry}': d_p"))?,
                v.parse().with_context(|| format!("grid entry '{entry}': voxel_size"))?,
            ))
        })
        .collect()
}

pub fn ablate(args: &AblateArgs) -> Result<()> {
    let grid = match &args.grid {
        Some(text) => parse_grid(text)?,
        None => DEFAULT_GRID.to_vec(),
    };
    ensure!(!grid.is_empty(), "empty parameter grid");
    let scans = load_sequence(&args.input.input, &args.input.pose_source()?, args.input.world_frame)?;
    let gt = ground_truth(&scans)?;
    let mut rows = Vec::with_capacity(grid.len());
    println!("{:>5} {:>3} {:>5}      SA      DA      AA", "d_s", "d_p", "v");
    for (ds, dp, v) in grid {
        let mut params = Params::new(v, ds, dp);
        params.max_range = args.max_range;
        params.validate()?;
        let out = run_offline(&scans, &params)?;
        let result = MetricsReport::from(confusion(&out.labels, &gt)?);
        println!("{ds:>5.2} {dp:>3} {v:>5.2} {}", result.metrics.table_row());
        rows.push(AblationRow {
            d_s: ds,
            d_p: dp,
            voxel_size: v,
            result,
        });
    }
    if let Some(out) = &args.out {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        write_json(&out.join("ablation.json"), &rows)?;
    }
    Ok(())
}
