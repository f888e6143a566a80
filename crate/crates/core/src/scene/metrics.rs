//! Run-out and collapse metrics, and post-processing of a run directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::rigid::RigidBlock;
use crate::Vec2;

use super::config::SceneConfig;

/// Pose and velocity of one block at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockPose {
    pub id: u32,
    pub width: f64,
    pub height: f64,
    pub centroid: Vec2,
    pub angle: f64,
    pub velocity: Vec2,
    pub angular_velocity: f64,
}

impl From<&RigidBlock> for BlockPose {
    fn from(b: &RigidBlock) -> Self {
        Self {
            id: b.id,
            width: b.width,
            height: b.height,
            centroid: b.centroid,
            angle: b.angle,
            velocity: b.velocity,
            angular_velocity: b.angular_velocity,
        }
    }
}

impl BlockPose {
    /// Rightmost x of the block outline.
    pub fn right_extent(&self) -> f64 {
        let (s, c) = self.angle.sin_cos();
        let (a, b) = (0.5 * self.width, 0.5 * self.height);
        self.centroid.x + (c * a).abs() + (s * b).abs()
    }
}

/// Distance from the left boundary to the right extent of Block No. 1.
pub fn runout_metric(blocks: &[BlockPose], left_boundary: f64) -> Result<f64> {
    let first = blocks
        .iter()
        .find(|b| b.id == 0)
        .ok_or_else(|| Error::InvalidInput("block 1 is missing from the snapshot".into()))?;
    Ok(first.right_extent() - left_boundary)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseReport {
    pub collapsed: bool,
    /// First snapshot time at which the threshold was exceeded.
    pub onset: Option<f64>,
    /// Largest centroid displacement seen, any block.
    pub max_displacement: f64,
}

/// Collapse iff some block centroid moves more than `threshold` from its
/// position in the first frame.
pub fn collapse_metric(history: &[(f64, Vec<BlockPose>)], threshold: f64) -> Result<CollapseReport> {
    if history.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "collapse needs at least 2 snapshots, got {}",
            history.len()
        )));
    }
    let start = &history[0].1;
    let mut report = CollapseReport {
        collapsed: false,
        onset: None,
        max_displacement: 0.0,
    };
    for (t, frame) in &history[1..] {
        for b in frame {
            let Some(b0) = start.iter().find(|s| s.id == b.id) else {
                continue;
            };
            let d = (b.centroid - b0.centroid).norm();
            report.max_displacement = report.max_displacement.max(d);
            if d > threshold && report.onset.is_none() {
                report.collapsed = true;
                report.onset = Some(*t);
            }
        }
    }
    Ok(report)
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::InvalidInput(format!("{} is empty", path.display())))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let row = row.map_err(|_| {
            Error::InvalidInput(format!("{}: row {} is not numeric", path.display(), k + 2))
        })?;
        if row.len() != header.len() {
            return Err(Error::InvalidInput(format!(
                "{}: row {} has {} fields, header has {}",
                path.display(),
                k + 2,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

fn column(header: &[String], name: &str, path: &Path) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::InvalidInput(format!("{}: no `{name}` column", path.display())))
}

pub fn soil_path(dir: &Path, index: usize) -> PathBuf {
    dir.join("snapshots").join(format!("soil_{index:05}.csv"))
}

pub fn blocks_path(dir: &Path, index: usize) -> PathBuf {
    dir.join("snapshots").join(format!("blocks_{index:05}.csv"))
}

/// `(index, time)` of every snapshot in a run directory.
pub fn read_index(dir: &Path) -> Result<Vec<(usize, f64)>> {
    let path = dir.join("snapshots").join("index.csv");
    let (_, rows) = read_table(&path)?;
    Ok(rows.iter().map(|r| (r[0] as usize, r[1])).collect())
}

pub fn read_blocks(path: &Path) -> Result<Vec<BlockPose>> {
    let (h, rows) = read_table(path)?;
    let c = |n| column(&h, n, path);
    let (id, w, ht, cx, cy, th, vx, vy, om) = (
        c("id")?,
        c("width")?,
        c("height")?,
        c("cx")?,
        c("cy")?,
        c("theta")?,
        c("vx")?,
        c("vy")?,
        c("omega")?,
    );
    Ok(rows
        .iter()
        .map(|r| BlockPose {
            id: r[id] as u32,
            width: r[w],
            height: r[ht],
            centroid: Vec2::new(r[cx], r[cy]),
            angle: r[th],
            velocity: Vec2::new(r[vx], r[vy]),
            angular_velocity: r[om],
        })
        .collect())
}

/// Soil column `name` of one snapshot.
pub fn read_soil_column(path: &Path, name: &str) -> Result<Vec<f64>> {
    let (h, rows) = read_table(path)?;
    let k = column(&h, name, path)?;
    Ok(rows.iter().map(|r| r[k]).collect())
}

/// Per-snapshot metrics of a finished (or aborted) run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub rows: Vec<MetricsRow>,
    pub collapse: Option<CollapseReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub time: f64,
    pub runout: Option<f64>,
    pub max_plastic_strain: f64,
    pub blocks: Vec<BlockPose>,
}

/// Reads every snapshot of `dir` and writes `metrics.csv` next to them.
pub fn run_metrics(dir: &Path, collapse_threshold: Option<f64>) -> Result<RunMetrics> {
    let scene = SceneConfig::load(&dir.join("scene.scene"))?;
    let left = scene.polygon()?.bounding_box().0.x;
    let threshold = collapse_threshold
        .or_else(|| scene.blocks.as_ref().map(|b| b.width))
        .unwrap_or(f64::INFINITY);
    let mut rows = Vec::new();
    for (index, time) in read_index(dir)? {
        let blocks = read_blocks(&blocks_path(dir, index))?;
        let eps = read_soil_column(&soil_path(dir, index), "eps_p_acc")?;
        rows.push(MetricsRow {
            time,
            runout: runout_metric(&blocks, left).ok(),
            max_plastic_strain: eps.iter().copied().fold(0.0, f64::max),
            blocks,
        });
    }
    let history: Vec<(f64, Vec<BlockPose>)> = rows.iter().map(|r| (r.time, r.blocks.clone())).collect();
    let collapse = collapse_metric(&history, threshold).ok();

    let mut out = String::from("time,runout,max_plastic_strain");
    let nb = rows.first().map_or(0, |r| r.blocks.len());
    for k in 0..nb {
        let _ = write!(out, ",b{k}_cx,b{k}_cy,b{k}_theta");
    }
    out.push('\n');
    for r in &rows {
        let _ = write!(
            out,
            "{:.8e},{},{:.8e}",
            r.time,
            r.runout.map_or(String::from("nan"), |v| format!("{v:.8e}")),
            r.max_plastic_strain
        );
        for b in &r.blocks {
            let _ = write!(out, ",{:.8e},{:.8e},{:.8e}", b.centroid.x, b.centroid.y, b.angle);
        }
        out.push('\n');
    }
    let path = dir.join("metrics.csv");
    std::fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
    Ok(RunMetrics { rows, collapse })
}
