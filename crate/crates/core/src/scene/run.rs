//! Run orchestration and file output.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::contact::ContactKey;
use crate::error::{Error, Result};
use crate::solver::World;

use super::config::SceneConfig;
use super::metrics::{blocks_path, collapse_metric, runout_metric, soil_path, BlockPose, CollapseReport};

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Overrides the scene's `t_end`.
    pub t_end: Option<f64>,
    /// Overrides the scene's snapshot interval.
    pub snapshot_interval: Option<f64>,
    /// Run log cadence in steps.
    pub log_every: u64,
    /// Print progress lines to stderr.
    pub verbose: bool,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            out_dir: out_dir.into(),
            t_end: None,
            snapshot_interval: None,
            log_every: 500,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub scene: String,
    pub soil_particles: usize,
    pub blocks: usize,
    pub settling_steps: u64,
    pub steps: u64,
    pub t_end: f64,
    pub snapshots: usize,
    pub collapse: Option<CollapseReport>,
    pub runout_initial: Option<f64>,
    pub runout: Option<f64>,
    pub kinetic_energy: f64,
    /// Largest kinetic energy of a single particle or block at the end.
    pub max_entity_kinetic_energy: f64,
    pub worst_coulomb_excess: f64,
    pub soil_mass_initial: f64,
    pub soil_mass_final: f64,
    pub wall_seconds: f64,
}

impl RunSummary {
    pub fn collapsed(&self) -> bool {
        self.collapse.is_some_and(|c| c.collapsed)
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::from("nan"), |x| format!("{x:.8e}"));
        let mut s = String::from("key,value\n");
        let _ = writeln!(s, "scene,{}", self.scene);
        let _ = writeln!(s, "soil_particles,{}", self.soil_particles);
        let _ = writeln!(s, "blocks,{}", self.blocks);
        let _ = writeln!(s, "settling_steps,{}", self.settling_steps);
        let _ = writeln!(s, "steps,{}", self.steps);
        let _ = writeln!(s, "t_end,{:.8e}", self.t_end);
        let _ = writeln!(s, "snapshots,{}", self.snapshots);
        let _ = writeln!(s, "collapsed,{}", self.collapsed());
        let _ = writeln!(s, "collapse_onset,{}", opt(self.collapse.and_then(|c| c.onset)));
        let _ = writeln!(
            s,
            "max_block_displacement,{}",
            opt(self.collapse.map(|c| c.max_displacement))
        );
        let _ = writeln!(s, "runout_initial,{}", opt(self.runout_initial));
        let _ = writeln!(s, "runout,{}", opt(self.runout));
        let _ = writeln!(s, "kinetic_energy,{:.8e}", self.kinetic_energy);
        let _ = writeln!(s, "max_entity_kinetic_energy,{:.8e}", self.max_entity_kinetic_energy);
        let _ = writeln!(s, "worst_coulomb_excess,{:.8e}", self.worst_coulomb_excess);
        let _ = writeln!(s, "soil_mass_initial,{:.8e}", self.soil_mass_initial);
        let _ = writeln!(s, "soil_mass_final,{:.8e}", self.soil_mass_final);
        let _ = writeln!(s, "wall_seconds,{:.3}", self.wall_seconds);
        s
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn io_at(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

/// Writes the soil and block tables of one snapshot.
pub fn write_snapshot(world: &World, dir: &Path, index: usize) -> Result<()> {
    let path = soil_path(dir, index);
    let mut f = create(&path)?;
    let err = io_at(&path);
    writeln!(f, "id,x,y,vx,vy,rho,mass,sxx,syy,szz,sxy,eps_p_acc").map_err(&err)?;
    let ps = &world.particles;
    for i in 0..ps.len() {
        if !ps.kind[i].is_soil() {
            continue;
        }
        let (p, v, s) = (ps.position[i], ps.velocity[i], &ps.stress[i]);
        writeln!(
            f,
            "{},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}",
            ps.id[i], p.x, p.y, v.x, v.y, ps.density[i], ps.mass[i], s.sxx, s.syy, s.szz, s.sxy, s.eps_p_acc
        )
        .map_err(&err)?;
    }
    f.flush().map_err(&err)?;

    let path = blocks_path(dir, index);
    let mut f = create(&path)?;
    let err = io_at(&path);
    writeln!(f, "id,time,width,height,cx,cy,theta,vx,vy,omega").map_err(&err)?;
    for b in &world.blocks {
        writeln!(
            f,
            "{},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}",
            b.id,
            world.time,
            b.width,
            b.height,
            b.centroid.x,
            b.centroid.y,
            b.angle,
            b.velocity.x,
            b.velocity.y,
            b.angular_velocity
        )
        .map_err(&err)?;
    }
    f.flush().map_err(&err)
}

fn key_str(k: ContactKey) -> String {
    match k {
        ContactKey::Particle(id) => format!("p{id}"),
        ContactKey::Block { block, index } => format!("b{block}:{index}"),
    }
}

struct Outputs {
    dir: PathBuf,
    log: BufWriter<File>,
    index: BufWriter<File>,
    audit: Option<BufWriter<File>>,
    snapshots: usize,
}

impl Outputs {
    fn open(dir: &Path, audit: bool) -> Result<Self> {
        let snaps = dir.join("snapshots");
        std::fs::create_dir_all(&snaps).map_err(|e| Error::io(&snaps, e))?;
        let log_path = dir.join("run_log.csv");
        let mut log = create(&log_path)?;
        writeln!(log, "phase,step,time,dt,kinetic_energy,max_speed,contacts,coulomb_excess")
            .map_err(io_at(&log_path))?;
        let index_path = snaps.join("index.csv");
        let mut index = create(&index_path)?;
        writeln!(index, "index,time").map_err(io_at(&index_path))?;
        let audit = if audit {
            let p = dir.join("contact_audit.csv");
            let mut f = create(&p)?;
            writeln!(f, "step,time,a,i,delta_n,nx,ny,normal,shear,capped").map_err(io_at(&p))?;
            Some(f)
        } else {
            None
        };
        Ok(Self {
            dir: dir.to_path_buf(),
            log,
            index,
            audit,
            snapshots: 0,
        })
    }

    fn log(&mut self, phase: &str, w: &World) -> Result<()> {
        let s = &w.stats;
        writeln!(
            self.log,
            "{phase},{},{:.8e},{:.8e},{:.8e},{:.8e},{},{:.8e}",
            w.step_count, w.time, s.dt, s.kinetic_energy, s.max_speed, s.active_contacts, s.coulomb_excess
        )
        .map_err(|e| Error::io(self.dir.join("run_log.csv"), e))
    }

    fn snapshot(&mut self, w: &World) -> Result<()> {
        write_snapshot(w, &self.dir, self.snapshots)?;
        writeln!(self.index, "{},{:.8e}", self.snapshots, w.time)
            .map_err(|e| Error::io(self.dir.join("snapshots/index.csv"), e))?;
        self.index
            .flush()
            .map_err(|e| Error::io(self.dir.join("snapshots/index.csv"), e))?;
        if let (Some(f), Some(rows)) = (self.audit.as_mut(), w.audit.as_ref()) {
            for r in rows {
                writeln!(
                    f,
                    "{},{:.8e},{},{},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{}",
                    r.step,
                    w.time,
                    key_str(r.a),
                    key_str(r.i),
                    r.delta_n,
                    r.direction.x,
                    r.direction.y,
                    r.normal,
                    r.shear,
                    r.capped as u8
                )
                .map_err(|e| Error::io(self.dir.join("contact_audit.csv"), e))?;
            }
        }
        self.snapshots += 1;
        Ok(())
    }

    fn finish(&mut self) -> Result<()> {
        let p = self.dir.join("run_log.csv");
        self.log.flush().map_err(io_at(&p))?;
        if let Some(f) = self.audit.as_mut() {
            f.flush().map_err(|e| Error::io(self.dir.join("contact_audit.csv"), e))?;
        }
        Ok(())
    }
}

/// Settles the scene, removes the stopper at `t = 0` and runs to `t_end`,
/// writing snapshots, the run log and `summary.csv` into the output
/// directory.
pub fn run(cfg: &SceneConfig, opts: &RunOptions) -> Result<RunSummary> {
    let started = Instant::now();
    let mut cfg = cfg.clone();
    if let Some(t) = opts.t_end {
        cfg.controls.t_end = t;
    }
    if let Some(s) = opts.snapshot_interval {
        cfg.controls.snapshot_interval = s;
    }
    cfg.controls.validate()?;
    let dir = &opts.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let scene_path = dir.join("scene.scene");
    std::fs::write(&scene_path, cfg.serialize()).map_err(|e| Error::io(&scene_path, e))?;

    let mut world = cfg.build_world()?;
    let mut out = Outputs::open(dir, cfg.contact_audit)?;
    let soil_mass_initial = world.particles.soil_mass();
    let left = cfg.polygon()?.bounding_box().0.x;
    let log_every = opts.log_every.max(1);

    let result = drive(&mut world, &mut out, &cfg, log_every, opts.verbose);
    out.finish()?;
    let (settling_steps, history) = result?;

    let runout_initial = history.first().and_then(|(_, b)| runout_metric(b, left).ok());
    let runout = history.last().and_then(|(_, b)| runout_metric(b, left).ok());
    let collapse = match &cfg.blocks {
        Some(b) if history.len() >= 2 => Some(collapse_metric(&history, b.width)?),
        _ => None,
    };
    let summary = RunSummary {
        scene: cfg.name.clone(),
        soil_particles: world.particles.soil_count(),
        blocks: world.blocks.len(),
        settling_steps,
        steps: world.step_count - settling_steps,
        t_end: world.time,
        snapshots: out.snapshots,
        collapse,
        runout_initial,
        runout,
        kinetic_energy: world.kinetic_energy(),
        max_entity_kinetic_energy: world.max_entity_kinetic_energy(),
        worst_coulomb_excess: world.stats.worst_coulomb_excess,
        soil_mass_initial,
        soil_mass_final: world.particles.soil_mass(),
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    let path = dir.join("summary.csv");
    std::fs::write(&path, summary.to_csv()).map_err(|e| Error::io(&path, e))?;
    Ok(summary)
}

type History = Vec<(f64, Vec<BlockPose>)>;

fn poses(w: &World) -> Vec<BlockPose> {
    w.blocks.iter().map(BlockPose::from).collect()
}

fn drive(
    world: &mut World,
    out: &mut Outputs,
    cfg: &SceneConfig,
    log_every: u64,
    verbose: bool,
) -> Result<(u64, History)> {
    let wall = Instant::now();
    // settling, from −duration up to exactly 0
    while world.time < 0.0 {
        let dt = world.stable_dt().min(-world.time);
        world.step_with(dt)?;
        if world.time > -1e-12 {
            world.time = 0.0;
        }
        if world.step_count.is_multiple_of(log_every) {
            out.log("settle", world)?;
        }
    }
    let settling_steps = world.step_count;
    world.time = 0.0;
    world.release()?;
    out.log("release", world)?;
    out.snapshot(world)?;
    let mut history = vec![(world.time, poses(world))];

    let t_end = cfg.controls.t_end;
    let interval = cfg.controls.snapshot_interval;
    let mut next = 1usize;
    while world.time < t_end {
        let target = (next as f64 * interval).min(t_end);
        let dt = world.stable_dt().min(target - world.time);
        world.step_with(dt)?;
        if (target - world.time).abs() <= 1e-12 * target.max(1.0) {
            world.time = target;
        }
        if world.step_count.is_multiple_of(log_every) {
            out.log("run", world)?;
        }
        if world.time >= target {
            out.log("snapshot", world)?;
            out.snapshot(world)?;
            history.push((world.time, poses(world)));
            next += 1;
            if verbose {
                eprintln!(
                    "t = {:.3} s  step {}  KE {:.3e} J/m  vmax {:.3e} m/s  ({:.0} s)",
                    world.time,
                    world.step_count,
                    world.stats.kinetic_energy,
                    world.stats.max_speed,
                    wall.elapsed().as_secs_f64()
                );
            }
        }
    }
    Ok((settling_steps, history))
}
