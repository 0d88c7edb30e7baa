use std::path::{Path, PathBuf};

use anyhow::{Context, Result, anyhow};
use clap::ValueEnum;
use nalgebra::DVector;
use psm_core::datagen::{self, Family, GenSpec, Shift};
use psm_core::dataset::{self, DatasetKind, DatasetMeta};
use psm_core::fitting::{self, FitConfig, Submanifold};
use psm_core::geometry::{self, Chart, Point};
use psm_core::shape;
use psm_core::stats::{self, KernelKind, KernelSpec};
use psm_core::viz::{self, ShapesFile};

use crate::UsageError;
use crate::args::{ChartArg, FitArgs, GenerateArgs, KernelArg, ShapesArgs, StartMode};
use crate::config::ConfigFile;

const MEAN_TOL: f64 = 1e-12;
const MEAN_MAX_ITER: usize = 1000;
const DEFAULT_GRID_SIDE: usize = 9;

/// Settings shared by every command.
pub struct Global {
    pub seed: u64,
    pub out: PathBuf,
    pub quiet: bool,
}

/// Files written so far; removed again unless the run commits.
struct Outputs {
    paths: Vec<PathBuf>,
    done: bool,
}

impl Outputs {
    fn new() -> Self {
        Outputs { paths: Vec::new(), done: false }
    }

    fn track(&mut self, path: PathBuf) -> PathBuf {
        self.paths.push(path.clone());
        path
    }

    fn commit(mut self) {
        self.done = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.done {
            for p in &self.paths {
                let _ = std::fs::remove_file(p);
            }
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn generate(args: GenerateArgs, g: &Global, cfg: &ConfigFile) -> Result<()> {
    let family = cfg.pick(args.family, "family", str::parse::<Family>)?.unwrap_or(Family::SCurve);
    let n = cfg.pick_str(args.n, "n")?.unwrap_or(200);
    let mut spec = GenSpec::new(family, n, g.seed);
    for (i, (flag, key)) in [(args.a, "a"), (args.b, "b"), (args.c, "c")].into_iter().enumerate() {
        if let Some(v) = cfg.pick_str(flag, key)? {
            spec.semi_axes[i] = v;
        }
    }
    spec.surface = cfg.flag(args.surface, "surface")?;
    if let Some(v) = cfg.pick_str(args.noise_level, "noise_level")? {
        spec.noise_level = v;
    }
    if let Some(v) = cfg.pick_str(args.noise_scale_u, "noise_scale_u")? {
        spec.noise_scale_u = v;
    }
    // a flag for one lift mode overrides a config entry for the other
    let (margin, shift_c) = if args.margin.is_some() || args.shift_c.is_some() {
        (args.margin, args.shift_c)
    } else {
        (cfg.pick_str(None, "margin")?, cfg.pick_str(None, "shift_c")?)
    };
    spec.shift = match (margin, shift_c) {
        (Some(_), Some(_)) => return Err(UsageError("margin and shift_c are mutually exclusive".into()).into()),
        (Some(m), None) => Shift::Feasible(m),
        (None, Some(c)) => Shift::Fixed(c),
        (None, None) => Shift::default(),
    };
    spec.validate().map_err(|e| UsageError(e.to_string()))?;

    let d = datagen::generate(&spec)?;
    ensure_dir(&g.out)?;
    let mut outputs = Outputs::new();
    let path = outputs.track(g.out.join("dataset.csv"));
    outputs.track(dataset::sidecar_path(&path));
    dataset::write_dataset(&path, &d.points, &DatasetMeta::generated(&d))?;
    let (back, _) = dataset::read_dataset(&path, Chart::Sphere)?;
    if back.len() != d.points.len() {
        return Err(anyhow!("{}: read back {} of {} points", path.display(), back.len(), d.points.len()));
    }
    outputs.commit();
    if !g.quiet {
        println!(
            "{family}: {n} points on S^3 (seed {}, C = {:.6}) -> {}",
            g.seed,
            d.lift_constant,
            path.display()
        );
    }
    Ok(())
}

pub fn shapes(args: ShapesArgs, g: &Global) -> Result<()> {
    let configs = shape::read_landmark_file(&args.input)?;
    let aligned = shape::align_dataset(&configs)?;
    let k = configs[0].k();
    let ids = configs.iter().map(|c| c.specimen_id.clone()).collect();
    let meta = DatasetMeta::preshape(k, ids, &aligned.mean, aligned.iterations);

    ensure_dir(&g.out)?;
    let mut outputs = Outputs::new();
    let path = outputs.track(g.out.join("preshapes.csv"));
    outputs.track(dataset::sidecar_path(&path));
    dataset::write_dataset(&path, &aligned.points, &meta)?;
    let (back, _) = dataset::read_dataset(&path, Chart::Sphere)?;
    if back.len() != aligned.points.len() {
        return Err(anyhow!("{}: read back {} of {} points", path.display(), back.len(), aligned.points.len()));
    }
    outputs.commit();
    if !g.quiet {
        println!(
            "{} specimens, {k} landmarks -> S^{} ({} alignment iterations) -> {}",
            configs.len(),
            2 * k - 1,
            aligned.iterations,
            path.display()
        );
    }
    Ok(())
}

struct FitRun {
    data: Vec<Point>,
    meta: Option<DatasetMeta>,
    start_kind: &'static str,
    sub: Submanifold,
    grid_side: usize,
}

fn fit_config(args: &FitArgs, cfg: &ConfigFile) -> Result<FitConfig, UsageError> {
    let mut fc = FitConfig::default();
    if let Some(v) = cfg.pick_str(args.epsilon, "epsilon")? {
        fc.epsilon = v;
    }
    if let Some(v) = cfg.pick_str(args.delta, "delta")? {
        fc.delta = v;
    }
    let kind = cfg.pick(args.kernel, "kernel", |s| KernelArg::from_str(s, true))?;
    if let Some(kind) = kind {
        fc.kernel.kind = match kind {
            KernelArg::Uniform => KernelKind::UniformBall,
            KernelArg::Gaussian => KernelKind::Gaussian,
        };
    }
    if let Some(h) = cfg.pick_str(args.bandwidth, "bandwidth")? {
        fc.kernel = KernelSpec::new(fc.kernel.kind, h).map_err(|e| UsageError(e.to_string()))?;
    }
    if let Some(v) = cfg.pick_str(args.directions, "directions")? {
        fc.num_directions = v;
    }
    if let Some(v) = cfg.pick_str(args.max_length, "max_length")? {
        fc.max_net_length = v;
    }
    if let Some(v) = cfg.pick_str(args.k, "k")? {
        fc.dim = v;
    }
    fc.validate().map_err(|e| UsageError(e.to_string()))?;
    Ok(fc)
}

fn parse_coords(s: &str) -> Result<Vec<f64>, UsageError> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| UsageError(format!("--coords: `{}`: {e}", t.trim()))))
        .collect()
}

fn run_fit(args: &FitArgs, cfg: &ConfigFile) -> Result<FitRun> {
    let fc = fit_config(args, cfg)?;
    let chart = cfg.pick(args.chart, "chart", |s| ChartArg::from_str(s, true))?;
    let (data, meta) = match chart {
        None => dataset::read_dataset(&args.data, Chart::Sphere)?,
        Some(c) => {
            let chart = match c {
                ChartArg::Sphere => Chart::Sphere,
                ChartArg::Flat => Chart::Flat,
            };
            let side = dataset::sidecar_path(&args.data);
            let meta = if side.exists() { Some(dataset::read_meta(&side)?) } else { None };
            (dataset::read_points_csv(&args.data, chart)?, meta)
        }
    };
    if data.is_empty() {
        return Err(anyhow!("{}: no data points", args.data.display()));
    }
    let grid_side = cfg.pick_str(args.grid_side, "grid_side")?.unwrap_or(DEFAULT_GRID_SIDE);
    if grid_side.is_multiple_of(2) {
        return Err(UsageError(format!("grid_side must be odd, got {grid_side}")).into());
    }

    let mode = cfg.pick(args.start, "start", |s| StartMode::from_str(s, true))?.unwrap_or(StartMode::Mean);
    let coords = cfg.pick_str(args.coords.clone(), "coords")?;
    let start = match (mode, coords) {
        (StartMode::Mean, None) => stats::frechet_mean(&data, MEAN_TOL, MEAN_MAX_ITER).context("computing the start point")?,
        (StartMode::Mean, Some(_)) => return Err(UsageError("coords requires start = custom".into()).into()),
        (StartMode::Custom, None) => return Err(UsageError("start = custom requires coords".into()).into()),
        (StartMode::Custom, Some(s)) => {
            let v = parse_coords(&s)?;
            let dim = data[0].ambient_dim();
            if v.len() != dim {
                return Err(UsageError(format!("coords has {} entries, data have {dim}", v.len())).into());
            }
            let v = DVector::from_vec(v);
            match data[0].chart() {
                Chart::Sphere => geometry::project_to_sphere(&v),
                Chart::Flat => Point::flat(v),
            }
            .map_err(|e| UsageError(format!("coords: {e}")))?
        }
    };
    let start_kind = match mode {
        StartMode::Mean => "mean",
        StartMode::Custom => "custom",
    };
    let sub = fitting::fit_submanifold(&data, &start, &fc)?;
    Ok(FitRun { data, meta, start_kind, sub, grid_side })
}

fn print_summary(run: &FitRun) -> Result<()> {
    let sub = &run.sub;
    let score = fitting::variation_score(sub, &run.data)?;
    println!(
        "fit: {} points, k = {}, {} nets, eps = {}, delta = {}, start = {}",
        run.data.len(),
        sub.config.dim,
        sub.nets.len(),
        sub.config.epsilon,
        sub.config.delta,
        run.start_kind
    );
    for (net, s) in sub.nets.iter().zip(&score.per_net) {
        println!(
            "net {:>4}: levels {:>4}  length {:.6}  score {:.6e}  stop {}",
            net.direction_index,
            net.levels(),
            fitting::net_length(net),
            s,
            net.stop_reason
        );
    }
    println!("variation score: {:.10e}", score.total);
    Ok(())
}

fn write_exports(run: &FitRun, out: &Path, geodesics: bool, quiet: bool) -> Result<()> {
    let sub = &run.sub;
    let proj = viz::project_submanifold(sub, &run.data, &sub.config.kernel).context("projecting onto the top three eigenvectors")?;
    let pds = viz::principal_directions(sub);
    let mut rows = viz::projected_rows(&proj, &pds);
    let mut deviations = Vec::new();
    if geodesics {
        for pd in pds.iter().take(2.min(sub.config.dim)) {
            let g = viz::geodesic_baseline(sub, pd, pd.number)?;
            deviations.push((pd.label(), viz::max_deviation(&pd.points, &g)?));
            rows.extend(viz::geodesic_rows(&proj, pd, &g));
        }
    }
    let is_shape = run.meta.as_ref().is_some_and(|m| m.kind == DatasetKind::Preshape);
    let shapes = if is_shape {
        Some(ShapesFile::from_grid(&viz::shape_grid(sub, run.grid_side)?, run.start_kind))
    } else {
        None
    };

    ensure_dir(out)?;
    let mut outputs = Outputs::new();
    let sm = outputs.track(out.join("submanifold.csv"));
    viz::write_submanifold_csv(&sm, sub)?;
    let expected: usize = sub.nets.iter().map(|n| n.points.len()).sum();
    if viz::read_submanifold_csv(&sm)?.len() != expected {
        return Err(anyhow!("{}: row count mismatch on read back", sm.display()));
    }
    let pp = outputs.track(out.join("projected.csv"));
    viz::write_projected_csv(&pp, &rows)?;
    if viz::read_projected_csv(&pp)? != rows {
        return Err(anyhow!("{}: contents differ on read back", pp.display()));
    }
    if let Some(file) = &shapes {
        let sj = outputs.track(out.join("shapes.json"));
        viz::write_shapes_json(&sj, file)?;
        if &viz::read_shapes_json(&sj)? != file {
            return Err(anyhow!("{}: contents differ on read back", sj.display()));
        }
    }
    outputs.commit();
    if !quiet {
        for (label, d) in deviations {
            println!("{label} vs principal geodesic: max deviation {d:.6e}");
        }
        println!("wrote {}", out.display());
    }
    Ok(())
}

pub fn fit(args: FitArgs, g: &Global, cfg: &ConfigFile, geodesics: bool) -> Result<()> {
    let run = run_fit(&args, cfg)?;
    if !g.quiet {
        print_summary(&run)?;
    }
    write_exports(&run, &g.out, geodesics, g.quiet)
}
