//! `beaconplace` command-line tool.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use beaconplace::coverage::build_connectivity;
use beaconplace::document::PlacementDocument;
use beaconplace::ea::{EaConfig, RELAXED_GDOP_THRESHOLD, STRICT_GDOP_THRESHOLD};
use beaconplace::gdop::{classify_band, gdop_field, GdopBand, GdopField};
use beaconplace::geometry::{discretize_domains, DroneDomain, FloorPlan, GridSpec};
use beaconplace::oracle::{brute_force_min_cover, lower_bound_parts, DEFAULT_MAX_SITES};
use beaconplace::pipeline::{solve, timing_since};
use beaconplace::plan_file::PlanFile;
use beaconplace::sim::simulate_point;
use beaconplace::PlacementError;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

const EXIT_ERROR: u8 = 1;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_NOT_CONVERGED: u8 = 4;
const EXIT_VALIDATION_FAILED: u8 = 5;

/// Upper end of the grayscale ramp in GDOP-map images; larger values are black.
const IMAGE_GDOP_MAX: f64 = 20.0;

#[derive(Parser)]
#[command(name = "beaconplace", version, about = "Ultrasonic beacon placement for indoor drone localization")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// Random seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Flight-point lattice spacing in meters (overrides the plan file).
    #[arg(long, global = true)]
    drone_res: Option<f64>,
    /// Mount-site lattice spacing in meters (overrides the plan file).
    #[arg(long, global = true)]
    beacon_res: Option<f64>,
    /// Offspring per generation.
    #[arg(long, global = true, default_value_t = 250)]
    population: usize,
    /// Survivors kept per generation; must divide the population.
    #[arg(long, global = true, default_value_t = 5)]
    survivors: usize,
    /// Required covering beacons per flight point.
    #[arg(long, global = true, default_value_t = 4)]
    k: usize,
    /// Minimum k-coverage fraction of the output placement.
    #[arg(long, global = true, default_value_t = 1.0)]
    coverage_threshold: f64,
    /// Target average GDOP [default: 20, or 5 when the coverage threshold is below 1].
    #[arg(long, global = true)]
    gdop_threshold: Option<f64>,
    /// Generation budget per stage.
    #[arg(long, global = true, default_value_t = 500)]
    max_generations: usize,
    /// Chance that a refinement offspring has one beacon nudged; 0 disables.
    #[arg(long, global = true, default_value_t = 0.1)]
    mutation_rate: f64,
    /// Worker thread cap.
    #[arg(long, global = true, env = "BEACONPLACE_THREADS")]
    threads: Option<usize>,
}

impl GlobalOpts {
    fn ea_config(&self) -> EaConfig {
        EaConfig {
            population_size: self.population,
            survivor_count: self.survivors,
            k_target: self.k,
            coverage_threshold: self.coverage_threshold,
            gdop_threshold: self.gdop_threshold.unwrap_or(if self.coverage_threshold < 1.0 {
                RELAXED_GDOP_THRESHOLD
            } else {
                STRICT_GDOP_THRESHOLD
            }),
            seed: self.seed,
            max_generations: self.max_generations,
            mutation_rate: self.mutation_rate,
            ..EaConfig::default()
        }
    }

    fn grid(&self, plan: &PlanFile) -> GridSpec {
        let mut g = plan.grid_spec();
        if let Some(r) = self.drone_res {
            g.drone_res_m = r;
        }
        if let Some(r) = self.beacon_res {
            g.beacon_res_m = r;
        }
        g
    }
}

#[derive(Subcommand)]
enum Command {
    /// Find the minimum beacon count and a low-GDOP placement.
    Solve {
        /// Floor-plan TOML file.
        plan: PathBuf,
        /// Placement file to write.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Per-point GDOP of a placement as CSV, plus an optional PGM image of
    /// the minimum GDOP over height.
    GdopMap {
        /// Floor-plan TOML file.
        plan: PathBuf,
        /// Placement JSON written by `solve`.
        placement: PathBuf,
        /// Per-point CSV to write.
        #[arg(long)]
        csv: PathBuf,
        /// Binary PGM heatmap to write.
        #[arg(long)]
        image: Option<PathBuf>,
    },
    /// Monte-Carlo localization error of a placement.
    Simulate {
        /// Floor-plan TOML file.
        plan: PathBuf,
        /// Placement JSON written by `solve`.
        placement: PathBuf,
        /// Per-point CSV report to write.
        #[arg(short, long)]
        output: PathBuf,
        /// Range noise standard deviation in meters.
        #[arg(long, default_value_t = 0.01)]
        sigma_r: f64,
        /// Noisy fixes per point.
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Simulate every n-th covered flight point.
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
    /// Lower bounds on the beacon count, and the exact optimum for small instances.
    Bounds {
        /// Floor-plan TOML file.
        plan: PathBuf,
        /// Largest site count for which the exhaustive optimum is computed.
        #[arg(long, default_value_t = DEFAULT_MAX_SITES)]
        exact_max_sites: usize,
    },
    /// Recompute a placement file's metrics and compare them with the stored values.
    Validate {
        /// Floor-plan TOML file.
        plan: PathBuf,
        /// Placement JSON written by `solve`.
        placement: PathBuf,
    },
}

#[derive(Debug)]
struct ValidationFailed;

impl std::fmt::Display for ValidationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("placement file does not match the recomputed metrics")
    }
}

impl std::error::Error for ValidationFailed {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not set thread count: {e}");
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ValidationFailed>().is_some() {
        return EXIT_VALIDATION_FAILED;
    }
    match err.chain().find_map(|e| e.downcast_ref::<PlacementError>()) {
        Some(PlacementError::Infeasible { .. }) => EXIT_INFEASIBLE,
        Some(PlacementError::NonConvergence { .. }) => EXIT_NOT_CONVERGED,
        _ => EXIT_ERROR,
    }
}

fn run(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Solve { plan, output } => cmd_solve(g, plan, output),
        Command::GdopMap {
            plan,
            placement,
            csv,
            image,
        } => cmd_gdop_map(plan, placement, csv, image.as_deref()),
        Command::Simulate {
            plan,
            placement,
            output,
            sigma_r,
            trials,
            stride,
        } => cmd_simulate(g, plan, placement, output, *sigma_r, *trials, *stride),
        Command::Bounds { plan, exact_max_sites } => cmd_bounds(g, plan, *exact_max_sites),
        Command::Validate { plan, placement } => cmd_validate(plan, placement),
    }
}

fn load_plan(path: &Path) -> Result<PlanFile> {
    Ok(PlanFile::load(path)?)
}

fn load_placement(path: &Path) -> Result<PlacementDocument> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    PlacementDocument::parse(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Plan and placement must describe the same room.
fn matched_inputs(plan_path: &Path, placement_path: &Path) -> Result<(FloorPlan, PlacementDocument)> {
    let plan = load_plan(plan_path)?.floor_plan()?;
    let doc = load_placement(placement_path)?;
    let room = [plan.width(), plan.depth(), plan.height()];
    if doc.room != room {
        bail!(
            "mismatched plan/placement dimensions: plan room {:?}, placement room {:?}",
            room,
            doc.room
        );
    }
    Ok((plan, doc))
}

fn fractions(v: &[f64]) -> String {
    v.iter()
        .enumerate()
        .map(|(i, f)| format!("k{}={:.4}", i + 1, f))
        .collect::<Vec<_>>()
        .join(" ")
}

fn cmd_solve(g: &GlobalOpts, plan_path: &Path, output: &Path) -> Result<()> {
    let start = Instant::now();
    let plan_file = load_plan(plan_path)?;
    let plan = plan_file.floor_plan()?;
    let out = solve(&plan, &plan_file.sensor_spec(), g.grid(&plan_file), &g.ea_config())
        .with_context(|| format!("solving {}", plan_path.display()))?;
    let mut doc = out.document;
    doc.timing = Some(timing_since(start));
    fs::write(output, doc.to_json()).with_context(|| format!("writing {}", output.display()))?;
    let m = &doc.metrics;
    println!("beacons: {}", m.beacon_count);
    println!("coverage: {}", fractions(&m.per_k_coverage));
    println!("gdop_avg: {:.4} ({})", m.gdop_avg, m.band);
    println!(
        "generations: growth {}, refinement {}",
        out.growth.generations, out.refinement.generations
    );
    println!("wrote {}", output.display());
    Ok(())
}

fn flight_domain(plan: &FloorPlan, doc: &PlacementDocument) -> Result<DroneDomain> {
    Ok(discretize_domains(plan, &doc.config.grid())?.0)
}

#[derive(Serialize)]
struct GdopRow {
    x: f64,
    y: f64,
    z: f64,
    gdop: f64,
    band: GdopBand,
    covering: usize,
}

fn cmd_gdop_map(plan_path: &Path, placement_path: &Path, csv_path: &Path, image: Option<&Path>) -> Result<()> {
    let (plan, doc) = matched_inputs(plan_path, placement_path)?;
    let drone = flight_domain(&plan, &doc)?;
    let field = gdop_field(&drone, &doc.placement()?, &plan, &doc.sensor_model()?);
    let mut w = csv::Writer::from_path(csv_path).with_context(|| format!("writing {}", csv_path.display()))?;
    let mut counts = [0usize; 7];
    for ((p, r), &c) in drone.points.iter().zip(&field.per_point).zip(&field.covering) {
        counts[r.band as usize] += 1;
        w.serialize(GdopRow {
            x: p.x,
            y: p.y,
            z: p.z,
            gdop: r.value,
            band: r.band,
            covering: c,
        })?;
    }
    w.flush()?;
    println!("points: {}", drone.len());
    for band in [
        GdopBand::MeasurementErrorOrRedundancy,
        GdopBand::Ideal,
        GdopBand::VeryGood,
        GdopBand::Good,
        GdopBand::Medium,
        GdopBand::Sufficient,
        GdopBand::Bad,
    ] {
        println!("{}: {}", band, counts[band as usize]);
    }
    println!(
        "gdop_avg: {:.4} ({})",
        field.covered_average,
        classify_band(field.covered_average).unwrap_or(GdopBand::Bad)
    );
    if let Some(path) = image {
        write_min_projection(path, &drone, &field)?;
        println!("wrote {}", path.display());
    }
    println!("wrote {}", csv_path.display());
    Ok(())
}

/// Binary PGM of the minimum GDOP over each `(x, y)` column. Bright is low
/// GDOP; black is `IMAGE_GDOP_MAX` or worse, or no flight points.
fn write_min_projection(path: &Path, drone: &DroneDomain, field: &GdopField) -> Result<()> {
    let key = |v: f64| (v / drone.resolution_m * 2.0).round() as i64;
    let mut xs: Vec<i64> = drone.points.iter().map(|p| key(p.x)).collect();
    let mut ys: Vec<i64> = drone.points.iter().map(|p| key(p.y)).collect();
    xs.sort_unstable();
    xs.dedup();
    ys.sort_unstable();
    ys.dedup();
    let (w, h) = (xs.len(), ys.len());
    let mut best = vec![f64::INFINITY; w * h];
    for (p, r) in drone.points.iter().zip(&field.per_point) {
        let ix = xs.binary_search(&key(p.x)).expect("x key present");
        let iy = ys.binary_search(&key(p.y)).expect("y key present");
        // Row 0 is the largest y so north is up.
        let cell = &mut best[(h - 1 - iy) * w + ix];
        *cell = cell.min(r.value);
    }
    let pixels: Vec<u8> = best
        .iter()
        .map(|&v| {
            if !v.is_finite() {
                0
            } else {
                let t = ((v - 1.0) / (IMAGE_GDOP_MAX - 1.0)).clamp(0.0, 1.0);
                (255.0 * (1.0 - t)).round() as u8
            }
        })
        .collect();
    let mut f = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
    write!(f, "P5\n{w} {h}\n255\n")?;
    f.write_all(&pixels)?;
    Ok(())
}

#[derive(Serialize)]
struct SimRow {
    x: f64,
    y: f64,
    z: f64,
    covering: usize,
    gdop: f64,
    predicted_sigma: f64,
    rmse: f64,
    ratio: f64,
    trials: usize,
    sigma_r: f64,
}

fn cmd_simulate(
    g: &GlobalOpts,
    plan_path: &Path,
    placement_path: &Path,
    output: &Path,
    sigma_r: f64,
    trials: usize,
    stride: usize,
) -> Result<()> {
    if stride == 0 {
        bail!("stride must be positive");
    }
    let (plan, doc) = matched_inputs(plan_path, placement_path)?;
    let drone = flight_domain(&plan, &doc)?;
    let placement = doc.placement()?;
    let model = doc.sensor_model()?;
    let mut w = csv::Writer::from_path(output).with_context(|| format!("writing {}", output.display()))?;
    let mut simulated = 0usize;
    let mut skipped = 0usize;
    let mut ratio_sum = 0.0;
    for (j, p) in drone.points.iter().enumerate() {
        let covering: Vec<_> = placement
            .sites
            .iter()
            .filter(|s| beaconplace::geometry::beacon_covers(&model, s, p, &plan))
            .map(|s| s.position)
            .collect();
        if covering.len() < 4 {
            skipped += 1;
            continue;
        }
        if (j % stride) != 0 {
            continue;
        }
        let r = match simulate_point(&covering, p, sigma_r, trials, g.seed, j as u64) {
            Ok(r) => r,
            Err(PlacementError::DegenerateGeometry(_)) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        simulated += 1;
        ratio_sum += r.ratio;
        w.serialize(SimRow {
            x: p.x,
            y: p.y,
            z: p.z,
            covering: r.covering,
            gdop: r.gdop,
            predicted_sigma: r.predicted_sigma,
            rmse: r.per_point_rmse,
            ratio: r.ratio,
            trials: r.trials,
            sigma_r: r.sigma_r,
        })?;
    }
    w.flush()?;
    println!("simulated points: {simulated}");
    println!("skipped (fewer than 4 covering beacons or singular): {skipped}");
    if simulated > 0 {
        println!("mean rmse/(sigma_r*gdop): {:.4}", ratio_sum / simulated as f64);
    }
    println!("wrote {}", output.display());
    Ok(())
}

fn cmd_bounds(g: &GlobalOpts, plan_path: &Path, exact_max_sites: usize) -> Result<()> {
    let plan_file = load_plan(plan_path)?;
    let plan = plan_file.floor_plan()?;
    let (drone, beacons) = discretize_domains(&plan, &g.grid(&plan_file))?;
    let bc = build_connectivity(&beacons, &drone, &plan_file.sensor_model()?, &plan);
    println!("sites: {}", bc.n_sites());
    println!("points: {}", bc.n_points());
    let lb = lower_bound_parts(&bc, g.k)?;
    println!("counting bound: {}", lb.counting);
    println!("lp relaxation: {:.6} (bound {})", lb.lp_value, lb.lp);
    println!("lower bound: {}", lb.value());
    if bc.n_sites() <= exact_max_sites {
        match brute_force_min_cover(&bc, g.k, exact_max_sites)? {
            Some((n, _)) => println!("exact optimum: {n}"),
            None => println!("exact optimum: infeasible"),
        }
    } else {
        println!(
            "exact optimum: skipped ({} sites exceeds {exact_max_sites})",
            bc.n_sites()
        );
    }
    Ok(())
}

fn cmd_validate(plan_path: &Path, placement_path: &Path) -> Result<()> {
    let plan = load_plan(plan_path)?.floor_plan()?;
    let doc = load_placement(placement_path)?;
    let report = doc.validate(&plan);
    for c in &report.checks {
        println!("{} {}: {}", if c.ok { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if report.passed() {
        println!("PASS");
        Ok(())
    } else {
        println!("FAIL");
        Err(ValidationFailed.into())
    }
}
