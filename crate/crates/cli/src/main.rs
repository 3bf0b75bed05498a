use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use surfdyn::equidist::{self, GridSpec, HullGrid, Projection};
use surfdyn::green::{self, TateLimitConfig};
use surfdyn::heights::{self, HeightConfig};
use surfdyn::io::{self, BinaryGrid, RunManifest};
use surfdyn::periodic::{self, Method, PeriodicConfig, RigidityConfig};
use surfdyn::picard_manin;
use surfdyn::{AutoOver, Error, SurfaceAutomorphism};

#[derive(Parser)]
#[command(name = "surfdyn", version, about = "Dynamics and heights of loxodromic surface automorphisms")]
struct Cli {
    /// Seed for every stochastic step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory receiving artifacts and manifest.json.
    #[arg(long, global = true, default_value = "surfdyn-out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TateArgs {
    #[arg(long, default_value_t = 200)]
    n_max: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 1e6)]
    escape_radius: f64,
}

impl TateArgs {
    fn config(&self) -> TateLimitConfig {
        TateLimitConfig {
            n_max: self.n_max,
            tol: self.tol,
            escape_radius: self.escape_radius,
            ..Default::default()
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Auto,
    Homotopy,
    Newton,
}

#[derive(Args)]
struct PeriodicArgs {
    #[arg(long, value_enum, default_value = "auto")]
    method: MethodArg,
    /// Random Newton seeds when the homotopy is unavailable.
    #[arg(long, default_value_t = 400)]
    seeds: usize,
}

impl PeriodicArgs {
    fn config(&self, seed: u64) -> PeriodicConfig {
        PeriodicConfig {
            seeds: self.seeds,
            rng_seed: seed,
            method: match self.method {
                MethodArg::Auto => Method::Auto,
                MethodArg::Homotopy => Method::Homotopy,
                MethodArg::Newton => Method::Newton,
            },
            ..Default::default()
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProjectionArg {
    RealPlane,
    LogPlus,
    Angle,
}

#[derive(Subcommand)]
enum Command {
    /// First dynamical degree, optionally with the invariant classes of a completion.
    Degree {
        #[arg(long)]
        map: PathBuf,
        /// Completion spec (JSON); defaults to the built-in model when there is one.
        #[arg(long)]
        completion: Option<PathBuf>,
        #[arg(long)]
        theta: bool,
    },
    /// CSV grid of G+, G- and G over a real rectangle.
    GreenGrid {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, value_parser = parse_range, default_value = "-3,3")]
        x_range: (f64, f64),
        #[arg(long, value_parser = parse_range, default_value = "-3,3")]
        y_range: (f64, f64),
        #[arg(long, default_value_t = 101)]
        nx: usize,
        #[arg(long, default_value_t = 101)]
        ny: usize,
        /// Also write green_grid.bin.
        #[arg(long)]
        binary: bool,
        #[command(flatten)]
        tate: TateArgs,
    },
    /// Canonical height of a rational or quadratic point.
    Height {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[arg(long, default_value_t = 1_000_000)]
        prime_cap: u64,
        #[arg(long, default_value_t = 1e-8)]
        tau: f64,
        #[command(flatten)]
        tate: TateArgs,
    },
    /// Height of a point over Q(t) with its specialization oracle.
    Moriwaki {
        #[arg(long)]
        family: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[arg(long, default_value_t = 256)]
        quad_n: usize,
        #[arg(long, default_value_t = 64)]
        spec_n: usize,
        #[arg(long, default_value_t = 1_000_000)]
        prime_cap: u64,
    },
    /// Points fixed by f^n.
    Periodic {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, conflicts_with = "numeric")]
        exact: bool,
        #[arg(long)]
        numeric: bool,
        #[command(flatten)]
        search: PeriodicArgs,
    },
    /// Fraction of Per_n(f) on which G_g vanishes.
    Rigidity {
        #[arg(long)]
        map_f: PathBuf,
        #[arg(long)]
        map_g: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        n: Vec<usize>,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[command(flatten)]
        search: PeriodicArgs,
    },
    /// Distances between smoothed periodic-point measures.
    Equidist {
        #[arg(long, required_unless_present = "torsion")]
        map: Option<PathBuf>,
        /// Compare Per_n(map) with Per_n(map-g) instead of running the trend.
        #[arg(long)]
        map_g: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6")]
        n: Vec<usize>,
        /// Distance of the N-torsion measure to uniform on the N×N angle grid.
        #[arg(long, conflicts_with_all = ["map", "map_g"])]
        torsion: Option<usize>,
        #[arg(long, value_enum, default_value = "real-plane")]
        projection: ProjectionArg,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-4,4,-4,4")]
        bounds: Vec<f64>,
        #[arg(long, default_value_t = 8)]
        nx: usize,
        #[arg(long, default_value_t = 8)]
        ny: usize,
        #[command(flatten)]
        search: PeriodicArgs,
    },
    /// Sups of polynomials over Per_n versus the grid set {G <= eps}.
    Hull {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, default_value_t = 6)]
        n: usize,
        /// Semicolon-separated polynomials in x, y.
        #[arg(long, default_value = "x;y;x^2+y^2")]
        polys: String,
        #[arg(long, default_value_t = 4.0)]
        half_width: f64,
        #[arg(long, default_value_t = 513)]
        nodes: usize,
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        #[command(flatten)]
        search: PeriodicArgs,
    },
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected lo,hi")?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if !(lo < hi) {
        return Err("expected lo < hi".into());
    }
    Ok((lo, hi))
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

/// Files produced by one command, in write order.
struct Run {
    manifest: RunManifest,
    files: Vec<(String, Vec<u8>)>,
    stdout: String,
    nonconvergent: bool,
}

impl Run {
    fn read_input(&mut self, key: &str, path: &Path) -> Result<String, Failure> {
        let bytes = fs::read(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
        self.manifest.add_input(key, &bytes);
        String::from_utf8(bytes).map_err(|_| Failure::Input(format!("{}: not UTF-8", path.display())))
    }

    fn map(&mut self, key: &str, path: &Path) -> Result<SurfaceAutomorphism, Failure> {
        let text = self.read_input(key, path)?;
        Ok(io::parse_map_spec(&text)?)
    }

    fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> String {
        let s = io::to_json_string(value);
        self.files.push((name.to_string(), s.clone().into_bytes()));
        s
    }

    fn raw(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }
}

fn projection(p: ProjectionArg) -> Projection {
    match p {
        ProjectionArg::RealPlane => Projection::RealPlane,
        ProjectionArg::LogPlus => Projection::LogPlus,
        ProjectionArg::Angle => Projection::Angle,
    }
}

fn measure_rows(m: &equidist::GridMeasure) -> Vec<Vec<f64>> {
    let s = &m.spec;
    let [x0, x1, y0, y1] = s.bounds;
    let (hx, hy) = ((x1 - x0) / s.nx as f64, (y1 - y0) / s.ny as f64);
    m.mass
        .iter()
        .enumerate()
        .map(|(k, &w)| {
            let (j, i) = (k / s.nx, k % s.nx);
            vec![x0 + (i as f64 + 0.5) * hx, y0 + (j as f64 + 0.5) * hy, w]
        })
        .collect()
}

fn execute(cli: &Cli, run: &mut Run) -> Result<(), Failure> {
    let seed = cli.seed;
    match &cli.command {
        Command::Degree { map, completion, theta } => {
            let f = run.map("map", map)?;
            let mut out = serde_json::Map::new();
            out.insert("lambda1".into(), json!(f.dynamical_degree()));
            if *theta || completion.is_some() {
                let model = match completion {
                    Some(p) => io::parse_completion_spec(&run.read_input("completion", p)?)?,
                    None => picard_manin::builtin_completion(&f)?,
                };
                let th = picard_manin::theta_pair(&model)?;
                let ids = picard_manin::identities(&model, &th);
                out.insert("theta".into(), serde_json::to_value(&th).unwrap_or_default());
                out.insert("identities".into(), serde_json::to_value(&ids).unwrap_or_default());
            }
            run.stdout = run.json("degree.json", &out);
        }
        Command::GreenGrid { map, x_range, y_range, nx, ny, binary, tate } => {
            let f = run.map("map", map)?;
            let cfg = tate.config();
            let rows = green::green_grid(&f.to_numeric(), green::normalization(&f), *x_range, *y_range, (*nx, *ny), &cfg)?;
            let table: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.x, r.y, r.g_plus, r.g_minus, r.g, r.err]).collect();
            let csv = io::csv_string(&["x", "y", "Gplus", "Gminus", "G", "err"], &table);
            run.raw("green_grid.csv", csv.into_bytes());
            if *binary {
                let col = |k: usize| table.iter().map(|r| r[k]).collect::<Vec<f64>>();
                let grid = BinaryGrid {
                    nx: *nx as u64,
                    ny: *ny as u64,
                    x_range: *x_range,
                    y_range: *y_range,
                    fields: ["Gplus", "Gminus", "G", "err"].map(String::from).to_vec(),
                    data: (2..6).map(col).collect(),
                };
                run.raw("green_grid.bin", io::write_grid(&grid));
            }
            let bad = rows.iter().filter(|r| !r.err.is_finite()).count();
            run.nonconvergent = 2 * bad > rows.len();
            let summary = json!({
                "cells": rows.len(),
                "nonconvergent": bad,
                "max_G": rows.iter().map(|r| r.g).fold(0.0, f64::max),
                "max_err": rows.iter().map(|r| r.err).filter(|e| e.is_finite()).fold(0.0, f64::max),
            });
            run.stdout = run.json("green_grid.json", &summary);
        }
        Command::Height { map, point, prime_cap, tau, tate } => {
            let f = run.map("map", map)?;
            let pt = io::parse_point(f.surface(), point)?;
            let cfg = HeightConfig { tate: tate.config(), tau: *tau, prime_cap: *prime_cap };
            let report = heights::canonical_height(&f, &pt, &cfg)?;
            run.nonconvergent = !report.error_bound.is_finite();
            run.stdout = run.json("height.json", &report);
        }
        Command::Moriwaki { family, point, quad_n, spec_n, prime_cap } => {
            let text = run.read_input("family", family)?;
            let fam = io::parse_family_spec(&text)?;
            let pt = io::parse_family_point(point)?;
            let cfg = HeightConfig { prime_cap: *prime_cap, ..Default::default() };
            let report = heights::moriwaki_height(&fam, &pt, *quad_n, *spec_n, &cfg)?;
            run.nonconvergent = !report.error_bound.is_finite();
            run.stdout = run.json("moriwaki.json", &report);
        }
        Command::Periodic { map, n, exact, numeric, search } => {
            let f = run.map("map", map)?;
            let monomial = matches!(f, AutoOver::Monomial(_));
            if *exact || (monomial && !numeric) {
                let AutoOver::Monomial(m) = &f else {
                    return Err(Failure::Input("exact enumeration needs a monomial map".into()));
                };
                if m.twist.iter().any(|c| *c != surfdyn::arith::rational::int(1)) {
                    return Err(Failure::Input("exact enumeration needs twist (1,1)".into()));
                }
                let spec = periodic::torus_periodic(&m.matrix, *n as u32)?;
                run.stdout = run.json("periodic.json", &spec);
            } else {
                let set = periodic::numeric_periodic(&f, *n, &search.config(seed))?;
                run.nonconvergent = set.expected.is_some_and(|e| 2 * set.found < e);
                run.stdout = run.json("periodic.json", &set);
            }
        }
        Command::Rigidity { map_f, map_g, n, tol, search } => {
            let f = run.map("map-f", map_f)?;
            let g = run.map("map-g", map_g)?;
            let cfg = RigidityConfig { tol: *tol, periodic: search.config(seed), ..Default::default() };
            let report = periodic::rigidity_test(&f, &g, n, &cfg)?;
            run.stdout = run.json("rigidity.json", &report);
        }
        Command::Equidist { map, map_g, n, torsion, projection: proj, bounds, nx, ny, search } => {
            if let Some(order) = torsion {
                let spec = GridSpec::torsion(*order);
                let pts = equidist::torsion_points(*order);
                let measure = equidist::torsion_measure(&pts, &spec)?;
                let distance = equidist::torsion_uniformity(*order)?;
                let csv = io::csv_string(&["u", "v", "mass"], &measure_rows(&measure.smoothed()));
                run.raw("equidist.csv", csv.into_bytes());
                run.stdout = run.json("equidist.json", &json!({ "torsion": order, "distance": distance }));
                return Ok(());
            }
            let [x0, x1, y0, y1] = <[f64; 4]>::try_from(bounds.as_slice())
                .map_err(|_| Failure::Input("--bounds needs xmin,xmax,ymin,ymax".into()))?;
            if !(x0 < x1 && y0 < y1) || *nx == 0 || *ny == 0 {
                return Err(Failure::Input("empty grid".into()));
            }
            let spec = GridSpec { projection: projection(*proj), bounds: [x0, x1, y0, y1], nx: *nx, ny: *ny };
            let f = run.map("map", map.as_ref().expect("clap enforces --map"))?;
            let pcfg = search.config(seed);
            if let Some(gp) = map_g {
                let g = run.map("map-g", gp)?;
                let &[k] = n.as_slice() else {
                    return Err(Failure::Input("--map-g takes a single --n".into()));
                };
                let distance = equidist::shared_measure_experiment(&f, &g, k, &spec, &pcfg)?;
                run.stdout = run.json("equidist.json", &json!({ "n": k, "distance": distance, "grid": spec }));
                return Ok(());
            }
            let rows = equidist::equidist_trend(&f, n, &spec, &pcfg)?;
            let last = n.iter().max().copied().unwrap_or(0) + 2;
            let pts = equidist::periodic_points(&f, last, &pcfg)?;
            let m = equidist::empirical_measure(&pts, &spec)?.smoothed();
            let csv = io::csv_string(&["u", "v", "mass"], &measure_rows(&m));
            run.raw("equidist.csv", csv.into_bytes());
            let d: Vec<f64> = rows.iter().map(|r| r.distance).collect();
            let summary = json!({
                "grid": spec,
                "rows": rows,
                "distance": d,
                "non_increasing": equidist::is_non_increasing(&d),
            });
            run.stdout = run.json("equidist.json", &summary);
        }
        Command::Hull { map, n, polys, half_width, nodes, eps, search } => {
            let f = run.map("map", map)?;
            let polys: Vec<String> = polys.split(';').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
            let grid = HullGrid { half_width: *half_width, nodes: *nodes, eps: *eps };
            let report = equidist::hull_test(&f, &polys, *n, &grid, &TateLimitConfig::default(), &search.config(seed))?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["poly", "sup_s1", "sup_s2", "rel_gap"]).map_err(|e| Failure::Io(e.to_string()))?;
            for r in &report.rows {
                w.write_record([r.poly.clone(), io::fmt_f64(r.sup_s1), io::fmt_f64(r.sup_s2), io::fmt_f64(r.rel_gap)])
                    .map_err(|e| Failure::Io(e.to_string()))?;
            }
            run.raw("hull.csv", w.into_inner().map_err(|e| Failure::Io(e.to_string()))?);
            let sups: BTreeMap<&str, [f64; 2]> = report.rows.iter().map(|r| (r.poly.as_str(), [r.sup_s1, r.sup_s2])).collect();
            let gaps: BTreeMap<&str, f64> = report.rows.iter().map(|r| (r.poly.as_str(), r.rel_gap)).collect();
            let summary = json!({
                "sups": sups,
                "gaps": gaps,
                "max_gap": report.max_gap,
                "monotone": report.monotone,
                "s1_count": report.s1_count,
                "s2_count": report.s2_count,
            });
            run.stdout = run.json("hull.json", &summary);
        }
    }
    Ok(())
}

fn write_outputs(dir: &Path, run: &mut Run, elapsed: f64) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for (name, bytes) in &run.files {
        fs::write(dir.join(name), bytes)?;
        run.manifest.add_output(name, bytes);
    }
    run.manifest.wall_time_s = elapsed;
    fs::write(dir.join("manifest.json"), io::to_json_string(&run.manifest))?;
    fs::write(dir.join("timing.json"), io::to_json_string(&json!({ "wall_time_s": elapsed })))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let start = Instant::now();
    // the binary path is machine-specific; keep only the arguments
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut run = Run {
        manifest: RunManifest::new(args, cli.seed),
        files: Vec::new(),
        stdout: String::new(),
        nonconvergent: false,
    };
    if let Err(f) = execute(&cli, &mut run) {
        return match f {
            Failure::Input(m) => {
                eprintln!("error: {m}");
                ExitCode::from(2)
            }
            Failure::Io(m) => {
                eprintln!("error: {m}");
                ExitCode::from(1)
            }
        };
    }
    if let Err(e) = write_outputs(&cli.out_dir, &mut run, start.elapsed().as_secs_f64()) {
        eprintln!("error: {}: {e}", cli.out_dir.display());
        return ExitCode::from(1);
    }
    print!("{}", run.stdout);
    if run.nonconvergent {
        eprintln!("warning: run dominated by non-convergent evaluations");
        return ExitCode::from(3);
    }
    ExitCode::SUCCESS
}
