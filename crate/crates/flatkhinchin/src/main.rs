use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use flatkhinchin::experiments::{
    default_transversal, parse_interval, run_iet_khinchin, run_khinchin_flow, FlowConfig, IetConfig,
};
use flatkhinchin::output::{write_csv, write_json, Format};
use flatkhinchin::surface_file::{resolve_surface, surface_to_json};
use flatkhinchin::verify::{
    verify_covering, verify_key, verify_lemma_flow, verify_sum_bound, verify_translation,
};
use flatkhinchin::SCHEMA_VERSION;
use flatkhinchin_core::cylinders::{enumerate_saddle_connections, shortest_saddle};
use flatkhinchin_core::flow::{trace, EventKind};
use flatkhinchin_core::iet::{first_return_iet, recurrence_scan, Transversal};
use flatkhinchin_core::series::{divergence_verdict, sandwich_ladder, Sequence, SeriesSide, Thresholds};
use flatkhinchin_core::{Direction, SurfacePoint, TranslationSurface, Vec2};
use serde::Serialize;
use serde_json::json;

type Result<T> = std::result::Result<T, Box<dyn std::error::Error>>;

#[derive(Parser)]
#[command(name = "flatkhinchin", version, about = "Recurrence of straight-line flows on translation surfaces")]
struct Cli {
    /// Master seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = one per core). Never changes the output.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SurfaceArg {
    /// torus, l-shape:A,B (or L(A,B)), octagon, or a JSON file.
    #[arg(long, short, default_value = "torus")]
    surface: String,
}

#[derive(Subcommand)]
enum Command {
    /// Describe or export a surface.
    #[command(subcommand)]
    Surface(SurfaceCmd),
    /// Straight-line flow.
    #[command(subcommand)]
    Flow(FlowCmd),
    /// Saddle connections and cylinders.
    #[command(subcommand)]
    Cylinders(CylCmd),
    /// First-return interval exchanges.
    #[command(subcommand)]
    Iet(IetCmd),
    /// Partial-sum checks for target sequences.
    #[command(subcommand)]
    Series(SeriesCmd),
    /// Numerical checks of the geometric lemmas.
    #[command(subcommand)]
    Verify(VerifyCmd),
    /// Seeded recurrence experiments.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
}

#[derive(Subcommand)]
enum SurfaceCmd {
    Info(SurfaceArg),
    /// Print the surface as a JSON description.
    Export(SurfaceArg),
}

#[derive(Subcommand)]
enum FlowCmd {
    /// Edge crossings of one trajectory, one JSON object per line.
    Trace {
        #[command(flatten)]
        surface: SurfaceArg,
        #[arg(long, default_value_t = 0)]
        polygon: usize,
        #[arg(long, num_args = 2, value_names = ["X", "Y"], allow_negative_numbers = true)]
        point: Vec<f64>,
        /// Direction in turns.
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
        #[arg(long)]
        time: f64,
    },
}

#[derive(Subcommand)]
enum CylCmd {
    /// Cylinders with core length below --length (CSV: tau,T,h,area).
    Enumerate {
        #[command(flatten)]
        surface: SurfaceArg,
        #[arg(long)]
        length: f64,
        /// Minimum area fraction; defaults to the surface's sigma.
        #[arg(long)]
        min_area: Option<f64>,
    },
    /// Saddle connections no longer than --length.
    Saddles {
        #[command(flatten)]
        surface: SurfaceArg,
        #[arg(long)]
        length: f64,
    },
}

#[derive(Args)]
struct TransversalArgs {
    /// Transversal start as POLY X Y; defaults to the core of the shortest cylinder.
    #[arg(long, num_args = 3, value_names = ["POLY", "X", "Y"], allow_negative_numbers = true)]
    base: Vec<f64>,
    /// Transversal direction in turns.
    #[arg(long, allow_negative_numbers = true)]
    along: Option<f64>,
    #[arg(long)]
    length: Option<f64>,
}

impl TransversalArgs {
    fn resolve(&self, surface: &TranslationSurface) -> Result<Transversal> {
        let d = default_transversal(surface);
        let base = match self.base.as_slice() {
            [] => d.base,
            [p, x, y] if *p >= 0.0 && p.fract() == 0.0 => SurfacePoint::new(*p as usize, Vec2::new(*x, *y)),
            _ => return Err("--base takes POLY X Y".into()),
        };
        Ok(Transversal::new(
            base,
            self.along.map_or(d.direction, Direction::new),
            self.length.unwrap_or(d.length),
        ))
    }
}

#[derive(Subcommand)]
enum IetCmd {
    /// First-return map of the flow in direction --theta.
    Build {
        #[command(flatten)]
        surface: SurfaceArg,
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
        #[command(flatten)]
        transversal: TransversalArgs,
    },
    /// Shrinking-target scan |T^n x - x| < a_n (CSV: n,distance,a_n).
    Scan {
        #[command(flatten)]
        surface: SurfaceArg,
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
        #[command(flatten)]
        transversal: TransversalArgs,
        /// Start point on the transversal.
        #[arg(long, default_value_t = 0.0)]
        x: f64,
        /// Target sequence: harmonic:C, power:C,P, log:C,Q or explicit:A1,A2,...
        #[arg(long, default_value = "harmonic:1")]
        a: Sequence,
        #[arg(long, default_value_t = 100_000)]
        n: u64,
    },
}

#[derive(Subcommand)]
enum SeriesCmd {
    /// Sandwich inequalities and divergence verdicts for one sequence.
    Check {
        #[arg(long, default_value = "harmonic:1")]
        a: Sequence,
        /// Largest truncation of the sandwich ladder.
        #[arg(long, default_value_t = 1_000_000)]
        k: u64,
    },
}

#[derive(Subcommand)]
enum VerifyCmd {
    /// Crossing-time bound for all intersecting cylinder pairs.
    LemmaFlow {
        #[command(flatten)]
        surface: SurfaceArg,
        #[arg(long, default_value_t = 20.0)]
        length: f64,
    },
    /// Minimal covering constants at several lengths.
    Covering {
        #[command(flatten)]
        surface: SurfaceArg,
        #[arg(long, value_delimiter = ',', default_value = "10,20,40")]
        lengths: Vec<f64>,
    },
    /// Union of arcs against sigma^-1 times the interval length.
    SumBound {
        #[command(flatten)]
        surface: SurfaceArg,
        #[arg(long, value_delimiter = ',', default_value = "5,10,20")]
        lengths: Vec<f64>,
        #[arg(long, default_value_t = 6)]
        k_max: u32,
    },
    /// Arc measure of cylinders with N <= T < C1 N inside J.
    Key {
        #[command(flatten)]
        surface: SurfaceArg,
        #[arg(long)]
        n: f64,
        #[arg(long, default_value_t = 2.0)]
        c1: f64,
        /// J as START,END in turns.
        #[arg(long, default_value = "0,1")]
        j: String,
    },
    /// Displacement after one lap in a slightly tilted direction.
    Translation {
        #[command(flatten)]
        surface: SurfaceArg,
        #[arg(long, default_value_t = 1e-3)]
        epsilon: f64,
        #[arg(long, default_value_t = 5)]
        cylinders: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
}

#[derive(Subcommand)]
enum ExperimentCmd {
    /// d(F_theta^t x, x) < f(t) over random (theta, x).
    KhinchinFlow {
        #[command(flatten)]
        surface: SurfaceArg,
        /// Target function in sequence syntax; power:1,1 is 1/t.
        #[arg(long, default_value = "power:1,1")]
        f: Sequence,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 1e4)]
        horizon: f64,
    },
    /// |T^n x - x| < a_n for first-return maps in random directions.
    IetRecurrence {
        #[command(flatten)]
        surface: SurfaceArg,
        #[arg(long, default_value = "harmonic:1")]
        a: Sequence,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 100_000)]
        n: u64,
        #[command(flatten)]
        transversal: TransversalArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn emit<T: Serialize, R: Serialize>(cli: &Cli, report: &T, rows: impl IntoIterator<Item = R>) -> Result<()> {
    let out = cli.out.as_deref();
    match cli.format {
        Format::Json => write_json(out, report)?,
        Format::Csv => write_csv(out, rows)?,
    }
    Ok(())
}

#[derive(Serialize)]
struct CylinderRow {
    tau: f64,
    #[serde(rename = "T")]
    t: f64,
    h: f64,
    area: f64,
}

#[derive(Serialize)]
struct ScanRow {
    n: u64,
    distance: f64,
    a_n: f64,
}

#[derive(Serialize)]
struct FlowHitRow {
    sample: usize,
    theta: f64,
    t: f64,
    distance: f64,
    f_t: f64,
}

#[derive(Serialize)]
struct IetHitRow {
    sample: usize,
    theta: f64,
    n: u64,
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Surface(SurfaceCmd::Info(s)) => {
            let surf = resolve_surface(&s.surface)?;
            let classes: Vec<_> = surf
                .classes()
                .iter()
                .map(|c| {
                    json!({
                        "corners": c.corners.iter().map(|k| [k.poly, k.vertex]).collect::<Vec<_>>(),
                        "cone_angle_over_2pi": c.cone_multiple,
                        "multiplicity": c.multiplicity(),
                        "marked": c.marked,
                    })
                })
                .collect();
            let info = json!({
                "schema_version": SCHEMA_VERSION,
                "surface": s.surface,
                "polygons": surf.polygons().len(),
                "genus": surf.genus(),
                "euler_characteristic": surf.euler_characteristic(),
                "area": surf.total_area(),
                "multiplicity_sum": surf.multiplicity_sum(),
                "sigma_inverse": surf.sigma_inverse(),
                "shortest_saddle": shortest_saddle(&surf).ok(),
                "vertex_classes": classes,
            });
            write_json(cli.out.as_deref(), &info)?;
        }
        Command::Surface(SurfaceCmd::Export(s)) => {
            let surf = resolve_surface(&s.surface)?;
            let mut w = flatkhinchin::output::open(cli.out.as_deref())?;
            writeln!(w, "{}", surface_to_json(&surf))?;
            w.flush()?;
        }
        Command::Flow(FlowCmd::Trace {
            surface,
            polygon,
            point,
            theta,
            time,
        }) => {
            let surf = resolve_surface(&surface.surface)?;
            let [x, y] = point.as_slice() else {
                return Err("--point takes X Y".into());
            };
            let start = SurfacePoint::new(*polygon, Vec2::new(*x, *y));
            let events = trace(&surf, start, Direction::new(*theta), *time)?;
            let mut w = flatkhinchin::output::open(cli.out.as_deref())?;
            for e in events {
                let kind = match e.kind {
                    EventKind::EdgeCrossing { .. } => "edge_crossing",
                    EventKind::TimeReached => "time_reached",
                    EventKind::SingularityHit { .. } => "singularity_hit",
                };
                let line = json!({
                    "kind": kind,
                    "time": e.time,
                    "polygon": e.point.polygon,
                    "x": e.point.pos.x,
                    "y": e.point.pos.y,
                });
                writeln!(w, "{line}")?;
            }
            w.flush()?;
        }
        Command::Cylinders(CylCmd::Enumerate {
            surface,
            length,
            min_area,
        }) => {
            let surf = resolve_surface(&surface.surface)?;
            let cyls = match min_area {
                Some(a) => flatkhinchin_core::cylinders::enumerate_cylinders(&surf, *length, *a)?,
                None => flatkhinchin_core::cylinders::cylinder_sequence(&surf, *length)?,
            };
            let rows: Vec<CylinderRow> = cyls
                .iter()
                .map(|c| CylinderRow {
                    tau: c.direction.tau(),
                    t: c.core_length,
                    h: c.height,
                    area: c.area_fraction,
                })
                .collect();
            let report = json!({
                "schema_version": SCHEMA_VERSION,
                "surface": surface.surface,
                "length": length,
                "count": rows.len(),
                "cylinders": &rows,
            });
            emit(cli, &report, rows.iter())?;
        }
        Command::Cylinders(CylCmd::Saddles { surface, length }) => {
            let surf = resolve_surface(&surface.surface)?;
            let rows: Vec<_> = enumerate_saddle_connections(&surf, *length)?
                .iter()
                .map(|s| {
                    json!({
                        "hx": s.holonomy.x,
                        "hy": s.holonomy.y,
                        "length": s.length(),
                        "tau": s.direction().tau(),
                        "from": s.start_singularity,
                        "to": s.end_singularity,
                    })
                })
                .collect();
            let report = json!({
                "schema_version": SCHEMA_VERSION,
                "surface": surface.surface,
                "length": length,
                "count": rows.len(),
                "saddle_connections": &rows,
            });
            match cli.format {
                Format::Json => write_json(cli.out.as_deref(), &report)?,
                Format::Csv => {
                    #[derive(Serialize)]
                    struct Row {
                        hx: f64,
                        hy: f64,
                        length: f64,
                        tau: f64,
                    }
                    let rows = enumerate_saddle_connections(&surf, *length)?.into_iter().map(|s| Row {
                        hx: s.holonomy.x,
                        hy: s.holonomy.y,
                        length: s.length(),
                        tau: s.direction().tau(),
                    });
                    write_csv(cli.out.as_deref(), rows)?;
                }
            }
        }
        Command::Iet(IetCmd::Build {
            surface,
            theta,
            transversal,
        }) => {
            let surf = resolve_surface(&surface.surface)?;
            let tr = transversal.resolve(&surf)?;
            let fr = first_return_iet(&surf, Direction::new(*theta), &tr)?;
            let report = json!({
                "schema_version": SCHEMA_VERSION,
                "surface": surface.surface,
                "theta": theta,
                "domain_length": fr.iet.domain_length(),
                "breakpoints": fr.iet.breakpoints(),
                "translations": fr.iet.translations(),
                "metric": format!("{:?}", fr.iet.metric()).to_lowercase(),
            });
            write_json(cli.out.as_deref(), &report)?;
        }
        Command::Iet(IetCmd::Scan {
            surface,
            theta,
            transversal,
            x,
            a,
            n,
        }) => {
            let surf = resolve_surface(&surface.surface)?;
            let tr = transversal.resolve(&surf)?;
            let fr = first_return_iet(&surf, Direction::new(*theta), &tr)?;
            let scan = recurrence_scan(&fr.iet, *x, a, *n)?;
            let rows: Vec<ScanRow> = scan
                .hits
                .iter()
                .map(|h| ScanRow {
                    n: h.n,
                    distance: h.distance,
                    a_n: h.target,
                })
                .collect();
            let report = json!({
                "schema_version": SCHEMA_VERSION,
                "surface": surface.surface,
                "theta": theta,
                "x": x,
                "a": a.to_string(),
                "n": n,
                "hit_count": rows.len(),
                "min_ratio": scan.min_ratio,
                "argmin": scan.argmin,
                "tail_min_ratio": scan.tail_min_ratio,
                "tail_argmin": scan.tail_argmin,
                "hits": &rows,
            });
            emit(cli, &report, rows.iter())?;
        }
        Command::Series(SeriesCmd::Check { a, k }) => {
            let ladder = sandwich_ladder(a, *k)?;
            let rows: Vec<_> = ladder
                .iter()
                .map(|p| {
                    json!({
                        "k": p.k,
                        "sum_i_ai": p.sum_i_ai,
                        "lower": p.lower,
                        "upper": p.upper,
                        "sum_a_floor_sqrt": p.sum_a_floor_sqrt,
                        "sqrt_lower": p.sqrt_lower,
                        "sqrt_upper": p.sqrt_upper,
                        "holds": p.sandwich_holds(),
                    })
                })
                .collect();
            let verdicts: Vec<_> = [SeriesSide::IndexWeighted, SeriesSide::Plain, SeriesSide::FloorSqrt]
                .into_iter()
                .map(|side| {
                    divergence_verdict(a, side, Thresholds::default()).map(|v| {
                        json!({
                            "side": format!("{side:?}"),
                            "truncations": v.truncations,
                            "sums": v.sums,
                            "increment_ratio": v.increment_ratio,
                            "verdict": v.verdict.as_str(),
                        })
                    })
                })
                .collect::<std::result::Result<_, _>>()?;
            let report = json!({
                "schema_version": SCHEMA_VERSION,
                "a": a.to_string(),
                "sandwich_holds": ladder.iter().all(|p| p.sandwich_holds()),
                "ladder": &rows,
                "verdicts": verdicts,
            });
            emit(cli, &report, rows.iter())?;
        }
        Command::Verify(v) => run_verify(cli, v)?,
        Command::Experiment(ExperimentCmd::KhinchinFlow {
            surface,
            f,
            samples,
            horizon,
        }) => {
            let surf = resolve_surface(&surface.surface)?;
            let cfg = FlowConfig {
                surface: surface.surface.clone(),
                f: f.to_string(),
                samples: *samples,
                horizon: *horizon,
                seed: cli.seed,
            };
            let report = run_khinchin_flow(&surf, f, cfg, cli.threads)?;
            let rows = report.samples.iter().flat_map(|s| {
                s.hits.iter().map(|h| FlowHitRow {
                    sample: s.index,
                    theta: s.theta,
                    t: h.t,
                    distance: h.distance,
                    f_t: h.target,
                })
            });
            emit(cli, &report, rows)?;
        }
        Command::Experiment(ExperimentCmd::IetRecurrence {
            surface,
            a,
            samples,
            n,
            transversal,
        }) => {
            let surf = resolve_surface(&surface.surface)?;
            let tr = transversal.resolve(&surf)?;
            let cfg = IetConfig {
                surface: surface.surface.clone(),
                a: a.to_string(),
                samples: *samples,
                n: *n,
                seed: cli.seed,
            };
            let report = run_iet_khinchin(&surf, a, &tr, cfg, cli.threads)?;
            for s in report.samples.iter().filter(|s| s.redraws > 0) {
                for r in &s.redraw_reasons {
                    eprintln!("sample {}: redrawn ({r})", s.index);
                }
            }
            let rows = report.samples.iter().flat_map(|s| {
                s.hits.iter().map(|&n| IetHitRow {
                    sample: s.index,
                    theta: s.theta,
                    n,
                })
            });
            emit(cli, &report, rows)?;
        }
    }
    Ok(())
}

fn run_verify(cli: &Cli, v: &VerifyCmd) -> Result<()> {
    match v {
        VerifyCmd::LemmaFlow { surface, length } => {
            let surf = resolve_surface(&surface.surface)?;
            let r = verify_lemma_flow(&surf, &surface.surface, *length)?;
            emit(cli, &r, r.violations.iter())?;
        }
        VerifyCmd::Covering { surface, lengths } => {
            let surf = resolve_surface(&surface.surface)?;
            let r = verify_covering(&surf, &surface.surface, lengths)?;
            emit(cli, &r, r.entries.iter())?;
        }
        VerifyCmd::SumBound {
            surface,
            lengths,
            k_max,
        } => {
            let surf = resolve_surface(&surface.surface)?;
            let r = verify_sum_bound(&surf, &surface.surface, lengths, *k_max)?;
            emit(cli, &r, r.entries.iter())?;
        }
        VerifyCmd::Key { surface, n, c1, j } => {
            let surf = resolve_surface(&surface.surface)?;
            let r = verify_key(&surf, &surface.surface, *n, parse_interval(j)?, *c1)?;
            emit(cli, &r, std::iter::once(&r))?;
        }
        VerifyCmd::Translation {
            surface,
            epsilon,
            cylinders,
            samples,
        } => {
            let surf = resolve_surface(&surface.surface)?;
            let r = verify_translation(&surf, &surface.surface, *epsilon, *cylinders, *samples, cli.seed, cli.threads)?;
            emit(cli, &r, r.checks.iter())?;
        }
    }
    Ok(())
}
