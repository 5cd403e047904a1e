//! Command-line front end: argument grammar, dispatch and the exit-code contract.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::ToPrimitive;
use serde::Serialize;
use serde_json::{json, Value};

use crate::fermat::{
    self, prime_positions, sweep, tower_value, verdict_at, FermatError, Policy, PrimalityTester,
    SearchRecord, SweepOptions, Tower,
};
use crate::geom2d::{self, Geom2dError, Point2, PolygonFile};
use crate::geom3d::{self, Geom3dError, Point3, PolyhedronFile, Target3};
use crate::optimizer::{
    estimate_constant_2d, estimate_constant_3d, ConstantEstimate, Family3Input, OptimizerConfig,
    OptimizerError,
};
use crate::par;
use crate::store::{self, encode_line, RecordFile, StoreError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_COUNTEREXAMPLE: i32 = 10;

/// Caps the worker pool; defaults to the machine's parallelism.
pub const THREADS_ENV: &str = "CONJLAB_THREADS";

/// `P(k)` is printed in full by `fermat test` up to this many bits.
const VALUE_PRINT_BITS: u64 = 1024;

#[derive(Debug, Parser)]
#[command(
    name = "conjlab",
    version,
    about = "Erdős–Mordell constant estimation and generalized Fermat prime searches",
    after_help = "Exit codes: 0 success, 2 usage error, 3 validation error, 4 I/O error, \
                  10 counterexample found.\nEnvironment: CONJLAB_THREADS caps worker threads."
)]
pub struct Cli {
    /// Output format for results on stdout.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    /// Omit wall-clock timestamps so reruns are byte-identical.
    #[arg(long, global = true)]
    no_timestamps: bool,
    /// Use CRLF line endings in CSV output.
    #[arg(long, global = true)]
    crlf: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Planar polygons: ratios and constant estimates.
    #[command(subcommand)]
    Geom(GeomCmd),
    /// Polyhedra: face- and edge-pedal ratios and constant estimates.
    #[command(subcommand)]
    Geom3(Geom3Cmd),
    /// Generalized Fermat values a^(b^k) + c.
    #[command(subcommand)]
    Fermat(FermatCmd),
    /// Export a record file as a table.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand)]
enum GeomCmd {
    /// Ratio for one polygon and probe.
    Ratio {
        /// Polygon JSON file: {"vertices": [[x, y], ...]}.
        #[arg(long)]
        polygon: PathBuf,
        /// Probe point as X,Y.
        #[arg(long, allow_hyphen_values = true, value_parser = parse_point2)]
        point: Point2,
        /// Pedal angle in degrees, in (0, 180).
        #[arg(long, default_value_t = 90.0)]
        alpha: f64,
    },
    /// Estimate the smallest ratio over convex n-gons.
    Estimate {
        /// Number of vertices.
        #[arg(long)]
        n: usize,
        /// Pedal angle in degrees, in (0, 180).
        #[arg(long, default_value_t = 90.0)]
        alpha: f64,
        #[command(flatten)]
        opt: OptArgs,
        /// Write the estimate record to this JSONL file (overwritten).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Fixture {
    Tetra,
    Cube,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TargetArg {
    Faces,
    Edges,
}

impl From<TargetArg> for Target3 {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::Faces => Target3::Faces,
            TargetArg::Edges => Target3::Edges,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    Tetrahedron,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct SolidSource {
    /// Built-in solid: regular tetrahedron with vertices (±1, ±1, ±1) of even
    /// parity, or the cube [-1, 1]^3.
    #[arg(long, value_enum)]
    fixture: Option<Fixture>,
    /// Polyhedron JSON file: {"vertices": [[x, y, z], ...], "faces": [[i, ...], ...]}.
    #[arg(long)]
    mesh: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Geom3Cmd {
    /// Ratio for one polyhedron and probe.
    Ratio {
        #[command(flatten)]
        source: SolidSource,
        /// Probe point as X,Y,Z.
        #[arg(long, allow_hyphen_values = true, value_parser = parse_point3)]
        point: Point3,
        #[arg(long, value_enum)]
        target: TargetArg,
    },
    /// Estimate the smallest ratio over tetrahedra, or over probes of a fixed mesh.
    Estimate {
        /// Shape family searched by the outer loop.
        #[arg(
            long,
            value_enum,
            conflicts_with = "mesh",
            required_unless_present = "mesh"
        )]
        family: Option<FamilyArg>,
        /// Fixed polyhedron: only the probe is optimized.
        #[arg(long)]
        mesh: Option<PathBuf>,
        #[arg(long, value_enum)]
        target: TargetArg,
        #[command(flatten)]
        opt: OptArgs,
        /// Write the estimate record to this JSONL file (overwritten).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct OptArgs {
    /// Seed for every random choice.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Independent restarts.
    #[arg(long, default_value_t = 16)]
    restarts: usize,
    /// Nelder–Mead iterations per probe minimization.
    #[arg(long, default_value_t = 300)]
    inner_iters: usize,
    /// Nelder–Mead iterations per shape refinement.
    #[arg(long, default_value_t = 2000)]
    outer_iters: usize,
}

impl OptArgs {
    fn config(&self) -> OptimizerConfig {
        OptimizerConfig {
            seed: self.seed,
            restarts: self.restarts,
            inner_iterations: self.inner_iters,
            outer_iterations: self.outer_iters,
            ..OptimizerConfig::default()
        }
    }
}

#[derive(Debug, Args)]
struct PolicyArgs {
    /// Largest P(k), in bits, that is computed; larger values are skipped.
    #[arg(long, default_value_t = 65_536)]
    max_bits: u64,
    /// Trial division by every prime up to this bound.
    #[arg(long, default_value_t = 100_000)]
    trial_bound: u64,
    /// Extra Miller–Rabin rounds above the deterministic range.
    #[arg(long, default_value_t = 24)]
    mr_rounds: u32,
}

impl PolicyArgs {
    fn policy(&self) -> Policy {
        Policy {
            max_bits: self.max_bits,
            trial_bound: self.trial_bound,
            mr_rounds: self.mr_rounds,
        }
    }
}

#[derive(Debug, Args)]
struct TripletArgs {
    #[arg(long, allow_hyphen_values = true)]
    a: i64,
    #[arg(long, allow_hyphen_values = true)]
    b: i64,
    #[arg(long, allow_hyphen_values = true)]
    c: i64,
}

#[derive(Debug, Subcommand)]
enum FermatCmd {
    /// Verdict for a single P(k).
    Test {
        #[command(flatten)]
        triplet: TripletArgs,
        #[arg(long)]
        k: u32,
        #[command(flatten)]
        policy: PolicyArgs,
    },
    /// Scan k = 0..=kmax for one triplet.
    Search {
        #[command(flatten)]
        triplet: TripletArgs,
        #[arg(long)]
        kmax: u32,
        #[command(flatten)]
        policy: PolicyArgs,
        /// Write the record to this JSONL file (overwritten).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scan every valid triplet in the given ranges (LO..HI, inclusive).
    Sweep {
        #[arg(long, allow_hyphen_values = true, value_parser = parse_range)]
        a: RangeInclusive<i64>,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_range)]
        b: RangeInclusive<i64>,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_range)]
        c: RangeInclusive<i64>,
        #[arg(long)]
        kmax: u32,
        #[command(flatten)]
        policy: PolicyArgs,
        /// Record file; overwritten unless --resume is given.
        #[arg(long)]
        out: PathBuf,
        /// Keep existing records and compute only the missing triplets.
        #[arg(long)]
        resume: bool,
    },
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Record file to read.
    #[arg(long = "in")]
    input: PathBuf,
    /// Comma-separated dotted field paths, e.g. a,b,c,k0,policy.max_bits.
    #[arg(long, value_delimiter = ',', required = true)]
    columns: Vec<String>,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_floats<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(format!("expected {N} comma-separated numbers, got {s:?}"));
    }
    let mut out = [0.0f64; N];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p.parse().map_err(|_| format!("{p:?} is not a number"))?;
        if !o.is_finite() {
            return Err(format!("{p:?} is not finite"));
        }
    }
    Ok(out)
}

fn parse_point2(s: &str) -> Result<Point2, String> {
    parse_floats::<2>(s).map(Point2::from)
}

fn parse_point3(s: &str) -> Result<Point3, String> {
    parse_floats::<3>(s).map(Point3::from)
}

/// `LO..HI` (inclusive) or a single integer.
fn parse_range(s: &str) -> Result<RangeInclusive<i64>, String> {
    let num = |t: &str| {
        t.trim()
            .parse::<i64>()
            .map_err(|_| format!("{t:?} is not an integer"))
    };
    match s.split_once("..") {
        Some((lo, hi)) => Ok(num(lo)?..=num(hi.trim_start_matches('='))?),
        None => num(s).map(|v| v..=v),
    }
}

/// A failure mapped onto the exit-code contract.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn validation(message: impl ToString) -> Self {
        Failure {
            code: EXIT_VALIDATION,
            message: message.to_string(),
        }
    }

    fn io(path: &Path, err: impl ToString) -> Self {
        Failure {
            code: EXIT_IO,
            message: format!("{}: {}", path.display(), err.to_string()),
        }
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        let code = match e {
            StoreError::Io { .. } => EXIT_IO,
            _ => EXIT_VALIDATION,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<FermatError> for Failure {
    fn from(e: FermatError) -> Self {
        match e {
            FermatError::SinkFailure(s) => s.into(),
            other => Failure::validation(other),
        }
    }
}

impl From<Geom2dError> for Failure {
    fn from(e: Geom2dError) -> Self {
        Failure::validation(e)
    }
}

impl From<Geom3dError> for Failure {
    fn from(e: Geom3dError) -> Self {
        Failure::validation(e)
    }
}

impl From<OptimizerError> for Failure {
    fn from(e: OptimizerError) -> Self {
        Failure::validation(e)
    }
}

struct Ctx<'a> {
    format: Format,
    timestamps: bool,
    crlf: bool,
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
}

impl Ctx<'_> {
    /// Prints one result object in the selected format.
    fn emit(&mut self, value: &Value) -> Result<(), Failure> {
        let text = match self.format {
            Format::Json => format!("{}\n", serde_json::to_string(value).expect("JSON value")),
            Format::Text => render_text(value),
            Format::Csv => {
                let columns: Vec<String> = match value {
                    Value::Object(m) => m.keys().cloned().collect(),
                    _ => vec![],
                };
                store::export_csv(std::slice::from_ref(value), &columns, self.crlf)?
            }
        };
        self.stdout
            .write_all(text.as_bytes())
            .map_err(|e| Failure::io(Path::new("<stdout>"), e))
    }

    fn note(&mut self, message: &str) {
        let _ = writeln!(self.stderr, "{message}");
    }
}

fn render_text(value: &Value) -> String {
    let mut out = String::new();
    match value {
        Value::Object(m) => {
            let width = m.keys().map(String::len).max().unwrap_or(0);
            for (k, v) in m {
                let shown = match v {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                out.push_str(&format!("{k:<width$}  {shown}\n"));
            }
        }
        other => {
            out.push_str(&other.to_string());
            out.push('\n');
        }
    }
    out
}

fn now_unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Failure::validation(format!("{}: {e}", path.display())))
}

/// Record as written to disk, parsed back to a value for printing.
fn record_value<R: store::Record>(record: &R) -> Result<Value, Failure> {
    let line = encode_line(record)?;
    Ok(serde_json::from_str(&line).expect("encoded record is JSON"))
}

fn write_single<R: store::Record>(path: &Path, record: R) -> Result<(), Failure> {
    let mut file = RecordFile::<R>::create(path)?;
    file.append(record)?;
    Ok(())
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable result")
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{rendered}");
                EXIT_USAGE
            } else {
                let _ = write!(stdout, "{rendered}");
                EXIT_OK
            };
        }
    };

    if let Ok(raw) = std::env::var(THREADS_ENV) {
        match raw.trim().parse::<usize>() {
            Ok(n) if n > 0 => par::configure_threads(n),
            _ => {
                let _ = writeln!(
                    stderr,
                    "error: {THREADS_ENV} must be a positive integer, got {raw:?}"
                );
                return EXIT_USAGE;
            }
        }
    }

    let mut ctx = Ctx {
        format: cli.format,
        timestamps: !cli.no_timestamps,
        crlf: cli.crlf,
        stdout,
        stderr,
    };
    match dispatch(cli.command, &mut ctx) {
        Ok(code) => code,
        Err(f) => {
            ctx.note(&format!("error: {}", f.message));
            f.code
        }
    }
}

fn dispatch(command: Command, ctx: &mut Ctx<'_>) -> Result<i32, Failure> {
    match command {
        Command::Geom(GeomCmd::Ratio {
            polygon,
            point,
            alpha,
        }) => {
            let file: PolygonFile = read_json(&polygon)?;
            let poly = geom2d::ConvexPolygon2D::try_from(file)?;
            let report = geom2d::em_ratio(&poly, point, alpha)?;
            let pedal = if alpha == 90.0 {
                geom2d::perpendicular_pedal(&poly, point)?
            } else {
                geom2d::oblique_pedal(&poly, point, alpha)?
            };
            let mut v = to_value(&report);
            v["vertex_distances"] = to_value(&geom2d::vertex_distances(&poly, point)?);
            v["pedal"] = to_value(&pedal.entries);
            ctx.emit(&v)?;
            Ok(EXIT_OK)
        }
        Command::Geom(GeomCmd::Estimate { n, alpha, opt, out }) => {
            let est = estimate_constant_2d(n, alpha, &opt.config())?;
            finish_estimate(est, out.as_deref(), ctx)
        }
        Command::Geom3(Geom3Cmd::Ratio {
            source,
            point,
            target,
        }) => {
            let solid = match (source.fixture, source.mesh) {
                (Some(Fixture::Tetra), _) => geom3d::regular_tetrahedron(3f64.sqrt())?,
                (Some(Fixture::Cube), _) => geom3d::cube(1.0)?,
                (None, Some(path)) => {
                    let file: PolyhedronFile = read_json(&path)?;
                    geom3d::Polyhedron3D::try_from(file)?
                }
                (None, None) => {
                    return Err(Failure::usage("one of --fixture or --mesh is required"))
                }
            };
            let report = geom3d::em_ratio_3d(&solid, point, target.into())?;
            let mut v = to_value(&report);
            v["vertex_distances"] = to_value(&geom3d::vertex_distances_3d(&solid, point)?);
            v["pedal_distances"] = to_value(&match target {
                TargetArg::Faces => geom3d::face_pedal(&solid, point)?,
                TargetArg::Edges => geom3d::edge_pedal(&solid, point)?,
            });
            ctx.emit(&v)?;
            Ok(EXIT_OK)
        }
        Command::Geom3(Geom3Cmd::Estimate {
            family,
            mesh,
            target,
            opt,
            out,
        }) => {
            let input = match (family, mesh) {
                (_, Some(path)) => {
                    let file: PolyhedronFile = read_json(&path)?;
                    Family3Input::Mesh(geom3d::Polyhedron3D::try_from(file)?)
                }
                (Some(FamilyArg::Tetrahedron), None) => Family3Input::Tetrahedron,
                (None, None) => {
                    return Err(Failure::usage("one of --family or --mesh is required"))
                }
            };
            let est = estimate_constant_3d(&input, target.into(), &opt.config())?;
            finish_estimate(est, out.as_deref(), ctx)
        }
        Command::Fermat(FermatCmd::Test { triplet, k, policy }) => {
            let t = fermat::validate_triplet(triplet.a, triplet.b, triplet.c)?;
            let policy = policy.policy();
            let verdict = verdict_at(&t, k, &policy, &PrimalityTester::new(&policy));
            let mut v = json!({ "a": t.a, "b": t.b, "c": t.c });
            if let Value::Object(m) = to_value(&verdict) {
                v.as_object_mut().expect("object").extend(m);
            }
            if verdict.bit_length.is_some_and(|b| b <= VALUE_PRINT_BITS) {
                if let Tower::Value(tv) = tower_value(&t, k, policy.max_bits) {
                    v["value"] = match tv.value.to_i64() {
                        Some(small) => small.into(),
                        None => tv.value.to_string().into(),
                    };
                }
            }
            v["policy_fingerprint"] = policy.fingerprint().into();
            ctx.emit(&v)?;
            Ok(EXIT_OK)
        }
        Command::Fermat(FermatCmd::Search {
            triplet,
            kmax,
            policy,
            out,
        }) => {
            let t = fermat::validate_triplet(triplet.a, triplet.b, triplet.c)?;
            let started = now_unix_ms();
            let clock = std::time::Instant::now();
            let mut record = prime_positions(&t, kmax, &policy.policy());
            if ctx.timestamps {
                record.timing = Some(fermat::Timing {
                    started_unix_ms: started,
                    elapsed_ms: clock.elapsed().as_millis() as u64,
                });
            }
            let v = record_value(&record)?;
            if let Some(path) = out {
                write_single(&path, record)?;
            }
            ctx.emit(&v)?;
            Ok(EXIT_OK)
        }
        Command::Fermat(FermatCmd::Sweep {
            a,
            b,
            c,
            kmax,
            policy,
            out,
            resume,
        }) => {
            let mut file = if resume {
                RecordFile::<SearchRecord>::open(&out)?
            } else {
                RecordFile::<SearchRecord>::create(&out)?
            };
            if file.quarantined_bytes() > 0 {
                ctx.note(&format!(
                    "quarantined {} bytes of a partial record to {}",
                    file.quarantined_bytes(),
                    store::partial_sidecar(&out).display()
                ));
            }
            let opts = SweepOptions {
                timestamps: ctx.timestamps,
                ..SweepOptions::default()
            };
            let summary = sweep(a, b, c, kmax, &policy.policy(), &mut file, opts)?;
            for s in &summary.skipped {
                ctx.note(&format!(
                    "skipped ({}, {}, {}): {}",
                    s.a, s.b, s.c, s.reason
                ));
            }
            ctx.emit(&to_value(&summary))?;
            Ok(EXIT_OK)
        }
        Command::Report(args) => report(args, ctx),
    }
}

fn finish_estimate(
    mut est: ConstantEstimate,
    out: Option<&Path>,
    ctx: &mut Ctx<'_>,
) -> Result<i32, Failure> {
    if ctx.timestamps {
        est.timestamp = Some(now_unix_ms());
    }
    let counterexample = est.counterexample;
    let v = record_value(&est)?;
    if let Some(path) = out {
        write_single(path, est)?;
    }
    ctx.emit(&v)?;
    if counterexample {
        ctx.note(&format!(
            "COUNTEREXAMPLE: min_ratio {} is below the conjectured floor {}",
            v["min_ratio"], v["floor"]
        ));
        return Ok(EXIT_COUNTEREXAMPLE);
    }
    Ok(EXIT_OK)
}

fn report(args: ReportArgs, ctx: &mut Ctx<'_>) -> Result<i32, Failure> {
    let values = store::read_values(&args.input)?;
    let text = match ctx.format {
        Format::Csv => store::export_csv(&values, &args.columns, ctx.crlf)?,
        Format::Json | Format::Text => {
            store::check_columns(&values, &args.columns)?;
            let mut s = String::new();
            for v in &values {
                let row: serde_json::Map<String, Value> = args
                    .columns
                    .iter()
                    .map(|c| {
                        (
                            c.clone(),
                            store::lookup(v, c).cloned().unwrap_or(Value::Null),
                        )
                    })
                    .collect();
                let row = Value::Object(row);
                if ctx.format == Format::Json {
                    s.push_str(&serde_json::to_string(&row).expect("JSON value"));
                } else {
                    s.push_str(&render_text(&row));
                }
                s.push('\n');
            }
            s
        }
    };
    match args.out {
        Some(path) => fs::write(&path, text).map_err(|e| Failure::io(&path, e))?,
        None => ctx
            .stdout
            .write_all(text.as_bytes())
            .map_err(|e| Failure::io(Path::new("<stdout>"), e))?,
    }
    Ok(EXIT_OK)
}
