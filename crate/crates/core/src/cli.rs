//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 data error
//! (unreadable or corrupt input, failed encode), 3 verification failure
//! (a `metrics` threshold was not met).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bytes::FormatError;
use crate::config::TrainConfig;
use crate::container::io::{self as cio, LosslessStage};
use crate::container::NeuralVdbContainer;
use crate::decoder::{decode_full, make_hybrid};
use crate::encoder::{encode, encode_sequence};
use crate::grid::{nvgr, Coord, CoordBox, VdbGrid};
use crate::metrics::{compression_ratio, iou, mcd, rmse, RatioMode};
use crate::procgen::{gen_fbm_density, gen_moving_sphere_sequence, gen_sphere_sdf, gen_torus_sdf, FbmSpec, SphereSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "neuvol", about = "Neural compression of sparse voxel volumes", version)]
struct Cli {
    /// Worker threads for encoding and decoding (1 gives the reference result).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a procedural grid.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Encode a grid into a container.
    Encode {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long, value_enum, default_value_t = Stage::None)]
        lossless: Stage,
    },
    /// Decode a container into an explicit grid.
    Decode { input: PathBuf, output: PathBuf },
    /// Look up values at coordinates read as `x y z` lines (stdin when no file).
    Query {
        container: PathBuf,
        coords: Option<PathBuf>,
        /// Emit little-endian records (i32 x, y, z, f32 value, u8 active).
        #[arg(long)]
        binary: bool,
    },
    /// Compare a test grid against a reference grid.
    Metrics {
        reference: PathBuf,
        test: PathBuf,
        /// Also report compression ratios of this container against the reference.
        #[arg(long)]
        container: Option<PathBuf>,
        #[arg(long)]
        min_iou: Option<f64>,
        #[arg(long)]
        max_rmse: Option<f64>,
        #[arg(long)]
        max_mcd: Option<f64>,
    },
    /// Per-level byte accounting of a grid or container.
    Stats { input: PathBuf },
    /// Encode a sequence of grids with warm starts.
    SeqEncode {
        #[arg(long, required = true, num_args = 2..)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long, value_enum, default_value_t = Stage::None)]
        lossless: Stage,
    },
}

#[derive(Subcommand, Debug)]
enum GenKind {
    /// Narrow-band sphere.
    Sphere {
        #[arg(long, default_value_t = 60.0)]
        radius: f64,
        #[arg(long, value_parser = parse_triple, default_value = "0,0,0")]
        center: [f64; 3],
        #[command(flatten)]
        band: BandArgs,
        output: PathBuf,
    },
    /// Narrow-band torus around the z axis.
    Torus {
        #[arg(long, default_value_t = 40.0)]
        major: f64,
        #[arg(long, default_value_t = 15.0)]
        minor: f64,
        #[command(flatten)]
        band: BandArgs,
        output: PathBuf,
    },
    /// Thresholded fBm density in a cube centered on the origin.
    Fbm {
        #[arg(long, default_value_t = 96)]
        size: i32,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        threshold: f32,
        output: PathBuf,
    },
    /// Sphere translated by a fixed velocity per frame, one file per frame.
    Sequence {
        #[arg(long, default_value_t = 6)]
        frames: usize,
        #[arg(long, default_value_t = 24.0)]
        radius: f64,
        #[arg(long, value_parser = parse_triple, default_value = "1,0,0")]
        velocity: [f64; 3],
        #[command(flatten)]
        band: BandArgs,
        out_dir: PathBuf,
    },
}

#[derive(Args, Debug)]
struct BandArgs {
    #[arg(long, default_value_t = 1.0)]
    voxel_size: f64,
    #[arg(long, default_value_t = 3.0)]
    half_width: f32,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides one key, e.g. `--set max_epochs=100`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Stage {
    None,
    Deflate,
}

impl From<Stage> for LosslessStage {
    fn from(s: Stage) -> Self {
        match s {
            Stage::None => LosslessStage::None,
            Stage::Deflate => LosslessStage::Deflate,
        }
    }
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s.split(',').map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
    <[f64; 3]>::try_from(parts).map_err(|_| "expected three comma-separated numbers".into())
}

/// Error carrying its exit code.
struct Failure(i32, String);

fn data<E: std::fmt::Display>(e: E) -> Failure {
    Failure(EXIT_DATA, e.to_string())
}

fn usage<E: std::fmt::Display>(e: E) -> Failure {
    Failure(EXIT_USAGE, e.to_string())
}

fn train_config(a: &TrainArgs) -> Result<TrainConfig, Failure> {
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::parse(&std::fs::read_to_string(p).map_err(data)?).map_err(usage)?,
        None => TrainConfig::default(),
    };
    for o in &a.overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| usage(format!("override '{o}' is not KEY=VALUE")))?;
        cfg.set(k.trim(), v.trim()).map_err(usage)?;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn load_grid(p: &Path) -> Result<VdbGrid, Failure> {
    nvgr::load(p).map_err(|e| data(format!("{}: {e}", p.display())))
}

fn load_container(p: &Path) -> Result<NeuralVdbContainer, Failure> {
    cio::load(p).map_err(|e| data(format!("{}: {e}", p.display())))
}

fn save_grid(g: &VdbGrid, p: &Path) -> Result<u64, Failure> {
    nvgr::save(g, p).map_err(|e| data(format!("{}: {e}", p.display())))
}

fn read_coords(r: impl BufRead) -> Result<Vec<Coord>, Failure> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(data)?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let v: Vec<i32> = t
            .split_whitespace()
            .map(|s| s.parse::<i32>())
            .collect::<Result<_, _>>()
            .map_err(|_| data(format!("line {}: expected three integers", i + 1)))?;
        match v[..] {
            [x, y, z] => out.push(Coord::new(x, y, z)),
            _ => return Err(data(format!("line {}: expected three integers", i + 1))),
        }
    }
    Ok(out)
}

fn container_stats(c: &NeuralVdbContainer, bytes: &cio::ContainerBytes) -> String {
    let mut s = String::new();
    let t = c.upper.topology_stats();
    let nets: u64 = c.experts.iter().map(|e| e.param_count() as u64 * c.precision.bits() as u64 / 8).sum();
    let _ = writeln!(s, "{:<16} {:>12} {:>16}", "part", "count", "bytes");
    let _ = writeln!(s, "{:<16} {:>12} {:>16}", "root", t.root.node_count, t.root.bytes);
    let _ = writeln!(s, "{:<16} {:>12} {:>16}", "internal_level2", t.level2.node_count, t.level2.bytes);
    let _ = writeln!(s, "{:<16} {:>12} {:>16}", "level1_origins", t.level1.node_count, t.level1.node_count * 12);
    let _ = writeln!(s, "{:<16} {:>12} {:>16}", "network_weights", c.param_count(), nets);
    let _ = writeln!(s, "{:<16} {:>12} {:>16}", "patches", c.patch_count(), "");
    let _ = writeln!(s, "{:<16} {:>12} {:>16}", "subdomains", c.layout.len(), "");
    let _ = writeln!(s, "{:<16} {:>12} {:>16}", "payload", "", bytes.payload_bytes);
    let _ = write!(s, "{:<16} {:>12} {:>16}", "file", "", bytes.file.len());
    s
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), Failure> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(usage("--workers must be positive"));
        }
        // Ignored when a pool already exists, e.g. on repeated in-process runs.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Gen { kind } => match kind {
            GenKind::Sphere { radius, center, band, output } => {
                let g = gen_sphere_sdf(&SphereSpec { center, radius, voxel_size: band.voxel_size, half_width: band.half_width })
                    .map_err(usage)?;
                let n = save_grid(&g, &output)?;
                writeln!(out, "wrote {} ({n} bytes, {} active voxels)", output.display(), g.active_voxel_count()).map_err(data)?;
            }
            GenKind::Torus { major, minor, band, output } => {
                let g = gen_torus_sdf(major, minor, band.voxel_size, band.half_width).map_err(usage)?;
                let n = save_grid(&g, &output)?;
                writeln!(out, "wrote {} ({n} bytes, {} active voxels)", output.display(), g.active_voxel_count()).map_err(data)?;
            }
            GenKind::Fbm { size, seed, threshold, output } => {
                if size <= 0 {
                    return Err(usage("--size must be positive"));
                }
                let spec = FbmSpec { seed, threshold, ..FbmSpec::with_domain(CoordBox::centered(size)) };
                let g = gen_fbm_density(&spec).map_err(usage)?;
                let n = save_grid(&g, &output)?;
                writeln!(out, "wrote {} ({n} bytes, {} active voxels)", output.display(), g.active_voxel_count()).map_err(data)?;
            }
            GenKind::Sequence { frames, radius, velocity, band, out_dir } => {
                let spec = SphereSpec { center: [0.0; 3], radius, voxel_size: band.voxel_size, half_width: band.half_width };
                let grids = gen_moving_sphere_sequence(&spec, frames, velocity).map_err(usage)?;
                std::fs::create_dir_all(&out_dir).map_err(data)?;
                for (i, g) in grids.iter().enumerate() {
                    let p = out_dir.join(format!("frame_{i:03}.nvgr"));
                    save_grid(g, &p)?;
                    writeln!(out, "wrote {}", p.display()).map_err(data)?;
                }
            }
        },
        Command::Encode { input, output, train, lossless } => {
            let cfg = train_config(&train)?;
            let g = load_grid(&input)?;
            let (c, report) = encode(&g, &cfg).map_err(data)?;
            let bytes = cio::save(&c, &output, lossless.into()).map_err(data)?;
            writeln!(
                out,
                "experts {}\nepochs {}\npatches {}\nl1_accuracy {:.6}\nl0_error_rate {:.6}\npayload_bytes {}\nfile_bytes {}\nseconds {:.2}",
                c.experts.len(),
                report.total_epochs(),
                c.patch_count(),
                report.patches.l1_accuracy(),
                report.patches.l0_error_rate(),
                bytes.payload_bytes,
                bytes.file.len(),
                report.seconds
            )
            .map_err(data)?;
        }
        Command::Decode { input, output } => {
            let c = load_container(&input)?;
            let g = decode_full(&c).map_err(data)?;
            let n = save_grid(&g, &output)?;
            writeln!(out, "wrote {} ({n} bytes, {} active voxels)", output.display(), g.active_voxel_count()).map_err(data)?;
        }
        Command::Query { container, coords, binary } => {
            let c = load_container(&container)?;
            let coords = match coords {
                Some(p) => read_coords(std::io::BufReader::new(std::fs::File::open(&p).map_err(data)?))?,
                None => read_coords(std::io::stdin().lock())?,
            };
            let h = make_hybrid(&c).map_err(data)?;
            let results = h.query(&coords);
            for (p, r) in coords.iter().zip(results) {
                if binary {
                    let mut rec = Vec::with_capacity(17);
                    for v in [p.x, p.y, p.z] {
                        rec.extend_from_slice(&v.to_le_bytes());
                    }
                    rec.extend_from_slice(&r.value.to_le_bytes());
                    rec.push(r.active as u8);
                    out.write_all(&rec).map_err(data)?;
                } else {
                    writeln!(out, "{} {} {} {:?} {}", p.x, p.y, p.z, r.value, r.active as u8).map_err(data)?;
                }
            }
        }
        Command::Metrics { reference, test, container, min_iou, max_rmse, max_mcd } => {
            let a = load_grid(&reference)?;
            let b = load_grid(&test)?;
            let i = iou(&a, &b).map_err(data)?;
            let r = rmse(&a, &b).map_err(data)?;
            writeln!(out, "iou {i:.6}\nrmse {r:.6}").map_err(data)?;
            let m = if a.class() == crate::grid::GridClass::Sdf {
                let m = mcd(&a, &b).map_err(data)?;
                writeln!(out, "mcd {m:.6}\nmcd_voxels {:.6}", m / a.voxel_size()).map_err(data)?;
                Some(m)
            } else {
                None
            };
            if let Some(p) = container {
                let c = load_container(&p)?;
                writeln!(
                    out,
                    "ratio_raw {:.4}\nratio_file {:.4}",
                    compression_ratio(&c, &a, RatioMode::RawPayload),
                    compression_ratio(&c, &a, RatioMode::FilePayload)
                )
                .map_err(data)?;
            }
            let mut failed = Vec::new();
            if min_iou.is_some_and(|t| i < t) {
                failed.push("iou");
            }
            if max_rmse.is_some_and(|t| r > t) {
                failed.push("rmse");
            }
            if let Some(t) = max_mcd {
                if m.is_none_or(|m| m > t) {
                    failed.push("mcd");
                }
            }
            if !failed.is_empty() {
                return Err(Failure(EXIT_VERIFY, format!("threshold not met: {}", failed.join(", "))));
            }
        }
        Command::Stats { input } => {
            let raw = std::fs::read(&input).map_err(data)?;
            if raw.starts_with(&cio::MAGIC) {
                let c = cio::read_container(&raw).map_err(data)?;
                let bytes = cio::ContainerBytes { payload_bytes: cio::payload(&c).len() as u64, file: raw };
                writeln!(out, "{}", container_stats(&c, &bytes)).map_err(data)?;
            } else {
                let g = nvgr::from_bytes(&raw).map_err(|e: FormatError| data(format!("{}: {e}", input.display())))?;
                writeln!(out, "{}", g.topology_stats()).map_err(data)?;
            }
        }
        Command::SeqEncode { inputs, out_dir, train, lossless } => {
            let cfg = train_config(&train)?;
            let grids = inputs.iter().map(|p| load_grid(p)).collect::<Result<Vec<_>, _>>()?;
            let frames = encode_sequence(&grids, &cfg).map_err(data)?;
            std::fs::create_dir_all(&out_dir).map_err(data)?;
            let mut manifest = String::new();
            for (i, f) in frames.iter().enumerate() {
                let name = format!("frame_{i:03}.nvdb");
                cio::save(&f.container, out_dir.join(&name), lossless.into()).map_err(data)?;
                let loss = f.container.experts.iter().map(|e| e.final_loss as f64).fold(0.0, f64::max);
                let _ = writeln!(manifest, "{i}, {name}, {}, {loss:e}", f.report.total_epochs());
            }
            std::fs::write(out_dir.join("manifest.txt"), &manifest).map_err(data)?;
            write!(out, "{manifest}").map_err(data)?;
        }
    }
    Ok(())
}

/// Runs the tool on `args` (including the program name) and returns the
/// exit code. Reports go to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    match execute(cli, out) {
        Ok(()) => EXIT_OK,
        Err(Failure(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}
