//! Command-line front end.
//!
//! Exit codes: 0 success, 1 validation/parse/config error, 2 I/O error,
//! 3 Sinkhorn stopped before reaching the tolerance (outputs still written).

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use crate::embedio::{
    build_pool, encode_emb1, read_embeddings, read_scores, write_atomic, EmbeddingSequence,
    PoolOrder, TargetPool,
};
use crate::error::{Error, Result};
use crate::metrics::{compute_eer, frechet_distance, gaussian_stats};
use crate::otcore::{SinkhornConfig, SinkhornDiagnostics};
use crate::synth::{alignment_experiment, generate, ClusterSpec};
use crate::transport::{align, ProjectionConfig, ProjectionMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "otalign",
    version,
    about = "Entropic OT alignment of frame-embedding sequences"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transport a source sequence onto a target pool and write the result.
    Transport(TransportArgs),
    /// Concatenate utterances into one target pool.
    Pool(PoolArgs),
    /// Equal error rate of a labeled score file.
    Eer(EerArgs),
    /// Fréchet distance between Gaussian fits of two embedding files.
    Fad(FadArgs),
    /// Write a synthetic Gaussian-cluster sequence.
    Synth(SynthArgs),
    /// Run a synthetic before/after alignment experiment.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Full,
    Topk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    Given,
    DurationDesc,
}

impl From<OrderArg> for PoolOrder {
    fn from(o: OrderArg) -> Self {
        match o {
            OrderArg::Given => PoolOrder::AsGiven,
            OrderArg::DurationDesc => PoolOrder::ByDurationDesc,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OtArgs {
    /// Entropic regularization.
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// Targets kept per frame in top-k mode.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Topk)]
    pub mode: ModeArg,
    /// L-infinity marginal tolerance.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iters: usize,
}

impl OtArgs {
    fn sinkhorn(&self) -> Result<SinkhornConfig> {
        let cfg = SinkhornConfig {
            epsilon: self.epsilon,
            max_iters: self.max_iters,
            tolerance: self.tol,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn projection(&self) -> Result<ProjectionConfig> {
        if self.k == 0 {
            return Err(Error::Config("--k must be at least 1".into()));
        }
        Ok(ProjectionConfig {
            k: self.k,
            mode: match self.mode {
                ModeArg::Full => ProjectionMode::Full,
                ModeArg::Topk => ProjectionMode::TopK,
            },
        })
    }

    fn record(&self, m: &mut Manifest) {
        m.param("epsilon", self.epsilon);
        m.param("k", self.k);
        m.param(
            "mode",
            match self.mode {
                ModeArg::Full => "full",
                ModeArg::Topk => "topk",
            },
        );
        m.param("tol", self.tol);
        m.param("max_iters", self.max_iters);
    }
}

#[derive(Debug, Clone, Args)]
pub struct TransportArgs {
    /// Source EMB1 file.
    pub source: PathBuf,
    /// One or more target EMB1 files, concatenated into the pool.
    #[arg(required = true)]
    pub pool: Vec<PathBuf>,
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = OrderArg::Given)]
    pub order: OrderArg,
    #[command(flatten)]
    pub ot: OtArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PoolArgs {
    #[arg(required = true)]
    pub utterances: Vec<PathBuf>,
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = OrderArg::DurationDesc)]
    pub order: OrderArg,
}

#[derive(Debug, Clone, Args)]
pub struct EerArgs {
    pub scores: PathBuf,
    /// Treat lower scores as more bonafide-like.
    #[arg(long)]
    pub negate_scores: bool,
}

#[derive(Debug, Clone, Args)]
pub struct FadArgs {
    pub a: PathBuf,
    pub b: PathBuf,
}

fn parse_center(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect()
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Cluster center as comma-separated components; repeat for more centers.
    #[arg(long = "center", required = true, value_parser = parse_center)]
    pub centers: Vec<Vec<f64>>,
    #[arg(long, default_value_t = 1.0)]
    pub spread: f64,
    #[arg(long, default_value_t = 50)]
    pub frames_per_center: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    #[arg(long = "source-center", required = true, value_parser = parse_center)]
    pub source_centers: Vec<Vec<f64>>,
    #[arg(long = "target-center", required = true, value_parser = parse_center)]
    pub target_centers: Vec<Vec<f64>>,
    #[arg(long, default_value_t = 1.0)]
    pub spread: f64,
    /// Defaults to --spread.
    #[arg(long)]
    pub target_spread: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub frames_per_center: usize,
    /// Defaults to --frames-per-center.
    #[arg(long)]
    pub target_frames_per_center: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Defaults to --seed + 1.
    #[arg(long)]
    pub target_seed: Option<u64>,
    #[command(flatten)]
    pub ot: OtArgs,
}

fn cluster_spec(centers: &[Vec<f64>], spread: f64, per: usize, seed: u64) -> ClusterSpec {
    ClusterSpec {
        dim: centers.first().map_or(0, Vec::len),
        centers: centers.to_vec(),
        spread,
        frames_per_center: per,
        seed,
    }
}

/// Content hash used in manifests.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn hash_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// `key=value` sidecar recording inputs, parameters, outputs and diagnostics.
#[derive(Debug, Default)]
pub struct Manifest {
    lines: Vec<String>,
    inputs: usize,
    outputs: usize,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Manifest {
            lines: vec![format!("command={command}")],
            ..Default::default()
        }
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        let hash = hash_file(path)?;
        let i = self.inputs;
        self.lines
            .push(format!("input.{i}.path={}", path.display()));
        self.lines.push(format!("input.{i}.sha256={hash}"));
        self.inputs += 1;
        Ok(())
    }

    fn param(&mut self, key: &str, value: impl std::fmt::Display) {
        self.lines.push(format!("param.{key}={value}"));
    }

    fn output(&mut self, path: &Path, bytes: &[u8]) {
        let i = self.outputs;
        self.lines
            .push(format!("output.{i}.path={}", path.display()));
        self.lines
            .push(format!("output.{i}.sha256={}", sha256_hex(bytes)));
        self.outputs += 1;
    }

    fn diagnostics(&mut self, d: &SinkhornDiagnostics) {
        self.lines
            .push(format!("diag.iterations_used={}", d.iterations_used));
        self.lines
            .push(format!("diag.final_violation={:e}", d.final_violation));
        self.lines.push(format!("diag.converged={}", d.converged()));
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for l in &self.lines {
            let _ = writeln!(s, "{l}");
        }
        s
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    sidecar(out, "manifest")
}

pub fn provenance_path(out: &Path) -> PathBuf {
    sidecar(out, "provenance")
}

fn sidecar(out: &Path, ext: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Writes `seq` to `out` and records it in the manifest, then writes the manifest.
fn write_outputs(seq: &EmbeddingSequence, out: &Path, mut manifest: Manifest) -> Result<()> {
    let bytes = encode_emb1(seq);
    write_atomic(out, &bytes)?;
    manifest.output(out, &bytes);
    write_atomic(&manifest_path(out), manifest.render().as_bytes())
}

fn load_pool(paths: &[PathBuf], order: PoolOrder, m: &mut Manifest) -> Result<TargetPool> {
    let mut utts = Vec::with_capacity(paths.len());
    for p in paths {
        utts.push(read_embeddings(p)?);
        m.input(p)?;
    }
    Ok(build_pool(&utts, order)?)
}

fn order_name(o: OrderArg) -> &'static str {
    match o {
        OrderArg::Given => "given",
        OrderArg::DurationDesc => "duration-desc",
    }
}

fn cmd_transport(args: &TransportArgs, _out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let sinkhorn_cfg = args.ot.sinkhorn()?;
    let proj_cfg = args.ot.projection()?;
    let mut manifest = Manifest::new("transport");
    let source = read_embeddings(&args.source)?;
    manifest.input(&args.source)?;
    let pool = load_pool(&args.pool, args.order.into(), &mut manifest)?;
    args.ot.record(&mut manifest);
    manifest.param("order", order_name(args.order));

    let result = align(&source, &pool, &sinkhorn_cfg, &proj_cfg)?;
    manifest.diagnostics(&result.diagnostics);
    write_outputs(&result.transported, &args.out, manifest)?;

    let d = result.diagnostics;
    if d.converged() {
        Ok(EXIT_OK)
    } else {
        let _ = writeln!(
            err,
            "warning: Sinkhorn stopped after {} iterations with marginal violation {:e} (tolerance {:e})",
            d.iterations_used, d.final_violation, d.tolerance
        );
        Ok(EXIT_NOT_CONVERGED)
    }
}

fn cmd_pool(args: &PoolArgs) -> Result<i32> {
    let mut manifest = Manifest::new("pool");
    let pool = load_pool(&args.utterances, args.order.into(), &mut manifest)?;
    manifest.param("order", order_name(args.order));

    let mut prov = String::new();
    for (i, (id, frames)) in pool.provenance.iter().enumerate() {
        let _ = writeln!(prov, "utterance.{i}.source_id={id}");
        let _ = writeln!(prov, "utterance.{i}.frames={frames}");
    }
    let _ = writeln!(prov, "total_frames={}", pool.len());
    let prov_path = provenance_path(&args.out);
    write_atomic(&prov_path, prov.as_bytes())?;
    manifest.output(&prov_path, prov.as_bytes());
    write_outputs(&pool.sequence, &args.out, manifest)?;
    Ok(EXIT_OK)
}

fn cmd_eer(args: &EerArgs, out: &mut dyn Write) -> Result<i32> {
    let mut scores = read_scores(&args.scores)?;
    if args.negate_scores {
        scores = scores.negated();
    }
    let eer = compute_eer(&scores)?;
    let _ = writeln!(
        out,
        "EER {:.3}% threshold {}",
        eer.rate * 100.0,
        eer.threshold
    );
    Ok(EXIT_OK)
}

fn cmd_fad(args: &FadArgs, out: &mut dyn Write) -> Result<i32> {
    let a = gaussian_stats(&read_embeddings(&args.a)?)?;
    let b = gaussian_stats(&read_embeddings(&args.b)?)?;
    let _ = writeln!(out, "{:.3}", frechet_distance(&a, &b)?);
    Ok(EXIT_OK)
}

fn cmd_synth(args: &SynthArgs) -> Result<i32> {
    let spec = cluster_spec(
        &args.centers,
        args.spread,
        args.frames_per_center,
        args.seed,
    );
    let seq = generate(&spec)?;
    let mut manifest = Manifest::new("synth");
    for (i, c) in args.centers.iter().enumerate() {
        let joined: Vec<String> = c.iter().map(f64::to_string).collect();
        manifest.param(&format!("center.{i}"), joined.join(","));
    }
    manifest.param("spread", args.spread);
    manifest.param("frames_per_center", args.frames_per_center);
    manifest.param("seed", args.seed);
    write_outputs(&seq, &args.out, manifest)?;
    Ok(EXIT_OK)
}

fn cmd_experiment(args: &ExperimentArgs, out: &mut dyn Write) -> Result<i32> {
    let sinkhorn_cfg = args.ot.sinkhorn()?;
    let proj_cfg = args.ot.projection()?;
    let source = cluster_spec(
        &args.source_centers,
        args.spread,
        args.frames_per_center,
        args.seed,
    );
    let target = cluster_spec(
        &args.target_centers,
        args.target_spread.unwrap_or(args.spread),
        args.target_frames_per_center
            .unwrap_or(args.frames_per_center),
        args.target_seed.unwrap_or(args.seed.wrapping_add(1)),
    );
    let report = alignment_experiment(&source, &target, &sinkhorn_cfg, &proj_cfg)?;
    let _ = out.write_all(report.to_kv().as_bytes());
    Ok(if report.diagnostics.converged() {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Transport(a) => cmd_transport(a, out, err),
        Command::Pool(a) => cmd_pool(a),
        Command::Eer(a) => cmd_eer(a, out),
        Command::Fad(a) => cmd_fad(a, out),
        Command::Synth(a) => cmd_synth(a),
        Command::Experiment(a) => cmd_experiment(a, out),
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(rendered.as_bytes())
            } else {
                out.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_io() {
                EXIT_IO
            } else {
                EXIT_INVALID
            }
        }
    }
}
