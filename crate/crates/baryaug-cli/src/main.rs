//! Command-line pipeline: distance matrices, neighborhood graphs, cliques,
//! barycentric oversampling, evaluation, heatmaps, and the covering-bound
//! verifier. Every command writes a run manifest next to its output and all
//! randomness flows from `--seed`.

mod commands;

use baryaug::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "baryaug", version, about = "Wasserstein-barycentric oversampling for landmark datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OtKind {
    Exact,
    Sinkhorn,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RuleKind {
    Knn,
    Cknn,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Json,
    Csv,
}

/// Input options shared by commands that read a landmark file.
#[derive(Args)]
struct InputOpts {
    /// Landmark file (JSON by default)
    #[arg(long)]
    input: PathBuf,
    /// Treat the input as CSV (one cloud per row, 2s columns)
    #[arg(long)]
    csv_input: bool,
    /// Ordered flag for CSV inputs (the JSON format carries its own)
    #[arg(long)]
    ordered: bool,
}

/// Cloud-level solver options.
#[derive(Args)]
struct OtOpts {
    /// Solver for cloud-level W2
    #[arg(long, value_enum, default_value = "exact")]
    ot: OtKind,
    /// Sinkhorn regularization relative to the squared support diameter
    #[arg(long, default_value_t = 1e-2)]
    epsilon: f64,
    /// Sinkhorn iteration cap
    #[arg(long, default_value_t = 2000)]
    max_iter: usize,
    /// Cardinality cap for the exact solver
    #[arg(long, default_value_t = 64)]
    exact_cap: usize,
}

impl OtOpts {
    fn method(&self) -> baryaug::OtMethod {
        match self.ot {
            OtKind::Exact => baryaug::OtMethod::Exact {
                cap: self.exact_cap,
            },
            OtKind::Sinkhorn => baryaug::OtMethod::Sinkhorn(baryaug::SinkhornParams {
                epsilon_rel: self.epsilon,
                max_iter: self.max_iter,
                ..Default::default()
            }),
        }
    }
}

/// Graph construction options.
#[derive(Args)]
struct GraphOpts {
    /// Neighbors per vertex
    #[arg(long, default_value_t = 15)]
    k: usize,
    /// Graph rule
    #[arg(long, value_enum, default_value = "knn")]
    rule: RuleKind,
    /// Density parameter for the cknn rule
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Mutual-kNN symmetrization instead of the union rule
    #[arg(long)]
    mutual: bool,
}

impl GraphOpts {
    fn variant(&self) -> baryaug::GraphVariant {
        match self.rule {
            RuleKind::Knn => baryaug::GraphVariant::Knn {
                mutual: self.mutual,
            },
            RuleKind::Cknn => baryaug::GraphVariant::Cknn { delta: self.delta },
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Pairwise W2 distance matrix with a binary cache
    Dist {
        #[command(flatten)]
        input: InputOpts,
        /// Output CSV matrix
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        ot: OtOpts,
        /// Worker threads (0 = all cores)
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Recompute even when a fresh cache exists
        #[arg(long)]
        force: bool,
    },
    /// Neighborhood graph from a distance matrix
    Graph {
        /// Input CSV matrix
        #[arg(long)]
        matrix: PathBuf,
        /// Output graph file (`n`/`edge` lines)
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        graph: GraphOpts,
    },
    /// Maximal cliques of a neighborhood graph
    Cliques {
        /// Input graph file
        #[arg(long)]
        graph: PathBuf,
        /// Output complex file (`clique` lines)
        #[arg(long)]
        output: PathBuf,
        /// Replace bigger cliques by their subsets of this size
        #[arg(long)]
        max_clique_size: Option<usize>,
        /// Abort beyond this many cliques
        #[arg(long, default_value_t = 1_000_000)]
        clique_limit: usize,
    },
    /// Barycentric oversampling end to end
    Augment {
        #[command(flatten)]
        input: InputOpts,
        /// Output landmark file; a provenance sidecar lands next to it
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        graph: GraphOpts,
        #[command(flatten)]
        ot: OtOpts,
        /// Number of synthetic samples
        #[arg(long, default_value_t = 7000)]
        n_aug: usize,
        /// Master seed for all randomness
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Replace bigger cliques by their subsets of this size
        #[arg(long)]
        max_clique_size: Option<usize>,
        /// Coordinate-wise closed form for ordered uniform datasets
        #[arg(long)]
        ordered_fast_path: bool,
        /// Worker threads (0 = all cores)
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Geometric baseline: random rotation/scaling about the centroid
    GeomAugment {
        #[command(flatten)]
        input: InputOpts,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        n_aug: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scale range half-width: scales are U(1-s, 1+s)
        #[arg(long, default_value_t = 0.10)]
        scale_max: f64,
        /// Rotation range half-width in radians
        #[arg(long, default_value_t = std::f64::consts::PI / 12.0)]
        rot_max: f64,
        /// Probability of transforming (vs copying) each sample
        #[arg(long, default_value_t = 0.3)]
        prob: f64,
    },
    /// Set-level metrics between two landmark files
    Eval {
        /// First landmark file (the augmented/candidate set)
        #[arg(long)]
        set_a: PathBuf,
        /// Second landmark file (the held-out reference set)
        #[arg(long)]
        set_b: PathBuf,
        #[command(flatten)]
        ot: OtOpts,
        /// Neighbor count for the KL estimate
        #[arg(long, default_value_t = 5)]
        kl_k: usize,
        /// Effective dimension for the KL estimate (default 2s)
        #[arg(long)]
        dim_eff: Option<f64>,
        /// Write the report here (stdout summary is always printed)
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: ReportFormat,
        /// Sweep mode: subsample set A at --sizes, augment, score vs set B
        #[arg(long)]
        sweep: bool,
        /// Subset sizes for sweep mode
        #[arg(long, value_delimiter = ',', default_values_t = vec![100, 300, 600])]
        sizes: Vec<usize>,
        /// Reseeded runs per size in sweep mode
        #[arg(long, default_value_t = 20)]
        runs: usize,
        /// kNN parameter for sweep-mode augmentation
        #[arg(long, default_value_t = 15)]
        k: usize,
        /// Samples per sweep-mode augmentation
        #[arg(long, default_value_t = 200)]
        n_aug: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads (0 = all cores)
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Render Gaussian heatmaps, one binary file per cloud
    Heatmap {
        #[command(flatten)]
        input: InputOpts,
        /// Output directory
        #[arg(long)]
        out_dir: PathBuf,
        /// Gaussian width in pixels
        #[arg(long, default_value_t = 4.0)]
        sigma: f64,
        #[arg(long, default_value_t = 64)]
        height: usize,
        #[arg(long, default_value_t = 64)]
        width: usize,
        /// Single-channel sum instead of per-landmark channels
        #[arg(long)]
        unordered: bool,
        /// Also write the portable text grids
        #[arg(long)]
        text: bool,
        /// Normalize to peak 1 instead of sum 1
        #[arg(long)]
        peak_one: bool,
    },
    /// Monte-Carlo check of the simplex covering bound
    VerifyTheorem {
        /// Landmark file whose clouds are the simplex vertices
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        n_mc: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            match e.kind() {
                ErrorKind::Input => ExitCode::from(2),
                ErrorKind::Numeric => ExitCode::from(3),
                ErrorKind::Resource => ExitCode::from(4),
            }
        }
    }
}
