use crate::{Command, InputOpts, OtOpts, ReportFormat};
use baryaug::formats::{self, RunManifest};
use baryaug::{AugmentationConfig, Dataset, Error, PointCloud, Result};
use serde_json::json;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

const VERSION: &str = env!("CARGO_PKG_VERSION");
const CACHE_DIR_ENV: &str = "BARYAUG_CACHE_DIR";

fn init_threads(threads: usize) {
    if threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

fn read_input(opts: &InputOpts) -> Result<Dataset> {
    if opts.csv_input {
        formats::read_landmarks_csv(&opts.input, opts.ordered)
    } else {
        formats::read_landmarks(&opts.input)
    }
}

fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".into());
    name.push_str(".manifest.json");
    output.with_file_name(name)
}

struct ManifestBuilder {
    command: String,
    config: serde_json::Value,
    inputs: BTreeMap<String, String>,
    seed: Option<u64>,
    timings: BTreeMap<String, u64>,
}

impl ManifestBuilder {
    fn new(command: &str, config: serde_json::Value) -> Self {
        Self {
            command: command.into(),
            config,
            inputs: BTreeMap::new(),
            seed: None,
            timings: BTreeMap::new(),
        }
    }

    fn input(mut self, path: &Path) -> Result<Self> {
        self.inputs.insert(
            path.display().to_string(),
            formats::sha256_file(path)?,
        );
        Ok(self)
    }

    fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    fn timing(mut self, stage: &str, elapsed: std::time::Duration) -> Self {
        self.timings.insert(stage.into(), elapsed.as_millis() as u64);
        self
    }

    fn write(self, output: &Path) -> Result<()> {
        formats::write_manifest(
            &manifest_path(output),
            &RunManifest {
                command: self.command,
                config: self.config,
                input_digests: self.inputs,
                seed: self.seed,
                tool_version: VERSION.into(),
                timings_ms: self.timings,
            },
        )
    }
}

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Dist {
            input,
            output,
            ot,
            threads,
            force,
        } => dist(input, output, ot, threads, force),
        Command::Graph {
            matrix,
            output,
            graph,
        } => graph_cmd(matrix, output, graph),
        Command::Cliques {
            graph,
            output,
            max_clique_size,
            clique_limit,
        } => cliques_cmd(graph, output, max_clique_size, clique_limit),
        Command::Augment {
            input,
            output,
            graph,
            ot,
            n_aug,
            seed,
            max_clique_size,
            ordered_fast_path,
            threads,
        } => augment_cmd(
            input,
            output,
            graph,
            ot,
            n_aug,
            seed,
            max_clique_size,
            ordered_fast_path,
            threads,
        ),
        Command::GeomAugment {
            input,
            output,
            n_aug,
            seed,
            scale_max,
            rot_max,
            prob,
        } => geom_augment_cmd(input, output, n_aug, seed, scale_max, rot_max, prob),
        Command::Eval {
            set_a,
            set_b,
            ot,
            kl_k,
            dim_eff,
            output,
            format,
            sweep,
            sizes,
            runs,
            k,
            n_aug,
            seed,
            threads,
        } => {
            init_threads(threads);
            if sweep {
                eval_sweep(set_a, set_b, ot, output, sizes, runs, k, n_aug, seed)
            } else {
                eval_simple(set_a, set_b, ot, kl_k, dim_eff, output, format)
            }
        }
        Command::Heatmap {
            input,
            out_dir,
            sigma,
            height,
            width,
            unordered,
            text,
            peak_one,
        } => heatmap_cmd(input, out_dir, sigma, height, width, unordered, text, peak_one),
        Command::VerifyTheorem { input, n_mc, seed } => verify_theorem_cmd(input, n_mc, seed),
    }
}

fn cache_path(output: &Path, digest: &str, fingerprint: &str) -> PathBuf {
    let dir = std::env::var_os(CACHE_DIR_ENV)
        .map(PathBuf::from)
        .or_else(|| output.parent().map(|p| p.to_path_buf()))
        .unwrap_or_else(|| PathBuf::from("."));
    dir.join(format!("{}-{}.bawc", &digest[..16], fingerprint))
}

fn dist(input: InputOpts, output: PathBuf, ot: OtOpts, threads: usize, force: bool) -> Result<()> {
    init_threads(threads);
    let dataset = read_input(&input)?;
    let method = ot.method();
    let fingerprint = method.fingerprint();
    let digest = formats::sha256_file(&input.input)?;
    let cache = cache_path(&output, &digest, &fingerprint);

    let start = Instant::now();
    let (matrix, cache_state) = if !force && cache.is_file() {
        match formats::read_matrix_cache(&cache, &digest, &fingerprint) {
            Ok(m) => (m, "hit"),
            Err(Error::StaleCache(_)) | Err(Error::Parse { .. }) => {
                let m = baryaug::pairwise_matrix(&dataset, &method, true)?;
                (m, "stale")
            }
            Err(e) => return Err(e),
        }
    } else {
        let m = baryaug::pairwise_matrix(&dataset, &method, true)?;
        (m, "miss")
    };
    let compute = start.elapsed();

    formats::write_matrix_csv(&output, &matrix)?;
    if cache_state != "hit" {
        if let Some(parent) = cache.parent() {
            std::fs::create_dir_all(parent)?;
        }
        formats::write_matrix_cache(&cache, &matrix, &digest)?;
    }
    ManifestBuilder::new("dist", json!({"method": fingerprint, "cache": cache_state}))
        .input(&input.input)?
        .timing("compute", compute)
        .write(&output)?;
    println!(
        "n={} method={} compute_seconds={:.6} cache={}",
        matrix.n(),
        fingerprint,
        compute.as_secs_f64(),
        cache_state
    );
    Ok(())
}

fn graph_cmd(matrix: PathBuf, output: PathBuf, opts: crate::GraphOpts) -> Result<()> {
    let m = formats::read_matrix_csv(&matrix, None)?;
    let start = Instant::now();
    let g = match opts.variant() {
        baryaug::GraphVariant::Knn { mutual } => baryaug::knn_graph_with(&m, opts.k, mutual)?,
        baryaug::GraphVariant::Cknn { delta } => baryaug::cknn_graph(&m, opts.k, delta)?,
    };
    let elapsed = start.elapsed();
    formats::write_graph(&output, &g)?;
    ManifestBuilder::new(
        "graph",
        json!({"k": opts.k, "rule": format!("{:?}", g.rule())}),
    )
    .input(&matrix)?
    .timing("build", elapsed)
    .write(&output)?;
    println!("n={} edges={}", g.n(), g.edges().len());
    Ok(())
}

fn cliques_cmd(
    graph: PathBuf,
    output: PathBuf,
    max_clique_size: Option<usize>,
    clique_limit: usize,
) -> Result<()> {
    let g = formats::read_graph(&graph)?;
    let opts = baryaug::CliqueOptions {
        max_clique_size,
        clique_limit,
    };
    let start = Instant::now();
    let complex = baryaug::maximal_cliques(&g, &opts)?;
    let elapsed = start.elapsed();
    formats::write_cliques(&output, &complex)?;
    ManifestBuilder::new(
        "cliques",
        json!({"max_clique_size": max_clique_size, "clique_limit": clique_limit}),
    )
    .input(&graph)?
    .timing("enumerate", elapsed)
    .write(&output)?;
    let largest = complex.cliques().iter().map(|c| c.len()).max().unwrap_or(0);
    println!("n={} cliques={} largest={}", g.n(), complex.len(), largest);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn augment_cmd(
    input: InputOpts,
    output: PathBuf,
    graph: crate::GraphOpts,
    ot: OtOpts,
    n_aug: usize,
    seed: u64,
    max_clique_size: Option<usize>,
    ordered_fast_path: bool,
    threads: usize,
) -> Result<()> {
    init_threads(threads);
    let dataset = read_input(&input)?;
    let method = ot.method();
    let cfg = AugmentationConfig {
        k: graph.k,
        n_aug,
        graph: graph.variant(),
        ot: method.clone(),
        cliques: baryaug::CliqueOptions {
            max_clique_size,
            ..Default::default()
        },
        ordered_fast_path,
        master_seed: seed,
        parallel: true,
        ..Default::default()
    };

    // reuse a fresh dist cache when one is sitting next to the output
    let digest = formats::sha256_file(&input.input)?;
    let cache = cache_path(&output, &digest, &method.fingerprint());
    let start = Instant::now();
    let samples = match formats::read_matrix_cache(&cache, &digest, &method.fingerprint()) {
        Ok(matrix) => baryaug::augment_with_matrix(&dataset, &matrix, &cfg)?,
        Err(_) => baryaug::augment(&dataset, &cfg)?,
    };
    let elapsed = start.elapsed();

    let clouds: Vec<PointCloud> = samples.iter().map(|s| s.cloud.clone()).collect();
    let augmented = Dataset::new(clouds)?;
    let sidecar = output.with_extension("provenance.ldjson");
    let write_all = || -> Result<()> {
        formats::write_landmarks(&output, &augmented)?;
        formats::write_provenance(&sidecar, &samples)?;
        ManifestBuilder::new(
            "augment",
            json!({
                "k": graph.k,
                "n_aug": n_aug,
                "rule": match graph.rule { crate::RuleKind::Knn => "knn", crate::RuleKind::Cknn => "cknn" },
                "delta": graph.delta,
                "mutual": graph.mutual,
                "method": method.fingerprint(),
                "max_clique_size": max_clique_size,
                "ordered_fast_path": ordered_fast_path,
            }),
        )
        .input(&input.input)?
        .seed(seed)
        .timing("augment", elapsed)
        .write(&output)?;
        Ok(())
    };
    if let Err(e) = write_all() {
        // no partial artifacts on failure
        let _ = std::fs::remove_file(&output);
        let _ = std::fs::remove_file(&sidecar);
        let _ = std::fs::remove_file(manifest_path(&output));
        return Err(e);
    }
    println!(
        "n={} n_aug={} seed={} seconds={:.6}",
        dataset.len(),
        samples.len(),
        seed,
        elapsed.as_secs_f64()
    );
    Ok(())
}

fn geom_augment_cmd(
    input: InputOpts,
    output: PathBuf,
    n_aug: usize,
    seed: u64,
    scale_max: f64,
    rot_max: f64,
    prob: f64,
) -> Result<()> {
    let dataset = read_input(&input)?;
    let start = Instant::now();
    let clouds = baryaug::geometric_augment(&dataset, scale_max, rot_max, prob, n_aug, seed)?;
    let elapsed = start.elapsed();
    formats::write_landmarks(&output, &Dataset::new(clouds)?)?;
    ManifestBuilder::new(
        "geom-augment",
        json!({"scale_max": scale_max, "rot_max": rot_max, "prob": prob, "n_aug": n_aug}),
    )
    .input(&input.input)?
    .seed(seed)
    .timing("augment", elapsed)
    .write(&output)?;
    println!("n={} n_aug={} seed={}", dataset.len(), n_aug, seed);
    Ok(())
}

fn eval_simple(
    set_a: PathBuf,
    set_b: PathBuf,
    ot: OtOpts,
    kl_k: usize,
    dim_eff: Option<f64>,
    output: Option<PathBuf>,
    format: ReportFormat,
) -> Result<()> {
    let a = formats::read_landmarks(&set_a)?;
    let b = formats::read_landmarks(&set_b)?;
    let method = ot.method();
    let start = Instant::now();
    let meta = baryaug::meta_w2(&a, &b, &method)?;
    let kl = match baryaug::knn_kl(&a, &b, kl_k, dim_eff, &method) {
        Ok(v) => Some(v),
        Err(Error::SetTooSmall { .. }) => None,
        Err(e) => return Err(e),
    };
    let elapsed = start.elapsed();
    let report = baryaug::EvalReport {
        meta_w2: meta,
        kl_estimate: kl,
        size_a: a.len(),
        size_b: b.len(),
        ground_method: method.fingerprint(),
        kl_k: kl.map(|_| kl_k),
        kl_dim_eff: kl.map(|_| dim_eff.unwrap_or(2.0 * a.cloud(0).len() as f64)),
    };
    println!(
        "meta_w2={} kl={} sizes={}x{} method={}",
        report.meta_w2,
        report
            .kl_estimate
            .map(|v| v.to_string())
            .unwrap_or_else(|| "n/a".into()),
        report.size_a,
        report.size_b,
        report.ground_method
    );
    let out = output.unwrap_or_else(|| set_a.with_extension("eval.json"));
    match format {
        ReportFormat::Json => {
            let file = std::fs::File::create(&out)?;
            serde_json::to_writer_pretty(file, &report).map_err(|e| Error::Io(e.into()))?;
        }
        ReportFormat::Csv => {
            let kl = report
                .kl_estimate
                .map(|v| v.to_string())
                .unwrap_or_default();
            std::fs::write(
                &out,
                format!(
                    "meta_w2,kl_estimate,size_a,size_b,method\n{},{},{},{},{}\n",
                    report.meta_w2, kl, report.size_a, report.size_b, report.ground_method
                ),
            )?;
        }
    }
    ManifestBuilder::new("eval", json!({"kl_k": kl_k, "method": report.ground_method}))
        .input(&set_a)?
        .input(&set_b)?
        .timing("eval", elapsed)
        .write(&out)?;
    Ok(())
}

/// Seeded subsample of distinct indices (partial Fisher-Yates).
fn subsample_indices(n: usize, take: usize, rng: &mut impl rand::Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..take.min(n) {
        let j = i + rng.random_range(0..n - i);
        idx.swap(i, j);
    }
    idx.truncate(take.min(n));
    idx
}

fn median_iqr(mut vals: Vec<f64>) -> (f64, f64, f64) {
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| -> f64 {
        let pos = p * (vals.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        vals[lo] + (vals[hi] - vals[lo]) * (pos - lo as f64)
    };
    (q(0.5), q(0.25), q(0.75))
}

#[allow(clippy::too_many_arguments)]
fn eval_sweep(
    set_a: PathBuf,
    set_b: PathBuf,
    ot: OtOpts,
    output: Option<PathBuf>,
    sizes: Vec<usize>,
    runs: usize,
    k: usize,
    n_aug: usize,
    seed: u64,
) -> Result<()> {
    use rand::{Rng, SeedableRng};
    let pool = formats::read_landmarks(&set_a)?;
    let holdout = formats::read_landmarks(&set_b)?;
    let method = ot.method();
    if runs == 0 {
        return Err(Error::BadParameter {
            name: "runs",
            reason: "must be >= 1".into(),
        });
    }
    let start = Instant::now();
    let mut rows = Vec::new();
    for (si, &size) in sizes.iter().enumerate() {
        if size > pool.len() {
            return Err(Error::BadParameter {
                name: "sizes",
                reason: format!("size {size} exceeds pool of {}", pool.len()),
            });
        }
        let mut values = Vec::with_capacity(runs);
        for run in 0..runs {
            let mut rng =
                rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ ((si as u64) << 32 | run as u64));
            let subset = Dataset::new(
                subsample_indices(pool.len(), size, &mut rng)
                    .into_iter()
                    .map(|i| pool.cloud(i).clone())
                    .collect(),
            )?;
            let cfg = AugmentationConfig {
                k,
                n_aug,
                ot: method.clone(),
                master_seed: rng.random::<u64>(),
                parallel: true,
                ..Default::default()
            };
            let samples = baryaug::augment(&subset, &cfg)?;
            // equal-size comparison so the set-level OT is an assignment
            let m = n_aug.min(holdout.len());
            let aug_set = Dataset::new(
                subsample_indices(samples.len(), m, &mut rng)
                    .into_iter()
                    .map(|i| samples[i].cloud.clone())
                    .collect(),
            )?;
            let ref_set = Dataset::new(
                subsample_indices(holdout.len(), m, &mut rng)
                    .into_iter()
                    .map(|i| holdout.cloud(i).clone())
                    .collect(),
            )?;
            values.push(baryaug::meta_w2(&aug_set, &ref_set, &method)?);
        }
        let (median, q1, q3) = median_iqr(values);
        println!("size={size} runs={runs} median={median} q1={q1} q3={q3}");
        rows.push((size, median, q1, q3));
    }
    let elapsed = start.elapsed();
    let out = output.unwrap_or_else(|| set_a.with_extension("sweep.csv"));
    let mut csv = String::from("size,median_meta_w2,q1,q3\n");
    for (size, median, q1, q3) in &rows {
        csv.push_str(&format!("{size},{median},{q1},{q3}\n"));
    }
    std::fs::write(&out, csv)?;
    ManifestBuilder::new(
        "eval-sweep",
        json!({"sizes": sizes, "runs": runs, "k": k, "n_aug": n_aug, "method": method.fingerprint()}),
    )
    .input(&set_a)?
    .input(&set_b)?
    .seed(seed)
    .timing("sweep", elapsed)
    .write(&out)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn heatmap_cmd(
    input: InputOpts,
    out_dir: PathBuf,
    sigma: f64,
    height: usize,
    width: usize,
    unordered: bool,
    text: bool,
    peak_one: bool,
) -> Result<()> {
    let dataset = read_input(&input)?;
    std::fs::create_dir_all(&out_dir)?;
    let normalization = if peak_one {
        baryaug::Normalization::PeakOne
    } else {
        baryaug::Normalization::SumOne
    };
    let start = Instant::now();
    let mut clipped = 0usize;
    for (i, cloud) in dataset.clouds().iter().enumerate() {
        let h = if unordered {
            baryaug::render_unordered_with(cloud, sigma, height, width, normalization)?
        } else {
            baryaug::render_with(cloud, sigma, height, width, normalization)?
        };
        clipped += usize::from(!h.out_of_frame().is_empty());
        let path = out_dir.join(format!("heatmap_{i:05}.bahm"));
        formats::write_heatmap(&path, &h)?;
        if text {
            formats::write_heatmap_text(&out_dir.join(format!("heatmap_{i:05}.txt")), &h)?;
        }
    }
    let elapsed = start.elapsed();
    ManifestBuilder::new(
        "heatmap",
        json!({
            "sigma": sigma, "height": height, "width": width,
            "unordered": unordered, "normalization": if peak_one { "peak" } else { "sum" },
        }),
    )
    .input(&input.input)?
    .timing("render", elapsed)
    .write(&out_dir.join("heatmaps"))?;
    println!(
        "clouds={} size={}x{} sigma={} out_of_frame={}",
        dataset.len(),
        height,
        width,
        sigma,
        clipped
    );
    Ok(())
}

fn verify_theorem_cmd(input: PathBuf, n_mc: usize, seed: u64) -> Result<()> {
    let dataset = formats::read_landmarks(&input)?;
    let vertices = dataset.clouds();
    let k = vertices.len();
    let coords = baryaug::BarycentricCoordinates::new(vec![1.0 / k as f64; k])?;
    let start = Instant::now();
    let interior =
        baryaug::free_support_barycenter(vertices, &coords, &Default::default())?.cloud;
    let check = baryaug::verify_covering_bound(vertices, &interior, n_mc, seed)?;
    let elapsed = start.elapsed();
    println!(
        "vertices={} bound={} estimate={} std_error={} draws={} holds={}",
        k, check.bound, check.mc_estimate, check.std_error, check.n_draws, check.holds
    );
    let out = input.with_extension("covering.json");
    let file = std::fs::File::create(&out)?;
    serde_json::to_writer_pretty(file, &check).map_err(|e| Error::Io(e.into()))?;
    ManifestBuilder::new("verify-theorem", json!({"n_mc": n_mc}))
        .input(&input)?
        .seed(seed)
        .timing("verify", elapsed)
        .write(&out)?;
    Ok(())
}
