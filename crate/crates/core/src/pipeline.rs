//! End-to-end orchestration behind the command-line subcommands.
//!
//! Stages run one after another; parallelism lives inside the stages and is
//! capped by the ambient rayon pool (see [`with_workers`]). Every artifact is
//! a deterministic function of the configuration.

use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::alignment::{align_neighbors, PairEstimate};
use crate::config::{Baseline, ExperimentConfig, Manifold, WeightMode};
use crate::connection::build_sk;
use crate::embedding::{baseline_embedding, nn_search, EmbeddingSet, Method, NeighborList};
use crate::error::{Error, Result};
use crate::evaluation::{score_alignment, score_nn, spectral_report, EvalReport, SpectralReport};
use crate::graph::AlignmentGraph;
use crate::io;
use crate::rng::derive_seed;
use crate::sampling::{build_clean_knn_graph, rewire_graph, GroundTruth};
use crate::spectral::{top_eigenpairs, EigenOptions, SpectralBundle};

/// Environment variable naming the spectral bundle cache directory.
pub const CACHE_ENV: &str = "MFVDM_CACHE_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Generate,
    Embed,
    Nn,
    Align,
    Score,
    Spectrum,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Generate => "generate",
            Stage::Embed => "embed",
            Stage::Nn => "nn",
            Stage::Align => "align",
            Stage::Score => "score",
            Stage::Spectrum => "spectrum",
            Stage::Output => "output",
        })
    }
}

/// An error tagged with the stage that raised it.
#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub source: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.stage, self.source)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

impl StageError {
    /// 1 for configuration problems, 2 for I/O and file formats, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        if self.stage == Stage::Config {
            return 1;
        }
        match self.source {
            Error::Io(_) | Error::Parse { .. } => 2,
            Error::InvalidParameter(_)
            | Error::InvalidGeometry { .. }
            | Error::UnsupportedManifold(_)
            | Error::EmptyInput(_) => 1,
            Error::DegenerateAlignment
            | Error::InvalidGraph(_)
            | Error::ZeroDegree { .. }
            | Error::Convergence { .. }
            | Error::DegenerateEmbedding { .. }
            | Error::UndefinedAlignment => 3,
        }
    }
}

pub type StageResult<T> = std::result::Result<T, StageError>;

trait AtStage<T> {
    fn at(self, stage: Stage) -> StageResult<T>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> StageResult<T> {
        self.map_err(|source| StageError { stage, source })
    }
}

/// Run `f` on a rayon pool with `workers` threads (0 = one per core).
pub fn with_workers<T, F>(workers: usize, f: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::param(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn p_label(p: f64) -> String {
    format!("p{p}")
}

/// Ground truth (absent for external graphs) and the clean graph.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub truth: Option<GroundTruth>,
    pub clean: AlignmentGraph,
}

pub fn build_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let truth = match cfg.manifold {
        Manifold::Sphere => GroundTruth::sphere(cfg.n, cfg.seed)?,
        Manifold::Torus => GroundTruth::torus(cfg.n, cfg.torus_radii()?, cfg.torus_sampling, cfg.seed)?,
        Manifold::External => {
            let path = cfg
                .graph
                .as_deref()
                .ok_or_else(|| Error::param("the external manifold needs a graph file"))?;
            return Ok(Dataset {
                truth: None,
                clean: io::load_graph(path)?,
            });
        }
    };
    let mut clean = build_clean_knn_graph(&truth, cfg.kappa_build)?;
    if let WeightMode::Gaussian { sigma } = cfg.weights {
        clean = clean.with_gaussian_weights(sigma, |i, j| truth.geodesic_distance(i, j))?;
    }
    Ok(Dataset {
        truth: Some(truth),
        clean,
    })
}

/// The clean graph rewired with probability `p`; each `p` has its own
/// random stream.
pub fn noisy_graph(cfg: &ExperimentConfig, clean: &AlignmentGraph, p: f64) -> Result<AlignmentGraph> {
    if p == 1.0 {
        return Ok(clean.clone());
    }
    let (g, stats) = rewire_graph(clean, p, derive_seed(cfg.seed, "rewire", p.to_bits()))?;
    log::info!("rewired at p = {p}: {stats:?}");
    Ok(g)
}

#[derive(Debug, Clone)]
pub struct GenerateOutput {
    pub dataset: Dataset,
    /// One graph per configured `p`, in order.
    pub graphs: Vec<(f64, AlignmentGraph)>,
}

/// Write the ground truth, the clean graph and one rewired graph per `p < 1`.
pub fn cmd_generate(cfg: &ExperimentConfig) -> StageResult<GenerateOutput> {
    cfg.validate().at(Stage::Config)?;
    let dataset = build_dataset(cfg).at(Stage::Generate)?;
    let out = &cfg.out;
    if let Some(truth) = &dataset.truth {
        io::save_ground_truth(truth, &out.join("ground_truth.txt")).at(Stage::Output)?;
    }
    io::save_graph(&dataset.clean, &out.join("graph_clean.txt")).at(Stage::Output)?;
    let mut graphs = Vec::new();
    for &p in &cfg.p {
        let g = noisy_graph(cfg, &dataset.clean, p).at(Stage::Generate)?;
        if p < 1.0 {
            io::save_graph(&g, &out.join(format!("graph_{}.txt", p_label(p)))).at(Stage::Output)?;
        }
        graphs.push((p, g));
    }
    Ok(GenerateOutput { dataset, graphs })
}

/// Cache directory: `$MFVDM_CACHE_DIR` if set, else `<out>/cache`.
pub fn cache_dir(cfg: &ExperimentConfig) -> PathBuf {
    match std::env::var_os(CACHE_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => cfg.out.join("cache"),
    }
}

fn eigen_options(cfg: &ExperimentConfig, k: u32) -> EigenOptions {
    EigenOptions {
        tol: cfg.tol,
        seed: derive_seed(cfg.seed, "lanczos", k as u64),
        ..Default::default()
    }
}

fn cache_path(dir: &Path, graph_hash: &str, k: u32, m: usize, opts: &EigenOptions) -> PathBuf {
    let solver = Sha256::digest(format!("{:e}|{}|{}", opts.tol, opts.seed, opts.dense_threshold));
    let solver = hex::encode(&solver[..6]);
    dir.join(format!("{}_k{k}_m{m}_{solver}.bin", &graph_hash[..24]))
}

/// Spectral bundles with bookkeeping of which came from the cache.
#[derive(Debug, Clone)]
pub struct BundleSet {
    pub bundles: Vec<SpectralBundle>,
    /// Frequencies whose eigenproblem was solved in this call.
    pub solved: Vec<u32>,
    pub cache_hits: Vec<u32>,
}

impl BundleSet {
    pub fn get(&self, k: u32) -> Option<&SpectralBundle> {
        self.bundles.iter().find(|b| b.k == k)
    }
}

/// Top `m` eigenpairs of `S_k` for each `k`, solved in parallel over `k`
/// and cached under `(graph hash, k, m)` plus the solver settings.
pub fn compute_bundles(
    cfg: &ExperimentConfig,
    graph: &AlignmentGraph,
    ks: &[u32],
    m: usize,
    cache: Option<&Path>,
) -> Result<BundleSet> {
    let m = m.min(graph.n());
    let hash = io::graph_hash(graph);
    let results: Vec<(SpectralBundle, bool)> = ks
        .par_iter()
        .map(|&k| {
            let opts = eigen_options(cfg, k);
            let path = cache.map(|dir| cache_path(dir, &hash, k, m, &opts));
            if let Some(path) = path.as_deref().filter(|p| p.exists()) {
                match io::load_bundle(path) {
                    Ok(b) if b.k == k && b.m() == m && b.n() == graph.n() => {
                        log::info!("cache hit for k = {k}: {}", path.display());
                        return Ok((b, true));
                    }
                    _ => log::warn!("ignoring unreadable cache file {}", path.display()),
                }
            }
            let s = build_sk(graph, k)?;
            let bundle = top_eigenpairs(&s, m, &opts)?;
            if let Some(path) = path {
                io::save_bundle(&bundle, &path)?;
            }
            Ok((bundle, false))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut set = BundleSet {
        bundles: Vec::with_capacity(ks.len()),
        solved: Vec::new(),
        cache_hits: Vec::new(),
    };
    for (b, hit) in results {
        if hit {
            set.cache_hits.push(b.k);
        } else {
            set.solved.push(b.k);
        }
        set.bundles.push(b);
    }
    Ok(set)
}

/// Frequencies needed by the configuration: `1..=kmax`, plus 0 for DM.
pub fn required_frequencies(cfg: &ExperimentConfig) -> Vec<u32> {
    let mut ks: Vec<u32> = (1..=cfg.kmax).collect();
    if cfg.baselines.contains(&Baseline::Dm) {
        ks.insert(0, 0);
    }
    ks
}

/// Bundles for every required frequency of one graph.
pub fn cmd_embed(cfg: &ExperimentConfig, graph: &AlignmentGraph) -> StageResult<BundleSet> {
    let dir = cache_dir(cfg);
    compute_bundles(cfg, graph, &required_frequencies(cfg), cfg.mk, Some(&dir)).at(Stage::Embed)
}

/// MFVDM followed by the requested baselines.
pub fn build_embeddings(cfg: &ExperimentConfig, bundles: &BundleSet) -> Result<Vec<EmbeddingSet>> {
    let phase: Vec<&SpectralBundle> = bundles.bundles.iter().filter(|b| b.k >= 1).collect();
    let mut out = vec![EmbeddingSet::new(Method::Mfvdm, &phase, cfg.t)?];
    for b in &cfg.baselines {
        let k = match b {
            Baseline::Vdm => 1,
            Baseline::Dm => 0,
        };
        let bundle = bundles
            .get(k)
            .ok_or_else(|| Error::param(format!("missing k = {k} bundle for baseline")))?;
        out.push(baseline_embedding(bundle, cfg.t, cfg.mk)?);
    }
    Ok(out)
}

/// Results of one embedding method on one graph.
#[derive(Debug, Clone)]
pub struct MethodRun {
    pub method: Method,
    pub neighbors: NeighborList,
    pub alignments: Option<Vec<PairEstimate>>,
    pub report: Option<EvalReport>,
}

/// Search, align and (with ground truth) score one embedding, writing the
/// CSVs and report under `dir`.
pub fn run_method(
    cfg: &ExperimentConfig,
    emb: &EmbeddingSet,
    truth: Option<&GroundTruth>,
    params: &serde_json::Value,
    dir: &Path,
    align: bool,
) -> StageResult<MethodRun> {
    let method = emb.method();
    let tag = method.tag();
    let neighbors = nn_search(emb, cfg.kappa_search).at(Stage::Nn)?;
    io::save_csv(&dir.join(format!("neighbors_{tag}.csv")), |w| {
        io::write_neighbors_csv(&neighbors, w)
    })
    .at(Stage::Output)?;
    let alignments = if align && method.supports_alignment() {
        let est = align_neighbors(emb, &neighbors, cfg.fft_len).at(Stage::Align)?;
        io::save_csv(&dir.join(format!("alignment_{tag}.csv")), |w| {
            io::write_alignment_csv(&est, w)
        })
        .at(Stage::Output)?;
        Some(est)
    } else {
        None
    };
    let report = match truth {
        Some(truth) => {
            let mut report = EvalReport::new(tag.clone(), params.clone());
            let nn = score_nn(&neighbors, truth).at(Stage::Score)?;
            io::save_csv(&dir.join(format!("nn_hist_{tag}.csv")), |w| {
                io::write_histogram_csv(&nn.histogram, w)
            })
            .at(Stage::Output)?;
            report.nn = Some(nn);
            if let Some(est) = &alignments {
                let al = score_alignment(est, truth).at(Stage::Score)?;
                io::save_csv(&dir.join(format!("align_hist_{tag}.csv")), |w| {
                    io::write_histogram_csv(&al.histogram, w)
                })
                .at(Stage::Output)?;
                report.alignment = Some(al);
            }
            io::save_json(&report, &dir.join(format!("report_{tag}.json"))).at(Stage::Output)?;
            Some(report)
        }
        None => None,
    };
    Ok(MethodRun {
        method,
        neighbors,
        alignments,
        report,
    })
}

/// The graph to work on for single-graph subcommands: `--graph` if given,
/// otherwise generated from the configuration at the first `p`.
fn input_graph(cfg: &ExperimentConfig) -> StageResult<(AlignmentGraph, Option<GroundTruth>)> {
    match &cfg.graph {
        Some(path) => Ok((io::load_graph(path).at(Stage::Generate)?, None)),
        None => {
            let data = build_dataset(cfg).at(Stage::Generate)?;
            let g = noisy_graph(cfg, &data.clean, cfg.p[0]).at(Stage::Generate)?;
            Ok((g, data.truth))
        }
    }
}

fn single_graph_run(cfg: &ExperimentConfig, align: bool) -> StageResult<Vec<MethodRun>> {
    cfg.validate().at(Stage::Config)?;
    let (graph, truth) = input_graph(cfg)?;
    if cfg.kappa_search >= graph.n() || cfg.mk > graph.n() {
        return Err(Error::param("kappa_search and mk must be below the graph size")).at(Stage::Config);
    }
    let bundles = cmd_embed(cfg, &graph)?;
    let embs = build_embeddings(cfg, &bundles).at(Stage::Embed)?;
    let params = json!({ "config": cfg.echo(), "p": cfg.p[0] });
    embs.iter()
        .map(|e| run_method(cfg, e, truth.as_ref(), &params, &cfg.out, align))
        .collect()
}

/// Neighbor lists for MFVDM and the baselines.
pub fn cmd_nn(cfg: &ExperimentConfig) -> StageResult<Vec<MethodRun>> {
    single_graph_run(cfg, false)
}

/// Neighbor lists plus alignment estimates.
pub fn cmd_align(cfg: &ExperimentConfig) -> StageResult<Vec<MethodRun>> {
    single_graph_run(cfg, true)
}

/// All methods at one noise level.
#[derive(Debug, Clone)]
pub struct NoiseLevelRun {
    pub p: f64,
    pub graph_hash: String,
    pub methods: Vec<MethodRun>,
    pub bundles_solved: Vec<u32>,
    pub cache_hits: Vec<u32>,
}

impl NoiseLevelRun {
    pub fn method(&self, method: Method) -> Option<&MethodRun> {
        self.methods.iter().find(|r| r.method == method)
    }
}

/// generate → embed → search → align → score, for every `p`.
///
/// Artifacts land in `<out>/p<value>/`; the resolved configuration is
/// written to `<out>/config.resolved.txt`.
pub fn cmd_pipeline(cfg: &ExperimentConfig) -> StageResult<Vec<NoiseLevelRun>> {
    cfg.validate().at(Stage::Config)?;
    let gen = cmd_generate(cfg)?;
    let n = gen.dataset.clean.n();
    if cfg.kappa_search >= n || cfg.mk > n {
        return Err(Error::param("kappa_search and mk must be below the graph size")).at(Stage::Config);
    }
    io::save_text(&cfg.out.join("config.resolved.txt"), &cfg.to_file_string()).at(Stage::Output)?;
    let truth = gen.dataset.truth.as_ref();
    let mut runs = Vec::with_capacity(gen.graphs.len());
    for (p, graph) in &gen.graphs {
        let dir = cfg.out.join(p_label(*p));
        let bundles = cmd_embed(cfg, graph)?;
        let embs = build_embeddings(cfg, &bundles).at(Stage::Embed)?;
        let params = json!({ "config": cfg.echo(), "p": p });
        let methods = embs
            .iter()
            .map(|e| run_method(cfg, e, truth, &params, &dir, true))
            .collect::<StageResult<Vec<_>>>()?;
        runs.push(NoiseLevelRun {
            p: *p,
            graph_hash: io::graph_hash(graph),
            methods,
            bundles_solved: bundles.solved,
            cache_hits: bundles.cache_hits,
        });
    }
    Ok(runs)
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumFile {
    pub config: serde_json::Value,
    pub p: f64,
    pub report: SpectralReport,
}

/// Spectral reports for every `p` and every configured frequency
/// (sphere only).
pub fn cmd_spectrum(cfg: &ExperimentConfig) -> StageResult<Vec<SpectrumFile>> {
    cfg.validate().at(Stage::Config)?;
    if cfg.manifold != Manifold::Sphere {
        return Err(Error::UnsupportedManifold(format!(
            "spectrum needs the sphere, got {}",
            cfg.manifold.name()
        )))
        .at(Stage::Config);
    }
    if cfg.spectrum_m > cfg.n {
        return Err(Error::param("spectrum_m must not exceed n")).at(Stage::Config);
    }
    let data = build_dataset(cfg).at(Stage::Generate)?;
    let kind = data.truth.as_ref().map(|t| t.kind()).expect("sphere has ground truth");
    let dir = cache_dir(cfg);
    let mut files = Vec::new();
    for &p in &cfg.p {
        let graph = noisy_graph(cfg, &data.clean, p).at(Stage::Generate)?;
        let set = compute_bundles(cfg, &graph, &cfg.spectrum_k, cfg.spectrum_m, Some(&dir))
            .at(Stage::Spectrum)?;
        for b in &set.bundles {
            let report = spectral_report(b, kind, cfg.kappa_build, cfg.n).at(Stage::Spectrum)?;
            let file = SpectrumFile {
                config: cfg.echo(),
                p,
                report,
            };
            let stem = format!("spectrum_{}_k{}", p_label(p), b.k);
            io::save_json(&file, &cfg.out.join(format!("{stem}.json"))).at(Stage::Output)?;
            io::save_csv(&cfg.out.join(format!("{stem}.csv")), |w| {
                io::write_spectrum_csv(&file.report, w)
            })
            .at(Stage::Output)?;
            files.push(file);
        }
    }
    Ok(files)
}
