//! The `synth`, `run` and `report` commands.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use bayesflow::bench::{endpoint_error, make_first_image, reconstruct_second_image, rmse, BenchCase};
use bayesflow::grid_ops::{assemble_system, FlowField, GridSpec, ImageField};
use bayesflow::sampler::{effective_alpha_trace, run_chain, AttemptOutcome, ChainResult};
use bayesflow::solver::{tikhonov_solve, TikhonovConfig};
use bayesflow::uq::{mean_flow, UQField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::imageio::{normalize, quantize, read_pgm, resize_bilinear, write_pgm};
use crate::manifest::{NoiseKind, RunCase, Source};

/// Maxval of every PGM the commands write.
pub const OUTPUT_MAXVAL: u16 = u16::MAX;
/// RNG stream reserved for benchmark noise; the sampler uses stream 0.
pub const NOISE_STREAM: u64 = 1;

pub const SYNTH_FILES: [&str; 4] = ["F.pgm", "G.pgm", "Gbar.pgm", "truth_flow.csv"];
pub const RUN_FILES: [&str; 7] = [
    "mean_flow.csv",
    "trace.csv",
    "ellipses.csv",
    "tikhonov_flow.csv",
    "metrics.json",
    "Ghat.pgm",
    "images.csv",
];

/// The images of one case. `gbar` and `truth` are known only for generated pairs.
#[derive(Debug, Clone)]
pub struct CaseImages {
    pub f: ImageField,
    pub g: ImageField,
    pub gbar: Option<ImageField>,
    pub truth: Option<FlowField>,
}

#[derive(Serialize)]
struct FlowRow {
    i: usize,
    j: usize,
    x: f64,
    y: f64,
    u: f64,
    v: f64,
}

#[derive(Serialize)]
struct TraceRow {
    k: usize,
    lambda: f64,
    delta: f64,
    delta_over_lambda: f64,
}

#[derive(Serialize)]
struct EllipseRow {
    i: usize,
    j: usize,
    mu_u: f64,
    mu_v: f64,
    a: f64,
    b: f64,
    theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRow {
    pub pixel: usize,
    pub i: usize,
    pub j: usize,
    pub f: f64,
    pub g: f64,
    pub gbar: Option<f64>,
    pub ghat: f64,
}

#[derive(Serialize)]
struct ScatterRow {
    pixel: usize,
    ghat: f64,
    g: f64,
    gbar: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptSummary {
    pub seed: u64,
    pub outcome: String,
}

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub case: String,
    pub input: String,
    pub second_image: Option<String>,
    pub flow_id: Option<u8>,
    pub noise: NoiseKind,
    pub sigma: f64,
    pub grid: [usize; 2],
    pub seed: u64,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub q: f64,
    /// Endpoint error of the posterior mean flow against the true flow.
    pub aee: Option<f64>,
    /// Endpoint error of the Tikhonov flow at `alpha_mean`.
    pub aee_tikhonov: Option<f64>,
    /// RMSE of `Ĝ` (the first image advected by the mean flow) against `G`.
    pub rmse_g: f64,
    /// RMSE of `Ĝ` against the noise-free `Ḡ`.
    pub rmse_gbar: Option<f64>,
    /// Posterior mean of `δ/λ` after burn-in.
    pub alpha_mean: f64,
    pub tikhonov_converged: bool,
    /// Mean area of the per-pixel confidence ellipses at level `q`.
    pub mean_area: f64,
    pub kept_draws: usize,
    pub restart_count: usize,
    pub converged: bool,
    pub attempts: Vec<AttemptSummary>,
    pub cg_iterations_total: usize,
}

/// What a successful `run` reports back.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub out: PathBuf,
    pub metrics: RunMetrics,
}

fn numerical(case: &RunCase) -> impl Fn(bayesflow::Error) -> CliError + '_ {
    move |source| CliError::Numerical {
        case: case.name.clone(),
        source,
    }
}

fn noise_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(NOISE_STREAM);
    rng
}

/// Reads a PGM and maps it to `[0, 1]`.
pub fn load_image(path: &Path) -> Result<ImageField, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let raw = read_pgm(&bytes).map_err(|source| CliError::Pgm {
        path: path.to_path_buf(),
        source,
    })?;
    normalize(&raw).map_err(|source| CliError::Image {
        path: path.to_path_buf(),
        source,
    })
}

fn load_resized(path: &Path, grid: &GridSpec) -> Result<ImageField, CliError> {
    let img = load_image(path)?;
    if img.grid() == grid {
        return Ok(img);
    }
    resize_bilinear(&img, grid.n_x(), grid.n_y()).map_err(|source| CliError::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Builds (or reads) the image pair of a case. Generated pairs draw their
/// noise from stream [`NOISE_STREAM`] of a ChaCha8 generator seeded with the
/// case seed.
pub fn load_case(case: &RunCase) -> Result<CaseImages, CliError> {
    let generated = |f: ImageField| -> Result<CaseImages, CliError> {
        let mut rng = noise_rng(case.seed());
        let b = BenchCase::from_first_image(f, case.flow, case.noise, &mut rng).map_err(numerical(case))?;
        Ok(CaseImages {
            f: b.f,
            g: b.g,
            gbar: Some(b.gbar),
            truth: Some(b.truth),
        })
    };
    match (&case.source, &case.grid) {
        (Source::Synthetic, Some(grid)) => generated(make_first_image(grid)),
        (Source::Image(path), Some(grid)) => generated(load_resized(path, grid)?),
        (Source::Pair { first, second }, grid) => {
            let (f, g) = match grid {
                Some(grid) => (load_resized(first, grid)?, load_resized(second, grid)?),
                None => (load_image(first)?, load_image(second)?),
            };
            if f.grid() != g.grid() {
                return Err(CliError::BadInput(format!(
                    "{} is {}x{} but {} is {}x{}",
                    first.display(),
                    f.grid().n_x(),
                    f.grid().n_y(),
                    second.display(),
                    g.grid().n_x(),
                    g.grid().n_y()
                )));
            }
            Ok(CaseImages {
                f,
                g,
                gbar: None,
                truth: None,
            })
        }
        (_, None) => Err(CliError::BadInput(format!("case {} has no grid", case.name))),
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), CliError> {
    let to_io = |e: csv::Error| CliError::io(path, e.into());
    let mut w = csv::Writer::from_path(path).map_err(to_io)?;
    for row in rows {
        w.serialize(row).map_err(to_io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn write_image(path: &Path, img: &ImageField) -> Result<(), CliError> {
    write_bytes(path, &write_pgm(&quantize(img, OUTPUT_MAXVAL)))
}

fn write_flow(path: &Path, flow: &FlowField) -> Result<(), CliError> {
    let grid = *flow.grid();
    let (u, v) = (flow.u().as_slice(), flow.v().as_slice());
    write_csv(
        path,
        (0..grid.len()).map(|k| {
            let (i, j) = grid.coords(k);
            FlowRow {
                i,
                j,
                x: grid.x(i),
                y: grid.y(j),
                u: u[k],
                v: v[k],
            }
        }),
    )
}

/// Writes `F.pgm`, `G.pgm`, `Gbar.pgm` and `truth_flow.csv`. PGMs are 16-bit
/// and clamped to `[0, 1]`.
pub fn synth(case: &RunCase) -> Result<PathBuf, CliError> {
    if matches!(case.source, Source::Pair { .. }) {
        return Err(CliError::BadInput(format!(
            "case {}: synth needs a synthetic or single-image input",
            case.name
        )));
    }
    let images = load_case(case)?;
    let dir = &case.out;
    create_dir(dir)?;
    write_image(&dir.join("F.pgm"), &images.f)?;
    write_image(&dir.join("G.pgm"), &images.g)?;
    write_image(&dir.join("Gbar.pgm"), images.gbar.as_ref().expect("generated pair"))?;
    write_flow(
        &dir.join("truth_flow.csv"),
        images.truth.as_ref().expect("generated pair"),
    )?;
    Ok(dir.clone())
}

fn attempt_summary(result: &ChainResult) -> Vec<AttemptSummary> {
    result
        .attempts
        .iter()
        .map(|a| AttemptSummary {
            seed: a.seed,
            outcome: match &a.outcome {
                AttemptOutcome::Stationary => "stationary".into(),
                AttemptOutcome::NonStationary => "non-stationary".into(),
                AttemptOutcome::Failed(e) => format!("failed: {e}"),
            },
        })
        .collect()
}

/// Runs the sampler on one case and writes its artifacts. A chain that stays
/// non-stationary after every restart still writes everything, with
/// `converged = false`, and then returns [`CliError::NotConverged`].
pub fn run(case: &RunCase) -> Result<RunOutcome, CliError> {
    let images = load_case(case)?;
    let grid = *images.f.grid();
    let num = numerical(case);
    let sys = assemble_system(&images.f, &images.g).map_err(&num)?;
    let cg = &case.cg;
    let result = run_chain(&sys, &case.priors, &case.chain, cg).map_err(&num)?;
    if !result.converged {
        log::warn!(
            "case {}: no stationary attempt after {} restarts",
            case.name,
            result.restart_count
        );
    }

    let mean = mean_flow(&result, &grid).map_err(&num)?;
    let uq = UQField::from_chain(&result, &grid, case.q).map_err(&num)?;
    let alpha = effective_alpha_trace(&result);
    let alpha_mean = alpha.posterior_mean();
    let tik = tikhonov_solve(&sys, &TikhonovConfig::new(alpha_mean).map_err(&num)?, cg).map_err(&num)?;
    if !tik.converged() {
        log::warn!(
            "case {}: Tikhonov solve stopped with status {:?}",
            case.name,
            tik.status
        );
    }
    let tik_flow = FlowField::from_stacked(grid, &tik.x).map_err(&num)?;
    let ghat = reconstruct_second_image(&images.f, &mean).map_err(&num)?;

    let aee = |flow: &FlowField| images.truth.as_ref().map(|t| endpoint_error(flow, t)).transpose();
    let metrics = RunMetrics {
        case: case.name.clone(),
        input: match &case.source {
            Source::Synthetic => "synthetic".into(),
            Source::Image(p) | Source::Pair { first: p, .. } => p.display().to_string(),
        },
        second_image: match &case.source {
            Source::Pair { second, .. } => Some(second.display().to_string()),
            _ => None,
        },
        flow_id: match case.source {
            Source::Pair { .. } => None,
            _ => Some(case.flow.id()),
        },
        noise: NoiseKind::of(&case.noise),
        sigma: case.noise.sigma(),
        grid: [grid.n_x(), grid.n_y()],
        seed: case.seed(),
        iterations: case.chain.iterations,
        burn_in: case.chain.burn_in,
        thin: case.chain.thin,
        cg_tol: case.cg.tol,
        cg_max_iter: case.cg.max_iter,
        q: case.q,
        aee: aee(&mean).map_err(&num)?,
        aee_tikhonov: aee(&tik_flow).map_err(&num)?,
        rmse_g: rmse(&ghat, &images.g).map_err(&num)?,
        rmse_gbar: images
            .gbar
            .as_ref()
            .map(|gb| rmse(&ghat, gb))
            .transpose()
            .map_err(&num)?,
        alpha_mean,
        tikhonov_converged: tik.converged(),
        mean_area: uq.mean_area(),
        kept_draws: result.stats.count(),
        restart_count: result.restart_count,
        converged: result.converged,
        attempts: attempt_summary(&result),
        cg_iterations_total: result.cg_iterations_total,
    };

    let dir = &case.out;
    create_dir(dir)?;
    write_flow(&dir.join("mean_flow.csv"), &mean)?;
    write_flow(&dir.join("tikhonov_flow.csv"), &tik_flow)?;
    write_csv(
        &dir.join("trace.csv"),
        result
            .lambda_trace
            .iter()
            .zip(&result.delta_trace)
            .enumerate()
            .map(|(k, (&lambda, &delta))| TraceRow {
                k: k + 1,
                lambda,
                delta,
                delta_over_lambda: delta / lambda,
            }),
    )?;
    write_csv(
        &dir.join("ellipses.csv"),
        (0..grid.n_y()).step_by(case.stride).flat_map(|j| {
            let uq = &uq;
            (0..grid.n_x()).step_by(case.stride).map(move |i| {
                let e = uq.ellipse(i, j);
                EllipseRow {
                    i,
                    j,
                    mu_u: e.center[0],
                    mu_v: e.center[1],
                    a: e.semi_axes[0],
                    b: e.semi_axes[1],
                    theta: e.orientation,
                }
            })
        }),
    )?;
    let (fv, gv, hv) = (images.f.vectorize(), images.g.vectorize(), ghat.vectorize());
    let gbv = images.gbar.as_ref().map(ImageField::vectorize);
    write_csv(
        &dir.join("images.csv"),
        (0..grid.len()).map(|k| {
            let (i, j) = grid.coords(k);
            ImageRow {
                pixel: k,
                i,
                j,
                f: fv[k],
                g: gv[k],
                gbar: gbv.as_ref().map(|b| b[k]),
                ghat: hv[k],
            }
        }),
    )?;
    write_image(&dir.join("Ghat.pgm"), &ghat)?;
    let json = serde_json::to_string_pretty(&metrics).expect("metrics serialize") + "\n";
    write_bytes(&dir.join("metrics.json"), json.as_bytes())?;

    if !metrics.converged {
        return Err(CliError::NotConverged(case.name.clone()));
    }
    Ok(RunOutcome {
        out: dir.clone(),
        metrics,
    })
}

/// Runs `command` on every case, in parallel across cases.
pub fn for_each_case<T: Send>(
    cases: &[RunCase],
    command: impl Fn(&RunCase) -> Result<T, CliError> + Sync + Send,
) -> Vec<Result<T, CliError>> {
    cases.par_iter().map(command).collect()
}

/// One row of the report summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub dir: PathBuf,
    pub metrics: RunMetrics,
}

impl SummaryRow {
    /// Whether `Ĝ` is closer to the noise-free `Ḡ` than to the observed `G`.
    pub fn closer_to_gbar(&self) -> Option<bool> {
        self.metrics.rmse_gbar.map(|gb| gb < self.metrics.rmse_g)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub rows: Vec<SummaryRow>,
    pub text: String,
}

fn is_run_dir(dir: &Path) -> bool {
    ["metrics.json", "images.csv"].iter().any(|f| dir.join(f).is_file())
}

/// Run directories under `dir`: `dir` itself if it holds run outputs,
/// otherwise its immediate subdirectories that do, sorted by name.
fn find_run_dirs(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    if !dir.is_dir() {
        return Err(CliError::io(dir, std::io::Error::from(std::io::ErrorKind::NotFound)));
    }
    if is_run_dir(dir) {
        return Ok(vec![dir.to_path_buf()]);
    }
    let mut dirs = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.is_dir() && is_run_dir(&path) {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}

fn read_metrics(path: &Path) -> Result<RunMetrics, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::BadInput(format!("{}: {e}", path.display())))
}

fn read_images(path: &Path) -> Result<Vec<ImageRow>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e.into()))?;
    r.deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::BadInput(format!("{}: {e}", path.display())))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.4e}"))
}

fn summary_text(rows: &[SummaryRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "bayesflow report: {} case(s)", rows.len());
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<28} {:>4} {:>7} {:>8} {:>6} {:>10} {:>10} {:>10} {:>10} {:>7} {:>10} {:>10} {:>8} {:>9}",
        "case",
        "flow",
        "grid",
        "noise",
        "sigma",
        "aee",
        "aee_tik",
        "rmse_g",
        "rmse_gbar",
        "gbar<g",
        "alpha",
        "mean_area",
        "restarts",
        "converged"
    );
    for row in rows {
        let m = &row.metrics;
        let _ = writeln!(
            s,
            "{:<28} {:>4} {:>7} {:>8} {:>6} {:>10} {:>10} {:>10.4e} {:>10} {:>7} {:>10.4e} {:>10.4e} {:>8} {:>9}",
            m.case,
            m.flow_id.map_or_else(|| "-".into(), |f| f.to_string()),
            format!("{}x{}", m.grid[0], m.grid[1]),
            m.noise.name(),
            m.sigma,
            fmt_opt(m.aee),
            fmt_opt(m.aee_tikhonov),
            m.rmse_g,
            fmt_opt(m.rmse_gbar),
            row.closer_to_gbar().map_or("-", |c| if c { "yes" } else { "no" }),
            m.alpha_mean,
            m.mean_area,
            m.restart_count,
            m.converged
        );
    }
    let with_ref: Vec<bool> = rows.iter().filter_map(SummaryRow::closer_to_gbar).collect();
    let _ = writeln!(s);
    if !with_ref.is_empty() {
        let closer = with_ref.iter().filter(|&&c| c).count();
        let _ = writeln!(
            s,
            "Ghat closer to Gbar than to G: {closer} of {} case(s) with a noise-free reference",
            with_ref.len()
        );
    }
    let unconverged: Vec<&str> = rows
        .iter()
        .filter(|r| !r.metrics.converged)
        .map(|r| r.metrics.case.as_str())
        .collect();
    if unconverged.is_empty() {
        let _ = writeln!(s, "all chains stationary");
    } else {
        let _ = writeln!(s, "not stationary: {}", unconverged.join(", "));
    }
    s
}

/// Summarizes the run outputs under `dir`: writes `scatter.csv` next to each
/// case's metrics and `summary.txt` in `dir`.
pub fn report(dir: &Path) -> Result<Report, CliError> {
    let run_dirs = find_run_dirs(dir)?;
    let summary_path = dir.join("summary.txt");
    if run_dirs.is_empty() {
        let text = format!("bayesflow report: no run outputs found in {}\n", dir.display());
        write_bytes(&summary_path, text.as_bytes())?;
        return Ok(Report { rows: Vec::new(), text });
    }

    let missing: Vec<PathBuf> = run_dirs
        .iter()
        .flat_map(|d| ["metrics.json", "images.csv"].map(|f| d.join(f)))
        .filter(|p| !p.is_file())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Missing(missing));
    }

    let mut rows = Vec::with_capacity(run_dirs.len());
    for d in run_dirs {
        let metrics = read_metrics(&d.join("metrics.json"))?;
        let images = read_images(&d.join("images.csv"))?;
        write_csv(
            &d.join("scatter.csv"),
            images.iter().map(|r| ScatterRow {
                pixel: r.pixel,
                ghat: r.ghat,
                g: r.g,
                gbar: r.gbar,
            }),
        )?;
        rows.push(SummaryRow { dir: d, metrics });
    }
    let text = summary_text(&rows);
    write_bytes(&summary_path, text.as_bytes())?;
    Ok(Report { rows, text })
}
