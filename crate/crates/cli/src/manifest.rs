//! Run manifests: JSON descriptions of one or more benchmark cases, resolved
//! against command-line overrides into validated [`RunCase`]s.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use bayesflow::bench::{FlowSpec, NoiseSpec};
use bayesflow::grid_ops::GridSpec;
use bayesflow::sampler::{ChainConfig, HyperPriors};
use bayesflow::solver::CgConfig;
use bayesflow::uq::DEFAULT_CONFIDENCE;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Grid side used for the synthetic cosine image.
pub const SYNTHETIC_GRID: usize = 30;
/// Grid side real images are resized to.
pub const IMAGE_GRID: usize = 60;
/// CG iteration cap for image inputs; 60×60 real-image systems routinely need
/// 600 to 2700 iterations to reach the default tolerance.
pub const IMAGE_CG_MAX_ITER: usize = 5000;
pub const SYNTHETIC_SIGMA: f64 = 0.02;
pub const IMAGE_SIGMA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[derive(clap::ValueEnum)]
pub enum NoiseKind {
    None,
    Gaussian,
    Uniform,
    Laplace,
}

impl NoiseKind {
    pub fn with_sigma(self, sigma: f64) -> NoiseSpec {
        match self {
            Self::None => NoiseSpec::None,
            Self::Gaussian => NoiseSpec::Gaussian { sigma },
            Self::Uniform => NoiseSpec::Uniform { sigma },
            Self::Laplace => NoiseSpec::Laplace { sigma },
        }
    }

    pub fn of(spec: &NoiseSpec) -> Self {
        match spec {
            NoiseSpec::None => Self::None,
            NoiseSpec::Gaussian { .. } => Self::Gaussian,
            NoiseSpec::Uniform { .. } => Self::Uniform,
            NoiseSpec::Laplace { .. } => Self::Laplace,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Gaussian => "gaussian",
            Self::Uniform => "uniform",
            Self::Laplace => "laplace",
        }
    }
}

/// Chain settings as written in a manifest; missing fields take the sampler
/// defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSection {
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub seed: Option<u64>,
    pub lambda0: Option<f64>,
    pub delta0: Option<f64>,
    pub thin: Option<usize>,
    pub max_restarts: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSection {
    pub alpha_lambda: Option<f64>,
    pub beta_lambda: Option<f64>,
    pub alpha_delta: Option<f64>,
    pub beta_delta: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CgSection {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

/// One case as written in a manifest. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaseSpec {
    pub name: Option<String>,
    /// `"synthetic"` or a path to the first image (PGM).
    pub input: Option<String>,
    /// Observed second image; when given, no flow is synthesized.
    pub second_image: Option<PathBuf>,
    pub flow_id: Option<u8>,
    pub noise: Option<NoiseKind>,
    pub sigma: Option<f64>,
    /// `[n_x, n_y]`.
    pub grid: Option<[usize; 2]>,
    pub chain: ChainSection,
    pub priors: PriorSection,
    pub cg: CgSection,
    pub q: Option<f64>,
    pub out: Option<PathBuf>,
    /// Write every `stride`-th pixel (in both directions) to the ellipse table.
    pub stride: Option<usize>,
}

/// Top-level manifest: a single case, or a list of cases sharing an output root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
#[allow(clippy::large_enum_variant)]
pub enum Manifest {
    Many {
        #[serde(default)]
        out: Option<PathBuf>,
        cases: Vec<CaseSpec>,
    },
    Single(CaseSpec),
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::BadInput(format!("manifest: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut manifest = Self::parse(&text)?;
        if let Some(base) = path.parent() {
            manifest.rebase(base);
        }
        Ok(manifest)
    }

    /// Resolves relative paths against `base`.
    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let fix_case = |c: &mut CaseSpec| {
            if let Some(input) = c.input.as_mut() {
                if input != "synthetic" && Path::new(input).is_relative() {
                    *input = base.join(&*input).to_string_lossy().into_owned();
                }
            }
            c.second_image.as_mut().map(fix);
            c.out.as_mut().map(fix);
        };
        match self {
            Self::Single(c) => fix_case(c),
            Self::Many { out, cases } => {
                out.as_mut().map(fix);
                cases.iter_mut().for_each(fix_case);
            }
        }
    }
}

/// Command-line values that take precedence over every manifest case.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub input: Option<String>,
    pub second_image: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub q: Option<f64>,
    pub stride: Option<usize>,
    pub noise: Option<NoiseKind>,
    pub sigma: Option<f64>,
    pub flow_id: Option<u8>,
    pub grid: Option<[usize; 2]>,
    pub cg_max_iter: Option<usize>,
}

impl Overrides {
    fn apply(&self, case: &mut CaseSpec) {
        macro_rules! set {
            ($($src:ident => $dst:expr),* $(,)?) => {
                $(if let Some(v) = &self.$src { $dst = Some(v.clone()); })*
            };
        }
        set! {
            input => case.input,
            second_image => case.second_image,
            seed => case.chain.seed,
            iterations => case.chain.iterations,
            burn_in => case.chain.burn_in,
            q => case.q,
            stride => case.stride,
            noise => case.noise,
            sigma => case.sigma,
            flow_id => case.flow_id,
            grid => case.grid,
            cg_max_iter => case.cg.max_iter,
        }
    }
}

/// Where the image pair comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    /// The cosine test image, advected by the chosen flow.
    Synthetic,
    /// A real first image, advected by the chosen flow.
    Image(PathBuf),
    /// An observed pair with unknown flow.
    Pair { first: PathBuf, second: PathBuf },
}

/// A fully resolved case.
#[derive(Debug, Clone, PartialEq)]
pub struct RunCase {
    pub name: String,
    pub source: Source,
    pub flow: FlowSpec,
    pub noise: NoiseSpec,
    /// `None` keeps the native size of an observed pair.
    pub grid: Option<GridSpec>,
    pub chain: ChainConfig,
    pub priors: HyperPriors,
    pub cg: CgConfig,
    pub q: f64,
    pub stride: usize,
    pub out: PathBuf,
}

impl RunCase {
    pub fn seed(&self) -> u64 {
        self.chain.seed
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::BadInput(msg.into())
}

fn default_name(source: &Source, flow: FlowSpec) -> String {
    let stem = |p: &Path| {
        p.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "image".into())
    };
    match source {
        Source::Synthetic => format!("synthetic-flow{}", flow.id()),
        Source::Image(p) => format!("{}-flow{}", stem(p), flow.id()),
        Source::Pair { first, .. } => format!("{}-pair", stem(first)),
    }
}

fn resolve_case(
    mut spec: CaseSpec,
    overrides: &Overrides,
    root: Option<&Path>,
    many: bool,
) -> Result<RunCase, CliError> {
    overrides.apply(&mut spec);

    let input = spec.input.as_deref().unwrap_or("synthetic");
    let source = match (input, spec.second_image) {
        ("synthetic", None) => Source::Synthetic,
        ("synthetic", Some(_)) => return Err(bad("second_image needs a first image path as input")),
        (path, None) => Source::Image(PathBuf::from(path)),
        (path, Some(second)) => Source::Pair {
            first: PathBuf::from(path),
            second,
        },
    };
    let flow = FlowSpec::new(spec.flow_id.unwrap_or(1)).map_err(|_| bad("flow_id must be in 1..=5"))?;

    let is_synthetic = source == Source::Synthetic;
    let default_sigma = if is_synthetic { SYNTHETIC_SIGMA } else { IMAGE_SIGMA };
    let noise = match &source {
        Source::Pair { .. } => NoiseSpec::None,
        _ => spec
            .noise
            .unwrap_or(NoiseKind::Gaussian)
            .with_sigma(spec.sigma.unwrap_or(default_sigma)),
    };
    noise
        .validate()
        .map_err(|_| bad(format!("sigma must be finite and non-negative, got {}", noise.sigma())))?;

    let grid = match (spec.grid, &source) {
        (Some([nx, ny]), _) => Some(GridSpec::new(nx, ny).map_err(|_| bad("grid sides must be at least 2"))?),
        (None, Source::Synthetic) => Some(GridSpec::square(SYNTHETIC_GRID).expect("valid")),
        (None, Source::Image(_)) => Some(GridSpec::square(IMAGE_GRID).expect("valid")),
        (None, Source::Pair { .. }) => None,
    };

    let defaults = ChainConfig::default();
    let c = &spec.chain;
    let iterations = c.iterations.unwrap_or(defaults.iterations);
    // short chains keep the default burn-in fraction
    let default_burn_in = defaults
        .burn_in
        .min(iterations * defaults.burn_in / defaults.iterations);
    let chain = ChainConfig {
        iterations,
        burn_in: c.burn_in.unwrap_or(default_burn_in),
        seed: c.seed.unwrap_or(defaults.seed),
        lambda0: c.lambda0.unwrap_or(defaults.lambda0),
        delta0: c.delta0.unwrap_or(defaults.delta0),
        thin: c.thin.unwrap_or(defaults.thin),
        max_restarts: c.max_restarts.unwrap_or(defaults.max_restarts),
        keep_samples: false,
    };
    chain.validate().map_err(|e| bad(format!("chain: {e}")))?;
    if chain.kept_count() < 2 {
        return Err(bad("chain: need at least 2 kept draws for covariances"));
    }

    let p = HyperPriors::default();
    let priors = HyperPriors {
        alpha_lambda: spec.priors.alpha_lambda.unwrap_or(p.alpha_lambda),
        beta_lambda: spec.priors.beta_lambda.unwrap_or(p.beta_lambda),
        alpha_delta: spec.priors.alpha_delta.unwrap_or(p.alpha_delta),
        beta_delta: spec.priors.beta_delta.unwrap_or(p.beta_delta),
    };
    priors.validate().map_err(|e| bad(format!("priors: {e}")))?;

    let cg_defaults = CgConfig::default();
    let cg = CgConfig {
        tol: spec.cg.tol.unwrap_or(cg_defaults.tol),
        max_iter: spec.cg.max_iter.unwrap_or(if is_synthetic {
            cg_defaults.max_iter
        } else {
            IMAGE_CG_MAX_ITER
        }),
        ..cg_defaults
    };
    cg.validate().map_err(|e| bad(format!("cg: {e}")))?;

    let q = spec.q.unwrap_or(DEFAULT_CONFIDENCE);
    if !(q > 0.0 && q < 1.0) {
        return Err(bad(format!("q must lie strictly between 0 and 1, got {q}")));
    }
    let stride = spec.stride.unwrap_or(1);
    if stride == 0 {
        return Err(bad("stride must be at least 1"));
    }

    let name = spec.name.unwrap_or_else(|| default_name(&source, flow));
    if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
        return Err(bad(format!("case name {name:?} is not a plain directory name")));
    }
    let out = match (overrides.out.as_deref().or(root), spec.out, many) {
        (Some(root), _, true) => root.join(&name),
        (Some(root), None, false) => root.to_path_buf(),
        (_, Some(own), _) => own,
        (None, None, _) => PathBuf::from("out").join(&name),
    };

    Ok(RunCase {
        name,
        source,
        flow,
        noise,
        grid,
        chain,
        priors,
        cg,
        q,
        stride,
        out,
    })
}

/// Resolves a manifest (or, with `None`, a single default case) against the
/// overrides. Multi-case manifests put each case in `<out>/<name>`.
pub fn resolve(manifest: Option<Manifest>, overrides: &Overrides) -> Result<Vec<RunCase>, CliError> {
    let (root, specs, many) = match manifest.unwrap_or(Manifest::Single(CaseSpec::default())) {
        Manifest::Single(spec) => (None, vec![spec], false),
        Manifest::Many { out, cases } => (out, cases, true),
    };
    if specs.is_empty() {
        return Err(bad("manifest lists no cases"));
    }
    let cases = specs
        .into_iter()
        .map(|s| resolve_case(s, overrides, root.as_deref(), many))
        .collect::<Result<Vec<_>, _>>()?;
    let mut seen = BTreeSet::new();
    for c in &cases {
        if !seen.insert(c.out.clone()) {
            return Err(bad(format!("two cases write to {}", c.out.display())));
        }
    }
    Ok(cases)
}
