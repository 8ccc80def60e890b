use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use engulf::engulfing::{self, EngulfingVerdict, EquivalenceReport, KEstimate};
use engulf::plot::{self, PlotKind};
use engulf::report::{self, CatalogConfig, ExperimentReport, Real, Row};
use engulf::sections;
use engulf::{bregman, Catalog, FunctionSpec, Point, RefineConfig, SamplerConfig};

#[derive(Parser)]
#[command(name = "engulf", version, about = "Bregman sections and engulfing checks for convex functions")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Function as an expression, e.g. "x^4" or "x1^2 + exp(x2)".
    #[arg(long = "fn", global = true, conflicts_with = "builtin")]
    function: Option<String>,
    /// Catalog function tag.
    #[arg(long, global = true)]
    builtin: Option<String>,
    /// Dimension for --fn; inferred from the variables when omitted.
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Row-major matrix for --builtin polyquad, e.g. "2,1;1,2".
    #[arg(long, global = true)]
    matrix: Option<String>,
    /// Slope vector for --builtin affine.
    #[arg(long, global = true)]
    slope: Option<String>,
    /// Offset for --builtin affine.
    #[arg(long, global = true)]
    offset: Option<f64>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CheckMode {
    Soft,
    Full,
    Equiv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    RatioCurve,
    SectionBoundary,
}

#[derive(Args, Clone)]
struct Sampling {
    /// Half-width of the sampling box.
    #[arg(long = "box", default_value_t = 10.0)]
    box_half_width: f64,
    #[arg(long, default_value_t = 1e-6)]
    tmin: f64,
    #[arg(long, default_value_t = 1e3)]
    tmax: f64,
    /// Number of sampled triples.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Run sequentially instead of on the thread pool.
    #[arg(long)]
    serial: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Section S(x0, p, t): interval in 1D, radial boundary otherwise.
    Section {
        #[arg(long, allow_hyphen_values = true)]
        x0: String,
        /// Subgradient at x0; the gradient when omitted.
        #[arg(long, allow_hyphen_values = true)]
        p: Option<String>,
        #[arg(long)]
        t: f64,
        /// Number of directions (dimension 2 uses an even fan).
        #[arg(long, default_value_t = 64)]
        directions: usize,
    },
    /// Quasi-symmetry ratio D(x; y)/D(y; x) and the minimal constant.
    Ratio {
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        /// One or more points y.
        #[arg(long, allow_hyphen_values = true, required = true)]
        y: Vec<String>,
    },
    /// Estimate the smallest two-sided constant K.
    EstimateK {
        #[arg(long = "box", default_value_t = 10.0)]
        box_half_width: f64,
        #[arg(long, default_value_t = 400)]
        grid: usize,
        #[arg(long, default_value_t = 40)]
        refine_rounds: usize,
        /// Random pairs in dimension > 1.
        #[arg(long, default_value_t = 20_000)]
        pairs: usize,
    },
    /// Sampled soft or full engulfing check.
    Check {
        #[arg(long, value_enum, default_value_t = CheckMode::Soft)]
        mode: CheckMode,
        #[arg(long = "K")]
        k: Option<f64>,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Catalog report: K estimate, verdicts and section shape per function.
    Report {
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Render a JSON report as SVG.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: Kind,
    },
    /// Chain terms on the x⁴ / x² function at pairs (x, −xᵏ).
    #[command(name = "example-2-1")]
    Example21 {
        #[arg(long, default_value_t = 2.0)]
        k: f64,
        #[arg(long, default_value = "1,0.1,0.01,0.001")]
        xs: String,
    },
    /// Symmetry ratios of exp(x) and exp(x²) at pairs (0, h).
    ExpFamily {
        #[arg(long, default_value = "1,2,5,10,15,20")]
        hs: String,
    },
}

fn parse_list(text: &str) -> anyhow::Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("bad number '{s}'"))
        })
        .collect()
}

fn function(g: &Global) -> anyhow::Result<FunctionSpec> {
    if let Some(text) = &g.function {
        let dim = match g.dim {
            Some(d) => d,
            None => infer_dimension(text),
        };
        return Ok(FunctionSpec::parse(text, dim)?);
    }
    let Some(tag) = &g.builtin else {
        bail!("one of --fn or --builtin is required");
    };
    let mut catalog = Catalog::from_tag(tag)?;
    match &mut catalog {
        Catalog::PolyQuad { matrix } => {
            if let Some(m) = &g.matrix {
                *matrix = m
                    .split(';')
                    .map(parse_list)
                    .collect::<anyhow::Result<Vec<_>>>()?
                    .concat();
            }
        }
        Catalog::Affine { slope, offset } => {
            if let Some(s) = &g.slope {
                *slope = parse_list(s)?;
            }
            if let Some(b) = g.offset {
                *offset = b;
            }
        }
        _ => {}
    }
    Ok(FunctionSpec::builtin(catalog)?)
}

/// Highest `xN` index in the text, or 1 when only plain `x` appears.
fn infer_dimension(text: &str) -> usize {
    let bytes = text.as_bytes();
    let mut dim = 1;
    for (i, _) in text.match_indices('x') {
        let prev_alpha = i > 0 && bytes[i - 1].is_ascii_alphabetic();
        let digits: String = text[i + 1..].chars().take_while(char::is_ascii_digit).collect();
        if !prev_alpha && !digits.is_empty() {
            dim = dim.max(digits.parse().unwrap_or(1));
        }
    }
    dim
}

fn sampler(g: &Global, s: &Sampling) -> SamplerConfig {
    SamplerConfig {
        box_half_width: s.box_half_width,
        triples: s.samples,
        t_min: s.tmin,
        t_max: s.tmax,
        seed: g.seed,
        parallel: !s.serial,
        ..SamplerConfig::default()
    }
}

fn emit(g: &Global, text: &str) -> anyhow::Result<()> {
    match &g.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_report(g: &Global, r: &ExperimentReport) -> anyhow::Result<()> {
    match g.format {
        Format::Json => emit(g, &r.to_json()),
        Format::Csv => emit(g, &r.to_csv()),
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn flat_csv(header: &[&str], record: &[String]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    w.write_record(record).expect("in-memory write");
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

fn real(v: f64) -> String {
    Real(v).to_string()
}

#[derive(Serialize)]
struct CheckOutput<'a> {
    function: &'a str,
    mode: &'static str,
    #[serde(rename = "K", with = "report::ext_real")]
    k: f64,
    verdict: &'static str,
    witness: Option<&'a engulfing::Witness>,
    samples_used: usize,
    samples_skipped: usize,
    unbounded_rays: usize,
    seed: u64,
    diverging: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    equivalence: Option<&'a EquivalenceReport>,
}

impl CheckOutput<'_> {
    fn csv(&self) -> String {
        flat_csv(
            &["function", "mode", "K", "verdict", "samples_used", "samples_skipped", "unbounded_rays", "seed", "diverging"],
            &[
                self.function.to_string(),
                self.mode.to_string(),
                real(self.k),
                self.verdict.to_string(),
                self.samples_used.to_string(),
                self.samples_skipped.to_string(),
                self.unbounded_rays.to_string(),
                self.seed.to_string(),
                self.diverging.map(|d| d.to_string()).unwrap_or_default(),
            ],
        )
    }
}

fn verdict_output<'a>(f: &'a FunctionSpec, v: &'a EngulfingVerdict, mode: &'static str) -> CheckOutput<'a> {
    CheckOutput {
        function: f.label(),
        mode,
        k: v.k,
        verdict: if v.passed() { "pass" } else { "fail" },
        witness: v.witness.as_ref(),
        samples_used: v.samples_used,
        samples_skipped: v.samples_skipped,
        unbounded_rays: v.unbounded_rays,
        seed: v.seed,
        diverging: None,
        equivalence: None,
    }
}

#[derive(Serialize)]
struct EstimateOutput<'a> {
    function: &'a str,
    #[serde(rename = "K", with = "report::ext_real")]
    k: f64,
    diverging: bool,
    argmax_pair: &'a (Point, Point),
    seed: u64,
    estimate: &'a KEstimate,
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let g = &cli.global;
    match &cli.command {
        Command::Section { x0, p, t, directions } => {
            let f = function(g)?;
            let x0 = parse_list(x0)?;
            let p = match p {
                Some(p) => parse_list(p)?,
                None => f.gradient(&x0)?,
            };
            let dirs = if f.dimension() == 2 {
                sections::directions_2d(*directions)
            } else {
                coordinate_directions(f.dimension())
            };
            let r = report::section_report(&f, &x0, &p, *t, &dirs, sections::DEFAULT_R_CAP)?;
            emit_report(g, &r)?;
        }
        Command::Ratio { x, y } => {
            let f = function(g)?;
            let x = parse_list(x)?;
            let n = f.dimension();
            let mut rows = Vec::new();
            for yt in y {
                let yv = parse_list(yt)?;
                let ratio = bregman::symmetry_ratio(&f, &x, &yv)?;
                let mut values: Vec<Option<Real>> = yv.iter().map(|v| Some(Real(*v))).collect();
                values.push(Some(Real(ratio)));
                values.push(Some(Real(bregman::min_constant(ratio))));
                rows.push(Row {
                    label: format!("y={yt}"),
                    values,
                    tags: Default::default(),
                });
            }
            let mut columns: Vec<String> = (1..=n).map(|i| format!("y{i}")).collect();
            columns.extend(["ratio".to_string(), "k_min".to_string()]);
            let parameters = x
                .iter()
                .enumerate()
                .map(|(i, v)| (format!("x{}", i + 1), Real(*v)))
                .collect();
            let r = ExperimentReport {
                experiment: "ratio".into(),
                function: f.label().to_string(),
                parameters,
                columns,
                rows,
                verdicts: Default::default(),
                provenance: report::Provenance::new(g.seed, &(&x, y)),
            };
            emit_report(g, &r)?;
        }
        Command::EstimateK { box_half_width, grid, refine_rounds, pairs } => {
            let f = function(g)?;
            let s = SamplerConfig {
                box_half_width: *box_half_width,
                grid: *grid,
                pairs: *pairs,
                seed: g.seed,
                ..SamplerConfig::default()
            };
            let refine = RefineConfig {
                rounds: *refine_rounds,
                ..RefineConfig::default()
            };
            let est = engulfing::estimate_k_char(&f, &s, &refine)?;
            let out = EstimateOutput {
                function: f.label(),
                k: est.value,
                diverging: est.diverging,
                argmax_pair: &est.argmax_pair,
                seed: g.seed,
                estimate: &est,
            };
            match g.format {
                Format::Json => emit(g, &to_json(&out))?,
                Format::Csv => emit(
                    g,
                    &flat_csv(
                        &["function", "K", "diverging", "seed"],
                        &[f.label().to_string(), real(est.value), est.diverging.to_string(), g.seed.to_string()],
                    ),
                )?,
            }
        }
        Command::Check { mode, k, sampling } => {
            let f = function(g)?;
            let s = sampler(g, sampling);
            let (out, passed) = match mode {
                CheckMode::Soft | CheckMode::Full => {
                    let Some(k) = *k else { bail!("--K is required for soft and full checks") };
                    let v = if *mode == CheckMode::Soft {
                        engulfing::check_soft(&f, k, &s)?
                    } else {
                        engulfing::check_full(&f, k, &s)?
                    };
                    let name = if *mode == CheckMode::Soft { "soft" } else { "full" };
                    let text = render_check(g, &verdict_output(&f, &v, name));
                    (text, v.passed())
                }
                CheckMode::Equiv => {
                    let eq = engulfing::check_equivalence(&f, &s, &RefineConfig::default())?;
                    let passed = eq.soft.as_ref().is_some_and(|v| v.passed())
                        && eq.full.as_ref().is_some_and(|v| v.passed());
                    let first_fail = [eq.soft.as_ref(), eq.full.as_ref()]
                        .into_iter()
                        .flatten()
                        .find(|v| !v.passed());
                    let out = CheckOutput {
                        function: f.label(),
                        mode: "equiv",
                        k: eq.estimate.value,
                        verdict: if passed { "pass" } else { "fail" },
                        witness: first_fail.and_then(|v| v.witness.as_ref()),
                        samples_used: [eq.soft.as_ref(), eq.full.as_ref()]
                            .into_iter()
                            .flatten()
                            .map(|v| v.samples_used)
                            .sum(),
                        samples_skipped: [eq.soft.as_ref(), eq.full.as_ref()]
                            .into_iter()
                            .flatten()
                            .map(|v| v.samples_skipped)
                            .sum(),
                        unbounded_rays: [eq.soft.as_ref(), eq.full.as_ref()]
                            .into_iter()
                            .flatten()
                            .map(|v| v.unbounded_rays)
                            .sum(),
                        seed: g.seed,
                        diverging: Some(eq.estimate.diverging),
                        equivalence: Some(&eq),
                    };
                    (render_check(g, &out), passed)
                }
            };
            emit(g, &out)?;
            if !passed {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Report { sampling } => {
            let config = CatalogConfig {
                sampler: sampler(g, sampling),
                ..CatalogConfig::default()
            };
            let r = report::run_catalog_report(&config)?;
            emit_report(g, &r)?;
        }
        Command::Plot { input, kind } => {
            let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
            let r = ExperimentReport::from_json(&text)?;
            let kind = match kind {
                Kind::RatioCurve => PlotKind::RatioCurve,
                Kind::SectionBoundary => PlotKind::SectionBoundary,
            };
            emit(g, &plot::render(&r, kind)?)?;
        }
        Command::Example21 { k, xs } => {
            let r = report::run_example_2_1(*k, &parse_list(xs)?)?;
            emit_report(g, &r)?;
        }
        Command::ExpFamily { hs } => {
            let r = report::run_exp_family(&parse_list(hs)?)?;
            emit_report(g, &r)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn render_check(g: &Global, out: &CheckOutput) -> String {
    match g.format {
        Format::Json => to_json(out),
        Format::Csv => out.csv(),
    }
}

fn coordinate_directions(n: usize) -> Vec<Point> {
    let mut dirs = Vec::new();
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut d = vec![0.0; n];
            d[i] = s;
            dirs.push(d);
        }
    }
    dirs
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
