use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stv_core::eval::{
    fit_series, forecast_tail, parse_key_values, run_eval, run_scalability, Dataset, EvalConfig,
    ModelKind, Recipe, ScaleGrid,
};
use stv_core::linear::Method;
use stv_core::runtime::PartyId;
use stv_core::timeseries::PolynomialSpec;
use stv_core::{Backend, Error, Result};

/// Privacy-preserving forecasting over vertically partitioned series.
#[derive(Parser)]
#[command(name = "stv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on the whole series and print the fit report.
    Fit(RunArgs),
    /// Train on all but the last rows and forecast them.
    Forecast(RunArgs),
    /// Prequential window evaluation.
    Eval(RunArgs),
    /// Communication cost of NE versus GD over a parameter grid.
    ScaleBench(ScaleArgs),
}

#[derive(Args, Default)]
struct RunArgs {
    /// `key = value` file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV file; the bundled airline series when omitted.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// generic, air_quality, sml2010, airline, pv_power or rossman.
    #[arg(long)]
    recipe: Option<String>,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    parties: Option<usize>,
    /// p,d,q
    #[arg(long)]
    order: Option<String>,
    /// P,D,Q,s
    #[arg(long)]
    seasonal: Option<String>,
    /// Seasonal period offered to order suggestion.
    #[arg(long)]
    period: Option<usize>,
    /// linear or tree.
    #[arg(long)]
    model: Option<String>,
    /// ne or gd.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// real or ring.
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    frac_bits: Option<u32>,
    /// Comma-separated, e.g. 60,80,100.
    #[arg(long)]
    window_sizes: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    audit: bool,
    /// Skip exogenous columns.
    #[arg(long)]
    no_exo: bool,
    /// Party that receives forecasts.
    #[arg(long)]
    requester: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Also run the plaintext counterpart (eval only).
    #[arg(long)]
    oracle: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Default)]
struct ScaleArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    parties: Option<String>,
    /// Per party.
    #[arg(long)]
    features: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    iters: Option<String>,
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    frac_bits: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Flag values layered over a config file, keyed by flag name.
struct Settings(BTreeMap<String, String>);

const RUN_KEYS: &[&str] = &[
    "dataset",
    "recipe",
    "target",
    "parties",
    "order",
    "seasonal",
    "period",
    "model",
    "method",
    "iters",
    "lr",
    "backend",
    "frac-bits",
    "window-sizes",
    "seed",
    "audit",
    "no-exo",
    "requester",
    "horizon",
    "trees",
    "max-depth",
    "eta",
    "lambda",
    "oracle",
    "out",
];
const SCALE_KEYS: &[&str] = &[
    "parties",
    "features",
    "samples",
    "iters",
    "backend",
    "frac-bits",
    "out",
];

impl Settings {
    fn load(
        config: Option<&Path>,
        allowed: &[&str],
        flags: Vec<(&str, Option<String>)>,
    ) -> Result<Self> {
        let mut map = match config {
            Some(p) => parse_key_values(&std::fs::read_to_string(p)?)?,
            None => BTreeMap::new(),
        };
        if let Some(k) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::config(format!("unknown config key `{k}`")));
        }
        for (k, v) in flags {
            if let Some(v) = v {
                map.insert(k.to_string(), v);
            }
        }
        Ok(Settings(map))
    }

    fn str(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.str(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::config(format!("invalid value `{v}` for {key}")))
            })
            .transpose()
    }

    fn flag(&self, key: &str) -> Result<bool> {
        match self.str(key) {
            None | Some("false") | Some("0") => Ok(false),
            Some("true") | Some("1") | Some("") => Ok(true),
            Some(v) => Err(Error::config(format!("invalid value `{v}` for {key}"))),
        }
    }

    fn list(&self, key: &str) -> Result<Option<Vec<usize>>> {
        self.str(key).map(|v| parse_list(v, key)).transpose()
    }

    fn backend(&self) -> Result<Backend> {
        let bits = self.parse::<u32>("frac-bits")?.unwrap_or(20);
        match self.str("backend").unwrap_or("real") {
            "real" => Ok(Backend::default()),
            "ring" => Backend::ring(bits),
            other => Err(Error::config(format!(
                "unknown backend `{other}` (expected real or ring)"
            ))),
        }
    }
}

fn parse_list(v: &str, key: &str) -> Result<Vec<usize>> {
    v.split(',')
        .map(|x| {
            x.trim()
                .parse::<usize>()
                .map_err(|_| Error::config(format!("invalid list `{v}` for {key}")))
        })
        .collect()
}

fn orders(s: &Settings) -> Result<Option<PolynomialSpec>> {
    let seasonal = s.list("seasonal")?;
    if let Some(v) = &seasonal {
        if v.len() != 4 {
            return Err(Error::config("--seasonal takes P,D,Q,s"));
        }
    }
    let Some(o) = s.list("order")? else {
        return Ok(None);
    };
    if o.len() != 3 {
        return Err(Error::config("--order takes p,d,q"));
    }
    let mut spec = PolynomialSpec::new(o[0], o[1], o[2]);
    if let Some(v) = seasonal {
        spec = spec.seasonal(v[0], v[1], v[2], v[3]);
    }
    Ok(Some(spec))
}

fn run_settings(a: &RunArgs) -> Result<Settings> {
    let show = |v: Option<&dyn ToString>| v.map(|v| v.to_string());
    let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    let yes = |b: bool| b.then(|| "true".to_string());
    Settings::load(
        a.config.as_deref(),
        RUN_KEYS,
        vec![
            ("dataset", path(&a.dataset)),
            ("recipe", a.recipe.clone()),
            ("target", a.target.clone()),
            ("parties", show(a.parties.as_ref().map(|v| v as _))),
            ("order", a.order.clone()),
            ("seasonal", a.seasonal.clone()),
            ("period", show(a.period.as_ref().map(|v| v as _))),
            ("model", a.model.clone()),
            ("method", a.method.clone()),
            ("iters", show(a.iters.as_ref().map(|v| v as _))),
            ("lr", show(a.lr.as_ref().map(|v| v as _))),
            ("backend", a.backend.clone()),
            ("frac-bits", show(a.frac_bits.as_ref().map(|v| v as _))),
            ("window-sizes", a.window_sizes.clone()),
            ("seed", show(a.seed.as_ref().map(|v| v as _))),
            ("audit", yes(a.audit)),
            ("no-exo", yes(a.no_exo)),
            ("requester", show(a.requester.as_ref().map(|v| v as _))),
            ("horizon", show(a.horizon.as_ref().map(|v| v as _))),
            ("trees", show(a.trees.as_ref().map(|v| v as _))),
            ("max-depth", show(a.max_depth.as_ref().map(|v| v as _))),
            ("eta", show(a.eta.as_ref().map(|v| v as _))),
            ("lambda", show(a.lambda.as_ref().map(|v| v as _))),
            ("oracle", yes(a.oracle)),
            ("out", path(&a.out)),
        ],
    )
}

fn eval_config(s: &Settings) -> Result<EvalConfig> {
    let mut cfg = EvalConfig::default();
    if let Some(k) = s.parse("parties")? {
        cfg.parties = k;
    }
    cfg.backend = s.backend()?;
    if let Some(seed) = s.parse("seed")? {
        cfg.seed = seed;
    }
    cfg.audit = s.flag("audit")?;
    cfg.oracle = s.flag("oracle")?;
    cfg.use_exo = !s.flag("no-exo")?;
    if let Some(m) = s.str("model") {
        cfg.model = m.parse::<ModelKind>()?;
    }
    if let Some(m) = s.str("method") {
        cfg.fit.method = m.parse::<Method>()?;
    }
    if let Some(n) = s.parse("iters")? {
        cfg.fit.iters = n;
    }
    if let Some(lr) = s.parse("lr")? {
        cfg.fit.lr = lr;
    }
    cfg.orders = orders(s)?;
    cfg.period = match s.parse("period")? {
        Some(p) => Some(p),
        None => s.list("seasonal")?.map(|v| v[3]).filter(|&p| p >= 2),
    };
    if let Some(w) = s.list("window-sizes")? {
        cfg.window_sizes = w;
    }
    if let Some(r) = s.parse("requester")? {
        cfg.requester = PartyId(r);
    }
    if let Some(t) = s.parse("trees")? {
        cfg.tree.trees = t;
    }
    if let Some(d) = s.parse("max-depth")? {
        cfg.tree.max_depth = d;
    }
    if let Some(e) = s.parse("eta")? {
        cfg.tree.eta = e;
    }
    if let Some(l) = s.parse("lambda")? {
        cfg.tree.lambda = l;
    }
    cfg.fit.validate()?;
    cfg.tree.validate()?;
    Ok(cfg)
}

fn dataset(s: &Settings) -> Result<Dataset> {
    let recipe = s.parse::<Recipe>("recipe")?;
    match s.str("dataset") {
        Some(path) => Dataset::load(
            Path::new(path),
            recipe.unwrap_or(Recipe::Generic),
            s.str("target"),
        ),
        None if matches!(recipe, None | Some(Recipe::Airline)) => Dataset::airline(),
        None => Err(Error::config("--dataset is required for this recipe")),
    }
}

fn emit(s: &Settings, json: String, summary: Option<String>) -> Result<()> {
    match s.str("out") {
        Some(path) => {
            std::fs::write(path, json)?;
            if let Some(t) = summary {
                print!("{t}");
            }
        }
        None => {
            let mut out = std::io::stdout().lock();
            if let Err(e) = writeln!(out, "{json}") {
                if e.kind() != std::io::ErrorKind::BrokenPipe {
                    return Err(e.into());
                }
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(a) => {
            let s = run_settings(&a)?;
            let out = fit_series(&dataset(&s)?, &eval_config(&s)?)?;
            emit(&s, serde_json::to_string_pretty(&out)?, None)
        }
        Command::Forecast(a) => {
            let s = run_settings(&a)?;
            let horizon = s.parse("horizon")?.unwrap_or(12);
            let report = forecast_tail(&dataset(&s)?, &eval_config(&s)?, horizon)?;
            let table = report
                .timestamps
                .iter()
                .zip(report.forecast.iter().zip(&report.actual))
                .map(|(t, (f, a))| format!("{t}\t{f:.4}\t{a:.4}\n"))
                .collect();
            emit(&s, serde_json::to_string_pretty(&report)?, Some(table))
        }
        Command::Eval(a) => {
            let s = run_settings(&a)?;
            let report = run_eval(&dataset(&s)?, &eval_config(&s)?)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            emit(
                &s,
                serde_json::to_string_pretty(&report)?,
                Some(report.table()),
            )
        }
        Command::ScaleBench(a) => {
            let s = Settings::load(
                a.config.as_deref(),
                SCALE_KEYS,
                vec![
                    ("parties", a.parties.clone()),
                    ("features", a.features.clone()),
                    ("samples", a.samples.clone()),
                    ("iters", a.iters.clone()),
                    ("backend", a.backend.clone()),
                    ("frac-bits", a.frac_bits.map(|v| v.to_string())),
                    ("out", a.out.as_ref().map(|p| p.display().to_string())),
                ],
            )?;
            let mut grid = ScaleGrid {
                backend: s.backend()?,
                ..ScaleGrid::default()
            };
            if let Some(v) = s.list("parties")? {
                grid.parties = v;
            }
            if let Some(v) = s.list("features")? {
                grid.features = v;
            }
            if let Some(v) = s.list("samples")? {
                grid.samples = v;
            }
            if let Some(v) = s.list("iters")? {
                grid.iters = v;
            }
            let report = run_scalability(&grid)?;
            emit(
                &s,
                serde_json::to_string_pretty(&report)?,
                Some(report.table()),
            )
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
