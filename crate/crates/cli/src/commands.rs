use std::collections::BTreeMap;
use std::path::Path;

use riskcast_core::benchmarks::sto_opt_forecasts;
use riskcast_core::data::{build_lag_features, generate_series, DataFormat, RawSeries, SplitMode, SyntheticSpec};
use riskcast_core::evaluation::{evaluate_forecasts, TraceRow};
use riskcast_core::train::train;
use riskcast_core::{
    train_qua_e, train_val_n, CostSurface, Dataset, LinearModel, MetricsReport, ResourceFleet, RunConfig, TrainConfig,
    TrainedModel,
};

use crate::output::{csv_bytes, OutputDir};
use crate::{Cli, CliError, Command, RunManifest};

/// Method labels in the order they appear in every table.
pub const METHODS: [&str; 4] = ["proposed", "qua_e", "val_n", "sto_opt"];

const MODEL_FILES: [(&str, &str); 3] =
    [("proposed", "models/proposed.csv"), ("qua_e", "models/qua_e.csv"), ("val_n", "models/val_n.csv")];

/// Resolved config plus everything derived from the fleet.
pub struct Context {
    pub config: RunConfig,
    pub fleet: ResourceFleet,
    pub surface: CostSurface,
}

impl Context {
    pub fn new(config: RunConfig) -> Result<Self, CliError> {
        let fleet = match &config.fleet {
            Some(path) => ResourceFleet::load(path)?,
            None => ResourceFleet::example(100.0, 50.0, 40.0),
        };
        let surface = CostSurface::build(&fleet);
        Ok(Self { config, fleet, surface })
    }

    fn synthetic_spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            seed: self.config.seed,
            days: self.config.days,
            slots_per_day: self.config.slots_per_day,
            noise_scale: self.config.noise_scale,
        }
    }

    /// The raw series when the input is raw or synthetic.
    fn raw_series(&self) -> Result<Option<RawSeries>, CliError> {
        match (&self.config.data, self.config.data_format) {
            (None, _) => Ok(Some(generate_series(&self.synthetic_spec(), &self.fleet)?)),
            (Some(path), DataFormat::Raw) => Ok(Some(RawSeries::load_csv(path)?)),
            (Some(_), DataFormat::Featured) => Ok(None),
        }
    }

    pub fn dataset(&self) -> Result<Dataset, CliError> {
        match self.raw_series()? {
            Some(series) => Ok(build_lag_features(&series)?),
            None => Ok(Dataset::load_csv(self.config.data.as_deref().expect("featured input has a path"), None)?),
        }
    }

    pub fn split(&self, data: &Dataset) -> Result<(Dataset, Dataset), CliError> {
        let f = self.config.test_fraction;
        Ok(match self.config.split {
            SplitMode::Chronological => data.split_chronological(f)?,
            SplitMode::RandomDays => data.split_random_days(self.config.seed, f)?,
        })
    }

    fn train_config(&self, beta: f64) -> TrainConfig {
        let mut tc = TrainConfig::new(beta, self.config.backend);
        tc.subgradient.iterations = self.config.subgradient_iterations;
        tc
    }

    fn train_proposed(&self, train_set: &Dataset, beta: f64) -> Result<TrainedModel, CliError> {
        Ok(train(train_set, &self.surface, &self.train_config(beta))?)
    }
}

/// Run one subcommand and return its manifest.
pub fn run(cli: &Cli) -> Result<RunManifest, CliError> {
    let ctx = Context::new(cli.resolve_config()?)?;
    let mut out = OutputDir::create(&cli.out)?;
    match cli.command {
        Command::Generate => generate(&ctx, &mut out)?,
        Command::Train => train_all(&ctx, &mut out)?,
        Command::Evaluate => evaluate_all(&ctx, &mut out, cli.plot_surface, cli.profile)?,
        Command::Sweep => sweep(&ctx, &mut out)?,
    }
    out.finish(cli.command.name(), &ctx.config, &ctx.fleet.digest())
}

fn generate(ctx: &Context, out: &mut OutputDir) -> Result<(), CliError> {
    let series = out.time("generate", || ctx.raw_series())?;
    let data = match &series {
        Some(s) => build_lag_features(s)?,
        None => ctx.dataset()?,
    };
    if let Some(series) = &series {
        series.save_csv(&out.prepare("data/raw.csv")?)?;
        out.record("data/raw.csv")?;
    }
    let (train_set, test_set) = ctx.split(&data)?;
    for (rel, set) in [("data/train.csv", &train_set), ("data/test.csv", &test_set)] {
        set.save_csv(&out.prepare(rel)?)?;
        out.record(rel)?;
    }
    out.write("fleet.toml", ctx.fleet.to_toml_string().as_bytes())
}

fn model_meta(ctx: &Context, method: &str, train_set: &Dataset) -> BTreeMap<String, String> {
    BTreeMap::from([
        ("method".to_string(), method.to_string()),
        ("fleet_digest".to_string(), ctx.fleet.digest()),
        ("seed".to_string(), ctx.config.seed.to_string()),
        ("train_samples".to_string(), train_set.len().to_string()),
    ])
}

fn trained_meta(ctx: &Context, method: &str, train_set: &Dataset, t: &TrainedModel) -> BTreeMap<String, String> {
    let mut meta = model_meta(ctx, method, train_set);
    let d = &t.diagnostics;
    for (k, v) in [
        ("beta", t.beta.to_string()),
        ("objective", t.objective.to_string()),
        ("alpha_star", t.alpha_star.to_string()),
        ("backend", d.backend.as_str().to_string()),
        ("iterations", d.iterations.to_string()),
        ("status", d.status.clone()),
        ("gap", d.gap.to_string()),
    ] {
        meta.insert(k.to_string(), v);
    }
    meta
}

fn save_model(
    out: &mut OutputDir,
    rel: &str,
    model: &LinearModel,
    meta: &BTreeMap<String, String>,
) -> Result<(), CliError> {
    model.save_csv(&out.prepare(rel)?, meta)?;
    out.record(rel)
}

fn train_all(ctx: &Context, out: &mut OutputDir) -> Result<(), CliError> {
    let data = ctx.dataset()?;
    let (train_set, _) = ctx.split(&data)?;
    let beta = ctx.config.beta;

    let proposed = out.time("train_proposed", || ctx.train_proposed(&train_set, beta))?;
    let qua_e = out.time("train_qua_e", || train_qua_e(&train_set))?;
    let val_n = out.time("train_val_n", || train_val_n(&train_set, &ctx.surface))?;

    save_model(out, MODEL_FILES[0].1, &proposed.model, &trained_meta(ctx, "proposed", &train_set, &proposed))?;
    save_model(out, MODEL_FILES[1].1, &qua_e, &model_meta(ctx, "qua_e", &train_set))?;
    save_model(out, MODEL_FILES[2].1, &val_n.model, &trained_meta(ctx, "val_n", &train_set, &val_n))
}

fn load_artifact(
    ctx: &Context,
    path: &Path,
    data: &Dataset,
) -> Result<(LinearModel, BTreeMap<String, String>), CliError> {
    if !path.exists() {
        return Err(CliError::MissingArtifact(path.to_path_buf()));
    }
    let (model, meta) = LinearModel::load_csv(path)?;
    let digest = ctx.fleet.digest();
    if meta.get("fleet_digest") != Some(&digest) {
        return Err(CliError::Config(format!("{} was trained for a different fleet", path.display())));
    }
    if model.feature_names != data.feature_names {
        return Err(CliError::Data(format!("{} expects features {:?}", path.display(), model.feature_names)));
    }
    Ok((model, meta))
}

/// Forecasts of every method on the test set, in [`METHODS`] order.
type Forecasts = Vec<(&'static str, Vec<f64>)>;

type Scored = Vec<(&'static str, MetricsReport, Vec<TraceRow>)>;

fn metrics_rows(reports: &[(&str, MetricsReport)]) -> Vec<Vec<String>> {
    reports
        .iter()
        .map(|(m, r)| {
            vec![
                m.to_string(),
                r.rmse.to_string(),
                r.avg_cost.to_string(),
                r.avg_high_cost.to_string(),
                r.beta.to_string(),
                r.quantile.to_string(),
                r.n.to_string(),
                r.m_above.to_string(),
                r.clamped.to_string(),
                r.degenerate.to_string(),
            ]
        })
        .collect()
}

const METRICS_HEADER: [&str; 10] =
    ["method", "rmse", "avg_cost", "avg_high_cost", "beta", "quantile", "n", "m_above", "clamped", "degenerate"];

fn trace_rows(prefix: &[String], method: &str, trace: &[TraceRow], rows: &mut Vec<Vec<String>>) {
    for t in trace {
        let mut row = prefix.to_vec();
        row.extend([
            method.to_string(),
            t.day.to_string(),
            t.slot.to_string(),
            t.y.to_string(),
            t.y_hat.to_string(),
            t.y_hat_used.to_string(),
            t.cost.to_string(),
        ]);
        rows.push(row);
    }
}

const TRACE_COLUMNS: [&str; 7] = ["method", "day", "slot", "y", "y_hat", "y_hat_used", "cost"];

fn score(ctx: &Context, forecasts: &Forecasts, test_set: &Dataset, beta: f64) -> Result<Scored, CliError> {
    forecasts
        .iter()
        .map(|(m, f)| {
            let (report, trace) = evaluate_forecasts(f, test_set, &ctx.fleet, beta)?;
            Ok((*m, report, trace))
        })
        .collect()
}

fn evaluate_all(ctx: &Context, out: &mut OutputDir, plot_surface: bool, profile: bool) -> Result<(), CliError> {
    let data = ctx.dataset()?;
    let (train_set, test_set) = ctx.split(&data)?;
    let beta = ctx.config.beta;

    let mut models = Vec::new();
    for (method, rel) in MODEL_FILES {
        let (model, meta) = load_artifact(ctx, &out.path(rel), &data)?;
        if method == "proposed" && meta.get("beta").and_then(|b| b.parse::<f64>().ok()) != Some(beta) {
            return Err(CliError::Config(format!(
                "{rel} was trained at beta {}, not {beta}; rerun `riskcast train`",
                meta.get("beta").map(String::as_str).unwrap_or("?")
            )));
        }
        models.push((method, model));
    }
    let sto =
        out.time("sto_opt", || sto_opt_forecasts(&train_set, &test_set, &ctx.surface, beta, ctx.config.k_neighbors))?;
    let mut forecasts: Forecasts = models.iter().map(|(m, model)| (*m, model.predict_all(&test_set))).collect();
    forecasts.push(("sto_opt", sto));

    let scored = out.time("evaluate", || score(ctx, &forecasts, &test_set, beta))?;
    let reports: Vec<(&str, MetricsReport)> = scored.iter().map(|(m, r, _)| (*m, r.clone())).collect();
    out.write("metrics.csv", &csv_bytes(&METRICS_HEADER, &metrics_rows(&reports)))?;
    let mut rows = Vec::new();
    for (m, _, trace) in &scored {
        trace_rows(&[], m, trace, &mut rows);
    }
    out.write("traces.csv", &csv_bytes(&TRACE_COLUMNS, &rows))?;

    if plot_surface {
        let mut buf = Vec::new();
        ctx.surface.write_csv(&mut buf)?;
        out.write("surface.csv", &buf)?;
        let y = ctx.config.plot_y.unwrap_or(0.5 * ctx.fleet.total_da());
        let pts = ctx.surface.plot_samples(y, ctx.config.plot_points)?;
        let rows: Vec<Vec<String>> =
            pts.iter().map(|(yh, c)| vec![y.to_string(), yh.to_string(), c.to_string()]).collect();
        out.write("surface_plot.csv", &csv_bytes(&["y", "y_hat", "cost"], &rows))?;
    }
    if profile {
        let days: Vec<usize> = test_set.days().into_iter().take(ctx.config.profile_days).collect();
        let rows: Vec<Vec<String>> = test_set
            .samples
            .iter()
            .enumerate()
            .filter(|(_, s)| days.contains(&s.day))
            .map(|(i, s)| {
                let mut row = vec![s.day.to_string(), s.slot.to_string(), s.y.to_string()];
                row.extend(forecasts.iter().map(|(_, f)| f[i].to_string()));
                row
            })
            .collect();
        let mut header = vec!["day", "slot", "y"];
        header.extend(METHODS);
        out.write("profile.csv", &csv_bytes(&header, &rows))?;
    }
    Ok(())
}

fn sweep(ctx: &Context, out: &mut OutputDir) -> Result<(), CliError> {
    let data = ctx.dataset()?;
    let (train_set, test_set) = ctx.split(&data)?;
    let qua_e = out.time("train_qua_e", || train_qua_e(&train_set))?;
    let val_n = out.time("train_val_n", || train_val_n(&train_set, &ctx.surface))?;

    let mut table = Vec::new();
    let mut traces = Vec::new();
    for &beta in &ctx.config.sweep_betas {
        let proposed = out.time(&format!("train_proposed_{beta}"), || ctx.train_proposed(&train_set, beta))?;
        let sto = out.time(&format!("sto_opt_{beta}"), || {
            sto_opt_forecasts(&train_set, &test_set, &ctx.surface, beta, ctx.config.k_neighbors)
        })?;
        let forecasts: Forecasts = vec![
            ("proposed", proposed.model.predict_all(&test_set)),
            ("qua_e", qua_e.predict_all(&test_set)),
            ("val_n", val_n.model.predict_all(&test_set)),
            ("sto_opt", sto),
        ];
        let scored = score(ctx, &forecasts, &test_set, beta)?;
        let high: BTreeMap<&str, f64> = scored.iter().map(|(m, r, _)| (*m, r.avg_high_cost)).collect();
        let reduction = 100.0 * (high["val_n"] - high["proposed"]) / high["val_n"];
        let mut row = vec![beta.to_string()];
        row.extend(METHODS.iter().map(|m| high[m].to_string()));
        row.push(reduction.to_string());
        table.push(row);
        for (m, _, trace) in &scored {
            trace_rows(&[beta.to_string()], m, trace, &mut traces);
        }
    }
    let mut header = vec!["beta"];
    header.extend(METHODS);
    header.push("reduction_vs_val_n_pct");
    out.write("sweep.csv", &csv_bytes(&header, &table))?;
    let mut trace_header = vec!["beta"];
    trace_header.extend(TRACE_COLUMNS);
    out.write("sweep_traces.csv", &csv_bytes(&trace_header, &traces))
}
