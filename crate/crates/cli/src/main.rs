//! `zresid` — fit shared gamma-frailty proportional-hazards models, compute
//! residual diagnostics, run goodness-of-fit tests, drive simulation
//! studies, and emit static plots.
//!
//! Exit codes: 0 success, 2 validation error, 3 non-convergence.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use zresid::gof::{self, TestMethod};
use zresid::residuals;
use zresid::sim::{run_grid, write_manifest, write_rejection_csv, ExperimentGrid};
use zresid::{
    fit_ppl, load_csv, summarize, CovariateSelector, CsvSchema, Error, FitControl, FrailtyFit,
    ModelSpec, SurvivalDataset,
};

#[derive(Parser)]
#[command(name = "zresid", version, about = "Shared-frailty survival models and Z-residual diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a shared gamma-frailty proportional-hazards model to a CSV.
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// Column holding follow-up times.
        #[arg(long, default_value = "time")]
        time: String,
        /// Column holding the 0/1 event indicator.
        #[arg(long, default_value = "status")]
        status: String,
        /// Column holding cluster identifiers.
        #[arg(long, default_value = "cluster")]
        cluster: String,
        /// Model covariate as `name` or `name:log`; repeatable, in order.
        #[arg(long = "covariate")]
        covariates: Vec<String>,
        /// Drop the frailty term (plain Cox model).
        #[arg(long)]
        no_frailty: bool,
        /// Output path for the fit JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute one residual kind for every record and write a CSV.
    Residuals {
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// cs | martingale | deviance | censored-z | z
        #[arg(long)]
        kind: String,
        /// RNG seed (used by the randomized z kind).
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a goodness-of-fit or non-homogeneity test, optionally replicated.
    Test {
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// z-sw | z-sf | z-ks | dev-sw | cz-csf | z-aov-lp | z-aov-cov
        #[arg(long)]
        method: String,
        /// Grouping covariate for z-aov-cov, as `name` or `name:log`.
        #[arg(long)]
        cov: Option<String>,
        /// Number of equal-width groups for the ANOVA tests.
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long)]
        seed: u64,
        /// Number of regenerated Z-residual sets.
        #[arg(long, default_value_t = 1)]
        replicates: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also write one CSV row per replicate p-value.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run the rejection-rate grid described by a JSON config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Override the grid with the full-scale study layout.
        #[arg(long)]
        paper_scale: bool,
        /// Worker count (defaults to the config, then ZRESID_THREADS, then
        /// the hardware parallelism).
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// Render a figure as a self-contained SVG plus the plotted points CSV.
    Plot {
        /// qq | chf45 | scatter-lowess | grouped-box | pvalue-hist
        #[arg(long)]
        kind: String,
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// X source for scatter/boxplot kinds: covariate `name[:log]` or `LP`.
        #[arg(long)]
        x: Option<String>,
        /// RNG seed (required by the Z-residual based kinds).
        #[arg(long)]
        seed: Option<u64>,
        /// Test method for pvalue-hist.
        #[arg(long)]
        method: Option<String>,
        /// Grouping covariate for method z-aov-cov.
        #[arg(long)]
        cov: Option<String>,
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Replicates for pvalue-hist.
        #[arg(long, default_value_t = 1000)]
        replicates: usize,
        /// LOWESS span fraction.
        #[arg(long, default_value_t = 2.0 / 3.0)]
        span: f64,
        /// LOWESS robustness iterations.
        #[arg(long, default_value_t = 3)]
        iterations: usize,
        #[arg(long)]
        svg: PathBuf,
        #[arg(long)]
        csv: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::NoConvergence(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn load_dataset(path: &Path, schema: &CsvSchema) -> Result<SurvivalDataset, Error> {
    load_csv(path, schema)
}

fn load_fit(path: &Path) -> Result<FrailtyFit, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
    serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Invalid(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::Io { path: path.into(), source: e })
}

#[derive(Serialize)]
struct TestOutput {
    method: String,
    k: usize,
    seed: u64,
    replicates: usize,
    p_min: f64,
    p_values: Vec<f64>,
    per_replicate_seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<gof::TestReport>,
}

#[derive(serde::Deserialize)]
struct SimulateConfig {
    /// Randomized runs always carry an explicit seed.
    seed: Option<u64>,
    #[serde(default)]
    parallelism: Option<usize>,
    #[serde(default)]
    grid: ExperimentGrid,
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Fit { data, time, status, cluster, covariates, no_frailty, out } => {
            let schema = CsvSchema {
                time,
                status,
                cluster,
                covariates: None,
            };
            let dataset = load_dataset(&data, &schema)?;
            let selectors = covariates
                .iter()
                .map(|c| CovariateSelector::parse(c))
                .collect::<Result<Vec<_>, _>>()?;
            let spec = ModelSpec::new(selectors, !no_frailty);
            let fit = fit_ppl(&dataset, &spec, &FitControl::default())?;
            write_json(&fit, &out)?;

            let s = summarize(&dataset);
            println!(
                "n={} clusters={} events={} censoring={:.1}%",
                s.n,
                s.n_clusters,
                s.n_events,
                100.0 * s.censoring_rate
            );
            for (i, name) in fit.term_names.iter().enumerate() {
                println!("{name}: {:.6} (se {:.6})", fit.beta[i], fit.stderr_beta[i]);
            }
            println!(
                "theta={:.6} marginal_loglik={:.4} aic={:.4} converged={}",
                fit.theta, fit.marginal_loglik, fit.aic, fit.converged
            );
            if let Some(msg) = &fit.message {
                println!("note: {msg}");
            }
            if fit.converged {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("fit did not converge; trace written to {}", out.display());
                Ok(ExitCode::from(3))
            }
        }

        Command::Residuals { fit, data, kind, seed, out } => {
            let fit = load_fit(&fit)?;
            let dataset = load_dataset(&data, &CsvSchema::canonical())?;
            let set = match kind.as_str() {
                "cs" => residuals::cox_snell(&fit, &dataset)?,
                "martingale" => residuals::martingale(&fit, &dataset)?,
                "deviance" => residuals::deviance(&fit, &dataset)?,
                "censored-z" => residuals::censored_z(&fit, &dataset)?,
                "z" => residuals::z_residual(&fit, &dataset, seed)?,
                other => return Err(Error::Invalid(format!("unknown residual kind `{other}`"))),
            };
            residuals::write_csv(&set, &dataset, &out)?;
            if set.clamped > 0 {
                eprintln!("note: {} survival probabilities hit the numeric clamp", set.clamped);
            }
            println!("{} {} residuals -> {}", set.values.len(), set.kind.as_str(), out.display());
            Ok(ExitCode::SUCCESS)
        }

        Command::Test { fit, data, method, cov, k, seed, replicates, out, csv } => {
            let fit = load_fit(&fit)?;
            let dataset = load_dataset(&data, &CsvSchema::canonical())?;
            let method = TestMethod::parse(&method, cov.as_deref())?;

            let reports =
                gof::replicate_tests(&fit, &dataset, std::slice::from_ref(&method), replicates, seed, k, 1)?;
            if let Some(csv_path) = &csv {
                gof::write_replication_csv(&reports, csv_path)?;
            }
            let rep = &reports[0];
            let report = if replicates == 1 {
                Some(gof::run_method(&fit, &dataset, &method, k, rep.per_replicate_seeds[0])?)
            } else {
                None
            };
            let output = TestOutput {
                method: method.display_name(),
                k,
                seed,
                replicates,
                p_min: rep.p_min,
                p_values: rep.p_values.clone(),
                per_replicate_seeds: rep.per_replicate_seeds.clone(),
                report,
            };
            write_json(&output, &out)?;
            println!("{}: p_min={} over {} replicate(s)", output.method, output.p_min, replicates);
            Ok(ExitCode::SUCCESS)
        }

        Command::Simulate { config, out_dir, paper_scale, parallelism } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| Error::Io { path: config.clone(), source: e })?;
            let cfg: SimulateConfig = serde_json::from_str(&text)
                .map_err(|e| Error::Invalid(format!("{}: {e}", config.display())))?;
            let seed = cfg
                .seed
                .ok_or_else(|| Error::Invalid("simulate config must set an explicit `seed`".into()))?;
            let grid = if paper_scale { cfg.grid.paper_scale() } else { cfg.grid };
            let parallelism = parallelism
                .or(cfg.parallelism)
                .unwrap_or_else(zresid::default_parallelism);

            std::fs::create_dir_all(&out_dir)
                .map_err(|e| Error::Io { path: out_dir.clone(), source: e })?;
            let output = run_grid(&grid, parallelism, seed)?;
            let csv_path = out_dir.join("rejection_rates.csv");
            let manifest_path = out_dir.join("manifest.json");
            write_rejection_csv(&output.rows, &csv_path)?;
            write_manifest(&output.manifest, &manifest_path)?;
            println!(
                "{} rows -> {} (manifest {})",
                output.rows.len(),
                csv_path.display(),
                manifest_path.display()
            );
            Ok(ExitCode::SUCCESS)
        }

        Command::Plot {
            kind,
            fit,
            data,
            x,
            seed: seed_opt,
            method,
            cov,
            k,
            replicates,
            span,
            iterations,
            svg,
            csv,
        } => {
            let kind = zresid::plot::PlotKind::parse(&kind)?;
            let fit = load_fit(&fit)?;
            let dataset = load_dataset(&data, &CsvSchema::canonical())?;

            let need_seed = || {
                seed_opt.ok_or_else(|| {
                    Error::Invalid("this plot kind randomizes Z-residuals; pass --seed".into())
                })
            };
            let x_values = |x: &Option<String>| -> Result<(Vec<f64>, String), Error> {
                match x.as_deref() {
                    Some("LP") | Some("lp") => Ok((fit.linear_predictors(&dataset)?, "linear predictor".into())),
                    Some(sel) => {
                        let sel = CovariateSelector::parse(sel)?;
                        Ok((sel.values(&dataset)?, sel.label()))
                    }
                    None => Err(Error::Invalid("this plot kind needs --x <name[:log]|LP>".into())),
                }
            };

            match kind {
                zresid::plot::PlotKind::Qq => {
                    let z = residuals::z_residual(&fit, &dataset, need_seed()?)?;
                    zresid::plot::render_qq(&z.values, &svg, &csv)?;
                }
                zresid::plot::PlotKind::Chf45 => {
                    let cs = residuals::cox_snell(&fit, &dataset)?;
                    let chf = gof::km_chf(&cs)?;
                    zresid::plot::render_chf45(&chf, &svg, &csv)?;
                }
                zresid::plot::PlotKind::ScatterLowess => {
                    let z = residuals::z_residual(&fit, &dataset, need_seed()?)?;
                    let (xs, label) = x_values(&x)?;
                    zresid::plot::render_scatter_lowess(&xs, &z.values, span, iterations, &label, &svg, &csv)?;
                }
                zresid::plot::PlotKind::GroupedBox => {
                    let z = residuals::z_residual(&fit, &dataset, need_seed()?)?;
                    let (xs, label) = x_values(&x)?;
                    zresid::plot::render_grouped_box(&z.values, &xs, k, &label, &svg, &csv)?;
                }
                zresid::plot::PlotKind::PvalueHist => {
                    let method_name = method.ok_or_else(|| {
                        Error::Invalid("pvalue-hist needs --method <test-method>".into())
                    })?;
                    let method = TestMethod::parse(&method_name, cov.as_deref())?;
                    let reports = gof::replicate_tests(
                        &fit,
                        &dataset,
                        std::slice::from_ref(&method),
                        replicates,
                        need_seed()?,
                        k,
                        1,
                    )?;
                    let rep = &reports[0];
                    let title = format!("{} p-values (J={replicates})", method.display_name());
                    zresid::plot::render_pvalue_hist(&rep.p_values, rep.p_min, 20, &title, &svg, &csv)?;
                }
            }
            println!("wrote {} and {}", svg.display(), csv.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
