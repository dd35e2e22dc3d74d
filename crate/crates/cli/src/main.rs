//! `unidim` command-line tool.

mod settings;
mod svg;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use settings::Settings;
use unidim::experiments::{
    clustering_study, misfit_study, selection_study, similarity_study, ClusterMethod,
};
use unidim::io::{read_csv, write_csv, Table};
use unidim::stability::{order_density, OrderAlgorithm};
use unidim::{
    agglomerate, euclidean_item_distances, fit_mml, hcluster_marginal, item_correlations,
    mean_conditional_covariance, misfit_scores, pairwise_similarity, preset, roc_curve, select,
    similarity_to_distance, subsample_orders, Criterion, Dendrogram, FitConfig, Linkage, Partition,
    ResponseMatrix, Scenario,
};

/// Environment variable that sets the worker thread count.
const THREADS_ENV: &str = "UNIDIM_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "unidim",
    version,
    about = "Rasch-based item selection and clustering"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// key=value file supplying defaults for any flag
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quad_points: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Also write SVG plots
    #[arg(long)]
    emit_svg: bool,
}

#[derive(Args, Debug)]
struct InputArgs {
    /// CSV with a header of item labels and an optional person_id column
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SubsampleArgs {
    #[arg(long)]
    subsets: Option<usize>,
    #[arg(long)]
    proportion: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate data from a named design
    Simulate {
        #[arg(long)]
        scenario: Option<String>,
        /// Number of datasets
        #[arg(long)]
        reps: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Fit the Rasch model by marginal maximum likelihood
    Fit {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Build an item inclusion sequence
    Select {
        #[command(flatten)]
        input: InputArgs,
        /// max-sigma, sigma-change, delta-change or hybrid
        #[arg(long)]
        criterion: Option<String>,
        /// Item label, or 1-based column number
        #[arg(long)]
        anchor: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Misfit scores from subsampled inclusion orders
    Misfit {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        sub: SubsampleArgs,
        #[arg(long)]
        threshold: Option<f64>,
        /// sequential or hierarchical-first-cluster
        #[arg(long)]
        method: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Hierarchical item clustering
    Hcluster {
        #[command(flatten)]
        input: InputArgs,
        /// marginal, average, centroid or stability-average
        #[arg(long)]
        method: Option<String>,
        #[command(flatten)]
        sub: SubsampleArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Co-clustering similarities over person subsets
    Stability {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        sub: SubsampleArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Hit and false allocation rates of a dendrogram against a truth
    Evaluate {
        /// dendrogram.json written by hcluster
        #[command(flatten)]
        input: InputArgs,
        /// Partition JSON (list of 0-based index lists) or a scenario JSON
        #[arg(long)]
        truth: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Item correlations and mean conditional covariances
    Diagnose {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Run a simulation study over a named design
    Bench {
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        reps: Option<usize>,
        #[command(flatten)]
        sub: SubsampleArgs,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        criterion: Option<String>,
        #[command(flatten)]
        common: Common,
    },
}

/// Output directory, settings and the list of written artifacts.
struct Run {
    command: &'static str,
    settings: Settings,
    dir: PathBuf,
    seed: u64,
    fit: FitConfig,
    svg: bool,
    artifacts: Vec<String>,
}

impl Run {
    fn new(command: &'static str, common: &Common, default_seed: u64) -> Result<Self> {
        let mut s = Settings::load(common.config.as_deref())?;
        let dir: String = s.get(
            "output-dir",
            common.output_dir.as_ref().map(|p| p.display().to_string()),
            "unidim-out".into(),
        )?;
        let seed = s.get("seed", common.seed, default_seed)?;
        let fit = FitConfig {
            quad_points: s.get(
                "quad-points",
                common.quad_points,
                FitConfig::default().quad_points,
            )?,
            tol: s.get("tol", common.tol, FitConfig::default().tol)?,
            max_iter: s.get("max-iter", common.max_iter, FitConfig::default().max_iter)?,
            ..FitConfig::default()
        };
        fit.validate()?;
        let svg = s.get("emit-svg", common.emit_svg.then_some(true), false)?;
        let dir = PathBuf::from(dir);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            command,
            settings: s,
            dir,
            seed,
            fit,
            svg,
            artifacts: Vec::new(),
        })
    }

    fn input(&mut self, args: &InputArgs) -> Result<PathBuf> {
        let p: String = self.settings.required(
            "input",
            args.input.as_ref().map(|p| p.display().to_string()),
        )?;
        Ok(PathBuf::from(p))
    }

    fn data(&mut self, args: &InputArgs) -> Result<ResponseMatrix> {
        let path = self.input(args)?;
        let table = read_csv(&path).with_context(|| format!("reading {}", path.display()))?;
        log::info!(
            "read {} persons x {} items from {}",
            table.data.persons(),
            table.data.items(),
            path.display()
        );
        Ok(table.data)
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.to_string());
        self.dir.join(name)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    fn text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    fn csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> Result<()> {
        let path = self.path(name);
        let mut w =
            csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    fn matrix_csv(&mut self, name: &str, labels: &[String], values: &[Vec<f64>]) -> Result<()> {
        let mut header = vec!["item"];
        header.extend(labels.iter().map(String::as_str));
        let rows = labels.iter().zip(values).map(|(l, row)| {
            std::iter::once(l.clone())
                .chain(row.iter().map(|v| v.to_string()))
                .collect()
        });
        self.csv(name, &header, rows)
    }

    /// Writes the manifest and a replayable config file.
    fn finish(mut self) -> Result<()> {
        let artifacts = {
            let mut a = std::mem::take(&mut self.artifacts);
            a.push("run.conf".into());
            a.push("manifest.json".into());
            a
        };
        let params = std::mem::take(&mut self.settings).finish()?;
        fs::write(self.dir.join("run.conf"), settings::to_kv(&params))?;
        let manifest = json!({
            "tool": "unidim",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "seed": self.seed,
            "parameters": settings::to_json(&params),
            "replay": format!("unidim {} --config run.conf", self.command),
            "artifacts": artifacts,
        });
        fs::write(
            self.dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)? + "\n",
        )?;
        println!(
            "wrote {} artifacts to {}",
            artifacts.len(),
            self.dir.display()
        );
        Ok(())
    }
}

fn subsample(run: &mut Run, sub: &SubsampleArgs, default_subsets: usize) -> Result<(usize, f64)> {
    Ok((
        run.settings.get("subsets", sub.subsets, default_subsets)?,
        run.settings.get("proportion", sub.proportion, 0.5)?,
    ))
}

fn resolve_anchor(data: &ResponseMatrix, anchor: &str) -> Result<usize> {
    if let Some(i) = data.labels().iter().position(|l| l == anchor) {
        return Ok(i);
    }
    match anchor.parse::<usize>() {
        Ok(k) if (1..=data.items()).contains(&k) => Ok(k - 1),
        _ => bail!(
            "anchor '{anchor}' is neither an item label nor a column number 1..{}",
            data.items()
        ),
    }
}

fn fmt_sigma_csv(trace: &unidim::SelectionTrace) -> Vec<Vec<String>> {
    let label = |i: usize| trace.labels[i].clone();
    let mut rows = vec![
        vec![
            "1".into(),
            label(trace.order[0]),
            trace.step_sigma[0].to_string(),
        ],
        vec![
            "1".into(),
            label(trace.order[1]),
            trace.step_sigma[0].to_string(),
        ],
    ];
    for (step, s) in trace.step_sigma.iter().enumerate().skip(1) {
        rows.push(vec![
            (step + 1).to_string(),
            label(trace.order[step + 1]),
            s.to_string(),
        ]);
    }
    rows
}

fn write_dendrogram(run: &mut Run, den: &Dendrogram, title: &str) -> Result<()> {
    run.json("dendrogram.json", den)?;
    run.text("dendrogram.nwk", &(den.to_newick() + "\n"))?;
    if run.svg {
        run.text("dendrogram.svg", &svg::dendrogram(title, den))?;
    }
    Ok(())
}

fn read_truth(path: &Path) -> Result<Partition> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(p) = serde_json::from_str::<Partition>(&text) {
        return Ok(p);
    }
    let scenario: Scenario = serde_json::from_str(&text)
        .with_context(|| format!("{} is neither a partition nor a scenario", path.display()))?;
    scenario
        .true_partition
        .with_context(|| format!("scenario in {} has no true partition", path.display()))
}

fn run_command(command: Command) -> Result<()> {
    match command {
        Command::Simulate {
            scenario,
            reps,
            common,
        } => {
            let mut run = Run::new("simulate", &common, 1)?;
            let name: String = run.settings.required("scenario", scenario)?;
            let reps = run.settings.get("reps", reps, 1)?;
            let mut scenario = preset(&name)?;
            scenario.seed = run.seed;
            run.json("truth.json", &scenario)?;
            run.text("scenario.conf", &scenario.to_kv())?;
            for rep in 0..reps {
                let name = if reps == 1 {
                    "data.csv".to_string()
                } else {
                    format!("data_{:03}.csv", rep + 1)
                };
                let table = Table {
                    data: scenario.generate(rep)?,
                    person_ids: None,
                };
                write_csv(run.path(&name), &table)?;
            }
            run.finish()
        }
        Command::Fit { input, common } => {
            let mut run = Run::new("fit", &common, 1)?;
            let data = run.data(&input)?;
            let fit = fit_mml(&data, &run.fit)?;
            if !fit.converged {
                log::warn!(
                    "fit stopped after {} iterations without converging",
                    fit.iterations
                );
            }
            run.json("fit.json", &fit)?;
            run.finish()
        }
        Command::Select {
            input,
            criterion,
            anchor,
            common,
        } => {
            let mut run = Run::new("select", &common, 1)?;
            let data = run.data(&input)?;
            let criterion: Criterion = run
                .settings
                .get("criterion", criterion, "max-sigma".into())?
                .parse()?;
            let anchor = match run.settings.optional("anchor", anchor)? {
                Some(a) => Some(resolve_anchor(&data, &a)?),
                None => None,
            };
            let trace = select(&data, criterion, anchor, &run.fit)?;
            run.json("trace.json", &trace)?;
            run.csv(
                "trace.csv",
                &["step", "item", "sigma"],
                fmt_sigma_csv(&trace),
            )?;
            if run.svg {
                let points = trace
                    .step_sigma
                    .iter()
                    .enumerate()
                    .map(|(k, &s)| ((k + 1) as f64, s))
                    .collect();
                let chart = svg::line_chart(
                    "estimated sigma by step",
                    "step",
                    "sigma",
                    &[("sigma".into(), points)],
                );
                run.text("sigma_trajectory.svg", &chart)?;
            }
            run.finish()
        }
        Command::Misfit {
            input,
            sub,
            threshold,
            method,
            common,
        } => {
            let mut run = Run::new("misfit", &common, 1)?;
            let data = run.data(&input)?;
            let (subsets, proportion) = subsample(&mut run, &sub, 20)?;
            let threshold = run.settings.get("threshold", threshold, 0.75)?;
            let algorithm: OrderAlgorithm = run
                .settings
                .get("method", method, "sequential".into())?
                .parse()?;
            let orders =
                subsample_orders(&data, subsets, proportion, algorithm, run.seed, &run.fit)?;
            let report = misfit_scores(&orders, threshold);
            run.json("orders.json", &orders)?;
            run.json("misfit.json", &report)?;
            let rows = (0..report.labels.len()).map(|i| {
                vec![
                    report.labels[i].clone(),
                    report.misfit[i].to_string(),
                    report.mean_std[i].to_string(),
                ]
            });
            run.csv("misfit.csv", &["item", "misfit", "mean_std"], rows)?;
            let curves: Vec<(String, Vec<(f64, f64)>)> = (0..orders.items())
                .map(|i| Ok((orders.labels[i].clone(), order_density(&orders, i)?)))
                .collect::<Result<_>>()?;
            let rows = curves.iter().flat_map(|(l, c)| {
                c.iter()
                    .map(move |(x, d)| vec![l.clone(), x.to_string(), d.to_string()])
            });
            run.csv("density.csv", &["item", "order", "density"], rows)?;
            if run.svg {
                run.text(
                    "density.svg",
                    &svg::line_chart("inclusion order density", "order", "density", &curves),
                )?;
            }
            run.finish()
        }
        Command::Hcluster {
            input,
            method,
            sub,
            common,
        } => {
            let mut run = Run::new("hcluster", &common, 1)?;
            let data = run.data(&input)?;
            let method: String = run.settings.get("method", method, "marginal".into())?;
            let den = match method.as_str() {
                "marginal" => hcluster_marginal(&data, &run.fit)?,
                "average" => agglomerate(&euclidean_item_distances(&data), Linkage::Average)?,
                "centroid" => agglomerate(&euclidean_item_distances(&data), Linkage::Centroid)?,
                "stability-average" => {
                    let (subsets, proportion) = subsample(&mut run, &sub, 15)?;
                    let s = pairwise_similarity(&data, subsets, proportion, run.seed, &run.fit)?;
                    run.json("similarity.json", &s)?;
                    agglomerate(&similarity_to_distance(&s)?, Linkage::Average)?
                }
                other => bail!("unknown method '{other}', expected marginal, average, centroid or stability-average"),
            };
            write_dendrogram(&mut run, &den, &format!("{method} clustering"))?;
            run.finish()
        }
        Command::Stability { input, sub, common } => {
            let mut run = Run::new("stability", &common, 1)?;
            let data = run.data(&input)?;
            let (subsets, proportion) = subsample(&mut run, &sub, 15)?;
            let s = pairwise_similarity(&data, subsets, proportion, run.seed, &run.fit)?;
            let d = similarity_to_distance(&s)?;
            run.json("similarity.json", &s)?;
            run.matrix_csv("similarity.csv", &s.labels, &s.values)?;
            run.matrix_csv("distance.csv", &d.labels, &d.values)?;
            run.finish()
        }
        Command::Evaluate {
            input,
            truth,
            common,
        } => {
            let mut run = Run::new("evaluate", &common, 1)?;
            let path = run.input(&input)?;
            let text =
                fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let den: Dendrogram = serde_json::from_str(&text)
                .with_context(|| format!("{} is not a dendrogram", path.display()))?;
            den.validate()?;
            let truth_path: String = run
                .settings
                .required("truth", truth.map(|p| p.display().to_string()))?;
            let truth = read_truth(Path::new(&truth_path))?;
            let curve = roc_curve(&truth, &den)?;
            run.json("curve.json", &curve)?;
            let rows = curve
                .labels
                .iter()
                .zip(&curve.points)
                .map(|(k, (h, f))| vec![k.to_string(), h.to_string(), f.to_string()]);
            run.csv("curve.csv", &["k", "h", "f"], rows)?;
            if run.svg {
                let points = curve.points.iter().map(|&(h, f)| (f, h)).collect();
                let chart = svg::line_chart(
                    "hit rate against false allocation rate",
                    "f",
                    "h",
                    &[("cuts".into(), points)],
                );
                run.text("curve.svg", &chart)?;
            }
            run.finish()
        }
        Command::Diagnose { input, common } => {
            let mut run = Run::new("diagnose", &common, 1)?;
            let data = run.data(&input)?;
            let r = item_correlations(&data)?;
            let c = mean_conditional_covariance(&data)?;
            run.json(
                "diagnostics.json",
                &json!({ "labels": data.labels(), "correlations": r, "conditional_covariance": c }),
            )?;
            run.matrix_csv("correlations.csv", data.labels(), &r)?;
            run.matrix_csv("conditional_covariance.csv", data.labels(), &c.values)?;
            run.finish()
        }
        Command::Bench {
            scenario,
            reps,
            sub,
            threshold,
            criterion,
            common,
        } => {
            let mut run = Run::new("bench", &common, 1)?;
            let name: String = run.settings.required("scenario", scenario)?;
            let reps = run.settings.get("reps", reps, 50)?;
            let mut scenario = preset(&name)?;
            scenario.seed = run.seed;
            if scenario.true_partition.is_some() {
                let methods = [
                    ClusterMethod::Marginal,
                    ClusterMethod::Average,
                    ClusterMethod::Centroid,
                ];
                let (subsets, proportion) = subsample(&mut run, &sub, 15)?;
                let curves = clustering_study(&scenario, reps, &methods, &run.fit)?;
                let sim = similarity_study(&scenario, reps, subsets, proportion, &run.fit)?;
                run.json(
                    "bench.json",
                    &json!({ "scenario": scenario, "clustering": curves, "similarity": sim }),
                )?;
                let rows = curves.curves.iter().flat_map(|c| {
                    c.mean_points.iter().enumerate().map(move |(k, (h, f))| {
                        vec![
                            serde_json::to_value(c.method)
                                .unwrap()
                                .as_str()
                                .unwrap_or_default()
                                .to_string(),
                            (k + 1).to_string(),
                            h.to_string(),
                            f.to_string(),
                        ]
                    })
                });
                run.csv("curves.csv", &["method", "k", "h", "f"], rows)?;
                run.matrix_csv("similarity.csv", &sim.labels, &sim.mean_similarity)?;
                println!(
                    "within-block s {:.3}, between-block s {:.3}",
                    sim.within_mean, sim.between_mean
                );
                for c in &curves.curves {
                    let (h, f) = c.at(curves.true_k);
                    println!("{:?}: k={} h={h:.3} f={f:.3}", c.method, curves.true_k);
                }
            } else {
                let (subsets, proportion) = subsample(&mut run, &sub, 20)?;
                let threshold = run.settings.get("threshold", threshold, 0.75)?;
                let criterion: Criterion = run
                    .settings
                    .get("criterion", criterion, "max-sigma".into())?
                    .parse()?;
                let sel = selection_study(&scenario, reps, criterion, &run.fit)?;
                let mis = misfit_study(
                    &scenario,
                    reps,
                    subsets,
                    proportion,
                    threshold,
                    OrderAlgorithm::Sequential,
                    &run.fit,
                )?;
                run.json(
                    "bench.json",
                    &json!({ "scenario": scenario, "selection": sel, "misfit": mis }),
                )?;
                let rows = (0..mis.labels.len()).map(|i| {
                    vec![
                        mis.labels[i].clone(),
                        mis.mean_misfit[i].to_string(),
                        mis.mean_std[i].to_string(),
                    ]
                });
                run.csv("misfit.csv", &["item", "mean_misfit", "mean_std"], rows)?;
                let rows = sel
                    .mean_step_sigma
                    .iter()
                    .enumerate()
                    .map(|(k, s)| vec![(k + 1).to_string(), s.to_string()]);
                run.csv("selection.csv", &["step", "mean_sigma"], rows)?;
                println!(
                    "shuffled items last in {:.0}% of runs",
                    100.0 * sel.polluted_last
                );
                for i in 0..mis.labels.len() {
                    println!(
                        "{:>8}  mf={:.2}  mean_std={:.2}",
                        mis.labels[i], mis.mean_misfit[i], mis.mean_std[i]
                    );
                }
            }
            run.finish()
        }
    }
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .with_context(|| format!("{THREADS_ENV} must be a positive integer, got '{v}'"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = init_threads().and_then(|_| run_command(cli.command)) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
