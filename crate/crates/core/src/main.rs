use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mldes::clustering::{cluster, load_clustering, ClusterParams};
use mldes::matrix::{build_dmm, dsm_from_dmm};
use mldes::model::ModelSet;
use mldes::refine::refine;
use mldes::report::{
    self, css_csv, css_profile_from_columns, load_model, read_css_column, requirement_names,
    result_json, ClusteringMode, ConfigFile, PipelineConfig, OUT_DIR_ENV,
};
use mldes::synthesis::{global_equivalence, synthesize_tree, DEFAULT_STATE_BUDGET};
use mldes::transform::{transform_c_to_t, SynthesisTree};

#[derive(Parser)]
#[command(name = "mldes", version, about = "Multilevel supervisor synthesis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a model and print it in canonical form.
    Parse {
        model: PathBuf,
        /// Print JSON instead of the text form.
        #[arg(long)]
        json: bool,
    },
    /// Print the most refined product system as JSON.
    Refine { model: PathBuf },
    /// Print the DSM (or DMM) as CSV.
    Dsm {
        model: PathBuf,
        /// Print the component × requirement DMM instead.
        #[arg(long)]
        dmm: bool,
        /// Also write a PPM heat grid.
        #[arg(long)]
        ppm: Option<PathBuf>,
        #[arg(long, default_value_t = 16)]
        cell: usize,
    },
    /// Cluster the DSM and print the clustering.
    Cluster {
        model: PathBuf,
        #[command(flatten)]
        clustering: ClusterArgs,
        #[arg(long)]
        json: bool,
    },
    /// Print the synthesis tree as JSON.
    Transform {
        model: PathBuf,
        #[command(flatten)]
        clustering: ClusterArgs,
        /// Also write the tree as Graphviz.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Synthesize every node of a tree.
    Synth {
        #[arg(long)]
        model: PathBuf,
        /// Tree JSON from `transform`; clustered afresh when omitted.
        #[arg(long)]
        tree: Option<PathBuf>,
        #[command(flatten)]
        clustering: ClusterArgs,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long, default_value_t = DEFAULT_STATE_BUDGET)]
        state_budget: usize,
        /// Print JSON instead of the css CSV.
        #[arg(long)]
        json: bool,
        /// Also compare against the monolithic supervisor.
        #[arg(long)]
        verify: bool,
    },
    /// Run every stage and write all artifacts.
    Pipeline {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        clustering: ClusterArgs,
        #[arg(long, env = OUT_DIR_ENV)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        state_budget: Option<usize>,
    },
    /// Side-by-side descending css profile of several `css.csv` files.
    Profile {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

#[derive(Args, Clone, Default)]
struct ClusterArgs {
    /// Hand-written clustering (text or JSON).
    #[arg(long)]
    manual: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<u32>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Disable bus detection.
    #[arg(long, conflicts_with = "gamma")]
    no_bus: bool,
    /// Detect buses at every level.
    #[arg(long)]
    local_bus: bool,
    #[arg(long)]
    max_depth: Option<usize>,
}

impl ClusterArgs {
    fn params(&self, file: &ConfigFile) -> Result<ClusterParams> {
        let mut p = ClusterParams::default();
        if let Some(v) = self.alpha.or(file.alpha) {
            p.alpha = v;
        }
        if let Some(v) = self.beta.or(file.beta) {
            p.beta = v;
        }
        if let Some(v) = self.mu.or(file.mu) {
            p.mu = v;
        }
        if let Some(v) = self.gamma.or(file.gamma) {
            p.gamma = Some(v);
        }
        if self.no_bus || file.no_bus == Some(true) {
            p.gamma = None;
        }
        p.local_bus = self.local_bus || file.local_bus == Some(true);
        p.max_depth = self.max_depth.or(file.max_depth);
        p.validate()?;
        Ok(p)
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

fn build_tree(model: &ModelSet, args: &ClusterArgs) -> Result<SynthesisTree> {
    let ps = refine(&model.plants);
    let dmm = build_dmm(&ps, model);
    let c = match &args.manual {
        Some(path) => load_clustering(&read(path)?, model, &ps)?,
        None => cluster(&dsm_from_dmm(&dmm), &args.params(&ConfigFile::default())?, model.requirements.len())?,
    };
    Ok(transform_c_to_t(&c, &dmm, ps.names(), &requirement_names(model))?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Parse { model, json } => {
            let m = load_model(&model)?;
            print!("{}", if json { m.to_json() } else { m.to_text() });
        }
        Command::Refine { model } => {
            let m = load_model(&model)?;
            print!("{}", refine(&m.plants).to_json(&m.plants));
        }
        Command::Dsm { model, dmm, ppm, cell } => {
            let m = load_model(&model)?;
            let ps = refine(&m.plants);
            let pr = build_dmm(&ps, &m);
            let p = dsm_from_dmm(&pr);
            if dmm {
                print!("{}", pr.to_csv(ps.names(), &requirement_names(&m)));
            } else {
                print!("{}", p.to_csv(ps.names()));
            }
            if let Some(path) = ppm {
                write(&path, &p.to_ppm(cell))?;
            }
        }
        Command::Cluster {
            model,
            clustering,
            json,
        } => {
            let m = load_model(&model)?;
            let ps = refine(&m.plants);
            let c = match &clustering.manual {
                Some(path) => load_clustering(&read(path)?, &m, &ps)?,
                None => {
                    let dsm = dsm_from_dmm(&build_dmm(&ps, &m));
                    cluster(&dsm, &clustering.params(&ConfigFile::default())?, m.requirements.len())?
                }
            };
            if json {
                print!("{}", c.to_json(ps.names(), &requirement_names(&m)));
            } else {
                println!("{}", c.to_text(ps.names()));
            }
        }
        Command::Transform {
            model,
            clustering,
            dot,
        } => {
            let m = load_model(&model)?;
            let tree = build_tree(&m, &clustering)?;
            print!("{}", tree.to_json());
            if let Some(path) = dot {
                write(&path, &tree.to_dot(None))?;
            }
        }
        Command::Synth {
            model,
            tree,
            clustering,
            jobs,
            state_budget,
            json,
            verify,
        } => {
            let m = load_model(&model)?;
            let ps = refine(&m.plants);
            let tree = match tree {
                Some(path) => SynthesisTree::from_json(&read(&path)?, ps.names(), &requirement_names(&m))
                    .map_err(anyhow::Error::msg)
                    .with_context(|| format!("loading tree {}", path.display()))?,
                None => build_tree(&m, &clustering)?,
            };
            let result = synthesize_tree(&tree, &m, &ps, jobs, state_budget)?;
            if json {
                print!("{}", result_json(&tree, &result));
            } else {
                print!("{}", css_csv(&tree, &result));
            }
            if verify {
                let eq = global_equivalence(&result, &m, state_budget)?;
                eprintln!(
                    "equivalent to monolithic: {} (monolithic css {}, composed states {})",
                    eq.equivalent, eq.monolithic_css, eq.composed_states
                );
                if let Some(w) = eq.warning() {
                    eprintln!("warning: {w}");
                }
            }
        }
        Command::Pipeline {
            model,
            config,
            clustering,
            out,
            jobs,
            state_budget,
        } => {
            let file = match &config {
                Some(path) => ConfigFile::load(path)?,
                None => ConfigFile::default(),
            };
            let Some(model) = model.or(file.model.clone()) else {
                bail!("no model given (use --model or `model` in the config file)");
            };
            let Some(out) = out.or(file.out.clone()) else {
                bail!("no output directory given (use --out, `out` or {OUT_DIR_ENV})");
            };
            let mut cfg = PipelineConfig::new(model, out);
            cfg.params = clustering.params(&file)?;
            if let Some(path) = clustering.manual.or(file.manual.clone()) {
                cfg.clustering = ClusteringMode::Manual(path);
            }
            cfg.jobs = jobs.or(file.jobs).unwrap_or(0);
            cfg.state_budget = state_budget.or(file.state_budget).unwrap_or(DEFAULT_STATE_BUDGET);
            let a = report::pipeline(&cfg)?;
            println!(
                "total css {} over {} nodes, max node css {}; artifacts in {}",
                a.result.total_css,
                a.result.nodes.len(),
                a.result.max_css(),
                cfg.out_dir.display()
            );
            if !a.result.empty.is_empty() {
                eprintln!("warning: empty supervisor at {}", a.result.empty.join(", "));
            }
        }
        Command::Profile { files } => {
            let mut columns = Vec::new();
            for f in &files {
                let label = f
                    .parent()
                    .and_then(|p| p.file_name())
                    .unwrap_or(f.as_os_str())
                    .to_string_lossy()
                    .into_owned();
                columns.push((label, read_css_column(&read(f)?)?));
            }
            print!("{}", css_profile_from_columns(&columns));
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
