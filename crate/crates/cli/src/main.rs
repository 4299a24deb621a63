use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use morals::config::{Config, SystemKind};
use morals::dataset::TrajectoryDataset;
use morals::eval::{self, report_csv, report_summary, Metrics};
use morals::grid::CubicalGrid;
use morals::morse::parse_cell_labels;
use morals::neural::{load_checkpoint, loss_history_csv, save_checkpoint, AutoencoderModel};
use morals::pipeline::{self, AblationAxis};
use morals::plot::render_roa;
use morals::Error;

#[derive(Parser, Debug)]
#[command(
    name = "morals",
    version,
    about = "Morse graphs of learned latent dynamics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Config file (`[section]` headers and `key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// System whose defaults are used when no config file is given.
    #[arg(long, global = true, value_enum)]
    system: Option<SystemArg>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads; defaults to the config value, then to all cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    latent_dim: Option<usize>,
    #[arg(long, global = true)]
    grid_k: Option<u32>,
    #[arg(long, global = true)]
    lipschitz_mult: Option<f64>,
    #[arg(long, global = true, value_enum)]
    l4: Option<Toggle>,
    #[arg(long, global = true)]
    fraction: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Collect trajectories and write train.csv / test.csv.
    Gen,
    /// Train with restarts; writes model.json and loss_history.csv.
    Train,
    /// Latent grid, map, Morse graph and cell labels for model.json.
    Analyze,
    /// Score the test split against the exported cell labels.
    Eval,
    /// Morse analysis of the true system map on a fixed partition.
    Direct,
    /// Draw the labeled latent grid as roa.svg.
    Plot,
    /// Best-of-seeds metrics over one or all ablation axes.
    Ablate {
        /// fraction, lipschitz, l4, latent_dim or all.
        #[arg(long, default_value = "all")]
        axis: String,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SystemArg {
    Pendulum,
    Bistable,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Toggle {
    On,
    Off,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse { .. } => 2,
            Error::RestartsExhausted { .. } => 4,
            _ => 3,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type Outcome<T = ()> = std::result::Result<T, Failure>;

fn load_config(cli: &Cli) -> Outcome<Config> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
            let cfg = Config::parse(&text, path)?;
            if let Some(s) = cli.system {
                if kind(s) != cfg.system {
                    return Err(Failure::config(
                        "--system disagrees with system.name in the config",
                    ));
                }
            }
            cfg
        }
        None => Config::defaults(cli.system.map_or(SystemKind::Pendulum, kind)),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(d) = cli.latent_dim {
        cfg.train.latent_dim = d;
    }
    if let Some(k) = cli.grid_k {
        cfg.analysis.grid_k = k;
    }
    if let Some(m) = cli.lipschitz_mult {
        cfg.analysis.lipschitz_mult = m;
    }
    if let Some(t) = cli.l4 {
        cfg.train.use_separation = matches!(t, Toggle::On);
    }
    if let Some(f) = cli.fraction {
        cfg.data.fraction = f;
    }
    cfg.validate().map_err(|e| Failure::config(e.to_string()))?;
    Ok(cfg)
}

fn kind(s: SystemArg) -> SystemKind {
    match s {
        SystemArg::Pendulum => SystemKind::Pendulum,
        SystemArg::Bistable => SystemKind::Bistable,
    }
}

struct Out {
    dir: PathBuf,
}

impl Out {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&self, name: &str, contents: &str) -> Outcome {
        let p = self.path(name);
        fs::write(&p, contents).map_err(|e| Failure::from(Error::io(p.display().to_string(), e)))
    }

    fn read(&self, name: &str) -> Outcome<String> {
        let p = self.path(name);
        fs::read_to_string(&p).map_err(|e| Failure::from(Error::io(p.display().to_string(), e)))
    }

    fn dataset(&self, name: &str) -> Outcome<TrajectoryDataset> {
        Ok(TrajectoryDataset::load(&self.path(name))?)
    }

    fn model(&self) -> Outcome<AutoencoderModel> {
        Ok(load_checkpoint(&self.path("model.json"))?)
    }

    fn labeled_grid(&self) -> Outcome<(CubicalGrid, Vec<morals::morse::CellClass>)> {
        let grid = CubicalGrid::parse_valid_mask(
            &self.read("valid_mask.txt")?,
            &self.path("valid_mask.txt"),
        )?;
        let labels = parse_cell_labels(
            &self.read("cell_labels.csv")?,
            &self.path("cell_labels.csv"),
            grid.num_cells(),
        )?;
        Ok((grid, labels))
    }
}

fn print_counts(name: &str, ds: &TrajectoryDataset) {
    println!(
        "{name}: {} trajectories, {} pairs, success rate {:.4}",
        ds.len(),
        ds.num_pairs(),
        ds.success_rate()
    );
}

fn cmd_gen(cfg: &Config, out: &Out) -> Outcome {
    let (train, test) = pipeline::generate(cfg)?;
    out.write("train.csv", &train.to_csv())?;
    out.write("test.csv", &test.to_csv())?;
    print_counts("train", &train);
    print_counts("test", &test);
    if test.is_empty() {
        eprintln!("warning: the test split is empty");
    }
    Ok(())
}

fn cmd_train(cfg: &Config, out: &Out) -> Outcome {
    let train = out.dataset("train.csv")?;
    let subset = pipeline::training_subset(cfg, &train)?;
    let run = pipeline::train_and_analyze(&subset, cfg, cfg.seed)?;
    save_checkpoint(&run.model, &out.path("model.json"))?;
    out.write("loss_history.csv", &loss_history_csv(&run.history))?;
    if let Some(last) = run.history.last() {
        println!(
            "epoch {} total {:.6} l1 {:.6} l2 {:.6} l3 {:.6} l4 {}",
            last.epoch,
            last.total,
            last.l1,
            last.l2,
            last.l3,
            last.l4.map_or("-".into(), |v| format!("{v:.6}"))
        );
    }
    println!(
        "accepted seed {} after {} attempt(s), {} attractors",
        run.seed,
        run.attempts,
        run.latent.analysis.attractors().len()
    );
    Ok(())
}

fn cmd_analyze(cfg: &Config, out: &Out) -> Outcome {
    let model = out.model()?;
    let train = out.dataset("train.csv")?;
    let subset = pipeline::training_subset(cfg, &train)?;
    let latent = pipeline::analyze_latent(&model, &subset, cfg)?;
    let a = &latent.analysis;
    out.write("valid_mask.txt", &a.map.grid().valid_mask_text())?;
    out.write("map_edges.txt", &a.map_edges_text())?;
    out.write("condensation_edges.txt", &a.condensation_edges_text())?;
    out.write("morse_edges.txt", &a.morse_edges_text())?;
    let mut summary = format!("lipschitz_estimate {}\n", latent.lipschitz_estimate);
    summary.push_str(&a.summary(latent.bistable.as_ref().ok()));
    out.write("summary.txt", &summary)?;
    print!("{summary}");
    match &latent.bistable {
        Ok(b) => out.write("cell_labels.csv", &a.labels_csv(b)),
        Err(e) => Err(Failure {
            code: 3,
            message: e.to_string(),
        }),
    }
}

fn cmd_eval(out: &Out) -> Outcome {
    let model = out.model()?;
    let (grid, labels) = out.labeled_grid()?;
    let test = out.dataset("test.csv")?;
    let predict = |x: &[f64]| {
        model
            .encode(x)
            .ok()
            .and_then(|z| grid.locate(&z))
            .is_some_and(|c| labels[c].is_success())
    };
    let m = eval::score(predict, &test);
    out.write("metrics.csv", &metrics_csv(&m))?;
    println!(
        "precision {:.4} recall {:.4} f {:.4} (n = {})",
        m.precision,
        m.recall,
        m.f_score,
        m.total()
    );
    Ok(())
}

fn metrics_csv(m: &Metrics) -> String {
    format!(
        "precision,recall,f_score,actual_success,predicted_success,true_positive,actual_failure,predicted_failure\n{},{},{},{},{},{},{},{}\n",
        m.precision,
        m.recall,
        m.f_score,
        m.actual_success,
        m.predicted_success,
        m.true_positive,
        m.actual_failure,
        m.predicted_failure
    )
}

fn cmd_direct(cfg: &Config, out: &Out) -> Outcome {
    let d = pipeline::analyze_direct(cfg)?;
    let a = &d.analysis;
    out.write("direct_map_edges.txt", &a.map_edges_text())?;
    out.write(
        "direct_condensation_edges.txt",
        &a.condensation_edges_text(),
    )?;
    out.write("direct_morse_edges.txt", &a.morse_edges_text())?;
    let summary = a.summary(d.bistable.as_ref().ok());
    out.write("direct_summary.txt", &summary)?;
    print!("{summary}");
    match &d.bistable {
        Ok(b) => {
            out.write("direct_cell_labels.csv", &a.labels_csv(b))?;
            let grid = a.map.grid();
            if grid.dim() == 2 {
                out.write("direct_roa.svg", &render_roa(grid, &a.cell_labels(b), &[])?)?;
            }
        }
        Err(e) => eprintln!("warning: no labels written: {e}"),
    }
    Ok(())
}

fn cmd_plot(out: &Out) -> Outcome {
    let (grid, labels) = out.labeled_grid()?;
    let mut overlays = Vec::new();
    if let (Ok(model), Ok(test)) = (out.model(), out.dataset("test.csv")) {
        for traj in test.trajectories.iter().take(5) {
            let line: Option<Vec<[f64; 2]>> = traj
                .states
                .iter()
                .map(|x| {
                    model
                        .encode(x)
                        .ok()
                        .filter(|z| z.len() == 2)
                        .map(|z| [z[0], z[1]])
                })
                .collect();
            overlays.extend(line);
        }
    }
    out.write("roa.svg", &render_roa(&grid, &labels, &overlays)?)?;
    println!("wrote {}", out.path("roa.svg").display());
    Ok(())
}

fn cmd_ablate(cfg: &Config, out: &Out, axis: &str) -> Outcome {
    let axes: Vec<AblationAxis> = if axis == "all" {
        AblationAxis::ALL.to_vec()
    } else {
        vec![AblationAxis::parse(axis)
            .ok_or_else(|| Failure::config(format!("unknown ablation axis `{axis}`")))?]
    };
    let (train, test) = if out.path("train.csv").exists() && out.path("test.csv").exists() {
        (out.dataset("train.csv")?, out.dataset("test.csv")?)
    } else {
        pipeline::generate(cfg)?
    };
    let rows: Vec<_> = axes
        .iter()
        .flat_map(|&a| pipeline::ablate(cfg, a, &train, &test))
        .collect();
    out.write("ablation.csv", &report_csv(&rows))?;
    let summary = report_summary(&rows);
    out.write("ablation_summary.txt", &summary)?;
    print!("{summary}");
    Ok(())
}

fn run(cli: &Cli) -> Outcome {
    let cfg = load_config(cli)?;
    fs::create_dir_all(&cli.out_dir)
        .map_err(|e| Failure::from(Error::io(cli.out_dir.display().to_string(), e)))?;
    let out = Out {
        dir: cli.out_dir.clone(),
    };
    out.write("config.txt", &cfg.to_text())?;
    let workers = match cli.workers.unwrap_or(cfg.workers) {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Failure::config(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Gen => cmd_gen(&cfg, &out),
        Command::Train => cmd_train(&cfg, &out),
        Command::Analyze => cmd_analyze(&cfg, &out),
        Command::Eval => cmd_eval(&out),
        Command::Direct => cmd_direct(&cfg, &out),
        Command::Plot => cmd_plot(&out),
        Command::Ablate { axis } => cmd_ablate(&cfg, &out, axis),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
