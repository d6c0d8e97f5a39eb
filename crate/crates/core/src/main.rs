use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fasris::cli::{emit, run_sweep, show_blockfit, ConfigFile, OutputFormat, Sweep};
use fasris::outage::EstimatorKind;
use fasris::{Error, ThresholdRule};

#[derive(Parser, Debug)]
#[command(
    name = "fasris",
    version,
    about = "Outage probability of a RIS link with a fluid-antenna receiver"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// JSON experiment file; flags below override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo trials per sweep point.
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Comma-separated subset of CLT, CLT_BC, CLT_IID, MONTE_CARLO.
    #[arg(long, global = true, value_delimiter = ',')]
    estimators: Option<Vec<EstimatorKind>>,
    /// RIS elements.
    #[arg(short = 'M', long, global = true)]
    elements: Option<usize>,
    /// Fluid-antenna ports.
    #[arg(short = 'N', long, global = true)]
    ports: Option<usize>,
    /// Antenna size in wavelengths.
    #[arg(short = 'W', long, global = true)]
    size: Option<f64>,
    /// Target rate in bit/s/Hz.
    #[arg(long, global = true)]
    rate: Option<f64>,
    #[arg(long, global = true)]
    transmit_power: Option<f64>,
    #[arg(long, global = true)]
    noise_power: Option<f64>,
    #[arg(long, global = true)]
    mu: Option<f64>,
    /// Gauss-Chebyshev nodes per dimension.
    #[arg(long, global = true)]
    nodes: Option<usize>,
    #[arg(long, global = true)]
    eigen_threshold: Option<f64>,
    #[arg(long, global = true, value_enum)]
    threshold: Option<ThresholdArg>,
    /// Largest port count handed to the full multivariate CDF.
    #[arg(long, global = true)]
    mvn_cap: Option<usize>,
    /// Write 0 in the wall_time_ms column so reruns are byte-identical.
    #[arg(long, global = true)]
    no_timing: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ThresholdArg {
    Rate,
    MeanGain,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the sweep described in the config file.
    Run,
    /// Evaluate one parameter point.
    Point,
    /// Sweep the number of ports.
    SweepPorts {
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "5,10,15,20,25,30,35,40,45,50"
        )]
        values: Vec<usize>,
    },
    /// Sweep the antenna size.
    SweepSize {
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        values: Vec<f64>,
    },
    /// Sweep the number of RIS elements.
    SweepElements {
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "20,40,60,80,100,120,140,160,180,200"
        )]
        values: Vec<usize>,
    },
    /// Print the fitted block structure for the configured geometry.
    Blockfit {
        /// Emit the report as JSON.
        #[arg(long)]
        json: bool,
    },
}

fn apply_overrides(file: &mut ConfigFile, g: &GlobalArgs) {
    let d = &mut file.defaults;
    if let Some(v) = g.elements {
        d.elements = v;
    }
    if let Some(v) = g.ports {
        d.ports = v;
    }
    if let Some(v) = g.size {
        d.size = v;
    }
    if let Some(v) = g.rate {
        d.target_rate = v;
    }
    if let Some(v) = g.transmit_power {
        d.transmit_power = v;
    }
    if let Some(v) = g.noise_power {
        d.noise_power = v;
    }
    if let Some(v) = g.mu {
        d.mu = v;
    }
    if let Some(v) = g.nodes {
        d.chebyshev_nodes = v;
    }
    if let Some(v) = g.eigen_threshold {
        d.eigen_threshold = v;
        d.mass_fraction = None;
    }
    if let Some(v) = g.seed {
        file.simulation.seed = v;
    }
    if let Some(v) = g.trials {
        file.simulation.trials = v;
    }
    if let Some(v) = &g.estimators {
        file.estimators = v.clone();
    }
    if let Some(v) = g.threshold {
        file.threshold = match v {
            ThresholdArg::Rate => ThresholdRule::Rate,
            ThresholdArg::MeanGain => ThresholdRule::MeanGain,
        };
    }
    if let Some(v) = g.mvn_cap {
        file.mvn.dimension_cap = v;
    }
    if g.no_timing {
        file.record_timing = false;
    }
    if let Some(v) = &g.out {
        file.output = Some(v.clone());
    }
    if let Some(v) = g.format {
        file.format = match v {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Jsonl => OutputFormat::JsonLines,
        };
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut file = match &cli.global.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    apply_overrides(&mut file, &cli.global);
    match cli.command {
        Command::Run => {}
        Command::Point => file.sweep = Sweep::Point,
        Command::SweepPorts { values } => file.sweep = Sweep::Ports(values),
        Command::SweepSize { values } => file.sweep = Sweep::Size(values),
        Command::SweepElements { values } => file.sweep = Sweep::Elements(values),
        Command::Blockfit { json } => {
            let config = file.resolve()?;
            let report = show_blockfit(&config.system.geometry, &config.settings)?;
            if json {
                println!(
                    "{}",
                    serde_json::to_string(&report).expect("report serializes")
                );
            } else {
                println!("{report}");
            }
            return Ok(());
        }
    }
    let config = file.resolve()?;
    let rows = run_sweep(&config)?;
    emit(&rows, config.format, config.output.as_deref())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // Downstream reader closed early, e.g. `| head`.
        Err(Error::Io { source, .. }) if source.kind() == std::io::ErrorKind::BrokenPipe => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
