use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod suites;

/// Exit status for a finished run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass = 0,
    Violation = 1,
    Usage = 2,
    Inconclusive = 3,
}

/// A usage or input problem; always exit 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl<E: std::fmt::Display> From<E> for UsageError {
    fn from(e: E) -> Self {
        UsageError(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "vcore", version, about = "Limit sets, visual measures and hull checks for Kleinian groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Group file, or the name of a shipped fixture.
    #[arg(long)]
    pub config: Option<String>,
    /// Cube-sphere resolution (cells per face edge).
    #[arg(long, default_value_t = 32)]
    pub res: usize,
    /// Word depth: coset truncation for verification, orbit depth for
    /// `limitset`.
    #[arg(long)]
    pub depth: Option<usize>,
    /// Word depth used to sample limit sets for charts.
    #[arg(long, default_value_t = 6)]
    pub limit_depth: usize,
    /// Marking radius around limit samples, radians.
    #[arg(long)]
    pub dilation: Option<f64>,
    #[arg(long, default_value_t = visual_core::cores::DEFAULT_TAU)]
    pub tau: f64,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path; extensions are replaced per emitted file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Kernel,
    Rays,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlaneArg {
    Equatorial,
    Vertical,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Cores,
    Emptiness,
    Embedding,
    Combination,
    All,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample the limit set: CSV of unit vectors and an orthographic PPM.
    Limitset {
        #[command(flatten)]
        common: Common,
        /// Viewing direction of the render.
        #[arg(long, default_value = "0,0,1")]
        view: String,
        #[arg(long, default_value_t = 256)]
        pixels: usize,
    },
    /// Label the components of the domain of discontinuity.
    Components {
        #[command(flatten)]
        common: Common,
        /// Height of the equirectangular render.
        #[arg(long, default_value_t = 128)]
        pixels: usize,
    },
    /// Visual measure of a set of components seen from a ball point.
    Hmeasure {
        #[command(flatten)]
        common: Common,
        /// Ball point `x,y,z` with norm below one.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        /// `whole` (entire sphere), `all` (every component), labels `0,2`,
        /// or `cap:x,y,z,angle` (cells centered in a round cap).
        #[arg(long, default_value = "all", allow_hyphen_values = true)]
        component: String,
        #[arg(long, value_enum, default_value_t = MethodArg::Kernel)]
        method: MethodArg,
    },
    /// Classify a planar slice of the ball against both hulls.
    Slice {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = PlaneArg::Equatorial)]
        plane: PlaneArg,
        /// Plane base point for `--plane custom`.
        #[arg(long, allow_hyphen_values = true)]
        base: Option<String>,
        /// First in-plane unit direction for `--plane custom`.
        #[arg(long, allow_hyphen_values = true)]
        e1: Option<String>,
        /// Second in-plane unit direction for `--plane custom`.
        #[arg(long, allow_hyphen_values = true)]
        e2: Option<String>,
        /// Half width of the square window in plane coordinates.
        #[arg(long, default_value_t = 1.0)]
        window: f64,
        #[arg(long, default_value_t = 64)]
        pixels: usize,
        #[arg(long, default_value = "all")]
        component: String,
    },
    /// Run verification suites; without `--config`, on the shipped fixtures.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Limitset { common, view, pixels } => commands::limitset(&common, &view, pixels),
        Command::Components { common, pixels } => commands::components(&common, pixels),
        Command::Hmeasure {
            common,
            point,
            component,
            method,
        } => commands::hmeasure(&common, &point, &component, method),
        Command::Slice {
            common,
            plane,
            base,
            e1,
            e2,
            window,
            pixels,
            component,
        } => commands::slice(&common, plane, [base, e1, e2], window, pixels, &component),
        Command::Verify { suite, common } => suites::verify(suite, &common),
    };
    match result {
        Ok(status) => ExitCode::from(status as u8),
        Err(UsageError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(Status::Usage as u8)
        }
    }
}
