use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chipguide::io::commands::{
    stepped_range, Axis, BackReflectionParams, ClassifyParams, FieldMapParams, MinimaTraceParams,
    ModesParams, SamplingChoice, SpeciesParams, SplitCurveParams, YBuildParams, YExperimentParams,
};
use chipguide::io::{self, Command, LayoutFile};

#[derive(Parser)]
#[command(
    name = "chipguide",
    version,
    about = "Atom-chip wire guides and Y beam splitters"
)]
struct Cli {
    /// Circuit layout (JSON, μm and gauss).
    #[arg(long, global = true)]
    layout: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Master seed for Monte Carlo ensembles and eigensolver starts.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample B and |B| on a grid.
    FieldMap {
        /// μm, start:end:n
        #[arg(long, value_parser = parse_axis, allow_hyphen_values = true)]
        x: Axis,
        #[arg(long, value_parser = parse_axis, allow_hyphen_values = true)]
        y: Axis,
        #[arg(long, value_parser = parse_axis, allow_hyphen_values = true)]
        z: Axis,
    },
    /// Trace transverse potential minima along x.
    MinimaTrace {
        /// Slice positions, μm, start:end:n
        #[arg(long, value_parser = parse_axis, allow_hyphen_values = true)]
        x: Axis,
        /// Search window, μm, lo:hi
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        y_range: (f64, f64),
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        z_range: (f64, f64),
        /// Seed grid nodes per axis.
        #[arg(long, default_value_t = 81)]
        grid: usize,
        #[command(flatten)]
        species: SpeciesArgs,
    },
    /// Two-wire regime for separation d against d_split.
    Classify {
        #[arg(long)]
        d_um: f64,
        #[arg(long, default_value_t = 0.8)]
        current: f64,
        #[arg(long, default_value_t = 12.0)]
        bias_gauss: f64,
    },
    /// Left/right statistics against the left-arm current fraction.
    SplitCurve {
        #[command(flatten)]
        experiment: ExperimentArgs,
        /// start:end:step
        #[arg(long, value_parser = parse_steps, default_value = "0:1:0.1", allow_hyphen_values = true)]
        fractions: Vec<f64>,
    },
    /// Reflection at the junction for an equal split.
    BackReflection {
        #[command(flatten)]
        experiment: ExperimentArgs,
        /// Spin-flip diagnostic threshold, G.
        #[arg(long, default_value_t = 0.05)]
        spin_flip_threshold_gauss: f64,
        #[arg(long, default_value_t = 50)]
        bins: usize,
    },
    /// Transverse Schrödinger modes of one slice.
    Modes {
        /// μm
        #[arg(long, allow_hyphen_values = true)]
        slice_x: f64,
        /// Nodes per side.
        #[arg(long, default_value_t = 256)]
        grid: usize,
        #[arg(long, default_value_t = 35)]
        n_modes: usize,
        /// The grid spans ±this, μm.
        #[arg(long)]
        y_half_width: f64,
        /// μm, lo:hi
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        z_range: (f64, f64),
        #[command(flatten)]
        species: SpeciesArgs,
    },
    /// Write the layout of a Y splitter.
    YBuild {
        #[arg(long, default_value_t = 0.8)]
        current: f64,
        /// bx,by,bz in G
        #[arg(long, value_parser = parse_vec3, default_value = "0,12,0", allow_hyphen_values = true)]
        bias_gauss: [f64; 3],
        #[arg(long, default_value_t = 0.5)]
        fraction: f64,
        #[arg(long, default_value_t = 10.0)]
        half_angle_deg: f64,
        /// μm; default ten guide heights.
        #[arg(long)]
        input_length: Option<f64>,
        #[arg(long)]
        arm_length: Option<f64>,
    },
    /// Repeat a run from its manifest.json into --out.
    Rerun { manifest: PathBuf },
}

#[derive(Args)]
struct SpeciesArgs {
    /// Default ⁷Li.
    #[arg(long, default_value_t = SpeciesParams::default().mass_amu)]
    mass_amu: f64,
    /// Effective moment, Bohr magnetons.
    #[arg(long, default_value_t = 1.0)]
    moment_bohr: f64,
}

impl SpeciesArgs {
    fn params(&self) -> SpeciesParams {
        SpeciesParams {
            mass_amu: self.mass_amu,
            moment_bohr: self.moment_bohr,
        }
    }
}

#[derive(Args)]
struct ExperimentArgs {
    /// Total current, A.
    #[arg(long, default_value_t = 0.8)]
    current: f64,
    /// In-plane bias across the input wire, G.
    #[arg(long, default_value_t = 8.0)]
    bias_gauss: f64,
    /// Axial bias, G.
    #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
    ioffe_gauss: f64,
    #[arg(long, default_value_t = 10.0)]
    half_angle_deg: f64,
    #[arg(long, default_value_t = 250.0)]
    temp_uk: f64,
    #[arg(long, default_value_t = 10_000)]
    n_atoms: usize,
    /// μm; default three guide heights before the junction.
    #[arg(long, allow_hyphen_values = true)]
    start_x: Option<f64>,
    #[arg(long, value_enum, default_value = "auto")]
    sampling: SamplingArg,
    /// Base time step, s.
    #[arg(long, default_value_t = 1e-7)]
    dt: f64,
    /// Flight time limit, s.
    #[arg(long, default_value_t = 0.05)]
    t_max: f64,
    #[command(flatten)]
    species: SpeciesArgs,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SamplingArg {
    Auto,
    Harmonic,
    Boltzmann,
}

impl ExperimentArgs {
    fn params(&self) -> YExperimentParams {
        YExperimentParams {
            current_a: self.current,
            bias_g: self.bias_gauss,
            ioffe_g: self.ioffe_gauss,
            half_angle_deg: self.half_angle_deg,
            temp_uk: self.temp_uk,
            n_atoms: self.n_atoms,
            start_x_um: self.start_x,
            sampling: match self.sampling {
                SamplingArg::Auto => SamplingChoice::Auto,
                SamplingArg::Harmonic => SamplingChoice::Harmonic,
                SamplingArg::Boltzmann => SamplingChoice::Boltzmann,
            },
            dt: self.dt,
            t_max: self.t_max,
            species: self.species.params(),
        }
    }
}

fn floats(s: &str, sep: char, n: usize) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(sep)
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    if v.len() != n {
        return Err(format!("expected {n} values separated by `{sep}`"));
    }
    Ok(v)
}

fn parse_axis(s: &str) -> Result<Axis, String> {
    let v = floats(s, ':', 3)?;
    if v[2] < 1.0 || v[2].fract() != 0.0 {
        return Err("point count must be a positive integer".into());
    }
    Ok(Axis {
        start: v[0],
        end: v[1],
        n: v[2] as usize,
    })
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let v = floats(s, ':', 2)?;
    Ok((v[0], v[1]))
}

fn parse_steps(s: &str) -> Result<Vec<f64>, String> {
    let v = floats(s, ':', 3)?;
    stepped_range(v[0], v[1], v[2]).map_err(|e| e.to_string())
}

fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    let v = floats(s, ',', 3)?;
    Ok([v[0], v[1], v[2]])
}

fn command(cmd: Cmd) -> Command {
    match cmd {
        Cmd::FieldMap { x, y, z } => Command::FieldMap(FieldMapParams { x, y, z }),
        Cmd::MinimaTrace {
            x,
            y_range,
            z_range,
            grid,
            species,
        } => Command::MinimaTrace(MinimaTraceParams {
            x,
            y_range,
            z_range,
            grid_ny: grid,
            grid_nz: grid,
            species: species.params(),
        }),
        Cmd::Classify {
            d_um,
            current,
            bias_gauss,
        } => Command::Classify(ClassifyParams {
            d_um,
            current_a: current,
            bias_g: bias_gauss,
        }),
        Cmd::SplitCurve {
            experiment,
            fractions,
        } => Command::SplitCurve(SplitCurveParams {
            experiment: experiment.params(),
            fractions,
        }),
        Cmd::BackReflection {
            experiment,
            spin_flip_threshold_gauss,
            bins,
        } => Command::BackReflection(BackReflectionParams {
            experiment: experiment.params(),
            spin_flip_threshold_g: spin_flip_threshold_gauss,
            histogram_bins: bins,
        }),
        Cmd::Modes {
            slice_x,
            grid,
            n_modes,
            y_half_width,
            z_range,
            species,
        } => Command::Modes(ModesParams {
            slice_x_um: slice_x,
            grid,
            n_modes,
            y_half_width_um: y_half_width,
            z_range_um: z_range,
            species: species.params(),
        }),
        Cmd::YBuild {
            current,
            bias_gauss,
            fraction,
            half_angle_deg,
            input_length,
            arm_length,
        } => Command::YBuild(YBuildParams {
            current_a: current,
            bias_g: bias_gauss,
            fraction_left: fraction,
            half_angle_deg,
            input_length_um: input_length,
            arm_length_um: arm_length,
        }),
        Cmd::Rerun { .. } => unreachable!("handled before dispatch"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.out.clone();
    let result = chipguide::with_threads(cli.threads, move || -> chipguide::Result<_> {
        if let Cmd::Rerun { manifest } = &cli.command {
            if cli.layout.is_some() {
                return Err(chipguide::Error::Parameter(
                    "rerun takes its layout from the manifest".into(),
                ));
            }
            return io::rerun(manifest, &cli.out);
        }
        let layout = match &cli.layout {
            Some(p) => Some(LayoutFile::from_json(&io::emit::read_text(p)?)?),
            None => None,
        };
        io::run(&command(cli.command), layout.as_ref(), cli.seed, &cli.out)
    })
    .and_then(|r| r);
    match result {
        Ok(m) => {
            if m.command.name() == "classify" {
                if let Ok(line) = std::fs::read_to_string(out.join("classify.json")) {
                    print!("{line}");
                }
            }
            for f in m.outputs.iter().chain([&io::MANIFEST_FILE.to_string()]) {
                eprintln!("wrote {}", out.join(f).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
