use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use nnapprox::affine::{gamma_star_cartoon, generate_cartoon, CartoonFunction, CartoonParams, ShearletParams, ShearletSystem};
use nnapprox::approx::{
    estimate_rate, learn_pipeline, m_epsilon, m_term_approx, rate_experiment, synthesize, transfer_to_network,
    write_rate_csv, Expansion, LearnOptions, RateOptions, Term,
};
use nnapprox::codec::{self, decode_network, decode_network_with_dim, encode_network, quantize_network, QuantizationSpec};
use nnapprox::network::{nnet, normalize_network};
use nnapprox::train::{
    error_vs_edges_experiment, sgd_train, ExperimentConfig, FixedTopology, TargetKind,
};
use nnapprox::{grid_norms, ActivationKind, Grid, Network, SampledFunction};

use crate::io::{read_bytes, read_text, write_atomic, write_bytes};
use crate::Failure;

const DEFAULT_GRID_N: &str = "256";

#[derive(Debug, Parser)]
#[command(name = "nnapprox", version, about = "Sparse ReLU networks from shearlet approximations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode a quantized `.nnet` network as a `.nnb` bitstream.
    Encode(EncodeArgs),
    /// Decode a `.nnb` bitstream back to `.nnet`.
    Decode(DecodeArgs),
    /// Round weights to the coarsest fixed-point grid meeting a sup-error target.
    Quantize(QuantizeArgs),
    /// Build an α-shearlet system; print diagnostics and optionally list its atoms.
    Shearlets(ShearletsArgs),
    /// Greedy M-term approximation of a cartoon; writes the selected terms.
    Approx(ApproxArgs),
    /// Compile an M-term expansion into a ReLU network.
    Transfer(TransferArgs),
    /// Run Learn(ε, f): approximation, transfer, quantization and encoding.
    Learn(LearnArgs),
    /// M-term and M-edge error against M, with a fitted rate.
    Rate(RateArgs),
    /// Draw a cartoon-like function and write its parameters.
    Cartoon(CartoonArgs),
    /// Train one bump-subnetwork network by SGD.
    Train(TrainArgs),
    /// Error against edge count for trained networks.
    Experiment(ExperimentArgs),
}

fn parse_in<T: std::str::FromStr + PartialOrd + std::fmt::Display>(
    s: &str,
    lo: T,
    hi: T,
    lo_open: bool,
    hi_open: bool,
) -> Result<T, String> {
    let v: T = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    let below = if lo_open { v <= lo } else { v < lo };
    let above = if hi_open { v >= hi } else { v > hi };
    if below || above {
        let l = if lo_open { '(' } else { '[' };
        let h = if hi_open { ')' } else { ']' };
        return Err(format!("{v} is outside {l}{lo}, {hi}{h}"));
    }
    Ok(v)
}

fn positive(s: &str) -> Result<f64, String> {
    parse_in(s, 0.0, f64::MAX, true, false)
}

fn unit_closed(s: &str) -> Result<f64, String> {
    parse_in(s, 0.0, 1.0, false, false)
}

fn below_half(s: &str) -> Result<f64, String> {
    parse_in(s, 0.0, 0.5, true, true)
}

fn beta_range(s: &str) -> Result<f64, String> {
    parse_in(s, 1.0, 2.0, false, false)
}

fn open_unit(s: &str) -> Result<f64, String> {
    parse_in(s, 0.0, 1.0, true, true)
}

fn non_negative(s: &str) -> Result<f64, String> {
    parse_in(s, 0.0, f64::MAX, false, false)
}

fn finite(s: &str) -> Result<f64, String> {
    parse_in(s, -f64::MAX, f64::MAX, false, false)
}

fn grid_points(s: &str) -> Result<usize, String> {
    parse_in(s, 2, 4096, false, false)
}

/// A comma-separated list of positive counts, kept as one flag value.
#[derive(Debug, Clone)]
pub struct Counts(pub Vec<usize>);

fn count_list(s: &str) -> Result<Counts, String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|_| format!("`{p}` is not a count")))
        .collect::<Result<_, _>>()?;
    if v.is_empty() || v.contains(&0) {
        return Err("expected a comma-separated list of positive counts".into());
    }
    Ok(Counts(v))
}

fn activation(s: &str) -> Result<ActivationKind, String> {
    s.parse::<ActivationKind>().map_err(|e| e.to_string())
}

fn target_kind(s: &str) -> Result<TargetKind, String> {
    s.parse::<TargetKind>().map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// Input `.nnet`.
    pub input: PathBuf,
    /// Output `.nnb`.
    pub output: PathBuf,
    /// Fractional bits F.
    #[arg(long = "F", value_parser = clap::value_parser!(u32).range(0..=62))]
    pub f: u32,
    /// Range bits R [default: smallest R covering every weight].
    #[arg(long = "R", value_parser = clap::value_parser!(u32).range(0..=62))]
    pub r: Option<u32>,
    /// Round weights to the 2^-F grid first instead of rejecting off-grid weights.
    #[arg(long)]
    pub round: bool,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// Input `.nnb`.
    pub input: PathBuf,
    /// Output `.nnet` [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Activation of the decoded network.
    #[arg(long, default_value = "relu", value_parser = activation)]
    pub activation: ActivationKind,
    /// Input dimension, required only for edgeless networks.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..=64))]
    pub d: Option<u64>,
}

#[derive(Debug, Args)]
pub struct QuantizeArgs {
    /// Input `.nnet`.
    pub input: PathBuf,
    /// Output `.nnet` with quantized weights.
    pub output: PathBuf,
    /// Sup-error target η.
    #[arg(long, default_value = "1e-3", value_parser = below_half)]
    pub eta: f64,
    /// Points per axis of the check grid.
    #[arg(long = "grid-n", default_value = "101", value_parser = grid_points)]
    pub grid_n: usize,
    /// Lower corner coordinate of the check box.
    #[arg(long, default_value = "0", value_parser = finite, allow_hyphen_values = true)]
    pub lo: f64,
    /// Upper corner coordinate of the check box.
    #[arg(long, default_value = "1", value_parser = finite, allow_hyphen_values = true)]
    pub hi: f64,
    /// Largest F tried.
    #[arg(long = "max-F", default_value = "40", value_parser = clap::value_parser!(u32).range(1..=62))]
    pub max_f: u32,
    /// Range bits R [default: smallest R covering every weight].
    #[arg(long = "R", value_parser = clap::value_parser!(u32).range(0..=62))]
    pub r: Option<u32>,
    /// Also write the encoded `.nnb`.
    #[arg(long)]
    pub nnb: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct SystemArgs {
    /// Anisotropy α.
    #[arg(long, default_value = "0.5", value_parser = unit_closed)]
    pub alpha: f64,
    /// Translation step δ.
    #[arg(long, default_value = "0.25", value_parser = positive)]
    pub delta: f64,
    /// Largest scale ℓ_max.
    #[arg(long, default_value = "4", value_parser = clap::value_parser!(u32).range(0..=12))]
    pub lmax: u32,
    /// Activation of the generator networks.
    #[arg(long, default_value = "relu", value_parser = activation)]
    pub activation: ActivationKind,
}

impl SystemArgs {
    fn params(&self) -> ShearletParams {
        ShearletParams {
            alpha: self.alpha,
            delta: self.delta,
            l_max: self.lmax,
            activation: self.activation,
            ..ShearletParams::default()
        }
    }

    fn build(&self) -> Result<ShearletSystem, Failure> {
        Ok(ShearletSystem::new(self.params())?)
    }
}

#[derive(Debug, Args, Clone)]
pub struct TargetArgs {
    /// Cartoon parameter file; overrides --beta, --nu and --cartoon-seed.
    #[arg(long)]
    pub cartoon: Option<PathBuf>,
    /// Boundary smoothness β.
    #[arg(long, default_value = "2", value_parser = beta_range)]
    pub beta: f64,
    /// Amplitude bound ν.
    #[arg(long, default_value = "1", value_parser = positive)]
    pub nu: f64,
    /// Seed of the cartoon instance.
    #[arg(long = "cartoon-seed", default_value = "7")]
    pub cartoon_seed: u64,
    /// Points per axis of the target grid on [0, 1]².
    #[arg(long = "grid-n", default_value = DEFAULT_GRID_N, value_parser = grid_points)]
    pub grid_n: usize,
}

impl TargetArgs {
    fn cartoon(&self) -> Result<CartoonFunction, Failure> {
        match &self.cartoon {
            Some(p) => Ok(CartoonFunction::from_toml(&read_text(p)?)
                .map_err(|e| Failure::from(e).context(&p.display().to_string()))?),
            None => Ok(generate_cartoon(CartoonParams {
                beta: self.beta,
                nu: self.nu,
                seed: self.cartoon_seed,
            })?),
        }
    }

    fn grid(&self) -> Result<Grid, Failure> {
        Ok(Grid::cube(2, 0.0, 1.0, self.grid_n)?)
    }

    fn samples(&self) -> Result<(CartoonFunction, SampledFunction), Failure> {
        let f = self.cartoon()?;
        let s = f.sample(&self.grid()?)?;
        Ok((f, s))
    }
}

#[derive(Debug, Args)]
pub struct ShearletsArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Write the atom list as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exponent a in the determinant-growth check.
    #[arg(long = "growth-exponent", default_value = "1", value_parser = positive)]
    pub growth_exponent: f64,
}

#[derive(Debug, Args)]
pub struct ApproxArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[command(flatten)]
    pub target: TargetArgs,
    /// Number of terms M.
    #[arg(long = "M", value_parser = clap::value_parser!(u64).range(0..=1_000_000))]
    pub m: u64,
    /// c in the search depth c·M².
    #[arg(long = "depth-factor", default_value = "64", value_parser = clap::value_parser!(u64).range(1..=1_000_000))]
    pub depth_factor: u64,
    /// Keep thresholded coefficients instead of refitting by least squares.
    #[arg(long = "no-refit")]
    pub no_refit: bool,
    /// Output CSV of the selected terms.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Expansion CSV written by `approx`.
    #[arg(long)]
    pub expansion: PathBuf,
    /// Output `.nnet`.
    #[arg(long)]
    pub out: PathBuf,
    /// Points per axis of the grid on [0, 1]² for the exactness check.
    #[arg(long = "grid-n", default_value = DEFAULT_GRID_N, value_parser = grid_points)]
    pub grid_n: usize,
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[command(flatten)]
    pub target: TargetArgs,
    /// Target error ε.
    #[arg(long, value_parser = below_half)]
    pub eps: f64,
    /// Rate γ.
    #[arg(long, default_value = "1", value_parser = positive)]
    pub gamma: f64,
    /// Constant C.
    #[arg(long = "C", default_value = "1", value_parser = positive)]
    pub c: f64,
    /// c in the search depth c·M².
    #[arg(long = "depth-factor", default_value = "64", value_parser = clap::value_parser!(u64).range(1..=1_000_000))]
    pub depth_factor: u64,
    /// Largest F tried by quantization.
    #[arg(long = "max-F", default_value = "40", value_parser = clap::value_parser!(u32).range(1..=62))]
    pub max_f: u32,
    /// Output `.nnb`.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the network as `.nnet`.
    #[arg(long)]
    pub nnet: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[command(flatten)]
    pub target: TargetArgs,
    /// Values of M.
    #[arg(long = "Ms", default_value = "8,16,32,64,128,256,512", value_parser = count_list)]
    pub ms: Counts,
    /// c in the search depth c·M².
    #[arg(long = "depth-factor", default_value = "64", value_parser = clap::value_parser!(u64).range(1..=1_000_000))]
    pub depth_factor: u64,
    /// Keep thresholded coefficients instead of refitting by least squares.
    #[arg(long = "no-refit")]
    pub no_refit: bool,
    /// Skip building, quantizing and encoding networks.
    #[arg(long = "no-networks")]
    pub no_networks: bool,
    /// Largest F tried by quantization.
    #[arg(long = "max-F", default_value = "40", value_parser = clap::value_parser!(u32).range(1..=62))]
    pub max_f: u32,
    /// Output CSV `M,edges,bits,l2_error`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CartoonArgs {
    /// Boundary smoothness β.
    #[arg(long, default_value = "2", value_parser = beta_range)]
    pub beta: f64,
    /// Amplitude bound ν.
    #[arg(long, default_value = "1", value_parser = positive)]
    pub nu: f64,
    /// Seed of the cartoon instance.
    #[arg(long = "cartoon-seed", default_value = "7")]
    pub cartoon_seed: u64,
    /// Output parameter file (TOML).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write samples `x,y,value` on the grid.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// Points per axis of the sample grid on [0, 1]².
    #[arg(long = "grid-n", default_value = DEFAULT_GRID_N, value_parser = grid_points)]
    pub grid_n: usize,
}

/// Training settings; unset flags fall back to the config file, then to the built-in defaults.
#[derive(Debug, Args, Clone, Default)]
pub struct TrainFlags {
    /// Target: line or cartoon [default: line].
    #[arg(long, value_parser = target_kind)]
    pub target: Option<TargetKind>,
    /// Epochs [default: 200].
    #[arg(long, value_parser = clap::value_parser!(u64).range(0..=1_000_000))]
    pub epochs: Option<u64>,
    /// Learning rate, halved every 100 epochs [default: 0.01].
    #[arg(long, value_parser = non_negative)]
    pub lr: Option<f64>,
    /// Minibatch size [default: 64].
    #[arg(long = "batch-size", value_parser = clap::value_parser!(u64).range(1..=1_000_000))]
    pub batch_size: Option<u64>,
    /// Seed of initialization and shuffling [default: 1].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Points per axis of the training grid on [-1, 1]² [default: 64].
    #[arg(long = "train-grid-n", value_parser = grid_points)]
    pub train_grid_n: Option<usize>,
    /// Line target: normal angle in degrees [default: 30].
    #[arg(long = "theta-deg", value_parser = finite, allow_hyphen_values = true)]
    pub theta_deg: Option<f64>,
    /// Line target: offset [default: 0].
    #[arg(long, value_parser = finite, allow_hyphen_values = true)]
    pub offset: Option<f64>,
    /// Cartoon target: boundary smoothness β [default: 2].
    #[arg(long, value_parser = beta_range)]
    pub beta: Option<f64>,
    /// Cartoon target: instance seed [default: 7].
    #[arg(long = "cartoon-seed")]
    pub cartoon_seed: Option<u64>,
}

impl TrainFlags {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(v) = self.target {
            cfg.target = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v as usize;
        }
        if let Some(v) = self.lr {
            cfg.lr = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v as usize;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.train_grid_n {
            cfg.grid_n = v;
        }
        if let Some(v) = self.theta_deg {
            cfg.theta_deg = v;
        }
        if let Some(v) = self.offset {
            cfg.offset = v;
        }
        if let Some(v) = self.beta {
            cfg.beta = v;
        }
        if let Some(v) = self.cartoon_seed {
            cfg.cartoon_seed = v;
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub flags: TrainFlags,
    /// Number of subnetworks.
    #[arg(long = "n-sub", default_value = "16", value_parser = clap::value_parser!(u64).range(1..=100_000))]
    pub n_sub: u64,
    /// Output `.nnet`.
    #[arg(long)]
    pub out: PathBuf,
    /// Write the per-epoch loss as CSV `epoch,loss`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Write the equivalent experiment config (TOML).
    #[arg(long = "config-out")]
    pub config_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Experiment config (TOML); flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub flags: TrainFlags,
    /// Subnetwork counts (line) or M_sub values (cartoon) [default: 4,8,16,32,64].
    #[arg(long, value_parser = count_list)]
    pub sizes: Option<Counts>,
    /// Cartoon target: subnetworks of the large network [default: 512].
    #[arg(long = "n-sub-large", value_parser = clap::value_parser!(u64).range(1..=100_000))]
    pub n_sub_large: Option<u64>,
    /// Number of λ values on the Lasso path [default: 60].
    #[arg(long = "lambda-steps", value_parser = clap::value_parser!(u64).range(1..=10_000))]
    pub lambda_steps: Option<u64>,
    /// Ratio between consecutive λ values [default: 0.85].
    #[arg(long = "lambda-ratio", value_parser = open_unit)]
    pub lambda_ratio: Option<f64>,
    /// Output CSV `edges,l2_error,epochs,seed`.
    #[arg(long)]
    pub out: PathBuf,
    /// Write the network of the last row as `.nnet`.
    #[arg(long)]
    pub net: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Encode(a) => encode(a),
        Command::Decode(a) => decode(a),
        Command::Quantize(a) => quantize(a),
        Command::Shearlets(a) => shearlets(a),
        Command::Approx(a) => approx(a),
        Command::Transfer(a) => transfer(a),
        Command::Learn(a) => learn(a),
        Command::Rate(a) => rate(a),
        Command::Cartoon(a) => cartoon(a),
        Command::Train(a) => train(a),
        Command::Experiment(a) => experiment(a),
    }
}

fn read_network(path: &Path) -> Result<Network, Failure> {
    nnet::parse(&read_text(path)?).map_err(|e| Failure::from(e).context(&path.display().to_string()))
}

fn write_network(path: &Path, net: &Network) -> Result<(), Failure> {
    write_bytes(path, nnet::to_string(net).as_bytes())
}

fn encode(a: EncodeArgs) -> Result<(), Failure> {
    let net = read_network(&a.input)?;
    let r = a.r.unwrap_or_else(|| codec::required_range_bits(&net));
    let spec = QuantizationSpec::new(a.f, r)?;
    let net = if a.round { codec::quantize_weights(&net, spec) } else { net };
    let net = normalize_network(&net);
    let enc = encode_network(&net, spec)?;
    write_bytes(&a.output, &codec::file::to_bytes(&enc))?;
    println!("edges {}", net.connectivity());
    println!("bits {}", enc.payload.len());
    println!("F {} R {}", spec.fractional_bits, spec.range_bits);
    Ok(())
}

fn decode(a: DecodeArgs) -> Result<(), Failure> {
    let enc = codec::file::from_bytes(&read_bytes(&a.input)?).map_err(|e| Failure::from(e).context(&a.input.display().to_string()))?;
    let net = match a.d {
        Some(d) => decode_network_with_dim(&enc, a.activation, d as usize)?,
        None => decode_network(&enc, a.activation)?,
    };
    let text = nnet::to_string(&net);
    match a.out {
        Some(p) => write_bytes(&p, text.as_bytes()),
        None => Ok(std::io::stdout().write_all(text.as_bytes())?),
    }
}

fn quantize(a: QuantizeArgs) -> Result<(), Failure> {
    if a.lo >= a.hi {
        return Err(Failure::usage(format!("--lo {} must be below --hi {}", a.lo, a.hi)));
    }
    let net = normalize_network(&read_network(&a.input)?);
    let r = a.r.unwrap_or_else(|| codec::required_range_bits(&net));
    let grid = Grid::cube(net.input_dim(), a.lo, a.hi, a.grid_n)?;
    let q = quantize_network(&net, a.eta, &grid, a.max_f, r)?;
    let qnet = normalize_network(&q.network);
    write_network(&a.output, &qnet)?;
    if let Some(p) = &a.nnb {
        let enc = encode_network(&qnet, q.spec)?;
        write_bytes(p, &codec::file::to_bytes(&enc))?;
        println!("bits {}", enc.payload.len());
    }
    println!("F {} R {}", q.spec.fractional_bits, q.spec.range_bits);
    println!("sup_error {:e}", q.sup_error);
    Ok(())
}

fn shearlets(a: ShearletsArgs) -> Result<(), Failure> {
    let sys = a.system.build()?;
    let d = sys.diagnostics(a.growth_exponent);
    println!("matrices {}", sys.matrices().len());
    println!("atoms {}", sys.len());
    println!("c_b {}", d.c_b);
    println!("translation_ratio {}", d.translation_ratio);
    println!("growth_exponent {}", d.growth_exponent);
    println!("growth_constant {}", d.growth_constant);
    println!("c_o {}", d.c_o);
    println!("eigenvalue_violations {}", d.eigenvalue_violations.len());
    println!("determinants_nondecreasing {}", d.determinants_nondecreasing);
    if let Some(p) = &a.out {
        write_atomic(p, |w| Ok(sys.write_atoms_csv(w, None)?))?;
    }
    Ok(())
}

const EXPANSION_HEADER: [&str; 9] = ["index", "part", "s", "l", "k", "tau", "b1", "b2", "coefficient"];

fn atom_fields(sys: &ShearletSystem, index: usize) -> [String; 8] {
    let a = &sys.atoms()[index];
    [
        index.to_string(),
        a.part.to_string(),
        a.s.to_string(),
        a.ell.to_string(),
        a.k.to_string(),
        (a.tau as u8).to_string(),
        a.b[0].to_string(),
        a.b[1].to_string(),
    ]
}

fn write_expansion(path: &Path, sys: &ShearletSystem, exp: &Expansion) -> Result<(), Failure> {
    write_atomic(path, |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(EXPANSION_HEADER).map_err(nnapprox::Error::from)?;
        for t in &exp.terms {
            let mut rec = atom_fields(sys, t.index).to_vec();
            rec.push(format!("{:?}", t.coefficient));
            csv.write_record(&rec).map_err(nnapprox::Error::from)?;
        }
        csv.flush()?;
        Ok(())
    })
}

fn read_expansion(path: &Path, sys: &ShearletSystem) -> Result<Expansion, Failure> {
    let ctx = path.display().to_string();
    let bytes = read_bytes(path)?;
    let mut rdr = csv::Reader::from_reader(bytes.as_slice());
    let header = rdr.headers().map_err(|e| Failure::validation(format!("{ctx}: {e}")))?.clone();
    if header.iter().ne(EXPANSION_HEADER) {
        return Err(Failure::validation(format!("{ctx}: expected header {}", EXPANSION_HEADER.join(","))));
    }
    let mut terms = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let line = row + 2;
        let rec = rec.map_err(|e| Failure::validation(format!("{ctx}: {e}")))?;
        let index: usize = rec[0]
            .parse()
            .map_err(|_| Failure::validation(format!("{ctx}:{line}: bad atom index `{}`", &rec[0])))?;
        if index >= sys.len() {
            return Err(Failure::validation(format!(
                "{ctx}:{line}: atom {index} does not exist in a system of {} atoms",
                sys.len()
            )));
        }
        let fields = atom_fields(sys, index);
        if fields.iter().zip(rec.iter()).any(|(a, b)| a != b) {
            return Err(Failure::validation(format!(
                "{ctx}:{line}: atom {index} does not match this system (check --alpha, --delta, --lmax)"
            )));
        }
        let coefficient: f64 = rec[8]
            .parse()
            .map_err(|_| Failure::validation(format!("{ctx}:{line}: bad coefficient `{}`", &rec[8])))?;
        if !coefficient.is_finite() {
            return Err(Failure::validation(format!("{ctx}:{line}: non-finite coefficient")));
        }
        terms.push(Term { index, coefficient });
    }
    let max_coefficient = terms.iter().fold(0.0f64, |m, t| m.max(t.coefficient.abs()));
    Ok(Expansion {
        terms,
        residual: f64::NAN,
        search_depth: 0,
        refit: false,
        refit_fallback: false,
        max_coefficient,
        coefficient_bound: f64::INFINITY,
    })
}

fn depth(factor: u64, m: usize) -> usize {
    (factor as usize).saturating_mul(m.saturating_mul(m)).max(m)
}

fn approx(a: ApproxArgs) -> Result<(), Failure> {
    let sys = a.system.build()?;
    let (_, target) = a.target.samples()?;
    let m = a.m as usize;
    let exp = m_term_approx(&target, &sys, m, depth(a.depth_factor, m), !a.no_refit)?;
    write_expansion(&a.out, &sys, &exp)?;
    println!("M {}", exp.len());
    println!("l2_error {:e}", exp.residual);
    println!("refit_fallback {}", exp.refit_fallback);
    println!("max_coefficient {:e}", exp.max_coefficient);
    Ok(())
}

fn transfer(a: TransferArgs) -> Result<(), Failure> {
    let sys = a.system.build()?;
    let exp = read_expansion(&a.expansion, &sys)?;
    let generator = sys.generator().network(0)?;
    let t = transfer_to_network(&exp, &sys, &generator)?;
    let grid = Grid::cube(2, 0.0, 1.0, a.grid_n)?;
    let gap = grid_norms(&t.network.sample(&grid)?, &synthesize(&exp, &sys, &grid))?.0;
    write_network(&a.out, &t.network)?;
    println!("M {}", t.terms);
    println!("edges {}", t.connectivity());
    println!("edge_bound {}", t.edge_bound());
    println!("per_atom_edges {}", t.per_atom_edges);
    println!("l2_gap {:e}", gap);
    Ok(())
}

fn learn(a: LearnArgs) -> Result<(), Failure> {
    let sys = a.system.build()?;
    let (_, target) = a.target.samples()?;
    let generator = sys.generator().network(0)?;
    let opts = LearnOptions {
        c: a.c,
        gamma: a.gamma,
        depth_factor: a.depth_factor as usize,
        max_fractional_bits: a.max_f,
    };
    let m = m_epsilon(a.c, a.gamma, a.eps)?;
    println!("eps            {:e}", a.eps);
    println!("M_eps          {m}");
    let out = learn_pipeline(&target, a.eps, &sys, &generator, &opts)?;
    write_bytes(&a.out, &codec::file::to_bytes(&out.encoded))?;
    if let Some(p) = &a.nnet {
        write_network(p, &out.network)?;
    }
    // eps and M_eps are already out.
    for line in out.report.to_string().lines().skip(2) {
        println!("{line}");
    }
    Ok(())
}

fn rate(a: RateArgs) -> Result<(), Failure> {
    if a.ms.0.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Failure::usage("--Ms must be strictly increasing"));
    }
    let gamma_star = gamma_star_cartoon(a.target.beta)?;
    let sys = a.system.build()?;
    let (f, target) = a.target.samples()?;
    let generator = sys.generator().network(0)?;
    let opts = RateOptions {
        ms: a.ms.0.clone(),
        depth_factor: a.depth_factor as usize,
        refit: !a.no_refit,
        networks: !a.no_networks,
        max_fractional_bits: a.max_f,
        ..RateOptions::default()
    };
    let rows = rate_experiment(&target, &sys, &generator, &opts)?;
    write_atomic(&a.out, |w| Ok(write_rate_csv(w, &rows)?))?;
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.m as f64, r.l2_error)).collect();
    println!("beta {}", f.beta);
    println!("gamma_star {gamma_star}");
    match estimate_rate(&points) {
        Ok(fit) => {
            println!("gamma_hat {}", fit.gamma());
            println!("r_squared {}", fit.r_squared);
            println!("gamma_hat/gamma_star {}", fit.gamma() / gamma_star);
        }
        Err(e) => println!("gamma_hat unavailable ({e})"),
    }
    if !a.no_networks {
        let worst = rows
            .iter()
            .map(|r| r.network_error / r.l2_error)
            .fold(0.0f64, f64::max);
        println!("max network/m-term error ratio {worst}");
    }
    Ok(())
}

fn cartoon(a: CartoonArgs) -> Result<(), Failure> {
    let f = generate_cartoon(CartoonParams {
        beta: a.beta,
        nu: a.nu,
        seed: a.cartoon_seed,
    })?;
    write_bytes(&a.out, f.to_toml()?.as_bytes())?;
    if let Some(p) = &a.samples {
        let grid = Grid::cube(2, 0.0, 1.0, a.grid_n)?;
        let s = f.sample(&grid)?;
        write_atomic(p, |w| {
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record(["x", "y", "value"]).map_err(nnapprox::Error::from)?;
            for (i, v) in s.values.iter().enumerate() {
                let x = grid.point(i);
                csv.write_record([format!("{:?}", x[0]), format!("{:?}", x[1]), format!("{v:?}")])
                    .map_err(nnapprox::Error::from)?;
            }
            csv.flush()?;
            Ok(())
        })?;
    }
    let (lo, hi) = f.radius_range();
    println!("radius_range {lo} {hi}");
    Ok(())
}

fn train(a: TrainArgs) -> Result<(), Failure> {
    let mut cfg = ExperimentConfig::default();
    a.flags.apply(&mut cfg);
    cfg.sizes = vec![a.n_sub as usize];
    if cfg.target == TargetKind::Cartoon {
        cfg.n_sub_large = cfg.n_sub_large.max(a.n_sub as usize);
    }
    cfg.validate()?;
    let target = cfg.target_samples()?;
    let init = FixedTopology::random(a.n_sub as usize, cfg.seed)?;
    let (trained, trace) = sgd_train(&init, &target, &cfg.train_config())?;
    let net = normalize_network(&trained.to_network()?);
    write_network(&a.out, &net)?;
    if let Some(p) = &a.trace {
        write_atomic(p, |w| {
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record(["epoch", "loss"]).map_err(nnapprox::Error::from)?;
            for (e, l) in trace.epoch_loss.iter().enumerate() {
                csv.write_record([(e + 1).to_string(), format!("{l:e}")]).map_err(nnapprox::Error::from)?;
            }
            csv.flush()?;
            Ok(())
        })?;
    }
    if let Some(p) = &a.config_out {
        write_bytes(p, cfg.to_toml()?.as_bytes())?;
    }
    println!("edges {}", net.connectivity());
    if let (Some(first), Some(last)) = (trace.epoch_loss.first(), trace.epoch_loss.last()) {
        println!("loss_first {first:e}");
        println!("loss_last {last:e}");
    }
    println!("l2_error {:e}", trace.final_l2_error);
    Ok(())
}

fn experiment(a: ExperimentArgs) -> Result<(), Failure> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::from_toml(&read_text(p)?).map_err(|e| Failure::from(e).context(&p.display().to_string()))?,
        None => ExperimentConfig::default(),
    };
    a.flags.apply(&mut cfg);
    if let Some(v) = &a.sizes {
        cfg.sizes = v.0.clone();
    }
    if let Some(v) = a.n_sub_large {
        cfg.n_sub_large = v as usize;
    }
    if let Some(v) = a.lambda_steps {
        cfg.lambda_steps = v as usize;
    }
    if let Some(v) = a.lambda_ratio {
        cfg.lambda_ratio = v;
    }
    cfg.validate()?;
    let out = error_vs_edges_experiment(&cfg)?;
    write_atomic(&a.out, |w| Ok(out.write_csv(w)?))?;
    if let Some(p) = &a.net {
        write_network(p, &out.network)?;
    }
    for r in &out.rows {
        println!("size {} edges {} l2_error {:e}", r.size, r.edges, r.l2_error);
    }
    Ok(())
}
