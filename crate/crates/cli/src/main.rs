use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use metric_sketch::eval::evaluate;
use metric_sketch::io;
use metric_sketch::synth;
use metric_sketch::{
    sketch_input, Epsilon, Error, ErrorClass, Estimator, Exec, JlConfig, Mode, NetKind, Norm,
    SizeReport, Sketch, SketchParams,
};

const EXIT_USAGE: u8 = 1;
const EXIT_FORMAT: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_GUARANTEE: u8 = 4;

#[derive(Parser)]
#[command(
    name = "msk",
    version,
    about = "Compact distance sketches of finite metric spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a sketch from MCPT, MCDM or text input.
    Sketch {
        input: PathBuf,
        #[command(flatten)]
        build: BuildArgs,
        /// Output sketch file.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Estimate distances from a sketch.
    Query {
        sketch: PathBuf,
        /// Two labels, or none with --pairs.
        #[arg(num_args = 0..=2)]
        labels: Vec<String>,
        /// File with one `x y` pair per line.
        #[arg(long, conflicts_with = "labels")]
        pairs: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = QueryMode::Precomputed)]
        mode: QueryMode,
    },
    /// Build a sketch and check every pair against exact distances.
    Eval {
        input: PathBuf,
        #[command(flatten)]
        build: BuildArgs,
        /// Also write the sketch here.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Print only the key=value report.
        #[arg(long)]
        kv: bool,
        /// Single-threaded oracle and queries.
        #[arg(long)]
        sequential: bool,
    },
    /// Write a seeded synthetic input.
    Gen {
        #[arg(value_enum)]
        kind: GenKind,
        #[arg(short, long)]
        n: usize,
        #[arg(short, long, default_value_t = 2)]
        d: usize,
        /// Norm recorded in MCPT output.
        #[arg(short, long, default_value = "2", value_parser = parse_norm)]
        p: Norm,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Spread exponent for high-spread-line.
        #[arg(short, long, default_value_t = 64)]
        t: u32,
        /// Output file; a .txt or .csv extension writes text points.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Describe a sketch file.
    Stats { sketch: PathBuf },
}

#[derive(Args)]
struct BuildArgs {
    #[arg(short, long, default_value_t = 0.25, value_parser = parse_epsilon)]
    epsilon: f64,
    #[arg(long, value_enum, default_value_t = NetArg::Grid)]
    net: NetArg,
    /// Store landmark surrogates for bounded query chains.
    #[arg(long)]
    landmarks: bool,
    /// Skip random projection of Euclidean inputs.
    #[arg(long)]
    no_jl: bool,
    /// Constant C in the projected dimension C·ε⁻²·ln n.
    #[arg(long, default_value_t = 4.0)]
    jl_const: f64,
    #[arg(long)]
    jl_seed: Option<u64>,
    /// Fallback for --jl-seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Norm of text input.
    #[arg(short, long, default_value = "2", value_parser = parse_norm)]
    p: Norm,
}

#[derive(Clone, Copy, ValueEnum)]
enum NetArg {
    Grid,
    Ranked,
}

#[derive(Clone, Copy, ValueEnum)]
enum QueryMode {
    Precomputed,
    Lazy,
    Landmarks,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Uniform,
    GaussianClusters,
    HighSpreadLine,
    RandomGraphMetric,
}

fn parse_epsilon(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    Epsilon::snap(v).map_err(|e| e.to_string())?;
    Ok(v)
}

fn parse_norm(s: &str) -> Result<Norm, String> {
    Norm::parse(s).map_err(|e| e.to_string())
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.class() {
            ErrorClass::Format => EXIT_FORMAT,
            ErrorClass::Data => EXIT_DATA,
            ErrorClass::Internal => EXIT_GUARANTEE,
        };
        Failure {
            code,
            msg: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

fn fail(code: u8, msg: impl Into<String>) -> Failure {
    Failure {
        code,
        msg: msg.into(),
    }
}

impl BuildArgs {
    fn params(&self) -> Result<SketchParams, Failure> {
        let net = match self.net {
            NetArg::Grid => NetKind::UniformGrid,
            NetArg::Ranked => NetKind::RankedBall,
        };
        let jl = (!self.no_jl).then(|| JlConfig {
            constant: self.jl_const,
            seed: self.jl_seed.or(self.seed).unwrap_or(0),
        });
        if !(self.jl_const.is_finite() && self.jl_const > 0.0) {
            return Err(fail(EXIT_USAGE, "--jl-const must be positive"));
        }
        Ok(SketchParams::new(self.epsilon)?
            .with_net(net)
            .with_landmarks(self.landmarks)
            .with_jl(jl))
    }
}

/// `%.{digits}g`-style formatting.
fn significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if exp < -5 || exp >= digits as i32 {
        let s = format!("{:.*e}", digits - 1, x);
        let (mant, e) = s.split_once('e').expect("exponent form");
        format!("{}e{e}", trim_zeros(mant))
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn print_size(size: &SizeReport, n: usize) {
    println!(
        "size: {} bits ({:.2} bits/point, header {} bytes)",
        size.total_bits(),
        size.total_bits() as f64 / n as f64,
        size.header_bytes
    );
    for (name, bits) in size.sections() {
        println!("  {name:<14}{bits:>12}");
    }
}

fn cmd_sketch(input: &Path, build: &BuildArgs, output: &Path) -> Result<(), Failure> {
    let params = build.params()?;
    let data = io::read_input(input, build.p)?;
    let start = Instant::now();
    let built = sketch_input(&data, &params, Exec::default())?;
    let (bytes, size) = built.sketch.serialize()?;
    fs::write(output, &bytes)?;
    let h = &built.sketch.header;
    println!(
        "sketched {} points, d = {}, p = {}, eps = {}, spread = {:.4e} in {:.1} ms",
        h.n,
        h.d,
        h.norm,
        h.epsilon.value(),
        h.spread,
        start.elapsed().as_secs_f64() * 1e3
    );
    if h.jl_source_dim != 0 {
        println!(
            "projected from d = {} (seed {})",
            h.jl_source_dim, h.jl_seed
        );
    }
    print_size(&size, h.n as usize);
    Ok(())
}

fn parse_label(s: &str) -> Result<usize, Failure> {
    s.parse()
        .map_err(|_| fail(EXIT_USAGE, format!("'{s}' is not a point label")))
}

fn read_pairs(path: &Path) -> Result<Vec<(usize, usize)>, Failure> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        let parsed: Option<Vec<usize>> = fields.iter().map(|f| f.parse().ok()).collect();
        match parsed.as_deref() {
            Some(&[x, y]) => out.push((x, y)),
            _ => {
                return Err(fail(
                    EXIT_FORMAT,
                    format!(
                        "{}:{}: expected two labels, got '{line}'",
                        path.display(),
                        i + 1
                    ),
                ))
            }
        }
    }
    Ok(out)
}

fn cmd_query(
    sketch: &Path,
    labels: &[String],
    pairs: Option<&Path>,
    mode: QueryMode,
) -> Result<(), Failure> {
    let pairs = match (pairs, labels) {
        (Some(p), _) => read_pairs(p)?,
        (None, [x, y]) => vec![(parse_label(x)?, parse_label(y)?)],
        _ => return Err(fail(EXIT_USAGE, "give two labels or --pairs FILE")),
    };
    let mode = match mode {
        QueryMode::Precomputed => Mode::Precomputed,
        QueryMode::Lazy => Mode::Lazy,
        QueryMode::Landmarks => Mode::Landmarks,
    };
    let est = Estimator::from_bytes_with(&fs::read(sketch)?, mode)?;
    let n = est.n();
    if let Some(&(x, y)) = pairs.iter().find(|&&(x, y)| x >= n || y >= n) {
        return Err(fail(
            EXIT_DATA,
            format!("unknown label in pair {x} {y} (labels are 0..{})", n - 1),
        ));
    }
    let mut out = String::new();
    for (x, y) in pairs {
        out.push_str(&significant(est.estimate(x, y)?, 12));
        out.push('\n');
    }
    print!("{out}");
    Ok(())
}

fn cmd_eval(
    input: &Path,
    build: &BuildArgs,
    output: Option<&Path>,
    kv: bool,
    sequential: bool,
) -> Result<(), Failure> {
    let params = build.params()?;
    let data = io::read_input(input, build.p)?;
    let exec = if sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    };
    let (report, bytes) = evaluate(&data, &params, exec)?;
    if let Some(path) = output {
        fs::write(path, &bytes)?;
    }
    if kv {
        print!("{}", report.key_values());
    } else {
        println!("{report}\n");
        print!("{}", report.key_values());
    }
    if !report.guarantee_holds() {
        let (x, y) = report.worst_pair;
        return Err(fail(
            EXIT_GUARANTEE,
            format!(
                "relative error {} at pair {x} {y} exceeds 4·eps = {}",
                report.max_rel_error,
                4.0 * report.epsilon
            ),
        ));
    }
    Ok(())
}

fn write_text_points(coords: &[f64], d: usize) -> String {
    let mut out = String::new();
    for row in coords.chunks(d) {
        let line: Vec<String> = row.iter().map(|c| format!("{c:?}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

fn cmd_gen(
    kind: GenKind,
    n: usize,
    d: usize,
    p: Norm,
    seed: u64,
    t: u32,
    output: &Path,
) -> Result<(), Failure> {
    if n < 2 {
        return Err(fail(EXIT_USAGE, "-n must be at least 2"));
    }
    if d == 0 {
        return Err(fail(EXIT_USAGE, "-d must be positive"));
    }
    let text = matches!(
        output.extension().and_then(|e| e.to_str()),
        Some("txt" | "csv")
    );
    let (coords, d) = match kind {
        GenKind::Uniform => (synth::uniform(n, d, seed), d),
        GenKind::GaussianClusters => (synth::gaussian_clusters(n, d, seed), d),
        GenKind::HighSpreadLine => (
            synth::high_spread_line(n, t).map_err(|e| fail(EXIT_USAGE, e.to_string()))?,
            1,
        ),
        GenKind::RandomGraphMetric => {
            if text {
                return Err(fail(EXIT_USAGE, "random-graph-metric writes MCDM only"));
            }
            let dm = synth::random_graph_metric(n, seed)?;
            fs::write(output, io::write_matrix(&dm))?;
            return Ok(());
        }
    };
    let bytes = if text {
        write_text_points(&coords, d).into_bytes()
    } else {
        io::write_points(&coords, d, p)
    };
    fs::write(output, bytes)?;
    Ok(())
}

fn cmd_stats(path: &Path) -> Result<(), Failure> {
    let bytes = fs::read(path)?;
    let sketch = Sketch::from_bytes(&bytes)?;
    let (_, size) = sketch.serialize()?;
    let h = &sketch.header;
    let t = &sketch.tree;
    println!("points        {}", h.n);
    println!("dimension     {}", h.d);
    if h.jl_source_dim != 0 {
        println!(
            "projected     from {} (seed {})",
            h.jl_source_dim, h.jl_seed
        );
    }
    println!("norm          p = {}", h.norm);
    println!(
        "epsilon       {} (2^-{})",
        h.epsilon.value(),
        h.epsilon.log2_inv()
    );
    println!("spread        {:e}", h.spread);
    println!("scale         {:e}", h.scale);
    println!(
        "net           {}",
        match h.net {
            NetKind::UniformGrid => "grid",
            NetKind::RankedBall => "ranked",
        }
    );
    println!("nodes         {}", t.len());
    println!("long edges    {}", t.long_edge_count());
    println!("subtrees      {}", t.subtree_roots().len());
    match &sketch.landmarks {
        Some(table) => println!("landmarks     {}", table.entries.len()),
        None => println!("landmarks     off"),
    }
    print_size(&size, h.n as usize);
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Sketch {
            input,
            build,
            output,
        } => cmd_sketch(&input, &build, &output),
        Command::Query {
            sketch,
            labels,
            pairs,
            mode,
        } => cmd_query(&sketch, &labels, pairs.as_deref(), mode),
        Command::Eval {
            input,
            build,
            output,
            kv,
            sequential,
        } => cmd_eval(&input, &build, output.as_deref(), kv, sequential),
        Command::Gen {
            kind,
            n,
            d,
            p,
            seed,
            t,
            output,
        } => cmd_gen(kind, n, d, p, seed, t, &output),
        Command::Stats { sketch } => cmd_stats(&sketch),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("msk: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
