use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use spkmix::config::{InferMarker, RunConfig, SigmaSetting};
use spkmix::diagnostics::{
    agglomerate, coclustering, density_grid, drop_singletons, ess, CoClusterMatrix, HeldOutSetup,
};
use spkmix::io::{load_csv, pca_project, ColumnSelector, CsvOptions, Dataset};
use spkmix::partitions::{enumerate_partitions, log_eppf, sample_prior_partition};
use spkmix::sampler::{chain_rng, run_chains, ChainTrace};
use spkmix::trace::{write_trace, TraceHeader, TRACE_FORMAT};
use spkmix::{Error, LikelihoodModel, QuadratureConfig, StableIndex, TiltingFunction};

#[derive(Parser)]
#[command(name = "spkmix", version, about = "Mixture models with sigma-stable Poisson-Kingman priors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run MCMC chains and write traces and summaries.
    Fit(FitArgs),
    /// Held-out predictive densities (leave-one-out or k-fold).
    Predict(PredictArgs),
    /// Average-linkage clustering of a co-clustering matrix.
    Dendro(DendroArgs),
    /// Evaluate or enumerate partition probabilities for small n.
    Eppf(EppfArgs),
    /// Draw partitions from the prior urn.
    PriorSim(PriorSimArgs),
}

#[derive(Args)]
struct DataArgs {
    /// CSV file, one observation per row.
    #[arg(long)]
    data: PathBuf,
    /// Columns to use (0-based index or header name); repeatable.
    #[arg(long = "column")]
    columns: Vec<String>,
    /// The file has no header line.
    #[arg(long)]
    no_header: bool,
    #[arg(long, default_value = ",")]
    delimiter: char,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Output directory; nothing is written outside it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    chains: Option<usize>,
    /// Fixed stable index or "infer".
    #[arg(long)]
    sigma: Option<String>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    seed: u64,
    /// Points in the density grid (univariate data only; 0 disables it).
    #[arg(long, default_value_t = 200)]
    grid_points: usize,
    /// Grid padding on each side, as a fraction of the data range.
    #[arg(long, default_value_t = 0.5)]
    grid_pad: f64,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, conflicts_with = "kfold")]
    loo: bool,
    #[arg(long)]
    kfold: Option<usize>,
}

#[derive(Args)]
struct DendroArgs {
    /// Co-clustering matrix as dense CSV without header.
    #[arg(long)]
    coclustering: PathBuf,
    /// Number of clusters at which to cut the tree.
    #[arg(long)]
    k: usize,
    /// Report size-one clusters as unassigned.
    #[arg(long)]
    drop_singletons: bool,
    /// Output directory (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TiltKind {
    Ns,
    Ngg,
    Py,
    Gt,
}

#[derive(Args)]
struct TiltArgs {
    #[arg(long)]
    sigma: f64,
    #[arg(long, value_enum)]
    tilt: TiltKind,
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
}

impl TiltArgs {
    fn tilt(&self) -> TiltingFunction {
        match self.tilt {
            TiltKind::Ns => TiltingFunction::Ns,
            TiltKind::Ngg => TiltingFunction::Ngg { tau: self.tau },
            TiltKind::Py => TiltingFunction::Py { theta: self.theta },
            TiltKind::Gt => TiltingFunction::Gt { theta: self.theta, eta: self.eta },
        }
    }

    fn sigma(&self) -> spkmix::Result<StableIndex> {
        StableIndex::new(self.sigma)
    }
}

#[derive(Args)]
struct EppfArgs {
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    tilt: TiltArgs,
    /// Print only the total probability over all partitions of [n].
    #[arg(long)]
    check_normalization: bool,
    /// One partition as blocks of 1-based elements, e.g. "1,3|2".
    #[arg(long)]
    blocks: Option<String>,
}

#[derive(Args)]
struct PriorSimArgs {
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    tilt: TiltArgs,
    #[arg(long, default_value_t = 10_000)]
    draws: usize,
    #[arg(long)]
    seed: u64,
}

/// Failure classes with their exit codes.
enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Fit(a) => fit(&a),
        Command::Predict(a) => predict(&a),
        Command::Dendro(a) => dendro(&a),
        Command::Eppf(a) => eppf(&a),
        Command::PriorSim(a) => prior_sim(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn load_data(a: &DataArgs, pca: Option<usize>) -> CliResult<Dataset> {
    if !a.delimiter.is_ascii() {
        return Err(Failure::Usage("the delimiter must be an ASCII character".into()));
    }
    let opts = CsvOptions {
        delimiter: a.delimiter as u8,
        has_header: !a.no_header,
        columns: (!a.columns.is_empty())
            .then(|| a.columns.iter().map(|c| c.parse::<ColumnSelector>().unwrap()).collect()),
    };
    let data = load_csv(&a.data, &opts)?;
    Ok(match pca {
        Some(k) => pca_project(&data, k)?,
        None => data,
    })
}

struct Prepared {
    cfg: RunConfig,
    data: Dataset,
    model: LikelihoodModel,
    sigma: StableIndex,
}

fn prepare(a: &RunArgs, seed: Option<u64>) -> CliResult<Prepared> {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(v) = a.iterations {
        cfg.iterations = v;
    }
    if let Some(v) = a.burn_in {
        cfg.burn_in = v;
    }
    if let Some(v) = a.thin {
        cfg.thin = v;
    }
    if let Some(v) = a.chains {
        cfg.chains = v;
    }
    if let Some(s) = &a.sigma {
        cfg.sigma = if s == "infer" {
            SigmaSetting::Infer(InferMarker::Infer)
        } else {
            SigmaSetting::Fixed(
                s.parse().map_err(|_| Failure::Usage(format!("--sigma expects a number or \"infer\", got {s}")))?,
            )
        };
    }
    if seed.is_some() {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let data = load_data(&a.data, cfg.pca_components)?;
    let model = cfg.model.resolve(&data)?;
    let sigma = cfg.initial_sigma()?;
    fs::create_dir_all(&a.out)?;
    Ok(Prepared { cfg, data, model, sigma })
}

fn header(p: &Prepared, chain: usize, seed: u64) -> TraceHeader {
    TraceHeader {
        format: TRACE_FORMAT.into(),
        chain,
        seed,
        n: p.data.n(),
        d: p.data.d(),
        data: p.data.provenance.clone(),
        config: p.cfg.clone(),
        model: p.model.clone(),
        iterations: p.cfg.iterations,
        burn_in: p.cfg.burn_in,
        thin: p.cfg.thin,
    }
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn fit(a: &FitArgs) -> CliResult<()> {
    let p = prepare(&a.run, Some(a.seed))?;
    let out = &a.run.out;
    let scfg = p.cfg.sampler_config(a.seed)?;
    let results = run_chains(&p.data.rows, &p.model, p.cfg.tilt, p.sigma, &scfg, p.cfg.chains);
    let mut traces: Vec<ChainTrace> = Vec::new();
    let mut failure = None;
    for (c, r) in results.into_iter().enumerate() {
        match r {
            Ok(t) => {
                write_trace(create(&out.join(format!("trace_chain{c}.ndjson")))?, &header(&p, c, a.seed), &t)?;
                traces.push(t);
            }
            Err(f) => {
                write_trace(
                    create(&out.join(format!("trace_chain{c}.partial.ndjson")))?,
                    &header(&p, c, a.seed),
                    &f.partial,
                )?;
                failure.get_or_insert(f);
            }
        }
    }
    if let Some(f) = failure {
        let msg = f.to_string();
        return Err(if f.error.is_numerical() { Failure::Numerical(msg) } else { Failure::Usage(msg) });
    }

    let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
    let mut total = 0usize;
    for t in &traces {
        for r in &t.records {
            *hist.entry(r.k).or_default() += 1;
            total += 1;
        }
    }
    let mut w = create(&out.join("k_posterior.tsv"))?;
    writeln!(w, "k\tcount\tprobability")?;
    for (k, c) in &hist {
        writeln!(w, "{k}\t{c}\t{:.6}", *c as f64 / total as f64)?;
    }
    w.flush()?;

    let mut s = create(&out.join("summary.tsv"))?;
    writeln!(s, "metric\tvalue")?;
    writeln!(s, "n\t{}", p.data.n())?;
    writeln!(s, "d\t{}", p.data.d())?;
    writeln!(s, "chains\t{}", traces.len())?;
    writeln!(s, "records\t{total}")?;
    let mean_k = hist.iter().map(|(k, c)| (*k * *c) as f64).sum::<f64>() / total as f64;
    writeln!(s, "mean_k\t{mean_k:.6}")?;
    if let Some((k, _)) = hist.iter().max_by_key(|(k, c)| (**c, std::cmp::Reverse(**k))) {
        writeln!(s, "mode_k\t{k}")?;
    }
    for (c, t) in traces.iter().enumerate() {
        match ess(&t.k_trace()) {
            Ok(e) => writeln!(s, "ess_k_chain{c}\t{e:.2}")?,
            Err(_) => writeln!(s, "ess_k_chain{c}\tNA")?,
        }
        if matches!(p.cfg.sigma, SigmaSetting::Infer(_)) {
            let sig: Vec<f64> = t.records.iter().map(|r| r.aux.sigma.get()).collect();
            writeln!(s, "mean_sigma_chain{c}\t{:.6}", sig.iter().sum::<f64>() / sig.len() as f64)?;
        }
    }
    s.flush()?;

    let recs: Vec<&[usize]> = traces.iter().flat_map(|t| t.records.iter().map(|r| r.assignments.as_slice())).collect();
    write_matrix(&out.join("coclustering.csv"), &coclustering(&recs)?)?;

    if p.data.d() == 1 && a.grid_points > 0 {
        let xs = p.data.column(0);
        let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
        let pad = a.grid_pad * (hi - lo).max(1e-12);
        let m = a.grid_points.max(2);
        let grid: Vec<f64> = (0..m).map(|i| lo - pad + (hi - lo + 2.0 * pad) * i as f64 / (m - 1) as f64).collect();
        let merged = ChainTrace {
            iterations: p.cfg.iterations,
            burn_in: p.cfg.burn_in,
            thin: p.cfg.thin,
            records: traces.iter().flat_map(|t| t.records.iter().cloned()).collect(),
        };
        let dens = density_grid(&merged, &p.model, &p.cfg.tilt, &grid, &p.cfg.quadrature)?;
        let mut g = create(&out.join("density.tsv"))?;
        writeln!(g, "x\tdensity")?;
        for (x, d) in grid.iter().zip(dens) {
            writeln!(g, "{x}\t{d}")?;
        }
        g.flush()?;
    }
    println!("wrote {} chain(s), {total} records, mean K {mean_k:.3} to {}", traces.len(), out.display());
    Ok(())
}

fn write_matrix(path: &Path, m: &CoClusterMatrix) -> CliResult<()> {
    let mut w = create(path)?;
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn predict(a: &PredictArgs) -> CliResult<()> {
    let p = prepare(&a.run, a.seed)?;
    let seed = p.cfg.seed.ok_or_else(|| Failure::Usage("a seed is required (config or --seed)".into()))?;
    let scfg = p.cfg.sampler_config(seed)?;
    let setup = HeldOutSetup { data: &p.data.rows, model: &p.model, tilt: p.cfg.tilt, sigma: p.sigma, cfg: &scfg };
    let report = match (a.loo, a.kfold) {
        (true, _) => setup.loo()?,
        (false, Some(k)) => setup.kfold(k, seed)?,
        (false, None) => return Err(Failure::Usage("choose --loo or --kfold K".into())),
    };
    let mut w = create(&a.run.out.join("predictive.tsv"))?;
    writeln!(w, "index\tfold\tdensity")?;
    for (f, fold) in report.folds.iter().enumerate() {
        for &i in fold {
            writeln!(w, "{i}\t{f}\t{}", report.per_point[i])?;
        }
    }
    w.flush()?;
    println!("mean {:.6e} (sd {:.6e}) over {} fold(s)", report.mean, report.std, report.folds.len());
    Ok(())
}

fn read_matrix(path: &Path) -> CliResult<CoClusterMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Failure::Usage(format!("{} line {}: {e}", path.display(), i + 1)))?;
        rows.push(row);
    }
    Ok(CoClusterMatrix::from_rows(&rows)?)
}

fn dendro(a: &DendroArgs) -> CliResult<()> {
    let m = read_matrix(&a.coclustering)?;
    let d = agglomerate(&m, a.k)?;
    let mut text = String::from("# merges: a\tb\theight\tsize\n");
    for mg in &d.merges {
        text.push_str(&format!("{}\t{}\t{}\t{}\n", mg.a, mg.b, mg.height, mg.size));
    }
    text.push_str("# labels: index\tcluster\n");
    let labels: Vec<String> = if a.drop_singletons {
        drop_singletons(&d.labels).iter().map(|l| l.map_or("NA".into(), |v| v.to_string())).collect()
    } else {
        d.labels.iter().map(usize::to_string).collect()
    };
    for (i, l) in labels.iter().enumerate() {
        text.push_str(&format!("{i}\t{l}\n"));
    }
    match &a.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("dendrogram.tsv"), text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn parse_blocks(s: &str, n: usize) -> CliResult<spkmix::Partition> {
    let blocks = s
        .split('|')
        .map(|b| {
            b.split(',')
                .map(|e| match e.trim().parse::<usize>() {
                    Ok(v) if v >= 1 && v <= n => Ok(v - 1),
                    _ => Err(Failure::Usage(format!("bad element '{e}' in --blocks (elements are 1..={n})"))),
                })
                .collect::<CliResult<Vec<_>>>()
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(spkmix::Partition::from_blocks(&blocks)?)
}

fn eppf(a: &EppfArgs) -> CliResult<()> {
    let sigma = a.tilt.sigma()?;
    let tilt = a.tilt.tilt();
    let cfg = QuadratureConfig::default();
    if let Some(b) = &a.blocks {
        let p = parse_blocks(b, a.n)?;
        let l = log_eppf(&p, sigma, &tilt, &cfg)?;
        println!("{p}\t{l}\t{}", l.exp());
        return Ok(());
    }
    let parts = enumerate_partitions(a.n)?;
    let mut sum = 0.0;
    let mut lines = Vec::with_capacity(parts.len());
    for p in &parts {
        let l = log_eppf(p, sigma, &tilt, &cfg)?;
        sum += l.exp();
        lines.push(format!("{p}\t{l}\t{}", l.exp()));
    }
    if !a.check_normalization {
        println!("partition\tlog_eppf\teppf");
        for l in lines {
            println!("{l}");
        }
    }
    println!("Σ = {sum:.6}");
    Ok(())
}

fn prior_sim(a: &PriorSimArgs) -> CliResult<()> {
    let sigma = a.tilt.sigma()?;
    let tilt = a.tilt.tilt();
    let cfg = QuadratureConfig::default();
    let mut rng = chain_rng(a.seed, 0);
    let mut counts: BTreeMap<String, (usize, spkmix::Partition)> = BTreeMap::new();
    for _ in 0..a.draws {
        let p = sample_prior_partition(a.n, sigma, &tilt, &mut rng, &cfg)?;
        counts.entry(p.to_string()).or_insert((0, p)).0 += 1;
    }
    let mut rows: Vec<_> = counts.into_values().collect();
    rows.sort_by(|x, y| y.0.cmp(&x.0).then_with(|| x.1.to_string().cmp(&y.1.to_string())));
    println!("partition\tcount\tfrequency\teppf");
    for (c, p) in rows {
        let exact = log_eppf(&p, sigma, &tilt, &cfg)?.exp();
        println!("{p}\t{c}\t{:.6}\t{exact:.6}", c as f64 / a.draws as f64);
    }
    Ok(())
}
