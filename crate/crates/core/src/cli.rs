//! Command-line front end.
//!
//! Every command reads the JSON config, writes its data files into the
//! output directory together with `run_config.json` (the resolved
//! configuration) and `run.log`. Only `run.log` carries a timestamp, so
//! reruns with the same config and seed reproduce every other file byte for
//! byte.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::Config;
use crate::dct::{Reconstructor, SpatialField};
use crate::design::{build_training_inputs, coarse_center, deck_to_table, read_deck, DeckRow};
use crate::emulator::{predict, predict_with_noise, BmarsState, TrainingSet};
use crate::error::{Error, Result};
use crate::forward::{outputs_to_table, read_outputs, simulate_dataset};
use crate::posterior::{CoarseData, FineObs, ObservationSet};
use crate::sampler::{run_chains, ChainInit, PosteriorStore};
use crate::snapshot::ModelSnapshot;
use crate::stats::{mean, quantile_sorted, variance};
use crate::table::{numbered, write_text, Table};
use crate::upscale::CoarseGeometry;

#[derive(Debug, Parser)]
#[command(
    name = "dctmars",
    version,
    about = "DCT field calibration with Bayesian MARS emulators"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON configuration file; omitted sections take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Overrides the config's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Build the simulator input deck from coarse data.
    Design,
    /// Run the forward model over the deck.
    Simulate,
    /// Fit the emulator to simulator outputs.
    Fit,
    /// Score a fitted emulator on held-out samples.
    Validate,
    /// Sample the field coefficients given observed data.
    Calibrate,
    /// Summarize the draws in a snapshot.
    Summarize,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Design => "design",
            Command::Simulate => "simulate",
            Command::Fit => "fit",
            Command::Validate => "validate",
            Command::Calibrate => "calibrate",
            Command::Summarize => "summarize",
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

struct Ctx {
    cfg: Config,
    out: PathBuf,
    log: String,
}

impl Ctx {
    fn out(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn input(&self, given: &Option<PathBuf>, default_name: &str) -> PathBuf {
        given.clone().unwrap_or_else(|| self.out(default_name))
    }

    fn required(&self, given: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
        given
            .clone()
            .ok_or_else(|| Error::InvalidConfig(format!("files.{key} must be set for this command")))
    }

    fn note(&mut self, line: impl AsRef<str>) {
        self.log.push_str(line.as_ref());
        self.log.push('\n');
    }

    fn write_table(&mut self, name: &str, t: &Table) -> Result<()> {
        t.write(&self.out(name))?;
        self.note(format!("wrote {name} ({} rows)", t.rows.len()));
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        write_text(&self.out(name), &(serde_json::to_string_pretty(value)? + "\n"))?;
        self.note(format!("wrote {name}"));
        Ok(())
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let mut c = Config::load(path)?;
            c.resolve_paths(path.parent().unwrap_or(Path::new(".")));
            c
        }
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    std::fs::create_dir_all(&cli.out).map_err(|e| Error::io(&cli.out, e))?;
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let mut ctx = Ctx {
        cfg,
        out: cli.out.clone(),
        log: format!("# dctmars {} started at unix time {started}\n", cli.command.name()),
    };
    ctx.note(format!("seed {}", ctx.cfg.seed));
    let echo = ctx.cfg.to_json()?;
    write_text(&ctx.out("run_config.json"), &echo)?;
    let result = match cli.command {
        Command::Design => cmd_design(&mut ctx),
        Command::Simulate => cmd_simulate(&mut ctx),
        Command::Fit => cmd_fit(&mut ctx),
        Command::Validate => cmd_validate(&mut ctx),
        Command::Calibrate => cmd_calibrate(&mut ctx),
        Command::Summarize => cmd_summarize(&mut ctx),
    };
    if let Err(e) = &result {
        ctx.note(format!("error: {e}"));
    }
    write_text(&ctx.out("run.log"), &ctx.log)?;
    result
}

fn coeff_row_table(theta: &[f64]) -> Table {
    let mut t = Table::new(numbered("theta", theta.len()));
    t.rows.push(theta.to_vec());
    t
}

fn cmd_design(ctx: &mut Ctx) -> Result<()> {
    let coarse_path = ctx.required(&ctx.cfg.files.coarse, "coarse")?;
    let coarse = SpatialField::read_csv(&coarse_path)?;
    let spec = ctx.cfg.design.spec(ctx.cfg.seed);
    let design = build_training_inputs(&spec, &coarse, ctx.cfg.grid.dims(), ctx.cfg.selection)?;
    ctx.note(format!("gamma {}", design.gamma));
    ctx.write_table("deck.csv", &deck_to_table(&design.deck))?;
    ctx.write_table("theta_obs.csv", &coeff_row_table(&design.center.theta))?;
    for (i, f) in design.fields.iter().enumerate() {
        f.write_csv(&ctx.out(&format!("fields/field_{i:04}.csv")))?;
    }
    ctx.note(format!("wrote {} fields", design.fields.len()));
    Ok(())
}

fn cmd_simulate(ctx: &mut Ctx) -> Result<()> {
    let deck = read_deck(&ctx.input(&ctx.cfg.files.deck, "deck.csv"))?;
    let recon = Reconstructor::new(ctx.cfg.selection, ctx.cfg.grid.dims())?;
    let model = ctx.cfg.forward.toy()?;
    let outputs = simulate_dataset(
        &deck,
        &recon,
        &model,
        ctx.cfg.forward.transform,
        ctx.cfg.forward.noise_sd,
        ctx.cfg.seed,
    )?;
    ctx.write_table("outputs.csv", &outputs_to_table(&outputs))
}

/// Deck rows joined with their transformed outputs.
fn simulator_block(ctx: &Ctx) -> Result<Vec<(DeckRow, f64)>> {
    let deck_path = ctx.input(&ctx.cfg.files.deck, "deck.csv");
    let deck = read_deck(&deck_path)?;
    let outputs = read_outputs(&ctx.input(&ctx.cfg.files.outputs, "outputs.csv"))?;
    let k2 = ctx.cfg.selection.len();
    if let Some(r) = deck.iter().find(|r| r.theta.len() != k2) {
        return Err(Error::InvalidInput(format!(
            "{}: run {} has {} coefficients, selection needs {k2}",
            deck_path.display(),
            r.run_id,
            r.theta.len()
        )));
    }
    let by_run: BTreeMap<usize, f64> = outputs.iter().map(|o| (o.run_id, o.transformed)).collect();
    deck.into_iter()
        .map(|row| match by_run.get(&row.run_id) {
            Some(&z) => Ok((row, z)),
            None => Err(Error::InvalidInput(format!(
                "no simulator output for run {}",
                row.run_id
            ))),
        })
        .collect()
}

fn sample_header(k2: usize) -> Vec<String> {
    let mut h = vec!["pvi".to_owned()];
    h.extend(numbered("theta", k2));
    h.push("z".to_owned());
    h
}

fn samples_table(rows: &[&(DeckRow, f64)], k2: usize) -> Table {
    let mut t = Table::new(sample_header(k2));
    for (r, z) in rows {
        let mut v = vec![r.pvi];
        v.extend(&r.theta);
        v.push(*z);
        t.rows.push(v);
    }
    t
}

fn design_matrix(rows: &[&(DeckRow, f64)]) -> (DMatrix<f64>, Vec<f64>) {
    let k2 = rows.first().map_or(0, |r| r.0.theta.len());
    let x = DMatrix::from_fn(rows.len(), k2 + 1, |i, c| {
        if c == 0 {
            rows[i].0.pvi
        } else {
            rows[i].0.theta[c - 1]
        }
    });
    (x, rows.iter().map(|r| r.1).collect())
}

fn cmd_fit(ctx: &mut Ctx) -> Result<()> {
    let block = simulator_block(ctx)?;
    let k2 = ctx.cfg.selection.len();
    let ids: Vec<usize> = block
        .iter()
        .map(|r| r.0.field_id)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n_test = (ctx.cfg.fit.test_fraction * ids.len() as f64).round() as usize;
    let test_ids: BTreeSet<usize> = ids[ids.len() - n_test..].iter().copied().collect();
    let (test, train): (Vec<_>, Vec<_>) = block.iter().partition(|r| test_ids.contains(&r.0.field_id));
    if train.is_empty() {
        return Err(Error::InvalidInput(
            "no training rows after the train/test split".into(),
        ));
    }
    ctx.note(format!(
        "{} fields: {} train rows, {} test rows",
        ids.len(),
        train.len(),
        test.len()
    ));
    ctx.write_table("train.csv", &samples_table(&train, k2))?;
    ctx.write_table("test.csv", &samples_table(&test, k2))?;

    let (x, z) = design_matrix(&train);
    let data = TrainingSet::simulator(x, z, 1)?;
    let chain = ctx.cfg.chain.chain_config(ctx.cfg.seed, false)?;
    let hp = &ctx.cfg.hyperparams.clone();
    let obs = ObservationSet {
        x_r: DMatrix::zeros(0, 1),
        ..Default::default()
    };
    let store = run_chains(
        &chain,
        ctx.cfg.chain.n_chains,
        &data,
        &obs,
        hp,
        &ChainInit::emulator_only(),
    )?;
    report_moves(ctx, &store);
    let snap = ModelSnapshot::from_store(
        &store,
        1,
        k2,
        data.scaling().clone(),
        hp.clone(),
        ctx.cfg.forward.transform,
    )
    .with_grid(ctx.cfg.selection, ctx.cfg.grid.dims());
    snap.save(&ctx.out("snapshot.json"))?;
    ctx.note(format!("wrote snapshot.json ({} draws)", snap.draws.len()));
    write_text(&ctx.out("trace.csv"), &store.trace_csv())?;
    ctx.note("wrote trace.csv");
    Ok(())
}

fn report_moves(ctx: &mut Ctx, store: &PosteriorStore) {
    let c = &store.counters;
    let names = ["birth", "death", "change", "stay"];
    for (i, name) in names.iter().enumerate() {
        ctx.note(format!("{name}: {} accepted of {}", c.accepted[i], c.proposed[i]));
    }
    if c.theta_proposed > 0 {
        ctx.note(format!("theta acceptance {:.3}", c.theta_rate()));
    }
}

#[derive(Debug, Serialize)]
struct ValidationMetrics {
    n: usize,
    rmse: f64,
    /// `None` when the held-out responses are constant.
    r2: Option<f64>,
    coverage_95: f64,
}

/// Held-out accuracy of the posterior mean and coverage of the central 95%
/// posterior predictive interval.
fn validation_metrics(sim: &[f64], fitted: &[f64], lo: &[f64], hi: &[f64]) -> ValidationMetrics {
    let n = sim.len();
    let sse: f64 = sim.iter().zip(fitted).map(|(s, f)| (s - f).powi(2)).sum();
    let m = mean(sim);
    let sst: f64 = sim.iter().map(|s| (s - m).powi(2)).sum();
    let covered = (0..n).filter(|&i| lo[i] <= sim[i] && sim[i] <= hi[i]).count();
    ValidationMetrics {
        n,
        rmse: (sse / n as f64).sqrt(),
        r2: (sst > 0.0).then(|| 1.0 - sse / sst),
        coverage_95: covered as f64 / n as f64,
    }
}

fn cmd_validate(ctx: &mut Ctx) -> Result<()> {
    let snap = ModelSnapshot::load(&ctx.input(&ctx.cfg.files.snapshot, "snapshot.json"))?;
    let test_path = ctx.input(&ctx.cfg.files.test, "test.csv");
    let table = Table::read(&test_path)?;
    table.expect_header(&sample_header(snap.k2), &test_path)?;
    if table.rows.is_empty() {
        return Err(Error::InvalidInput(format!("{}: no test rows", test_path.display())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed);
    let p = snap.p();
    let mut cross = Table::new(["simulated", "fitted_mean", "q025", "q975"].map(String::from).to_vec());
    for row in &table.rows {
        let x = snap.scaling.apply(&row[..p]);
        let mean = predict(snap.draws.iter(), &x, &[])?.mean;
        let band = predict_with_noise(snap.draws.iter(), &x, &[0.025, 0.975], &mut rng)?;
        cross
            .rows
            .push(vec![row[p], mean, band.quantiles[0], band.quantiles[1]]);
    }
    let col = |j: usize| cross.rows.iter().map(|r| r[j]).collect::<Vec<f64>>();
    let metrics = validation_metrics(&col(0), &col(1), &col(2), &col(3));
    ctx.note(format!(
        "rmse {} r2 {:?} coverage {}",
        metrics.rmse, metrics.r2, metrics.coverage_95
    ));
    ctx.write_table("crossplot.csv", &cross)?;
    ctx.write_json("metrics.json", &metrics)
}

fn read_observed(path: &Path, ctx: &Ctx) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let t = Table::read(path)?;
    t.expect_header(&["pvi".to_owned(), "raw".to_owned()], path)?;
    let z = t
        .rows
        .iter()
        .map(|r| ctx.cfg.forward.transform.apply(r[1]))
        .collect::<Result<Vec<f64>>>()?;
    Ok((DMatrix::from_fn(t.rows.len(), 1, |i, _| t.rows[i][0]), z))
}

fn read_fine(path: &Path) -> Result<Vec<FineObs>> {
    let t = Table::read(path)?;
    t.expect_header(&["row", "col", "value"].map(String::from), path)?;
    t.rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if r[..2].iter().any(|v| !(*v >= 0.0 && v.fract() == 0.0)) {
                return Err(Error::parse(path, i + 2, "row and col must be non-negative integers"));
            }
            Ok(FineObs {
                row: r[0] as usize,
                col: r[1] as usize,
                value: r[2],
            })
        })
        .collect()
}

/// Equal-width histogram over the data range.
fn histogram(values: &[f64], bins: usize) -> (f64, f64, Vec<usize>) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0; bins];
    for v in values {
        counts[(((v - lo) / width) as usize).min(bins - 1)] += 1;
    }
    (lo, width, counts)
}

const HIST_BINS: usize = 20;
const TOP_COEFFS: usize = 4;

fn marginal_tables(thetas: &[Vec<f64>]) -> (Table, Table) {
    let k = thetas[0].len().min(TOP_COEFFS);
    let column = |j: usize| thetas.iter().map(|t| t[j]).collect::<Vec<f64>>();
    let mut one = Table::new(["coefficient", "bin_lo", "bin_hi", "count"].map(String::from).to_vec());
    let mut ranges = Vec::new();
    for j in 0..k {
        let (lo, w, counts) = histogram(&column(j), HIST_BINS);
        for (b, c) in counts.iter().enumerate() {
            one.rows.push(vec![
                (j + 1) as f64,
                lo + b as f64 * w,
                lo + (b + 1) as f64 * w,
                *c as f64,
            ]);
        }
        ranges.push((lo, w));
    }
    let mut two = Table::new(
        ["coefficient_a", "coefficient_b", "bin_a_lo", "bin_b_lo", "count"]
            .map(String::from)
            .to_vec(),
    );
    for a in 0..k {
        for b in a + 1..k {
            let mut counts = vec![0usize; HIST_BINS * HIST_BINS];
            for t in thetas {
                let ia = (((t[a] - ranges[a].0) / ranges[a].1) as usize).min(HIST_BINS - 1);
                let ib = (((t[b] - ranges[b].0) / ranges[b].1) as usize).min(HIST_BINS - 1);
                counts[ia * HIST_BINS + ib] += 1;
            }
            for ia in 0..HIST_BINS {
                for ib in 0..HIST_BINS {
                    two.rows.push(vec![
                        (a + 1) as f64,
                        (b + 1) as f64,
                        ranges[a].0 + ia as f64 * ranges[a].1,
                        ranges[b].0 + ib as f64 * ranges[b].1,
                        counts[ia * HIST_BINS + ib] as f64,
                    ]);
                }
            }
        }
    }
    (one, two)
}

/// Per-cell quantiles of the reconstructed fields of all theta draws.
pub fn field_quantiles(recon: &Reconstructor, thetas: &[Vec<f64>], qs: &[f64]) -> Result<Vec<SpatialField>> {
    let (rows, cols) = recon.dims();
    let fields: Vec<Vec<f64>> = thetas.iter().map(|t| recon.field_values(t)).collect();
    let mut out = vec![Vec::with_capacity(rows * cols); qs.len()];
    let mut cell = vec![0.0; fields.len()];
    for i in 0..rows * cols {
        for (c, f) in cell.iter_mut().zip(&fields) {
            *c = f[i];
        }
        cell.sort_by(f64::total_cmp);
        for (o, &q) in out.iter_mut().zip(qs) {
            o.push(quantile_sorted(&cell, q));
        }
    }
    out.into_iter().map(|v| SpatialField::new(rows, cols, v)).collect()
}

#[derive(Debug, Serialize)]
struct CalibrationSummary {
    n_draws: usize,
    theta_obs: Vec<f64>,
    theta_mean: Vec<f64>,
    theta_sd: Vec<f64>,
    theta_acceptance: f64,
    final_h: Vec<Vec<f64>>,
}

fn cmd_calibrate(ctx: &mut Ctx) -> Result<()> {
    let dims = ctx.cfg.grid.dims();
    let sel = ctx.cfg.selection;
    let coarse = SpatialField::read_csv(&ctx.required(&ctx.cfg.files.coarse, "coarse")?)?;
    let geometry = CoarseGeometry::over(dims, coarse.rows(), coarse.cols())?;
    let theta_obs = coarse_center(&coarse, dims, sel)?;

    let block = simulator_block(ctx)?;
    let rows: Vec<&(DeckRow, f64)> = block.iter().collect();
    let (x_sim, z_sim) = design_matrix(&rows);
    let (x_r, z_r) = read_observed(&ctx.required(&ctx.cfg.files.observed, "observed")?, ctx)?;
    let fine = match &ctx.cfg.files.fine {
        Some(p) => read_fine(p)?,
        None => Vec::new(),
    };
    let obs = ObservationSet {
        z_r: z_r.clone(),
        x_r: x_r.clone(),
        coarse: Some(CoarseData::new(geometry, coarse.values().to_vec())?),
        fine,
    };
    obs.check(dims)?;
    let scaling = crate::emulator::Scaling::fit(&x_sim);
    let data = TrainingSet::with_observed(x_sim, z_sim, x_r, z_r, Some(&theta_obs.theta), 1, scaling)?;
    ctx.note(format!(
        "{} simulator rows, {} observed outputs, {} fine observations",
        data.n_s(),
        data.n_r(),
        obs.fine.len()
    ));

    let has_obs = data.n_r() > 0;
    let chain = ctx.cfg.chain.chain_config(ctx.cfg.seed, has_obs)?;
    let hp = &ctx.cfg.hyperparams.clone();
    let init = ChainInit {
        state: BmarsState::initial(),
        theta: Some(theta_obs.clone()),
    };
    let store = run_chains(&chain, ctx.cfg.chain.n_chains, &data, &obs, hp, &init)?;
    report_moves(ctx, &store);
    write_text(&ctx.out("trace.csv"), &store.trace_csv())?;
    ctx.note("wrote trace.csv");
    let snap = ModelSnapshot::from_store(
        &store,
        1,
        sel.len(),
        data.scaling().clone(),
        hp.clone(),
        ctx.cfg.forward.transform,
    )
    .with_grid(sel, dims);
    snap.save(&ctx.out("snapshot.json"))?;
    ctx.note(format!("wrote snapshot.json ({} draws)", snap.draws.len()));

    let thetas: Vec<Vec<f64>> = store.thetas().map(<[f64]>::to_vec).collect();
    let recon = Reconstructor::new(sel, dims)?;
    let fields = field_quantiles(&recon, &thetas, &[0.5, 0.025, 0.975])?;
    for (f, name) in fields
        .iter()
        .zip(["field_median.csv", "field_q025.csv", "field_q975.csv"])
    {
        f.write_csv(&ctx.out(name))?;
        ctx.note(format!("wrote {name}"));
    }
    let (one, two) = marginal_tables(&thetas);
    ctx.write_table("marginals_1d.csv", &one)?;
    ctx.write_table("marginals_2d.csv", &two)?;

    let k2 = sel.len();
    let col = |j: usize| thetas.iter().map(|t| t[j]).collect::<Vec<f64>>();
    let summary = CalibrationSummary {
        n_draws: thetas.len(),
        theta_obs: theta_obs.theta.clone(),
        theta_mean: (0..k2).map(|j| mean(&col(j))).collect(),
        theta_sd: (0..k2).map(|j| variance(&col(j)).sqrt()).collect(),
        theta_acceptance: store.counters.theta_rate(),
        final_h: store.final_h.clone(),
    };
    ctx.write_json("calibration_summary.json", &summary)
}

#[derive(Debug, Serialize)]
struct SnapshotSummary {
    n_draws: usize,
    /// Posterior frequency of each basis count `m`.
    m_pmf: BTreeMap<usize, f64>,
    m_mean: f64,
    sigma_z2_mean: f64,
    sigma_z2_q025: f64,
    sigma_z2_q975: f64,
    tau_z_mean: f64,
    theta_mean: Option<Vec<f64>>,
    theta_sd: Option<Vec<f64>>,
}

fn cmd_summarize(ctx: &mut Ctx) -> Result<()> {
    let snap = ModelSnapshot::load(&ctx.input(&ctx.cfg.files.snapshot, "snapshot.json"))?;
    if snap.draws.is_empty() {
        return Err(Error::EmptyStore("snapshot holds no draws".into()));
    }
    let n = snap.draws.len() as f64;
    let mut m_pmf = BTreeMap::new();
    for d in &snap.draws {
        *m_pmf.entry(d.m()).or_insert(0.0) += 1.0 / n;
    }
    let mut s2: Vec<f64> = snap.draws.iter().map(|d| d.sigma_z2).collect();
    s2.sort_by(f64::total_cmp);
    let (theta_mean, theta_sd) = match &snap.theta_draws {
        Some(t) => {
            let col = |j: usize| t.iter().map(|v| v[j]).collect::<Vec<f64>>();
            (
                Some((0..snap.k2).map(|j| mean(&col(j))).collect()),
                Some((0..snap.k2).map(|j| variance(&col(j)).sqrt()).collect()),
            )
        }
        None => (None, None),
    };
    let summary = SnapshotSummary {
        n_draws: snap.draws.len(),
        m_mean: snap.draws.iter().map(|d| d.m() as f64).sum::<f64>() / n,
        m_pmf,
        sigma_z2_mean: mean(&s2),
        sigma_z2_q025: quantile_sorted(&s2, 0.025),
        sigma_z2_q975: quantile_sorted(&s2, 0.975),
        tau_z_mean: snap.draws.iter().map(|d| d.tau_z).sum::<f64>() / n,
        theta_mean,
        theta_sd,
    };
    let mut text = String::new();
    let _ = writeln!(text, "draws: {}", summary.n_draws);
    let _ = writeln!(text, "basis count m: mean {:.2}", summary.m_mean);
    let _ = writeln!(
        text,
        "sigma_z2: mean {:.4e}, 95% [{:.4e}, {:.4e}]",
        summary.sigma_z2_mean, summary.sigma_z2_q025, summary.sigma_z2_q975
    );
    let _ = writeln!(text, "tau_z: mean {:.4}", summary.tau_z_mean);
    if let (Some(m), Some(s)) = (&summary.theta_mean, &summary.theta_sd) {
        for (j, (m, s)) in m.iter().zip(s).enumerate() {
            let _ = writeln!(text, "theta_{}: {m:.4} +/- {s:.4}", j + 1);
        }
    }
    print!("{text}");
    ctx.write_json("summary.json", &summary)
}
