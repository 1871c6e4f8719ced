use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use relscm::counterfactual::{cf_posterior, CounterfactualQuery};
use relscm::datagen::{generate_dataset, GeneratorSpec};
use relscm::io::{self, fmt6, Table};
use relscm::queries::{self, reliability_curve};
use relscm::{DeviceRecord, Error, FitSpec, PosteriorDraws};
use serde::de::DeserializeOwned;
use serde_json::json;

use crate::config::{
    CounterfactualConfig, EstimandConfig, FailureConfig, FitConfig, PlotConfig, ReliabilityConfig,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Library(#[from] Error),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Quality(String),
}

impl CliError {
    /// 2 for bad input, 3 for statistical-quality failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Quality(_) => 3,
            CliError::Library(e) if e.is_input_error() => 2,
            CliError::Library(_) => 3,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(io::load_json(path)?)
}

fn out_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(Error::from)?;
    Ok(())
}

pub fn generate(config: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut spec: GeneratorSpec = load(config)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let records = generate_dataset(&spec)?;
    io::save_dataset(&records, out)?;
    println!(
        "wrote {} {} devices to {} (seed {})",
        records.len(),
        spec.regime,
        out.display(),
        spec.seed
    );
    Ok(())
}

fn diagnostics_path(draws: &Path) -> std::path::PathBuf {
    draws.with_extension("diagnostics.json")
}

pub fn fit(data: &Path, config: Option<&Path>, out: &Path, seed: Option<u64>, allow_unconverged: bool) -> Result<()> {
    let cfg: FitConfig = match config {
        Some(p) => load(p)?,
        None => FitConfig::default(),
    };
    let mut sampler = cfg.sampler;
    if let Some(s) = seed {
        sampler.seed = s;
    }
    if sampler.chains < 2 {
        return Err(CliError::Input(format!(
            "at least 2 chains are needed to check convergence, got {}",
            sampler.chains
        )));
    }
    let records = io::load_dataset(data)?;
    let regime = records[0].regime;
    if let Some(bad) = records.iter().find(|r| r.regime != regime) {
        return Err(CliError::Input(format!(
            "dataset mixes regimes: device {} is {}, device {} is {regime}",
            bad.id, bad.regime, records[0].id
        )));
    }
    if let Some(r) = cfg.regime.filter(|&r| r != regime) {
        return Err(CliError::Input(format!("fit config is for {r} data but the dataset is {regime}")));
    }
    let spec = FitSpec {
        regime,
        cardinalities: cfg.cardinalities,
        priors: cfg.priors,
        constants: cfg.constants,
    };
    let draws = relscm::fit(&records, &spec, &sampler)?;
    io::save_draws(&draws, out)?;
    let report = draws.diagnostics()?;
    io::save_json(&report, &diagnostics_path(out))?;

    println!(
        "{} devices, {} chains x {} draws; max R-hat {:.4}, min ESS {:.0}",
        records.len(),
        draws.chains(),
        sampler.draws,
        report.max_rhat,
        report.min_ess
    );
    let divergences: usize = draws.provenance().chains.iter().map(|c| c.divergences).sum();
    if divergences > 0 {
        println!("warning: {divergences} divergent transitions");
    }
    println!("{:<12} {:>10} {:>10} {:>22}", "parameter", "mean", "sd", "95% HDI");
    for (name, s) in draws.summarize(0.95)? {
        if name.starts_with("delta1_S") {
            println!(
                "{name:<12} {:>10.3} {:>10.3} {:>22}",
                s.mean,
                s.sd,
                format!("[{:.3}, {:.3}]", s.hdi_low, s.hdi_high)
            );
        }
    }
    println!("draws written to {}", out.display());
    if !report.converged && !allow_unconverged {
        return Err(CliError::Quality(format!(
            "fit did not converge (max R-hat {:.4}, min ESS {:.0}); rerun with more draws or pass --allow-unconverged",
            report.max_rhat, report.min_ess
        )));
    }
    Ok(())
}

pub fn diagnose(path: &Path, out: Option<&Path>, allow_unconverged: bool) -> Result<()> {
    let draws = io::load_draws(path)?;
    let report = draws.diagnostics()?;
    println!("{:<24} {:>8} {:>10}", "parameter", "R-hat", "ESS");
    let opt = |v: Option<f64>, digits: usize| v.map_or("-".to_string(), |x| format!("{x:.digits$}"));
    for d in &report.parameters {
        println!("{:<24} {:>8} {:>10}", d.name, opt(d.rhat, 4), opt(d.ess, 0));
    }
    println!(
        "max R-hat {:.4}, min ESS {:.0}, converged: {}",
        report.max_rhat, report.min_ess, report.converged
    );
    if let Some(out) = out {
        io::save_json(&report, out)?;
    }
    if !report.converged && !allow_unconverged {
        let names: Vec<&str> = report.offenders().iter().map(|d| d.name.as_str()).collect();
        return Err(CliError::Quality(format!("not converged: {}", names.join(", "))));
    }
    Ok(())
}

pub fn summarize(path: &Path, out: &Path, level: f64) -> Result<()> {
    let draws = io::load_draws(path)?;
    let mut w = csv_writer(out)?;
    w.write_record(["parameter", "mean", "sd", "hdi_low", "hdi_high"]).map_err(csv_err)?;
    for (name, s) in draws.summarize(level)? {
        w.write_record([name, fmt6(s.mean), fmt6(s.sd), fmt6(s.hdi_low), fmt6(s.hdi_high)])
            .map_err(csv_err)?;
    }
    w.flush().map_err(Error::from)?;
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(csv_err)
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Library(Error::Io(std::io::Error::other(e.to_string())))
}

/// Loads draws and refuses unconverged ones unless allowed.
pub fn load_checked(path: &Path, allow_unconverged: bool) -> Result<PosteriorDraws> {
    let draws = io::load_draws(path)?;
    if !allow_unconverged {
        let report = draws.diagnostics()?;
        if !report.converged {
            return Err(CliError::Quality(format!(
                "draws in {} are not converged (max R-hat {:.4}, min ESS {:.0}); pass --allow-unconverged to use them anyway",
                path.display(),
                report.max_rhat,
                report.min_ess
            )));
        }
    }
    Ok(draws)
}

fn summary_row(t: f64, s: &relscm::sampler::Summary) -> Vec<f64> {
    vec![t, s.mean, s.sd, s.hdi_low, s.hdi_high]
}

const SUMMARY_COLUMNS: [&str; 5] = ["w", "mean", "sd", "hdi_low", "hdi_high"];

pub fn estimand(draws: &PosteriorDraws, config: &Path, out: &Path) -> Result<()> {
    let q: EstimandConfig = load(config)?;
    if q.w.is_empty() {
        return Err(CliError::Input("estimand needs at least one time in `w`".into()));
    }
    out_dir(out)?;
    let to = q.to.at(q.humidity);
    let mut summary = Table::new(&SUMMARY_COLUMNS);
    let mut columns = vec!["draw".to_string()];
    let mut per_draw: Vec<Vec<f64>> = Vec::new();
    for &w in &q.w {
        let r = match q.from {
            Some(from) => queries::delta_contrast_posterior(&from.at(q.humidity), &to, q.humidity, w, draws, q.level)?,
            None => queries::delta1_posterior(&to, w, draws, q.level)?,
        };
        summary.push(summary_row(w, &r.summary));
        columns.push(format!("w={}", fmt6(w)));
        per_draw.push(r.values);
    }
    summary.save(&out.join("summary.csv"))?;
    let names: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut values = Table::new(&names).with_integer_columns(1);
    for i in 0..draws.len() {
        let mut row = vec![i as f64];
        row.extend(per_draw.iter().map(|v| v[i]));
        values.push(row);
    }
    values.save(&out.join("draws.csv"))?;
    print_table(&summary);
    Ok(())
}

fn print_table(t: &Table) {
    println!("{}", t.columns.join("\t"));
    for row in &t.rows {
        let cells: Vec<String> = row.iter().map(|v| fmt6(*v)).collect();
        println!("{}", cells.join("\t"));
    }
}

pub fn reliability(draws: &PosteriorDraws, config: &Path, out: &Path) -> Result<()> {
    let q: ReliabilityConfig = load(config)?;
    let grid = q.grid.values().map_err(CliError::Input)?;
    let regime = q.regime.unwrap_or(draws.regime());
    out_dir(out)?;
    let curve = reliability_curve(&grid, q.y0, &q.config(), regime, draws, q.level)?;
    let mut t = Table::new(&["t", "mean", "sd", "hdi_low", "hdi_high"]);
    for p in &curve {
        t.push(vec![p.t, p.mean, p.sd, p.hdi_low, p.hdi_high]);
    }
    t.save(&out.join("summary.csv"))?;
    io::save_json(&curve, &out.join("summary.json"))?;
    println!("reliability at {} times written to {}", curve.len(), out.display());
    Ok(())
}

pub fn predict_failure(draws: &PosteriorDraws, config: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let q: FailureConfig = load(config)?;
    let seed = seed.unwrap_or(q.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = queries::predictive_failure_time(&q.intervention, draws, q.replicates, &mut rng)?;
    out_dir(out)?;
    Table::per_draw(&r.values).save(&out.join("draws.csv"))?;
    io::save_json(
        &json!({
            "intervention": q.intervention,
            "seed": seed,
            "replicates": q.replicates,
            "excluded": r.excluded,
            "summary": r.summary,
        }),
        &out.join("summary.json"),
    )?;
    let s = &r.summary;
    let mut t = Table::new(&["min", "q05", "q25", "q50", "q75", "q95", "max", "mean", "sd"]);
    t.push(vec![s.min, s.q05, s.q25, s.q50, s.q75, s.q95, s.max, s.mean, s.sd]);
    t.save(&out.join("summary.csv"))?;
    print_table(&t);
    if r.excluded > 0 {
        println!("{} draws excluded (slope not positive)", r.excluded);
    }
    Ok(())
}

fn find_device(data: &Path, id: &str) -> Result<DeviceRecord> {
    io::load_dataset(data)?
        .into_iter()
        .find(|r| r.id == id)
        .ok_or_else(|| CliError::Input(format!("device {id:?} not found in {}", data.display())))
}

pub fn counterfactual(draws: &PosteriorDraws, config: &Path, data: Option<&Path>, out: &Path) -> Result<()> {
    let q: CounterfactualConfig = load(config)?;
    let record = match (&q.record, &q.device, data) {
        (Some(r), None, _) => r.clone(),
        (None, Some(id), Some(data)) => find_device(data, id)?,
        (None, Some(_), None) => {
            return Err(CliError::Input("a query naming a device needs --data".into()))
        }
        _ => {
            return Err(CliError::Input(
                "a counterfactual query needs exactly one of `record` or `device`".into(),
            ))
        }
    };
    let query = CounterfactualQuery {
        record,
        target: q.target,
        time: q.time,
        humidity: q.humidity,
        question: q.question,
    };
    let r = cf_posterior(&query, draws, q.level)?;
    out_dir(out)?;
    Table::per_draw(&r.values).save(&out.join("draws.csv"))?;
    io::save_json(
        &json!({
            "device": query.record.id,
            "question": query.question,
            "target": query.target,
            "time": query.time,
            "x_H": query.humidity,
            "excluded": r.excluded,
            "summary": r.summary,
            "quantiles": r.quantiles,
        }),
        &out.join("summary.json"),
    )?;
    let s = &r.summary;
    println!(
        "device {}: mean {}, sd {}, {:.0}% HDI [{}, {}], median {}",
        query.record.id,
        fmt6(s.mean),
        fmt6(s.sd),
        100.0 * s.hdi_level,
        fmt6(s.hdi_low),
        fmt6(s.hdi_high),
        fmt6(r.quantiles.q50)
    );
    Ok(())
}

pub fn plot_data(
    data: Option<&Path>,
    draws: Option<&Path>,
    config: Option<&Path>,
    out: &Path,
    allow_unconverged: bool,
) -> Result<()> {
    if data.is_none() && draws.is_none() {
        return Err(CliError::Input("plot-data needs --data, --draws or both".into()));
    }
    out_dir(out)?;
    if let Some(data) = data {
        let records = io::load_dataset(data)?;
        let mut w = csv_writer(&out.join("trajectories.csv"))?;
        w.write_record(["id", "regime", "x_S", "x_T", "x_P", "x_H", "t", "w", "y"]).map_err(csv_err)?;
        for r in &records {
            for (t, m) in r.measurements.iter().enumerate() {
                w.write_record([
                    r.id.clone(),
                    r.regime.to_string(),
                    r.config.surface.to_string(),
                    r.config.component.to_string(),
                    r.config.pins.to_string(),
                    r.config.humidity.class().to_string(),
                    t.to_string(),
                    fmt6(m.time),
                    fmt6(m.resistance),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush().map_err(Error::from)?;
    }
    if let Some(path) = draws {
        let config = config.ok_or_else(|| CliError::Input("curves from --draws need --config".into()))?;
        let q: PlotConfig = load(config)?;
        let draws = load_checked(path, allow_unconverged)?;
        let rel_grid = q.reliability_grid.values().map_err(CliError::Input)?;
        let inc_grid = q.increase_grid.values().map_err(CliError::Input)?;
        let h = q.humidity.class() as f64;
        let mut rel = Table::new(&["x_S", "x_T", "x_P", "x_H", "t", "mean", "hdi_low", "hdi_high"])
            .with_integer_columns(4);
        let mut inc = Table::new(&["x_S", "x_T", "x_P", "x_H", "w", "mean", "hdi_low", "hdi_high"])
            .with_integer_columns(4);
        for a in &q.assemblies {
            let cfg = a.at(q.humidity);
            let key = [a.surface as f64, a.component as f64, a.pins as f64, h];
            for p in reliability_curve(&rel_grid, q.y0, &cfg, draws.regime(), &draws, q.level)? {
                let mut row = key.to_vec();
                row.extend([p.t, p.mean, p.hdi_low, p.hdi_high]);
                rel.push(row);
            }
            let c = draws.constants();
            for &w in &inc_grid {
                let values = draws
                    .thetas()
                    .map(|theta| theta.increase(&cfg, w, draws.regime(), c))
                    .collect::<relscm::Result<Vec<f64>>>()?;
                let s = relscm::sampler::Summary::new(&values, q.level)?;
                let mut row = key.to_vec();
                row.extend([w, s.mean, s.hdi_low, s.hdi_high]);
                inc.push(row);
            }
        }
        rel.save(&out.join("reliability.csv"))?;
        inc.save(&out.join("increase.csv"))?;
    }
    println!("plot data written to {}", out.display());
    Ok(())
}
