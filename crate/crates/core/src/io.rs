//! File formats: dataset CSV, draws CSV with a JSON provenance sidecar,
//! per-draw result CSV and JSON documents.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::draws::{PosteriorDraws, Provenance};
use crate::error::{Error, Result};
use crate::scm::{Configuration, DeviceRecord, Humidity, Measurement, Regime};

/// Fixed-point formatting used by every human-facing numeric output.
pub fn fmt6(v: f64) -> String {
    format!("{v:.6}")
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line());
    let message = match e.kind() {
        csv::ErrorKind::Io(_) => e.to_string(),
        _ => format!("malformed CSV: {e}"),
    };
    match (e.into_kind(), line) {
        (csv::ErrorKind::Io(io), _) => Error::Io(io),
        (_, Some(l)) => Error::data_at(l, message),
        (_, None) => Error::data(message),
    }
}

fn dataset_header(measurements: usize) -> Vec<String> {
    let mut h: Vec<String> = ["id", "regime", "x_S", "x_T", "x_P", "x_H"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((0..measurements).map(|t| format!("w{t}")));
    h.extend((0..measurements).map(|t| format!("y{t}")));
    h
}

/// Writes one row per device; every device must have the same number of measurements.
pub fn write_dataset<W: Write>(records: &[DeviceRecord], out: W) -> Result<()> {
    let m = records.first().map_or(4, |r| r.measurements.len());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(dataset_header(m)).map_err(csv_error)?;
    for r in records {
        if r.measurements.len() != m {
            return Err(Error::data(format!(
                "device {} has {} measurements, expected {m}",
                r.id,
                r.measurements.len()
            )));
        }
        let mut row = vec![
            r.id.clone(),
            r.regime.to_string(),
            r.config.surface.to_string(),
            r.config.component.to_string(),
            r.config.pins.to_string(),
            r.config.humidity.class().to_string(),
        ];
        row.extend(r.measurements.iter().map(|x| fmt6(x.time)));
        row.extend(r.measurements.iter().map(|x| fmt6(x.resistance)));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset written by [`write_dataset`]; errors carry the line number.
pub fn read_dataset<R: Read>(input: R) -> Result<Vec<DeviceRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = rdr.headers().map_err(csv_error)?.iter().map(String::from).collect();
    let extra = header.len().saturating_sub(6);
    if extra == 0 || !extra.is_multiple_of(2) || header != dataset_header(extra / 2) {
        return Err(Error::data_at(
            1,
            format!("expected header {}", dataset_header(4).join(",")),
        ));
    }
    let m = extra / 2;
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| &row[i];
        let int = |i: usize| -> Result<i64> {
            field(i).parse().map_err(|_| {
                Error::data_at(line, format!("column {}: {:?} is not an integer", header[i], field(i)))
            })
        };
        let level = |i: usize| -> Result<usize> {
            usize::try_from(int(i)?)
                .map_err(|_| Error::data_at(line, format!("column {}: negative level", header[i])))
        };
        let num = |i: usize| -> Result<f64> {
            let v: f64 = field(i).parse().map_err(|_| {
                Error::data_at(line, format!("column {}: {:?} is not a number", header[i], field(i)))
            })?;
            if !v.is_finite() {
                return Err(Error::data_at(line, format!("column {}: non-finite value", header[i])));
            }
            Ok(v)
        };
        let at_line = |e: Error| match e {
            Error::Data { line: None, message } => Error::data_at(line, message),
            other => Error::data_at(line, other.to_string()),
        };
        let regime: Regime = field(1).parse().map_err(at_line)?;
        let humidity = Humidity::from_class(int(5)?).map_err(at_line)?;
        let config = Configuration::new(level(2)?, level(3)?, level(4)?, humidity);
        let measurements = (0..m)
            .map(|t| {
                Ok(Measurement {
                    time: num(6 + t)?,
                    resistance: num(6 + m + t)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let record = DeviceRecord {
            id: field(0).to_string(),
            config,
            regime,
            measurements,
        };
        record.validate().map_err(at_line)?;
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::data("dataset has no devices"));
    }
    Ok(records)
}

pub fn save_dataset(records: &[DeviceRecord], path: &Path) -> Result<()> {
    write_dataset(records, BufWriter::new(File::create(path)?))
}

pub fn load_dataset(path: &Path) -> Result<Vec<DeviceRecord>> {
    read_dataset(File::open(path).map_err(|e| with_path(e, path))?)
}

fn with_path(e: std::io::Error, path: &Path) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// Path of the provenance file that accompanies a draws CSV.
pub fn provenance_path(draws: &Path) -> PathBuf {
    draws.with_extension("json")
}

/// Draws at full round-trip precision: rounding would break the sum-to-zero
/// and simplex checks applied on reading.
pub fn write_draws<W: Write>(draws: &PosteriorDraws, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["chain".to_string(), "draw".to_string()];
    header.extend(draws.names().iter().cloned());
    w.write_record(&header).map_err(csv_error)?;
    let mut i = 0;
    for (chain, &n) in draws.chain_lengths().iter().enumerate() {
        for d in 0..n {
            let mut row = vec![chain.to_string(), d.to_string()];
            row.extend(draws.row(i).iter().map(|v| format!("{v:?}")));
            w.write_record(&row).map_err(csv_error)?;
            i += 1;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_draws<R: Read>(input: R, provenance: Provenance) -> Result<PosteriorDraws> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers().map_err(csv_error)?.iter().map(String::from).collect();
    let names = crate::scm::ModelParams::param_names(
        &provenance.spec.cardinalities,
        provenance.spec.tables_active(),
    );
    if header.len() != names.len() + 2 || header[0] != "chain" || header[1] != "draw" || header[2..] != names[..] {
        return Err(Error::data_at(1, "draws header does not match the provenance spec"));
    }
    let mut rows = Vec::new();
    let mut lengths: Vec<usize> = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map_or(0, |p| p.line());
        let chain: usize = row[0]
            .parse()
            .map_err(|_| Error::data_at(line, format!("bad chain index {:?}", &row[0])))?;
        let draw: usize = row[1]
            .parse()
            .map_err(|_| Error::data_at(line, format!("bad draw index {:?}", &row[1])))?;
        if chain == lengths.len() && draw == 0 {
            lengths.push(0);
        }
        if chain + 1 != lengths.len() || draw != lengths[chain] {
            return Err(Error::data_at(line, "draws must be ordered by chain, then draw"));
        }
        lengths[chain] += 1;
        let values = row
            .iter()
            .skip(2)
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::data_at(line, format!("bad value {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(values);
    }
    PosteriorDraws::new(rows, lengths, provenance)
}

/// Writes the draws CSV and its provenance sidecar.
pub fn save_draws(draws: &PosteriorDraws, path: &Path) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    write_draws(draws, &mut f)?;
    f.flush()?;
    save_json(draws.provenance(), &provenance_path(path))
}

pub fn load_draws(path: &Path) -> Result<PosteriorDraws> {
    let provenance: Provenance = load_json(&provenance_path(path))?;
    read_draws(File::open(path).map_err(|e| with_path(e, path))?, provenance)
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn save_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(value)?)?;
    Ok(())
}

/// Parses a JSON document; unknown keys are rejected by the target types.
pub fn parse_json<T: DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Config(format!("{what}: {e}")))
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| with_path(e, path))?;
    parse_json(&text, &path.display().to_string())
}

/// A table of named numeric columns written with [`fmt6`].
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Leading columns holding integers (indices, factor levels), written without decimals.
    pub integer_columns: usize,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            integer_columns: 0,
        }
    }

    pub fn with_integer_columns(mut self, n: usize) -> Self {
        self.integer_columns = n;
        self
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    /// One `value` column indexed by draw.
    pub fn per_draw(values: &[f64]) -> Self {
        let mut t = Table::new(&["draw", "value"]).with_integer_columns(1);
        for (i, v) in values.iter().enumerate() {
            t.push(vec![i as f64, *v]);
        }
        t
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns).map_err(csv_error)?;
        for row in &self.rows {
            w.write_record(row.iter().enumerate().map(|(j, &v)| {
                if j < self.integer_columns {
                    format!("{}", v as i64)
                } else {
                    fmt6(v)
                }
            }))
            .map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(BufWriter::new(File::create(path)?))
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_dataset, Design, GeneratorSpec};
    use crate::posterior::FitSpec;
    use crate::sampler::SamplerConfig;
    use crate::scm::{FixedConstants, ModelParams};

    fn dataset(regime: Regime) -> Vec<DeviceRecord> {
        generate_dataset(&GeneratorSpec {
            truth: ModelParams::reference(),
            constants: FixedConstants::default(),
            regime,
            design: Design::Observational { n: 40 },
            seed: 3,
            jitter: true,
        })
        .unwrap()
    }

    fn bytes(records: &[DeviceRecord]) -> Vec<u8> {
        let mut out = Vec::new();
        write_dataset(records, &mut out).unwrap();
        out
    }

    #[test]
    fn dataset_round_trip_is_byte_identical() {
        let data = dataset(Regime::NoStress);
        let first = bytes(&data);
        let back = read_dataset(first.as_slice()).unwrap();
        assert_eq!(back.len(), 40);
        assert_eq!(bytes(&back), first);
        for (a, b) in data.iter().zip(&back) {
            assert_eq!(a.config, b.config);
            assert!((a.measurements[2].resistance - b.measurements[2].resistance).abs() <= 5e-7);
        }
        let text = String::from_utf8(first).unwrap();
        assert!(text.starts_with("id,regime,x_S,x_T,x_P,x_H,w0,w1,w2,w3,y0,y1,y2,y3\n"));
        assert!(text.lines().nth(1).unwrap().contains(",NS,"));
    }

    fn line_of(err: Error) -> Option<u64> {
        match err {
            Error::Data { line, .. } => line,
            other => panic!("expected a data error, got {other}"),
        }
    }

    #[test]
    fn corrupted_rows_report_their_line() {
        let text = String::from_utf8(bytes(&dataset(Regime::AcceleratedStress))).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[5] = lines[5].replacen(",AS,", ",XX,", 1);
        let err = read_dataset(lines.join("\n").as_bytes()).unwrap_err();
        assert_eq!(line_of(err), Some(6));

        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[3] = lines[3].rsplit_once(',').unwrap().0.to_string() + ",abc";
        let err = read_dataset(lines.join("\n").as_bytes()).unwrap_err();
        assert_eq!(line_of(err), Some(4));

        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[2] = lines[2].rsplit_once(',').unwrap().0.to_string();
        let err = read_dataset(lines.join("\n").as_bytes()).unwrap_err();
        assert_eq!(line_of(err), Some(3));

        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[7] = lines[7].replacen(",-1,", ",0,", 1).replacen(",1,0.0", ",0,0.0", 1);
        assert!(read_dataset(lines.join("\n").as_bytes()).is_err());

        let err = read_dataset("a,b\n1,2\n".as_bytes()).unwrap_err();
        assert_eq!(line_of(err), Some(1));
        assert!(read_dataset(dataset_header(4).join(",").as_bytes()).is_err());
    }

    fn draws() -> PosteriorDraws {
        let theta = ModelParams::reference();
        let mut rows = Vec::new();
        for i in 0..6 {
            let mut t = theta.clone();
            t.beta1 = 10.0 + 0.1 * i as f64 + 1e-13;
            t.sigma_y = 0.5 + 1.0 / 3.0;
            rows.push(t.to_flat());
        }
        PosteriorDraws::new(
            rows,
            vec![3, 3],
            Provenance {
                spec: FitSpec::new(Regime::NoStress),
                sampler: SamplerConfig::default(),
                chains: vec![],
            },
        )
        .unwrap()
    }

    #[test]
    fn draws_round_trip_exactly() {
        let d = draws();
        let mut first = Vec::new();
        write_draws(&d, &mut first).unwrap();
        let back = read_draws(first.as_slice(), d.provenance().clone()).unwrap();
        assert_eq!(back, d);
        let mut second = Vec::new();
        write_draws(&back, &mut second).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn draws_files_round_trip_through_disk() {
        let dir = std::env::temp_dir().join(format!("relscm-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("draws.csv");
        let d = draws();
        save_draws(&d, &path).unwrap();
        assert!(provenance_path(&path).exists());
        assert_eq!(load_draws(&path).unwrap(), d);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn misordered_draws_are_rejected() {
        let d = draws();
        let mut buf = Vec::new();
        write_draws(&d, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines.swap(1, 2);
        let err = read_draws(lines.join("\n").as_bytes(), d.provenance().clone()).unwrap_err();
        assert_eq!(line_of(err), Some(2));
    }

    #[test]
    fn unknown_json_keys_are_rejected() {
        let err = parse_json::<SamplerConfig>(r#"{"chains": 4, "chainz": 2}"#, "sampler").unwrap_err();
        assert!(matches!(err, Error::Config(m) if m.contains("chainz")));
        let ok: SamplerConfig = parse_json(r#"{"chains": 2}"#, "sampler").unwrap();
        assert_eq!(ok.chains, 2);
    }

    #[test]
    fn table_formatting() {
        let mut t = Table::new(&["w", "mean"]);
        t.push(vec![0.72, 1.0 / 3.0]);
        let mut out = Vec::new();
        t.write(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "w,mean\n0.720000,0.333333\n");
        assert_eq!(t.column("mean"), Some(vec![1.0 / 3.0]));
        let mut out = Vec::new();
        Table::per_draw(&[2.5]).write(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "draw,value\n0,2.500000\n");
    }
}
