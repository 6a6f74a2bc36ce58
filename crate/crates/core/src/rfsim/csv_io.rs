use std::path::Path;

use crate::error::{Error, Result};
use crate::fsio;

use super::{Receiver, SignalSample, SYMBOLS};

/// Column names: `sample_id,tx_id,class,member,view,phase_0..phase_15,power_0..power_15`.
pub fn csv_header() -> Vec<String> {
    let mut h: Vec<String> = ["sample_id", "tx_id", "class", "member", "view"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((0..SYMBOLS).map(|k| format!("phase_{k}")));
    h.extend((0..SYMBOLS).map(|k| format!("power_{k}")));
    h
}

pub fn samples_to_csv(samples: &[SignalSample]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(csv_header()).expect("in-memory write");
    for (i, s) in samples.iter().enumerate() {
        let mut row = vec![
            i.to_string(),
            s.tx_id.to_string(),
            s.class_label.to_string(),
            u8::from(s.member).to_string(),
            s.view.as_str().to_string(),
        ];
        row.extend(s.phases.iter().map(|v| format!("{v:.9}")));
        row.extend(s.powers.iter().map(|v| format!("{v:.9}")));
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Write samples atomically to `path`.
pub fn write_samples(path: &Path, samples: &[SignalSample]) -> Result<()> {
    fsio::write_atomic(path, &samples_to_csv(samples))
}

fn parse_record(record: &csv::StringRecord, line: usize) -> std::result::Result<SignalSample, String> {
    let field = |i: usize| record.get(i).ok_or_else(|| format!("line {line}: missing column {i}"));
    let num = |i: usize| -> std::result::Result<f64, String> {
        let raw = field(i)?;
        let v: f64 = raw.parse().map_err(|_| format!("line {line}: bad number `{raw}`"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("line {line}: non-finite value"))
        }
    };
    let tx_id = field(1)?.parse().map_err(|_| format!("line {line}: bad tx_id"))?;
    let class_label = match field(2)? {
        "0" => 0,
        "1" => 1,
        other => return Err(format!("line {line}: class `{other}` is not 0 or 1")),
    };
    let member = match field(3)? {
        "0" => false,
        "1" => true,
        other => return Err(format!("line {line}: member `{other}` is not 0 or 1")),
    };
    let view = match field(4)? {
        "provider" => Receiver::Provider,
        "adversary" => Receiver::Adversary,
        other => return Err(format!("line {line}: unknown view `{other}`")),
    };
    let mut phases = [0.0; SYMBOLS];
    let mut powers = [0.0; SYMBOLS];
    for k in 0..SYMBOLS {
        phases[k] = num(5 + k)?;
        powers[k] = num(5 + SYMBOLS + k)?;
    }
    Ok(SignalSample {
        phases,
        powers,
        class_label,
        tx_id,
        member,
        view,
    })
}

pub fn samples_from_csv(bytes: &[u8]) -> std::result::Result<Vec<SignalSample>, String> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header = r.headers().map_err(|e| e.to_string())?.clone();
    if header.iter().ne(csv_header().iter().map(String::as_str)) {
        return Err("unexpected CSV header".into());
    }
    let mut out = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record.map_err(|e| e.to_string())?;
        if record.len() != 5 + 2 * SYMBOLS {
            return Err(format!("line {}: expected {} columns", i + 2, 5 + 2 * SYMBOLS));
        }
        out.push(parse_record(&record, i + 2)?);
    }
    Ok(out)
}

/// Read samples written by [`write_samples`]; errors name the file.
pub fn read_samples(path: &Path) -> Result<Vec<SignalSample>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    samples_from_csv(&bytes).map_err(|reason| Error::load(path, reason))
}
