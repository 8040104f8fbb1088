//! CSV output of daily rows and participant vectors. Empty cells are missing.

use std::io::{Read, Write};

use thiserror::Error;

use super::{participant_feature_names, DailyFeatureRow, Feature, ParticipantFeatureVector, N_DAILY};

#[derive(Debug, Error)]
pub enum FeatureIoError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("unexpected header in participant feature file")]
    Header,
    #[error("line {line}: {reason}")]
    Row { line: u64, reason: String },
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn write_daily_csv<W: Write>(writer: W, rows: &[DailyFeatureRow]) -> Result<(), FeatureIoError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["participant_id".to_string(), "local_date".to_string()];
    header.extend(Feature::ALL.iter().map(|f| f.name().to_string()));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.participant_id.clone(), r.local_date.format("%Y-%m-%d").to_string()];
        rec.extend(r.values.0.iter().map(|v| cell(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_participant_csv<W: Write>(writer: W, vectors: &[ParticipantFeatureVector]) -> Result<(), FeatureIoError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["participant_id".to_string(), "days_observed".to_string()];
    header.extend(participant_feature_names());
    w.write_record(&header)?;
    for v in vectors {
        let mut rec = vec![v.participant_id.clone(), v.days_observed.to_string()];
        rec.extend(v.values.iter().map(|x| cell(*x)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_participant_csv<R: Read>(reader: R) -> Result<Vec<ParticipantFeatureVector>, FeatureIoError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let names = participant_feature_names();
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.len() != 2 + 2 * N_DAILY || header[0] != "participant_id" || header[1] != "days_observed" || header[2..] != names[..] {
        return Err(FeatureIoError::Header);
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |reason: String| FeatureIoError::Row { line, reason };
        let days_observed = rec[1].parse::<usize>().map_err(|_| bad("days_observed is not an integer".into()))?;
        let values = rec
            .iter()
            .skip(2)
            .map(|s| {
                if s.is_empty() {
                    Ok(None)
                } else {
                    match s.parse::<f64>() {
                        Ok(x) if x.is_finite() => Ok(Some(x)),
                        _ => Err(bad(format!("non-finite value {s:?}"))),
                    }
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.push(ParticipantFeatureVector { participant_id: rec[0].to_string(), days_observed, values });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn participant_round_trip() {
        let mut values = vec![None; 2 * N_DAILY];
        values[0] = Some(0.1 + 0.2);
        values[5] = Some(-3.5e-7);
        let v = vec![ParticipantFeatureVector { participant_id: "p1".into(), days_observed: 70, values }];
        let mut buf = Vec::new();
        write_participant_csv(&mut buf, &v).unwrap();
        assert_eq!(read_participant_csv(buf.as_slice()).unwrap(), v);
    }
}
