use std::io::Read;

use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// One dataset version (or selection strategy) with its measured signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionPoint {
    pub label: String,
    pub compression_ratio: f64,
    pub training_loss: Option<f64>,
    pub performance: Option<f64>,
}

#[derive(Deserialize)]
struct Row {
    label: String,
    compression_ratio: f64,
    training_loss: Option<f64>,
    performance: Option<f64>,
}

/// Reads `label,compression_ratio,training_loss,performance` CSV. Empty
/// cells mean "absent".
pub fn read_versions_csv<R: Read>(reader: R) -> Result<Vec<VersionPoint>, AnalysisError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| AnalysisError::Csv {
        record: 0,
        reason: e.to_string(),
    })?;
    for want in ["label", "compression_ratio", "training_loss", "performance"] {
        if !headers.iter().any(|h| h == want) {
            return Err(AnalysisError::Csv {
                record: 0,
                reason: format!("missing column {want:?}"),
            });
        }
    }
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let record = i + 1;
        let row = row.map_err(|e| AnalysisError::Csv {
            record,
            reason: e.to_string(),
        })?;
        if !(row.compression_ratio > 0.0 && row.compression_ratio.is_finite()) {
            return Err(AnalysisError::Csv {
                record,
                reason: "compression_ratio must be a positive number".into(),
            });
        }
        if let Some(loss) = row.training_loss {
            if !(loss > 0.0 && loss.is_finite()) {
                return Err(AnalysisError::Csv {
                    record,
                    reason: "training_loss must be a positive number".into(),
                });
            }
        }
        if row.performance.is_some_and(|p| !p.is_finite()) {
            return Err(AnalysisError::Csv {
                record,
                reason: "performance must be finite".into(),
            });
        }
        out.push(VersionPoint {
            label: row.label,
            compression_ratio: row.compression_ratio,
            training_loss: row.training_loss,
            performance: row.performance,
        });
    }
    Ok(out)
}

pub fn parse_versions_csv(text: &str) -> Result<Vec<VersionPoint>, AnalysisError> {
    read_versions_csv(text.as_bytes())
}

/// Flags versions whose compression ratio rose over the previous version and,
/// when both have a loss, whose loss rose too.
pub fn detect_anomaly(versions: &[VersionPoint]) -> Vec<String> {
    versions
        .windows(2)
        .filter(|w| {
            let (prev, cur) = (&w[0], &w[1]);
            let ratio_up = cur.compression_ratio > prev.compression_ratio;
            let loss_up = match (prev.training_loss, cur.training_loss) {
                (Some(p), Some(c)) => c > p,
                _ => true,
            };
            ratio_up && loss_up
        })
        .map(|w| w[1].label.clone())
        .collect()
}
