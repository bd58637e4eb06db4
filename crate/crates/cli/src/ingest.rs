//! CSV ingestion.

use std::path::Path;

use lcattr_core::{Dataset, Sample};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("column `{0}` not found in CSV header")]
    MissingColumn(String),

    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    ParseError {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row} has {got} fields, header has {expected}")]
    RowLength {
        row: usize,
        expected: usize,
        got: usize,
    },

    #[error(transparent)]
    Invalid(#[from] lcattr_core::Error),
}

#[derive(Clone, Debug, Default)]
pub struct IngestOptions {
    pub target: String,
    pub group_by: Option<String>,
    /// Column holding sample ids. Without it ids are 1-based row numbers.
    pub id_column: Option<String>,
}

/// Reads a headered CSV. Every column other than the target, group and id
/// columns is a feature, in header order. Row numbers in errors count data
/// rows from 1, excluding the header.
pub fn ingest_csv(path: impl AsRef<Path>, opts: &IngestOptions) -> Result<Dataset, IngestError> {
    let path = path.as_ref();
    let io = |source| IngestError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(io)?;
    let header: Vec<String> = reader
        .headers()
        .map_err(io)?
        .iter()
        .map(str::to_string)
        .collect();

    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    };
    let target = find(&opts.target)?;
    let group = opts.group_by.as_deref().map(find).transpose()?;
    let id_col = opts.id_column.as_deref().map(find).transpose()?;
    let features: Vec<usize> = (0..header.len())
        .filter(|&j| j != target && Some(j) != group && Some(j) != id_col)
        .collect();
    let names: Vec<String> = features.iter().map(|&j| header[j].clone()).collect();

    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(io)?;
        if record.len() != header.len() {
            return Err(IngestError::RowLength {
                row,
                expected: header.len(),
                got: record.len(),
            });
        }
        let number = |j: usize| -> Result<f64, IngestError> {
            let cell = &record[j];
            cell.parse::<f64>().map_err(|_| IngestError::ParseError {
                row,
                column: header[j].clone(),
                value: cell.to_string(),
            })
        };
        let x = features
            .iter()
            .map(|&j| number(j))
            .collect::<Result<Vec<_>, _>>()?;
        let y = number(target)?;
        let id = match id_col {
            Some(j) => record[j].to_string(),
            None => row.to_string(),
        };
        let mut s = Sample::new(id, x, y);
        if let Some(g) = group {
            s = s.with_group(&record[g]);
        }
        samples.push(s);
    }
    Ok(Dataset::new(samples, names)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn csv_file(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    fn opts(target: &str) -> IngestOptions {
        IngestOptions {
            target: target.into(),
            ..Default::default()
        }
    }

    #[test]
    fn three_rows_two_features() {
        let f = csv_file("a,b,y\n1,2,3\n4,5,6\n7,8,9\n");
        let d = ingest_csv(f.path(), &opts("y")).unwrap();
        assert_eq!(d.dim(), 2);
        assert_eq!(d.len(), 3);
        assert_eq!(d.feature_names(), ["a", "b"]);
        assert_eq!(d.samples()[1].x, vec![4.0, 5.0]);
        assert_eq!(d.samples()[1].y, 6.0);
        assert_eq!(d.samples()[2].id, "3");
    }

    #[test]
    fn target_in_the_middle() {
        let f = csv_file("a,y,b\n1,2,3\n");
        let d = ingest_csv(f.path(), &opts("y")).unwrap();
        assert_eq!(d.feature_names(), ["a", "b"]);
        assert_eq!(d.samples()[0].x, vec![1.0, 3.0]);
    }

    #[test]
    fn non_numeric_cell_is_located() {
        let f = csv_file("a,b,y\n1,2,3\n4,oops,6\n");
        match ingest_csv(f.path(), &opts("y")) {
            Err(IngestError::ParseError { row, column, value }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "b");
                assert_eq!(value, "oops");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_cell_is_a_parse_error() {
        let f = csv_file("a,b,y\n1,,3\n");
        assert!(matches!(
            ingest_csv(f.path(), &opts("y")),
            Err(IngestError::ParseError { row: 1, .. })
        ));
    }

    #[test]
    fn group_and_id_columns_are_not_features() {
        let f = csv_file("ts,day,a,b,y\nt0,mon,1,2,3\nt1,tue,4,5,6\n");
        let o = IngestOptions {
            target: "y".into(),
            group_by: Some("day".into()),
            id_column: Some("ts".into()),
        };
        let d = ingest_csv(f.path(), &o).unwrap();
        assert_eq!(d.feature_names(), ["a", "b"]);
        assert_eq!(d.samples()[0].group_key.as_deref(), Some("mon"));
        assert_eq!(d.samples()[1].id, "t1");
    }

    #[test]
    fn missing_target() {
        let f = csv_file("a,b\n1,2\n");
        assert!(matches!(
            ingest_csv(f.path(), &opts("y")),
            Err(IngestError::MissingColumn(c)) if c == "y"
        ));
    }

    #[test]
    fn ragged_row() {
        let f = csv_file("a,b,y\n1,2,3\n4,5\n");
        assert!(matches!(
            ingest_csv(f.path(), &opts("y")),
            Err(IngestError::RowLength {
                row: 2,
                expected: 3,
                got: 2
            })
        ));
    }

    #[test]
    fn nan_literal_fails_validation() {
        let f = csv_file("a,b,y\n1,NaN,3\n");
        assert!(matches!(
            ingest_csv(f.path(), &opts("y")),
            Err(IngestError::Invalid(_))
        ));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            ingest_csv("/definitely/not/here.csv", &opts("y")),
            Err(IngestError::Io { .. })
        ));
    }
}
