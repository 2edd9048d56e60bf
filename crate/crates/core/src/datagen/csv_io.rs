use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::dataset::{Domain, LabeledDataset};
use crate::error::{Error, Result};

/// Header `f0,…,f{d−1},y,domain`, one row per example.
pub fn write_dataset_csv<W: Write>(data: &LabeledDataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Parse {
        row: 0,
        message: e.to_string(),
    };
    let mut header: Vec<String> = (0..data.dim()).map(|j| format!("f{j}")).collect();
    header.push("y".into());
    header.push("domain".into());
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..data.len() {
        let mut rec: Vec<String> = data.features().row(i).iter().map(|v| v.to_string()).collect();
        rec.push(data.labels()[i].to_string());
        rec.push(data.domains()[i].as_str().to_owned());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Parse {
        row: 0,
        message: e.to_string(),
    })
}

pub fn save_dataset_csv(data: &LabeledDataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset_csv(data, std::io::BufWriter::new(file))
}

/// Parses the dataset format. Row numbers in errors count the header as row 1.
pub fn read_dataset_csv<R: Read>(input: R) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse {
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    let y_at = cols.iter().position(|c| *c == "y").ok_or_else(|| Error::Parse {
        row: 1,
        message: "missing `y` column".into(),
    })?;
    let domain_at = cols.iter().position(|c| *c == "domain").ok_or_else(|| Error::Parse {
        row: 1,
        message: "missing `domain` column".into(),
    })?;
    let mut feature_at = Vec::new();
    for j in 0.. {
        match cols.iter().position(|c| *c == format!("f{j}")) {
            Some(p) => feature_at.push(p),
            None => break,
        }
    }
    let expected = feature_at.len() + 2;
    if feature_at.is_empty() || cols.len() != expected {
        return Err(Error::Parse {
            row: 1,
            message: format!("expected columns f0..f{{d-1}}, y, domain; found {}", cols.join(",")),
        });
    }

    let d = feature_at.len();
    let (mut x, mut y, mut dom) = (Vec::new(), Vec::new(), Vec::new());
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 2;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        if rec.len() != expected {
            return Err(Error::Parse {
                row,
                message: format!("{} fields, expected {expected}", rec.len()),
            });
        }
        let num = |p: usize| -> Result<f64> {
            let s = rec[p].trim();
            let v: f64 = s.parse().map_err(|_| Error::Parse {
                row,
                message: format!("`{s}` in column {} is not a number", cols[p]),
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite(format!("row {row}, column {}", cols[p])))
            }
        };
        for &p in &feature_at {
            x.push(num(p)?);
        }
        y.push(num(y_at)?);
        let tag = rec[domain_at].trim();
        dom.push(tag.parse::<Domain>().map_err(|_| Error::Parse {
            row,
            message: format!("domain `{tag}` is neither source nor target"),
        })?);
    }
    let n = y.len();
    LabeledDataset::new(DMatrix::from_row_slice(n, d, &x), DVector::from_vec(y), dom)
}

pub fn load_dataset_csv(path: &Path) -> Result<LabeledDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset_csv(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let a = LabeledDataset::from_rows(&[vec![0.1, -2.5e-17], vec![1.0 / 3.0, 7.0]], &[1.0, -1.0], Domain::Source)
            .unwrap();
        let b = LabeledDataset::from_rows(&[vec![f64::MAX, f64::MIN_POSITIVE]], &[0.25], Domain::Target).unwrap();
        let data = a.concat(&b).unwrap();
        let mut buf = Vec::new();
        write_dataset_csv(&data, &mut buf).unwrap();
        let back = read_dataset_csv(buf.as_slice()).unwrap();
        assert_eq!(back.features(), data.features());
        assert_eq!(back.labels(), data.labels());
        assert_eq!(back.domains(), data.domains());
    }

    #[test]
    fn missing_label_column() {
        let text = "f0,f1,domain\n1,2,source\n";
        assert!(matches!(read_dataset_csv(text.as_bytes()), Err(Error::Parse { row: 1, .. })));
    }

    #[test]
    fn bad_value_reports_its_row() {
        let text = "f0,y,domain\n1,1,source\n2,x,target\n";
        assert!(matches!(read_dataset_csv(text.as_bytes()), Err(Error::Parse { row: 3, .. })));
        let text = "f0,y,domain\n1,1,elsewhere\n";
        assert!(matches!(read_dataset_csv(text.as_bytes()), Err(Error::Parse { row: 2, .. })));
        let text = "f0,y,domain\nNaN,1,source\n";
        assert!(matches!(read_dataset_csv(text.as_bytes()), Err(Error::NonFinite(_))));
    }
}
