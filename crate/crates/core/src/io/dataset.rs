//! Wide CSV datasets: `id`, optional `x`, then for every process `u`
//! the occasions `u_t1..u_tJ` followed by the values `u_v1..u_vJ`.

use std::io::{Read, Write};
use std::path::Path;

use crate::data::{Dataset, Individual};
use crate::error::{Error, Result};
use crate::model::{MeasurementSchedule, Process};

/// Formats a float with 17 significant digits, which round-trips exactly.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

struct Layout {
    covariate: Option<usize>,
    /// Per process: column indices of times and values.
    processes: Vec<(Process, Vec<usize>, Vec<usize>)>,
}

fn header_error(message: String) -> Error {
    Error::Validation {
        row: 0,
        process: None,
        message,
    }
}

fn parse_header(header: &csv::StringRecord) -> Result<Layout> {
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    if cols.first() != Some(&"id") {
        return Err(header_error("first column must be `id`".into()));
    }
    let covariate = cols.iter().position(|&c| c == "x");
    let mut processes = Vec::new();
    for p in Process::ALL {
        let col = |kind: char, j: usize| cols.iter().position(|&c| c == format!("{}_{kind}{j}", p.label()));
        let mut times = Vec::new();
        let mut values = Vec::new();
        let mut j = 1;
        while let Some(t) = col('t', j) {
            let v = col('v', j).ok_or_else(|| header_error(format!("column {}_v{j} missing", p.label())))?;
            times.push(t);
            values.push(v);
            j += 1;
        }
        if col('v', j).is_some() {
            return Err(header_error(format!("column {}_t{j} missing", p.label())));
        }
        if !times.is_empty() {
            processes.push((p, times, values));
        }
    }
    if processes.is_empty() {
        return Err(header_error("no process columns found".into()));
    }
    let known = 1 + usize::from(covariate.is_some())
        + processes.iter().map(|(_, t, v)| t.len() + v.len()).sum::<usize>();
    if known != cols.len() {
        return Err(header_error("unrecognised columns in header".into()));
    }
    Ok(Layout {
        covariate,
        processes,
    })
}

fn cell(rec: &csv::StringRecord, i: usize, row: usize, process: Option<char>, name: &str) -> Result<f64> {
    let s = rec.get(i).map(str::trim).unwrap_or("");
    if s.is_empty() {
        return Err(Error::Validation {
            row,
            process,
            message: format!("missing value in column {name}"),
        });
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Validation {
            row,
            process,
            message: format!("`{s}` in column {name} is not a finite number"),
        }),
    }
}

/// Reads a dataset; errors name the 1-based data row and the process.
pub fn read_dataset_from<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let layout = parse_header(rdr.headers()?)?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let id = rec.get(0).unwrap_or("").trim().to_string();
        if id.is_empty() {
            return Err(Error::Validation {
                row,
                process: None,
                message: "missing id".into(),
            });
        }
        let covariate = layout.covariate.map(|c| cell(&rec, c, row, None, "x")).transpose()?;
        let mut entries = Vec::new();
        let mut values = Vec::new();
        for (p, tc, vc) in &layout.processes {
            let l = p.label();
            let times = tc
                .iter()
                .enumerate()
                .map(|(j, &c)| cell(&rec, c, row, Some(l), &format!("{l}_t{}", j + 1)))
                .collect::<Result<Vec<_>>>()?;
            if let Some(j) = times.windows(2).position(|w| !(w[1] > w[0])) {
                return Err(Error::Validation {
                    row,
                    process: Some(l),
                    message: format!("occasions not strictly increasing at {l}_t{}", j + 2),
                });
            }
            let vals = vc
                .iter()
                .enumerate()
                .map(|(j, &c)| cell(&rec, c, row, Some(l), &format!("{l}_v{}", j + 1)))
                .collect::<Result<Vec<_>>>()?;
            entries.push((*p, times));
            values.push(vals);
        }
        rows.push(Individual {
            id,
            covariate,
            schedule: MeasurementSchedule::new(entries)?,
            values,
        });
    }
    Dataset::new(rows)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset_from(f)
}

pub fn write_dataset_to<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let j = data.waves();
    let mut header = vec!["id".to_string()];
    if data.has_covariate() {
        header.push("x".into());
    }
    for p in data.processes() {
        let l = p.label();
        header.extend((1..=j).map(|k| format!("{l}_t{k}")));
        header.extend((1..=j).map(|k| format!("{l}_v{k}")));
    }
    w.write_record(&header)?;
    for r in data.rows() {
        let mut rec = vec![r.id.clone()];
        if let Some(x) = r.covariate {
            rec.push(num(x));
        }
        for &p in data.processes() {
            rec.extend(r.schedule.times(p).expect("validated").iter().map(|&v| num(v)));
            rec.extend(r.values_of(p).expect("validated").iter().map(|&v| num(v)));
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn write_dataset(data: &Dataset, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset_to(data, std::io::BufWriter::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "id,x,m_t1,m_t2,m_t3,m_v1,m_v2,m_v3,y_t1,y_t2,y_t3,y_v1,y_v2,y_v3
a,0.5,0,1,2,1,2,3,0,1,2,4,5,6
b,-1,0.1,1.1,2.1,1,2,3,0,1,2,4,5,6
";

    #[test]
    fn reads_wide_layout() {
        let d = read_dataset_from(GOOD.as_bytes()).unwrap();
        assert_eq!(d.n(), 2);
        assert_eq!(d.waves(), 3);
        assert_eq!(d.processes(), &[Process::M, Process::Y]);
        assert_eq!(d.rows()[1].covariate, Some(-1.0));
        assert_eq!(d.rows()[1].schedule.times(Process::M).unwrap(), &[0.1, 1.1, 2.1]);
        assert_eq!(d.rows()[0].values_of(Process::Y).unwrap(), &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn decreasing_times_name_row_and_process() {
        let bad = GOOD.replace("b,-1,0.1,1.1,2.1,1,2,3,0,1,2", "b,-1,0.1,1.1,2.1,1,2,3,0,2,1");
        let err = read_dataset_from(bad.as_bytes()).unwrap_err();
        match &err {
            Error::Validation { row, process, .. } => assert_eq!((*row, *process), (2, Some('y'))),
            e => panic!("unexpected {e}"),
        }
        assert!(err.to_string().contains("row 2, process y"));
    }

    #[test]
    fn missing_cell_is_rejected() {
        let bad = GOOD.replace("a,0.5,0,1,2,1,2,3", "a,0.5,0,1,2,1,,3");
        let err = read_dataset_from(bad.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Validation { row: 1, process: Some('m'), .. }), "{err}");
    }

    #[test]
    fn round_trip_is_exact() {
        let d = read_dataset_from(GOOD.replace("0.5", "0.1234567890123456789").as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_dataset_to(&d, &mut buf).unwrap();
        let back = read_dataset_from(buf.as_slice()).unwrap();
        assert_eq!(back, d);
    }
}
