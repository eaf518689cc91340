//! CSV tables with the effective config embedded as `#` header comments.
//!
//! The scalar time series uses the fixed column set
//! t, linf, l2, lq, mean, holder_lp, dt_used (one row per stored
//! snapshot); other commands reuse the same container with their own
//! columns. Floats are written in shortest round-trip form, so reading
//! a table back reproduces the exact f64 values.

use std::path::Path;

use crate::{write_atomic, CliError, Result};

pub const SERIES_COLUMNS: [&str; 7] = ["t", "linf", "l2", "lq", "mean", "holder_lp", "dt_used"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRow {
    pub t: f64,
    pub linf: f64,
    pub l2: f64,
    pub lq: f64,
    pub mean: f64,
    pub holder_lp: f64,
    pub dt_used: f64,
}

/// Render a numeric table: one `# key = value` comment per config echo
/// line, a header row, then the data.
pub fn render_table(config_echo: &str, columns: &[&str], rows: &[Vec<f64>]) -> Result<Vec<u8>> {
    let mut buf: Vec<u8> = Vec::new();
    for line in config_echo.lines() {
        buf.extend_from_slice(b"# ");
        buf.extend_from_slice(line.as_bytes());
        buf.push(b'\n');
    }
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(columns)
        .map_err(|e| CliError::Format(format!("csv: {e}")))?;
    for row in rows {
        debug_assert_eq!(row.len(), columns.len());
        let rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        w.write_record(&rec)
            .map_err(|e| CliError::Format(format!("csv: {e}")))?;
    }
    w.into_inner()
        .map_err(|e| CliError::Format(format!("csv: {e}")))
}

pub fn write_table(
    path: &Path,
    config_echo: &str,
    columns: &[&str],
    rows: &[Vec<f64>],
) -> Result<()> {
    write_atomic(path, &render_table(config_echo, columns, rows)?)
}

/// Read a numeric table back, skipping `#` comments. Returns the header
/// names and the rows.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?;
    let header = rdr
        .headers()
        .map_err(|e| CliError::Format(format!("csv header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Format(format!("csv row: {e}")))?;
        let row: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        rows.push(row.map_err(|e| CliError::Format(format!("csv value: {e}")))?);
    }
    Ok((header, rows))
}

pub fn write_timeseries(path: &Path, config_echo: &str, rows: &[SeriesRow]) -> Result<()> {
    let data: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| vec![r.t, r.linf, r.l2, r.lq, r.mean, r.holder_lp, r.dt_used])
        .collect();
    write_table(path, config_echo, &SERIES_COLUMNS, &data)
}

pub fn read_timeseries(path: &Path) -> Result<Vec<SeriesRow>> {
    let (header, rows) = read_table(path)?;
    if header != SERIES_COLUMNS {
        return Err(CliError::Format(format!(
            "unexpected time-series columns {header:?}"
        )));
    }
    Ok(rows
        .into_iter()
        .map(|r| SeriesRow {
            t: r[0],
            linf: r[1],
            l2: r[2],
            lq: r[3],
            mean: r[4],
            holder_lp: r[5],
            dt_used: r[6],
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_round_trips_exact_floats() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("series.csv");
        let rows = vec![
            SeriesRow {
                t: 0.1 + 0.2,
                linf: 1.0 / 3.0,
                l2: f64::MIN_POSITIVE,
                lq: 6.02214076e23,
                mean: -0.0,
                holder_lp: 2.220446049250313e-16,
                dt_used: 0.015625,
            },
            SeriesRow {
                t: 1.0,
                linf: 0.5,
                l2: 0.25,
                lq: 0.125,
                mean: 0.0,
                holder_lp: 3.5,
                dt_used: 0.01,
            },
        ];
        write_timeseries(&p, "alpha = 0.9\nn = 64\n", &rows).unwrap();
        let back = read_timeseries(&p).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.t.to_bits(), b.t.to_bits());
            assert_eq!(a.l2.to_bits(), b.l2.to_bits());
            assert_eq!(a.lq.to_bits(), b.lq.to_bits());
            assert_eq!(a.holder_lp.to_bits(), b.holder_lp.to_bits());
        }
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("# alpha = 0.9\n# n = 64\n"));
        assert!(text.contains("t,linf,l2,lq,mean,holder_lp,dt_used"));
    }

    #[test]
    fn generic_tables_keep_their_columns() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pairing.csv");
        write_table(&p, "s = 0.1\n", &["t", "pairing"], &[vec![0.0, 1.5], vec![0.1, 1.499]])
            .unwrap();
        let (header, rows) = read_table(&p).unwrap();
        assert_eq!(header, vec!["t", "pairing"]);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1][1], 1.499);
    }

    #[test]
    fn wrong_columns_are_detected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        write_table(&p, "", &["t", "x"], &[vec![0.0, 1.0]]).unwrap();
        assert!(read_timeseries(&p).is_err());
    }
}
