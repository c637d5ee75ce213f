//! CSV formats: fills in, schedules and per-path samples out.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so every
//! value parses back to the same f64.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use execdp::attribution::{Fill, Side};
use execdp::sim::PathRecord;
use execdp::solver::Schedule;

use crate::CliError;

pub const FILLS_HEADER: [&str; 5] = ["t", "participant", "side", "qty", "price"];
pub const SCHEDULE_HEADER: [&str; 3] = ["t", "S_t", "W_t"];

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    Ok(buf)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: u64) -> Result<T, CliError> {
    let raw = rec.get(i).unwrap_or("");
    raw.trim()
        .parse()
        .map_err(|_| CliError::input(format!("line {line}: cannot parse {} from {raw:?}", FILLS_HEADER[i])))
}

/// Parses a fills CSV with the exact header `t,participant,side,qty,price`.
pub fn parse_fills(bytes: &[u8]) -> Result<Vec<Fill>, CliError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header = rdr.headers().map_err(|e| CliError::input(format!("fills: {e}")))?.clone();
    if header.iter().ne(FILLS_HEADER.iter().copied()) {
        return Err(CliError::input(format!(
            "fills: header must be exactly `{}`, got `{}`",
            FILLS_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::input(format!("fills: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line());
        let side = match rec.get(2).map(str::trim) {
            Some("buy") => Side::Buy,
            Some("sell") => Side::Sell,
            other => {
                return Err(CliError::input(format!("line {line}: side must be buy or sell, got {other:?}")));
            }
        };
        out.push(Fill {
            t: field(&rec, 0, line)?,
            participant: rec.get(1).unwrap_or("").trim().to_string(),
            side,
            qty: field(&rec, 3, line)?,
            price: field(&rec, 4, line)?,
        });
    }
    if out.is_empty() {
        return Err(CliError::input("fills: no rows"));
    }
    Ok(out)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::input(format!("cannot write {}: {e}", path.display()))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::input(format!("cannot write {}: {e}", path.display()))
}

/// Rows (t, S_t, W_t) with W_t the residual before trading at t.
pub fn write_schedule(path: &Path, s: &Schedule) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(SCHEDULE_HEADER).map_err(csv_err(path))?;
    for (i, st) in s.trades.iter().enumerate() {
        w.write_record([(i + 1).to_string(), st.to_string(), s.residuals[i].to_string()]).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// One row per simulated path: attribution, bucket inputs, trades, prices.
pub fn write_paths(path: &Path, periods: usize, notional: f64, paths: &[PathRecord]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header: Vec<String> =
        ["path", "shortfall", "impact", "timing", "shortfall_bps", "momentum", "cov"].map(String::from).to_vec();
    header.extend((1..=periods).map(|t| format!("S_{t}")));
    header.extend((0..=periods).map(|t| format!("P_{t}")));
    w.write_record(&header).map_err(csv_err(path))?;
    for p in paths {
        let mut row = vec![
            p.path.to_string(),
            p.shortfall.to_string(),
            p.impact.to_string(),
            p.timing.to_string(),
            (1e4 * p.shortfall / notional).to_string(),
            p.momentum.to_string(),
            p.cov.to_string(),
        ];
        row.extend(p.trades.iter().map(f64::to_string));
        row.extend(p.prices.iter().map(f64::to_string));
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_json<T: serde::Serialize>(path: &Path, v: &T) -> Result<(), CliError> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, v).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
    f.write_all(b"\n").and_then(|_| f.flush()).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fills_round_trip_fields() {
        let f = parse_fills(b"t,participant,side,qty,price\n1,a,buy,10,101.5\n1,b,sell,10,101.5\n").unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(f[1].side, Side::Sell);
        assert_eq!(f[0].price, 101.5);
    }

    #[test]
    fn header_must_match() {
        let e = parse_fills(b"t,who,side,qty,price\n1,a,buy,10,101\n").unwrap_err();
        assert_eq!(e.code, crate::EXIT_INPUT);
        let e = parse_fills(b"t,participant,side,qty,price\n1,a,hold,10,101\n").unwrap_err();
        assert!(e.message.contains("side"));
    }

    #[test]
    fn shortest_round_trip_formatting() {
        for x in [0.1, 1.0 / 3.0, 25.0, 1e-300, 123456789.12345679] {
            assert_eq!(x.to_string().parse::<f64>().unwrap(), x);
        }
        assert_eq!(25.0f64.to_string(), "25");
    }
}
