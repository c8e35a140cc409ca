//! CSV writers. Floats use the shortest decimal form that parses back to the
//! same value, so identical inputs give byte-identical files.

use std::io::Write;

use lookahead_core::SolverReport;

use crate::error::Result;
use crate::figures::{SweepRow, XiTable};
use crate::simulator::{SlotRecord, ThroughputReport};

pub fn float(x: f64) -> String {
    format!("{x:?}")
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().flexible(false).from_writer(out)
}

/// `j, xi, residual` with one row per stored term.
pub fn solver_csv<W: Write>(report: &SolverReport, out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["j", "xi", "residual"])?;
    for (j, (x, r)) in report
        .xi
        .values()
        .iter()
        .zip(report.xi.residuals())
        .enumerate()
    {
        w.write_record([(j + 1).to_string(), float(*x), float(r)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["w", "gamma_star", "offline", "relative_gap"])?;
    for row in rows {
        w.write_record([
            row.w.to_string(),
            float(row.gamma_star),
            float(row.offline),
            float(row.relative_gap),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Header `j, N=<n>..., inf`; cells past a column's horizon stay empty.
pub fn xi_table_csv<W: Write>(table: &XiTable, out: W) -> Result<()> {
    let mut w = writer(out);
    let mut header = vec!["j".to_string()];
    header.extend(table.horizons.iter().map(|n| format!("N={n}")));
    header.push("inf".into());
    w.write_record(&header)?;
    let cell = |column: &[f64], j: usize| column.get(j).map_or(String::new(), |&x| float(x));
    for j in 0..table.rows() {
        let mut record = vec![(j + 1).to_string()];
        record.extend(table.finite.iter().map(|c| cell(c, j)));
        record.push(cell(&table.infinite, j));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub const THROUGHPUT_HEADER: [&str; 9] = [
    "seed",
    "slots",
    "initial_battery",
    "simulated_mean",
    "std_error",
    "analytic",
    "z_score",
    "cycle_count",
    "mean_cycle_length",
];

pub fn throughput_csv<W: Write>(reports: &[ThroughputReport], out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(THROUGHPUT_HEADER)?;
    for r in reports {
        w.write_record([
            r.seed.to_string(),
            r.slots.to_string(),
            float(r.initial_battery),
            float(r.simulated_mean),
            float(r.std_error),
            float(r.analytic),
            float(r.z_score),
            r.cycle_count.to_string(),
            float(r.mean_cycle_length),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-slot dump: `index, arrival, distance, action, battery, reward`, where
/// `battery` is the level before acting.
pub fn trace_csv<W: Write>(records: &[SlotRecord], out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record([
        "index", "arrival", "distance", "action", "battery", "reward",
    ])?;
    for r in records {
        w.write_record([
            r.index.to_string(),
            u8::from(r.arrival).to_string(),
            r.distance.to_string(),
            float(r.action),
            float(r.battery),
            float(r.reward),
        ])?;
    }
    w.flush()?;
    Ok(())
}
