use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Algo;
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 6] = [
    "t",
    "realized_return",
    "expected_value",
    "hindsight_cum",
    "regret_cum",
    "epoch",
];

/// One episode of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    /// Episode number, starting at 1.
    pub t: u64,
    /// Return collected along the sampled trajectory.
    pub realized_return: f64,
    /// Exact value of the policy played in this episode, under the true kernel.
    pub expected_value: f64,
    /// Best static total value over episodes `1..=t`.
    pub hindsight_cum: f64,
    /// `hindsight_cum` minus the summed expected values over `1..=t`.
    pub regret_cum: f64,
    /// Global epoch the episode belonged to (always 1 for static players).
    pub epoch: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    /// `R_T` against the best static policy for the whole sequence.
    pub final_regret: f64,
    /// Number of epochs `m(T)`.
    pub epochs: u64,
    pub wall_time_s: f64,
    /// Whether the optimism event held at every episode (learners only).
    pub optimism_held: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub algo: Algo,
    pub seed: u64,
    pub rows: Vec<TraceRow>,
    pub summary: TraceSummary,
}

impl RegretTrace {
    /// `regret_cum` column as a vector.
    pub fn regret_curve(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.regret_cum).collect()
    }
}

/// `%.17g`: seventeen significant digits, enough to round-trip any `f64`.
pub fn format_g17(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp) as usize;
        let fixed = format!("{:.*}", decimals, x);
        if fixed.contains('.') {
            fixed
                .trim_end_matches('0')
                .trim_end_matches('.')
                .to_string()
        } else {
            fixed
        }
    } else {
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{mantissa}e{exp}")
    }
}

/// Writes the per-episode rows as CSV.
pub fn emit_csv(trace: &RegretTrace, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(CSV_HEADER)?;
        for r in &trace.rows {
            w.write_record([
                r.t.to_string(),
                format_g17(r.realized_return),
                format_g17(r.expected_value),
                format_g17(r.hindsight_cum),
                format_g17(r.regret_cum),
                r.epoch.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Parses a file written by [`emit_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::invalid(format!(
            "{}: unexpected header {header:?}",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for record in reader.deserialize() {
        rows.push(record?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn g17_examples() {
        assert_eq!(format_g17(0.0), "0");
        assert_eq!(format_g17(1.0), "1");
        assert_eq!(format_g17(0.1), "0.10000000000000001");
        assert_eq!(format_g17(-2.5), "-2.5");
        assert_eq!(format_g17(123456.0), "123456");
        assert_eq!(format_g17(1e-7), "9.9999999999999995e-8");
        assert_eq!(format_g17(1e20), "1e20");
    }

    proptest! {
        #[test]
        fn g17_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
            let back: f64 = format_g17(x).parse().unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }
}
