//! Result tables (CSV, full precision) and human-readable renderers over the
//! same values.

use std::fmt::Write as _;
use std::path::Path;

use mdiqkd_core::decoy::{Category, IntensitySet};
use mdiqkd_core::finitekey::KeyRateEstimate;
use mdiqkd_core::optimizer::OptimizationResult;

use crate::commands::{Figure1Row, Figure2Row, TableReproduction, SCENARIOS};
use crate::error::{AppError, Result};

/// Shortest representation that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// A header plus rows of cells, written as CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_numbers(&mut self, values: &[f64]) {
        self.rows.push(values.iter().map(|v| num(*v)).collect());
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| AppError::Data(format!("{}: {e}", path.display())))?;
        let wrap = |e: csv::Error| AppError::Data(format!("{}: {e}", path.display()));
        w.write_record(&self.header).map_err(wrap)?;
        for r in &self.rows {
            w.write_record(r).map_err(wrap)?;
        }
        w.flush().map_err(|e| AppError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| AppError::Data(format!("{}: {e}", path.display())))?;
        let header = r
            .headers()
            .map_err(|e| AppError::Data(e.to_string()))?
            .iter()
            .map(String::from)
            .collect();
        let rows = r
            .records()
            .map(|rec| {
                rec.map(|x| x.iter().map(String::from).collect())
                    .map_err(|e| AppError::Data(e.to_string()))
            })
            .collect::<Result<_>>()?;
        Ok(Self { header, rows })
    }

    /// Column `name` parsed as numbers.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| AppError::Data(format!("no column {name}")))?;
        self.rows
            .iter()
            .map(|r| {
                r[i].parse::<f64>()
                    .map_err(|e| AppError::Data(format!("column {name}: {e}")))
            })
            .collect()
    }
}

pub fn figure1_table(rows: &[Figure1Row]) -> Table {
    let mut t = Table::new(&["c0_sq", "e_p", "e_p_baseline"]);
    for r in rows {
        t.push_numbers(&[r.c0_sq, r.e_p, r.e_p_baseline]);
    }
    t
}

pub fn figure2_table(rows: &[Figure2Row]) -> Table {
    let mut header = vec!["fiber_km".to_string()];
    for prefix in ["R", "R_baseline", "R_four_intensity"] {
        header.extend(SCENARIOS.iter().map(|s| format!("{prefix}_{s}")));
    }
    let mut t = Table {
        header,
        rows: Vec::new(),
    };
    for r in rows {
        let mut v = vec![r.km];
        v.extend(r.key_rate);
        v.extend(r.baseline);
        v.extend(r.four_intensity);
        t.push_numbers(&v);
    }
    t
}

pub fn tables_table(rep: &TableReproduction) -> Table {
    let mut t = Table::new(&["case", "mu", "p_mu", "q_C_lower", "e_p_upper", "Q_C", "E_C", "R", "R_reported", "relative_difference"]);
    for (i, (c, r)) in rep.cases.iter().enumerate() {
        t.push_numbers(&[
            (i + 1) as f64,
            c.mu,
            c.p_mu,
            c.q_c_lower,
            c.e_p_upper,
            c.signal_gain,
            c.signal_error_rate,
            *r,
            c.reported_rate,
            (r - c.reported_rate) / c.reported_rate,
        ]);
    }
    t
}

pub fn bounds_table(est: &KeyRateEstimate) -> Table {
    let mut t = Table::new(&["category", "lower", "upper", "lower_raw", "upper_raw", "applications"]);
    for c in Category::ALL {
        let iv = est.bounds.get(c);
        let (raw_lo, raw_hi, apps) = match &est.programs {
            Some(p) => {
                let b = p.get(c);
                (b.raw_interval().lower, b.raw_interval().upper, b.applications)
            }
            None => (iv.lower, iv.upper, 0),
        };
        let mut row = vec![c.label().to_string()];
        row.extend([iv.lower, iv.upper, raw_lo, raw_hi].map(num));
        row.push(apps.to_string());
        t.rows.push(row);
    }
    t
}

pub fn summary_table(est: &KeyRateEstimate) -> Table {
    let mut t = Table::new(&["quantity", "value"]);
    let mut add = |k: &str, v: f64| t.rows.push(vec![k.to_string(), num(v)]);
    add("q_C_lower", est.q_c_lower);
    add("e_p_upper", est.phase_error.value);
    add("e_p_raw", est.phase_error.raw);
    add("c0_sq_at_max", est.phase_error.c0_sq);
    add("c0p_sq_at_max", est.phase_error.c0p_sq);
    add("Q_C_signal", est.signal_gain);
    add("E_C_signal", est.signal_error_rate);
    add("key_rate", est.key_rate);
    if let Some(c) = &est.confidence {
        add("epsilon_total", c.epsilon_total);
        add("xi", c.xi);
        add("composition_count", c.composition_count as f64);
    }
    t
}

const PARAM_NAMES: [&str; 8] = ["mu", "nu", "omega", "p_mu", "p_nu", "p_omega", "p_code_given_nu", "p_code_given_omega"];

fn param_values(s: &IntensitySet) -> [f64; 8] {
    [s.mu, s.nu, s.omega, s.p_mu, s.p_nu, s.p_omega, s.p_code_given_nu, s.p_code_given_omega]
}

/// One evaluated point per line.
pub fn trace_table(res: &OptimizationResult) -> Table {
    let mut header = vec!["restart", "evaluation"];
    header.extend(PARAM_NAMES);
    header.extend(["key_rate", "objective", "failure"]);
    let mut t = Table::new(&header);
    for p in &res.trace {
        let mut row = vec![p.restart.to_string(), p.evaluation.to_string()];
        row.extend(param_values(&p.params).map(num));
        row.push(num(p.key_rate));
        row.push(num(p.objective));
        row.push(p.failure.clone().unwrap_or_default());
        t.rows.push(row);
    }
    t
}

pub fn best_table(res: &OptimizationResult) -> Table {
    let mut t = Table::new(&["parameter", "value"]);
    for (k, v) in PARAM_NAMES.iter().zip(param_values(&res.best.alice)) {
        t.rows.push(vec![k.to_string(), num(v)]);
    }
    t.rows.push(vec!["key_rate".into(), num(res.key_rate)]);
    t.rows.push(vec!["best_restart".into(), res.best_restart.to_string()]);
    t
}

pub fn render_estimate(est: &KeyRateEstimate) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Finite-key estimate");
    if let Some(c) = &est.confidence {
        let _ = writeln!(
            s,
            "  failure budget   {:.3e} over {} one-sided bounds, {:.3e} each",
            c.epsilon_total, c.composition_count, c.xi
        );
    }
    let _ = writeln!(s, "\n  category        lower        upper");
    for c in Category::ALL {
        let iv = est.bounds.get(c);
        let _ = writeln!(s, "  {:<8} {:>12.5e} {:>12.5e}", c.label(), iv.lower, iv.upper);
    }
    let pe = &est.phase_error;
    let _ = writeln!(
        s,
        "\n  phase error upper bound  {:.4}  (at c0^2 = {:.4}, c0'^2 = {:.4}; {} evaluations)",
        pe.value, pe.c0_sq, pe.c0p_sq, pe.evaluations
    );
    let _ = writeln!(s, "  code yield lower bound   {:.4e}", est.q_c_lower);
    let _ = writeln!(s, "  signal gain              {:.4e}", est.signal_gain);
    let _ = writeln!(s, "  signal error rate        {:.4}", est.signal_error_rate);
    let _ = writeln!(s, "  key rate                 {:.4e} bits per pulse pair", est.key_rate);
    s
}

pub fn render_tables(rep: &TableReproduction) -> String {
    let mut s = String::from("Key rate from the recorded experimental inputs\n");
    let _ = writeln!(s, "  case   mu     p_mu   computed R   reported R   difference");
    for (i, (c, r)) in rep.cases.iter().enumerate() {
        let _ = writeln!(
            s,
            "  {}      {:.3}  {:.3}  {:.4e}   {:.3e}    {:+.2}%",
            i + 1,
            c.mu,
            c.p_mu,
            r,
            c.reported_rate,
            100.0 * (r - c.reported_rate) / c.reported_rate
        );
    }
    let _ = writeln!(
        s,
        "\nSimulated channel, expected counts at {:.3e} pulse pairs",
        rep.model_pairs as f64
    );
    s.push_str(&render_estimate(&rep.model));
    s
}

pub fn render_optimization(res: &OptimizationResult) -> String {
    let mut s = String::from("Optimized source parameters (both users)\n");
    for (k, v) in PARAM_NAMES.iter().zip(param_values(&res.best.alice)) {
        let _ = writeln!(s, "  {k:<20} {v:.4}");
    }
    let _ = writeln!(
        s,
        "  key rate             {:.4e}  (restart {}, {} evaluations in total)",
        res.key_rate,
        res.best_restart,
        res.trace.len()
    );
    if res.no_key {
        s.push_str("  no evaluated point gave a positive key rate\n");
    }
    s
}

pub fn render_figure1(rows: &[Figure1Row]) -> String {
    let (lo, hi) = spread(rows.iter().map(|r| r.e_p));
    let mut s = format!("Phase error over {} misalignment points\n", rows.len());
    let _ = writeln!(s, "  protocol  min {lo:.6}  max {hi:.6}  spread {:.2e}", hi - lo);
    let (blo, bhi) = spread(rows.iter().map(|r| r.e_p_baseline));
    let _ = writeln!(s, "  baseline  min {blo:.6}  max {bhi:.6}");
    s
}

pub fn render_figure2(rows: &[Figure2Row]) -> String {
    let mut s = String::from("Asymptotic key rate against fiber length\n  km    ");
    for n in SCENARIOS {
        let _ = write!(s, "{n:>12}");
    }
    s.push('\n');
    for r in rows {
        let _ = write!(s, "  {:<6}", r.km);
        for v in r.key_rate {
            let _ = write!(s, "{v:>12.4e}");
        }
        s.push('\n');
    }
    let worst = rows.iter().map(|r| relative_spread(&r.key_rate)).fold(0.0, f64::max);
    let _ = writeln!(s, "  largest relative spread across scenarios: {worst:.2e}");
    let worst4 = rows
        .iter()
        .map(|r| relative_spread(&r.four_intensity))
        .fold(0.0, f64::max);
    let _ = writeln!(s, "  same with four-intensity decoy bounds:    {worst4:.2e}");
    s
}

fn spread(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// `(max - min) / max`, zero when every value is zero.
pub fn relative_spread(values: &[f64]) -> f64 {
    let (lo, hi) = spread(values.iter().copied());
    if hi > 0.0 {
        (hi - lo) / hi
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn numbers_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = Table::new(&["a", "b"]);
        t.push_numbers(&[0.1 + 0.2, 1e-300]);
        t.push_numbers(&[-3.0, 123456789.123]);
        t.write(&path).unwrap();
        let back = Table::read(&path).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.column("a").unwrap(), vec![0.1 + 0.2, -3.0]);
        assert_eq!(relative_spread(&[0.0, 0.0]), 0.0);
        assert!((relative_spread(&[1.0, 0.5]) - 0.5).abs() < 1e-15);
    }
}
