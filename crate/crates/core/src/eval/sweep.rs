use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::format_sig;

/// One point of a parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub variable: String,
    pub value: f64,
    pub rmse: f64,
    pub ndcg: f64,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares `y ≈ slope·x + intercept` with coefficient of
/// determination. Needs two distinct x values.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidArgument("linear fit needs at least two points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("linear fit needs distinct x values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(LinearFit { slope, intercept, r2 })
}

/// Writes `<stem>.tsv` (one row per result) and two-column series files
/// `<stem>_rmse.tsv` / `<stem>_ndcg.tsv` keyed by the swept value.
pub fn write_sweep(rows: &[SweepRow], dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("sweep report needs at least one result".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let var = &rows[0].variable;
    let mut table = format!("{var}\trmse\tndcg\tlabel\n");
    let mut rmse = format!("{var}\trmse\n");
    let mut ndcg = format!("{var}\tndcg\n");
    for r in rows {
        let v = format_sig(r.value, 12);
        table.push_str(&format!("{v}\t{}\t{}\t{}\n", format_sig(r.rmse, 12), format_sig(r.ndcg, 12), r.label));
        rmse.push_str(&format!("{v}\t{}\n", format_sig(r.rmse, 12)));
        ndcg.push_str(&format!("{v}\t{}\n", format_sig(r.ndcg, 12)));
    }
    let mut out = Vec::new();
    for (suffix, body) in [("", table), ("_rmse", rmse), ("_ndcg", ndcg)] {
        let path = dir.join(format!("{stem}{suffix}.tsv"));
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        out.push(path);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_has_unit_r2() {
        let f = linear_fit(&[1.0, 2.0, 4.0], &[3.0, 5.0, 9.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        let g = linear_fit(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!(g.r2 < 1.0 && g.r2 > 0.0);
        assert!(linear_fit(&[1.0, 1.0], &[2.0, 3.0]).is_err());
    }

    #[test]
    fn sweep_tables() {
        let dir = tempfile::tempdir().unwrap();
        let rows: Vec<SweepRow> = (1..=5)
            .map(|t| SweepRow { variable: "T".into(), value: t as f64, rmse: 0.1 / t as f64, ndcg: 0.5, label: format!("t{t}") })
            .collect();
        let files = write_sweep(&rows, dir.path(), "t_sweep").unwrap();
        let table = fs::read_to_string(&files[0]).unwrap();
        assert_eq!(table.lines().count(), 6);
        assert!(table.starts_with("T\trmse\tndcg\tlabel\n1\t0.1\t0.5\tt1\n"));
        let one = write_sweep(&rows[..1], dir.path(), "single").unwrap();
        assert_eq!(fs::read_to_string(&one[0]).unwrap().lines().count(), 2);
        assert!(write_sweep(&[], dir.path(), "x").is_err());
    }
}
