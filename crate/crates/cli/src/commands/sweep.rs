//! Design-space sweeps over the canceller families.
//!
//! For each grid cell the canceller is fitted or trained from scratch and
//! scored on the test split; the emitted matrices pair cancellation with
//! the closed-form multiplication count. Two operating points are selected
//! the way the published comparison does it: the cheapest configuration
//! within a fixed back-off of the family maximum (`peak`), and, for the
//! network family relative to the polynomial maximum, the cheapest
//! configuration at least as good (`equi`).

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use sic_core::metrics::{complexity, ComplexitySpec};
use sic_core::opcount::OpCounter;
use sic_core::sigmodel::Dataset;
use sic_core::{lincanc, nncanc, polycanc, Complex64};

use crate::config::Resolved;
use crate::CliError;

use super::{cdb_test, csv_provenance, load_dataset, write_text};

/// One evaluated grid cell.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Cell {
    pub l: u32,
    /// Order for the polynomial family, hidden width for the network family.
    pub dim: u32,
    pub c_db: f64,
    pub n_mul: u64,
}

/// Cheapest cell whose cancellation is within `backoff_db` of the family
/// maximum; ties break toward the lexicographically smallest `(l, dim)`.
pub fn select_peak(cells: &[Cell], backoff_db: f64) -> Option<Cell> {
    let max = cells.iter().map(|c| c.c_db).fold(f64::NEG_INFINITY, f64::max);
    cells
        .iter()
        .filter(|c| c.c_db >= max - backoff_db)
        .min_by(|a, b| {
            (a.n_mul, a.l, a.dim)
                .cmp(&(b.n_mul, b.l, b.dim))
        })
        .copied()
}

/// Cheapest cell with cancellation at least `reference_db`; none when the
/// family never reaches the reference.
pub fn select_equi(cells: &[Cell], reference_db: f64) -> Option<Cell> {
    cells
        .iter()
        .filter(|c| c.c_db >= reference_db)
        .min_by(|a, b| (a.n_mul, a.l, a.dim).cmp(&(b.n_mul, b.l, b.dim)))
        .copied()
}

#[derive(Serialize)]
struct Selection {
    config_hash: String,
    backoff_db: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    poly_peak: Option<Cell>,
    #[serde(skip_serializing_if = "Option::is_none")]
    poly_max_c_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nn_peak: Option<Cell>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nn_equi: Option<Cell>,
}

fn poly_cell(ds: &Dataset, l: u32, p: u32) -> Result<Cell, CliError> {
    let x = ds.x.samples();
    let split = ds.split_index;
    let mut ops = OpCounter::new();
    let lin = lincanc::fit_linear(&x[..split], &ds.y.samples()[..split], l as usize)?;
    let lin_hat = lincanc::apply_linear(&lin, x, &mut ops);
    let residual: Vec<Complex64> = ds.y.samples()[..split]
        .iter()
        .zip(&lin_hat.samples[..split])
        .map(|(a, b)| a - b)
        .collect();
    let model = polycanc::fit_poly(&x[..split], &residual, p, l)?;
    let poly_hat = polycanc::apply_poly(&model, x, &mut ops);
    let total: Vec<Complex64> =
        lin_hat.samples.iter().zip(&poly_hat.samples).map(|(a, b)| a + b).collect();
    let c_db = cdb_test(ds, &total, l as usize - 1)?;
    let n_mul = complexity(ComplexitySpec::Poly { l, p })
        .map_err(|e| CliError::Config(e.to_string()))?
        .n_mul;
    Ok(Cell { l, dim: p, c_db, n_mul })
}

fn nn_cell(
    ds: &Dataset,
    l: u32,
    n_h: u32,
    n_l: u32,
    tc: &sic_core::nncanc::TrainConfig,
) -> Result<Cell, CliError> {
    let outcome =
        nncanc::train(ds, l, n_l, n_h, tc).map_err(|e| CliError::Data(e.to_string()))?;
    let mut ops = OpCounter::new();
    let hybrid = nncanc::apply_hybrid(&outcome.model, ds.x.samples(), &mut ops);
    let c_db = cdb_test(ds, &hybrid.samples, l as usize - 1)?;
    let n_mul = complexity(ComplexitySpec::Nn { l, n_l, n_h })
        .map_err(|e| CliError::Config(e.to_string()))?
        .n_mul;
    Ok(Cell { l, dim: n_h, c_db, n_mul })
}

fn matrix_csv(hash: u64, col_name: &str, cols: &[u32], rows: &[u32], cells: &[Cell], pick_mul: bool) -> String {
    let mut out = csv_provenance(hash);
    out.push_str("l");
    for c in cols {
        out.push_str(&format!(",{col_name}{c}"));
    }
    out.push('\n');
    for &l in rows {
        out.push_str(&l.to_string());
        for &c in cols {
            let cell = cells.iter().find(|x| x.l == l && x.dim == c).expect("grid is complete");
            if pick_mul {
                out.push_str(&format!(",{}", cell.n_mul));
            } else {
                out.push_str(&format!(",{}", cell.c_db));
            }
        }
        out.push('\n');
    }
    out
}

pub fn run(
    r: &Resolved,
    out_dir: &Path,
    dataset: &Path,
    family_flag: Option<&str>,
) -> Result<(), CliError> {
    let family = family_flag
        .map(str::to_string)
        .or_else(|| r.cfg.sweep.family.clone())
        .unwrap_or_else(|| "all".into());
    let ds = load_dataset(dataset)?;
    let hash = r.config_hash("sweep");
    let backoff = r.cfg.sweep.backoff_db.unwrap_or(1.0);
    let n_l = r.cfg.cancellers.nn_n_l.unwrap_or(r.defaults.cancellers.n_l);
    let tc = r.train_config();

    let run_poly = family == "poly" || family == "all";
    let run_nn = family == "nn" || family == "all";
    if !run_poly && !run_nn {
        return Err(CliError::Config(format!(
            "unknown sweep family '{family}' (expected 'poly', 'nn' or 'all')"
        )));
    }

    let mut selection = Selection {
        config_hash: format!("0x{hash:016x}"),
        backoff_db: backoff,
        poly_peak: None,
        poly_max_c_db: None,
        nn_peak: None,
        nn_equi: None,
    };

    if run_poly {
        let l_values =
            r.cfg.sweep.l_values.clone().unwrap_or_else(|| (2..=10).collect::<Vec<u32>>());
        let p_values = r.cfg.sweep.p_values.clone().unwrap_or_else(|| vec![3, 5, 7, 9]);
        if l_values.is_empty() || p_values.is_empty() {
            return Err(CliError::Config("polynomial sweep grid is empty".into()));
        }
        let grid: Vec<(u32, u32)> = l_values
            .iter()
            .flat_map(|&l| p_values.iter().map(move |&p| (l, p)))
            .collect();
        let cells: Vec<Cell> = grid
            .par_iter()
            .map(|&(l, p)| poly_cell(&ds, l, p))
            .collect::<Result<_, _>>()?;
        write_text(
            &out_dir.join("sweep_poly_cdb.csv"),
            &matrix_csv(hash, "p", &p_values, &l_values, &cells, false),
        )?;
        write_text(
            &out_dir.join("sweep_poly_nmul.csv"),
            &matrix_csv(hash, "p", &p_values, &l_values, &cells, true),
        )?;
        selection.poly_max_c_db =
            Some(cells.iter().map(|c| c.c_db).fold(f64::NEG_INFINITY, f64::max));
        selection.poly_peak = select_peak(&cells, backoff);
        println!("poly grid: {} cells", cells.len());
    }

    if run_nn {
        let l_values = r
            .cfg
            .sweep
            .l_values
            .clone()
            .unwrap_or_else(|| vec![2, 4, 6, 8, 10]);
        let n_h_values = r
            .cfg
            .sweep
            .n_h_values
            .clone()
            .unwrap_or_else(|| (6..=40).step_by(2).map(|v| v as u32).collect());
        if l_values.is_empty() || n_h_values.is_empty() {
            return Err(CliError::Config("network sweep grid is empty".into()));
        }
        let grid: Vec<(u32, u32)> = l_values
            .iter()
            .flat_map(|&l| n_h_values.iter().map(move |&h| (l, h)))
            .collect();
        let cells: Vec<Cell> = grid
            .par_iter()
            .map(|&(l, h)| nn_cell(&ds, l, h, n_l, &tc))
            .collect::<Result<_, _>>()?;
        write_text(
            &out_dir.join("sweep_nn_cdb.csv"),
            &matrix_csv(hash, "nh", &n_h_values, &l_values, &cells, false),
        )?;
        write_text(
            &out_dir.join("sweep_nn_nmul.csv"),
            &matrix_csv(hash, "nh", &n_h_values, &l_values, &cells, true),
        )?;
        selection.nn_peak = select_peak(&cells, backoff);
        if let Some(reference) = selection.poly_max_c_db {
            selection.nn_equi = select_equi(&cells, reference);
        }
        println!("nn grid: {} cells", cells.len());
    }

    write_text(
        &out_dir.join("sweep_selection.json"),
        &serde_json::to_string_pretty(&selection).expect("selection serializes"),
    )?;
    if let Some(p) = &selection.poly_peak {
        println!("poly peak: L={}, P={} ({:.2} dB, {} mul)", p.l, p.dim, p.c_db, p.n_mul);
    }
    if let Some(p) = &selection.nn_peak {
        println!("nn peak:   L={}, N_h={} ({:.2} dB, {} mul)", p.l, p.dim, p.c_db, p.n_mul);
    }
    if let Some(p) = &selection.nn_equi {
        println!("nn equi:   L={}, N_h={} ({:.2} dB, {} mul)", p.l, p.dim, p.c_db, p.n_mul);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(l: u32, dim: u32, c_db: f64, n_mul: u64) -> Cell {
        Cell { l, dim, c_db, n_mul }
    }

    #[test]
    fn peak_selection_prefers_cheapest_within_backoff() {
        // Hand-built grid with a known unique optimum: the 30.2 dB cell is
        // within 1 dB of the 31.0 maximum and much cheaper.
        let grid = vec![
            cell(2, 3, 28.0, 50),
            cell(3, 7, 30.2, 180),
            cell(9, 9, 31.0, 1200),
            cell(10, 9, 30.9, 1400),
        ];
        let pick = select_peak(&grid, 1.0).unwrap();
        assert_eq!((pick.l, pick.dim), (3, 7));
    }

    #[test]
    fn equi_selection_needs_the_reference_level() {
        let grid = vec![cell(2, 8, 32.3, 60), cell(4, 34, 37.6, 364), cell(2, 6, 29.0, 46)];
        let pick = select_equi(&grid, 30.5).unwrap();
        assert_eq!((pick.l, pick.dim), (2, 8));
        assert!(select_equi(&grid, 40.0).is_none());
    }
}
