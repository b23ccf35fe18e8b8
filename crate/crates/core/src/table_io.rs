//! On-disk form of the electronic-structure table: a columnar CSV with the
//! numeric payload next to a JSON header with parameters and grid metadata.
//! Floats are printed withated 17 significant digits, which round-trips f64
//! exactly.

use std::io::Write;
use std::path::Path;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::shin_metiu::{ElectronicStructureTable, ShinMetiuParams};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableHeader {
    pub params: ShinMetiuParams,
    pub x_grid: GridSpec,
    pub r_grid: GridSpec,
    pub n_states: usize,
}

/// Exact-decimal float formatting (17 significant digits).
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_table(table: &ElectronicStructureTable, csv_path: &Path) -> Result<()> {
    let header = TableHeader {
        params: table.params,
        x_grid: table.x_spec,
        r_grid: table.r_grid().spec(),
        n_states: table.n_states,
    };
    let json_path = csv_path.with_extension("json");
    let json = serde_json::to_string_pretty(&header)
        .map_err(|e| Error::Parse(format!("header serialization: {e}")))?;
    std::fs::write(&json_path, json)?;

    let mut out = std::io::BufWriter::new(std::fs::File::create(csv_path)?);
    let n = table.n_states;
    let mut cols = vec!["r".to_string()];
    for s in 0..n {
        cols.push(format!("v_{s}"));
    }
    for a in 0..n {
        for b in a..n {
            cols.push(format!("mu_{a}_{b}"));
        }
    }
    cols.push("alpha_0".to_string());
    writeln!(out, "{}", cols.join(","))?;
    for i in 0..table.n_r() {
        let mut row = Vec::with_capacity(cols.len());
        row.push(format_f64(table.r_nodes()[i]));
        for s in 0..n {
            row.push(format_f64(table.v_at(i, s)));
        }
        let mu = table.mu_at(i);
        for a in 0..n {
            for b in a..n {
                row.push(format_f64(mu[(a, b)]));
            }
        }
        row.push(format_f64(table.alpha0()[i]));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_table(csv_path: &Path) -> Result<ElectronicStructureTable> {
    let json_path = csv_path.with_extension("json");
    let header: TableHeader = serde_json::from_str(&std::fs::read_to_string(&json_path)?)
        .map_err(|e| Error::Parse(format!("header parse: {e}")))?;
    let r_grid = header.r_grid.build()?;
    let text = std::fs::read_to_string(csv_path)?;
    let mut lines = text.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Parse("empty table CSV".into()))?;
    let n = header.n_states;
    let expected_cols = 1 + n + n * (n + 1) / 2 + 1;
    if first.split(',').count() != expected_cols {
        return Err(Error::Parse(format!(
            "column count mismatch: {} vs expected {expected_cols}",
            first.split(',').count()
        )));
    }
    let n_r = r_grid.len();
    let mut v = Mat::<f64>::zeros(n_r, n);
    let mut mu = vec![Mat::<f64>::zeros(n, n); n_r];
    let mut alpha0 = vec![0.0; n_r];
    let mut count = 0usize;
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if i >= n_r {
            return Err(Error::Parse("more rows than grid nodes".into()));
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad float '{s}': {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if vals.len() != expected_cols {
            return Err(Error::Parse(format!("row {i} has {} fields", vals.len())));
        }
        let r_expected = r_grid.nodes()[i];
        if (vals[0] - r_expected).abs() > 1e-12 * (1.0 + r_expected.abs()) {
            return Err(Error::Parse(format!(
                "row {i}: R = {} does not match the rebuilt grid node {r_expected}",
                vals[0]
            )));
        }
        let mut k = 1;
        for s in 0..n {
            v[(i, s)] = vals[k];
            k += 1;
        }
        for a in 0..n {
            for b in a..n {
                mu[i][(a, b)] = vals[k];
                mu[i][(b, a)] = vals[k];
                k += 1;
            }
        }
        alpha0[i] = vals[k];
        count += 1;
    }
    if count != n_r {
        return Err(Error::Parse(format!(
            "table has {count} rows, grid has {n_r} nodes"
        )));
    }
    Ok(ElectronicStructureTable::from_parts(
        header.params,
        header.x_grid,
        n,
        r_grid,
        v,
        mu,
        alpha0,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::shin_metiu::bo_scan;
    use proptest::prelude::*;

    #[test]
    fn table_round_trip_is_bit_exact() {
        let p = ShinMetiuParams::default();
        let gx = build_grid([-18.0, 18.0], 14, 6).unwrap();
        let gr = build_grid([-6.0, 6.0], 8, 5).unwrap();
        let table = bo_scan(&p, &gx, &gr, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("table.csv");
        write_table(&table, &path).unwrap();
        let back = read_table(&path).unwrap();
        assert_eq!(back.n_states, table.n_states);
        for i in 0..table.n_r() {
            for s in 0..table.n_states {
                assert!(back.v_at(i, s) == table.v_at(i, s), "bit-exact V");
            }
            for a in 0..table.n_states {
                for b in 0..table.n_states {
                    assert!(back.mu_at(i)[(a, b)] == table.mu_at(i)[(a, b)]);
                }
            }
            assert!(back.alpha0()[i] == table.alpha0()[i]);
        }
    }

    proptest! {
        #[test]
        fn float_format_round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let s = format_f64(x);
            let back: f64 = s.parse().unwrap();
            prop_assert!(back == x || (back.is_nan() && x.is_nan()));
        }
    }
}
