use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde_json::json;

use super::tables::{coupling_columns, ed_block, pp_block, status_text, ED_COLUMNS, PP_COLUMNS};
use super::{FitArgs, GcArgs, MethodArg, RunConfig, SweepArgs, EXIT_OK, EXIT_PARTIAL, MAX_FAILED_FRACTION};
use crate::critical::{fit as fit_series, gc0, gc1, gc2, gc_xi, Basis, Gc2Variant};
use crate::error::{QrmError, Result};
use crate::observables::{map_row, CoincidenceMap};
use crate::store::{cached_records, lookup, save, store, GridSpec, RecordKey, SweepRecord, Tolerances};

fn num(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| QrmError::Io(std::io::Error::other(e)))?;
    let io = |e: csv::Error| QrmError::Io(std::io::Error::other(e));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("json serializes");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn cached(cfg: &RunConfig, key: &RecordKey) -> Result<Option<SweepRecord>> {
    if !cfg.use_cache {
        return Ok(None);
    }
    let hit = lookup(&cfg.cache, &key.hash())?;
    if hit.is_some() {
        log::info!("cache hit {} (ω/Ω = {})", &key.hash()[..12], key.omega / key.splitting);
    }
    Ok(hit)
}

fn sweep_key(cfg: &RunConfig, ratio: f64, grid: GridSpec, method: MethodArg, variant: Gc2Variant) -> RecordKey {
    RecordKey::new(
        "qfi-sweep",
        method.name(),
        ratio * cfg.splitting,
        cfg.splitting,
        grid,
        Tolerances::from(&cfg.qfi),
    )
    .with_option("gc2_variant", variant)
}

/// Computes the record for one frequency.
fn compute_sweep(cfg: &RunConfig, key: RecordKey, method: MethodArg, variant: Gc2Variant) -> Result<SweepRecord> {
    let points = key.grid.points();
    let (omega, splitting) = (key.omega, key.splitting);
    log::info!("sweeping ω/Ω = {} ({}, {} points)", omega / splitting, method.name(), points.len());
    let couplings = coupling_columns(omega, splitting, &points, variant)?;
    let mut blocks = Vec::new();
    if method.runs_ed() {
        blocks.push(("ed", &ED_COLUMNS[..], ed_block(omega, splitting, &points, &cfg.qfi)?));
    }
    if method.runs_pp() {
        blocks.push(("pp", &PP_COLUMNS[..], pp_block(omega, splitting, &points, &cfg.qfi)?));
    }
    let mut columns = vec!["g".to_string(), "gbar".to_string(), "g_over_gc2".to_string()];
    for (prefix, cols, _) in &blocks {
        columns.extend(cols.iter().map(|c| format!("{prefix}_{c}")));
    }
    let names: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut rec = SweepRecord::new(key, &names);
    for (k, c) in couplings.iter().enumerate() {
        let mut values: Vec<Option<f64>> = c.iter().map(|v| Some(*v)).collect();
        let mut bad = Vec::new();
        for (prefix, _, b) in &blocks {
            values.extend(b.values[k].iter().copied());
            if b.status[k] != "ok" {
                bad.push(format!("{prefix}: {}", b.status[k]));
            }
        }
        let status = if bad.is_empty() { "ok".to_string() } else { bad.join("; ") };
        rec.push_row(status, values);
    }
    for (_, _, b) in blocks {
        rec.summary.extend(b.summary);
    }
    Ok(rec)
}

pub(crate) fn qfi_sweep(cfg: &RunConfig, grid: GridSpec, a: &SweepArgs, label: &str) -> Result<i32> {
    fs::create_dir_all(&cfg.out)?;
    let (mut failed, mut total) = (0usize, 0usize);
    let mut index = Vec::new();
    for &ratio in &cfg.ratios {
        let key = sweep_key(cfg, ratio, grid, a.method, a.gc2_variant);
        let record = match cached(cfg, &key)? {
            Some(r) => r,
            None => {
                let r = compute_sweep(cfg, key, a.method, a.gc2_variant)?;
                store(&cfg.cache, &r)?;
                r
            }
        };
        failed += record.failed_rows();
        total += record.rows.len();
        let path = cfg.out.join(format!("{label}_{}_r{ratio}.csv", a.method.name()));
        save(&record, &path)?;
        println!("{}", path.display());
        index.push(json!({
            "omega_ratio": ratio,
            "hash": record.hash,
            "file": path,
            "failed_points": record.failed_rows(),
            "summary": record.summary,
        }));
    }
    write_json(&cfg.out.join(format!("{label}_{}_summary.json", a.method.name())), &json!(index))?;
    if failed as f64 > MAX_FAILED_FRACTION * total as f64 {
        eprintln!("{failed} of {total} points failed");
        return Ok(EXIT_PARTIAL);
    }
    Ok(EXIT_OK)
}

fn same_ratio(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// Cached `ḡ` estimates for a frequency ratio from the finest matching sweep.
fn cached_estimate(records: &[SweepRecord], ratio: f64, name: &str) -> Option<f64> {
    let flat_key = name.replace("gbar_cf", "peak_flat");
    records
        .iter()
        .filter(|r| r.key.kind == "qfi-sweep" && same_ratio(r.key.omega / r.key.splitting, ratio))
        .filter(|r| r.summary.get(&flat_key).is_none_or(|f| *f == 0.0))
        .filter_map(|r| r.summary.get(name).map(|v| (r.key.grid.steps, *v)))
        .max_by_key(|(steps, _)| *steps)
        .map(|(_, v)| v)
}

fn load_cache(cfg: &RunConfig) -> Result<Vec<SweepRecord>> {
    cached_records(&cfg.cache)
}

pub(crate) fn gc_table(cfg: &RunConfig, a: &GcArgs) -> Result<i32> {
    fs::create_dir_all(&cfg.out)?;
    let records = load_cache(cfg)?;
    let names = [
        "gc0",
        "gc1",
        "gcxi",
        "gc2_alphaFS",
        "gc2_fourThirds",
        "gc2_fitted",
        "g_cf_ed",
        "g_cf_pp",
        "g_a0",
    ];
    let mut header = vec!["omega_ratio".to_string()];
    for n in names {
        header.extend([n.to_string(), format!("{n}_over_gc0"), format!("{n}_over_gc2")]);
    }
    let mut rows = Vec::new();
    for &ratio in &cfg.ratios {
        let (omega, splitting) = (ratio * cfg.splitting, cfg.splitting);
        let g0 = gc0(omega, splitting)?.value;
        let g2 = gc2(omega, splitting, a.gc2_variant)?.value;
        let xi = match gc_xi(omega, splitting, a.dc1) {
            Ok(e) => Some(e.value),
            Err(e) => {
                log::warn!("gcξ at ω/Ω = {ratio}: {e}");
                None
            }
        };
        let from_cache = |n: &str| cached_estimate(&records, ratio, n).map(|gb| gb * g0);
        let values = [
            Some(g0),
            Some(gc1(omega, splitting)?.value),
            xi,
            Some(gc2(omega, splitting, Gc2Variant::AlphaFs)?.value),
            Some(gc2(omega, splitting, Gc2Variant::FourThirds)?.value),
            Some(gc2(omega, splitting, Gc2Variant::Fitted)?.value),
            from_cache("ed_gbar_cf"),
            from_cache("pp_gbar_cf"),
            from_cache("pp_gbar_a0"),
        ];
        let mut row = vec![format!("{ratio}")];
        for v in values {
            row.extend([num(v), num(v.map(|x| x / g0)), num(v.map(|x| x / g2))]);
        }
        rows.push(row);
    }
    let path = cfg.out.join("gc.csv");
    write_csv(&path, &header, &rows)?;
    println!("{}", header.join(","));
    for r in &rows {
        println!("{}", r.join(","));
    }
    eprintln!("written {}", path.display());
    Ok(EXIT_OK)
}

pub(crate) fn fit(cfg: &RunConfig, a: &FitArgs) -> Result<i32> {
    fs::create_dir_all(&cfg.out)?;
    let records = load_cache(cfg)?;
    let sources: &[&str] = match a.method {
        MethodArg::Ed => &["ed"],
        MethodArg::Pp => &["pp"],
        MethodArg::Both => &["ed", "pp"],
    };
    let mut ratios: Vec<f64> = if a.common.omega_ratio.is_empty() {
        records
            .iter()
            .filter(|r| r.key.kind == "qfi-sweep")
            .map(|r| r.key.omega / r.key.splitting)
            .collect()
    } else {
        cfg.ratios.clone()
    };
    ratios.sort_by(f64::total_cmp);
    ratios.dedup_by(|x, y| same_ratio(*x, *y));
    let data: Vec<(f64, f64)> = ratios
        .iter()
        .filter_map(|&r| {
            sources
                .iter()
                .find_map(|s| cached_estimate(&records, r, &format!("{s}_gbar_cf")))
                .map(|gb| (r, gb - 1.0))
        })
        .collect();
    if data.len() < 3 {
        return Err(QrmError::domain(format!(
            "only {} cached peak couplings found in {}; run qfi-sweep first",
            data.len(),
            cfg.cache.display()
        )));
    }
    let mut fits = Vec::new();
    for basis in [Basis::Fractional, Basis::Integer] {
        for order in 2..=a.max_order {
            match fit_series(&data, order, basis) {
                Ok(f) => {
                    println!("{basis} n_f={order}: residual {:.3e}, c1 = {:.6}", f.residual, f.coefficients[0]);
                    fits.push(json!({
                        "basis": basis.to_string(),
                        "order": order,
                        "coefficients": f.coefficients,
                        "residual": f.residual,
                    }));
                }
                Err(e) => fits.push(json!({"basis": basis.to_string(), "order": order, "error": status_text(&e)})),
            }
        }
    }
    let path = cfg.out.join("fit.json");
    write_json(&path, &json!({"source": a.method.name(), "data": data, "fits": fits}))?;
    eprintln!("written {}", path.display());
    Ok(EXIT_OK)
}

fn map_row_cached(cfg: &RunConfig, ratio: f64, grid: GridSpec, points: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let key = RecordKey::new("map-row", "ed", ratio, 1.0, grid, Tolerances::from(&cfg.qfi));
    if let Some(r) = cached(cfg, &key)? {
        let col = |n: &str| -> Option<Vec<f64>> { r.column(n)?.into_iter().collect() };
        if let (Some(f), Some(s)) = (col("f_q_gbar"), col("d_abs_x_dg")) {
            return Ok((f, s));
        }
    }
    let (f, s) = map_row(ratio, points, &cfg.qfi)?;
    let mut rec = SweepRecord::new(key, &["gbar", "f_q_gbar", "d_abs_x_dg"]);
    for k in 0..points.len() {
        rec.push_ok(vec![points[k], f[k], s[k]]);
    }
    store(&cfg.cache, &rec)?;
    Ok((f, s))
}

pub(crate) fn map(cfg: &RunConfig, grid: GridSpec) -> Result<i32> {
    fs::create_dir_all(&cfg.out)?;
    let mut ratios = cfg.ratios.clone();
    ratios.sort_by(f64::total_cmp);
    ratios.dedup();
    let points = grid.points();
    let rows: Vec<Result<(Vec<f64>, Vec<f64>)>> = ratios
        .par_iter()
        .map(|&r| map_row_cached(cfg, r, grid, &points))
        .collect();
    let m = CoincidenceMap::from_rows(&ratios, &points, rows)?;
    let mut header = vec!["omega_ratio".to_string()];
    header.extend(points.iter().map(|g| format!("{g:.6}")));
    for (name, data) in [("map_qfi.csv", &m.qfi), ("map_susceptibility.csv", &m.susceptibility)] {
        let rows: Vec<Vec<String>> = ratios
            .iter()
            .zip(data)
            .map(|(r, v)| {
                let mut row = vec![format!("{r:.16e}")];
                if v.is_empty() {
                    row.extend(points.iter().map(|_| String::new()));
                } else {
                    row.extend(v.iter().map(|x| num(Some(*x))));
                }
                row
            })
            .collect();
        write_csv(&cfg.out.join(name), &header, &rows)?;
    }
    let overlay_header: Vec<String> = ["omega_ratio", "gc0", "gc2", "qfi_argmax", "susceptibility_argmax", "status"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let overlay: Vec<Vec<String>> = (0..ratios.len())
        .map(|i| {
            vec![
                format!("{:.16e}", ratios[i]),
                num(Some(m.gc0_overlay[i])),
                num(Some(m.gc2_overlay[i])),
                num(m.qfi_argmax[i]),
                num(m.susceptibility_argmax[i]),
                if m.failed_rows.contains(&i) { "failed" } else { "ok" }.to_string(),
            ]
        })
        .collect();
    write_csv(&cfg.out.join("map_overlays.csv"), &overlay_header, &overlay)?;
    println!("{}", cfg.out.join("map_overlays.csv").display());
    if m.failed_rows.len() as f64 > MAX_FAILED_FRACTION * ratios.len() as f64 {
        eprintln!("{} of {} rows failed", m.failed_rows.len(), ratios.len());
        return Ok(EXIT_PARTIAL);
    }
    Ok(EXIT_OK)
}
