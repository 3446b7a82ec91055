use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use super::sweep::SweepSummary;
use crate::error::{Error, Result};
use crate::localize::PolynomialField;

fn plot_err<E: std::error::Error + Send + Sync>(e: DrawingAreaErrorKind<E>) -> Error {
    Error::Format(format!("plot: {e}"))
}

/// One success-rate curve per swept axis, as `rate_<axis>.csv` and
/// `rate_<axis>.svg`. A summary without swept axes produces a warning and
/// no files.
pub fn emit_plots(summary: &SweepSummary, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if summary.axes.is_empty() {
        eprintln!("warning: sweep has no swept axes; no plots written");
        return Ok(vec![]);
    }
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for axis in &summary.axes {
        let csv_path = out_dir.join(format!("rate_{}.csv", axis.axis));
        let mut w = csv::Writer::from_path(&csv_path)?;
        w.write_record([axis.axis.as_str(), "rate", "stderr"])?;
        for k in 0..axis.values.len() {
            w.write_record([axis.values[k].to_string(), axis.rates[k].to_string(), axis.stderrs[k].to_string()])?;
        }
        w.flush()?;
        written.push(csv_path);

        let svg_path = out_dir.join(format!("rate_{}.svg", axis.axis));
        {
            let root = SVGBackend::new(&svg_path, (480, 360)).into_drawing_area();
            root.fill(&WHITE).map_err(plot_err)?;
            let lo = axis.values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = axis.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let pad = if hi > lo { 0.05 * (hi - lo) } else { 1.0 };
            let mut chart = ChartBuilder::on(&root)
                .caption(format!("success rate vs {}", axis.axis), ("sans-serif", 18))
                .margin(12)
                .x_label_area_size(32)
                .y_label_area_size(40)
                .build_cartesian_2d((lo - pad)..(hi + pad), -0.02f64..1.02f64)
                .map_err(plot_err)?;
            chart.configure_mesh().x_desc(axis.axis.as_str()).y_desc("rate").draw().map_err(plot_err)?;
            let pts: Vec<(f64, f64)> = axis.values.iter().copied().zip(axis.rates.iter().copied()).collect();
            chart.draw_series(LineSeries::new(pts.clone(), BLUE.stroke_width(2))).map_err(plot_err)?;
            chart.draw_series(pts.iter().map(|&p| Circle::new(p, 3, BLUE.filled()))).map_err(plot_err)?;
            for (k, &(x, r)) in pts.iter().enumerate() {
                let se = axis.stderrs[k];
                chart.draw_series(LineSeries::new([(x, r - se), (x, r + se)], BLACK)).map_err(plot_err)?;
            }
            root.present().map_err(plot_err)?;
        }
        written.push(svg_path);
    }
    Ok(written)
}

/// Fixed-β delay–Doppler slices of `field`, one per entry of `betas`,
/// each as a `τ × ν` CSV grid (rows ν, columns τ) and an SVG heat map.
pub fn emit_field_slices(field: &PolynomialField, betas: &[f64], out_dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let [gt, gn, gb] = field.grid;
    let vmax = field.max().max(f64::MIN_POSITIVE);
    let mut written = Vec::new();
    for (k, &beta) in betas.iter().enumerate() {
        let c = ((crate::model::wrap01(beta) * gb as f64).round() as usize) % gb;
        let csv_path = out_dir.join(format!("{prefix}_slice{k}.csv"));
        let mut f = fs::File::create(&csv_path)?;
        writeln!(f, "# beta={:.6} grid={}x{} rows=nu cols=tau", c as f64 / gb as f64, gt, gn)?;
        for b in 0..gn {
            let row: Vec<String> = (0..gt).map(|a| format!("{:.9e}", field.at(a, b, c))).collect();
            writeln!(f, "{}", row.join(","))?;
        }
        written.push(csv_path);

        let svg_path = out_dir.join(format!("{prefix}_slice{k}.svg"));
        {
            let root = SVGBackend::new(&svg_path, (gt.max(64) as u32 * 4, gn.max(64) as u32 * 4)).into_drawing_area();
            root.fill(&WHITE).map_err(plot_err)?;
            let cells = root.split_evenly((gn, gt));
            for (i, area) in cells.iter().enumerate() {
                // top row is the largest ν
                let (b, a) = (gn - 1 - i / gt, i % gt);
                let v = (field.at(a, b, c) / vmax).clamp(0.0, 1.0);
                area.fill(&ViridisRGB::get_color(v)).map_err(plot_err)?;
            }
            root.present().map_err(plot_err)?;
        }
        written.push(svg_path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::sweep::AxisSummary;

    #[test]
    fn empty_sweep_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let s = SweepSummary { cells: vec![], axes: vec![], total_trials: 0, resumed_trials: 0 };
        assert!(emit_plots(&s, dir.path()).unwrap().is_empty());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn one_curve_per_axis() {
        let dir = tempfile::tempdir().unwrap();
        let axis = |name: &str| AxisSummary {
            axis: name.into(),
            values: vec![5.0, 7.0, 9.0],
            rates: vec![0.2, 0.6, 1.0],
            stderrs: vec![0.1, 0.1, 0.0],
            violations: vec![],
            monotone: true,
        };
        let s = SweepSummary { cells: vec![], axes: vec![axis("m"), axis("p")], total_trials: 0, resumed_trials: 0 };
        let files = emit_plots(&s, dir.path()).unwrap();
        assert_eq!(files.len(), 4);
        let svg = fs::read_to_string(dir.path().join("rate_m.svg")).unwrap();
        assert!(svg.starts_with("<svg"));
        let csv = fs::read_to_string(dir.path().join("rate_p.csv")).unwrap();
        assert_eq!(csv.lines().next().unwrap(), "p,rate,stderr");
    }
}
