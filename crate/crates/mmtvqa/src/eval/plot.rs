//! Rendering training-log loss curves to a standalone SVG line chart.

use std::path::Path;

use crate::error::{Error, Result};
use crate::train::trainer::EpochRecord;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;

struct Series<'a> {
    label: &'a str,
    color: &'a str,
    values: Vec<f64>,
}

fn polyline(values: &[f64], lo: f64, hi: f64) -> String {
    let span = (hi - lo).max(1e-12);
    let n = values.len().max(2) as f64;
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let x = MARGIN + (WIDTH - 2.0 * MARGIN) * i as f64 / (n - 1.0);
            let y = HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v - lo) / span;
            format!("{x:.1},{y:.1}")
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Render the two loss curves of a training log as an SVG chart.
pub fn render_loss_svg(records: &[EpochRecord]) -> Result<String> {
    if records.is_empty() {
        return Err(Error::Argument("training log has no epochs".into()));
    }
    let series = [
        Series {
            label: "translation loss",
            color: "#3566b0",
            values: records.iter().map(|r| r.mmt_loss).collect(),
        },
        Series {
            label: "answering loss",
            color: "#c03a3a",
            values: records.iter().map(|r| r.vqa_loss).collect(),
        },
    ];
    let lo = series.iter().flat_map(|s| s.values.iter()).cloned().fold(f64::INFINITY, f64::min);
    let hi = series.iter().flat_map(|s| s.values.iter()).cloned().fold(f64::NEG_INFINITY, f64::max);

    let mut svg = format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "viewBox=\"0 0 {w} {h}\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<line x1=\"{m}\" y1=\"{ybot}\" x2=\"{xr}\" y2=\"{ybot}\" stroke=\"#333\"/>\n",
            "<line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{ybot}\" stroke=\"#333\"/>\n",
            "<text x=\"{xmid}\" y=\"{h}\" dy=\"-10\" text-anchor=\"middle\" ",
            "font-family=\"sans-serif\" font-size=\"13\">epoch</text>\n",
        ),
        w = WIDTH,
        h = HEIGHT,
        m = MARGIN,
        ybot = HEIGHT - MARGIN,
        xr = WIDTH - MARGIN,
        xmid = WIDTH / 2.0,
    );
    svg.push_str(&format!(
        "<text x=\"{m}\" y=\"{m}\" dy=\"-8\" font-family=\"sans-serif\" font-size=\"13\">loss (min {lo:.3}, max {hi:.3}, {n} epochs)</text>\n",
        m = MARGIN,
        n = records.len(),
    ));
    for (i, s) in series.iter().enumerate() {
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n",
            s.color,
            polyline(&s.values, lo, hi)
        ));
        let y = MARGIN + 18.0 * i as f64 + 14.0;
        svg.push_str(&format!(
            "<rect x=\"{x}\" y=\"{ry}\" width=\"12\" height=\"12\" fill=\"{c}\"/>\n<text x=\"{tx}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"12\">{label}</text>\n",
            x = WIDTH - MARGIN - 160.0,
            ry = y - 10.0,
            c = s.color,
            tx = WIDTH - MARGIN - 142.0,
            ty = y,
            label = s.label,
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Read a training-log CSV and write the SVG chart.
pub fn plot_loss_file(log_csv: &Path, out_svg: &Path) -> Result<()> {
    let text = std::fs::read_to_string(log_csv)
        .map_err(|e| Error::io(log_csv.display().to_string(), e))?;
    let records = crate::train::trainer::TrainLog::parse_csv(&text)?;
    let svg = render_loss_svg(&records)?;
    std::fs::write(out_svg, svg).map_err(|e| Error::io(out_svg.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_contains_both_series() {
        let records: Vec<EpochRecord> = (1..=5)
            .map(|epoch| EpochRecord {
                epoch,
                mmt_loss: 10.0 / epoch as f64,
                vqa_loss: 3.0 / epoch as f64,
                val_score: 1.0,
                lr: 0.001,
            })
            .collect();
        let svg = render_loss_svg(&records).unwrap();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("translation loss"));
        assert!(svg.contains("answering loss"));
    }

    #[test]
    fn empty_log_is_an_error() {
        assert!(render_loss_svg(&[]).is_err());
    }
}
