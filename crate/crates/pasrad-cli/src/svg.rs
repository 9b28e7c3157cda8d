//! Minimal static SVG line plots for curve CSV data. The CSV is the
//! contract; this renderer is a convenience view over the same points.

use pasrad_core::detectors::DetectorKind;
use pasrad_core::montecarlo::CurvePoint;
use std::collections::BTreeMap;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 130.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

/// Renders one series per detector; probabilities on a log axis for
/// false-alarm curves, linear for detection curves.
pub fn render_curve_svg(points: &[CurvePoint], title: &str, log_y: bool) -> String {
    let mut series: BTreeMap<DetectorKind, Vec<(f64, f64)>> = BTreeMap::new();
    for p in points {
        series
            .entry(p.detector)
            .or_default()
            .push((p.sweep_db, p.estimate));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.sweep_db).collect();
    let (x_min, x_max) = bounds(&xs, 0.0, 1.0);
    let floor = 1.0 / points.iter().map(|p| p.n_trials).max().unwrap_or(1) as f64;
    let ys: Vec<f64> = points
        .iter()
        .map(|p| {
            if log_y {
                p.estimate.max(floor).log10()
            } else {
                p.estimate
            }
        })
        .collect();
    let (y_min, y_max) = if log_y {
        bounds(&ys, floor.log10(), 0.0)
    } else {
        (0.0, 1.0)
    };

    let px = |x: f64| {
        MARGIN_L + (x - x_min) / (x_max - x_min).max(1e-12) * (WIDTH - MARGIN_L - MARGIN_R)
    };
    let py = |y: f64| {
        HEIGHT
            - MARGIN_B
            - (y - y_min) / (y_max - y_min).max(1e-12) * (HEIGHT - MARGIN_T - MARGIN_B)
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    ));
    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n",
        MARGIN_L,
        HEIGHT - MARGIN_B,
        WIDTH - MARGIN_R
    ));
    svg.push_str(&format!(
        "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n",
        MARGIN_L,
        MARGIN_T,
        HEIGHT - MARGIN_B
    ));
    // Ticks.
    for i in 0..=4 {
        let x = x_min + (x_max - x_min) * i as f64 / 4.0;
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{:.1}</text>\n",
            px(x),
            HEIGHT - MARGIN_B + 18.0,
            x
        ));
        let y = y_min + (y_max - y_min) * i as f64 / 4.0;
        let label = if log_y {
            format!("1e{y:.1}")
        } else {
            format!("{y:.2}")
        };
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            MARGIN_L - 6.0,
            py(y) + 4.0,
            label
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">sweep (dB)</text>\n",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        HEIGHT - 12.0
    ));
    for (idx, (kind, pts)) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| {
                let yv = if log_y { y.max(floor).log10() } else { y };
                format!("{:.2},{:.2}", px(x), py(yv))
            })
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\" points=\"{}\"/>\n",
            path.join(" ")
        ));
        let ly = MARGIN_T + 16.0 * idx as f64;
        svg.push_str(&format!(
            "<line x1=\"{0:.1}\" y1=\"{ly:.1}\" x2=\"{1:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            WIDTH - MARGIN_R + 10.0,
            WIDTH - MARGIN_R + 34.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\">{kind}</text>\n",
            WIDTH - MARGIN_R + 40.0,
            ly + 4.0
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(values: &[f64], fallback_min: f64, fallback_max: f64) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in values {
        if v.is_finite() {
            min = min.min(v);
            max = max.max(v);
        }
    }
    if !min.is_finite() || !max.is_finite() || min == max {
        (fallback_min, fallback_max)
    } else {
        (min, max)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
