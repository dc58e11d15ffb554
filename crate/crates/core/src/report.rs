//! Report emission: sweep and ROC CSVs (the deterministic contract) and
//! best-effort SVG line plots.

use crate::adversary::TracePoint;
use crate::matcher::{RocPoint, SweepRow};

/// `run_id,mode,population_size,k,mean,std` rows, one block per mode.
pub fn sweep_csv(run_id: &str, blocks: &[(String, Vec<SweepRow>)]) -> String {
    let mut out = String::from("run_id,mode,population_size,k,mean,std\n");
    for (mode, rows) in blocks {
        for r in rows {
            out.push_str(&format!(
                "{run_id},{mode},{},{},{},{}\n",
                r.population_size, r.k, r.mean, r.std
            ));
        }
    }
    out
}

/// `run_id,scheme,threshold,fpr,tpr` rows.
pub fn roc_csv(run_id: &str, blocks: &[(String, Vec<RocPoint>)]) -> String {
    let mut out = String::from("run_id,scheme,threshold,fpr,tpr\n");
    for (scheme, points) in blocks {
        for p in points {
            out.push_str(&format!(
                "{run_id},{scheme},{},{},{}\n",
                p.threshold, p.fpr, p.tpr
            ));
        }
    }
    out
}

/// `run_id,id,iteration,objective,linf` rows for attack traces.
pub fn trace_csv(run_id: &str, traces: &[(String, Vec<TracePoint>)]) -> String {
    let mut out = String::from("run_id,id,iteration,objective,linf\n");
    for (id, trace) in traces {
        for t in trace {
            out.push_str(&format!(
                "{run_id},{id},{},{},{}\n",
                t.iteration, t.objective, t.linf
            ));
        }
    }
    out
}

/// One plotted line.
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

/// Minimal SVG line chart. Output is valid standalone SVG; excluded from
/// the determinism contract (CSV is the contract), though in practice it
/// is deterministic too.
pub fn svg_line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (width, height) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 20.0, 40.0, 50.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;

    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &all {
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_min = y_min.min(y);
        y_max = y_max.max(y);
    }
    if all.is_empty() {
        x_min = 0.0;
        x_max = 1.0;
        y_min = 0.0;
        y_max = 1.0;
    }
    if x_max == x_min {
        x_max = x_min + 1.0;
    }
    if y_max == y_min {
        y_max = y_min + 1.0;
    }
    let sx = |x: f64| left + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| top + plot_h - (y - y_min) / (y_max - y_min) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        width / 2.0,
        xml_escape(title)
    ));
    // axes
    svg.push_str(&format!(
        "<line x1=\"{left}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        top + plot_h,
        left + plot_w,
        top + plot_h
    ));
    svg.push_str(&format!(
        "<line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{}\" stroke=\"black\"/>\n",
        top + plot_h
    ));
    // axis labels and extents
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        left + plot_w / 2.0,
        height - 12.0,
        xml_escape(x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        top + plot_h / 2.0,
        top + plot_h / 2.0,
        xml_escape(y_label)
    ));
    for (value, x, anchor) in [(x_min, left, "start"), (x_max, left + plot_w, "end")] {
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" text-anchor=\"{anchor}\">{value:.3}</text>\n",
            top + plot_h + 16.0
        ));
    }
    for (value, y) in [(y_min, top + plot_h), (y_max, top + 4.0)] {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{y}\" text-anchor=\"end\">{value:.3}</text>\n",
            left - 6.0
        ));
    }
    // series
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            path.join(" ")
        ));
        let ly = top + 14.0 * i as f64;
        svg.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"3\" fill=\"{color}\"/>\n",
            left + plot_w - 150.0,
            ly
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\">{}</text>\n",
            left + plot_w - 135.0,
            ly + 5.0,
            xml_escape(&s.label)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
