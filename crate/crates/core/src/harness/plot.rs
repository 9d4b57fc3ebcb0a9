use std::fmt::Write as _;
use std::path::Path;

use super::{Algo, RegretTrace};
use crate::error::{Error, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 180.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 50.0;
const MAX_POINTS: usize = 2000;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

#[derive(Debug, Clone, Copy, Default)]
pub struct PlotOptions {
    pub log_log: bool,
}

/// Mean and min/max envelope of cumulative regret over the seeds of one algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretBand {
    pub algo: Algo,
    pub episodes: Vec<u64>,
    pub mean: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

/// Groups traces by algorithm (first-appearance order) and aggregates each
/// group over its common prefix of episodes.
pub fn regret_bands(traces: &[RegretTrace]) -> Vec<RegretBand> {
    let mut order: Vec<Algo> = Vec::new();
    for tr in traces {
        if !order.contains(&tr.algo) {
            order.push(tr.algo);
        }
    }
    order
        .into_iter()
        .map(|algo| {
            let group: Vec<&RegretTrace> = traces.iter().filter(|t| t.algo == algo).collect();
            let len = group.iter().map(|t| t.rows.len()).min().unwrap_or(0);
            let n = group.len() as f64;
            let mut band = RegretBand {
                algo,
                episodes: Vec::with_capacity(len),
                mean: Vec::with_capacity(len),
                min: Vec::with_capacity(len),
                max: Vec::with_capacity(len),
            };
            for i in 0..len {
                let values = group.iter().map(|t| t.rows[i].regret_cum);
                band.episodes.push(group[0].rows[i].t);
                band.mean.push(values.clone().sum::<f64>() / n);
                band.min.push(values.clone().fold(f64::INFINITY, f64::min));
                band.max.push(values.fold(f64::NEG_INFINITY, f64::max));
            }
            band
        })
        .collect()
}

struct Axes {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
    log: bool,
}

impl Axes {
    fn tx(&self, t: f64) -> f64 {
        let t = if self.log { t.max(1.0).log10() } else { t };
        let span = (self.x_hi - self.x_lo).max(f64::MIN_POSITIVE);
        MARGIN_LEFT + (t - self.x_lo) / span * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn ty(&self, y: f64) -> f64 {
        let y = if self.log { y.max(1e-3).log10() } else { y };
        let span = (self.y_hi - self.y_lo).max(f64::MIN_POSITIVE);
        HEIGHT - MARGIN_BOTTOM - (y - self.y_lo) / span * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn sample_indices(len: usize) -> Vec<usize> {
    if len <= MAX_POINTS {
        return (0..len).collect();
    }
    let mut idx: Vec<usize> = (0..MAX_POINTS)
        .map(|i| i * (len - 1) / (MAX_POINTS - 1))
        .collect();
    idx.dedup();
    idx
}

/// SVG document with one mean curve and min/max band per algorithm.
pub fn render_svg(traces: &[RegretTrace], options: PlotOptions) -> Result<String> {
    if traces.is_empty() {
        return Err(Error::invalid("nothing to plot"));
    }
    let bands = regret_bands(traces);
    let log = options.log_log;
    let t_max = bands
        .iter()
        .flat_map(|b| b.episodes.last().copied())
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let y_values = bands
        .iter()
        .flat_map(|b| b.min.iter().chain(&b.max))
        .copied();
    let (mut y_lo, mut y_hi) =
        y_values.fold((0.0f64, 0.0f64), |(lo, hi), y| (lo.min(y), hi.max(y)));
    if log {
        y_lo = y_lo.max(1e-3).log10();
        y_hi = y_hi.max(1e-3).log10();
    }
    if y_hi - y_lo < 1e-12 {
        y_hi = y_lo + 1.0;
    }
    let axes = Axes {
        x_lo: if log { 0.0 } else { 1.0 },
        x_hi: if log {
            t_max.log10().max(1e-12)
        } else {
            t_max.max(2.0)
        },
        y_lo,
        y_hi,
        log,
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (x0, x1) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let (y0, y1) = (HEIGHT - MARGIN_BOTTOM, MARGIN_TOP);
    let _ = writeln!(
        svg,
        r#"<path class="axes" d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" stroke="black" fill="none"/>"#
    );
    let xlabel = if log { "episode (log10)" } else { "episode" };
    let ylabel = if log {
        "cumulative regret (log10)"
    } else {
        "cumulative regret"
    };
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="14">{xlabel}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" text-anchor="middle" font-size="14" transform="rotate(-90 16 {:.1})">{ylabel}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );
    for (label, value) in [("min", axes.y_lo), ("max", axes.y_hi)] {
        let y = if label == "min" { y0 } else { y1 };
        let shown = if log { 10f64.powf(value) } else { value };
        let _ = writeln!(
            svg,
            r#"<text class="tick" x="{:.1}" y="{:.1}" text-anchor="end" font-size="11">{shown:.3}</text>"#,
            x0 - 6.0,
            y + 4.0
        );
    }
    if !log && axes.y_lo < 0.0 {
        let zy = axes.ty(0.0);
        let _ = writeln!(
            svg,
            r##"<line class="zero" x1="{x0}" y1="{zy:.2}" x2="{x1}" y2="{zy:.2}" stroke="#999" stroke-dasharray="4 3"/>"##
        );
    }

    for (i, band) in bands.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let idx = sample_indices(band.episodes.len());
        let point =
            |j: usize, y: f64| format!("{:.2},{:.2}", axes.tx(band.episodes[j] as f64), axes.ty(y));
        let upper: Vec<String> = idx.iter().map(|&j| point(j, band.max[j])).collect();
        let lower: Vec<String> = idx.iter().rev().map(|&j| point(j, band.min[j])).collect();
        let _ = writeln!(
            svg,
            r#"<polygon class="band" data-algo="{}" points="{} {}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            band.algo,
            upper.join(" "),
            lower.join(" ")
        );
        let mean: Vec<String> = idx.iter().map(|&j| point(j, band.mean[j])).collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="mean" data-algo="{}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            band.algo,
            mean.join(" ")
        );
        let ly = MARGIN_TOP + 20.0 * i as f64 + 10.0;
        let lx = WIDTH - MARGIN_RIGHT + 15.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{:.1}" y2="{ly}" stroke="{color}" stroke-width="3"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            svg,
            r#"<text class="legend" x="{:.1}" y="{:.1}" font-size="12">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            band.algo
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_plot(traces: &[RegretTrace], path: &Path, options: PlotOptions) -> Result<()> {
    let svg = render_svg(traces, options)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}
