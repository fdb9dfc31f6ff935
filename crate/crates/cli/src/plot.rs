//! Score histograms and loss curves as plain SVG.

use std::fmt::Write;

use anyhow::{ensure, Result};
use g3ad::model::EpochLosses;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

pub const NORMAL_COLOR: &str = "#1f77b4";
pub const ANOMALY_COLOR: &str = "#d62728";
type Column = (&'static str, fn(&EpochLosses) -> f64);

const CURVE_COLORS: [&str; 5] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#000000"];

/// One histogram series binned over a shared range.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: &'static str,
    pub color: &'static str,
    pub counts: Vec<usize>,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
    pub series: Vec<Series>,
}

impl Histogram {
    /// Bins `scores` into equal-width bins, split by `labels` when given.
    pub fn build(scores: &[f64], labels: Option<&[u8]>, bins: usize) -> Result<Self> {
        ensure!(!scores.is_empty(), "no scores to plot");
        ensure!(bins >= 1, "--bins must be at least 1");
        ensure!(scores.iter().all(|s| s.is_finite()), "scores must be finite");
        if let Some(l) = labels {
            ensure!(
                l.len() == scores.len(),
                "{} labels for {} scores",
                l.len(),
                scores.len()
            );
        }
        let mut lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
        let mut hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo <= 0.0 {
            lo -= 0.5;
            hi += 0.5;
        }
        let bin_of = |s: f64| (((s - lo) / (hi - lo) * bins as f64) as usize).min(bins - 1);
        let make = |name, color, keep: &dyn Fn(usize) -> bool| {
            let mut counts = vec![0usize; bins];
            let mut sum = 0.0;
            let mut n = 0usize;
            for (_, &s) in scores.iter().enumerate().filter(|(i, _)| keep(*i)) {
                counts[bin_of(s)] += 1;
                sum += s;
                n += 1;
            }
            Series {
                name,
                color,
                counts,
                mean: if n > 0 { sum / n as f64 } else { f64::NAN },
            }
        };
        let series = match labels {
            Some(l) => vec![
                make("normal", NORMAL_COLOR, &|i| l[i] == 0),
                make("anomaly", ANOMALY_COLOR, &|i| l[i] == 1),
            ],
            None => vec![make("all", NORMAL_COLOR, &|_| true)],
        };
        Ok(Self { lo, hi, bins, series })
    }

    pub fn edges(&self, b: usize) -> (f64, f64) {
        let w = (self.hi - self.lo) / self.bins as f64;
        (self.lo + b as f64 * w, self.lo + (b + 1) as f64 * w)
    }

    /// `bin,lo,hi` followed by one count column per series.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin,lo,hi");
        for series in &self.series {
            let _ = write!(s, ",{}", series.name);
        }
        s.push('\n');
        for b in 0..self.bins {
            let (lo, hi) = self.edges(b);
            let _ = write!(s, "{b},{lo},{hi}");
            for series in &self.series {
                let _ = write!(s, ",{}", series.counts[b]);
            }
            s.push('\n');
        }
        s
    }

    pub fn to_svg(&self) -> String {
        let plot_w = WIDTH - LEFT - RIGHT;
        let plot_h = HEIGHT - TOP - BOTTOM;
        let max_count = self
            .series
            .iter()
            .flat_map(|s| s.counts.iter().copied())
            .max()
            .unwrap_or(0)
            .max(1) as f64;
        let x_of = |v: f64| LEFT + (v - self.lo) / (self.hi - self.lo) * plot_w;
        let y_of = |c: f64| TOP + plot_h - c / max_count * plot_h;
        let mut svg = open_svg("Anomaly score distribution");
        axes(&mut svg, self.lo, self.hi, 0.0, max_count, "anomaly score", "nodes");
        let slot = plot_w / self.bins as f64;
        let bar = slot / self.series.len() as f64;
        for (k, series) in self.series.iter().enumerate() {
            let _ = writeln!(svg, r#"<g class="series" data-series="{}" fill="{}">"#, series.name, series.color);
            for (b, &count) in series.counts.iter().enumerate() {
                let y = y_of(count as f64);
                let _ = writeln!(
                    svg,
                    r#"<rect class="bar" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill-opacity="0.75"/>"#,
                    LEFT + b as f64 * slot + k as f64 * bar,
                    y,
                    bar,
                    TOP + plot_h - y
                );
            }
            svg.push_str("</g>\n");
        }
        for (k, series) in self.series.iter().enumerate() {
            if !series.mean.is_finite() {
                continue;
            }
            let x = x_of(series.mean);
            let _ = writeln!(
                svg,
                r#"<line class="mean" data-series="{}" x1="{x:.2}" y1="{TOP:.2}" x2="{x:.2}" y2="{:.2}" stroke="{}" stroke-width="2" stroke-dasharray="6,4"/>"#,
                series.name,
                TOP + plot_h,
                series.color
            );
            legend(&mut svg, k, series.color, &format!("{} (mean {:.4})", series.name, series.mean));
        }
        svg.push_str("</svg>\n");
        svg
    }
}

/// Each loss component against the epoch, on a shared linear axis.
pub fn loss_curve_svg(history: &[EpochLosses]) -> Result<String> {
    ensure!(!history.is_empty(), "loss history is empty");
    let columns: [Column; 5] = [
        ("attr", |h| h.attr),
        ("topo", |h| h.topo),
        ("cons", |h| h.cons),
        ("cc", |h| h.cc),
        ("total", |h| h.total),
    ];
    let values = history.iter().flat_map(|h| columns.iter().map(move |(_, f)| f(h)));
    let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        if v.is_finite() {
            (lo.min(v), hi.max(v))
        } else {
            (lo, hi)
        }
    });
    ensure!(lo.is_finite(), "loss history has no finite values");
    lo = lo.min(0.0);
    if hi - lo <= 0.0 {
        hi = lo + 1.0;
    }
    let first = history[0].epoch as f64;
    let mut last = history[history.len() - 1].epoch as f64;
    if last <= first {
        last = first + 1.0;
    }
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let mut svg = open_svg("Training loss");
    axes(&mut svg, first, last, lo, hi, "epoch", "loss");
    for (k, (name, f)) in columns.iter().enumerate() {
        let points: Vec<String> = history
            .iter()
            .filter(|h| f(h).is_finite())
            .map(|h| {
                let x = LEFT + (h.epoch as f64 - first) / (last - first) * plot_w;
                let y = TOP + plot_h - (f(h) - lo) / (hi - lo) * plot_h;
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="curve" data-series="{name}" fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            CURVE_COLORS[k],
            points.join(" ")
        );
        legend(&mut svg, k, CURVE_COLORS[k], name);
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn open_svg(title: &str) -> String {
    format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">
<title>{title}</title>
<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>
"#
    )
}

fn axes(svg: &mut String, x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64, x_label: &str, y_label: &str) {
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let base = TOP + plot_h;
    let _ = writeln!(
        svg,
        r#"<path class="axis" d="M{LEFT},{TOP} V{base} H{}" stroke="black" fill="none"/>"#,
        LEFT + plot_w
    );
    for t in 0..=4 {
        let f = t as f64 / 4.0;
        let x = LEFT + f * plot_w;
        let y = base - f * plot_h;
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            base + 15.0,
            tick(x_lo + f * (x_hi - x_lo))
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            y + 4.0,
            tick(y_lo + f * (y_hi - y_lo))
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{x_label}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{:.2}" text-anchor="middle" transform="rotate(-90 15 {:.2})">{y_label}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );
}

fn legend(svg: &mut String, k: usize, color: &str, text: &str) {
    let x = WIDTH - RIGHT - 190.0;
    let y = TOP + 10.0 + 16.0 * k as f64;
    let _ = writeln!(
        svg,
        r#"<rect class="legend" x="{x:.2}" y="{:.2}" width="12" height="8" fill="{color}"/><text x="{:.2}" y="{y:.2}">{text}</text>"#,
        y - 8.0,
        x + 18.0
    );
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}
