//! Static plot emission: every figure is written as a self-contained SVG
//! plus a companion CSV holding the plotted points. The CSV, not the SVG,
//! is the machine-checkable surface.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lowess::lowess;
use crate::stats::normal;

pub const SVG_WIDTH: f64 = 640.0;
pub const SVG_HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 28.0;
const MARGIN_BOTTOM: f64 = 48.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    Qq,
    Chf45,
    ScatterLowess,
    GroupedBox,
    PvalueHist,
}

impl PlotKind {
    pub fn parse(name: &str) -> Result<PlotKind> {
        match name {
            "qq" => Ok(PlotKind::Qq),
            "chf45" => Ok(PlotKind::Chf45),
            "scatter-lowess" => Ok(PlotKind::ScatterLowess),
            "grouped-box" => Ok(PlotKind::GroupedBox),
            "pvalue-hist" => Ok(PlotKind::PvalueHist),
            other => Err(Error::Invalid(format!("unknown plot kind `{other}`"))),
        }
    }
}

/// Minimal data-space SVG canvas with fixed pixel dimensions.
struct Canvas {
    body: String,
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Canvas {
    fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Canvas {
        let pad = |lo: f64, hi: f64| {
            let span = (hi - lo).abs().max(1e-12);
            (lo - 0.05 * span, hi + 0.05 * span)
        };
        let (x_min, x_max) = pad(x_min, x_max);
        let (y_min, y_max) = pad(y_min, y_max);
        Canvas { body: String::new(), x_min, x_max, y_min, y_max }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x_min) / (self.x_max - self.x_min)
            * (SVG_WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        SVG_HEIGHT - MARGIN_BOTTOM
            - (y - self.y_min) / (self.y_max - self.y_min)
                * (SVG_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }

    fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str) {
        let _ = write!(
            self.body,
            r#"<circle cx="{:.2}" cy="{:.2}" r="{r}" fill="{fill}" fill-opacity="0.7"/>"#,
            self.px(x),
            self.py(y)
        );
        self.body.push('\n');
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, dash: bool) {
        let dash_attr = if dash { r#" stroke-dasharray="6,4""# } else { "" };
        let _ = write!(
            self.body,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{stroke}" stroke-width="1.5"{dash_attr}/>"#,
            self.px(x1),
            self.py(y1),
            self.px(x2),
            self.py(y2)
        );
        self.body.push('\n');
    }

    fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str) {
        if pts.is_empty() {
            return;
        }
        let mut d = String::new();
        for (x, y) in pts {
            let _ = write!(d, "{:.2},{:.2} ", self.px(*x), self.py(*y));
        }
        let _ = write!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="2"/>"#,
            d.trim_end()
        );
        self.body.push('\n');
    }

    fn rect(&mut self, x1: f64, x2: f64, y1: f64, y2: f64, fill: &str) {
        let (px1, px2) = (self.px(x1), self.px(x2));
        let (py1, py2) = (self.py(y2), self.py(y1));
        let _ = write!(
            self.body,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}" stroke="#333" stroke-width="0.8"/>"##,
            px1.min(px2),
            py1.min(py2),
            (px2 - px1).abs(),
            (py2 - py1).abs()
        );
        self.body.push('\n');
    }

    fn axis_ticks(lo: f64, hi: f64) -> Vec<f64> {
        let span = hi - lo;
        let raw = span / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| span / s <= 6.0)
            .unwrap_or(mag * 10.0);
        let mut t = (lo / step).ceil() * step;
        let mut out = Vec::new();
        while t <= hi + 1e-9 * span.abs() {
            out.push(t);
            t += step;
        }
        out
    }

    fn finish(self, title: &str, x_label: &str, y_label: &str) -> String {
        let mut svg = String::new();
        let _ = write!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">"#
        );
        svg.push('\n');
        svg.push_str(r#"<rect width="100%" height="100%" fill="white"/>"#);
        svg.push('\n');

        // Frame.
        let _ = write!(
            svg,
            r##"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{:.2}" height="{:.2}" fill="none" stroke="#333" stroke-width="1"/>"##,
            SVG_WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
            SVG_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
        );
        svg.push('\n');

        for t in Self::axis_ticks(self.x_min, self.x_max) {
            let px = self.px(t);
            let _ = write!(
                svg,
                r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#333" stroke-width="1"/><text x="{px:.2}" y="{:.2}" font-family="monospace" font-size="11" text-anchor="middle">{t:.3}</text>"##,
                SVG_HEIGHT - MARGIN_BOTTOM,
                SVG_HEIGHT - MARGIN_BOTTOM + 5.0,
                SVG_HEIGHT - MARGIN_BOTTOM + 18.0
            );
            svg.push('\n');
        }
        for t in Self::axis_ticks(self.y_min, self.y_max) {
            let py = self.py(t);
            let _ = write!(
                svg,
                r##"<line x1="{:.2}" y1="{py:.2}" x2="{MARGIN_LEFT}" y2="{py:.2}" stroke="#333" stroke-width="1"/><text x="{:.2}" y="{:.2}" font-family="monospace" font-size="11" text-anchor="end">{t:.3}</text>"##,
                MARGIN_LEFT - 5.0,
                MARGIN_LEFT - 8.0,
                py + 4.0
            );
            svg.push('\n');
        }

        let _ = write!(
            svg,
            r#"<text x="{:.2}" y="18" font-family="monospace" font-size="13" text-anchor="middle">{}</text>"#,
            (MARGIN_LEFT + SVG_WIDTH - MARGIN_RIGHT) / 2.0,
            xml_escape(title)
        );
        svg.push('\n');
        let _ = write!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-family="monospace" font-size="12" text-anchor="middle">{}</text>"#,
            (MARGIN_LEFT + SVG_WIDTH - MARGIN_RIGHT) / 2.0,
            SVG_HEIGHT - 12.0,
            xml_escape(x_label)
        );
        svg.push('\n');
        let _ = write!(
            svg,
            r#"<text x="16" y="{:.2}" font-family="monospace" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            SVG_HEIGHT / 2.0,
            SVG_HEIGHT / 2.0,
            xml_escape(y_label)
        );
        svg.push('\n');
        svg.push_str(&self.body);
        svg.push_str("</svg>\n");
        svg
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
}

fn finite_bounds<'a>(vals: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in vals {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if lo > hi {
        (0.0, 1.0)
    } else {
        (lo, hi)
    }
}

/// (theoretical, sample) pairs of a normal QQ plot, sample sorted ascending.
pub fn qq_points(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return Err(Error::Invalid("qq plot needs at least one value".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, v)| (normal::quantile((i as f64 + 1.0 - 0.375) / (n + 0.25)), v))
        .collect())
}

/// QQ plot of residuals against standard normal quantiles with a 45° line.
pub fn render_qq(values: &[f64], svg_path: &Path, csv_path: &Path) -> Result<()> {
    let pts = qq_points(values)?;
    let mut w = csv_writer(csv_path)?;
    w.write_record(["theoretical", "sample"]).map_err(|e| Error::Invalid(e.to_string()))?;
    for (t, s) in &pts {
        w.write_record([format!("{t}"), format!("{s}")])
            .map_err(|e| Error::Invalid(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(csv_path, e))?;

    let (xlo, xhi) = finite_bounds(pts.iter().map(|(t, _)| t));
    let (ylo, yhi) = finite_bounds(pts.iter().map(|(_, s)| s));
    let lo = xlo.min(ylo);
    let hi = xhi.max(yhi);
    let mut c = Canvas::new(lo, hi, lo, hi);
    c.line(lo, lo, hi, hi, "#888", true);
    for (t, s) in pts.iter().filter(|(t, s)| t.is_finite() && s.is_finite()) {
        c.circle(*t, *s, 2.5, "#1f77b4");
    }
    write_file(svg_path, &c.finish("Normal QQ plot", "theoretical quantiles", "sample quantiles"))
}

/// Cumulative hazard of Cox–Snell residuals against the 45° reference.
pub fn render_chf45(chf: &[(f64, f64)], svg_path: &Path, csv_path: &Path) -> Result<()> {
    let mut w = csv_writer(csv_path)?;
    w.write_record(["residual", "cumulative_hazard"]).map_err(|e| Error::Invalid(e.to_string()))?;
    for (v, h) in chf {
        w.write_record([format!("{v}"), format!("{h}")])
            .map_err(|e| Error::Invalid(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(csv_path, e))?;

    let finite: Vec<(f64, f64)> = chf.iter().copied().filter(|(v, h)| v.is_finite() && h.is_finite()).collect();
    let (xlo, xhi) = finite_bounds(finite.iter().map(|(v, _)| v));
    let (ylo, yhi) = finite_bounds(finite.iter().map(|(_, h)| h));
    let lo = xlo.min(ylo).min(0.0);
    let hi = xhi.max(yhi);
    let mut c = Canvas::new(lo, hi, lo, hi);
    c.line(lo, lo, hi, hi, "#888", true);
    c.polyline(&finite, "#d62728");
    for (v, h) in &finite {
        c.circle(*v, *h, 2.0, "#d62728");
    }
    write_file(
        svg_path,
        &c.finish("Cumulative hazard of Cox-Snell residuals", "Cox-Snell residual", "cumulative hazard"),
    )
}

/// Residual scatter against a covariate or linear predictor with a LOWESS
/// curve and the zero reference line.
pub fn render_scatter_lowess(
    x: &[f64],
    residuals: &[f64],
    span: f64,
    iterations: usize,
    x_label: &str,
    svg_path: &Path,
    csv_path: &Path,
) -> Result<()> {
    let smooth = lowess(x, residuals, span, iterations)?;
    // The smoother returns x-sorted output; align per-point for the CSV.
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));

    let mut w = csv_writer(csv_path)?;
    w.write_record(["x", "residual", "lowess"]).map_err(|e| Error::Invalid(e.to_string()))?;
    for (pos, &i) in order.iter().enumerate() {
        w.write_record([format!("{}", x[i]), format!("{}", residuals[i]), format!("{}", smooth[pos].1)])
            .map_err(|e| Error::Invalid(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(csv_path, e))?;

    let (xlo, xhi) = finite_bounds(x.iter());
    let (ylo, yhi) = finite_bounds(residuals.iter().chain(smooth.iter().map(|(_, f)| f)));
    let mut c = Canvas::new(xlo, xhi, ylo.min(0.0), yhi.max(0.0));
    c.line(xlo, 0.0, xhi, 0.0, "#888", true);
    for (&xi, &ri) in x.iter().zip(residuals) {
        c.circle(xi, ri, 2.5, "#1f77b4");
    }
    c.polyline(&smooth, "#d62728");
    write_file(svg_path, &c.finish("Residuals with LOWESS", x_label, "residual"))
}

/// Five-number summary plus count for one group.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxGroup {
    pub group: usize,
    pub lo_edge: f64,
    pub hi_edge: f64,
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

fn quantile_linear(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Per-group five-number summaries over k equal-width bins of `grouping`.
pub fn grouped_box_data(values: &[f64], grouping: &[f64], k: usize) -> Result<Vec<BoxGroup>> {
    if values.len() != grouping.len() {
        return Err(Error::Invalid("values and grouping lengths differ".into()));
    }
    let (idx, boundaries) = crate::gof::assign_groups_for_plots(grouping, k)?;
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); k];
    for (&g, &v) in idx.iter().zip(values) {
        buckets[g].push(v);
    }
    let mut out = Vec::new();
    for (g, mut vals) in buckets.into_iter().enumerate() {
        if vals.is_empty() {
            continue;
        }
        vals.sort_by(|a, b| a.total_cmp(b));
        out.push(BoxGroup {
            group: g + 1,
            lo_edge: boundaries[g],
            hi_edge: boundaries[g + 1],
            count: vals.len(),
            min: vals[0],
            q1: quantile_linear(&vals, 0.25),
            median: quantile_linear(&vals, 0.5),
            q3: quantile_linear(&vals, 0.75),
            max: vals[vals.len() - 1],
        });
    }
    Ok(out)
}

/// Grouped boxplot of residuals over equal-width bins of a covariate or
/// the linear predictor.
pub fn render_grouped_box(
    values: &[f64],
    grouping: &[f64],
    k: usize,
    x_label: &str,
    svg_path: &Path,
    csv_path: &Path,
) -> Result<()> {
    let groups = grouped_box_data(values, grouping, k)?;
    let mut w = csv_writer(csv_path)?;
    w.write_record(["group", "lo_edge", "hi_edge", "count", "min", "q1", "median", "q3", "max"])
        .map_err(|e| Error::Invalid(e.to_string()))?;
    for g in &groups {
        w.write_record([
            g.group.to_string(),
            format!("{}", g.lo_edge),
            format!("{}", g.hi_edge),
            g.count.to_string(),
            format!("{}", g.min),
            format!("{}", g.q1),
            format!("{}", g.median),
            format!("{}", g.q3),
            format!("{}", g.max),
        ])
        .map_err(|e| Error::Invalid(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(csv_path, e))?;

    let (xlo, xhi) = finite_bounds(grouping.iter());
    let (ylo, yhi) = finite_bounds(values.iter());
    let mut c = Canvas::new(xlo, xhi, ylo.min(0.0), yhi.max(0.0));
    c.line(xlo, 0.0, xhi, 0.0, "#888", true);
    for g in &groups {
        let width = g.hi_edge - g.lo_edge;
        let (bl, br) = (g.lo_edge + 0.2 * width, g.hi_edge - 0.2 * width);
        let mid = 0.5 * (bl + br);
        c.rect(bl, br, g.q1, g.q3, "#aec7e8");
        c.line(bl, g.median, br, g.median, "#1f77b4", false);
        c.line(mid, g.q3, mid, g.max, "#333", false);
        c.line(mid, g.min, mid, g.q1, "#333", false);
    }
    write_file(svg_path, &c.finish("Grouped residuals", x_label, "residual"))
}

/// Histogram of replicated test p-values with a vertical line at p_min.
pub fn render_pvalue_hist(
    p_values: &[f64],
    p_min: f64,
    bins: usize,
    title: &str,
    svg_path: &Path,
    csv_path: &Path,
) -> Result<()> {
    if p_values.is_empty() {
        return Err(Error::Invalid("p-value histogram needs at least one value".into()));
    }
    let bins = bins.max(1);
    let mut counts = vec![0usize; bins];
    for &p in p_values {
        let b = ((p * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let mut w = csv_writer(csv_path)?;
    w.write_record(["bin_lo", "bin_hi", "count", "p_min"]).map_err(|e| Error::Invalid(e.to_string()))?;
    for (b, &n) in counts.iter().enumerate() {
        w.write_record([
            format!("{}", b as f64 / bins as f64),
            format!("{}", (b + 1) as f64 / bins as f64),
            n.to_string(),
            format!("{p_min}"),
        ])
        .map_err(|e| Error::Invalid(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(csv_path, e))?;

    let max_count = *counts.iter().max().unwrap() as f64;
    let mut c = Canvas::new(0.0, 1.0, 0.0, max_count.max(1.0));
    for (b, &n) in counts.iter().enumerate() {
        if n > 0 {
            c.rect(b as f64 / bins as f64, (b + 1) as f64 / bins as f64, 0.0, n as f64, "#aec7e8");
        }
    }
    c.line(p_min, 0.0, p_min, max_count, "red", false);
    write_file(svg_path, &c.finish(title, "p-value", "count"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qq_points_sorted_and_sized() {
        let pts = qq_points(&[1.0, -1.0, 0.0]).unwrap();
        assert_eq!(pts.len(), 3);
        assert_eq!(pts[0].1, -1.0);
        assert_eq!(pts[1].1, 0.0);
        assert_eq!(pts[2].1, 1.0);
        assert!(pts[0].0 < pts[1].0 && pts[1].0 < pts[2].0);
        // Symmetric plotting positions give symmetric theoretical quantiles.
        assert!((pts[0].0 + pts[2].0).abs() < 1e-12);
    }

    #[test]
    fn grouped_box_counts_sum() {
        let values: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let grouping: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let groups = grouped_box_data(&values, &grouping, 10).unwrap();
        assert!(groups.len() <= 10);
        assert_eq!(groups.iter().map(|g| g.count).sum::<usize>(), 100);
        for g in &groups {
            assert!(g.min <= g.q1 && g.q1 <= g.median && g.median <= g.q3 && g.q3 <= g.max);
        }
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert!((quantile_linear(&v, 0.5) - 2.5).abs() < 1e-12);
        assert!((quantile_linear(&v, 0.25) - 1.75).abs() < 1e-12);
    }
}
