//! Self-contained SVG exports: the improvement histogram for reports and the
//! curve/area plots used by the browser demo. No external renderer, just
//! hand-built vector elements with inline styling.

use crate::eval::EvalReport;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 52.0;

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        MARGIN_LEFT + (v - self.x_min) / (self.x_max - self.x_min) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM
            - (v - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn svg_open(out: &mut String, title: &str) {
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    ));
}

fn axes(out: &mut String, frame: &Frame, x_label: &str, y_label: &str) {
    let x0 = frame.x(frame.x_min);
    let x1 = frame.x(frame.x_max);
    let y0 = frame.y(frame.y_min);
    let y1 = frame.y(frame.y_max);
    out.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"#333\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"#333\"/>\n"
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    ));
    // Min/max tick labels keep the plot readable without a full tick engine.
    out.push_str(&format!(
        "<text x=\"{x0}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        y0 + 16.0,
        fmt_tick(frame.x_min)
    ));
    out.push_str(&format!(
        "<text x=\"{x1}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        y0 + 16.0,
        fmt_tick(frame.x_max)
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{y0}\" text-anchor=\"end\">{}</text>\n",
        x0 - 6.0,
        fmt_tick(frame.y_min)
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
        x0 - 6.0,
        y1 + 4.0,
        fmt_tick(frame.y_max)
    ));
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let abs = v.abs();
    if (0.001..10_000.0).contains(&abs) {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Histogram of per-run improvements (negative = candidate better), with the
/// mean and median marked.
pub fn histogram_svg(report: &EvalReport, title: &str) -> String {
    let spec = &report.histogram_spec;
    let max_count = report.histogram_counts.iter().copied().max().unwrap_or(0).max(1);
    let frame = Frame {
        x_min: spec.min,
        x_max: spec.max,
        y_min: 0.0,
        y_max: max_count as f64 * 1.05,
    };
    let mut out = String::new();
    svg_open(&mut out, title);
    let edges = spec.bin_edges();
    for (i, &count) in report.histogram_counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let x = frame.x(edges[i]);
        let w = frame.x(edges[i + 1]) - x;
        let y = frame.y(count as f64);
        let h = frame.y(0.0) - y;
        out.push_str(&format!(
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" \
             fill=\"#4878a8\" stroke=\"#fff\" stroke-width=\"0.5\"/>\n",
            x, y, w, h
        ));
    }
    for (value, color, label) in [
        (report.mean_improvement, "#c44", "mean"),
        (report.median_improvement, "#2a2", "median"),
    ] {
        let clamped = value.clamp(spec.min, spec.max);
        let x = frame.x(clamped);
        out.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" \
             stroke=\"{color}\" stroke-dasharray=\"4 3\"/>\n",
            frame.y(frame.y_min),
            frame.y(frame.y_max),
        ));
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" fill=\"{color}\">{label} {}</text>\n",
            x + 4.0,
            MARGIN_TOP + 14.0 + if label == "median" { 16.0 } else { 0.0 },
            fmt_tick(value)
        ));
    }
    axes(&mut out, &frame, "per-run improvement (negative is better)", "runs");
    out.push_str("</svg>\n");
    out
}

/// Quality of the greedy prefix q(S_k) against k, with the full-space
/// quality as a reference line and the chosen portfolio size marked.
pub fn quality_curve_svg(
    prefix_quality: &[f64],
    full_quality: f64,
    chosen_k: usize,
    title: &str,
) -> String {
    assert!(!prefix_quality.is_empty());
    let y_lo = prefix_quality
        .iter()
        .copied()
        .fold(full_quality, f64::min);
    let y_hi = prefix_quality.iter().copied().fold(full_quality, f64::max);
    let pad = ((y_hi - y_lo) * 0.08).max(1e-9);
    let frame = Frame {
        x_min: 1.0,
        x_max: prefix_quality.len() as f64,
        y_min: y_lo - pad,
        y_max: y_hi + pad,
    };
    let mut out = String::new();
    svg_open(&mut out, title);

    let y_full = frame.y(full_quality);
    out.push_str(&format!(
        "<line x1=\"{:.2}\" y1=\"{y_full:.2}\" x2=\"{:.2}\" y2=\"{y_full:.2}\" \
         stroke=\"#999\" stroke-dasharray=\"6 4\"/>\n",
        frame.x(frame.x_min),
        frame.x(frame.x_max),
    ));
    out.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" fill=\"#777\">q(full space)</text>\n",
        frame.x(frame.x_min) + 6.0,
        y_full - 6.0
    ));

    let points: Vec<String> = prefix_quality
        .iter()
        .enumerate()
        .map(|(i, &q)| format!("{:.2},{:.2}", frame.x((i + 1) as f64), frame.y(q)))
        .collect();
    out.push_str(&format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#4878a8\" stroke-width=\"2\"/>\n",
        points.join(" ")
    ));
    for (i, &q) in prefix_quality.iter().enumerate() {
        out.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#4878a8\"/>\n",
            frame.x((i + 1) as f64),
            frame.y(q)
        ));
    }
    if (1..=prefix_quality.len()).contains(&chosen_k) {
        let x = frame.x(chosen_k as f64);
        out.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" \
             stroke=\"#c44\" stroke-dasharray=\"4 3\"/>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" fill=\"#c44\">chosen k = {chosen_k}</text>\n",
            frame.y(frame.y_min),
            frame.y(frame.y_max),
            x + 5.0,
            frame.y(frame.y_max) + 14.0,
        ));
    }
    axes(&mut out, &frame, "portfolio size k", "quality q(S_k)");
    out.push_str("</svg>\n");
    out
}

/// Step plot of a bound-gap trace with the integrated (capped) area shaded.
/// `segments` are (t_start, t_end, gap) rectangles, already capped.
pub fn gap_area_svg(segments: &[(f64, f64, f64)], gap_cap: f64, gamma: f64, title: &str) -> String {
    assert!(!segments.is_empty());
    let t_end = segments.last().unwrap().1;
    let frame = Frame {
        x_min: 0.0,
        x_max: t_end.max(1e-9),
        y_min: 0.0,
        y_max: gap_cap * 1.08,
    };
    let mut out = String::new();
    svg_open(&mut out, title);
    for &(t0, t1, gap) in segments {
        if t1 <= t0 {
            continue;
        }
        let x = frame.x(t0);
        let w = frame.x(t1) - x;
        let y = frame.y(gap);
        let h = frame.y(0.0) - y;
        if h > 0.0 {
            out.push_str(&format!(
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" \
                 fill=\"#4878a8\" fill-opacity=\"0.35\"/>\n"
            ));
        }
        out.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" \
             stroke=\"#4878a8\" stroke-width=\"2\"/>\n",
            x + w
        ));
    }
    let y_cap = frame.y(gap_cap);
    out.push_str(&format!(
        "<line x1=\"{:.2}\" y1=\"{y_cap:.2}\" x2=\"{:.2}\" y2=\"{y_cap:.2}\" \
         stroke=\"#c44\" stroke-dasharray=\"6 4\"/>\n\
         <text x=\"{:.2}\" y=\"{:.2}\" fill=\"#c44\">gap cap</text>\n",
        frame.x(frame.x_min),
        frame.x(frame.x_max),
        frame.x(frame.x_min) + 6.0,
        y_cap - 6.0
    ));
    out.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"14\">γ = {}</text>\n",
        frame.x(frame.x_max) - 150.0,
        MARGIN_TOP + 14.0,
        fmt_tick(gamma)
    ));
    axes(&mut out, &frame, "time (s)", "bound gap");
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{compare, HistogramSpec};

    fn sample_report() -> EvalReport {
        compare(
            &[1.0, 2.0, 0.5, 4.0],
            &[2.0, 2.5, 1.0, 3.0],
            &HistogramSpec {
                min: -1.0,
                max: 1.0,
                n_bins: 8,
            },
        )
        .unwrap()
    }

    fn assert_is_svg(svg: &str) {
        assert!(svg.starts_with("<svg "));
        assert!(svg.trim_end().ends_with("</svg>"));
        // Tag balance for the elements we emit in pairs.
        assert_eq!(svg.matches("<svg ").count(), svg.matches("</svg>").count());
        assert_eq!(svg.matches("<text").count(), svg.matches("</text>").count());
    }

    #[test]
    fn histogram_svg_structure() {
        let report = sample_report();
        let svg = histogram_svg(&report, "test histogram");
        assert_is_svg(&svg);
        let non_empty_bins = report.histogram_counts.iter().filter(|&&c| c > 0).count();
        assert_eq!(svg.matches("<rect").count(), non_empty_bins);
        assert!(svg.contains("test histogram"));
    }

    #[test]
    fn quality_curve_svg_structure() {
        let svg = quality_curve_svg(&[-10.0, -7.0, -6.5, -6.4], -6.3, 3, "greedy chain");
        assert_is_svg(&svg);
        assert_eq!(svg.matches("<circle").count(), 4);
        assert!(svg.contains("chosen k = 3"));
    }

    #[test]
    fn gap_area_svg_structure() {
        let svg = gap_area_svg(&[(0.0, 3.0, 5.0), (3.0, 10.0, 2.0)], 10.0, 29.0, "trace");
        assert_is_svg(&svg);
        assert!(svg.contains("gap cap"));
    }

    #[test]
    fn titles_are_escaped() {
        let svg = quality_curve_svg(&[-1.0], -1.0, 1, "a < b & c");
        assert!(svg.contains("a &lt; b &amp; c"));
    }
}
