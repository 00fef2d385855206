//! Self-contained SVG rendering: diverging heatmaps for height-function
//! grids (masked cells in gray, gait path overlaid) and line plots with
//! optional error bars for sweep summaries. No external assets, no
//! stylesheets; output bytes depend only on the input data.

use omegagait::HeightFunctionGrid;

const CANVAS_W: f64 = 760.0;
const CANVAS_H: f64 = 560.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_TOP: f64 = 48.0;
const MARGIN_BOTTOM: f64 = 58.0;

const SERIES_COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];
const MASK_COLOR: &str = "#b4b4b4";

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Symmetric error bar half-heights, one per point.
    pub err: Option<Vec<f64>>,
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn px(v: f64) -> String {
    format!("{v:.2}")
}

/// White at zero, blue negative, red positive, linear in each channel.
fn diverging_color(value: f64, vmax: f64) -> String {
    if value.is_nan() {
        return MASK_COLOR.to_string();
    }
    let t = (value / vmax).clamp(-1.0, 1.0);
    let mid = (247.0, 247.0, 247.0);
    let end = if t < 0.0 {
        (33.0, 102.0, 172.0)
    } else {
        (178.0, 24.0, 43.0)
    };
    let s = t.abs();
    let r = mid.0 + (end.0 - mid.0) * s;
    let g = mid.1 + (end.1 - mid.1) * s;
    let b = mid.2 + (end.2 - mid.2) * s;
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, b.round() as u8)
}

fn svg_open(out: &mut String) {
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{CANVAS_W}\" height=\"{CANVAS_H}\" \
         viewBox=\"0 0 {CANVAS_W} {CANVAS_H}\" font-family=\"sans-serif\">\n"
    ));
    out.push_str(&format!(
        "<rect width=\"{CANVAS_W}\" height=\"{CANVAS_H}\" fill=\"white\"/>\n"
    ));
}

fn text(out: &mut String, x: f64, y: f64, size: f64, anchor: &str, body: &str, extra: &str) {
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"{size}\" text-anchor=\"{anchor}\"{extra}>{}</text>\n",
        px(x),
        px(y),
        xml_escape(body)
    ));
}

/// `step`-driven tick label precision.
fn tick_label(value: f64, step: f64) -> String {
    let decimals = if step >= 1.0 {
        0
    } else {
        (-step.log10().floor() as i32).clamp(0, 6) as usize
    };
    format!("{value:.decimals$}")
}

/// 1-2-5 tick ladder covering [lo, hi] with about `target` steps.
fn ticks(lo: f64, hi: f64, target: usize) -> (Vec<f64>, f64) {
    let range = (hi - lo).max(1e-300);
    let raw = range / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| range / s <= target as f64 + 0.5)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() * step;
    let mut out = Vec::new();
    let mut t = first;
    while t <= hi + step * 1e-9 {
        // Snap near-zero ticks so -0.00 labels cannot appear.
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    (out, step)
}

/// Heatmap of a sampled height function with the gait's projected cycle
/// drawn on top. Wrapped axes fold the path into the fundamental period and
/// split the polyline at the seam.
pub fn heatmap_svg(
    grid: &HeightFunctionGrid,
    path: &[(f64, f64)],
    title: &str,
    u_label: &str,
    v_label: &str,
) -> String {
    let (nu, nv) = grid.resolution();
    let (u0, u1) = (grid.u_axis[0], grid.u_axis[nu - 1]);
    let (v0, v1) = (grid.v_axis[0], grid.v_axis[nv - 1]);
    let plot_w = CANVAS_W - MARGIN_LEFT - 150.0;
    let plot_h = CANVAS_H - MARGIN_TOP - MARGIN_BOTTOM;
    let x_of = |u: f64| MARGIN_LEFT + (u - u0) / (u1 - u0) * plot_w;
    let y_of = |v: f64| MARGIN_TOP + plot_h - (v - v0) / (v1 - v0) * plot_h;
    let vmax = {
        let m = grid.max_abs();
        if m > 0.0 {
            m
        } else {
            1.0
        }
    };

    let mut out = String::new();
    svg_open(&mut out);
    text(&mut out, CANVAS_W / 2.0, 26.0, 16.0, "middle", title, "");

    out.push_str(&format!(
        "<clipPath id=\"plot\"><rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\"/></clipPath>\n",
        px(MARGIN_LEFT),
        px(MARGIN_TOP),
        px(plot_w),
        px(plot_h)
    ));
    out.push_str("<g clip-path=\"url(#plot)\">\n");

    // One rect per grid node, centered on the node; edge rects clip.
    let du = plot_w / (nu - 1) as f64;
    let dv = plot_h / (nv - 1) as f64;
    for iu in 0..nu {
        for iv in 0..nv {
            let cx = x_of(grid.u_axis[iu]);
            let cy = y_of(grid.v_axis[iv]);
            out.push_str(&format!(
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n",
                px(cx - du / 2.0),
                px(cy - dv / 2.0),
                px(du),
                px(dv),
                diverging_color(grid.value(iu, iv), vmax)
            ));
        }
    }

    // Gait path, folded into the period on wrapped axes; a fold splits the
    // polyline so no segment spans the seam.
    let fold = |raw: f64, lo: f64, hi: f64, wraps: bool| {
        if wraps {
            lo + (raw - lo).rem_euclid(hi - lo)
        } else {
            raw
        }
    };
    let mut runs: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
    let mut prev: Option<(f64, f64)> = None;
    for &(ru, rv) in path {
        let u = fold(ru, u0, u1, grid.wraps.0);
        let v = fold(rv, v0, v1, grid.wraps.1);
        if let Some((pu, pv)) = prev {
            let seam = (grid.wraps.0 && (u - pu).abs() > (u1 - u0) / 2.0)
                || (grid.wraps.1 && (v - pv).abs() > (v1 - v0) / 2.0);
            if seam {
                runs.push(Vec::new());
            }
        }
        runs.last_mut().unwrap().push((u, v));
        prev = Some((u, v));
    }
    for run in runs.iter().filter(|r| r.len() > 1) {
        let pts: Vec<String> = run
            .iter()
            .map(|&(u, v)| format!("{},{}", px(x_of(u)), px(y_of(v))))
            .collect();
        out.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"1.8\"/>\n",
            pts.join(" ")
        ));
    }
    out.push_str("</g>\n");

    out.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        px(MARGIN_LEFT),
        px(MARGIN_TOP),
        px(plot_w),
        px(plot_h)
    ));

    let (uticks, ustep) = ticks(u0, u1, 6);
    for t in &uticks {
        let x = x_of(*t);
        out.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n",
            px(x),
            px(MARGIN_TOP + plot_h),
            px(MARGIN_TOP + plot_h + 5.0)
        ));
        text(
            &mut out,
            x,
            MARGIN_TOP + plot_h + 18.0,
            11.0,
            "middle",
            &tick_label(*t, ustep),
            "",
        );
    }
    let (vticks, vstep) = ticks(v0, v1, 6);
    for t in &vticks {
        let y = y_of(*t);
        out.push_str(&format!(
            "<line x1=\"{1}\" y1=\"{0}\" x2=\"{2}\" y2=\"{0}\" stroke=\"black\"/>\n",
            px(y),
            px(MARGIN_LEFT - 5.0),
            px(MARGIN_LEFT)
        ));
        text(
            &mut out,
            MARGIN_LEFT - 9.0,
            y + 4.0,
            11.0,
            "end",
            &tick_label(*t, vstep),
            "",
        );
    }
    text(
        &mut out,
        MARGIN_LEFT + plot_w / 2.0,
        CANVAS_H - 16.0,
        13.0,
        "middle",
        u_label,
        "",
    );
    text(
        &mut out,
        20.0,
        MARGIN_TOP + plot_h / 2.0,
        13.0,
        "middle",
        v_label,
        &format!(
            " transform=\"rotate(-90 {} {})\"",
            px(20.0),
            px(MARGIN_TOP + plot_h / 2.0)
        ),
    );

    // Colorbar: +vmax at the top, -vmax at the bottom.
    let bar_x = MARGIN_LEFT + plot_w + 28.0;
    let bar_w = 16.0;
    let n_bands = 48;
    for i in 0..n_bands {
        let frac = (i as f64 + 0.5) / n_bands as f64;
        let value = vmax * (1.0 - 2.0 * frac);
        let y = MARGIN_TOP + plot_h * i as f64 / n_bands as f64;
        out.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n",
            px(bar_x),
            px(y),
            px(bar_w),
            px(plot_h / n_bands as f64 + 0.5),
            diverging_color(value, vmax)
        ));
    }
    out.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        px(bar_x),
        px(MARGIN_TOP),
        px(bar_w),
        px(plot_h)
    ));
    for (frac, value) in [(0.0, vmax), (0.5, 0.0), (1.0, -vmax)] {
        text(
            &mut out,
            bar_x + bar_w + 6.0,
            MARGIN_TOP + plot_h * frac + 4.0,
            11.0,
            "start",
            &format!("{value:.3}"),
            "",
        );
    }

    out.push_str("</svg>\n");
    out
}

/// Line plot with markers, optional symmetric error bars, and a legend.
pub fn line_plot_svg(series: &[Series], title: &str, x_label: &str, y_label: &str) -> String {
    let plot_w = CANVAS_W - MARGIN_LEFT - 40.0;
    let plot_h = CANVAS_H - MARGIN_TOP - MARGIN_BOTTOM;

    let mut x_lo = f64::INFINITY;
    let mut x_hi = f64::NEG_INFINITY;
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for s in series {
        for (i, &(x, y)) in s.points.iter().enumerate() {
            let e = s.err.as_ref().map_or(0.0, |e| e[i]);
            x_lo = x_lo.min(x);
            x_hi = x_hi.max(x);
            y_lo = y_lo.min(y - e);
            y_hi = y_hi.max(y + e);
        }
    }
    if !x_lo.is_finite() {
        x_lo = 0.0;
        x_hi = 1.0;
        y_lo = 0.0;
        y_hi = 1.0;
    }
    if x_hi - x_lo < 1e-12 {
        x_lo -= 0.5;
        x_hi += 0.5;
    }
    if y_hi - y_lo < 1e-12 {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    let x_pad = (x_hi - x_lo) * 0.05;
    let y_pad = (y_hi - y_lo) * 0.08;
    let (x_lo, x_hi) = (x_lo - x_pad, x_hi + x_pad);
    let (y_lo, y_hi) = (y_lo - y_pad, y_hi + y_pad);
    let x_of = |x: f64| MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let y_of = |y: f64| MARGIN_TOP + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h;

    let mut out = String::new();
    svg_open(&mut out);
    text(&mut out, CANVAS_W / 2.0, 26.0, 16.0, "middle", title, "");

    let (xticks, xstep) = ticks(x_lo, x_hi, 7);
    let (yticks, ystep) = ticks(y_lo, y_hi, 6);
    for t in &yticks {
        let y = y_of(*t);
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#dddddd\"/>\n",
            px(MARGIN_LEFT),
            px(y),
            px(MARGIN_LEFT + plot_w),
            px(y)
        ));
        text(
            &mut out,
            MARGIN_LEFT - 9.0,
            y + 4.0,
            11.0,
            "end",
            &tick_label(*t, ystep),
            "",
        );
    }
    for t in &xticks {
        let x = x_of(*t);
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
            px(x),
            px(MARGIN_TOP + plot_h),
            px(x),
            px(MARGIN_TOP + plot_h + 5.0)
        ));
        text(
            &mut out,
            x,
            MARGIN_TOP + plot_h + 18.0,
            11.0,
            "middle",
            &tick_label(*t, xstep),
            "",
        );
    }

    for (si, s) in series.iter().enumerate() {
        let color = SERIES_COLORS[si % SERIES_COLORS.len()];
        if let Some(err) = &s.err {
            for (i, &(x, y)) in s.points.iter().enumerate() {
                if err[i] <= 0.0 {
                    continue;
                }
                let (xp, ylo, yhi) = (x_of(x), y_of(y - err[i]), y_of(y + err[i]));
                out.push_str(&format!(
                    "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"{color}\"/>\n",
                    px(xp),
                    px(ylo),
                    px(yhi)
                ));
                for ye in [ylo, yhi] {
                    out.push_str(&format!(
                        "<line x1=\"{}\" y1=\"{2}\" x2=\"{}\" y2=\"{2}\" stroke=\"{color}\"/>\n",
                        px(xp - 4.0),
                        px(xp + 4.0),
                        px(ye)
                    ));
                }
            }
        }
        if s.points.len() > 1 {
            let pts: Vec<String> = s
                .points
                .iter()
                .map(|&(x, y)| format!("{},{}", px(x_of(x)), px(y_of(y))))
                .collect();
            out.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"/>\n",
                pts.join(" ")
            ));
        }
        for &(x, y) in &s.points {
            out.push_str(&format!(
                "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{color}\"/>\n",
                px(x_of(x)),
                px(y_of(y))
            ));
        }
    }

    out.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        px(MARGIN_LEFT),
        px(MARGIN_TOP),
        px(plot_w),
        px(plot_h)
    ));
    text(
        &mut out,
        MARGIN_LEFT + plot_w / 2.0,
        CANVAS_H - 16.0,
        13.0,
        "middle",
        x_label,
        "",
    );
    text(
        &mut out,
        20.0,
        MARGIN_TOP + plot_h / 2.0,
        13.0,
        "middle",
        y_label,
        &format!(
            " transform=\"rotate(-90 {} {})\"",
            px(20.0),
            px(MARGIN_TOP + plot_h / 2.0)
        ),
    );

    if series.len() > 1 || series.iter().any(|s| !s.label.is_empty()) {
        let mut ly = MARGIN_TOP + 14.0;
        let lx = MARGIN_LEFT + plot_w - 180.0;
        for (si, s) in series.iter().enumerate() {
            let color = SERIES_COLORS[si % SERIES_COLORS.len()];
            out.push_str(&format!(
                "<line x1=\"{}\" y1=\"{2}\" x2=\"{}\" y2=\"{2}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
                px(lx),
                px(lx + 22.0),
                px(ly - 4.0)
            ));
            text(&mut out, lx + 28.0, ly, 12.0, "start", &s.label, "");
            ly += 17.0;
        }
    }

    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colors_interpolate_between_blue_white_red() {
        assert_eq!(diverging_color(0.0, 1.0), "#f7f7f7");
        assert_eq!(diverging_color(1.0, 1.0), "#b2182b");
        assert_eq!(diverging_color(-1.0, 1.0), "#2166ac");
        assert_eq!(diverging_color(f64::NAN, 1.0), MASK_COLOR);
        // Far out of range clamps rather than overflowing.
        assert_eq!(diverging_color(7.0, 1.0), diverging_color(1.0, 1.0));
    }

    #[test]
    fn tick_ladder_uses_round_steps() {
        let (t, step) = ticks(0.0, 1.5, 7);
        assert!((step - 0.25).abs() < 1e-12 || (step - 0.2).abs() < 1e-12);
        assert!(t.len() >= 4);
        let (t, _) = ticks(-0.003, 0.003, 6);
        assert!(t.iter().any(|v| *v == 0.0));
    }

    #[test]
    fn line_plot_is_well_formed_and_deterministic() {
        let series = vec![
            Series {
                label: "a".into(),
                points: vec![(0.0, 1.0), (1.0, 3.0), (2.0, 2.0)],
                err: Some(vec![0.2, 0.1, 0.3]),
            },
            Series {
                label: "b".into(),
                points: vec![(0.0, 2.0), (1.0, 1.0), (2.0, 4.0)],
                err: None,
            },
        ];
        let one = line_plot_svg(&series, "turn vs k", "k", "deg/cycle");
        let two = line_plot_svg(&series, "turn vs k", "k", "deg/cycle");
        assert_eq!(one, two);
        assert!(one.starts_with("<svg "));
        assert!(one.ends_with("</svg>\n"));
        assert!(one.contains("polyline"));
        assert!(one.matches("<circle").count() == 6);
    }
}
