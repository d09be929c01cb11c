//! Minimal native SVG line plot of the coherence envelope. A convenience
//! artifact only; no external renderer.

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 20.0;
const MARGIN_BOTTOM: f64 = 40.0;

/// Renders |non-diagonal contribution|(t), normalized, as a polyline with
/// plain axes.
pub fn envelope_plot(times: &[f64], envelope: &[f64]) -> String {
    let t_max = times.last().copied().unwrap_or(1.0).max(f64::MIN_POSITIVE);
    let e_max = envelope.iter().copied().fold(0.0f64, f64::max).max(1e-12);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let x = |t: f64| MARGIN_LEFT + t / t_max * plot_w;
    let y = |e: f64| MARGIN_TOP + (1.0 - (e / e_max).clamp(0.0, 1.0)) * plot_h;

    let mut points = String::new();
    for (t, e) in times.iter().zip(envelope) {
        if !points.is_empty() {
            points.push(' ');
        }
        points.push_str(&format!("{:.2},{:.2}", x(*t), y(*e)));
    }
    let x0 = MARGIN_LEFT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y1 = MARGIN_TOP;
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "viewBox=\"0 0 {w} {h}\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n",
            "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n",
            "<text x=\"{x1}\" y=\"{ylab}\" text-anchor=\"end\" font-size=\"12\">t = {tmax:.6e}</text>\n",
            "<text x=\"{x0}\" y=\"{ytop}\" font-size=\"12\">|sum_nd| / |sum_nd(0)| (max {emax:.6e})</text>\n",
            "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"{points}\"/>\n",
            "</svg>\n"
        ),
        w = WIDTH,
        h = HEIGHT,
        x0 = x0,
        y0 = y0,
        x1 = x1,
        y1 = y1,
        ylab = y0 + 16.0,
        ytop = y1 - 6.0,
        tmax = t_max,
        emax = e_max,
        points = points,
    )
}
