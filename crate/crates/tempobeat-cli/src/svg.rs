//! Minimal deterministic SVG charts: line charts for correlograms and
//! grouped bar charts for RMSD decompositions and profiles. Coordinates are
//! formatted at fixed precision so identical inputs give identical bytes.

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 62.0;
const MARGIN_R: f64 = 18.0;
const MARGIN_T: f64 = 38.0;
const MARGIN_B: f64 = 52.0;

// Ochre / red / blue for the empty / full / restricted models; extras after.
const PALETTE: [&str; 5] = ["#d9a400", "#c23b22", "#2a6f97", "#4d4d4d", "#7b9e37"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if a >= 1000.0 {
        format!("{v:.0}")
    } else if a >= 1.0 {
        format!("{v:.2}")
    } else {
        format!("{v:.3}")
    }
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        MARGIN_L + (v - self.x_min) / (self.x_max - self.x_min) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN_B
            - (v - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

fn open_svg(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{:.2}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        WIDTH / 2.0,
        esc(title)
    )
}

fn axes(frame: &Frame, x_label: &str, y_label: &str) -> String {
    let mut out = String::new();
    let x0 = MARGIN_L;
    let x1 = WIDTH - MARGIN_R;
    let y0 = HEIGHT - MARGIN_B;
    let y1 = MARGIN_T;
    out.push_str(&format!(
        "<line x1=\"{x0:.2}\" y1=\"{y0:.2}\" x2=\"{x1:.2}\" y2=\"{y0:.2}\" stroke=\"#333\"/>\n\
         <line x1=\"{x0:.2}\" y1=\"{y0:.2}\" x2=\"{x0:.2}\" y2=\"{y1:.2}\" stroke=\"#333\"/>\n"
    ));
    for i in 0..=4 {
        let fy = frame.y_min + (frame.y_max - frame.y_min) * i as f64 / 4.0;
        let py = frame.y(fy);
        out.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{py:.2}\" x2=\"{x0:.2}\" y2=\"{py:.2}\" stroke=\"#333\"/>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>\n",
            x0 - 4.0,
            x0 - 7.0,
            py + 4.0,
            fmt_tick(fy)
        ));
        let fx = frame.x_min + (frame.x_max - frame.x_min) * i as f64 / 4.0;
        let px = frame.x(fx);
        out.push_str(&format!(
            "<line x1=\"{px:.2}\" y1=\"{y0:.2}\" x2=\"{px:.2}\" y2=\"{:.2}\" stroke=\"#333\"/>\n\
             <text x=\"{px:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>\n",
            y0 + 4.0,
            y0 + 18.0,
            fmt_tick(fx)
        ));
    }
    out.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"14\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.2})\">{}</text>\n",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        HEIGHT - 14.0,
        esc(x_label),
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        esc(y_label)
    ));
    out
}

fn legend(names: &[&str]) -> String {
    let mut out = String::new();
    for (i, name) in names.iter().enumerate() {
        let x = MARGIN_L + 12.0 + i as f64 * 130.0;
        let color = PALETTE[i % PALETTE.len()];
        out.push_str(&format!(
            "<rect x=\"{x:.2}\" y=\"{:.2}\" width=\"11\" height=\"11\" fill=\"{color}\"/>\n\
             <text x=\"{:.2}\" y=\"{:.2}\">{}</text>\n",
            MARGIN_T - 7.0,
            x + 15.0,
            MARGIN_T + 3.0,
            esc(name)
        ));
    }
    out
}

/// A multi-series line chart; each series is (name, points).
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(&str, Vec<(f64, f64)>)],
) -> String {
    let points: Vec<(f64, f64)> = series.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    let (mut x_min, mut x_max) = (f64::MAX, f64::MIN);
    let (mut y_min, mut y_max) = (f64::MAX, f64::MIN);
    for &(x, y) in &points {
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_min = y_min.min(y);
        y_max = y_max.max(y);
    }
    if !x_min.is_finite() {
        x_min = 0.0;
        x_max = 1.0;
        y_min = 0.0;
        y_max = 1.0;
    }
    if (y_max - y_min).abs() < 1e-12 {
        y_min -= 0.5;
        y_max += 0.5;
    }
    let pad = (y_max - y_min) * 0.06;
    let frame = Frame {
        x_min,
        x_max: if (x_max - x_min).abs() < 1e-12 { x_min + 1.0 } else { x_max },
        y_min: y_min - pad,
        y_max: y_max + pad,
    };

    let mut out = open_svg(title);
    out.push_str(&axes(&frame, x_label, y_label));
    if frame.y_min < 0.0 && frame.y_max > 0.0 {
        let zero = frame.y(0.0);
        out.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{zero:.2}\" x2=\"{:.2}\" y2=\"{zero:.2}\" stroke=\"#bbb\" stroke-dasharray=\"4 3\"/>\n",
            MARGIN_L,
            WIDTH - MARGIN_R
        ));
    }
    for (i, (_, points)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.x(x), frame.y(y)))
            .collect();
        out.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\"/>\n",
            coords.join(" ")
        ));
    }
    let names: Vec<&str> = series.iter().map(|(n, _)| *n).collect();
    out.push_str(&legend(&names));
    out.push_str("</svg>\n");
    out
}

/// A grouped bar chart; absent values leave a gap.
pub fn bar_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    labels: &[String],
    series: &[(&str, Vec<Option<f64>>)],
) -> String {
    let values: Vec<f64> = series
        .iter()
        .flat_map(|(_, v)| v.iter().flatten().copied())
        .collect();
    let mut y_max = values.iter().cloned().fold(0.0f64, f64::max);
    let mut y_min = values.iter().cloned().fold(0.0f64, f64::min);
    if y_max == y_min {
        y_max = y_min + 1.0;
    }
    if y_min > 0.0 {
        y_min = 0.0;
    }
    let frame = Frame {
        x_min: 0.0,
        x_max: labels.len() as f64,
        y_min,
        y_max: y_max * 1.06,
    };

    let mut out = open_svg(title);
    // Y axis only; category labels replace numeric x ticks.
    let x0 = MARGIN_L;
    let y0 = HEIGHT - MARGIN_B;
    out.push_str(&format!(
        "<line x1=\"{x0:.2}\" y1=\"{y0:.2}\" x2=\"{:.2}\" y2=\"{y0:.2}\" stroke=\"#333\"/>\n\
         <line x1=\"{x0:.2}\" y1=\"{y0:.2}\" x2=\"{x0:.2}\" y2=\"{:.2}\" stroke=\"#333\"/>\n",
        WIDTH - MARGIN_R,
        MARGIN_T
    ));
    for i in 0..=4 {
        let fy = frame.y_min + (frame.y_max - frame.y_min) * i as f64 / 4.0;
        let py = frame.y(fy);
        out.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{py:.2}\" x2=\"{x0:.2}\" y2=\"{py:.2}\" stroke=\"#333\"/>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>\n",
            x0 - 4.0,
            x0 - 7.0,
            py + 4.0,
            fmt_tick(fy)
        ));
    }
    let step = (WIDTH - MARGIN_L - MARGIN_R) / labels.len() as f64;
    let label_every = (labels.len() / 24).max(1);
    for (i, label) in labels.iter().enumerate() {
        if i % label_every == 0 {
            out.push_str(&format!(
                "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"10\">{}</text>\n",
                MARGIN_L + (i as f64 + 0.5) * step,
                y0 + 16.0,
                esc(label)
            ));
        }
    }
    let k = series.len() as f64;
    let band = step * 0.82;
    let bar_w = band / k;
    let zero_y = frame.y(0.0f64.max(frame.y_min));
    for (s, (_, vals)) in series.iter().enumerate() {
        let color = PALETTE[s % PALETTE.len()];
        for (i, v) in vals.iter().enumerate() {
            let Some(v) = v else { continue };
            let x = MARGIN_L + i as f64 * step + (step - band) / 2.0 + s as f64 * bar_w;
            let vy = frame.y(*v);
            let (top, h) = if vy <= zero_y {
                (vy, zero_y - vy)
            } else {
                (zero_y, vy - zero_y)
            };
            out.push_str(&format!(
                "<rect x=\"{x:.2}\" y=\"{top:.2}\" width=\"{bar_w:.2}\" height=\"{h:.2}\" fill=\"{color}\"/>\n"
            ));
        }
    }
    out.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"14\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.2})\">{}</text>\n",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        HEIGHT - 14.0,
        esc(x_label),
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        esc(y_label)
    ));
    let names: Vec<&str> = series.iter().map(|(n, _)| *n).collect();
    out.push_str(&legend(&names));
    out.push_str("</svg>\n");
    out
}
