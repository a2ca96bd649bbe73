//! Direct SVG line charts, no plotting dependency. Fixed 800x500 canvas,
//! optional logarithmic x axis.

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 55.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

#[derive(Debug, Clone)]
pub struct PlotSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Renders labeled series as polylines with axes, ticks and a legend.
pub fn render(
    series: &[PlotSeries],
    title: &str,
    x_label: &str,
    y_label: &str,
    log_x: bool,
) -> Result<String, String> {
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        return Err("nothing to plot".to_string());
    }
    let xs = |x: f64| -> f64 {
        if log_x {
            x.log10()
        } else {
            x
        }
    };
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in &s.points {
            if log_x && x <= 0.0 {
                continue;
            }
            x_min = x_min.min(xs(x));
            x_max = x_max.max(xs(x));
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    if !x_min.is_finite() || !y_min.is_finite() {
        return Err("no drawable points (log axis with nonpositive x?)".to_string());
    }
    if x_max - x_min < 1e-12 {
        x_max = x_min + 1.0;
    }
    if y_max - y_min < 1e-12 {
        y_max = y_min + 1.0;
    }
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + (xs(x) - x_min) / (x_max - x_min) * plot_w;
    let py = |y: f64| MARGIN_TOP + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h;

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    out.push_str(&format!(
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"15\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    ));

    // Axes.
    out.push_str(&format!(
        "<line x1=\"{MARGIN_LEFT}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        HEIGHT - MARGIN_BOTTOM,
        WIDTH - MARGIN_RIGHT,
        HEIGHT - MARGIN_BOTTOM
    ));
    out.push_str(&format!(
        "<line x1=\"{MARGIN_LEFT}\" y1=\"{MARGIN_TOP}\" x2=\"{MARGIN_LEFT}\" y2=\"{}\" \
         stroke=\"black\"/>\n",
        HEIGHT - MARGIN_BOTTOM
    ));

    // Ticks and grid.
    for k in 0..=5 {
        let fx = x_min + (x_max - x_min) * k as f64 / 5.0;
        let value = if log_x { 10f64.powf(fx) } else { fx };
        let x = MARGIN_LEFT + plot_w * k as f64 / 5.0;
        out.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"black\"/>\n",
            HEIGHT - MARGIN_BOTTOM,
            HEIGHT - MARGIN_BOTTOM + 5.0
        ));
        out.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"11\">{}</text>\n",
            HEIGHT - MARGIN_BOTTOM + 18.0,
            format_tick(value)
        ));
        let fy = y_min + (y_max - y_min) * k as f64 / 5.0;
        let y = MARGIN_TOP + plot_h * (1.0 - k as f64 / 5.0);
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{MARGIN_LEFT}\" y2=\"{y}\" stroke=\"black\"/>\n",
            MARGIN_LEFT - 5.0
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" \
             font-size=\"11\">{}</text>\n",
            MARGIN_LEFT - 8.0,
            y + 4.0,
            format_tick(fy)
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"13\">{}</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"13\" transform=\"rotate(-90 18 {})\">{}</text>\n",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape(y_label)
    ));

    // Series.
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = s
            .points
            .iter()
            .filter(|(x, _)| !log_x || *x > 0.0)
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            coords.join(" ")
        ));
        let ly = MARGIN_TOP + 16.0 + 18.0 * i as f64;
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" \
             stroke-width=\"2\"/>\n",
            MARGIN_LEFT + 10.0,
            MARGIN_LEFT + 34.0
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            MARGIN_LEFT + 40.0,
            ly + 4.0,
            escape(&s.label)
        ));
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn format_tick(value: f64) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    let magnitude = value.abs();
    if magnitude >= 1e5 || magnitude < 1e-3 {
        format!("{value:.1e}")
    } else if magnitude >= 100.0 {
        format!("{value:.0}")
    } else {
        format!("{value:.2}")
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_polylines_axes_and_legend() {
        let series = vec![
            PlotSeries {
                label: "a".to_string(),
                points: vec![(1.0, 0.0), (2.0, 1.0), (3.0, 0.5)],
            },
            PlotSeries {
                label: "b".to_string(),
                points: vec![(1.0, 1.0), (3.0, 2.0)],
            },
        ];
        let svg = render(&series, "title", "t", "regret", false).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("viewBox=\"0 0 800 500\""));
        assert!(svg.contains(">a</text>") && svg.contains(">b</text>"));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(render(&[], "t", "x", "y", false).is_err());
        let only_empty = vec![PlotSeries {
            label: "e".to_string(),
            points: vec![],
        }];
        assert!(render(&only_empty, "t", "x", "y", false).is_err());
    }

    #[test]
    fn log_x_skips_nonpositive_points() {
        let series = vec![PlotSeries {
            label: "s".to_string(),
            points: vec![(0.0, 1.0), (10.0, 2.0), (100.0, 3.0)],
        }];
        let svg = render(&series, "t", "x", "y", true).unwrap();
        assert!(svg.contains("<polyline"));
    }
}
