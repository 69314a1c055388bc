//! Dependency-free SVG bar charts. The output is plain text with fixed
//! number formatting, so identical inputs produce identical files.

/// One bar group: a label plus one optional value per series.
pub struct BarGroup {
    pub label: String,
    pub values: Vec<Option<f64>>,
}

const PALETTE: [&str; 4] = ["#4878a8", "#d08050", "#6aa56a", "#a06898"];

fn fmt(v: f64) -> String {
    format!("{v:.4}")
}

/// Render a grouped bar chart. `y_max` fixes the axis; bars are clipped to
/// it. Missing values render as a hollow marker at zero height.
pub fn grouped_bar_chart(
    title: &str,
    series: &[&str],
    groups: &[BarGroup],
    y_max: f64,
) -> String {
    let margin_left = 60.0;
    let margin_top = 40.0;
    let margin_bottom = 60.0;
    let bar_w = 26.0;
    let bar_gap = 6.0;
    let group_gap = 30.0;
    let plot_h = 240.0;
    let group_w = series.len() as f64 * (bar_w + bar_gap) + group_gap;
    let width = margin_left + groups.len() as f64 * group_w + 40.0;
    let height = margin_top + plot_h + margin_bottom;

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"monospace\" font-size=\"12\">\n"
    ));
    out.push_str(&format!(
        "  <text x=\"{margin_left}\" y=\"20\" font-size=\"14\">{title}</text>\n"
    ));
    // axis and horizontal gridlines at quarters
    for q in 0..=4 {
        let frac = q as f64 / 4.0;
        let y = margin_top + plot_h * (1.0 - frac);
        out.push_str(&format!(
            "  <line x1=\"{margin_left}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>\n",
            width - 20.0
        ));
        out.push_str(&format!(
            "  <text x=\"6\" y=\"{:.1}\">{}</text>\n",
            y + 4.0,
            fmt(y_max * frac)
        ));
    }
    // legend
    for (si, name) in series.iter().enumerate() {
        let x = margin_left + si as f64 * 120.0;
        out.push_str(&format!(
            "  <rect x=\"{x:.1}\" y=\"26\" width=\"10\" height=\"10\" fill=\"{}\"/>\n",
            PALETTE[si % PALETTE.len()]
        ));
        out.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"35\">{name}</text>\n",
            x + 14.0
        ));
    }
    // bars
    for (gi, group) in groups.iter().enumerate() {
        let gx = margin_left + gi as f64 * group_w;
        for (si, value) in group.values.iter().enumerate() {
            let x = gx + si as f64 * (bar_w + bar_gap);
            match value {
                Some(v) => {
                    let clamped = v.clamp(0.0, y_max);
                    let h = plot_h * clamped / y_max;
                    let y = margin_top + plot_h - h;
                    out.push_str(&format!(
                        "  <rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{bar_w}\" height=\"{h:.1}\" \
                         fill=\"{}\"/>\n",
                        PALETTE[si % PALETTE.len()]
                    ));
                    out.push_str(&format!(
                        "  <text x=\"{x:.1}\" y=\"{:.1}\" font-size=\"10\">{}</text>\n",
                        y - 4.0,
                        fmt(*v)
                    ));
                }
                None => {
                    let y = margin_top + plot_h;
                    out.push_str(&format!(
                        "  <rect x=\"{x:.1}\" y=\"{:.1}\" width=\"{bar_w}\" height=\"4\" \
                         fill=\"none\" stroke=\"#999\"/>\n",
                        y - 4.0
                    ));
                }
            }
        }
        out.push_str(&format!(
            "  <text x=\"{gx:.1}\" y=\"{:.1}\" transform=\"rotate(30 {gx:.1} {:.1})\">{}</text>\n",
            margin_top + plot_h + 16.0,
            margin_top + plot_h + 16.0,
            group.label
        ));
    }
    out.push_str("</svg>\n");
    out
}
