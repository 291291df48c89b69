//! Static SVG time plots of a trajectory.

use std::fmt::Write;

use nhstab_core::Trajectory;

const WIDTH: f64 = 900.0;
const PANEL_HEIGHT: f64 = 260.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 40.0;
const GAP: f64 = 50.0;
const TICKS: usize = 5;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Keeps the first, smallest, largest and last point of every pixel column,
/// in time order, so spikes survive the reduction.
pub fn decimate(t: &[f64], y: &[f64], columns: usize) -> Vec<(f64, f64)> {
    if t.len() <= 4 * columns || columns == 0 {
        return t.iter().copied().zip(y.iter().copied()).collect();
    }
    let (t0, t1) = (t[0], t[t.len() - 1]);
    let span = if t1 > t0 { t1 - t0 } else { 1.0 };
    let column = |v: f64| (((v - t0) / span * columns as f64) as usize).min(columns - 1);
    let mut keep = Vec::new();
    let mut start = 0;
    while start < t.len() {
        let c = column(t[start]);
        let mut end = start;
        while end + 1 < t.len() && column(t[end + 1]) == c {
            end += 1;
        }
        let range = start..=end;
        let lo = range.clone().min_by(|&a, &b| y[a].total_cmp(&y[b])).expect("range is non-empty");
        let hi = range.max_by(|&a, &b| y[a].total_cmp(&y[b])).expect("range is non-empty");
        let mut idx = [start, lo, hi, end];
        idx.sort_unstable();
        for (k, &i) in idx.iter().enumerate() {
            if k == 0 || idx[k - 1] != i {
                keep.push((t[i], y[i]));
            }
        }
        start = end + 1;
    }
    keep
}

fn label(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        "0".into()
    } else if !(1e-2..1e4).contains(&a) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

struct Panel {
    top: f64,
    t_range: (f64, f64),
    y_range: (f64, f64),
}

impl Panel {
    fn new(top: f64, t_range: (f64, f64), series: &[Vec<(f64, f64)>]) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in series.iter().flatten() {
            lo = lo.min(p.1);
            hi = hi.max(p.1);
        }
        if !lo.is_finite() || !hi.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            (lo, hi) = (lo - 1.0, hi + 1.0);
        }
        Self { top, t_range, y_range: (lo, hi) }
    }

    fn px(&self, t: f64) -> f64 {
        let (a, b) = self.t_range;
        LEFT + (t - a) / (b - a) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        let (a, b) = self.y_range;
        self.top + PANEL_HEIGHT - (y - a) / (b - a) * PANEL_HEIGHT
    }

    fn axes(&self, out: &mut String, title: &str) {
        let (x0, x1) = (LEFT, WIDTH - RIGHT);
        let (y0, y1) = (self.top, self.top + PANEL_HEIGHT);
        let _ = writeln!(
            out,
            r##"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{PANEL_HEIGHT:.2}" fill="none" stroke="#444"/>"##,
            x1 - x0
        );
        let _ = writeln!(out, r#"<text x="{x0:.2}" y="{:.2}" font-size="13">{title}</text>"#, y0 - 8.0);
        for k in 0..=TICKS {
            let f = k as f64 / TICKS as f64;
            let t = self.t_range.0 + f * (self.t_range.1 - self.t_range.0);
            let y = self.y_range.0 + f * (self.y_range.1 - self.y_range.0);
            let (px, py) = (self.px(t), self.py(y));
            let _ =
                writeln!(out, r##"<line x1="{px:.2}" y1="{y1:.2}" x2="{px:.2}" y2="{:.2}" stroke="#444"/>"##, y1 + 4.0);
            let _ = writeln!(
                out,
                r#"<text x="{px:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
                y1 + 17.0,
                label(t)
            );
            let _ =
                writeln!(out, r##"<line x1="{:.2}" y1="{py:.2}" x2="{x0:.2}" y2="{py:.2}" stroke="#444"/>"##, x0 - 4.0);
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
                x0 - 7.0,
                py + 4.0,
                label(y)
            );
        }
        if self.y_range.0 < 0.0 && self.y_range.1 > 0.0 {
            let py = self.py(0.0);
            let _ = writeln!(
                out,
                r##"<line x1="{x0:.2}" y1="{py:.2}" x2="{x1:.2}" y2="{py:.2}" stroke="#bbb" stroke-dasharray="4 3"/>"##
            );
        }
    }

    fn polyline(&self, out: &mut String, points: &[(f64, f64)], color: &str) {
        let coords: Vec<String> = points.iter().map(|&(t, y)| format!("{:.2},{:.2}", self.px(t), self.py(y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
            coords.join(" ")
        );
    }

    fn legend(&self, out: &mut String, row: usize, name: &str, color: &str) {
        let x = WIDTH - RIGHT + 15.0;
        let y = self.top + 12.0 + 18.0 * row as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/>"#,
            x + 20.0
        );
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" font-size="12">{name}</text>"#, x + 26.0, y + 4.0);
    }
}

/// Two stacked panels: the error norm, then every state component, both
/// against time.
pub fn render_svg(traj: &Trajectory, title: &str) -> String {
    let columns = (WIDTH - LEFT - RIGHT) as usize;
    let t = &traj.times;
    let t_range = match (t.first(), t.last()) {
        (Some(&a), Some(&b)) if b > a => (a, b),
        (Some(&a), _) => (a, a + 1.0),
        _ => (0.0, 1.0),
    };
    let norm = vec![decimate(t, &traj.error_norms(), columns)];
    let components: Vec<Vec<(f64, f64)>> = (0..traj.n())
        .map(|i| {
            let y: Vec<f64> = traj.states.iter().map(|x| x[i]).collect();
            decimate(t, &y, columns)
        })
        .collect();

    let height = TOP + 2.0 * PANEL_HEIGHT + GAP + 40.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.0} {height:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="20" font-size="15" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );

    let top = Panel::new(TOP, t_range, &norm);
    top.axes(&mut out, "error norm");
    top.polyline(&mut out, &norm[0], PALETTE[0]);
    top.legend(&mut out, 0, "|x - x*|", PALETTE[0]);

    let bottom = Panel::new(TOP + PANEL_HEIGHT + GAP, t_range, &components);
    bottom.axes(&mut out, "state components");
    for (i, series) in components.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        bottom.polyline(&mut out, series, color);
        bottom.legend(&mut out, i, &format!("x{}", i + 1), color);
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">t</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        height - 6.0
    );
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
