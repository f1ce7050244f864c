//! Static SVG bar charts of a bandwidth sweep.

use std::fmt::Write as _;

use crate::plan::LayoutKind;
use crate::sim::SweepRow;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 360.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

fn color(kind: LayoutKind) -> &'static str {
    match kind {
        LayoutKind::Cfa => "#1f77b4",
        LayoutKind::Original => "#ff7f0e",
        LayoutKind::Bbox => "#2ca02c",
        LayoutKind::Dtile => "#d62728",
    }
}

const REDUNDANT: &str = "#b0b0b0";

/// One group of bars per tile size, one bar per layout. The colored part
/// is effective bandwidth, the grey part on top is redundant traffic; both
/// as a fraction of the bus peak.
pub fn bandwidth_svg(title: &str, rows: &[SweepRow]) -> String {
    let mut tiles: Vec<&Vec<i64>> = Vec::new();
    for r in rows {
        if !tiles.contains(&&r.tile) {
            tiles.push(&r.tile);
        }
    }
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let y = |v: f64| TOP + plot_h * (1.0 - v.clamp(0.0, 1.0));
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{title}: bandwidth / bus peak</text>"#,
        LEFT + plot_w / 2.0
    );
    for step in 0..=4 {
        let v = step as f64 / 4.0;
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{0:.1}" x2="{1:.1}" y2="{0:.1}" stroke="#dddddd"/><text x="{2:.1}" y="{3:.1}" text-anchor="end">{v:.2}</text>"##,
            y(v),
            LEFT + plot_w,
            LEFT - 6.0,
            y(v) + 4.0
        );
    }
    let group_w = plot_w / tiles.len().max(1) as f64;
    let bar_w = group_w * 0.8 / LayoutKind::ALL.len() as f64;
    for (g, tile) in tiles.iter().enumerate() {
        let gx = LEFT + g as f64 * group_w + group_w * 0.1;
        for (b, kind) in LayoutKind::ALL.into_iter().enumerate() {
            let Some(r) = rows.iter().find(|r| &r.tile == *tile && r.layout == kind) else {
                continue;
            };
            let eff = r.result.ratio_to_peak;
            let raw = if r.result.useful_bytes > 0 {
                eff * r.result.total_bytes as f64 / r.result.useful_bytes as f64
            } else {
                0.0
            };
            let x = gx + b as f64 * bar_w;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{REDUNDANT}"/>"#,
                y(raw),
                bar_w - 2.0,
                y(eff) - y(raw)
            );
            let _ = writeln!(
                s,
                r#"<rect x="{x:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{}"/>"#,
                y(eff),
                bar_w - 2.0,
                y(0.0) - y(eff),
                color(kind)
            );
        }
        let label = tile.iter().map(i64::to_string).collect::<Vec<_>>().join("x");
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{label}</text>"#,
            gx + group_w * 0.4,
            y(0.0) + 18.0
        );
    }
    let _ = writeln!(
        s,
        r##"<line x1="{LEFT}" y1="{0:.1}" x2="{1:.1}" y2="{0:.1}" stroke="#000000"/>"##,
        y(0.0),
        LEFT + plot_w
    );
    let legend_x = WIDTH - RIGHT + 20.0;
    let entries: Vec<(&str, &str)> = LayoutKind::ALL
        .into_iter()
        .map(|k| (k.as_str(), color(k)))
        .chain([("redundant", REDUNDANT)])
        .collect();
    for (n, (label, fill)) in entries.into_iter().enumerate() {
        let ly = TOP + n as f64 * 20.0;
        let _ = writeln!(
            s,
            r#"<rect x="{legend_x}" y="{ly}" width="12" height="12" fill="{fill}"/><text x="{}" y="{}">{label}</text>"#,
            legend_x + 18.0,
            ly + 10.0
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SimResult;

    fn row(tile: i64, layout: LayoutKind, ratio: f64) -> SweepRow {
        SweepRow {
            benchmark: "b".into(),
            tile: vec![tile; 3],
            layout,
            data_tile: None,
            result: SimResult {
                total_bytes: 200,
                useful_bytes: 100,
                ratio_to_peak: ratio,
                ..Default::default()
            },
        }
    }

    #[test]
    fn one_stacked_bar_per_row() {
        let rows = vec![row(16, LayoutKind::Cfa, 0.4), row(16, LayoutKind::Bbox, 0.2), row(32, LayoutKind::Cfa, 0.45)];
        let svg = bandwidth_svg("b", &rows);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        // Two rects per bar plus background and five legend swatches.
        assert_eq!(svg.matches("<rect").count(), 2 * rows.len() + 1 + 5);
        assert!(svg.contains(">16x16x16<") && svg.contains(">32x32x32<"));
        assert_eq!(svg, bandwidth_svg("b", &rows));
    }
}
