//! Minimal static SVG line chart: variance bound against qubit count on a
//! log ordinate, one series per theta, canonical baselines dashed. The CSV
//! is the source of truth; the chart is an inspection aid with no external
//! charting dependency.

use crate::sweep::SweepRecord;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 20.0;
const MARGIN_B: f64 = 50.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

fn x_pos(n: f64, n_lo: f64, n_hi: f64) -> f64 {
    let span = (n_hi - n_lo).max(1e-9);
    MARGIN_L + (n - n_lo) / span * (WIDTH - MARGIN_L - MARGIN_R)
}

fn y_pos(log_v: f64, lo: f64, hi: f64) -> f64 {
    let span = (hi - lo).max(1e-9);
    HEIGHT - MARGIN_B - (log_v - lo) / span * (HEIGHT - MARGIN_T - MARGIN_B)
}

fn polyline(points: &[(f64, f64)], color: &str, dashed: bool) -> String {
    let coords: Vec<String> = points
        .iter()
        .map(|(x, y)| format!("{x:.2},{y:.2}"))
        .collect();
    let dash = if dashed {
        " stroke-dasharray=\"6,4\""
    } else {
        ""
    };
    format!(
        "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\"{dash} points=\"{}\"/>\n",
        coords.join(" ")
    )
}

/// Renders the sweep as an SVG document string.
pub fn render_scaling_chart(records: &[SweepRecord]) -> String {
    let mut thetas: Vec<f64> = records.iter().map(|r| r.theta).collect();
    thetas.sort_by(|a, b| a.partial_cmp(b).expect("finite theta"));
    thetas.dedup();

    let positive: Vec<f64> = records
        .iter()
        .flat_map(|r| [r.optimal_value, r.canonical_value])
        .filter(|v| *v > 0.0)
        .collect();
    let (log_lo, log_hi) = if positive.is_empty() {
        (-1.0, 1.0)
    } else {
        let lo = positive.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = positive.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        ((lo.log10() - 0.1).floor(), (hi.log10() + 0.1).ceil())
    };
    let n_lo = records.iter().map(|r| r.n_qubits).min().unwrap_or(1) as f64;
    let n_hi = records.iter().map(|r| r.n_qubits).max().unwrap_or(1) as f64;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // Axes.
    let x0 = MARGIN_L;
    let x1 = WIDTH - MARGIN_R;
    let y0 = HEIGHT - MARGIN_B;
    let y1 = MARGIN_T;
    svg.push_str(&format!(
        "<line x1=\"{x0:.1}\" y1=\"{y0:.1}\" x2=\"{x1:.1}\" y2=\"{y0:.1}\" stroke=\"black\"/>\n"
    ));
    svg.push_str(&format!(
        "<line x1=\"{x0:.1}\" y1=\"{y0:.1}\" x2=\"{x0:.1}\" y2=\"{y1:.1}\" stroke=\"black\"/>\n"
    ));

    // Log ticks at integer decades.
    let mut decade = log_lo.ceil() as i64;
    while (decade as f64) <= log_hi {
        let y = y_pos(decade as f64, log_lo, log_hi);
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{y:.2}\" x2=\"{x0:.1}\" y2=\"{y:.2}\" stroke=\"black\"/>\n",
            x0 - 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\">1e{decade}</text>\n",
            x0 - 8.0,
            y + 4.0
        ));
        decade += 1;
    }

    // Qubit-count ticks.
    let mut n = n_lo as i64;
    while n as f64 <= n_hi {
        let x = x_pos(n as f64, n_lo, n_hi);
        svg.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{y0:.1}\" x2=\"{x:.2}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
            y0 + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{x:.2}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">{n}</text>\n",
            y0 + 18.0
        ));
        n += 1;
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">qubits</text>\n",
        (x0 + x1) / 2.0,
        HEIGHT - 12.0
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{:.1}\" font-size=\"12\" transform=\"rotate(-90 16 {:.1})\" text-anchor=\"middle\">variance bound</text>\n",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    ));

    for (idx, &theta) in thetas.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let mut series: Vec<&SweepRecord> =
            records.iter().filter(|r| r.theta == theta).collect();
        series.sort_by_key(|r| r.n_qubits);
        let optimal: Vec<(f64, f64)> = series
            .iter()
            .filter(|r| r.optimal_value > 0.0)
            .map(|r| {
                (
                    x_pos(r.n_qubits as f64, n_lo, n_hi),
                    y_pos(r.optimal_value.log10(), log_lo, log_hi),
                )
            })
            .collect();
        let canonical: Vec<(f64, f64)> = series
            .iter()
            .filter(|r| r.canonical_value > 0.0)
            .map(|r| {
                (
                    x_pos(r.n_qubits as f64, n_lo, n_hi),
                    y_pos(r.canonical_value.log10(), log_lo, log_hi),
                )
            })
            .collect();
        if optimal.len() >= 2 {
            svg.push_str(&polyline(&optimal, color, false));
        }
        if canonical.len() >= 2 {
            svg.push_str(&polyline(&canonical, color, true));
        }
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" fill=\"{color}\">theta={theta:.4}</text>\n",
            x1 - 110.0,
            y1 + 14.0 * (idx as f64 + 1.0)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(theta: f64, n: usize, opt: f64, can: f64) -> SweepRecord {
        SweepRecord {
            experiment: "product_observable",
            theta,
            n_qubits: n,
            optimal_value: opt,
            canonical_value: can,
            appendix_e_bound: 0.25,
            shadow_norm_canonical: can,
            rho_rank: 2,
            duality_gap: 0.0,
            converged: true,
            wall_time_s: 0.0,
        }
    }

    #[test]
    fn chart_contains_series_and_axes() {
        let rows = vec![
            record(0.0, 1, 0.5, 0.5),
            record(0.0, 2, 0.6, 0.7),
            record(0.0, 3, 0.68, 1.0),
        ];
        let svg = render_scaling_chart(&rows);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.contains("qubits"));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn zero_values_are_skipped_not_crashed() {
        let rows = vec![record(0.0, 1, 0.0, 0.0), record(0.0, 2, 0.0, 0.0)];
        let svg = render_scaling_chart(&rows);
        assert!(svg.contains("<svg"));
    }
}
