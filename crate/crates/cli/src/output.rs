//! Deterministic output files: curve.csv, events.csv, meta.json and one SVG
//! line chart per metric. Every float is printed with 17 significant digits
//! so reruns are byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use eblab_core::curve::{MergingCurve, MetricId};

use crate::config::Scenario;

pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{v:.16e}")
    }
}

pub fn curve_csv(scenario: &Scenario, curve: &MergingCurve) -> String {
    let mut out = String::from("n,metric,mean,median,q10,q90,reps_ok\n");
    for &n in &curve.n_grid {
        for metric in &scenario.metrics {
            if let Some(cell) = curve.summary(n, *metric) {
                let _ = writeln!(
                    out,
                    "{n},{},{},{},{},{},{}",
                    metric.as_str(),
                    fmt_f64(cell.mean),
                    fmt_f64(cell.median),
                    fmt_f64(cell.q10),
                    fmt_f64(cell.q90),
                    cell.reps_ok
                );
            }
        }
    }
    out
}

pub fn events_csv(curve: &MergingCurve) -> String {
    let mut out = String::from("n,rep,degenerate,tv_one,failed\n");
    for rec in &curve.records {
        let (degenerate, tv_one, failed) = match &rec.outcome {
            Some(o) => (
                o.degenerate.to_string(),
                o.tv_one.map(|t| t.to_string()).unwrap_or_default(),
                "false".to_string(),
            ),
            None => (String::new(), String::new(), "true".to_string()),
        };
        let _ = writeln!(out, "{},{},{degenerate},{tv_one},{failed}", rec.n, rec.rep);
    }
    out
}

#[derive(serde::Serialize)]
struct Meta<'a> {
    name: &'a str,
    family: &'a str,
    seed: u64,
    config_sha1: String,
    config: &'a serde_json::Value,
}

pub fn meta_json(scenario: &Scenario, raw_config: &str) -> String {
    let echo: serde_json::Value =
        serde_json::from_str(raw_config).unwrap_or(serde_json::Value::Null);
    let meta = Meta {
        name: &scenario.config.name,
        family: scenario.config.family.0.as_str(),
        seed: scenario.config.seed,
        config_sha1: sha1_hex(raw_config.as_bytes()),
        config: &echo,
    };
    let mut s = serde_json::to_string_pretty(&meta).expect("meta serializes");
    s.push('\n');
    s
}

/// Minimal line chart: mean (solid) and median (dashed) of one metric over
/// the n grid, log-scaled x when the grid spans more than a decade.
pub fn metric_svg(curve: &MergingCurve, metric: MetricId) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const ML: f64 = 70.0;
    const MR: f64 = 20.0;
    const MT: f64 = 34.0;
    const MB: f64 = 50.0;

    let ns: Vec<f64> = curve.n_grid.iter().map(|n| *n as f64).collect();
    let mut means = Vec::new();
    let mut medians = Vec::new();
    for &n in &curve.n_grid {
        if let Some(cell) = curve.summary(n, metric) {
            means.push(cell.mean);
            medians.push(cell.median);
        }
    }
    let log_x = ns.len() > 1 && ns[ns.len() - 1] / ns[0] > 10.0;
    let tx = |n: f64| -> f64 {
        let (a, b) = if log_x {
            (ns[0].ln(), ns[ns.len() - 1].ln())
        } else {
            (ns[0], ns[ns.len() - 1])
        };
        let v = if log_x { n.ln() } else { n };
        if b > a {
            ML + (W - ML - MR) * (v - a) / (b - a)
        } else {
            ML + (W - ML - MR) / 2.0
        }
    };
    let finite: Vec<f64> = means
        .iter()
        .chain(medians.iter())
        .cloned()
        .filter(|v| v.is_finite())
        .collect();
    let (mut ylo, mut yhi) = finite
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !ylo.is_finite() || !yhi.is_finite() {
        ylo = 0.0;
        yhi = 1.0;
    }
    if yhi - ylo < 1e-12 {
        yhi = ylo + 1.0;
    }
    let pad = 0.08 * (yhi - ylo);
    let (ylo, yhi) = (ylo - pad, yhi + pad);
    let ty = |v: f64| -> f64 { H - MB - (H - MB - MT) * (v - ylo) / (yhi - ylo) };

    let polyline = |vals: &[f64]| -> String {
        let pts: Vec<String> = ns
            .iter()
            .zip(vals)
            .filter(|(_, v)| v.is_finite())
            .map(|(n, v)| format!("{:.2},{:.2}", tx(*n), ty(*v)))
            .collect();
        pts.join(" ")
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    );
    let _ = writeln!(svg, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"22\" font-family=\"monospace\" font-size=\"15\">{} by n (solid: mean, dashed: median)</text>",
        ML,
        metric.as_str()
    );
    // Axes.
    let _ = writeln!(
        svg,
        "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{}\" stroke=\"black\"/>",
        H - MB
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{ML}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        H - MB,
        W - MR,
        H - MB
    );
    // X ticks at each grid point.
    for &n in &curve.n_grid {
        let x = tx(n as f64);
        let _ = writeln!(
            svg,
            "<line x1=\"{x:.2}\" y1=\"{}\" x2=\"{x:.2}\" y2=\"{}\" stroke=\"black\"/>",
            H - MB,
            H - MB + 5.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{x:.2}\" y=\"{}\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"middle\">{n}</text>",
            H - MB + 20.0
        );
    }
    // Y ticks.
    for i in 0..=4 {
        let v = ylo + (yhi - ylo) * i as f64 / 4.0;
        let y = ty(v);
        let _ = writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{y:.2}\" x2=\"{ML}\" y2=\"{y:.2}\" stroke=\"black\"/>",
            ML - 5.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"end\">{v:.3e}</text>",
            ML - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>",
        polyline(&means)
    );
    let _ = writeln!(
        svg,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"/>",
        polyline(&medians)
    );
    svg.push_str("</svg>\n");
    svg
}

pub fn write_all(
    dir: &Path,
    scenario: &Scenario,
    raw_config: &str,
    curve: &MergingCurve,
) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("curve.csv"), curve_csv(scenario, curve))?;
    fs::write(dir.join("events.csv"), events_csv(curve))?;
    fs::write(dir.join("meta.json"), meta_json(scenario, raw_config))?;
    for metric in &scenario.metrics {
        fs::write(dir.join(format!("{}.svg", metric.as_str())), metric_svg(curve, *metric))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// SHA-1 (content hash for meta.json; an identifier, not a security boundary)
// ---------------------------------------------------------------------------

pub fn sha1_hex(data: &[u8]) -> String {
    let mut h: [u32; 5] = [0x67452301, 0xEFCDAB89, 0x98BADCFE, 0x10325476, 0xC3D2E1F0];
    let ml = (data.len() as u64).wrapping_mul(8);
    let mut msg = data.to_vec();
    msg.push(0x80);
    while msg.len() % 64 != 56 {
        msg.push(0);
    }
    msg.extend_from_slice(&ml.to_be_bytes());
    for chunk in msg.chunks(64) {
        let mut w = [0u32; 80];
        for (i, word) in chunk.chunks(4).enumerate() {
            w[i] = u32::from_be_bytes([word[0], word[1], word[2], word[3]]);
        }
        for i in 16..80 {
            w[i] = (w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16]).rotate_left(1);
        }
        let (mut a, mut b, mut c, mut d, mut e) = (h[0], h[1], h[2], h[3], h[4]);
        for (i, &wi) in w.iter().enumerate() {
            let (f, k) = match i {
                0..=19 => ((b & c) | ((!b) & d), 0x5A827999u32),
                20..=39 => (b ^ c ^ d, 0x6ED9EBA1),
                40..=59 => ((b & c) | (b & d) | (c & d), 0x8F1BBCDC),
                _ => (b ^ c ^ d, 0xCA62C1D6),
            };
            let tmp = a
                .rotate_left(5)
                .wrapping_add(f)
                .wrapping_add(e)
                .wrapping_add(k)
                .wrapping_add(wi);
            e = d;
            d = c;
            c = b.rotate_left(30);
            b = a;
            a = tmp;
        }
        h[0] = h[0].wrapping_add(a);
        h[1] = h[1].wrapping_add(b);
        h[2] = h[2].wrapping_add(c);
        h[3] = h[3].wrapping_add(d);
        h[4] = h[4].wrapping_add(e);
    }
    h.iter().map(|v| format!("{v:08x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha1_test_vectors() {
        assert_eq!(sha1_hex(b"abc"), "a9993e364706816aba3e25717850c26c9cd0d89d");
        assert_eq!(sha1_hex(b""), "da39a3ee5e6b4b0d3255bfef95601890afd80709");
        assert_eq!(
            sha1_hex(b"The quick brown fox jumps over the lazy dog"),
            "2fd4e1c67a2d28fced849ee1bb76e7391b93eb12"
        );
    }

    #[test]
    fn float_formatting_has_17_significant_digits() {
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
        assert_eq!(fmt_f64(1.0 / 3.0), "3.3333333333333331e-1");
    }
}
