//! File output: CSV series, JSON reports, and SVG heatmaps. Numeric output
//! uses 12 significant digits in plain decimal notation, and every file
//! embeds the resolved configuration it was produced from.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::error::Result;
use crate::sim::{EnergyTrace, Trajectory};
use crate::sweep::SweepResult;

/// Formats with 12 significant digits, decimal notation.
pub fn format_sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (11 - magnitude).clamp(0, 330) as usize;
    format!("{:.*}", decimals, x)
}

fn config_comment(config: &serde_json::Value) -> String {
    format!("# config: {}", config)
}

/// Writes a trajectory as CSV: tau, x1..xk, v1..vk.
pub fn write_trajectory_csv(
    path: &Path,
    traj: &Trajectory,
    config: &serde_json::Value,
) -> Result<()> {
    let n = traj.states.first().map(|s| s.len() / 2).unwrap_or(0);
    let mut out = String::new();
    writeln!(out, "{}", config_comment(config)).unwrap();
    let mut header = String::from("tau");
    for i in 1..=n {
        write!(header, ",x{i}").unwrap();
    }
    for i in 1..=n {
        write!(header, ",v{i}").unwrap();
    }
    writeln!(out, "{header}").unwrap();
    for (t, s) in traj.times.iter().zip(&traj.states) {
        write!(out, "{}", format_sig12(*t)).unwrap();
        for v in s {
            write!(out, ",{}", format_sig12(*v)).unwrap();
        }
        writeln!(out).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes an energy trace as CSV: tau, primary_fraction, nes_fraction, and
/// one cumulative dissipation column per channel.
pub fn write_energy_trace_csv(
    path: &Path,
    trace: &EnergyTrace,
    channel_names: &[&str],
    config: &serde_json::Value,
) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "{}", config_comment(config)).unwrap();
    let mut header = String::from("tau,primary_fraction,nes_fraction");
    for name in channel_names {
        write!(header, ",diss_{name}").unwrap();
    }
    writeln!(out, "{header}").unwrap();
    for i in 0..trace.times.len() {
        write!(
            out,
            "{},{},{}",
            format_sig12(trace.times[i]),
            format_sig12(trace.primary_fraction[i]),
            format_sig12(trace.nes_fraction[i])
        )
        .unwrap();
        for ch in &trace.dissipated_cumulative {
            write!(out, ",{}", format_sig12(ch[i])).unwrap();
        }
        writeln!(out).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes a complex series as CSV: tau, re, im, abs.
pub fn write_complex_series_csv(
    path: &Path,
    times: &[f64],
    series: &[Complex64],
    config: &serde_json::Value,
) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "{}", config_comment(config)).unwrap();
    writeln!(out, "tau,re,im,abs").unwrap();
    for (t, z) in times.iter().zip(series) {
        writeln!(
            out,
            "{},{},{},{}",
            format_sig12(*t),
            format_sig12(z.re),
            format_sig12(z.im),
            format_sig12(z.norm())
        )
        .unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes a sweep in long format: axis1, axis2, metric.
pub fn write_sweep_csv(path: &Path, sweep: &SweepResult, config: &serde_json::Value) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "{}", config_comment(config)).unwrap();
    writeln!(out, "{},{},metric", sweep.axis1_name, sweep.axis2_name).unwrap();
    for (i1, a1) in sweep.axis1.iter().enumerate() {
        for (i2, a2) in sweep.axis2.iter().enumerate() {
            writeln!(
                out,
                "{},{},{}",
                format_sig12(*a1),
                format_sig12(*a2),
                format_sig12(sweep.at(i1, i2))
            )
            .unwrap();
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes a JSON report with the resolved config embedded under "config".
pub fn write_json_report(
    path: &Path,
    body: serde_json::Value,
    config: &serde_json::Value,
) -> Result<()> {
    let mut report = body;
    if let serde_json::Value::Object(map) = &mut report {
        map.insert("config".into(), config.clone());
    }
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn color_map(t: f64) -> (u8, u8, u8) {
    // linear two-segment map: dark blue -> teal -> yellow
    let t = t.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64, s: f64| (a + (b - a) * s).round() as u8;
    if t < 0.5 {
        let s = t / 0.5;
        (
            lerp(13.0, 32.0, s),
            lerp(8.0, 144.0, s),
            lerp(135.0, 140.0, s),
        )
    } else {
        let s = (t - 0.5) / 0.5;
        (
            lerp(32.0, 247.0, s),
            lerp(144.0, 231.0, s),
            lerp(140.0, 34.0, s),
        )
    }
}

/// Renders a sweep as a standalone SVG heatmap with a linear color map and
/// labeled axes.
pub fn write_heatmap_svg(
    path: &Path,
    sweep: &SweepResult,
    config: &serde_json::Value,
) -> Result<()> {
    let n1 = sweep.axis1.len();
    let n2 = sweep.axis2.len();
    let cell = 24.0_f64;
    let margin_left = 90.0;
    let margin_bottom = 70.0;
    let margin_top = 40.0;
    let margin_right = 120.0;
    let width = margin_left + cell * n1 as f64 + margin_right;
    let height = margin_top + cell * n2 as f64 + margin_bottom;

    let finite: Vec<f64> = sweep
        .metric
        .iter()
        .cloned()
        .filter(|v| v.is_finite())
        .collect();
    let lo = finite.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    )
    .unwrap();
    writeln!(svg, "<desc>{}</desc>", config_comment(config)).unwrap();
    writeln!(
        svg,
        r#"<rect width="{width:.0}" height="{height:.0}" fill="white"/>"#
    )
    .unwrap();
    for (i1, _) in sweep.axis1.iter().enumerate() {
        for (i2, _) in sweep.axis2.iter().enumerate() {
            let v = sweep.at(i1, i2);
            let (r, g, b) = if v.is_finite() {
                color_map((v - lo) / span)
            } else {
                (200, 200, 200)
            };
            let x = margin_left + i1 as f64 * cell;
            // axis2 increases upward
            let y = margin_top + (n2 - 1 - i2) as f64 * cell;
            writeln!(
                svg,
                r#"<rect x="{x:.1}" y="{y:.1}" width="{cell:.1}" height="{cell:.1}" fill="rgb({r},{g},{b})"><title>{}={}, {}={}, metric={}</title></rect>"#,
                sweep.axis1_name,
                format_sig12(sweep.axis1[i1]),
                sweep.axis2_name,
                format_sig12(sweep.axis2[i2]),
                format_sig12(v),
            )
            .unwrap();
        }
    }
    // axis labels and a handful of ticks
    let x_mid = margin_left + cell * n1 as f64 / 2.0;
    writeln!(
        svg,
        r#"<text x="{x_mid:.1}" y="{:.1}" text-anchor="middle" font-size="14">{} (dimensionless)</text>"#,
        height - 14.0,
        sweep.axis1_name
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="16" y="{:.1}" text-anchor="middle" font-size="14" transform="rotate(-90 16 {:.1})">{} (dimensionless)</text>"#,
        margin_top + cell * n2 as f64 / 2.0,
        margin_top + cell * n2 as f64 / 2.0,
        sweep.axis2_name
    )
    .unwrap();
    let tick_count = n1.clamp(1, 5);
    for k in 0..tick_count {
        let i = k * (n1 - 1).max(1) / tick_count.max(1);
        let i = i.min(n1 - 1);
        let x = margin_left + (i as f64 + 0.5) * cell;
        writeln!(
            svg,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle" font-size="11">{:.4}</text>"#,
            margin_top + cell * n2 as f64 + 18.0,
            sweep.axis1[i]
        )
        .unwrap();
    }
    let tick_count2 = n2.clamp(1, 5);
    for k in 0..tick_count2 {
        let i = (k * (n2 - 1).max(1) / tick_count2.max(1)).min(n2 - 1);
        let y = margin_top + (n2 - 1 - i) as f64 * cell + cell * 0.7;
        writeln!(
            svg,
            r#"<text x="{:.1}" y="{y:.1}" text-anchor="end" font-size="11">{:.4}</text>"#,
            margin_left - 6.0,
            sweep.axis2[i]
        )
        .unwrap();
    }
    // color bar
    let bar_x = margin_left + cell * n1 as f64 + 30.0;
    let bar_h = cell * n2 as f64;
    for k in 0..64 {
        let t = k as f64 / 63.0;
        let (r, g, b) = color_map(1.0 - t);
        let y = margin_top + bar_h * k as f64 / 64.0;
        writeln!(
            svg,
            r#"<rect x="{bar_x:.1}" y="{y:.1}" width="16" height="{:.2}" fill="rgb({r},{g},{b})"/>"#,
            bar_h / 64.0 + 0.5
        )
        .unwrap();
    }
    writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="11">{:.4}</text>"#,
        bar_x + 20.0,
        margin_top + 10.0,
        hi
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="11">{:.4}</text>"#,
        bar_x + 20.0,
        margin_top + bar_h,
        lo
    )
    .unwrap();
    writeln!(svg, "</svg>").unwrap();
    std::fs::write(path, svg)?;
    Ok(())
}
