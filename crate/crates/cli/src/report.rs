//! Result tables and plots: results.csv / curves.csv with line-atomic
//! writes, and a dependency-free polyline SVG of accuracy vs iteration.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::experiment::ResultRow;
use ordlab_core::tinylm::TrainCurve;

fn perm_tag(perm: &[usize]) -> String {
    perm.iter()
        .map(|p| p.to_string())
        .collect::<Vec<_>>()
        .join("-")
}

/// One row per (strategy, seed); each line is flushed as it is written so an
/// interrupted run still leaves a valid prefix.
pub fn write_results_csv(path: impl AsRef<Path>, rows: &[ResultRow]) -> Result<PathBuf> {
    let path = path.as_ref();
    let mut w = BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    writeln!(
        w,
        "strategy,perm,seed,fixed_iter_accuracy,max_accuracy,plateau_iter"
    )?;
    w.flush()?;
    for row in rows {
        writeln!(
            w,
            "{},{},{},{:.6},{:.6},{}",
            row.strategy,
            perm_tag(&row.perm),
            row.seed,
            row.fixed_iter_accuracy,
            row.max_accuracy,
            row.plateau_iter
        )?;
        w.flush()?;
    }
    Ok(path.to_path_buf())
}

pub fn write_curves_csv<'a>(
    path: impl AsRef<Path>,
    cells: impl Iterator<Item = (&'a str, u64)>,
    curves: impl Iterator<Item = &'a TrainCurve>,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    writeln!(w, "strategy,seed,iter,test_accuracy,train_loss")?;
    w.flush()?;
    for ((strategy, seed), curve) in cells.zip(curves) {
        for k in 0..curve.len() {
            writeln!(
                w,
                "{},{},{},{:.6},{:.6}",
                strategy, seed, curve.iters[k], curve.test_accuracy[k], curve.train_loss[k]
            )?;
        }
        w.flush()?;
    }
    Ok(())
}

const PALETTE: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

/// Accuracy-vs-iteration line plot, one polyline per strategy, with a
/// vertical marker at the fixed evaluation iteration.
pub fn write_curves_svg(
    path: impl AsRef<Path>,
    mean_curves: &[(String, TrainCurve)],
    fixed_iter: usize,
) -> Result<()> {
    let path = path.as_ref();
    let (width, height) = (720.0, 420.0);
    let (left, right, top, bottom) = (60.0, 20.0, 20.0, 50.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;

    let max_iter = mean_curves
        .iter()
        .filter_map(|(_, c)| c.iters.last().copied())
        .max()
        .unwrap_or(1)
        .max(1) as f64;

    let x_of = |iter: usize| left + (iter as f64 / max_iter) * plot_w;
    let y_of = |acc: f64| top + (1.0 - acc.clamp(0.0, 1.0)) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // Axes and gridlines.
    for k in 0..=5 {
        let acc = k as f64 / 5.0;
        let y = y_of(acc);
        svg.push_str(&format!(
            "<line x1=\"{left}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#dddddd\"/>\n",
            left + plot_w
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\">{acc:.1}</text>\n",
            left - 6.0,
            y + 4.0
        ));
    }
    for k in 0..=5 {
        let iter = (max_iter * k as f64 / 5.0).round() as usize;
        let x = x_of(iter);
        svg.push_str(&format!(
            "<text x=\"{x:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">{iter}</text>\n",
            top + plot_h + 16.0
        ));
    }
    svg.push_str(&format!(
        "<line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        top + plot_h
    ));
    svg.push_str(&format!(
        "<line x1=\"{left}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        top + plot_h,
        left + plot_w,
        top + plot_h
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">iteration</text>\n",
        left + plot_w / 2.0,
        height - 12.0
    ));
    svg.push_str(&format!(
        "<text x=\"14\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\" \
         transform=\"rotate(-90 14 {:.1})\">exact-match accuracy</text>\n",
        top + plot_h / 2.0,
        top + plot_h / 2.0
    ));

    // Fixed-iteration marker.
    let fx = x_of(fixed_iter.min(max_iter as usize));
    svg.push_str(&format!(
        "<line x1=\"{fx:.1}\" y1=\"{top}\" x2=\"{fx:.1}\" y2=\"{:.1}\" stroke=\"#888888\" \
         stroke-dasharray=\"4 3\"/>\n",
        top + plot_h
    ));

    for (idx, (name, curve)) in mean_curves.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let points: Vec<String> = curve
            .iters
            .iter()
            .zip(&curve.test_accuracy)
            .map(|(&i, &a)| format!("{:.1},{:.1}", x_of(i), y_of(a)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\" points=\"{}\"/>\n",
            points.join(" ")
        ));
        let ly = top + 14.0 + idx as f64 * 16.0;
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" \
             stroke-width=\"1.8\"/>\n",
            left + 10.0,
            left + 34.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\">{name}</text>\n",
            left + 40.0,
            ly + 4.0
        ));
    }
    svg.push_str("</svg>\n");

    std::fs::write(path, svg).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
