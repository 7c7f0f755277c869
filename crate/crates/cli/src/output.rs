//! CSV and JSON writers and gnuplot script emission.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use freqcorr::montecarlo::ClickStream;
use freqcorr::scan::{GammaScanRow, LandscapeGrid, LineCut, Quantity};
use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

/// 12 significant digits; `NaN` marks an undefined value.
pub fn num(x: f64) -> String {
    format!("{x:.11e}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NaN".to_string(), num)
}

/// Opens `path`, or stdout when `None`.
pub fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn io_err(path: Option<&Path>) -> impl Fn(io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("write to {} failed: {e}", path.map_or("stdout".into(), |p| p.display().to_string())))
}

/// `SOURCE_DATE_EPOCH` when set, so outputs can be reproduced bitwise.
pub fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()))
}

#[derive(Serialize)]
pub struct Metadata<'a> {
    pub parameters: &'a RunConfig,
    pub unit: &'static str,
    pub tool: &'static str,
    pub version: &'static str,
    pub timestamp: u64,
    pub seed: Option<u64>,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    metadata: Metadata<'a>,
    data: &'a T,
}

pub fn write_json<T: Serialize>(out: &mut dyn Write, cfg: &RunConfig, data: &T) -> io::Result<()> {
    let env = Envelope {
        metadata: Metadata {
            parameters: cfg,
            unit: "gamma_sigma",
            tool: "freqcorr",
            version: env!("CARGO_PKG_VERSION"),
            timestamp: timestamp(),
            seed: cfg.seed,
        },
        data,
    };
    serde_json::to_writer_pretty(&mut *out, &env)?;
    writeln!(out)
}

pub fn landscape_csv(out: &mut dyn Write, grid: &LandscapeGrid) -> io::Result<()> {
    writeln!(out, "omega1,omega2,value,converged")?;
    let w = grid.axis.values();
    for (i, w1) in w.iter().enumerate() {
        for (j, w2) in w.iter().enumerate() {
            writeln!(out, "{},{},{},{}", num(*w1), num(*w2), opt(grid.values[i][j]), grid.converged[i][j])?;
        }
    }
    Ok(())
}

pub fn point_csv(out: &mut dyn Write, w1: f64, w2: f64, value: Option<f64>, converged: bool) -> io::Result<()> {
    writeln!(out, "omega1,omega2,value,converged")?;
    writeln!(out, "{},{},{},{}", num(w1), num(w2), opt(value), converged)
}

pub fn series_csv(out: &mut dyn Write, rows: &[(f64, Option<f64>)]) -> io::Result<()> {
    writeln!(out, "omega,value")?;
    for (w, v) in rows {
        writeln!(out, "{},{}", num(*w), opt(*v))?;
    }
    Ok(())
}

pub fn gamma_scan_csv(out: &mut dyn Write, rows: &[GammaScanRow]) -> io::Result<()> {
    writeln!(out, "omega,gamma,csi,bell,signal,converged")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{},{}", num(r.omega), num(r.gamma), opt(r.csi), opt(r.bell), opt(r.signal), r.converged)?;
    }
    Ok(())
}

const PREAMBLE: &str = "set datafile separator ','\nset datafile missing 'NaN'\n";

fn quote(path: &Path) -> String {
    format!("'{}'", path.display().to_string().replace('\'', "''"))
}

pub fn landscape_plot(grid: &LandscapeGrid, data: &Path) -> String {
    let mut s = String::from(PREAMBLE);
    s += "set size square\nset xlabel 'omega1 / gamma_sigma'\nset ylabel 'omega2 / gamma_sigma'\n";
    s += &format!("set title '{} landscape, Gamma = {}'\n", grid.quantity, grid.gamma);
    match grid.quantity {
        Quantity::Bell => s += "set cbrange [0:2.8284]\n",
        _ => s += "set logscale cb\n",
    }
    s += &format!("plot {} skip 1 using 1:2:3 with image notitle\n", quote(data));
    s
}

pub fn series_plot(title: &str, ylabel: &str, bound: Option<f64>, data: &Path) -> String {
    let mut s = String::from(PREAMBLE);
    s += &format!("set title '{title}'\nset xlabel 'omega / gamma_sigma'\nset ylabel '{ylabel}'\n");
    s += &format!("plot {} skip 1 using 1:2 with lines title '{ylabel}'", quote(data));
    if let Some(b) = bound {
        s += &format!(", {b} with lines dashtype 2 title 'classical bound'");
    }
    s + "\n"
}

pub fn cut_plot(cut: &LineCut, data: &Path) -> String {
    let bound = match cut.quantity {
        Quantity::Csi => Some(1.0),
        Quantity::Bell => Some(2.0),
        Quantity::G2 => None,
    };
    series_plot(&format!("{} along {:?}, Gamma = {}", cut.quantity, cut.line, cut.gamma), cut.quantity.name(), bound, data)
}

pub fn gamma_scan_plot(data: &Path) -> String {
    let mut s = String::from(PREAMBLE);
    s += "set logscale x\nset xlabel 'Gamma / gamma_sigma'\nset ylabel 'B'\nset y2label 'R'\nset logscale y2\nset y2tics\n";
    s += "set cblabel 'omega / gamma_sigma'\n";
    s += &format!(
        "plot {0} skip 1 using 2:4:1 with points pt 7 palette title 'B', \
         {0} skip 1 using 2:3:1 axes x1y2 with points pt 6 palette title 'R', \
         2 with lines dashtype 2 title 'B = 2'\n",
        quote(data)
    );
    s
}

pub fn trajectory_plot(stream: &ClickStream, data: &Path) -> String {
    let mut s = String::from(PREAMBLE);
    s += "set xlabel 'time / (1/gamma_sigma)'\nset ylabel 'channel'\nset yrange [0:*]\n";
    let ytics: Vec<String> = stream.channels.iter().enumerate().map(|(k, c)| format!("'{c}' {}", k + 1)).collect();
    s += &format!("set ytics ({})\n", ytics.join(", "));
    let index = stream
        .channels
        .iter()
        .enumerate()
        .fold("0".to_string(), |acc, (k, c)| format!("(stringcolumn(2) eq '{c}' ? {} : {acc})", k + 1));
    s += &format!("plot {} skip 1 using 1:{index} with impulses notitle\n", quote(data));
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}
