//! File writers. Every float is written with 17 significant digits so that
//! binary64 values survive a round trip.

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::fields::{DerivedFields, SimState};
use crate::grid::Grid;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const SNAPSHOT_HEADER: &str = "x,n1,n2,n,p,c1,c2,w";
pub const PLOT_SCRIPT: &str = "plots.gp";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const RUN_META_FILE: &str = "run_meta";

/// Formats one value with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn snapshot_name(t: f64) -> String {
    format!("snapshot_t{t}.csv")
}

pub fn write_snapshot(
    state: &SimState<f64>,
    derived: &DerivedFields<f64>,
    grid: &Grid<f64>,
    path: &Path,
) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(w, "{SNAPSHOT_HEADER}").map_err(io)?;
    for j in 0..grid.cells() {
        let row = [
            grid.centers()[j],
            state.n1[j],
            state.n2[j],
            derived.n[j],
            derived.p[j],
            derived.c1[j],
            derived.c2[j],
            derived.w[j],
        ];
        writeln!(w, "{}", row.map(fmt_f64).join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Columns of a snapshot file in header order.
pub fn read_snapshot(path: &Path) -> Result<Vec<[f64; 8]>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(SNAPSHOT_HEADER) {
        return Err(Error::Precondition(format!("{} is not a snapshot file", path.display())));
    }
    lines
        .map(|l| {
            let vals: Vec<f64> = l
                .split(',')
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Precondition(format!("bad snapshot row `{l}`: {e}")))?;
            vals.try_into().map_err(|_| Error::Precondition(format!("snapshot row `{l}` needs 8 columns")))
        })
        .collect()
}

/// Streams diagnostics rows to `diagnostics.csv`.
pub struct DiagnosticsWriter {
    path: PathBuf,
    inner: BufWriter<File>,
}

impl DiagnosticsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut inner = BufWriter::new(file);
        writeln!(inner, "{}", DiagnosticsRecord::<f64>::COLUMNS.join(",")).map_err(|e| Error::io(path, e))?;
        Ok(Self { path: path.to_path_buf(), inner })
    }

    pub fn push(&mut self, rec: &DiagnosticsRecord<f64>) -> Result<()> {
        writeln!(self.inner, "{}", rec.values().map(fmt_f64).join(",")).map_err(|e| Error::io(&self.path, e))
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// Gnuplot script with one plot block per snapshot: `n1`, `n2` in distinct
/// line styles and `p` on the second axis.
pub fn emit_plot_script(run_dir: &Path, snapshot_times: &[f64]) -> Result<PathBuf> {
    let mut s = String::from(
        "# n1 and n2 (left axis) and pressure p (right axis) per snapshot\n\
         set datafile separator ','\n\
         set terminal pngcairo size 900,600\n\
         set xlabel 'x'\n\
         set ylabel 'density'\n\
         set y2label 'pressure'\n\
         set y2tics\n\
         set key top right\n",
    );
    for &t in snapshot_times {
        let name = snapshot_name(t);
        if !run_dir.join(&name).is_file() {
            return Err(Error::Precondition(format!("snapshot {name} missing in {}", run_dir.display())));
        }
        let png = name.trim_end_matches(".csv");
        s.push_str(&format!(
            "\nset output '{png}.png'\nset title 't = {t}'\n\
             plot '{name}' skip 1 using 1:2 with lines lw 2 lc rgb 'red' title 'n1', \\\n\
             \x20    '{name}' skip 1 using 1:3 with lines lw 2 dt 2 lc rgb 'blue' title 'n2', \\\n\
             \x20    '{name}' skip 1 using 1:5 axes x1y2 with lines lw 1 lc rgb 'dark-green' title 'p'\n"
        ));
    }
    let path = run_dir.join(PLOT_SCRIPT);
    write_text(&path, &s)?;
    Ok(path)
}

/// Parses a diagnostics CSV back into rows of the twenty columns.
pub fn read_diagnostics(path: &Path) -> Result<Vec<[f64; 20]>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .skip(1)
        .map(|l| {
            let vals: Vec<f64> = l
                .split(',')
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Precondition(format!("bad diagnostics row: {e}")))?;
            vals.try_into().map_err(|_| Error::Precondition("diagnostics row needs 20 columns".into()))
        })
        .collect()
}
