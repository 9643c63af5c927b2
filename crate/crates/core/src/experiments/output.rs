//! Flat-file output: CSV tables with a fixed numeric format and gnuplot
//! script stubs.

use std::io;
use std::path::{Path, PathBuf};

/// Scientific notation with 9 significant digits; NaN as `nan`.
pub fn sci(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.8e}")
    }
}

/// A header plus rows of preformatted cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let j = self.header.iter().position(|h| *h == name)?;
        Some(self.rows.iter().map(|r| r[j].as_str()).collect())
    }

    pub fn write<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("cells are UTF-8")
    }
}

/// Writes `<dir>/<stem>.csv` and, when given, `<dir>/<stem>.gp`.
pub fn write_outputs(dir: &Path, stem: &str, table: &CsvTable, plot: Option<&str>) -> io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{stem}.csv"));
    std::fs::write(&path, table.to_csv_string())?;
    if let Some(script) = plot {
        std::fs::write(dir.join(format!("{stem}.gp")), script)?;
    }
    Ok(path)
}

pub const FIG3_PLOT: &str = "\
set datafile separator ','
set key autotitle columnhead
set logscale x
set xlabel 'modulation index beta/N'
set ylabel 'R_b / f_3dB'
set terminal pngcairo size 800,500
set output 'fig3.png'
plot for [n in system(\"tail -n +2 fig3.csv | cut -d, -f1 | sort -un\")] \\
    'fig3.csv' using 2:($1 == n ? $6 : 1/0) with lines title 'N = '.n
";

pub const FIG4_PLOT: &str = "\
set datafile separator ','
set key top left
set xlabel 'peak optical power (mW)'
set ylabel 'R_b / f_3dB'
set terminal pngcairo size 800,500
set output 'fig4.png'
plot for [s in 'dco-ofdm mpam-jow mpam-mmse mpam-unequalized'] \\
    '< grep ,'.s.', fig4.csv' using 1:4 with linespoints title s
";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(sci(1.0), "1.00000000e0");
        assert_eq!(sci(123456789.0), "1.23456789e8");
        assert_eq!(sci(-2.5e-7), "-2.50000000e-7");
        assert_eq!(sci(f64::NAN), "nan");
    }

    #[test]
    fn csv_layout() {
        let mut t = CsvTable::new(&["a", "b"]);
        t.push(vec!["1".into(), sci(0.5)]);
        assert_eq!(t.to_csv_string(), "a,b\n1,5.00000000e-1\n");
        assert_eq!(t.column("b").unwrap(), vec!["5.00000000e-1"]);
    }
}
