//! Result-file assembly: a provenance header (`#` comment lines) followed by
//! a CSV, structured-text, or JSON body. Rendering is deterministic byte for
//! byte so outputs can be pinned and diffed.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

/// Column order shared by every CSV body.
pub const CSV_COLUMNS: &str = "time,realization,fidelity,mx,my,mz";

/// Shortest-roundtrip float formatting, with negative zero folded into zero
/// so equal values always render equally.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    format!("{x}")
}

/// A rendered result: comment header plus format-specific body.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResultFile {
    /// Header lines, written as `# <line>`.
    pub header: Vec<String>,
    /// Body text; ends with a newline.
    pub body: String,
}

impl ResultFile {
    /// Standard provenance header: tool version, config digest, master seed.
    pub fn new(digest: &str, master_seed: u64) -> Self {
        ResultFile {
            header: vec![
                format!("spindd {}", env!("CARGO_PKG_VERSION")),
                format!("config sha256 {digest}"),
                format!("master seed {master_seed}"),
            ],
            body: String::new(),
        }
    }

    pub fn push_header(&mut self, line: impl Into<String>) {
        self.header.push(line.into());
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in &self.header {
            let _ = writeln!(out, "# {line}");
        }
        out.push_str(&self.body);
        out
    }

    pub fn write_to(&self, path: &Path) -> io::Result<()> {
        fs::write(path, self.render())
    }
}

/// Incremental CSV body with interleaved `#` comment lines.
#[derive(Clone, Debug)]
pub struct CsvBody {
    out: String,
}

impl CsvBody {
    pub fn new() -> Self {
        CsvBody { out: format!("{CSV_COLUMNS}\n") }
    }

    pub fn comment(&mut self, text: &str) {
        let _ = writeln!(self.out, "# {text}");
    }

    /// One data row. `realization` is the realization index, or a label such
    /// as `mean` for aggregated rows.
    pub fn row(&mut self, time: f64, realization: &str, fidelity: f64, m: [f64; 3]) {
        let _ = writeln!(
            self.out,
            "{},{},{},{},{},{}",
            fmt_f64(time),
            realization,
            fmt_f64(fidelity),
            fmt_f64(m[0]),
            fmt_f64(m[1]),
            fmt_f64(m[2]),
        );
    }

    pub fn finish(self) -> String {
        self.out
    }
}

impl Default for CsvBody {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_is_canonical() {
        assert_eq!(fmt_f64(0.0), "0");
        assert_eq!(fmt_f64(-0.0), "0");
        assert_eq!(fmt_f64(0.5), "0.5");
        assert_eq!(fmt_f64(-1.25e-3), "-0.00125");
        assert_eq!(fmt_f64(f64::NAN), "NaN");
        let x = 0.1 + 0.2;
        assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn header_and_body_render_in_order() {
        let mut file = ResultFile::new("abc123", 7);
        file.push_header("sequence proposed");
        let mut csv = CsvBody::new();
        csv.comment("block one");
        csv.row(0.25, "0", 1.0, [0.5, -0.0, 0.125]);
        file.body = csv.finish();
        assert_eq!(
            file.render(),
            "# spindd 0.1.0\n\
             # config sha256 abc123\n\
             # master seed 7\n\
             # sequence proposed\n\
             time,realization,fidelity,mx,my,mz\n\
             # block one\n\
             0.25,0,1,0.5,0,0.125\n"
        );
    }
}
