//! File writers: JSON documents, CSV tables and SVG bar charts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::measure::{write_counts, CountRecord};
use crate::qcore::DensityMatrix;

/// Collects the paths written during a run.
#[derive(Debug, Default)]
pub struct Writer {
    root: PathBuf,
    pub files: Vec<PathBuf>,
}

impl Writer {
    pub fn new(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    fn path(&mut self, name: &str) -> Result<PathBuf> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        self.files.push(path.clone());
        Ok(path)
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(self.path(name)?, text)?;
        Ok(())
    }

    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let mut w = csv::Writer::from_path(self.path(name)?)?;
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn counts(&mut self, name: &str, records: &[CountRecord]) -> Result<()> {
        let file = fs::File::create(self.path(name)?)?;
        write_counts(records, file)
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<()> {
        fs::write(self.path(name)?, body)?;
        Ok(())
    }
}

/// Lower-case ASCII file stem for a cell label.
pub fn slug(label: &str) -> String {
    let mut out = String::new();
    for ch in label.chars() {
        let piece = match ch {
            'a'..='z' | '0'..='9' => ch.to_string(),
            'A'..='Z' => ch.to_ascii_lowercase().to_string(),
            '+' => "p".into(),
            '-' => "m".into(),
            'θ' => "theta".into(),
            'φ' => "phi".into(),
            _ => String::new(),
        };
        out.push_str(&piece);
    }
    out
}

const WIDTH: f64 = 640.0;
const PANEL: f64 = 200.0;
const MARGIN: f64 = 40.0;

fn panel(svg: &mut String, top: f64, title: &str, labels: &[String], values: &[f64], lo: f64, hi: f64) {
    let inner = WIDTH - 2.0 * MARGIN;
    let slot = inner / values.len().max(1) as f64;
    let scale = PANEL / (hi - lo);
    let zero_y = top + (hi - 0.0f64.clamp(lo, hi)) * scale;
    let _ = writeln!(svg, r#"<text x="{MARGIN}" y="{:.1}" font-size="13">{title}</text>"#, top - 8.0);
    let _ = writeln!(
        svg,
        r##"<line x1="{MARGIN}" y1="{zero_y:.1}" x2="{:.1}" y2="{zero_y:.1}" stroke="#444"/>"##,
        WIDTH - MARGIN
    );
    for (k, (label, v)) in labels.iter().zip(values).enumerate() {
        let v = v.clamp(lo, hi);
        let y = top + (hi - v) * scale;
        let (y0, h) = if y < zero_y { (y, zero_y - y) } else { (zero_y, y - zero_y) };
        let x = MARGIN + k as f64 * slot + 0.15 * slot;
        let _ = writeln!(
            svg,
            r##"<rect x="{x:.1}" y="{y0:.1}" width="{:.1}" height="{h:.1}" fill="#4a7ab5"/>"##,
            0.7 * slot
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="9" text-anchor="middle">{label}</text>"#,
            x + 0.35 * slot,
            top + PANEL + 12.0
        );
    }
}

fn document(height: f64, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height}\" font-family=\"sans-serif\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

/// Bar chart of values in [lo, hi].
pub fn bar_chart(title: &str, labels: &[String], values: &[f64], lo: f64, hi: f64) -> String {
    let mut body = String::new();
    panel(&mut body, MARGIN, title, labels, values, lo, hi);
    document(PANEL + 2.0 * MARGIN, &body)
}

/// Real and imaginary parts of every density-matrix element.
pub fn matrix_chart(title: &str, rho: &DensityMatrix) -> String {
    let d = rho.dim();
    let n = rho.num_qubits();
    let basis: Vec<String> = (0..d).map(|i| format!("{i:0n$b}")).collect();
    let mut labels = Vec::with_capacity(d * d);
    let mut re = Vec::with_capacity(d * d);
    let mut im = Vec::with_capacity(d * d);
    for r in 0..d {
        for c in 0..d {
            labels.push(format!("{}{}", basis[r], basis[c]));
            re.push(rho.entry(r, c).re);
            im.push(rho.entry(r, c).im);
        }
    }
    let mut body = String::new();
    panel(&mut body, MARGIN, &format!("{title}: Re ρ"), &labels, &re, -1.0, 1.0);
    panel(&mut body, 2.0 * MARGIN + PANEL + 20.0, &format!("{title}: Im ρ"), &labels, &im, -1.0, 1.0);
    document(2.0 * PANEL + 3.0 * MARGIN + 20.0, &body)
}
