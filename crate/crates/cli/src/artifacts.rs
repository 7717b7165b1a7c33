use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

pub const TOOL: &str = "meshft";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Stamp carried by every artifact.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint_sha256: Option<String>,
}

impl Provenance {
    pub fn comment(&self) -> String {
        let mut s = format!(
            "# {} {} {} config_sha256={} seed={}",
            self.tool, self.tool_version, self.command, self.config_sha256, self.seed
        );
        if let Some(c) = &self.checkpoint_sha256 {
            write!(s, " checkpoint_sha256={c}").expect("string write");
        }
        s
    }
}

/// Output directory writer.
pub struct Artifacts {
    pub dir: PathBuf,
    pub prov: Provenance,
}

impl Artifacts {
    pub fn new(dir: &Path, prov: Provenance) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), prov })
    }

    pub fn write_raw(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }

    /// JSON object `{ "provenance": ..., <body fields> }`.
    pub fn write_json(&self, name: &str, body: &impl Serialize) -> Result<PathBuf, CliError> {
        let mut value = serde_json::to_value(body).map_err(|e| CliError::Io(e.to_string()))?;
        let prov = serde_json::to_value(&self.prov).map_err(|e| CliError::Io(e.to_string()))?;
        match &mut value {
            serde_json::Value::Object(map) => {
                map.insert("provenance".into(), prov);
            }
            other => {
                value = serde_json::json!({ "provenance": prov, "data": other.take() });
            }
        }
        let text = serde_json::to_string_pretty(&value).map_err(|e| CliError::Io(e.to_string()))?;
        self.write_raw(name, &(text + "\n"))
    }

    /// CSV with a leading `#` provenance comment.
    pub fn write_csv(&self, name: &str, csv: &str) -> Result<PathBuf, CliError> {
        self.write_raw(name, &format!("{}\n{csv}", self.prov.comment()))
    }

    pub fn write_svg(&self, name: &str, plot: &Plot) -> Result<PathBuf, CliError> {
        self.write_raw(name, &plot.render(&self.prov.comment()[2..]))
    }
}

/// Line plot of one or more series sharing an x axis.
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<(String, Vec<(f64, f64)>)>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace("--", "- -")
}

impl Plot {
    pub fn render(&self, stamp: &str) -> String {
        let (w, h, left, right, top, bottom) = (640.0, 400.0, 70.0, 150.0, 40.0, 50.0);
        let ty = |y: f64| if self.log_y { y.max(1e-300).log10() } else { y };
        let pts = self.series.iter().flat_map(|s| s.1.iter()).filter(|p| p.0.is_finite() && ty(p.1).is_finite());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(ty(y));
            y1 = y1.max(ty(y));
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 == x0 {
            x1 = x0 + 1.0;
        }
        if y1 == y0 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let (pw, ph) = (w - left - right, h - top - bottom);
        let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| top + (1.0 - (ty(y) - y0) / (y1 - y0)) * ph;
        let mut s = String::new();
        writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#).unwrap();
        writeln!(s, "<!-- {} -->", xml_escape(stamp)).unwrap();
        writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
            left + pw / 2.0,
            xml_escape(&self.title)
        )
        .unwrap();
        writeln!(s, r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#).unwrap();
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let (gx, gy) = (left + f * pw, top + (1.0 - f) * ph);
            let xv = x0 + f * (x1 - x0);
            let yv = y0 + f * (y1 - y0);
            let ylab = if self.log_y { format!("1e{yv:.1}") } else { format!("{yv:.3e}") };
            writeln!(s, r#"<line x1="{gx}" y1="{}" x2="{gx}" y2="{}" stroke="black"/>"#, top + ph, top + ph + 5.0)
                .unwrap();
            writeln!(s, r#"<text x="{gx}" y="{}" text-anchor="middle">{}</text>"#, top + ph + 18.0, fmt_tick(xv))
                .unwrap();
            writeln!(s, r#"<line x1="{}" y1="{gy}" x2="{left}" y2="{gy}" stroke="black"/>"#, left - 5.0).unwrap();
            writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{ylab}</text>"#, left - 8.0, gy + 4.0).unwrap();
        }
        writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            left + pw / 2.0,
            h - 8.0,
            xml_escape(&self.x_label)
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
            top + ph / 2.0,
            top + ph / 2.0,
            xml_escape(&self.y_label)
        )
        .unwrap();
        for (i, (name, data)) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let path: Vec<String> = data
                .iter()
                .filter(|p| p.0.is_finite() && ty(p.1).is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "))
                .unwrap();
            let ly = top + 14.0 + 18.0 * i as f64;
            writeln!(
                s,
                r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
                w - right + 10.0,
                w - right + 30.0
            )
            .unwrap();
            writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, w - right + 36.0, ly + 4.0, xml_escape(name)).unwrap();
        }
        s.push_str("</svg>\n");
        s
    }
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{:.3}", v).trim_end_matches('0').trim_end_matches('.').to_string()
    }
}
