use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Floating-point value with 17 significant digits.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Comma-separated table with a fixed header.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = String::new();
        text.push_str(&header.join(","));
        text.push('\n');
        Csv { text }
    }

    /// Free-form line above the header, prefixed with `#`.
    pub fn with_comment(comment: &str, header: &[&str]) -> Self {
        let mut csv = Csv {
            text: format!("# {comment}\n"),
        };
        csv.text.push_str(&header.join(","));
        csv.text.push('\n');
        csv
    }

    pub fn row(&mut self, cells: &[String]) {
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    pub fn finish(self) -> String {
        self.text
    }
}

pub fn json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// One output file. `suffix = None` is the main result at `--out`; other
/// artifacts go next to it with the extension replaced by the suffix.
pub struct Artifact {
    pub suffix: Option<String>,
    pub content: String,
}

impl Artifact {
    pub fn main(content: String) -> Self {
        Artifact {
            suffix: None,
            content,
        }
    }

    pub fn side(suffix: &str, content: String) -> Self {
        Artifact {
            suffix: Some(suffix.to_string()),
            content,
        }
    }

    pub fn path(&self, out: &Path) -> PathBuf {
        match &self.suffix {
            None => out.to_path_buf(),
            Some(sfx) => {
                let stem = out.with_extension("");
                let mut s = stem.into_os_string();
                s.push(sfx);
                PathBuf::from(s)
            }
        }
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_os_string();
    s.push(".manifest.json");
    PathBuf::from(s)
}
