//! CSV formatting and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use tricat_core::model::{ModelConfig, CONFIG_KEYS};

use crate::CliError;

pub const MANIFEST_NAME: &str = "manifest.txt";

/// Plain decimal with 17 significant digits.
pub fn num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string().to_lowercase();
    }
    let exp = v.abs().log10().floor() as i32;
    let decimals = (16 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}

/// Comma-separated table with a header row.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self { text: format!("{}\n", header.join(",")) }
    }

    pub fn row<I, S>(&mut self, cells: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let cells: Vec<String> = cells.into_iter().map(|c| c.as_ref().to_owned()).collect();
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn numbers(&mut self, values: &[f64]) {
        self.row(values.iter().map(|&v| num(v)));
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io { path: path.to_owned(), source })
}

/// Write to `path` if given, otherwise to stdout.
pub fn emit(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_file(p, contents),
        None => {
            use io::Write;
            let mut out = io::stdout().lock();
            out.write_all(contents.as_bytes())
                .map_err(|source| CliError::Io { path: PathBuf::from("<stdout>"), source })
        }
    }
}

/// Output directory of a run; tracks every file written into it.
pub struct OutputDir {
    pub path: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    /// Create or reuse `path`. A directory left by an earlier run is cleared of
    /// the files its manifest lists; any other content is refused.
    pub fn prepare(path: &Path) -> Result<Self, CliError> {
        let io_err = |source| CliError::Io { path: path.to_owned(), source };
        fs::create_dir_all(path).map_err(io_err)?;
        let manifest = path.join(MANIFEST_NAME);
        let previous: Vec<String> = match fs::read_to_string(&manifest) {
            Ok(text) => text
                .lines()
                .filter_map(|l| l.strip_prefix("file = "))
                .map(str::to_owned)
                .collect(),
            Err(_) => Vec::new(),
        };
        for entry in fs::read_dir(path).map_err(io_err)? {
            let name = entry.map_err(io_err)?.file_name().to_string_lossy().into_owned();
            if !previous.contains(&name) {
                return Err(CliError::Usage(format!(
                    "output directory {} contains `{name}`, which no earlier run produced",
                    path.display()
                )));
            }
        }
        for name in &previous {
            let p = path.join(name);
            if p.exists() {
                fs::remove_file(&p).map_err(|source| CliError::Io { path: p, source })?;
            }
        }
        Ok(Self { path: path.to_owned(), files: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        write_file(&self.path.join(name), contents)?;
        self.files.push(name.to_owned());
        Ok(())
    }

    /// Write the manifest through a temporary file and a rename.
    pub fn finish(mut self, manifest: Manifest) -> Result<(), CliError> {
        self.files.push(MANIFEST_NAME.to_owned());
        self.files.sort();
        let mut text = manifest.text;
        for f in &self.files {
            let _ = writeln!(text, "file = {f}");
        }
        let tmp = self.path.join(format!(".{MANIFEST_NAME}.tmp"));
        write_file(&tmp, &text)?;
        let dest = self.path.join(MANIFEST_NAME);
        fs::rename(&tmp, &dest).map_err(|source| CliError::Io { path: dest, source })
    }
}

/// Plain-text `key = value` record of a run.
pub struct Manifest {
    text: String,
}

impl Manifest {
    pub fn new(subcommand: &str, out: &Path, config: &ModelConfig, threads: usize) -> Self {
        let mut m = Self { text: String::from("# tricat run manifest\n") };
        m.entry("subcommand", subcommand);
        m.entry("output_dir", &out.display().to_string());
        m.entry("threads", &threads.to_string());
        for key in CONFIG_KEYS {
            m.entry(&format!("config.{key}"), &config.get(key).unwrap_or_default());
        }
        m
    }

    pub fn entry(&mut self, key: &str, value: &str) {
        let _ = writeln!(self.text, "{key} = {value}");
    }

    pub fn stage(&mut self, name: &str, seconds: f64) {
        self.entry(&format!("stage.{name}_seconds"), &format!("{seconds:.3}"));
    }
}
