//! CSV and JSON writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use fcs_core::stats::EnergyDistribution;
use serde::Serialize;

use crate::Failure;

/// Version stamped on every JSON document.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    schema_version: u32,
    kind: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

pub struct OutDir(PathBuf);

impl OutDir {
    pub fn create(path: &Path) -> Result<Self, Failure> {
        std::fs::create_dir_all(path)
            .map_err(|e| Failure::Io(format!("cannot create {}: {e}", path.display())))?;
        Ok(OutDir(path.to_path_buf()))
    }

    fn file(&self, name: &str) -> Result<(PathBuf, BufWriter<File>), Failure> {
        let path = self.0.join(name);
        let file = File::create(&path).map_err(|e| Failure::Io(format!("cannot create {}: {e}", path.display())))?;
        Ok((path, BufWriter::new(file)))
    }

    pub fn json<T: Serialize>(&self, name: &str, kind: &str, body: &T) -> Result<(), Failure> {
        let (path, mut w) = self.file(name)?;
        let doc = Versioned {
            schema_version: SCHEMA_VERSION,
            kind,
            body,
        };
        serde_json::to_writer_pretty(&mut w, &doc).map_err(|e| Failure::Io(e.to_string()))?;
        writeln!(w)?;
        w.flush()?;
        log::info!("wrote {}", path.display());
        Ok(())
    }

    /// Writes `rows` under `header`; `None` cells are left empty.
    pub fn csv<I>(&self, name: &str, header: &[&str], rows: I) -> Result<(), Failure>
    where
        I: IntoIterator<Item = Vec<Option<String>>>,
    {
        let (path, w) = self.file(name)?;
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Failure::Io(e.to_string());
        out.write_record(header).map_err(io)?;
        for row in rows {
            out.write_record(row.iter().map(|c| c.as_deref().unwrap_or(""))).map_err(io)?;
        }
        out.flush()?;
        log::info!("wrote {}", path.display());
        Ok(())
    }

    pub fn distribution(&self, name: &str, dist: &EnergyDistribution) -> Result<(), Failure> {
        self.csv(
            name,
            &["energy", "probability"],
            dist.points().map(|(e, p)| vec![Some(num(e)), Some(num(p))]),
        )
    }
}

/// Shortest round-trip decimal form.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn opt_num(x: f64) -> Option<String> {
    x.is_finite().then(|| num(x))
}
