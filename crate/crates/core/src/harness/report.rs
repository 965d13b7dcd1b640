use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::graph::OverlapGraph;

use super::HarnessError;

/// Version of the CSV layouts. Bumped whenever a column is added, removed or
/// reinterpreted.
pub const CSV_SCHEMA_VERSION: u32 = 1;

/// One CSV table: a header row and string cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    /// Serializes `records` through the csv crate; the header comes from the
    /// record's field names.
    pub fn from_records<T: Serialize>(name: &str, records: &[T]) -> Result<Table, HarnessError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in records {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        let mut rd = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(bytes.as_slice());
        let header = rd.headers()?.iter().map(str::to_owned).collect();
        let rows = rd
            .records()
            .map(|r| r.map(|r| r.iter().map(str::to_owned).collect()))
            .collect::<Result<_, _>>()?;
        Ok(Table {
            name: name.to_owned(),
            header,
            rows,
        })
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Renders the table, dropping the named columns.
    pub fn to_csv_without(&self, drop: &[&str]) -> Result<String, HarnessError> {
        let keep: Vec<usize> = (0..self.header.len())
            .filter(|&i| !drop.contains(&self.header[i].as_str()))
            .collect();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(keep.iter().map(|&i| &self.header[i]))?;
        for row in &self.rows {
            w.write_record(keep.iter().map(|&i| &row[i]))?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_csv(&self) -> Result<String, HarnessError> {
        self.to_csv_without(&[])
    }
}

/// Identifies a graph snapshot an experiment used.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphProvenance {
    pub label: String,
    pub vertices: usize,
    pub edges: usize,
    pub digest: u64,
}

impl GraphProvenance {
    pub fn of(label: impl Into<String>, g: &OverlapGraph) -> Self {
        GraphProvenance {
            label: label.into(),
            vertices: g.vertex_count(),
            edges: g.edge_count(),
            digest: g.digest(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub id: String,
    pub master_seed: u64,
    pub field_seed: u64,
    pub graphs: Vec<GraphProvenance>,
    /// The first table is the experiment's main output.
    pub tables: Vec<Table>,
    /// Columns holding wall-clock measurements; excluded from
    /// reproducibility comparisons.
    pub timing_columns: Vec<String>,
    pub summary: Vec<String>,
}

impl ExperimentReport {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Every table with wall-clock columns removed, concatenated. Two runs
    /// with the same config and seed produce identical output.
    pub fn deterministic_csv(&self) -> Result<String, HarnessError> {
        let drop: Vec<&str> = self.timing_columns.iter().map(String::as_str).collect();
        let mut out = String::new();
        for t in &self.tables {
            writeln!(out, "# {}", t.name).expect("write to string");
            out.push_str(&t.to_csv_without(&drop)?);
        }
        Ok(out)
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "experiment: {}", self.id).unwrap();
        writeln!(s, "csv schema: v{CSV_SCHEMA_VERSION}").unwrap();
        writeln!(s, "master seed: {}", self.master_seed).unwrap();
        writeln!(s, "field seed: {}", self.field_seed).unwrap();
        for g in &self.graphs {
            writeln!(
                s,
                "graph {}: {} vertices, {} edges, digest {:016x}",
                g.label, g.vertices, g.edges, g.digest
            )
            .unwrap();
        }
        if !self.timing_columns.is_empty() {
            writeln!(s, "wall-clock columns: {}", self.timing_columns.join(", ")).unwrap();
        }
        s.push('\n');
        for line in &self.summary {
            writeln!(s, "{line}").unwrap();
        }
        s
    }

    /// Writes `<id>.csv` for the main table, `<id>-<name>.csv` for the rest
    /// and `<id>-summary.txt`. Returns the paths written.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
        std::fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        for (i, t) in self.tables.iter().enumerate() {
            let file = if i == 0 {
                format!("{}.csv", self.id)
            } else {
                format!("{}-{}.csv", self.id, t.name)
            };
            let p = dir.join(file);
            std::fs::write(&p, t.to_csv()?)?;
            paths.push(p);
        }
        let p = dir.join(format!("{}-summary.txt", self.id));
        std::fs::write(&p, self.summary_text())?;
        paths.push(p);
        Ok(paths)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        a: u32,
        b: f64,
        micros: f64,
    }

    #[test]
    fn table_roundtrip_and_drop() {
        let t = Table::from_records(
            "t",
            &[
                Row { a: 1, b: 0.5, micros: 3.0 },
                Row { a: 2, b: 0.25, micros: 9.0 },
            ],
        )
        .unwrap();
        assert_eq!(t.header, ["a", "b", "micros"]);
        assert_eq!(t.rows[1], ["2", "0.25", "9.0"]);
        assert_eq!(t.to_csv_without(&["micros"]).unwrap(), "a,b\n1,0.5\n2,0.25\n");
    }
}
