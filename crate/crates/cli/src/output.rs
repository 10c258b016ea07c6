//! Artifact writers: CSV series, JSON reports, flat binary field dumps.
//! Every file carries the config hash and tool version; all serialisation is
//! deterministic so identical runs produce identical bytes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use bubblekit::asymptotics::BranchSample;
use bubblekit::solver::{BranchRecord, FieldData};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn config_hash(config_text: &str) -> String {
    let mut h = Sha256::new();
    h.update(config_text.as_bytes());
    let digest = h.finalize();
    let mut out = String::new();
    for b in digest.iter().take(8) {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub struct OutputContext {
    pub dir: PathBuf,
    pub hash: String,
}

impl OutputContext {
    pub fn new(dir: &Path, config_text: &str) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(OutputContext { dir: dir.to_path_buf(), hash: config_hash(config_text) })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// JSON report wrapped with provenance.
    pub fn write_json<T: Serialize>(&self, name: &str, payload: &T) -> std::io::Result<()> {
        #[derive(Serialize)]
        struct Wrapper<'a, T> {
            config_hash: &'a str,
            tool_version: &'a str,
            #[serde(flatten)]
            payload: &'a T,
        }
        let text = serde_json::to_string_pretty(&Wrapper {
            config_hash: &self.hash,
            tool_version: TOOL_VERSION,
            payload,
        })
        .expect("serialisable report");
        fs::write(self.path(name), text + "\n")
    }

    /// CSV with a provenance comment line, fixed column order, shortest
    /// round-trip float formatting.
    pub fn write_csv(&self, name: &str, header: &[String], rows: &[Vec<String>]) -> std::io::Result<()> {
        let mut f = fs::File::create(self.path(name))?;
        writeln!(f, "# config_hash={} tool_version={}", self.hash, TOOL_VERSION)?;
        writeln!(f, "{}", header.join(","))?;
        for row in rows {
            writeln!(f, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Flat little-endian f64 dump with a JSON sidecar.
    pub fn write_field(&self, name: &str, record: &BranchRecord) -> std::io::Result<()> {
        let (layout, values): (serde_json::Value, &[f64]) = match &record.field.data {
            FieldData::TorusGrid { n, values } => (
                serde_json::json!({"kind": "torus_grid", "n": n}),
                values,
            ),
            FieldData::DiskRadial { radii, u, shift } => (
                serde_json::json!({"kind": "disk_radial", "nodes": radii.len(), "shift": shift}),
                u,
            ),
        };
        let mut bytes = Vec::with_capacity(values.len() * 8);
        for v in values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(self.path(&format!("{name}.bin")), &bytes)?;
        let sidecar = serde_json::json!({
            "config_hash": self.hash,
            "tool_version": TOOL_VERSION,
            "layout": layout,
            "rho": record.field.rho,
            "lambda_target": record.lambda_target,
            "delta": record.descriptors.delta,
        });
        fs::write(
            self.path(&format!("{name}.json")),
            serde_json::to_string_pretty(&sidecar).unwrap() + "\n",
        )
    }
}

/// Branch CSV layout: the spec columns first, extras after.
pub fn branch_header(m: usize) -> Vec<String> {
    let mut h = vec!["lambda_target".to_string(), "rho".to_string()];
    for j in 1..=m {
        h.push(format!("lambda_{j}"));
    }
    for j in 1..=m {
        h.push(format!("x_{j}"));
        h.push(format!("y_{j}"));
    }
    for j in 1..=m {
        h.push(format!("rho_{j}"));
    }
    for j in 1..=m {
        h.push(format!("eta_sup_{j}"));
    }
    h.push("w_outer_c1".into());
    h.push("residual_norm".into());
    h.push("resolved_flag".into());
    h.push("newton_iters".into());
    for j in 1..=m {
        h.push(format!("core_cells_{j}"));
    }
    h.push("mean_u".into());
    h
}

pub fn branch_row(r: &BranchRecord) -> Vec<String> {
    let d = &r.descriptors;
    let mut row = vec![fmt(r.lambda_target), fmt(r.field.rho)];
    for b in &d.bubbles {
        row.push(fmt(b.lambda));
    }
    for b in &d.bubbles {
        row.push(fmt(b.x.x));
        row.push(fmt(b.x.y));
    }
    for b in &d.bubbles {
        row.push(fmt(b.local_mass));
    }
    for b in &d.bubbles {
        row.push(fmt(b.eta_sup));
    }
    row.push(fmt(d.outer_c1));
    row.push(fmt(r.residual_norm));
    row.push((r.resolved as u8).to_string());
    row.push(r.newton_iters.to_string());
    for b in &d.bubbles {
        row.push(fmt(b.core_cells));
    }
    row.push(fmt(d.mean_u));
    row
}

pub fn fmt(v: f64) -> String {
    // Shortest round-trip representation: deterministic and exact.
    format!("{v}")
}

/// Parse a branch CSV back into expansion samples (`verify-expansion` input).
pub fn read_branch_csv(path: &Path, m: usize) -> Result<Vec<BranchSample>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().ok_or("empty branch CSV")?.split(',').collect();
    let col = |name: &str| -> Result<usize, String> {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| format!("branch CSV missing column {name}"))
    };
    let c_lt = col("lambda_target")?;
    let c_rho = col("rho")?;
    let c_res = col("resolved_flag")?;
    let c_lam: Vec<usize> = (1..=m).map(|j| col(&format!("lambda_{j}"))).collect::<Result<_, _>>()?;
    let c_rhoj: Vec<usize> = (1..=m).map(|j| col(&format!("rho_{j}"))).collect::<Result<_, _>>()?;
    let c_cells: Vec<usize> =
        (1..=m).map(|j| col(&format!("core_cells_{j}"))).collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let get = |i: usize| -> Result<f64, String> {
            f.get(i)
                .ok_or_else(|| "short row in branch CSV".to_string())?
                .parse()
                .map_err(|e| format!("bad number in branch CSV: {e}"))
        };
        let lambda_j: Vec<f64> = c_lam.iter().map(|&i| get(i)).collect::<Result<_, _>>()?;
        let cells: Vec<f64> = c_cells.iter().map(|&i| get(i)).collect::<Result<_, _>>()?;
        out.push(BranchSample {
            lambda_target: get(c_lt)?,
            lambda1: lambda_j[0],
            rho: get(c_rho)?,
            lambda_j,
            local_mass: c_rhoj.iter().map(|&i| get(i)).collect::<Result<_, _>>()?,
            usable_for_fit: cells
                .iter()
                .all(|&c| c >= bubblekit::solver::torus::REFUSAL_CORE_CELLS),
            resolved: get(c_res)? != 0.0,
        });
    }
    Ok(out)
}
