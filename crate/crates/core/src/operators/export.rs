use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_coo, BoundaryMatrix, CsrMatrix, OperatorSet};
use crate::boundary::{BoundaryEstimate, DensityEstimate, DofPartition};
use crate::error::{check_len, Error, Result};
use crate::kernels::Bandwidth;
use crate::pointcloud::{read_csv, write_csv, PointCloud};

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    eps: f64,
    intrinsic_dim: usize,
    ambient_dim: usize,
    n_points: usize,
    cutoff: f64,
}

const POINTS: &str = "points.csv";
const POINTWISE: &str = "pointwise.csv";
const KERNEL: &str = "kernel.coo";
const NORMALIZED: &str = "normalized_kernel.coo";
const STIFFNESS: &str = "stiffness.coo";
const BOUNDARY_MATRIX: &str = "boundary_matrix.coo";
const DOFS: &str = "dofs.json";
const META: &str = "meta.json";

/// Writes the cloud and every operator into `dir`: matrices in coordinate
/// text format, per-point quantities in `pointwise.csv`, the dof partition
/// and bandwidth as JSON.
pub fn write_operator_dir(ops: &OperatorSet, cloud: &PointCloud, dir: &Path) -> Result<()> {
    check_len("operator rows", cloud.len(), ops.len())?;
    fs::create_dir_all(dir)?;
    write_csv(cloud, BufWriter::new(File::create(dir.join(POINTS))?))?;
    for (name, matrix) in [
        (KERNEL, &ops.kernel),
        (NORMALIZED, &ops.normalized_kernel),
        (STIFFNESS, &ops.stiffness),
        (BOUNDARY_MATRIX, &ops.boundary_matrix.to_csr()),
    ] {
        matrix.write_coo(BufWriter::new(File::create(dir.join(name))?))?;
    }

    let dim = ops.boundary.ambient_dim;
    let mut w = csv::Writer::from_path(dir.join(POINTWISE))?;
    let mut header = vec!["index".to_string(), "b".to_string()];
    header.extend((0..dim).map(|d| format!("eta{d}")));
    header.extend(
        ["eta_defined", "ratio", "q_raw", "q_hat", "mass", "boundary_weight", "boundary_column"]
            .map(String::from),
    );
    w.write_record(&header)?;
    for i in 0..ops.len() {
        let mut rec = vec![i.to_string(), format!("{:e}", ops.boundary.b[i])];
        rec.extend(ops.boundary.eta(i).iter().map(|v| format!("{v:e}")));
        rec.push(u8::from(ops.boundary.eta_defined[i]).to_string());
        for v in [
            ops.boundary.ratio[i],
            ops.density.q_raw[i],
            ops.density.q_hat[i],
            ops.mass[i],
            ops.boundary_weights[i],
        ] {
            rec.push(format!("{v:e}"));
        }
        rec.push(ops.boundary_matrix.column[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;

    serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join(DOFS))?), &ops.dofs)?;
    let meta = Meta {
        eps: ops.eps.get(),
        intrinsic_dim: ops.intrinsic_dim,
        ambient_dim: dim,
        n_points: ops.len(),
        cutoff: ops.cutoff,
    };
    serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join(META))?), &meta)?;
    Ok(())
}

fn load_matrix(dir: &Path, name: &str, n: usize) -> Result<CsrMatrix> {
    let m = read_coo(BufReader::new(File::open(dir.join(name))?))?;
    check_len("matrix rows", n, m.nrows())?;
    Ok(m)
}

fn parse<T: std::str::FromStr>(field: Option<&str>, what: &str) -> Result<T> {
    field
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::Parse(format!("bad or missing {what} in {POINTWISE}")))
}

/// Reads back a directory written by [`write_operator_dir`].
pub fn load_operator_dir(dir: &Path) -> Result<(PointCloud, OperatorSet)> {
    let meta: Meta = serde_json::from_reader(BufReader::new(File::open(dir.join(META))?))?;
    let cloud = read_csv(BufReader::new(File::open(dir.join(POINTS))?), meta.intrinsic_dim)?;
    let n = meta.n_points;
    check_len("points", n, cloud.len())?;
    let dim = meta.ambient_dim;
    let dofs: DofPartition = serde_json::from_reader(BufReader::new(File::open(dir.join(DOFS))?))?;
    check_len("dof count", n, dofs.len())?;

    let mut b = Vec::with_capacity(n);
    let mut eta = Vec::with_capacity(n * dim);
    let mut eta_defined = Vec::with_capacity(n);
    let mut ratio = Vec::with_capacity(n);
    let mut q_raw = Vec::with_capacity(n);
    let mut q_hat = Vec::with_capacity(n);
    let mut mass = Vec::with_capacity(n);
    let mut weight = Vec::with_capacity(n);
    let mut column = Vec::with_capacity(n);
    let mut reader = csv::Reader::from_path(dir.join(POINTWISE))?;
    for rec in reader.records() {
        let rec = rec?;
        let mut it = rec.iter().skip(1);
        b.push(parse(it.next(), "b")?);
        for _ in 0..dim {
            eta.push(parse(it.next(), "eta")?);
        }
        eta_defined.push(parse::<u8>(it.next(), "eta_defined")? != 0);
        ratio.push(parse(it.next(), "ratio")?);
        q_raw.push(parse(it.next(), "q_raw")?);
        q_hat.push(parse(it.next(), "q_hat")?);
        mass.push(parse(it.next(), "mass")?);
        weight.push(parse(it.next(), "boundary_weight")?);
        column.push(parse(it.next(), "boundary_column")?);
    }
    check_len("pointwise rows", n, b.len())?;

    let ops = OperatorSet {
        eps: Bandwidth::new(meta.eps)?,
        intrinsic_dim: meta.intrinsic_dim,
        cutoff: meta.cutoff,
        boundary: BoundaryEstimate {
            b,
            eta,
            ratio,
            eta_defined,
            ambient_dim: dim,
        },
        density: DensityEstimate { q_raw, q_hat },
        kernel: load_matrix(dir, KERNEL, n)?,
        normalized_kernel: load_matrix(dir, NORMALIZED, n)?,
        stiffness: load_matrix(dir, STIFFNESS, n)?,
        mass,
        boundary_weights: weight.clone(),
        boundary_matrix: BoundaryMatrix {
            column,
            weight,
            n_boundary: dofs.boundary.len(),
        },
        dofs,
    };
    Ok((cloud, ops))
}
