use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::Point3;

use super::TriMesh;
use crate::error::{Error, Result};

/// OBJ reader options.
#[derive(Debug, Clone, Copy, Default)]
pub struct ObjOptions {
    /// Fan-triangulate polygons with more than three vertices instead of
    /// rejecting them.
    pub fan_triangulate: bool,
}

/// Reads `v` and `f` records; every other record is ignored.
pub fn read_obj<R: BufRead>(reader: R, opts: ObjOptions) -> Result<TriMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut xyz = [0.0; 3];
                for c in &mut xyz {
                    let tok = tokens
                        .next()
                        .ok_or_else(|| obj_err(lineno, "vertex needs 3 coordinates"))?;
                    *c = tok
                        .parse()
                        .map_err(|_| obj_err(lineno, &format!("bad coordinate `{tok}`")))?;
                }
                vertices.push(Point3::from(xyz));
            }
            Some("f") => {
                let idx = tokens
                    .map(|tok| parse_index(tok, vertices.len(), lineno))
                    .collect::<Result<Vec<_>>>()?;
                if idx.len() < 3 {
                    return Err(obj_err(lineno, "face needs at least 3 vertices"));
                }
                if idx.len() > 3 && !opts.fan_triangulate {
                    return Err(obj_err(
                        lineno,
                        &format!("polygon with {} vertices (enable fan triangulation)", idx.len()),
                    ));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriMesh::new(vertices, faces)
}

fn parse_index(tok: &str, vertex_count: usize, lineno: usize) -> Result<usize> {
    let head = tok.split('/').next().unwrap_or_default();
    let i: i64 = head
        .parse()
        .map_err(|_| obj_err(lineno, &format!("bad face index `{tok}`")))?;
    let resolved = match i {
        0 => return Err(obj_err(lineno, "face index 0 is invalid")),
        i if i > 0 => i - 1,
        i => vertex_count as i64 + i,
    };
    if resolved < 0 {
        return Err(obj_err(lineno, &format!("face index {i} out of range")));
    }
    Ok(resolved as usize)
}

fn obj_err(line: usize, msg: &str) -> Error {
    Error::Obj {
        line,
        msg: msg.to_string(),
    }
}

pub fn load_obj(path: impl AsRef<Path>, opts: ObjOptions) -> Result<TriMesh> {
    read_obj(BufReader::new(File::open(path)?), opts)
}

/// Writes 1-based `v`/`f` records. Coordinates use the shortest decimal
/// form that round-trips exactly.
pub fn write_obj<W: Write>(mesh: &TriMesh, mut w: W) -> Result<()> {
    for p in mesh.vertices() {
        writeln!(w, "v {} {} {}", p.x, p.y, p.z)?;
    }
    for f in mesh.faces() {
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}

pub fn save_obj(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_obj(mesh, &mut w)?;
    w.flush()?;
    Ok(())
}
