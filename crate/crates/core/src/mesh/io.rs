use std::io::{BufRead, Write};

use super::{Mesh, Point2, Triangle};
use crate::error::{Error, Result};

struct Lines<R> {
    inner: std::io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> Lines<R> {
    /// Next non-blank line with comments stripped, as (line number, fields).
    fn next_fields(&mut self) -> Result<Option<(usize, Vec<String>)>> {
        for line in self.inner.by_ref() {
            self.line_no += 1;
            let line = line?;
            let content = line.split('#').next().unwrap_or("");
            let fields: Vec<String> = content.split_whitespace().map(str::to_owned).collect();
            if !fields.is_empty() {
                return Ok(Some((self.line_no, fields)));
            }
        }
        Ok(None)
    }

    fn expect_fields(&mut self, what: &str) -> Result<(usize, Vec<String>)> {
        self.next_fields()?
            .ok_or_else(|| Error::parse(self.line_no + 1, format!("unexpected end of input, expected {what}")))
    }

    fn section_header(&mut self, keyword: &str) -> Result<usize> {
        let (line, fields) = self.expect_fields(&format!("'{keyword} <count>'"))?;
        if fields.len() != 2 || fields[0] != keyword {
            return Err(Error::parse(line, format!("expected '{keyword} <count>', found '{}'", fields.join(" "))));
        }
        parse_num(line, &fields[1], "count")
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, field: &str, what: &str) -> Result<T> {
    field.parse().map_err(|_| Error::parse(line, format!("invalid {what} '{field}'")))
}

fn check_arity(line: usize, fields: &[String], expected: usize, layout: &str) -> Result<()> {
    if fields.len() != expected {
        return Err(Error::parse(line, format!("expected '{layout}', found {} fields", fields.len())));
    }
    Ok(())
}

/// Reads the line-oriented mesh format:
///
/// ```text
/// nodes <count>
/// x y
/// triangles <count>
/// i j k eps_r region_tag
/// boundary <count>        # optional section
/// i j marker
/// ```
pub fn load_mesh(reader: impl BufRead) -> Result<Mesh> {
    let mut lines = Lines { inner: reader.lines(), line_no: 0 };

    let n_nodes = lines.section_header("nodes")?;
    let mut nodes = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let (line, f) = lines.expect_fields("a node line 'x y'")?;
        check_arity(line, &f, 2, "x y")?;
        let p = Point2::new(parse_num(line, &f[0], "coordinate")?, parse_num(line, &f[1], "coordinate")?);
        if !p.is_finite() {
            return Err(Error::parse(line, "non-finite coordinate"));
        }
        nodes.push(p);
    }

    let n_tris = lines.section_header("triangles")?;
    let mut triangles = Vec::with_capacity(n_tris);
    for _ in 0..n_tris {
        let (line, f) = lines.expect_fields("a triangle line 'i j k eps_r region_tag'")?;
        check_arity(line, &f, 5, "i j k eps_r region_tag")?;
        let mut idx = [0usize; 3];
        for k in 0..3 {
            idx[k] = parse_num(line, &f[k], "node index")?;
            if idx[k] >= n_nodes {
                return Err(Error::parse(line, format!("node index {} out of range", idx[k])));
            }
        }
        let eps_r: f64 = parse_num(line, &f[3], "permittivity")?;
        let region: u32 = parse_num(line, &f[4], "region tag")?;
        triangles.push(Triangle::new(idx, eps_r, region));
    }

    let mut markers = Vec::new();
    if let Some((line, f)) = lines.next_fields()? {
        if f.len() != 2 || f[0] != "boundary" {
            return Err(Error::parse(line, format!("expected 'boundary <count>', found '{}'", f.join(" "))));
        }
        let n_bnd: usize = parse_num(line, &f[1], "count")?;
        for _ in 0..n_bnd {
            let (line, f) = lines.expect_fields("a boundary line 'i j marker'")?;
            check_arity(line, &f, 3, "i j marker")?;
            let a: usize = parse_num(line, &f[0], "node index")?;
            let b: usize = parse_num(line, &f[1], "node index")?;
            if a >= n_nodes || b >= n_nodes {
                return Err(Error::parse(line, "boundary node index out of range"));
            }
            markers.push(((a, b), f[2].clone()));
        }
        if let Some((line, _)) = lines.next_fields()? {
            return Err(Error::parse(line, "trailing content after boundary section"));
        }
    }

    Mesh::new(nodes, triangles, markers)
}

/// Writes a mesh in the format read by [`load_mesh`]. Round-trips exactly.
pub fn write_mesh(mesh: &Mesh, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "nodes {}", mesh.num_nodes())?;
    for p in mesh.nodes() {
        writeln!(out, "{:?} {:?}", p.x, p.y)?;
    }
    writeln!(out, "triangles {}", mesh.num_triangles())?;
    for t in mesh.triangles() {
        let [a, b, c] = t.nodes;
        writeln!(out, "{a} {b} {c} {:?} {}", t.eps_r, t.region)?;
    }
    writeln!(out, "boundary {}", mesh.boundary_markers().len())?;
    for ((a, b), marker) in mesh.boundary_markers() {
        writeln!(out, "{a} {b} {marker}")?;
    }
    Ok(())
}
