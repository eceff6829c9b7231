//! Mesh file formats: legacy VTK ASCII (triangles only) and a JSON format
//! `{"nodes": [[x,y,z],...], "tris": [[i,j,k],...], "boundary_sets": {...}}`.
//!
//! Boundary sets travel through VTK as integer `POINT_DATA` scalars named
//! `set_<name>`; nonzero entries mark membership.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SurfaceMesh;
use crate::error::{Error, Result};
use crate::textfmt::float;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeshFormat {
    LegacyVtkAscii,
    InternalJson,
}

impl MeshFormat {
    /// Guess from the file extension: `.vtk` is legacy VTK, anything else JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("vtk") => MeshFormat::LegacyVtkAscii,
            _ => MeshFormat::InternalJson,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JsonMesh {
    nodes: Vec<[f64; 3]>,
    tris: Vec<[usize; 3]>,
    #[serde(default)]
    boundary_sets: BTreeMap<String, Vec<usize>>,
}

pub fn load_mesh(path: impl AsRef<Path>, format: MeshFormat) -> Result<SurfaceMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        MeshFormat::InternalJson => {
            let m: JsonMesh = serde_json::from_str(&text)
                .map_err(|e| Error::format(path, e.line(), e.to_string()))?;
            SurfaceMesh::new(m.nodes, m.tris, m.boundary_sets)
        }
        MeshFormat::LegacyVtkAscii => parse_vtk(path, &text),
    }
}

pub fn save_mesh(mesh: &SurfaceMesh, path: impl AsRef<Path>, format: MeshFormat) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        MeshFormat::InternalJson => {
            let m = JsonMesh {
                nodes: mesh.nodes().to_vec(),
                tris: mesh.triangles().to_vec(),
                boundary_sets: mesh.boundary_sets().clone(),
            };
            serde_json::to_string(&m).map_err(|e| Error::Internal(e.to_string()))?
        }
        MeshFormat::LegacyVtkAscii => write_vtk(mesh),
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_vtk(mesh: &SurfaceMesh) -> String {
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\ncvens surface mesh\nASCII\nDATASET POLYDATA\n");
    let _ = writeln!(s, "POINTS {} double", mesh.n_nodes());
    for p in mesh.nodes() {
        let _ = writeln!(s, "{} {} {}", float(p[0]), float(p[1]), float(p[2]));
    }
    let _ = writeln!(s, "POLYGONS {} {}", mesh.n_elements(), 4 * mesh.n_elements());
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    if !mesh.boundary_sets().is_empty() {
        let _ = writeln!(s, "POINT_DATA {}", mesh.n_nodes());
        for (name, set) in mesh.boundary_sets() {
            let _ = writeln!(s, "SCALARS set_{name} int 1\nLOOKUP_TABLE default");
            let mut flags = vec![0u8; mesh.n_nodes()];
            for &v in set {
                flags[v] = 1;
            }
            for f in flags {
                let _ = writeln!(s, "{f}");
            }
        }
    }
    s
}

struct Tokens<'a> {
    path: &'a Path,
    toks: Vec<(&'a str, usize)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn next(&mut self, what: &str) -> Result<(&'a str, usize)> {
        let last_line = self.toks.last().map(|t| t.1).unwrap_or(0);
        let t = self.toks.get(self.pos).copied().ok_or_else(|| {
            Error::format(self.path, last_line, format!("unexpected end of file, expected {what}"))
        })?;
        self.pos += 1;
        Ok(t)
    }

    fn parse<T: FromStr>(&mut self, what: &str) -> Result<T> {
        let (tok, line) = self.next(what)?;
        tok.parse()
            .map_err(|_| Error::format(self.path, line, format!("expected {what}, found {tok:?}")))
    }

    fn peek(&self) -> Option<&'a str> {
        self.toks.get(self.pos).map(|t| t.0)
    }
}

fn parse_vtk(path: &Path, text: &str) -> Result<SurfaceMesh> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if !header.trim_start().starts_with("# vtk DataFile") {
        return Err(Error::format(path, 1, "missing '# vtk DataFile' header"));
    }
    let _title = lines.next();
    let enc = lines.next().unwrap_or("").trim();
    if !enc.eq_ignore_ascii_case("ASCII") {
        return Err(Error::format(path, 3, format!("only ASCII legacy VTK is supported, found {enc:?}")));
    }
    let toks = text
        .lines()
        .enumerate()
        .skip(3)
        .flat_map(|(i, l)| l.split_whitespace().map(move |t| (t, i + 1)))
        .collect();
    let mut tk = Tokens { path, toks, pos: 0 };

    let (kw, line) = tk.next("DATASET")?;
    if !kw.eq_ignore_ascii_case("DATASET") {
        return Err(Error::format(path, line, format!("expected DATASET, found {kw:?}")));
    }
    let (kind, line) = tk.next("dataset type")?;
    let unstructured = match kind.to_ascii_uppercase().as_str() {
        "POLYDATA" => false,
        "UNSTRUCTURED_GRID" => true,
        other => {
            return Err(Error::format(path, line, format!("unsupported dataset type {other}")));
        }
    };

    let mut nodes: Vec<[f64; 3]> = Vec::new();
    let mut tris: Vec<[usize; 3]> = Vec::new();
    let mut sets = BTreeMap::new();
    while let Some(kw) = tk.peek() {
        let (_, line) = tk.next("keyword")?;
        match kw.to_ascii_uppercase().as_str() {
            "POINTS" => {
                let n: usize = tk.parse("point count")?;
                let _dtype = tk.next("point data type")?;
                nodes.reserve(n);
                for _ in 0..n {
                    nodes.push([tk.parse("coordinate")?, tk.parse("coordinate")?, tk.parse("coordinate")?]);
                }
            }
            "POLYGONS" if !unstructured => {
                let n: usize = tk.parse("polygon count")?;
                let _size: usize = tk.parse("polygon list size")?;
                for _ in 0..n {
                    let (c, l) = tk.next("vertex count")?;
                    if c != "3" {
                        return Err(Error::format(path, l, format!("only triangles are supported, found a {c}-gon")));
                    }
                    tris.push([tk.parse("index")?, tk.parse("index")?, tk.parse("index")?]);
                }
            }
            "CELLS" if unstructured => {
                let n: usize = tk.parse("cell count")?;
                let _size: usize = tk.parse("cell list size")?;
                for _ in 0..n {
                    let (c, l) = tk.next("vertex count")?;
                    if c != "3" {
                        return Err(Error::format(path, l, format!("only triangle cells are supported, found {c} vertices")));
                    }
                    tris.push([tk.parse("index")?, tk.parse("index")?, tk.parse("index")?]);
                }
            }
            "CELL_TYPES" if unstructured => {
                let n: usize = tk.parse("cell type count")?;
                for _ in 0..n {
                    let (t, l) = tk.next("cell type")?;
                    if t != "5" {
                        return Err(Error::format(path, l, format!("only VTK_TRIANGLE (5) cells are supported, found type {t}")));
                    }
                }
            }
            "POINT_DATA" => {
                let n: usize = tk.parse("point data count")?;
                parse_attributes(&mut tk, n, Some(&mut sets))?;
            }
            "CELL_DATA" => {
                let n: usize = tk.parse("cell data count")?;
                parse_attributes(&mut tk, n, None)?;
            }
            other => {
                return Err(Error::format(path, line, format!("unsupported section {other}")));
            }
        }
    }
    SurfaceMesh::new(nodes, tris, sets)
}

fn parse_attributes(
    tk: &mut Tokens<'_>,
    n: usize,
    mut sets: Option<&mut BTreeMap<String, Vec<usize>>>,
) -> Result<()> {
    while let Some(kw) = tk.peek() {
        match kw.to_ascii_uppercase().as_str() {
            "SCALARS" => {
                tk.next("SCALARS")?;
                let (name, _) = tk.next("array name")?;
                let _dtype = tk.next("data type")?;
                let mut ncomp = 1usize;
                if tk.peek().is_some_and(|t| t.parse::<usize>().is_ok()) {
                    ncomp = tk.parse("component count")?;
                }
                if tk.peek().is_some_and(|t| t.eq_ignore_ascii_case("LOOKUP_TABLE")) {
                    tk.next("LOOKUP_TABLE")?;
                    tk.next("lookup table name")?;
                }
                let mut members = Vec::new();
                for i in 0..n {
                    for _ in 0..ncomp {
                        let v: f64 = tk.parse("scalar value")?;
                        if v != 0.0 {
                            members.push(i);
                        }
                    }
                }
                if let (Some(sets), Some(set_name)) = (sets.as_deref_mut(), name.strip_prefix("set_")) {
                    members.dedup();
                    sets.insert(set_name.to_string(), members);
                }
            }
            "VECTORS" | "NORMALS" => {
                tk.next("attribute")?;
                tk.next("array name")?;
                tk.next("data type")?;
                for _ in 0..3 * n {
                    let _: f64 = tk.parse("vector component")?;
                }
            }
            "FIELD" => {
                tk.next("FIELD")?;
                tk.next("field name")?;
                let arrays: usize = tk.parse("array count")?;
                for _ in 0..arrays {
                    tk.next("array name")?;
                    let ncomp: usize = tk.parse("component count")?;
                    let ntup: usize = tk.parse("tuple count")?;
                    tk.next("data type")?;
                    for _ in 0..ncomp * ntup {
                        let _: f64 = tk.parse("field value")?;
                    }
                }
            }
            _ => break,
        }
    }
    Ok(())
}
