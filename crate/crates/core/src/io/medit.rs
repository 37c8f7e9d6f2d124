//! Medit ASCII `.mesh` reader and writer.
//!
//! Supported sections: `MeshVersionFormatted`, `Dimension`, `Vertices`,
//! `Triangles`, `Quadrilaterals`, `Tetrahedra` and `End`. `Edges`, `Corners`,
//! `RequiredVertices`, `Ridges` and `Hexahedra` are skipped. Indices are
//! 1-based in the file and 0-based in memory.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{Element, ElementKind};

/// Contents of one `.mesh` file.
#[derive(Clone, Debug, PartialEq)]
pub struct MeditMesh {
    /// Effective dimension: 2 for planar triangle/quad meshes (a constant z
    /// column is dropped), 3 for tetrahedral meshes.
    pub dim: usize,
    pub points: Vec<f64>,
    pub refs: Vec<i64>,
    pub elements: Vec<Element>,
    /// Line of the first connectivity section header, for error messages.
    pub elements_line: usize,
}

impl MeditMesh {
    pub fn num_vertices(&self) -> usize {
        self.points.len() / self.dim
    }
}

struct Tokens<'a> {
    items: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let mut items = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("");
            items.extend(line.split_whitespace().map(|t| (n + 1, t)));
        }
        Self { items, pos: 0 }
    }

    fn next(&mut self) -> Option<(usize, &'a str)> {
        let t = self.items.get(self.pos).copied();
        self.pos += 1;
        t
    }

    fn last_line(&self) -> usize {
        self.items.last().map_or(1, |t| t.0)
    }
}

pub fn parse_medit(text: &str, path: &Path) -> Result<MeditMesh> {
    let mut tok = Tokens::new(text);
    let err = |line: usize, msg: String| Error::parse(path, line, msg);

    let expect_num = |tok: &mut Tokens, what: &str| -> Result<(usize, f64)> {
        let (line, t) = tok.next().ok_or_else(|| err(tok.last_line(), format!("unexpected end of file, expected {what}")))?;
        let v = t.parse::<f64>().map_err(|_| err(line, format!("expected {what}, found '{t}'")))?;
        Ok((line, v))
    };
    fn as_int(v: f64, line: usize, path: &Path, what: &str) -> Result<i64> {
        if v.fract() != 0.0 || !v.is_finite() {
            return Err(Error::parse(path, line, format!("expected integer {what}, found {v}")));
        }
        Ok(v as i64)
    }

    let mut file_dim = None;
    let mut coords: Vec<f64> = Vec::new();
    let mut refs = Vec::new();
    let mut raw: Vec<(ElementKind, usize, Vec<i64>)> = Vec::new();
    let mut elements_line = 0;

    while let Some((line, kw)) = tok.next() {
        match kw {
            "MeshVersionFormatted" => {
                expect_num(&mut tok, "format version")?;
            }
            "Dimension" => {
                let (l, v) = expect_num(&mut tok, "dimension")?;
                let d = as_int(v, l, path, "dimension")?;
                if d != 2 && d != 3 {
                    return Err(err(l, format!("unsupported dimension {d}")));
                }
                file_dim = Some(d as usize);
            }
            "Vertices" => {
                let d = file_dim.ok_or_else(|| err(line, "Vertices before Dimension".into()))?;
                let (l, v) = expect_num(&mut tok, "vertex count")?;
                let count = as_int(v, l, path, "vertex count")?;
                if count < 0 {
                    return Err(err(l, "negative vertex count".into()));
                }
                coords.reserve(count as usize * d);
                for _ in 0..count {
                    for _ in 0..d {
                        let (l, x) = expect_num(&mut tok, "coordinate")?;
                        if !x.is_finite() {
                            return Err(err(l, "non-finite coordinate".into()));
                        }
                        coords.push(x);
                    }
                    let (l, r) = expect_num(&mut tok, "vertex reference")?;
                    refs.push(as_int(r, l, path, "vertex reference")?);
                }
            }
            "Triangles" | "Quadrilaterals" | "Tetrahedra" => {
                let kind = match kw {
                    "Triangles" => ElementKind::Triangle,
                    "Quadrilaterals" => ElementKind::Quad,
                    _ => ElementKind::Tetrahedron,
                };
                if elements_line == 0 {
                    elements_line = line;
                }
                let (l, v) = expect_num(&mut tok, "element count")?;
                let count = as_int(v, l, path, "element count")?;
                for _ in 0..count {
                    let mut nodes = Vec::with_capacity(kind.num_nodes());
                    let mut first_line = 0;
                    for _ in 0..kind.num_nodes() {
                        let (l, x) = expect_num(&mut tok, "vertex index")?;
                        first_line = if first_line == 0 { l } else { first_line };
                        nodes.push(as_int(x, l, path, "vertex index")?);
                    }
                    expect_num(&mut tok, "element reference")?;
                    raw.push((kind, first_line, nodes));
                }
            }
            "Edges" | "Corners" | "RequiredVertices" | "Ridges" | "Hexahedra" => {
                let per = match kw {
                    "Edges" => 3,
                    "Hexahedra" => 9,
                    _ => 1,
                };
                let (l, v) = expect_num(&mut tok, "entry count")?;
                let count = as_int(v, l, path, "entry count")?;
                for _ in 0..count * per {
                    expect_num(&mut tok, "entry")?;
                }
            }
            "End" => break,
            other => return Err(err(line, format!("unknown section '{other}'"))),
        }
    }

    let file_dim = file_dim.ok_or_else(|| err(1, "missing Dimension".into()))?;
    let nv = refs.len();
    let has_tets = raw.iter().any(|r| r.0 == ElementKind::Tetrahedron);

    let dim = if has_tets {
        if file_dim != 3 {
            return Err(err(elements_line, "tetrahedra in a 2D file".into()));
        }
        3
    } else {
        2
    };

    let points = if file_dim == 3 && dim == 2 {
        let z0 = coords.get(2).copied().unwrap_or(0.0);
        if let Some(v) = (0..nv).find(|&v| coords[3 * v + 2] != z0) {
            return Err(err(elements_line.max(1), format!("planar mesh expected: vertex {} has z = {} but vertex 1 has z = {z0}", v + 1, coords[3 * v + 2])));
        }
        coords.chunks_exact(3).flat_map(|p| [p[0], p[1]]).collect()
    } else {
        coords
    };

    let mut elements = Vec::with_capacity(raw.len());
    for (kind, line, nodes) in raw {
        // boundary faces of a volume mesh are not part of the map
        if kind.dim() != dim {
            continue;
        }
        let mut idx = [0usize; 4];
        for (k, &n) in nodes.iter().enumerate() {
            if n < 1 || n as usize > nv {
                return Err(err(line, format!("vertex index {n} out of range 1..={nv}")));
            }
            idx[k] = n as usize - 1;
        }
        elements.push(Element::new(kind, &idx[..nodes.len()]));
    }

    Ok(MeditMesh { dim, points, refs, elements, elements_line })
}

pub fn read_medit(path: &Path) -> Result<MeditMesh> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_medit(&text, path)
}

/// Serializes a mesh; element sections are written triangles, quads, tets.
pub fn format_medit(dim: usize, points: &[f64], refs: &[i64], elements: &[Element]) -> String {
    let mut s = String::new();
    let nv = points.len() / dim;
    let _ = writeln!(s, "MeshVersionFormatted 2\nDimension {dim}\n\nVertices\n{nv}");
    for v in 0..nv {
        let p = &points[v * dim..(v + 1) * dim];
        for x in p {
            let _ = write!(s, "{x:?} ");
        }
        let _ = writeln!(s, "{}", refs.get(v).copied().unwrap_or(0));
    }
    for (kind, name) in [(ElementKind::Triangle, "Triangles"), (ElementKind::Quad, "Quadrilaterals"), (ElementKind::Tetrahedron, "Tetrahedra")] {
        let of_kind: Vec<&Element> = elements.iter().filter(|e| e.kind == kind).collect();
        if of_kind.is_empty() {
            continue;
        }
        let _ = writeln!(s, "\n{name}\n{}", of_kind.len());
        for e in of_kind {
            for n in e.nodes() {
                let _ = write!(s, "{} ", n + 1);
            }
            let _ = writeln!(s, "0");
        }
    }
    s.push_str("\nEnd\n");
    s
}

pub fn write_medit(path: &Path, dim: usize, points: &[f64], refs: &[i64], elements: &[Element]) -> Result<()> {
    fs::write(path, format_medit(dim, points, refs, elements)).map_err(|e| Error::io(path, e))
}
