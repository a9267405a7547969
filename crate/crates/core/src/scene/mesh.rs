use std::collections::HashMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{point_scene, Scatterer, Scene};
use crate::error::{Error, Result};

/// Length unit of STL coordinates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StlUnits {
    #[default]
    Mm,
    M,
}

impl StlUnits {
    fn scale(self) -> f64 {
        match self {
            StlUnits::Mm => 1e-3,
            StlUnits::M => 1.0,
        }
    }
}

impl std::str::FromStr for StlUnits {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mm" => Ok(StlUnits::Mm),
            "m" => Ok(StlUnits::M),
            other => Err(Error::invalid("stl-units", format!("expected `m` or `mm`, got `{other}`"))),
        }
    }
}

/// Indexed triangle mesh in meters with zero-area faces removed.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<[f64; 3]>,
    triangles: Vec<[u32; 3]>,
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

impl TriangleMesh {
    /// Validates indices and drops zero-area triangles.
    pub fn new(vertices: Vec<[f64; 3]>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        if let Some(i) = vertices.iter().position(|v| v.iter().any(|c| !c.is_finite())) {
            return Err(Error::invalid(format!("vertices[{i}]"), "non-finite coordinate"));
        }
        let n = vertices.len() as u32;
        if let Some(i) = triangles.iter().position(|t| t.iter().any(|&k| k >= n)) {
            return Err(Error::invalid(format!("triangles[{i}]"), "vertex index out of range"));
        }
        let mut mesh = TriangleMesh { vertices, triangles };
        mesh.triangles.retain(|t| {
            let [a, b, c] = t.map(|k| mesh.vertices[k as usize]);
            norm(cross(sub(b, a), sub(c, a))) > 0.0
        });
        Ok(mesh)
    }

    /// Builds an indexed mesh from a triangle soup, merging bit-identical vertices.
    pub fn from_soup(soup: &[[[f64; 3]; 3]]) -> Result<Self> {
        let mut index: HashMap<[u64; 3], u32> = HashMap::new();
        let mut vertices = Vec::new();
        let mut triangles = Vec::with_capacity(soup.len());
        for tri in soup {
            let t = tri.map(|v| {
                *index.entry(v.map(f64::to_bits)).or_insert_with(|| {
                    vertices.push(v);
                    (vertices.len() - 1) as u32
                })
            });
            triangles.push(t);
        }
        TriangleMesh::new(vertices, triangles)
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn corners(&self, t: usize) -> [[f64; 3]; 3] {
        self.triangles[t].map(|k| self.vertices[k as usize])
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        0.5 * norm(cross(sub(b, a), sub(c, a)))
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Applies `p ↦ scale * p + offset`.
    pub fn transformed(&self, scale: f64, offset: [f64; 3]) -> TriangleMesh {
        TriangleMesh {
            vertices: self
                .vertices
                .iter()
                .map(|v| [0, 1, 2].map(|i| v[i] * scale + offset[i]))
                .collect(),
            triangles: self.triangles.clone(),
        }
    }
}

fn is_binary_stl(bytes: &[u8]) -> bool {
    if bytes.len() < 84 {
        return false;
    }
    let n = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as u64;
    let trimmed = bytes.iter().position(|b| !b.is_ascii_whitespace()).unwrap_or(0);
    let looks_ascii = bytes[trimmed..].starts_with(b"solid")
        && bytes.windows(5).any(|w| w == b"facet");
    84 + 50 * n == bytes.len() as u64 || !looks_ascii
}

fn parse_binary(bytes: &[u8]) -> Result<Vec<[[f64; 3]; 3]>> {
    if bytes.len() < 84 {
        return Err(Error::Parse {
            offset: bytes.len() as u64,
            msg: "binary STL shorter than its 84-byte header".into(),
        });
    }
    let n = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as u64;
    let need = 84 + 50 * n;
    if (bytes.len() as u64) < need {
        let complete = (bytes.len() as u64 - 84) / 50;
        return Err(Error::Parse {
            offset: 84 + 50 * complete,
            msg: format!(
                "header claims {n} facets but payload holds {complete} ({} of {need} bytes)",
                bytes.len()
            ),
        });
    }
    let mut soup = Vec::with_capacity(n as usize);
    for f in 0..n as usize {
        let base = 84 + 50 * f + 12;
        let mut tri = [[0.0; 3]; 3];
        for (v, vert) in tri.iter_mut().enumerate() {
            for (c, coord) in vert.iter_mut().enumerate() {
                let o = base + 12 * v + 4 * c;
                *coord = f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as f64;
            }
        }
        soup.push(tri);
    }
    Ok(soup)
}

struct Tokens<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn next(&mut self) -> Option<(usize, &'a str)> {
        let rest = &self.text[self.pos..];
        let start = self.pos + rest.find(|c: char| !c.is_ascii_whitespace())?;
        let len = self.text[start..]
            .find(|c: char| c.is_ascii_whitespace())
            .unwrap_or(self.text.len() - start);
        self.pos = start + len;
        Some((start, &self.text[start..start + len]))
    }

    fn skip_line(&mut self) {
        match self.text[self.pos..].find('\n') {
            Some(i) => self.pos += i + 1,
            None => self.pos = self.text.len(),
        }
    }

    fn expect(&mut self, word: &str) -> Result<()> {
        match self.next() {
            Some((_, t)) if t.eq_ignore_ascii_case(word) => Ok(()),
            Some((o, t)) => Err(Error::Parse { offset: o as u64, msg: format!("expected `{word}`, found `{t}`") }),
            None => Err(Error::Parse { offset: self.text.len() as u64, msg: format!("expected `{word}`, found end of file") }),
        }
    }

    fn number(&mut self) -> Result<f64> {
        match self.next() {
            Some((o, t)) => t.parse::<f64>().map_err(|_| Error::Parse {
                offset: o as u64,
                msg: format!("expected a number, found `{t}`"),
            }),
            None => Err(Error::Parse { offset: self.text.len() as u64, msg: "expected a number, found end of file".into() }),
        }
    }
}

fn parse_ascii(bytes: &[u8]) -> Result<Vec<[[f64; 3]; 3]>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        offset: e.valid_up_to() as u64,
        msg: "ASCII STL is not valid UTF-8".into(),
    })?;
    let mut tok = Tokens { text, pos: 0 };
    tok.expect("solid")?;
    tok.skip_line();
    let mut soup = Vec::new();
    loop {
        match tok.next() {
            Some((_, t)) if t.eq_ignore_ascii_case("endsolid") => break,
            Some((_, t)) if t.eq_ignore_ascii_case("facet") => {
                tok.expect("normal")?;
                for _ in 0..3 {
                    tok.number()?;
                }
                tok.expect("outer")?;
                tok.expect("loop")?;
                let mut tri = [[0.0; 3]; 3];
                for v in tri.iter_mut() {
                    tok.expect("vertex")?;
                    for c in v.iter_mut() {
                        *c = tok.number()?;
                    }
                }
                tok.expect("endloop")?;
                tok.expect("endfacet")?;
                soup.push(tri);
            }
            Some((o, t)) => {
                return Err(Error::Parse { offset: o as u64, msg: format!("expected `facet` or `endsolid`, found `{t}`") })
            }
            None => {
                return Err(Error::Parse { offset: text.len() as u64, msg: "missing `endsolid`".into() })
            }
        }
    }
    Ok(soup)
}

/// Reads a binary or ASCII STL, scaling coordinates to meters.
pub fn import_stl(bytes: &[u8], units: StlUnits) -> Result<TriangleMesh> {
    let soup = if is_binary_stl(bytes) {
        parse_binary(bytes)?
    } else {
        parse_ascii(bytes)?
    };
    let s = units.scale();
    let scaled: Vec<[[f64; 3]; 3]> = soup.iter().map(|t| t.map(|v| v.map(|c| c * s))).collect();
    TriangleMesh::from_soup(&scaled)
}

/// Samples the surface uniformly at areal density `1/spacing²`.
///
/// The total count is `⌈area/spacing²⌉`, apportioned to triangles by
/// largest remainder; positions within each triangle are uniform.
pub fn mesh_to_scatterers(
    mesh: &TriangleMesh,
    spacing: f64,
    reflectivity: Complex64,
    seed: u64,
) -> Result<Scene> {
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::invalid("spacing", "must be positive"));
    }
    let total_area = mesh.area();
    if mesh.is_empty() || total_area <= 0.0 {
        return Err(Error::Geometry("mesh has no triangles with nonzero area".into()));
    }
    let quotas: Vec<f64> = (0..mesh.triangles.len())
        .map(|t| mesh.triangle_area(t) / (spacing * spacing))
        .collect();
    let total = (total_area / (spacing * spacing)).ceil().max(1.0) as usize;
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (quotas[a].fract(), quotas[b].fract());
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &t in order.iter().cycle().take(total.saturating_sub(assigned)) {
        counts[t] += 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(total);
    for (t, &n) in counts.iter().enumerate() {
        let [a, b, c] = mesh.corners(t);
        for _ in 0..n {
            let r1: f64 = rng.random::<f64>().sqrt();
            let r2: f64 = rng.random();
            let (wa, wb, wc) = (1.0 - r1, r1 * (1.0 - r2), r1 * r2);
            let p = [0, 1, 2].map(|i| wa * a[i] + wb * b[i] + wc * c[i]);
            pts.push(Scatterer::new(p, reflectivity));
        }
    }
    point_scene(pts)
}

/// A simple kitchen-knife solid of overall length `length` (m), blade along
/// +x, centered on the origin.
pub fn knife_mesh(length: f64) -> TriangleMesh {
    let blade = 0.62 * length;
    let handle = length - blade;
    let x0 = -length / 2.0;
    let xh = x0 + handle;
    let hw = 0.05 * length; // handle half-height (y)
    let ht = 0.025 * length; // handle half-thickness (z)
    let bw = 0.065 * length; // blade height (y)
    let bt = 0.006 * length; // blade half-thickness
    let xt = x0 + length;

    let mut soup: Vec<[[f64; 3]; 3]> = Vec::new();
    let quad = |soup: &mut Vec<[[f64; 3]; 3]>, a: [f64; 3], b: [f64; 3], c: [f64; 3], d: [f64; 3]| {
        soup.push([a, b, c]);
        soup.push([a, c, d]);
    };
    // handle box
    let hb = |x: f64, y: f64, z: f64| [x, y, z];
    let (ya, yb, za, zb) = (-hw, hw, -ht, ht);
    quad(&mut soup, hb(x0, ya, za), hb(xh, ya, za), hb(xh, yb, za), hb(x0, yb, za));
    quad(&mut soup, hb(x0, ya, zb), hb(x0, yb, zb), hb(xh, yb, zb), hb(xh, ya, zb));
    quad(&mut soup, hb(x0, ya, za), hb(x0, ya, zb), hb(xh, ya, zb), hb(xh, ya, za));
    quad(&mut soup, hb(x0, yb, za), hb(xh, yb, za), hb(xh, yb, zb), hb(x0, yb, zb));
    quad(&mut soup, hb(x0, ya, za), hb(x0, yb, za), hb(x0, yb, zb), hb(x0, ya, zb));
    // blade: triangular prism from spine (y = bw - hw) to edge (y = -hw), tip at xt
    let spine = bw - hw;
    let edge = -hw;
    for z in [-bt, bt] {
        soup.push([[xh, edge, z], [xt, edge, z], [xh, spine, z]]);
    }
    quad(&mut soup, [xh, spine, -bt], [xt, edge, -bt], [xt, edge, bt], [xh, spine, bt]);
    quad(&mut soup, [xh, edge, -bt], [xh, edge, bt], [xt, edge, bt], [xt, edge, -bt]);
    TriangleMesh::from_soup(&soup).expect("static knife geometry")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary_stl(tris: &[[[f32; 3]; 3]], claimed: Option<u32>) -> Vec<u8> {
        let mut out = vec![0u8; 80];
        out.extend_from_slice(&claimed.unwrap_or(tris.len() as u32).to_le_bytes());
        for t in tris {
            out.extend_from_slice(&[0u8; 12]);
            for v in t {
                for c in v {
                    out.extend_from_slice(&c.to_le_bytes());
                }
            }
            out.extend_from_slice(&[0u8; 2]);
        }
        out
    }

    const SQUARE: [[[f32; 3]; 3]; 2] = [
        [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0]],
        [[0.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]],
    ];

    #[test]
    fn binary_two_triangles() {
        let m = import_stl(&binary_stl(&SQUARE, None), StlUnits::M).unwrap();
        assert_eq!(m.triangles().len(), 2);
        assert!(m.vertices().len() <= 6);
        assert_eq!(m.vertices().len(), 4);
        assert!((m.area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn millimeter_default() {
        let m = import_stl(&binary_stl(&SQUARE, None), StlUnits::default()).unwrap();
        assert!((m.area() - 1e-6).abs() < 1e-18);
    }

    #[test]
    fn ascii_single_facet() {
        let text = "solid test\n facet normal 0 0 1\n  outer loop\n   vertex 0 0 0\n   vertex 1 0 0\n   vertex 0 1 0\n  endloop\n endfacet\nendsolid test\n";
        let m = import_stl(text.as_bytes(), StlUnits::M).unwrap();
        assert_eq!(m.triangles().len(), 1);
    }

    #[test]
    fn ascii_error_has_offset() {
        let text = "solid t\nfacet normal 0 0 1\nouter loop\nvertex 0 0 x\n";
        match import_stl(text.as_bytes(), StlUnits::M) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, text.rfind('x').unwrap() as u64),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn truncated_binary() {
        let bytes = binary_stl(&SQUARE, Some(5));
        match import_stl(&bytes, StlUnits::M) {
            Err(Error::Parse { offset, msg }) => {
                assert_eq!(offset, 84 + 100);
                assert!(msg.contains("claims 5"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn degenerate_triangles_dropped() {
        let tris = [[[0.0f32, 0.0, 0.0], [1.0, 1.0, 1.0], [2.0, 2.0, 2.0]]];
        let m = import_stl(&binary_stl(&tris, None), StlUnits::M).unwrap();
        assert!(m.is_empty());
        assert!(mesh_to_scatterers(&m, 0.1, Complex64::new(1.0, 0.0), 0).is_err());
    }

    fn unit_square() -> TriangleMesh {
        import_stl(&binary_stl(&SQUARE, None), StlUnits::M).unwrap()
    }

    #[test]
    fn count_follows_area() {
        let m = unit_square();
        for s in [0.3, 0.1, 0.07, 0.013] {
            let scene = mesh_to_scatterers(&m, s, Complex64::new(1.0, 0.0), 1).unwrap();
            let want = (1.0 / (s * s)).ceil() as i64;
            assert!((scene.len() as i64 - want).abs() <= 2, "s={s}: {} vs {want}", scene.len());
        }
        assert!(mesh_to_scatterers(&m, 0.0, Complex64::new(1.0, 0.0), 1).is_err());
    }

    #[test]
    fn area_scaling() {
        let m = unit_square();
        let big = m.transformed(2.0, [0.0; 3]);
        let a = mesh_to_scatterers(&m, 0.05, Complex64::new(1.0, 0.0), 3).unwrap().len() as f64;
        let b = mesh_to_scatterers(&big, 0.05, Complex64::new(1.0, 0.0), 3).unwrap().len() as f64;
        assert!((b / a - 4.0).abs() < 0.02);
    }

    // brute-force point-to-triangle distance
    fn dist_to_triangle(p: [f64; 3], [a, b, c]: [[f64; 3]; 3]) -> f64 {
        let n = cross(sub(b, a), sub(c, a));
        let nn = norm(n);
        let n = n.map(|v| v / nn);
        let d = sub(p, a);
        let h = d[0] * n[0] + d[1] * n[1] + d[2] * n[2];
        let q = [0, 1, 2].map(|i| p[i] - h * n[i]);
        let inside = [(a, b), (b, c), (c, a)].iter().all(|&(u, v)| {
            let cr = cross(sub(v, u), sub(q, u));
            cr[0] * n[0] + cr[1] * n[1] + cr[2] * n[2] >= -1e-15
        });
        if inside {
            return h.abs();
        }
        [(a, b), (b, c), (c, a)]
            .iter()
            .map(|&(u, v)| {
                let e = sub(v, u);
                let t = ((sub(p, u)[0] * e[0] + sub(p, u)[1] * e[1] + sub(p, u)[2] * e[2])
                    / (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]))
                    .clamp(0.0, 1.0);
                norm(sub(p, [0, 1, 2].map(|i| u[i] + t * e[i])))
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn samples_lie_on_surface() {
        let m = knife_mesh(0.05);
        let s = mesh_to_scatterers(&m, 1e-3, Complex64::new(0.5, 0.5), 11).unwrap();
        for sc in s.scatterers() {
            let d = (0..m.triangles().len())
                .map(|t| dist_to_triangle(sc.position, m.corners(t)))
                .fold(f64::INFINITY, f64::min);
            assert!(d < 1e-9, "{d}");
        }
    }

    #[test]
    fn sampling_is_seeded() {
        let m = knife_mesh(0.05);
        let a = mesh_to_scatterers(&m, 2e-3, Complex64::new(1.0, 0.0), 5).unwrap();
        let b = mesh_to_scatterers(&m, 2e-3, Complex64::new(1.0, 0.0), 5).unwrap();
        assert_eq!(a, b);
    }
}
