//! ASCII MSH 2.2 reader and writer for 3-node triangle surfaces.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use super::geom::Point;
use super::TriangleMesh;
use crate::{Error, Result};

const TRIANGLE: u32 = 2;

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::InvalidInput(format!("msh line {line}: {msg}"))
}

/// Reads `$Nodes` and `$Elements`; element types other than 2 are skipped.
pub fn import_msh<R: BufRead>(reader: R) -> Result<TriangleMesh> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut nodes: HashMap<u64, Point> = HashMap::new();
    let mut tris: Vec<[u64; 3]> = Vec::new();
    let mut saw_format = false;
    let mut skipped: HashMap<u32, usize> = HashMap::new();

    let next = |lines: &mut dyn Iterator<Item = (usize, std::io::Result<String>)>| -> Result<Option<(usize, String)>> {
        match lines.next() {
            None => Ok(None),
            Some((n, l)) => Ok(Some((n, l?.trim().to_string()))),
        }
    };

    while let Some((ln, line)) = next(&mut lines)? {
        match line.as_str() {
            "$MeshFormat" => {
                let (ln, fmt) = next(&mut lines)?.ok_or_else(|| parse_err(ln, "truncated header"))?;
                let mut it = fmt.split_whitespace();
                let version = it.next().unwrap_or("");
                let file_type = it.next().unwrap_or("");
                if !version.starts_with("2.") {
                    return Err(parse_err(ln, format!("unsupported MSH version {version}")));
                }
                if file_type != "0" {
                    return Err(parse_err(ln, "binary MSH files are not supported"));
                }
                saw_format = true;
            }
            "$Nodes" => {
                let (ln, count) = next(&mut lines)?.ok_or_else(|| parse_err(ln, "truncated node block"))?;
                let count: usize = count.parse().map_err(|_| parse_err(ln, "bad node count"))?;
                for _ in 0..count {
                    let (ln, l) = next(&mut lines)?.ok_or_else(|| parse_err(ln, "truncated node block"))?;
                    let f: Vec<&str> = l.split_whitespace().collect();
                    if f.len() < 4 {
                        return Err(parse_err(ln, "node line needs id x y z"));
                    }
                    let id: u64 = f[0].parse().map_err(|_| parse_err(ln, "bad node id"))?;
                    let mut p = [0.0; 3];
                    for d in 0..3 {
                        p[d] = f[d + 1].parse().map_err(|_| parse_err(ln, "bad coordinate"))?;
                    }
                    nodes.insert(id, p);
                }
            }
            "$Elements" => {
                let (ln, count) = next(&mut lines)?.ok_or_else(|| parse_err(ln, "truncated element block"))?;
                let count: usize = count.parse().map_err(|_| parse_err(ln, "bad element count"))?;
                for _ in 0..count {
                    let (ln, l) = next(&mut lines)?.ok_or_else(|| parse_err(ln, "truncated element block"))?;
                    let f: Vec<u64> = l
                        .split_whitespace()
                        .map(|s| s.parse::<u64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| parse_err(ln, "bad element line"))?;
                    if f.len() < 3 {
                        return Err(parse_err(ln, "element line too short"));
                    }
                    let ty = f[1] as u32;
                    let ntags = f[2] as usize;
                    if ty != TRIANGLE {
                        *skipped.entry(ty).or_default() += 1;
                        continue;
                    }
                    if f.len() != 3 + ntags + 3 {
                        return Err(parse_err(ln, "triangle needs three nodes"));
                    }
                    let v = &f[3 + ntags..];
                    tris.push([v[0], v[1], v[2]]);
                }
            }
            _ => {}
        }
    }
    if !saw_format {
        return Err(Error::InvalidInput("missing $MeshFormat section".into()));
    }
    let mut kinds: Vec<_> = skipped.into_iter().collect();
    kinds.sort_unstable();
    for (ty, n) in kinds {
        log::warn!("skipped {n} elements of unsupported type {ty}");
    }

    // keep referenced nodes only, ordered by node id
    let mut used: Vec<u64> = tris.iter().flatten().copied().collect();
    used.sort_unstable();
    used.dedup();
    let mut remap: HashMap<u64, usize> = HashMap::with_capacity(used.len());
    let mut vertices = Vec::with_capacity(used.len());
    for id in used {
        let p = *nodes
            .get(&id)
            .ok_or_else(|| Error::InvalidInput(format!("element references unknown node {id}")))?;
        remap.insert(id, vertices.len());
        vertices.push(p);
    }
    let triangles: Vec<[usize; 3]> = tris.iter().map(|t| t.map(|id| remap[&id])).collect();
    TriangleMesh::from_unoriented(vertices, triangles)
}

/// Writes the mesh with one physical/elementary tag pair per triangle.
pub fn export_msh<W: Write>(mesh: &TriangleMesh, mut w: W) -> Result<()> {
    writeln!(w, "$MeshFormat\n2.2 0 8\n$EndMeshFormat")?;
    writeln!(w, "$Nodes\n{}", mesh.vertices.len())?;
    for (i, p) in mesh.vertices.iter().enumerate() {
        writeln!(w, "{} {:.17e} {:.17e} {:.17e}", i + 1, p[0], p[1], p[2])?;
    }
    writeln!(w, "$EndNodes\n$Elements\n{}", mesh.triangles.len())?;
    for (i, t) in mesh.triangles.iter().enumerate() {
        writeln!(w, "{} 2 2 1 1 {} {} {}", i + 1, t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    writeln!(w, "$EndElements")?;
    Ok(())
}
