use std::io::Write;
use std::path::Path;

use crate::fusion::TriangleMesh;

use super::IoError;

/// Write a mesh as ASCII PLY: `x y z [red green blue]` vertices plus
/// triangle face lists. Deterministic output for identical meshes.
pub fn write_ply(path: &Path, mesh: &TriangleMesh) -> Result<(), IoError> {
    let mut out = Vec::with_capacity(mesh.vertices.len() * 48 + mesh.triangles.len() * 16);
    let with_color = mesh.colors.is_some();
    writeln!(out, "ply").unwrap();
    writeln!(out, "format ascii 1.0").unwrap();
    writeln!(out, "element vertex {}", mesh.vertices.len()).unwrap();
    writeln!(out, "property float x").unwrap();
    writeln!(out, "property float y").unwrap();
    writeln!(out, "property float z").unwrap();
    if with_color {
        writeln!(out, "property uchar red").unwrap();
        writeln!(out, "property uchar green").unwrap();
        writeln!(out, "property uchar blue").unwrap();
    }
    writeln!(out, "element face {}", mesh.triangles.len()).unwrap();
    writeln!(out, "property list uchar int vertex_indices").unwrap();
    writeln!(out, "end_header").unwrap();
    for (i, v) in mesh.vertices.iter().enumerate() {
        if let Some(colors) = &mesh.colors {
            let [r, g, b] = colors[i];
            writeln!(
                out,
                "{:.6} {:.6} {:.6} {} {} {}",
                v.x,
                v.y,
                v.z,
                (r * 255.0).round().clamp(0.0, 255.0) as u8,
                (g * 255.0).round().clamp(0.0, 255.0) as u8,
                (b * 255.0).round().clamp(0.0, 255.0) as u8,
            )
            .unwrap();
        } else {
            writeln!(out, "{:.6} {:.6} {:.6}", v.x, v.y, v.z).unwrap();
        }
    }
    for t in &mesh.triangles {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    std::fs::write(path, out).map_err(|e| IoError::file(path, e))
}
