use std::collections::HashMap;

use nalgebra::Vector3;

use super::tables::{EDGE_CORNERS, EDGE_TABLE, TRI_TABLE};
use super::TsdfVolume;

/// Indexed triangle mesh with optional per-vertex colors.
#[derive(Debug, Clone, Default)]
pub struct TriangleMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub triangles: Vec<[usize; 3]>,
    pub colors: Option<Vec<[f64; 3]>>,
}

impl TriangleMesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }
}

const CORNER_OFFSETS: [(usize, usize, usize); 8] = [
    (0, 0, 0),
    (1, 0, 0),
    (1, 1, 0),
    (0, 1, 0),
    (0, 0, 1),
    (1, 0, 1),
    (1, 1, 1),
    (0, 1, 1),
];

/// Lattice identity of the edge `edge` of cube (i, j, k): the lowest-corner
/// voxel plus the axis the edge runs along. Shared between neighboring cubes
/// so interpolated vertices can be deduplicated exactly.
fn edge_key(i: usize, j: usize, k: usize, edge: usize) -> (usize, usize, usize, u8) {
    let (a, b) = EDGE_CORNERS[edge];
    let ca = CORNER_OFFSETS[a];
    let cb = CORNER_OFFSETS[b];
    let origin = (
        i + ca.0.min(cb.0),
        j + ca.1.min(cb.1),
        k + ca.2.min(cb.2),
    );
    let axis = if ca.0 != cb.0 {
        0
    } else if ca.1 != cb.1 {
        1
    } else {
        2
    };
    (origin.0, origin.1, origin.2, axis)
}

/// Triangulate the zero isosurface of the volume with marching cubes.
///
/// Only cubes whose eight corners have all been observed (weight > 0)
/// produce geometry. Vertex positions interpolate the signed distance
/// linearly along crossing edges; triangles come out in cube scan order, so
/// the mesh is reproducible. Winding is chosen so triangle normals point
/// from negative toward positive signed distance.
pub fn extract_mesh(vol: &TsdfVolume) -> TriangleMesh {
    let [nx, ny, nz] = vol.dims();
    let mut vertices: Vec<Vector3<f64>> = Vec::new();
    let mut colors: Vec<[f64; 3]> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    let mut edge_cache: HashMap<(usize, usize, usize, u8), usize> = HashMap::new();
    let has_color = vol.color().is_some();

    let mut corner_vals = [0.0f64; 8];
    let mut corner_idx = [0usize; 8];
    for k in 0..nz.saturating_sub(1) {
        for j in 0..ny.saturating_sub(1) {
            for i in 0..nx.saturating_sub(1) {
                let mut observed = true;
                let mut cube_index = 0usize;
                for (c, (du, dv, dw)) in CORNER_OFFSETS.iter().enumerate() {
                    let idx = vol.index(i + du, j + dv, k + dw);
                    if vol.weight()[idx] <= 0.0 {
                        observed = false;
                        break;
                    }
                    corner_idx[c] = idx;
                    corner_vals[c] = vol.tsdf()[idx];
                    if corner_vals[c] < 0.0 {
                        cube_index |= 1 << c;
                    }
                }
                if !observed || EDGE_TABLE[cube_index] == 0 {
                    continue;
                }

                let mut edge_vertex = [usize::MAX; 12];
                for edge in 0..12 {
                    if EDGE_TABLE[cube_index] & (1 << edge) == 0 {
                        continue;
                    }
                    let key = edge_key(i, j, k, edge);
                    let next_index = vertices.len();
                    let entry = *edge_cache.entry(key).or_insert_with(|| {
                        let (a, b) = EDGE_CORNERS[edge];
                        let va = corner_vals[a];
                        let vb = corner_vals[b];
                        let t = (0.0 - va) / (vb - va);
                        let t = t.clamp(0.0, 1.0);
                        let (au, av, aw) = CORNER_OFFSETS[a];
                        let (bu, bv, bw) = CORNER_OFFSETS[b];
                        let pa = vol.voxel_center(i + au, j + av, k + aw);
                        let pb = vol.voxel_center(i + bu, j + bv, k + bw);
                        vertices.push(pa + (pb - pa) * t);
                        if has_color {
                            let ca = vol.color().expect("has_color")[corner_idx[a]];
                            let cb = vol.color().expect("has_color")[corner_idx[b]];
                            colors.push([
                                ca[0] + (cb[0] - ca[0]) * t,
                                ca[1] + (cb[1] - ca[1]) * t,
                                ca[2] + (cb[2] - ca[2]) * t,
                            ]);
                        }
                        next_index
                    });
                    edge_vertex[edge] = entry;
                }

                let tri_row = &TRI_TABLE[cube_index];
                let mut t = 0;
                while tri_row[t] >= 0 {
                    let e0 = edge_vertex[tri_row[t] as usize];
                    let e1 = edge_vertex[tri_row[t + 1] as usize];
                    let e2 = edge_vertex[tri_row[t + 2] as usize];
                    debug_assert!(e0 != usize::MAX && e1 != usize::MAX && e2 != usize::MAX);
                    // Table order yields normals toward the negative side
                    // under this corner layout; swap to point them from
                    // negative (inside) to positive (free space).
                    triangles.push([e0, e2, e1]);
                    t += 3;
                }
            }
        }
    }

    TriangleMesh {
        vertices,
        triangles,
        colors: has_color.then_some(colors),
    }
}
