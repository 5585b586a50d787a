//! Bilinear quadrilateral finite elements on the unit square.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

const GAUSS: f64 = 0.577_350_269_189_625_8; // 1/sqrt(3)
/// Reference corner coordinates, counter-clockwise from the lower-left node.
const CORNERS: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
/// 2x2 Gauss points `(xi, eta)` on the reference square.
const GAUSS_POINTS: [(f64, f64); 4] = [(-GAUSS, -GAUSS), (GAUSS, -GAUSS), (-GAUSS, GAUSS), (GAUSS, GAUSS)];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    pub element: usize,
    pub x: f64,
    pub y: f64,
    pub weight: f64,
    /// Bilinear shape function values at this point, ordered like the element nodes.
    pub shape: [f64; 4],
}

/// Uniform `n x n` grid of Q1 elements on `[0,1]^2`.
///
/// Nodes are numbered lexicographically, `id = iy * (n + 1) + ix`.
#[derive(Debug, Clone)]
pub struct Mesh {
    n: usize,
    nodes: Vec<[f64; 2]>,
    elements: Vec<[usize; 4]>,
    boundary: Vec<usize>,
    on_boundary: Vec<bool>,
    quadrature: Vec<QuadPoint>,
}

impl Mesh {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("mesh needs at least one element per side".into()));
        }
        let h = 1.0 / n as f64;
        let side = n + 1;
        let mut nodes = Vec::with_capacity(side * side);
        let mut boundary = Vec::new();
        let mut on_boundary = Vec::with_capacity(side * side);
        for iy in 0..side {
            for ix in 0..side {
                nodes.push([ix as f64 * h, iy as f64 * h]);
                let b = ix == 0 || iy == 0 || ix == n || iy == n;
                on_boundary.push(b);
                if b {
                    boundary.push(iy * side + ix);
                }
            }
        }
        let mut elements = Vec::with_capacity(n * n);
        let mut quadrature = Vec::with_capacity(4 * n * n);
        for ey in 0..n {
            for ex in 0..n {
                let bl = ey * side + ex;
                let e = elements.len();
                elements.push([bl, bl + 1, bl + side + 1, bl + side]);
                let (x0, y0) = (ex as f64 * h, ey as f64 * h);
                for &(gx, gy) in &GAUSS_POINTS {
                    quadrature.push(QuadPoint {
                        element: e,
                        x: x0 + 0.5 * h * (1.0 + gx),
                        y: y0 + 0.5 * h * (1.0 + gy),
                        weight: 0.25 * h * h,
                        shape: shape_values(gx, gy),
                    });
                }
            }
        }
        Ok(Self {
            n,
            nodes,
            elements,
            boundary,
            on_boundary,
            quadrature,
        })
    }

    pub fn elements_per_side(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn elements(&self) -> &[[usize; 4]] {
        &self.elements
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.on_boundary[node]
    }

    /// Four Gauss points per element, element-major.
    pub fn quadrature(&self) -> &[QuadPoint] {
        &self.quadrature
    }

    /// Diagonal of the row-summed (lumped) mass matrix.
    pub fn lumped_mass(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.num_nodes()];
        for q in &self.quadrature {
            for (a, &node) in self.elements[q.element].iter().enumerate() {
                w[node] += q.weight * q.shape[a];
            }
        }
        w
    }

    /// Interpolates nodal values to every quadrature point.
    pub fn interpolate(&self, nodal: &[f64]) -> Vec<f64> {
        self.quadrature
            .iter()
            .map(|q| {
                let el = &self.elements[q.element];
                (0..4).fold(0.0, |acc, a| acc + q.shape[a] * nodal[el[a]])
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "node,x,y,boundary")?;
        for (i, p) in self.nodes.iter().enumerate() {
            writeln!(out, "{},{},{},{}", i, p[0], p[1], u8::from(self.on_boundary[i]))?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(&mut f).map_err(|e| Error::io(path, e))
    }
}

fn shape_values(xi: f64, eta: f64) -> [f64; 4] {
    let mut s = [0.0; 4];
    for (a, &(xa, ya)) in CORNERS.iter().enumerate() {
        s[a] = 0.25 * (1.0 + xa * xi) * (1.0 + ya * eta);
    }
    s
}

/// Physical gradients of the four shape functions for element size `h`.
fn shape_gradients(xi: f64, eta: f64, h: f64) -> [[f64; 2]; 4] {
    let scale = 2.0 / h;
    let mut g = [[0.0; 2]; 4];
    for (a, &(xa, ya)) in CORNERS.iter().enumerate() {
        g[a] = [
            0.25 * xa * (1.0 + ya * eta) * scale,
            0.25 * ya * (1.0 + xa * xi) * scale,
        ];
    }
    g
}

/// Assembles `int k grad(phi_l) . grad(phi_m)` for many coefficient fields on one pattern.
#[derive(Debug, Clone)]
pub struct StiffnessAssembler {
    pattern: CsrMatrix,
    /// Value-array positions of the 16 local entries of each element.
    scatter: Vec<[usize; 16]>,
    /// `weight * grad(phi_a) . grad(phi_b)` at each of the four Gauss points.
    local: [[f64; 16]; 4],
    quad_points: usize,
}

impl StiffnessAssembler {
    pub fn new(mesh: &Mesh) -> Self {
        let nn = mesh.num_nodes();
        let mut triplets = Vec::with_capacity(16 * mesh.elements().len());
        for el in mesh.elements() {
            for &a in el {
                for &b in el {
                    triplets.push((a, b, 0.0));
                }
            }
        }
        let pattern = CsrMatrix::from_triplets(nn, nn, &triplets).expect("mesh connectivity");
        let scatter = mesh
            .elements()
            .iter()
            .map(|el| {
                let mut s = [0usize; 16];
                for a in 0..4 {
                    for b in 0..4 {
                        s[4 * a + b] = pattern.position(el[a], el[b]).expect("pattern entry");
                    }
                }
                s
            })
            .collect();
        let h = mesh.h();
        let mut local = [[0.0; 16]; 4];
        let weight = 0.25 * h * h;
        for (q, &(xi, eta)) in GAUSS_POINTS.iter().enumerate() {
            let g = shape_gradients(xi, eta, h);
            for a in 0..4 {
                for b in 0..4 {
                    local[q][4 * a + b] = weight * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                }
            }
        }
        Self {
            pattern,
            scatter,
            local,
            quad_points: mesh.quadrature().len(),
        }
    }

    pub fn pattern(&self) -> &CsrMatrix {
        &self.pattern
    }

    /// `coeff` holds the coefficient at every quadrature point of the mesh.
    pub fn assemble(&self, coeff: &[f64]) -> Result<CsrMatrix> {
        if coeff.len() != self.quad_points {
            return Err(Error::DimensionMismatch {
                expected: self.quad_points,
                found: coeff.len(),
            });
        }
        let mut values = vec![0.0; self.pattern.nnz()];
        for (e, positions) in self.scatter.iter().enumerate() {
            let k = &coeff[4 * e..4 * e + 4];
            for (t, &p) in positions.iter().enumerate() {
                let v = k[0] * self.local[0][t]
                    + k[1] * self.local[1][t]
                    + k[2] * self.local[2][t]
                    + k[3] * self.local[3][t];
                values[p] += v;
            }
        }
        self.pattern.with_values(values)
    }
}

/// Stiffness matrix for a coefficient given at the quadrature points.
pub fn assemble_stiffness(mesh: &Mesh, coeff: &[f64]) -> Result<CsrMatrix> {
    StiffnessAssembler::new(mesh).assemble(coeff)
}

/// `int f phi_l` for a constant source `f`.
pub fn assemble_load(mesh: &Mesh, f: f64) -> Vec<f64> {
    let mut load = vec![0.0; mesh.num_nodes()];
    for q in mesh.quadrature() {
        for (a, &node) in mesh.elements()[q.element].iter().enumerate() {
            load[node] += f * q.weight * q.shape[a];
        }
    }
    load
}

/// Zero Dirichlet data, size preserving: boundary rows and columns are
/// cleared, a unit diagonal is placed and the boundary load is zeroed.
pub fn apply_dirichlet(k: &mut CsrMatrix, f: &mut [f64], mesh: &Mesh) {
    clear_boundary(k, mesh, 1.0);
    for &b in mesh.boundary_nodes() {
        f[b] = 0.0;
    }
}

/// Clears boundary rows and columns including the diagonal.
///
/// Used for the fluctuation matrices `K_i, i > 0`, so that the boundary part
/// of the global operator is `G_0 ⊗ I` and stays decoupled.
pub fn clear_dirichlet(k: &mut CsrMatrix, mesh: &Mesh) {
    clear_boundary(k, mesh, 0.0);
}

fn clear_boundary(k: &mut CsrMatrix, mesh: &Mesh, diagonal: f64) {
    let n = k.rows();
    let row_ptr = k.row_ptr().to_vec();
    let col_idx = k.col_idx().to_vec();
    let values = k.values_mut();
    for i in 0..n {
        let bi = mesh.is_boundary(i);
        for p in row_ptr[i]..row_ptr[i + 1] {
            let j = col_idx[p];
            if bi || mesh.is_boundary(j) {
                values[p] = if i == j { diagonal } else { 0.0 };
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_sizes() {
        let m = Mesh::new(10).unwrap();
        assert_eq!(m.num_nodes(), 121);
        assert_eq!(m.elements().len(), 100);
        assert_eq!(m.boundary_nodes().len(), 40);
        assert_eq!(Mesh::new(5).unwrap().num_nodes(), 36);
        let m1 = Mesh::new(1).unwrap();
        assert_eq!((m1.num_nodes(), m1.elements().len()), (4, 1));
        assert!(Mesh::new(0).is_err());
    }

    #[test]
    fn quadrature_weights_sum_to_element_area() {
        let m = Mesh::new(3).unwrap();
        for e in 0..9 {
            let s: f64 = m.quadrature()[4 * e..4 * e + 4].iter().map(|q| q.weight).sum();
            assert!((s - 1.0 / 9.0).abs() < 1e-15);
        }
        let w: f64 = m.lumped_mass().iter().sum();
        assert!((w - 1.0).abs() < 1e-14);
    }

    #[test]
    fn unit_element_matrix() {
        let m = Mesh::new(1).unwrap();
        let k = assemble_stiffness(&m, &[1.0; 4]).unwrap();
        for i in 0..4 {
            assert!((k.get(i, i) - 2.0 / 3.0).abs() < 1e-15);
        }
        // edge neighbour and diagonal opposite
        assert!((k.get(0, 1) + 1.0 / 6.0).abs() < 1e-15);
        assert!((k.get(0, 2) + 1.0 / 6.0).abs() < 1e-15);
        assert!((k.get(0, 3) + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn constants_in_kernel() {
        let m = Mesh::new(4).unwrap();
        let k = assemble_stiffness(&m, &vec![1.0; m.quadrature().len()]).unwrap();
        let y = k.spmv(&vec![1.0; m.num_nodes()]).unwrap();
        assert!(y.iter().all(|v| v.abs() < 1e-14));
        assert_eq!(k.asymmetry(), 0.0);
    }

    #[test]
    fn load_vector() {
        let m = Mesh::new(1).unwrap();
        let f = assemble_load(&m, 1.0);
        for v in &f {
            assert!((v - 0.25).abs() < 1e-15);
        }
        let m = Mesh::new(6).unwrap();
        let s: f64 = assemble_load(&m, 1.0).iter().sum();
        assert!((s - 1.0).abs() < 1e-14);
        assert!(assemble_load(&m, 0.0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wrong_coefficient_length() {
        let m = Mesh::new(2).unwrap();
        assert!(assemble_stiffness(&m, &[1.0; 3]).is_err());
    }
}
