//! Structured triangulation of the unit square and P1 assembly of the
//! thermal-block operator blocks.
//!
//! Nodes are numbered lexicographically by (row, column), row 0 being the
//! base `y = 0`. The top edge carries homogeneous Dirichlet data and is
//! eliminated; every other node is a degree of freedom, in node order.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;

use crate::{CsrMatrix, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Base,
    Top,
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    /// Cells per side.
    pub n: usize,
    /// Blocks per side; the square is split into `blocks²` subdomains.
    pub blocks: usize,
    pub nodes: Vec<[f64; 2]>,
    /// Counterclockwise node triples.
    pub triangles: Vec<[usize; 3]>,
    /// Block index of every triangle, row-major from the bottom-left block.
    pub triangle_block: Vec<usize>,
    pub boundary: Vec<BoundaryEdge>,
}

impl Mesh {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks * self.blocks
    }

    pub fn node_index(&self, col: usize, row: usize) -> usize {
        row * (self.n + 1) + col
    }

    /// Integer lattice position `(col, row)` of a node.
    pub fn lattice(&self, node: usize) -> (usize, usize) {
        (node % (self.n + 1), node / (self.n + 1))
    }

    pub fn is_on(&self, node: usize, tag: BoundaryTag) -> bool {
        let (c, r) = self.lattice(node);
        match tag {
            BoundaryTag::Base => r == 0,
            BoundaryTag::Top => r == self.n,
            BoundaryTag::Left => c == 0,
            BoundaryTag::Right => c == self.n,
        }
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|k| self.nodes[k]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }
}

/// Splits each of the `n × n` cells along its bottom-left to top-right
/// diagonal.
pub fn build_mesh(n: usize, blocks: usize) -> Result<Mesh> {
    if n == 0 || blocks == 0 {
        return Err(Error::Config(alloc::format!(
            "mesh needs n >= 1 and B >= 1 (got n = {n}, B = {blocks})"
        )));
    }
    if !n.is_multiple_of(blocks) {
        return Err(Error::BlocksDoNotDivide { blocks, cells: n });
    }
    let h = 1.0 / n as f64;
    let stride = n + 1;
    let nodes = (0..stride)
        .flat_map(|r| (0..stride).map(move |c| [c as f64 * h, r as f64 * h]))
        .collect();

    let cells_per_block = n / blocks;
    let mut triangles = Vec::with_capacity(2 * n * n);
    let mut triangle_block = Vec::with_capacity(2 * n * n);
    for r in 0..n {
        for c in 0..n {
            let sw = r * stride + c;
            let se = sw + 1;
            let ne = se + stride;
            let nw = sw + stride;
            let block = (r / cells_per_block) * blocks + c / cells_per_block;
            triangles.push([sw, se, ne]);
            triangles.push([sw, ne, nw]);
            triangle_block.extend([block, block]);
        }
    }

    let mut boundary = Vec::with_capacity(4 * n);
    for k in 0..n {
        boundary.push(BoundaryEdge {
            nodes: [k, k + 1],
            tag: BoundaryTag::Base,
        });
        boundary.push(BoundaryEdge {
            nodes: [n * stride + k, n * stride + k + 1],
            tag: BoundaryTag::Top,
        });
        boundary.push(BoundaryEdge {
            nodes: [k * stride, (k + 1) * stride],
            tag: BoundaryTag::Left,
        });
        boundary.push(BoundaryEdge {
            nodes: [k * stride + n, (k + 1) * stride + n],
            tag: BoundaryTag::Right,
        });
    }

    Ok(Mesh {
        n,
        blocks,
        nodes,
        triangles,
        triangle_block,
        boundary,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofMap {
    /// Free (non-Dirichlet) node indices in increasing order.
    pub free: Vec<usize>,
    node_to_dof: Vec<Option<usize>>,
}

impl DofMap {
    /// Eliminates the top edge.
    pub fn dirichlet_top(mesh: &Mesh) -> Self {
        let mut node_to_dof = vec![None; mesh.num_nodes()];
        let mut free = Vec::new();
        for node in 0..mesh.num_nodes() {
            if !mesh.is_on(node, BoundaryTag::Top) {
                node_to_dof[node] = Some(free.len());
                free.push(node);
            }
        }
        Self { free, node_to_dof }
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn dof(&self, node: usize) -> Option<usize> {
        self.node_to_dof[node]
    }
}

/// P1 element stiffness `∫ ∇φ_a · ∇φ_b` on a triangle.
pub fn p1_local_stiffness(vertices: [[f64; 2]; 3]) -> [[f64; 3]; 3] {
    let [p0, p1, p2] = vertices;
    let twice_area = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    // scaled gradients: ∇φ_a = (dy_a, -dx_a) / (2|T|)
    let dy = [p1[1] - p2[1], p2[1] - p0[1], p0[1] - p1[1]];
    let dx = [p2[0] - p1[0], p0[0] - p2[0], p1[0] - p0[0]];
    let mut k = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            k[a][b] = (dy[a] * dy[b] + dx[a] * dx[b]) / (2.0 * twice_area);
        }
    }
    k
}

fn lattice_stiffness(mesh: &Mesh, t: usize) -> [[f64; 3]; 3] {
    // The 2D P1 stiffness is invariant under uniform scaling, so computing
    // it on integer lattice coordinates gives exact dyadic entries.
    let verts = mesh.triangles[t].map(|k| {
        let (c, r) = mesh.lattice(k);
        [c as f64, r as f64]
    });
    p1_local_stiffness(verts)
}

/// Stiffness `Σ_b κ_b ∫_{Ω_b} ∇w·∇v` on the free dofs, with one coefficient
/// per block. Triangles in blocks with `κ_b = 0` are skipped.
pub fn assemble_stiffness(mesh: &Mesh, dofmap: &DofMap, block_coefficients: &[f64]) -> Result<CsrMatrix> {
    if block_coefficients.len() != mesh.num_blocks() {
        return Err(Error::Dimension(alloc::format!(
            "{} block coefficients for {} blocks",
            block_coefficients.len(),
            mesh.num_blocks()
        )));
    }
    let mut triplets = Vec::with_capacity(9 * mesh.triangles.len());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let kappa = block_coefficients[mesh.triangle_block[t]];
        if kappa == 0.0 {
            continue;
        }
        let k = lattice_stiffness(mesh, t);
        for a in 0..3 {
            let Some(i) = dofmap.dof(tri[a]) else { continue };
            for b in 0..3 {
                let Some(j) = dofmap.dof(tri[b]) else { continue };
                triplets.push((i, j, kappa * k[a][b]));
            }
        }
    }
    CsrMatrix::from_triplets(dofmap.n_free(), dofmap.n_free(), &triplets)
}

/// `∫_{Γ_base} v ds` on the free dofs (trapezoid rule, exact for P1 traces).
pub fn assemble_base_load(mesh: &Mesh, dofmap: &DofMap) -> DVector<f64> {
    let mut f = DVector::zeros(dofmap.n_free());
    for edge in mesh.boundary.iter().filter(|e| e.tag == BoundaryTag::Base) {
        let [a, b] = edge.nodes.map(|k| mesh.nodes[k]);
        let len = libm::hypot(b[0] - a[0], b[1] - a[1]);
        for node in edge.nodes {
            if let Some(i) = dofmap.dof(node) {
                f[i] += 0.5 * len;
            }
        }
    }
    f
}

/// The affine blocks of the thermal block: one stiffness matrix per
/// subdomain and the single base-flux load vector.
pub fn assemble_thermal_block_operators(mesh: &Mesh, dofmap: &DofMap) -> Result<(Vec<CsrMatrix>, Vec<DVector<f64>>)> {
    let nb = mesh.num_blocks();
    let blocks = (0..nb)
        .map(|q| {
            let mut indicator = vec![0.0; nb];
            indicator[q] = 1.0;
            assemble_stiffness(mesh, dofmap, &indicator)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((blocks, vec![assemble_base_load(mesh, dofmap)]))
}

/// `X = Σ_q θ̄_q A_q`.
pub fn assemble_inner_product(blocks: &[CsrMatrix], reference_theta: &[f64]) -> Result<CsrMatrix> {
    if blocks.len() != reference_theta.len() {
        return Err(Error::Dimension(alloc::format!(
            "{} reference coefficients for {} operators",
            reference_theta.len(),
            blocks.len()
        )));
    }
    if let Some((index, &value)) = reference_theta.iter().enumerate().find(|(_, t)| !(**t > 0.0)) {
        return Err(Error::InvalidReference { index, value });
    }
    let terms: Vec<_> = reference_theta.iter().copied().zip(blocks.iter()).collect();
    CsrMatrix::linear_combination(&terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_mesh() {
        let m = build_mesh(1, 1).unwrap();
        assert_eq!(m.num_nodes(), 4);
        assert_eq!(m.triangles.len(), 2);
    }

    #[test]
    fn two_by_two_blocks() {
        let m = build_mesh(2, 2).unwrap();
        assert_eq!(m.num_nodes(), 9);
        assert_eq!(m.triangles.len(), 8);
        for b in 0..4 {
            assert_eq!(m.triangle_block.iter().filter(|&&x| x == b).count(), 2);
        }
        // bottom-left block is 0, row-major
        assert_eq!(m.triangle_block[0], 0);
        assert_eq!(m.triangle_block[2], 1);
        assert_eq!(m.triangle_block[4], 2);
    }

    #[test]
    fn blocks_must_divide_cells() {
        let err = build_mesh(3, 2).unwrap_err();
        assert_eq!(err, Error::BlocksDoNotDivide { blocks: 2, cells: 3 });
        let msg = alloc::format!("{err}");
        assert!(msg.contains("B must divide n") && msg.contains('2') && msg.contains('3'));
    }

    #[test]
    fn mesh_invariants() {
        for (n, b) in [(1, 1), (4, 2), (6, 3), (8, 4)] {
            let m = build_mesh(n, b).unwrap();
            assert_eq!(m.num_nodes(), (n + 1) * (n + 1));
            assert_eq!(m.triangles.len(), 2 * n * n);
            let h = 1.0 / n as f64;
            let side = 1.0 / b as f64;
            for t in 0..m.triangles.len() {
                assert!(m.signed_area(t) > 0.0);
                let blk = m.triangle_block[t];
                let (bx, by) = ((blk % b) as f64 * side, (blk / b) as f64 * side);
                for k in m.triangles[t] {
                    let [x, y] = m.nodes[k];
                    assert!(x >= bx - 1e-12 && x <= bx + side + 1e-12);
                    assert!(y >= by - 1e-12 && y <= by + side + 1e-12);
                }
            }
            let areas: f64 = (0..m.triangles.len()).map(|t| m.signed_area(t)).sum();
            assert!((areas - 1.0).abs() < 1e-12 && h > 0.0);
            let dm = DofMap::dirichlet_top(&m);
            assert_eq!(dm.n_free(), (n + 1) * (n + 1) - (n + 1));
            assert!(dm.free.iter().all(|&k| !m.is_on(k, BoundaryTag::Top)));
        }
    }

    #[test]
    fn right_triangle_stiffness() {
        let expect = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for h in [1.0, 0.25, 0.1] {
            let k = p1_local_stiffness([[0.0, 0.0], [h, 0.0], [0.0, h]]);
            for a in 0..3 {
                for b in 0..3 {
                    assert!((k[a][b] - expect[a][b]).abs() < 1e-14, "h = {h}");
                }
            }
        }
    }

    #[test]
    fn base_load_on_single_cell() {
        let m = build_mesh(1, 1).unwrap();
        let dm = DofMap::dirichlet_top(&m);
        let (_, f) = assemble_thermal_block_operators(&m, &dm).unwrap();
        assert_eq!(f[0].as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn constants_in_kernel_before_elimination() {
        let m = build_mesh(4, 2).unwrap();
        let all = DofMap {
            free: (0..m.num_nodes()).collect(),
            node_to_dof: (0..m.num_nodes()).map(Some).collect(),
        };
        let a = assemble_stiffness(&m, &all, &[1.0; 4]).unwrap();
        for i in 0..a.nrows() {
            assert_eq!(a.row(i).map(|(_, v)| v).sum::<f64>(), 0.0);
        }
    }

    #[test]
    fn blocks_are_exactly_symmetric_and_partition_the_laplacian() {
        let m = build_mesh(8, 2).unwrap();
        let dm = DofMap::dirichlet_top(&m);
        let (blocks, _) = assemble_thermal_block_operators(&m, &dm).unwrap();
        for a in &blocks {
            assert_eq!(a.asymmetry(), 0.0);
        }
        let total = assemble_inner_product(&blocks, &[1.0; 4]).unwrap();
        let one_block = assemble_stiffness(&build_mesh(8, 1).unwrap(), &dm, &[1.0]).unwrap();
        assert_eq!(total.to_dense(), one_block.to_dense());
        let doubled = assemble_inner_product(&blocks, &[2.0; 4]).unwrap();
        assert_eq!(doubled.to_dense(), total.to_dense() * 2.0);
    }

    #[test]
    fn inner_product_rejects_nonpositive_reference() {
        let m = build_mesh(2, 1).unwrap();
        let dm = DofMap::dirichlet_top(&m);
        let (blocks, _) = assemble_thermal_block_operators(&m, &dm).unwrap();
        assert_eq!(
            assemble_inner_product(&blocks, &[0.0]).unwrap_err(),
            Error::InvalidReference { index: 0, value: 0.0 }
        );
    }

    #[test]
    fn inner_product_is_positive_definite() {
        let m = build_mesh(8, 1).unwrap();
        let dm = DofMap::dirichlet_top(&m);
        let (blocks, _) = assemble_thermal_block_operators(&m, &dm).unwrap();
        let x = assemble_inner_product(&blocks, &[1.0]).unwrap().to_dense();
        let eig = x.symmetric_eigenvalues();
        assert!(eig.min() > 0.0);
    }
}
