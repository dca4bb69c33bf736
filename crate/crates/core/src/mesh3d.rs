//! Periodic structured tetrahedral meshes of the cube `[0, κ]³`.
//!
//! Each of the `n³` grid cells is split into the six Kuhn tetrahedra that
//! share the cell's main diagonal. The pattern is translation invariant, so
//! it stays conforming across cell faces including the periodic wrap. Nodes
//! on opposite faces are identified, leaving `n³` degrees of freedom indexed
//! as `i + n (j + n k)`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

/// Axis orders defining the six Kuhn tetrahedra.
const KUHN_PERMUTATIONS: [[usize; 3]; 6] =
    [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    /// Periodic DOF indices of the four vertices.
    pub nodes: [usize; 4],
    /// Unwrapped vertex coordinates (may reach `κ + κ/n`).
    pub coords: [[f64; 3]; 4],
}

impl Element {
    /// Signed volume `det[x1-x0, x2-x0, x3-x0] / 6`.
    pub fn signed_volume(&self) -> f64 {
        tet_signed_volume(&self.coords)
    }

    pub fn volume(&self) -> f64 {
        self.signed_volume().abs()
    }

    /// Longest edge.
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for a in 0..4 {
            for b in (a + 1)..4 {
                d = d.max(dist(&self.coords[a], &self.coords[b]));
            }
        }
        d
    }

    /// Diameter of the inscribed sphere, `6V / (sum of face areas) · 2`.
    pub fn inscribed_diameter(&self) -> f64 {
        let c = &self.coords;
        let faces = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];
        let area: f64 = faces.iter().map(|f| triangle_area(&c[f[0]], &c[f[1]], &c[f[2]])).sum();
        2.0 * 3.0 * self.volume() / area
    }

    /// Gradients of the four barycentric coordinates (constant on the element).
    pub fn barycentric_gradients(&self) -> [[f64; 3]; 4] {
        let c = &self.coords;
        let e = [sub(&c[1], &c[0]), sub(&c[2], &c[0]), sub(&c[3], &c[0])];
        let det = triple(&e[0], &e[1], &e[2]);
        // Rows of the inverse Jacobian are the gradients of λ1..λ3.
        let g1 = scale(&cross(&e[1], &e[2]), 1.0 / det);
        let g2 = scale(&cross(&e[2], &e[0]), 1.0 / det);
        let g3 = scale(&cross(&e[0], &e[1]), 1.0 / det);
        let g0 = [-(g1[0] + g2[0] + g3[0]), -(g1[1] + g2[1] + g3[1]), -(g1[2] + g2[2] + g3[2])];
        [g0, g1, g2, g3]
    }

    /// Physical point for barycentric coordinates `lambda`.
    pub fn point(&self, lambda: &[f64; 4]) -> [f64; 3] {
        let mut p = [0.0; 3];
        for (l, c) in lambda.iter().zip(&self.coords) {
            for d in 0..3 {
                p[d] += l * c[d];
            }
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    n: usize,
    kappa: f64,
    vertices: Vec<[f64; 3]>,
    elements: Vec<Element>,
    h: f64,
}

/// Build the periodic `n × n × n` Kuhn mesh of `[0, kappa]³`.
pub fn build_mesh(n: usize, kappa: f64) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidArgument("mesh needs n >= 1 subdivisions".into()));
    }
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::InvalidArgument(format!("period kappa must be positive, got {kappa}")));
    }
    let step = kappa / n as f64;
    let node = |i: usize, j: usize, k: usize| (i % n) + n * ((j % n) + n * (k % n));

    let mut vertices = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                vertices.push([i as f64 * step, j as f64 * step, k as f64 * step]);
            }
        }
    }

    let mut elements = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for perm in KUHN_PERMUTATIONS {
                    let mut offset = [0usize; 3];
                    let mut nodes = [0usize; 4];
                    let mut coords = [[0.0; 3]; 4];
                    for v in 0..4 {
                        if v > 0 {
                            offset[perm[v - 1]] = 1;
                        }
                        let (a, b, c) = (i + offset[0], j + offset[1], k + offset[2]);
                        nodes[v] = node(a, b, c);
                        coords[v] = [a as f64 * step, b as f64 * step, c as f64 * step];
                    }
                    if tet_signed_volume(&coords) < 0.0 {
                        nodes.swap(2, 3);
                        coords.swap(2, 3);
                    }
                    elements.push(Element { nodes, coords });
                }
            }
        }
    }
    let h = elements.iter().map(Element::diameter).fold(0.0, f64::max);
    Ok(Mesh { n, kappa, vertices, elements, h })
}

impl Mesh {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn num_dofs(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    /// Max element diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn total_volume(&self) -> f64 {
        self.elements.iter().map(Element::volume).sum()
    }

    /// Max of `h_τ / ρ_τ` over elements.
    pub fn shape_regularity(&self) -> f64 {
        self.elements
            .iter()
            .map(|e| e.diameter() / e.inscribed_diameter())
            .fold(0.0, f64::max)
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate<F: Fn(&[f64; 3]) -> f64>(&self, f: F) -> Vec<f64> {
        self.vertices.iter().map(f).collect()
    }

    /// Debug dump: `ntets ndofs` header, then four node indices per line.
    pub fn write_dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.elements.len(), self.num_dofs())?;
        for e in &self.elements {
            writeln!(out, "{} {} {} {}", e.nodes[0], e.nodes[1], e.nodes[2], e.nodes[3])?;
        }
        Ok(())
    }
}

/// Coarse-to-fine P1 nodal interpolation, `N_fine × N_coarse`.
///
/// Fine node `i` gets the values of the coarse hat functions at its position.
/// Inside a coarse cell with local coordinates `ξ`, the containing Kuhn
/// tetrahedron is the one ordering `ξ` descending, and its barycentric
/// weights are the successive differences of the sorted coordinates.
pub fn interpolation_matrix(coarse: &Mesh, fine: &Mesh) -> Result<SparseMatrix> {
    if coarse.kappa != fine.kappa {
        return Err(Error::InvalidArgument("coarse and fine meshes have different periods".into()));
    }
    if !fine.n.is_multiple_of(coarse.n) {
        return Err(Error::InvalidArgument(format!(
            "fine n = {} is not a multiple of coarse n = {}",
            fine.n, coarse.n
        )));
    }
    let (nc, nf) = (coarse.n, fine.n);
    let ratio = nf / nc;
    let coarse_node = |a: usize, b: usize, c: usize| (a % nc) + nc * ((b % nc) + nc * (c % nc));

    let mut triplets = Vec::with_capacity(4 * nf * nf * nf);
    for k in 0..nf {
        for j in 0..nf {
            for i in 0..nf {
                let row = i + nf * (j + nf * k);
                let cell = [i / ratio, j / ratio, k / ratio];
                let xi = [
                    (i % ratio) as f64 / ratio as f64,
                    (j % ratio) as f64 / ratio as f64,
                    (k % ratio) as f64 / ratio as f64,
                ];
                let mut order = [0usize, 1, 2];
                // Stable sort keeps ties in axis order, consistent with the
                // Kuhn split's shared faces.
                order.sort_by(|&a, &b| xi[b].total_cmp(&xi[a]));
                let weights = [
                    1.0 - xi[order[0]],
                    xi[order[0]] - xi[order[1]],
                    xi[order[1]] - xi[order[2]],
                    xi[order[2]],
                ];
                let mut offset = [0usize; 3];
                for (v, &wgt) in weights.iter().enumerate() {
                    if v > 0 {
                        offset[order[v - 1]] = 1;
                    }
                    if wgt != 0.0 {
                        let col = coarse_node(cell[0] + offset[0], cell[1] + offset[1], cell[2] + offset[2]);
                        triplets.push((row, col, wgt));
                    }
                }
            }
        }
    }
    SparseMatrix::from_triplets(fine.num_dofs(), coarse.num_dofs(), &triplets)
}

pub(crate) fn tet_signed_volume(c: &[[f64; 3]; 4]) -> f64 {
    triple(&sub(&c[1], &c[0]), &sub(&c[2], &c[0]), &sub(&c[3], &c[0])) / 6.0
}

fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn scale(a: &[f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn triple(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]) -> f64 {
    let x = cross(b, c);
    a[0] * x[0] + a[1] * x[1] + a[2] * x[2]
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d = sub(a, b);
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

fn triangle_area(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]) -> f64 {
    let x = cross(&sub(b, a), &sub(c, a));
    0.5 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    const TWO_PI: f64 = 2.0 * PI;

    #[test]
    fn single_cell_collapses_to_one_dof() {
        let m = build_mesh(1, TWO_PI).unwrap();
        assert_eq!(m.num_dofs(), 1);
        assert_eq!(m.elements().len(), 6);
        assert!((m.total_volume() - TWO_PI.powi(3)).abs() < 1e-12 * TWO_PI.powi(3));
    }

    #[test]
    fn counts_for_n2() {
        let m = build_mesh(2, TWO_PI).unwrap();
        assert_eq!(m.num_dofs(), 8);
        assert_eq!(m.elements().len(), 48);
    }

    #[test]
    fn volumes_partition_domain() {
        let m = build_mesh(4, TWO_PI).unwrap();
        let vol = TWO_PI.powi(3);
        assert!((m.total_volume() - vol).abs() <= 1e-12 * vol);
        assert!(m.elements().iter().all(|e| e.signed_volume() > 0.0));
    }

    #[test]
    fn invalid_arguments() {
        assert!(build_mesh(0, 1.0).is_err());
        assert!(build_mesh(3, 0.0).is_err());
        assert!(build_mesh(3, -1.0).is_err());
    }

    #[test]
    fn shape_regularity_uniform_in_n() {
        let r2 = build_mesh(2, 1.0).unwrap().shape_regularity();
        let r5 = build_mesh(5, 1.0).unwrap().shape_regularity();
        assert!((r2 - r5).abs() < 1e-10);
        assert!(r2 < 10.0);
    }

    #[test]
    fn mesh_size_is_cell_diagonal() {
        let m = build_mesh(4, TWO_PI).unwrap();
        assert!((m.h() - 3f64.sqrt() * TWO_PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_construction() {
        assert_eq!(build_mesh(3, 2.5).unwrap(), build_mesh(3, 2.5).unwrap());
    }

    #[test]
    fn volume_matches_brute_force_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let mut coords = [[0.0; 3]; 4];
            for p in coords.iter_mut() {
                for x in p.iter_mut() {
                    *x = rng.random_range(-2.0..2.0);
                }
            }
            let e = Element { nodes: [0; 4], coords };
            // cofactor expansion of the 4x4 homogeneous determinant
            let m: Vec<[f64; 4]> = coords.iter().map(|p| [p[0], p[1], p[2], 1.0]).collect();
            let det3 = |r: [usize; 3], c: [usize; 3]| {
                m[r[0]][c[0]] * (m[r[1]][c[1]] * m[r[2]][c[2]] - m[r[1]][c[2]] * m[r[2]][c[1]])
                    - m[r[0]][c[1]] * (m[r[1]][c[0]] * m[r[2]][c[2]] - m[r[1]][c[2]] * m[r[2]][c[0]])
                    + m[r[0]][c[2]] * (m[r[1]][c[0]] * m[r[2]][c[1]] - m[r[1]][c[1]] * m[r[2]][c[0]])
            };
            let mut det4 = 0.0;
            for col in 0..4 {
                let rest: Vec<usize> = (0..4).filter(|&c| c != col).collect();
                let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
                det4 += sign * m[0][col] * det3([1, 2, 3], [rest[0], rest[1], rest[2]]);
            }
            assert!((e.volume() - det4.abs() / 6.0).abs() < 1e-12 * (1.0 + e.volume()));
        }
    }

    #[test]
    fn gradients_sum_to_zero_and_reproduce_linears() {
        let m = build_mesh(3, 1.7).unwrap();
        for e in m.elements().iter().take(12) {
            let g = e.barycentric_gradients();
            for d in 0..3 {
                let s: f64 = g.iter().map(|gi| gi[d]).sum();
                assert!(s.abs() < 1e-12);
                // ∇ of x_d = Σ x_d(v) ∇λ_v = e_d
                for out in 0..3 {
                    let v: f64 = (0..4).map(|a| e.coords[a][d] * g[a][out]).sum();
                    let expected = if out == d { 1.0 } else { 0.0 };
                    assert!((v - expected).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn interpolation_identity_for_same_mesh() {
        let m = build_mesh(3, TWO_PI).unwrap();
        let p = interpolation_matrix(&m, &m).unwrap();
        assert_eq!(p, SparseMatrix::identity(27));
    }

    #[test]
    fn interpolation_partition_of_unity() {
        let c = build_mesh(2, TWO_PI).unwrap();
        let f = build_mesh(6, TWO_PI).unwrap();
        let p = interpolation_matrix(&c, &f).unwrap();
        let ones = p.matvec(&vec![1.0; c.num_dofs()]);
        assert!(ones.iter().all(|v| (v - 1.0).abs() < 1e-14));
        assert!(p.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn interpolation_rejects_non_nested() {
        let c = build_mesh(3, TWO_PI).unwrap();
        let f = build_mesh(16, TWO_PI).unwrap();
        assert!(interpolation_matrix(&c, &f).is_err());
        let g = build_mesh(6, PI).unwrap();
        assert!(interpolation_matrix(&c, &g).is_err());
    }

    #[test]
    fn interpolation_matches_coarse_values_at_coinciding_nodes() {
        let c = build_mesh(2, TWO_PI).unwrap();
        let f = build_mesh(4, TWO_PI).unwrap();
        let uc = c.interpolate(|x| x[0].sin());
        let uf = interpolation_matrix(&c, &f).unwrap().matvec(&uc);
        for k in (0..4).step_by(2) {
            for j in (0..4).step_by(2) {
                for i in (0..4).step_by(2) {
                    let fine = i + 4 * (j + 4 * k);
                    let coarse = i / 2 + 2 * (j / 2 + 2 * (k / 2));
                    assert_eq!(uf[fine], uc[coarse]);
                }
            }
        }
    }

    #[test]
    fn interpolation_reproduces_coarse_p1_functions() {
        // Evaluate the coarse P1 function directly by locating each fine node
        // in a coarse element and summing barycentric weights.
        let c = build_mesh(2, 3.0).unwrap();
        let f = build_mesh(6, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let uc: Vec<f64> = (0..c.num_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let uf = interpolation_matrix(&c, &f).unwrap().matvec(&uc);
        for (idx, x) in f.vertices().iter().enumerate() {
            let mut found = None;
            for e in c.elements() {
                let lam = barycentric_of(e, x);
                if lam.iter().all(|&l| l >= -1e-12) {
                    found = Some(lam.iter().zip(&e.nodes).map(|(l, &nd)| l * uc[nd]).sum::<f64>());
                    break;
                }
            }
            let direct = found.expect("fine node inside some coarse element");
            assert!((direct - uf[idx]).abs() < 1e-12);
        }
    }

    fn barycentric_of(e: &Element, x: &[f64; 3]) -> [f64; 4] {
        let g = e.barycentric_gradients();
        let mut lam = [0.0; 4];
        for a in 1..4 {
            let d = sub(x, &e.coords[0]);
            lam[a] = g[a][0] * d[0] + g[a][1] * d[1] + g[a][2] * d[2];
        }
        lam[0] = 1.0 - lam[1] - lam[2] - lam[3];
        lam
    }

    #[test]
    fn dump_format() {
        let m = build_mesh(1, 1.0).unwrap();
        let mut buf = Vec::new();
        m.write_dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("6 1"));
        assert_eq!(lines.count(), 6);
    }
}
