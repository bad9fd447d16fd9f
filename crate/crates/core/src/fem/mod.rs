//! P1 finite elements on the reference square for one parameter point.
//!
//! Stiffness entries are `int grad(phi_i)^T G(x, y) grad(phi_j) dx` with the
//! three-point edge-midpoint rule. Dirichlet data enters through a nodal lift
//! `w` supported on boundary vertices, so the interior system reads
//! `K u = b - K_ib w`.

mod mesh;

use std::io::Write;

pub use mesh::{build_mesh, side, Mesh};

use crate::domain_map::{Point, SamplePoint, TabulatedCoefficient};
use crate::error::{Error, Result};
use crate::linalg::{pcg_with_hierarchy, CsrMatrix, GridHierarchy, Prolongation, SolveStats, SolverOptions};

const NO_SLOT: usize = usize::MAX;

/// Degree-5 seven-point rule on the reference triangle: barycentric
/// coordinates and weights (weights sum to one).
pub const DUNAVANT7: [([f64; 3], f64); 7] = {
    const A1: f64 = 0.059_715_871_789_769_8;
    const B1: f64 = 0.470_142_064_105_115_1;
    const W1: f64 = 0.132_394_152_788_506_2;
    const A2: f64 = 0.797_426_985_353_087_3;
    const B2: f64 = 0.101_286_507_323_456_3;
    const W2: f64 = 0.125_939_180_544_827_1;
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
        ([A1, B1, B1], W1),
        ([B1, A1, B1], W1),
        ([B1, B1, A1], W1),
        ([A2, B2, B2], W2),
        ([B2, A2, B2], W2),
        ([B2, B2, A2], W2),
    ]
};

/// Mesh plus the degree-of-freedom numbering and sparsity pattern shared by
/// every parameter-point solve.
#[derive(Debug, Clone)]
pub struct FemSpace {
    mesh: Mesh,
    dof: Vec<usize>,
    interior: Vec<usize>,
    pattern: CsrMatrix,
    elem_slots: Vec<[usize; 9]>,
    grads: Vec<[Point; 3]>,
    areas: Vec<f64>,
    hierarchy: Option<GridHierarchy>,
}

impl FemSpace {
    pub fn new(mesh: Mesh) -> Self {
        let nv = mesh.vertices().len();
        let mut dof = vec![NO_SLOT; nv];
        let mut interior = Vec::new();
        for v in 0..nv {
            if !mesh.is_boundary(v) {
                dof[v] = interior.len();
                interior.push(v);
            }
        }
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); interior.len()];
        for tri in mesh.triangles() {
            for &a in tri {
                for &b in tri {
                    if dof[a] != NO_SLOT && dof[b] != NO_SLOT {
                        rows[dof[a]].push(dof[b]);
                    }
                }
            }
        }
        let pattern = CsrMatrix::from_pattern(&rows);
        let mut elem_slots = Vec::with_capacity(mesh.triangles().len());
        let mut grads = Vec::with_capacity(mesh.triangles().len());
        let mut areas = Vec::with_capacity(mesh.triangles().len());
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let mut slots = [NO_SLOT; 9];
            for (la, &a) in tri.iter().enumerate() {
                for (lb, &b) in tri.iter().enumerate() {
                    if dof[a] != NO_SLOT && dof[b] != NO_SLOT {
                        slots[3 * la + lb] = pattern.slot(dof[a], dof[b]).expect("pattern slot");
                    }
                }
            }
            elem_slots.push(slots);
            let area = mesh.area(t);
            let v = mesh.vertices();
            let [a, b, c] = *tri;
            // grad(lambda_a) = perp(v_c - v_b) / (2 area), rotated clockwise
            let g = |p: Point, q: Point| Point::new(p[1] - q[1], q[0] - p[0]) / (2.0 * area);
            grads.push([g(v[b], v[c]), g(v[c], v[a]), g(v[a], v[b])]);
            areas.push(area);
        }
        let prolongations = nested_prolongations(mesh.n_per_side());
        let hierarchy =
            (!prolongations.is_empty()).then(|| GridHierarchy::new(&pattern, prolongations));
        Self {
            mesh,
            dof,
            interior,
            pattern,
            elem_slots,
            grads,
            areas,
            hierarchy,
        }
    }

    /// Coarse-grid hierarchy used by the multigrid preconditioner, if the
    /// mesh can be coarsened.
    pub fn hierarchy(&self) -> Option<&GridHierarchy> {
        self.hierarchy.as_ref()
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.mesh.vertices().len()
    }

    /// Interior degree of freedom of vertex `v`, if it has one.
    pub fn dof(&self, v: usize) -> Option<usize> {
        (self.dof[v] != NO_SLOT).then_some(self.dof[v])
    }

    pub fn interior_vertices(&self) -> &[usize] {
        &self.interior
    }

    pub fn area(&self, t: usize) -> f64 {
        self.areas[t]
    }

    /// Constant gradients of the three local hat functions of triangle `t`.
    pub fn gradients(&self, t: usize) -> &[Point; 3] {
        &self.grads[t]
    }

    /// Coefficient quadrature points: three edge midpoints per element
    /// (`3 t + k`), probed from the element centroid.
    pub fn quadrature_points(&self) -> Vec<SamplePoint> {
        let mut out = Vec::with_capacity(3 * self.areas.len());
        for t in 0..self.areas.len() {
            let probe = self.mesh.centroid(t);
            for x in self.mesh.edge_midpoints(t) {
                out.push(SamplePoint { x, probe });
            }
        }
        out
    }

    /// Nodal interpolation of Dirichlet data on boundary vertices; zero inside.
    pub fn nodal_lift(&self, g: impl Fn(&Point, u8) -> f64) -> Vec<f64> {
        self.mesh
            .vertices()
            .iter()
            .zip(self.mesh.boundary_flags())
            .map(|(p, &f)| if f != 0 { g(p, f) } else { 0.0 })
            .collect()
    }

    /// Assembles the remapped system at parameter `y`.
    ///
    /// `coeff` must be tabulated at [`FemSpace::quadrature_points`].
    pub fn assemble(
        &self,
        coeff: &TabulatedCoefficient,
        y: &[f64],
        source: Option<&(dyn Fn(&Point) -> f64 + Sync)>,
        lift: &[f64],
    ) -> Result<FemSystem<'_>> {
        assert_eq!(coeff.len(), 3 * self.areas.len(), "coefficient tabulated at wrong points");
        assert_eq!(lift.len(), self.n_vertices());
        let mut matrix = self.pattern.clone();
        let mut rhs = vec![0.0; self.n_interior()];
        let tris = self.mesh.triangles();
        for (t, tri) in tris.iter().enumerate() {
            let mut gsum = crate::domain_map::Mat2::zeros();
            let mut src = [0.0; 3];
            for k in 0..3 {
                let s = coeff.coefficient(3 * t + k, y)?;
                if !(s.g[(0, 0)] > 0.0 && s.g.determinant() > 0.0) {
                    let x = coeff.point(3 * t + k);
                    return Err(Error::DegenerateMap {
                        x0: x[0],
                        x1: x[1],
                        y: y.to_vec(),
                        reason: "coefficient matrix not positive definite".into(),
                    });
                }
                gsum += s.g;
                if let Some(f) = source {
                    src[k] = f(&s.mapped) * s.det;
                }
            }
            let gbar = gsum / 3.0;
            let area = self.areas[t];
            let grads = &self.grads[t];
            let slots = &self.elem_slots[t];
            let mut ke = [[0.0; 3]; 3];
            for a in 0..3 {
                let ga = gbar * grads[a];
                for b in 0..3 {
                    ke[a][b] = area * ga.dot(&grads[b]);
                }
            }
            let values = matrix.values_mut();
            for a in 0..3 {
                for b in 0..3 {
                    let s = slots[3 * a + b];
                    if s != NO_SLOT {
                        values[s] += ke[a][b];
                    }
                }
            }
            for a in 0..3 {
                let Some(da) = self.dof(tri[a]) else { continue };
                for b in 0..3 {
                    if self.dof[tri[b]] == NO_SLOT && lift[tri[b]] != 0.0 {
                        rhs[da] -= ke[a][b] * lift[tri[b]];
                    }
                }
                if source.is_some() {
                    // midpoint k lies on edge (k, k+1); the hat of vertex a is 1/2
                    // on its two adjacent edges
                    let prev = (a + 2) % 3;
                    rhs[da] += area / 3.0 * 0.5 * (src[a] + src[prev]);
                }
            }
        }
        Ok(FemSystem {
            space: self,
            matrix,
            rhs,
            lift: lift.to_vec(),
        })
    }

    /// Full nodal field from interior values plus the lift.
    pub fn expand(&self, interior: &[f64], lift: &[f64]) -> Vec<f64> {
        let mut out = lift.to_vec();
        for (d, &v) in self.interior.iter().enumerate() {
            out[v] = interior[d] + lift[v];
        }
        out
    }

    /// Integrates `f(x, u_h(x), grad u_h)` element by element with the
    /// seven-point rule.
    pub fn integrate_field(
        &self,
        field: &[f64],
        f: impl Fn(&Point, f64, &Point) -> f64,
    ) -> f64 {
        let v = self.mesh.vertices();
        let mut total = 0.0;
        for (t, tri) in self.mesh.triangles().iter().enumerate() {
            let grad = self.grads[t]
                .iter()
                .zip(tri)
                .fold(Point::zeros(), |acc, (g, &i)| acc + g * field[i]);
            let mut acc = 0.0;
            for (bary, w) in DUNAVANT7 {
                let x = v[tri[0]] * bary[0] + v[tri[1]] * bary[1] + v[tri[2]] * bary[2];
                let u = field[tri[0]] * bary[0] + field[tri[1]] * bary[1] + field[tri[2]] * bary[2];
                acc += w * f(&x, u, &grad);
            }
            total += acc * self.areas[t];
        }
        total
    }

    /// `|u - u_h|_{L^2}`.
    pub fn l2_error(&self, field: &[f64], exact: impl Fn(&Point) -> f64) -> f64 {
        self.integrate_field(field, |x, u, _| (u - exact(x)).powi(2))
            .sqrt()
    }

    /// `|grad (u - u_h)|_{L^2}`.
    pub fn h1_seminorm_error(&self, field: &[f64], exact_grad: impl Fn(&Point) -> Point) -> f64 {
        self.integrate_field(field, |x, _, g| (g - exact_grad(x)).norm_squared())
            .sqrt()
    }

    /// Writes `x1 x2 value` per vertex.
    pub fn write_nodal_field(&self, out: &mut impl Write, field: &[f64]) -> Result<()> {
        writeln!(out, "x1 x2 value")?;
        for (p, v) in self.mesh.vertices().iter().zip(field) {
            writeln!(out, "{:.16e} {:.16e} {:.16e}", p[0], p[1], v)?;
        }
        Ok(())
    }
}

/// Assembled interior system at one parameter point.
#[derive(Debug, Clone)]
pub struct FemSystem<'a> {
    space: &'a FemSpace,
    pub matrix: CsrMatrix,
    /// Load minus lift coupling, over interior dofs.
    pub rhs: Vec<f64>,
    /// Nodal lift over all vertices.
    pub lift: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Solution {
    /// Interior unknowns (the homogeneous part).
    pub interior: Vec<f64>,
    /// Full nodal field over all vertices.
    pub field: Vec<f64>,
    pub stats: SolveStats,
}

impl<'a> FemSystem<'a> {
    pub fn space(&self) -> &'a FemSpace {
        self.space
    }

    /// Solves `K u = b` and returns `u + w`.
    pub fn solve_primal(&self, opts: &SolverOptions) -> Result<Solution> {
        let mut x = vec![0.0; self.space.n_interior()];
        let stats = pcg_with_hierarchy(&self.matrix, &self.rhs, &mut x, opts, self.space.hierarchy())?;
        let field = self.space.expand(&x, &self.lift);
        Ok(Solution {
            interior: x,
            field,
            stats,
        })
    }

    /// Solves `K phi = q` (K is symmetric); `phi` vanishes on the boundary.
    pub fn solve_adjoint(&self, qoi: &QoiFunctional, opts: &SolverOptions) -> Result<Solution> {
        let rhs = qoi.interior_load(self.space);
        let mut x = vec![0.0; self.space.n_interior()];
        let stats = pcg_with_hierarchy(&self.matrix, &rhs, &mut x, opts, self.space.hierarchy())?;
        let zero = vec![0.0; self.space.n_vertices()];
        let field = self.space.expand(&x, &zero);
        Ok(Solution {
            interior: x,
            field,
            stats,
        })
    }

    /// `B(y; u, v)` for interior vectors.
    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        let ku = self.matrix.mul_vec(u);
        ku.iter().zip(v).map(|(a, b)| a * b).sum()
    }

    /// `Q(u) = B(y; u0, phi) + Q(w)` evaluated through the adjoint.
    pub fn qoi_by_duality(&self, qoi: &QoiFunctional, adjoint: &Solution) -> f64 {
        let main: f64 = adjoint
            .interior
            .iter()
            .zip(&self.rhs)
            .map(|(a, b)| a * b)
            .sum();
        main + qoi.evaluate(&self.lift)
    }
}

/// Linear functional `Q(u) = int_D q(x) u(x) dx`, stored as `Q(u) = sum_i w_i u_i`.
#[derive(Debug, Clone)]
pub struct QoiFunctional {
    weights: Vec<f64>,
}

impl QoiFunctional {
    /// Tabulates `w_i = int q phi_i` with the seven-point rule.
    pub fn new(space: &FemSpace, q: impl Fn(&Point) -> f64) -> Self {
        let mesh = space.mesh();
        let v = mesh.vertices();
        let mut weights = vec![0.0; v.len()];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let area = space.area(t);
            for (bary, w) in DUNAVANT7 {
                let x = v[tri[0]] * bary[0] + v[tri[1]] * bary[1] + v[tri[2]] * bary[2];
                let qx = q(&x);
                if qx == 0.0 {
                    continue;
                }
                for k in 0..3 {
                    weights[tri[k]] += area * w * qx * bary[k];
                }
            }
        }
        Self { weights }
    }

    /// The square experiment's functional `q(x) = g(x1) g(2 x2)`.
    pub fn lower_bump(space: &FemSpace) -> Self {
        Self::new(space, |x| bump(x[0]) * bump(2.0 * x[1]))
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn evaluate(&self, field: &[f64]) -> f64 {
        self.weights.iter().zip(field).map(|(w, u)| w * u).sum()
    }

    pub fn interior_load(&self, space: &FemSpace) -> Vec<f64> {
        space
            .interior_vertices()
            .iter()
            .map(|&v| self.weights[v])
            .collect()
    }

    /// Vertices carrying non-zero weight.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(i, _)| i)
    }
}

/// Interpolation operators between nested structured meshes, from `n` vertices
/// per side down to at most 9. Meshes with an even number of cells per side
/// are halved; the diagonal midpoints interpolate along the cut direction.
fn nested_prolongations(n: usize) -> Vec<Prolongation> {
    let mut out = Vec::new();
    let mut nf = n;
    while nf > 9 && (nf - 1).is_multiple_of(2) {
        let nc = nf.div_ceil(2);
        let mi = nc - 2;
        let coarse = |i: usize, j: usize| -> Option<usize> {
            (i > 0 && j > 0 && i < nc - 1 && j < nc - 1).then(|| (j - 1) * mi + (i - 1))
        };
        let mut rows = Vec::with_capacity((nf - 2) * (nf - 2));
        for j in 1..nf - 1 {
            for i in 1..nf - 1 {
                let parents: Vec<(usize, usize)> = match (i % 2, j % 2) {
                    (0, 0) => vec![(i / 2, j / 2)],
                    (1, 0) => vec![(i / 2, j / 2), (i / 2 + 1, j / 2)],
                    (0, 1) => vec![(i / 2, j / 2), (i / 2, j / 2 + 1)],
                    _ => vec![(i / 2, j / 2), (i / 2 + 1, j / 2 + 1)],
                };
                let w = 1.0 / parents.len() as f64;
                rows.push(
                    parents
                        .into_iter()
                        .filter_map(|(a, b)| coarse(a, b).map(|c| (c, w)))
                        .collect(),
                );
            }
        }
        out.push(Prolongation::new(mi * mi, rows));
        nf = nc;
    }
    out
}

/// `g(t) = exp(-1 / (1 - 4 (t - 1/2)^2))` on `(0, 1)`, zero elsewhere.
pub fn bump(t: f64) -> f64 {
    let s = 4.0 * (t - 0.5) * (t - 0.5);
    if s >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s)).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain_map::{CoefficientField, DeformationModel};
    use std::sync::Arc;

    fn identity_space(n: usize) -> (FemSpace, TabulatedCoefficient) {
        let space = FemSpace::new(build_mesh(n).unwrap());
        let cf = CoefficientField::unit_diffusion(Arc::new(DeformationModel::identity(1)));
        let tab = cf.tabulate(&space.quadrature_points());
        (space, tab)
    }

    #[test]
    fn identity_map_gives_five_point_laplacian() {
        let (space, tab) = identity_space(7);
        let lift = vec![0.0; space.n_vertices()];
        let sys = space.assemble(&tab, &[0.0], None, &lift).unwrap();
        let n = 7;
        let center = space.dof(3 * n + 3).unwrap();
        for (j, v) in sys.matrix.row(center) {
            let expected = if j == center {
                4.0
            } else if [3 * n + 2, 3 * n + 4, 2 * n + 3, 4 * n + 3]
                .iter()
                .any(|&w| space.dof(w) == Some(j))
            {
                -1.0
            } else {
                0.0
            };
            assert!((v - expected).abs() < 1e-13, "entry {j}: {v}");
        }
        assert!(sys.matrix.asymmetry() < 1e-13);
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let (space, tab) = identity_space(9);
        let lift = vec![0.0; space.n_vertices()];
        let sys = space.assemble(&tab, &[0.0], None, &lift).unwrap();
        let sol = sys.solve_primal(&SolverOptions::default()).unwrap();
        assert!(sol.field.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn constant_dirichlet_data_is_reproduced() {
        // Constants lie in the kernel of the operator for every y.
        let space = FemSpace::new(build_mesh(9).unwrap());
        let model = Arc::new(crate::domain_map::build_square_testcase(0.1533, 0.5, 1.0, 5).unwrap());
        let tab = CoefficientField::unit_diffusion(model).tabulate(&space.quadrature_points());
        let lift = space.nodal_lift(|_, _| 1.0);
        let sys = space
            .assemble(&tab, &[0.7, -0.3, 0.2, 1.0, -1.0], None, &lift)
            .unwrap();
        let sol = sys.solve_primal(&SolverOptions::default()).unwrap();
        for v in &sol.field {
            assert!((v - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_qoi_gives_zero_adjoint() {
        let (space, tab) = identity_space(9);
        let lift = vec![0.0; space.n_vertices()];
        let sys = space.assemble(&tab, &[0.0], None, &lift).unwrap();
        let q = QoiFunctional::new(&space, |_| 0.0);
        let phi = sys.solve_adjoint(&q, &SolverOptions::default()).unwrap();
        assert!(phi.field.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn qoi_of_constant_field() {
        let space = FemSpace::new(build_mesh(65).unwrap());
        let q = QoiFunctional::lower_bump(&space);
        let ones = vec![1.0; space.n_vertices()];
        // Gauss-Legendre tensor oracle of the separable integral
        let oracle = {
            let (x, w) = gauss_legendre(200);
            let g1: f64 = x.iter().zip(&w).map(|(t, wt)| 0.5 * wt * bump(0.5 * (t + 1.0))).sum();
            // int_0^{1/2} g(2 x2) dx2 = (1/2) int_0^1 g
            g1 * 0.5 * g1
        };
        let val = q.evaluate(&ones);
        assert!((val - oracle).abs() < 1e-6 * oracle, "{val} vs {oracle}");
        assert_eq!(q.evaluate(&vec![0.0; space.n_vertices()]), 0.0);
        for v in q.support() {
            assert!(space.mesh().vertices()[v][1] <= 0.5 + 1e-12);
        }
    }

    #[test]
    fn bump_is_zero_outside_open_interval() {
        assert_eq!(bump(0.0), 0.0);
        assert_eq!(bump(1.0), 0.0);
        assert_eq!(bump(1.3), 0.0);
        assert!((bump(0.5) - (-1.0f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn multigrid_and_incomplete_cholesky_agree() {
        let space = FemSpace::new(build_mesh(65).unwrap());
        assert_eq!(space.hierarchy().unwrap().depth(), 3);
        let model = Arc::new(crate::domain_map::build_square_testcase(0.1533, 0.5, 1.0, 4).unwrap());
        let tab = CoefficientField::unit_diffusion(model).tabulate(&space.quadrature_points());
        let lift = space.nodal_lift(|p, f| if f & side::TOP != 0 { bump(p[0]) } else { 0.0 });
        let sys = space.assemble(&tab, &[1.0, -1.0, 0.5, 1.0], None, &lift).unwrap();
        let mg = sys.solve_primal(&SolverOptions::default()).unwrap();
        let ic = sys
            .solve_primal(&SolverOptions {
                preconditioner: crate::linalg::Preconditioner::IncompleteCholesky,
                ..Default::default()
            })
            .unwrap();
        assert!(mg.stats.iterations < ic.stats.iterations);
        for (a, b) in mg.field.iter().zip(&ic.field) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    /// Golub-Welsch-free Newton iteration for Legendre nodes (test oracle).
    fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut x = Vec::with_capacity(n);
        let mut w = Vec::with_capacity(n);
        for i in 0..n {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, z);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            x.push(z);
            w.push(2.0 / ((1.0 - z * z) * dp * dp));
        }
        (x, w)
    }
}
