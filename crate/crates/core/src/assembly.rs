//! Overdetermined collocation systems `K_𝓛 λ = f|_X`, `K_B λ = g|_Y`.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use faer::{Mat, MatRef};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KansaError, Result};
use crate::geometry::{Location, PointSet};
use crate::kernels::Kernel;
use crate::pde::{BoundaryValueProblem, EllipticOperator};

/// Which kernel translates span the trial space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrialSpace {
    /// `U_Z`: translates centred at the trial grid only.
    #[serde(rename = "Z", alias = "z")]
    Z,
    /// `U_{Z∪Y}`: the boundary collocation points are added as centers.
    #[serde(rename = "ZY", alias = "Z∪Y", alias = "z_union_y")]
    ZUnionY,
}

impl fmt::Display for TrialSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrialSpace::Z => "Z",
            TrialSpace::ZUnionY => "ZY",
        })
    }
}

/// Trial centers for the requested space. For `Z∪Y`, points of `Y` that
/// coincide with a point of `Z` are dropped; the count is returned.
pub fn trial_centers(z: &PointSet, y: &PointSet, trial: TrialSpace) -> Result<(PointSet, usize)> {
    let empty = PointSet::empty(z.domain().clone(), Location::Boundary);
    let (centers, removed) = match trial {
        TrialSpace::Z => z.union(&empty)?,
        TrialSpace::ZUnionY => z.union(y)?,
    };
    // Re-validating rejects sets that still contain coincident centers
    // (duplicates inside Z or inside Y themselves).
    let centers = PointSet::new(centers.domain().clone(), Location::Closure, centers.coords().to_vec())
        .map_err(|e| KansaError::Assembly(format!("trial centers are not distinct: {e}")))?;
    if removed > 0 {
        log::warn!("{removed} boundary collocation points coincide with trial centers and were merged");
    }
    Ok((centers, removed))
}

/// The problem-independent part of a collocation system.
#[derive(Debug)]
pub struct CollocationMatrices {
    pde: Mat<f64>,
    boundary: Mat<f64>,
    pde_points: PointSet,
    boundary_points: PointSet,
    trial_centers: PointSet,
    trial_space: TrialSpace,
    kernel: Kernel,
    operator: EllipticOperator,
    merged_duplicates: usize,
}

impl CollocationMatrices {
    /// `[K_𝓛]_ij = 𝓛Φ(x_i − t_j)`, `[K_B]_ij = Φ(y_i − t_j)`.
    pub fn assemble(
        operator: &EllipticOperator,
        kernel: &Kernel,
        x: &PointSet,
        y: &PointSet,
        z: &PointSet,
        trial: TrialSpace,
    ) -> Result<Self> {
        if x.location() != Location::Interior {
            return Err(KansaError::Assembly("PDE collocation points must be interior".into()));
        }
        if y.location() != Location::Boundary {
            return Err(KansaError::Assembly(
                "boundary collocation points must lie on the boundary".into(),
            ));
        }
        if kernel.dim() != x.dim() || operator.dim() != x.dim() {
            return Err(KansaError::Assembly(format!(
                "dimension mismatch: kernel {}, operator {}, points {}",
                kernel.dim(),
                operator.dim(),
                x.dim()
            )));
        }
        let (centers, merged) = trial_centers(z, y, trial)?;
        let n_t = centers.len();
        if x.len() + y.len() < n_t {
            return Err(KansaError::Assembly(format!(
                "underdetermined system: {} + {} conditions for {n_t} unknowns",
                x.len(),
                y.len()
            )));
        }
        let pde = build_rows(x, &centers, |xi, tj| operator.apply(&kernel.jet(xi, tj), xi));
        let boundary = build_rows(y, &centers, |yi, tj| kernel.value(yi, tj));
        Ok(CollocationMatrices {
            pde,
            boundary,
            pde_points: x.clone(),
            boundary_points: y.clone(),
            trial_centers: centers,
            trial_space: trial,
            kernel: *kernel,
            operator: operator.clone(),
            merged_duplicates: merged,
        })
    }

    pub fn pde_matrix(&self) -> MatRef<'_, f64> {
        self.pde.as_ref()
    }

    pub fn boundary_matrix(&self) -> MatRef<'_, f64> {
        self.boundary.as_ref()
    }

    pub fn pde_points(&self) -> &PointSet {
        &self.pde_points
    }

    pub fn boundary_points(&self) -> &PointSet {
        &self.boundary_points
    }

    pub fn trial_centers(&self) -> &PointSet {
        &self.trial_centers
    }

    pub fn trial_space(&self) -> TrialSpace {
        self.trial_space
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn operator(&self) -> &EllipticOperator {
        &self.operator
    }

    /// Boundary points merged into existing trial centers.
    pub fn merged_duplicates(&self) -> usize {
        self.merged_duplicates
    }
}

fn build_rows(
    rows: &PointSet,
    centers: &PointSet,
    entry: impl Fn(&[f64], &[f64]) -> f64 + Sync,
) -> Mat<f64> {
    let n_cols = centers.len();
    let mut buf = vec![0.0; rows.len() * n_cols];
    if n_cols > 0 {
        buf.par_chunks_mut(n_cols).enumerate().for_each(|(i, row)| {
            let p = rows.point(i);
            for (j, out) in row.iter_mut().enumerate() {
                *out = entry(p, centers.point(j));
            }
        });
    }
    Mat::from_fn(rows.len(), n_cols, |i, j| buf[i * n_cols + j])
}

/// Collocation matrices together with the right-hand sides of one problem.
#[derive(Debug, Clone)]
pub struct CollocationSystem {
    matrices: Arc<CollocationMatrices>,
    pde_rhs: Vec<f64>,
    boundary_rhs: Vec<f64>,
}

impl CollocationSystem {
    /// Evaluates `f|_X` and `g|_Y` of `problem` against shared matrices.
    pub fn new(matrices: Arc<CollocationMatrices>, problem: &BoundaryValueProblem) -> Self {
        let pde_rhs = matrices
            .pde_points
            .iter()
            .map(|x| problem.source(x))
            .collect();
        let boundary_rhs = matrices
            .boundary_points
            .iter()
            .map(|y| problem.boundary_value(y))
            .collect();
        CollocationSystem {
            matrices,
            pde_rhs,
            boundary_rhs,
        }
    }

    /// Builds a system from raw blocks and right-hand sides.
    pub fn from_parts(matrices: Arc<CollocationMatrices>, pde_rhs: Vec<f64>, boundary_rhs: Vec<f64>) -> Result<Self> {
        if pde_rhs.len() != matrices.pde.nrows() || boundary_rhs.len() != matrices.boundary.nrows() {
            return Err(KansaError::Assembly("right-hand side lengths do not match the blocks".into()));
        }
        Ok(CollocationSystem {
            matrices,
            pde_rhs,
            boundary_rhs,
        })
    }

    pub fn matrices(&self) -> &Arc<CollocationMatrices> {
        &self.matrices
    }

    pub fn pde_matrix(&self) -> MatRef<'_, f64> {
        self.matrices.pde_matrix()
    }

    pub fn boundary_matrix(&self) -> MatRef<'_, f64> {
        self.matrices.boundary_matrix()
    }

    pub fn pde_rhs(&self) -> &[f64] {
        &self.pde_rhs
    }

    pub fn boundary_rhs(&self) -> &[f64] {
        &self.boundary_rhs
    }

    pub fn trial_centers(&self) -> &PointSet {
        self.matrices.trial_centers()
    }

    pub fn kernel(&self) -> &Kernel {
        self.matrices.kernel()
    }

    pub fn n_unknowns(&self) -> usize {
        self.matrices.trial_centers.len()
    }

    /// Writes `pde.csv` and `boundary.csv` (see [`write_matrix_csv`]) into `dir`.
    pub fn dump_csv(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let pde = std::fs::File::create(dir.join("pde.csv"))?;
        write_matrix_csv(std::io::BufWriter::new(pde), "pde", self.pde_matrix(), &self.pde_rhs)?;
        let bdy = std::fs::File::create(dir.join("boundary.csv"))?;
        write_matrix_csv(std::io::BufWriter::new(bdy), "boundary", self.boundary_matrix(), &self.boundary_rhs)
    }
}

/// Assembles the collocation system of `problem` over the given point sets.
pub fn assemble(
    problem: &BoundaryValueProblem,
    kernel: &Kernel,
    x: &PointSet,
    y: &PointSet,
    trial: TrialSpace,
    z: &PointSet,
) -> Result<CollocationSystem> {
    let matrices = CollocationMatrices::assemble(problem.operator(), kernel, x, y, z, trial)?;
    Ok(CollocationSystem::new(Arc::new(matrices), problem))
}

/// Dense row-major dump. The first line is a header
/// `# <label> rows=<m> cols=<n> layout=row-major last-column=rhs`; each
/// following line holds one matrix row followed by its right-hand side entry.
pub fn write_matrix_csv<W: Write>(mut w: W, label: &str, m: MatRef<'_, f64>, rhs: &[f64]) -> Result<()> {
    writeln!(
        w,
        "# {label} rows={} cols={} layout=row-major last-column=rhs",
        m.nrows(),
        m.ncols()
    )?;
    for i in 0..m.nrows() {
        let mut line = String::new();
        for j in 0..m.ncols() {
            line.push_str(&format!("{:e},", m[(i, j)]));
        }
        line.push_str(&format!("{:e}", rhs[i]));
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{closed_grid, refined_collocation, Domain};
    use crate::pde::{OperatorKind, SolutionKind};

    fn setup(n: usize, di: usize, db: usize, trial: TrialSpace) -> CollocationSystem {
        let d = Domain::reference_square();
        let z = closed_grid(&d, n).unwrap();
        let (x, y) = refined_collocation(&d, n, di, db).unwrap();
        let problem = BoundaryValueProblem::builtin(SolutionKind::Trig, OperatorKind::Laplace);
        let kernel = Kernel::matern_sobolev(4, 2).unwrap();
        assemble(&problem, &kernel, &x, &y, trial, &z).unwrap()
    }

    #[test]
    fn single_center_laplacian() {
        let d = Domain::reference_square();
        let kernel = Kernel::matern_sobolev(4, 2).unwrap();
        let z = PointSet::new(d.clone(), Location::Closure, vec![0.0, 0.0]).unwrap();
        let x = PointSet::new(d.clone(), Location::Interior, vec![0.0, 0.0]).unwrap();
        let y = PointSet::empty(d, Location::Boundary);
        let m = CollocationMatrices::assemble(
            &EllipticOperator::laplacian(2),
            &kernel,
            &x,
            &y,
            &z,
            TrialSpace::Z,
        )
        .unwrap();
        assert_eq!(m.pde_matrix().nrows(), 1);
        assert_eq!(m.pde_matrix()[(0, 0)], -4.0);
        assert_eq!(m.boundary_matrix().nrows(), 0);
    }

    #[test]
    fn block_shapes() {
        let s = setup(11, 2, 2, TrialSpace::ZUnionY);
        assert_eq!((s.pde_matrix().nrows(), s.pde_matrix().ncols()), (361, 161));
        assert_eq!((s.boundary_matrix().nrows(), s.boundary_matrix().ncols()), (80, 161));
        assert_eq!(s.matrices().merged_duplicates(), 40);
        let s = setup(11, 2, 2, TrialSpace::Z);
        assert_eq!(s.pde_matrix().ncols(), 121);
        assert_eq!(s.pde_rhs().len(), 361);
        assert_eq!(s.boundary_rhs().len(), 80);
    }

    #[test]
    fn boundary_block_on_own_centers_is_symmetric() {
        // Original Kansa layout: Y = Z ∩ Γ; restricted to boundary-center columns
        // the boundary block is the symmetric interpolation matrix.
        let s = setup(6, 1, 1, TrialSpace::Z);
        let centers = s.trial_centers();
        let y = s.matrices().boundary_points();
        let cols: Vec<usize> = y
            .iter()
            .map(|p| centers.iter().position(|c| c == p).unwrap())
            .collect();
        let b = s.boundary_matrix();
        for (i, &ci) in cols.iter().enumerate() {
            for (k, &ck) in cols.iter().enumerate() {
                assert_eq!(b[(i, ck)], b[(k, ci)]);
            }
        }
    }

    #[test]
    fn own_center_carries_peak_value() {
        let s = setup(6, 2, 2, TrialSpace::ZUnionY);
        let peak = s.kernel().peak_value();
        let centers = s.trial_centers();
        for (i, y) in s.matrices().boundary_points().iter().enumerate() {
            let j = centers.iter().position(|c| c == y).expect("own center");
            assert_eq!(s.boundary_matrix()[(i, j)], peak);
        }
    }

    #[test]
    fn rejects_misplaced_points() {
        let d = Domain::reference_square();
        let z = closed_grid(&d, 5).unwrap();
        let (x, y) = refined_collocation(&d, 5, 1, 1).unwrap();
        let k = Kernel::matern_sobolev(4, 2).unwrap();
        let op = EllipticOperator::laplacian(2);
        assert!(CollocationMatrices::assemble(&op, &k, &y, &y, &z, TrialSpace::Z).is_err());
        assert!(CollocationMatrices::assemble(&op, &k, &x, &x, &z, TrialSpace::Z).is_err());
        let k3 = Kernel::matern_sobolev(4, 3).unwrap();
        assert!(CollocationMatrices::assemble(&op, &k3, &x, &y, &z, TrialSpace::Z).is_err());
    }

    #[test]
    fn matrix_dump_format() {
        let s = setup(3, 1, 1, TrialSpace::Z);
        let mut buf = Vec::new();
        write_matrix_csv(&mut buf, "boundary", s.boundary_matrix(), s.boundary_rhs()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "# boundary rows=8 cols=9 layout=row-major last-column=rhs"
        );
        let first: Vec<f64> = lines
            .next()
            .unwrap()
            .split(',')
            .map(|v| v.parse().unwrap())
            .collect();
        assert_eq!(first.len(), 10);
        assert_eq!(first[0], s.boundary_matrix()[(0, 0)]);
        assert_eq!(text.lines().count(), 9);
    }
}
