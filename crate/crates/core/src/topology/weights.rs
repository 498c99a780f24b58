use nalgebra::{DMatrix, DVector};

use super::{is_strongly_connected, ClusterTopology, Digraph, GraphRole, TopologyError};

const PERRON_TOL: f64 = 1e-14;
const PERRON_MAX_ITER: usize = 1_000_000;
/// Tolerance on the stochasticity and eigenvector invariants of a [`WeightPair`].
pub const WEIGHT_TOL: f64 = 1e-12;

/// `R[i][j] = 1 / (1 + in_degree(i))` for every in-neighbor `j` of `i` and
/// for `j = i`. Each row is normalized by the receiving agent's own
/// self-inclusive in-degree.
pub fn row_stochastic_weights(g: &Digraph) -> Result<DMatrix<f64>, TopologyError> {
    if !is_strongly_connected(g) {
        return Err(TopologyError::NotStronglyConnected(GraphRole::Unnamed));
    }
    let n = g.node_count();
    let mut r = DMatrix::zeros(n, n);
    for i in 0..n {
        let w = 1.0 / (1 + g.in_degree(i)) as f64;
        r[(i, i)] = w;
        for j in g.in_neighbors(i) {
            r[(i, j)] = w;
        }
    }
    Ok(r)
}

/// `C[i][j] = 1 / (1 + out_degree(j))` for every out-neighbor `i` of `j` and
/// for `i = j`.
pub fn column_stochastic_weights(g: &Digraph) -> Result<DMatrix<f64>, TopologyError> {
    if !is_strongly_connected(g) {
        return Err(TopologyError::NotStronglyConnected(GraphRole::Unnamed));
    }
    let n = g.node_count();
    let mut c = DMatrix::zeros(n, n);
    for j in 0..n {
        let w = 1.0 / (1 + g.out_degree(j)) as f64;
        c[(j, j)] = w;
        for i in g.out_neighbors(j) {
            c[(i, j)] = w;
        }
    }
    Ok(c)
}

/// Normalized left Perron vector of a row-stochastic matrix: `uᵀR = uᵀ`,
/// `Σu = 1`, by power iteration on `Rᵀ`.
pub fn left_perron(r: &DMatrix<f64>) -> Result<DVector<f64>, TopologyError> {
    power_iterate_stochastic(&r.transpose())
}

/// Normalized right Perron vector of a column-stochastic matrix:
/// `Cv = v`, `Σv = 1`.
pub fn right_perron(c: &DMatrix<f64>) -> Result<DVector<f64>, TopologyError> {
    power_iterate_stochastic(c)
}

fn power_iterate_stochastic(m: &DMatrix<f64>) -> Result<DVector<f64>, TopologyError> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return Err(TopologyError::SizeMismatch {
            expected: n,
            found: m.ncols(),
        });
    }
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..PERRON_MAX_ITER {
        let mut next = m * &x;
        let total = next.sum();
        if !total.is_finite() || total <= 0.0 {
            break;
        }
        next /= total;
        let change = (&next - &x).amax();
        x = next;
        if change <= PERRON_TOL {
            return Ok(x);
        }
    }
    Err(TopologyError::PerronNotConverged)
}

/// Mixing matrices of both communication layers together with their Perron
/// vectors: the row-stochastic `R` over all agents with left eigenvector `u`,
/// and one column-stochastic `C^h` per cluster with right eigenvector `v^h`.
#[derive(Debug, Clone)]
pub struct WeightPair {
    pub r: DMatrix<f64>,
    pub u: DVector<f64>,
    pub c: Vec<DMatrix<f64>>,
    pub v: Vec<DVector<f64>>,
}

impl WeightPair {
    pub fn from_topology(topology: &ClusterTopology) -> Result<Self, TopologyError> {
        let r = row_stochastic_weights(topology.global())
            .map_err(|e| e.with_role(GraphRole::Global))?;
        let u = left_perron(&r)?;
        let mut c = Vec::with_capacity(topology.cluster_count());
        let mut v = Vec::with_capacity(topology.cluster_count());
        for (h, g) in topology.cluster_graphs().iter().enumerate() {
            let ch = column_stochastic_weights(g).map_err(|e| e.with_role(GraphRole::Cluster(h)))?;
            v.push(right_perron(&ch)?);
            c.push(ch);
        }
        let pair = Self { r, u, c, v };
        pair.validate()?;
        Ok(pair)
    }

    /// Checks every stochasticity and eigenvector invariant within
    /// [`WEIGHT_TOL`].
    pub fn validate(&self) -> Result<(), TopologyError> {
        check_mixing(&self.r, &self.u, false, GraphRole::Global)?;
        if self.c.len() != self.v.len() {
            return Err(TopologyError::SizeMismatch {
                expected: self.c.len(),
                found: self.v.len(),
            });
        }
        for (h, (c, v)) in self.c.iter().zip(&self.v).enumerate() {
            check_mixing(c, v, true, GraphRole::Cluster(h))?;
        }
        Ok(())
    }

    pub fn agent_count(&self) -> usize {
        self.u.len()
    }

    pub fn cluster_count(&self) -> usize {
        self.c.len()
    }
}

fn check_mixing(
    m: &DMatrix<f64>,
    w: &DVector<f64>,
    column: bool,
    role: GraphRole,
) -> Result<(), TopologyError> {
    let n = m.nrows();
    let fail = |what: &str| TopologyError::InvalidWeights {
        role,
        reason: what.to_string(),
    };
    if m.ncols() != n || w.len() != n {
        return Err(fail("dimension mismatch"));
    }
    if m.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(fail("negative or non-finite entry"));
    }
    if (0..n).any(|i| m[(i, i)] <= 0.0) {
        return Err(fail("non-positive diagonal entry"));
    }
    let sums: Vec<f64> = if column {
        m.column_iter().map(|c| c.sum()).collect()
    } else {
        m.row_iter().map(|r| r.sum()).collect()
    };
    if sums.iter().any(|s| (s - 1.0).abs() > WEIGHT_TOL) {
        return Err(fail(if column {
            "not column-stochastic"
        } else {
            "not row-stochastic"
        }));
    }
    if w.iter().any(|&x| x <= 0.0) || (w.sum() - 1.0).abs() > WEIGHT_TOL {
        return Err(fail("Perron vector not positive and normalized"));
    }
    let residual = if column {
        (m * w - w).amax()
    } else {
        (m.tr_mul(w) - w).amax()
    };
    if residual > WEIGHT_TOL {
        return Err(fail("Perron vector residual too large"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    /// Stationary vector by a dense solve of `(M - I) x = 0`, `Σx = 1`:
    /// replace the last equation by the normalization row.
    fn stationary_dense(m: &DMatrix<f64>) -> DVector<f64> {
        let n = m.nrows();
        let mut a = m - DMatrix::identity(n, n);
        let mut b = DVector::zeros(n);
        for j in 0..n {
            a[(n - 1, j)] = 1.0;
        }
        b[n - 1] = 1.0;
        a.lu().solve(&b).expect("nonsingular")
    }

    #[test]
    fn ring_weights() {
        let g = Digraph::ring(3).unwrap();
        let r = row_stochastic_weights(&g).unwrap();
        for i in 0..3 {
            let row: Vec<f64> = r.row(i).iter().copied().filter(|&x| x > 0.0).collect();
            assert_eq!(row, vec![0.5, 0.5]);
        }
        let c = column_stochastic_weights(&g).unwrap();
        for j in 0..3 {
            let col: Vec<f64> = c.column(j).iter().copied().filter(|&x| x > 0.0).collect();
            assert_eq!(col, vec![0.5, 0.5]);
        }
    }

    #[test]
    fn complete_weights_are_uniform() {
        let g = Digraph::complete(3).unwrap();
        let r = row_stochastic_weights(&g).unwrap();
        let c = column_stochastic_weights(&g).unwrap();
        assert!(r.iter().all(|&x| x == 1.0 / 3.0));
        assert!(c.iter().all(|&x| x == 1.0 / 3.0));
    }

    #[test]
    fn sums_on_random_graphs() {
        for seed in 0..20 {
            let g = Digraph::random_strongly_connected(9, 7, seed).unwrap();
            let r = row_stochastic_weights(&g).unwrap();
            let c = column_stochastic_weights(&g).unwrap();
            for i in 0..9 {
                assert!((r.row(i).sum() - 1.0).abs() <= 1e-15);
                assert!((c.column(i).sum() - 1.0).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn weights_reject_disconnected() {
        let g = Digraph::new(2, [(0, 1)]).unwrap();
        assert!(row_stochastic_weights(&g).is_err());
        assert!(column_stochastic_weights(&g).is_err());
    }

    #[test]
    fn perron_of_doubly_stochastic_is_uniform() {
        let r = row_stochastic_weights(&Digraph::complete(4).unwrap()).unwrap();
        let u = left_perron(&r).unwrap();
        assert!(u.iter().all(|&x| (x - 0.25).abs() < 1e-15));
        let v = right_perron(&r).unwrap();
        assert!(v.iter().all(|&x| (x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn perron_of_rank_one() {
        let target = DVector::from_vec(vec![0.1, 0.2, 0.3, 0.4]);
        let r = DVector::from_element(4, 1.0) * target.transpose();
        let u = left_perron(&r).unwrap();
        assert!((u - &target).amax() < 1e-15);
        let c = r.transpose();
        let v = right_perron(&c).unwrap();
        assert!((v - target).amax() < 1e-15);
    }

    #[test]
    fn perron_scalar() {
        let c = DMatrix::from_element(1, 1, 1.0);
        assert_eq!(right_perron(&c).unwrap()[0], 1.0);
    }

    #[test]
    fn perron_matches_dense_solve() {
        for seed in 0..10 {
            let g = Digraph::random_strongly_connected(10, 6, 100 + seed).unwrap();
            let r = row_stochastic_weights(&g).unwrap();
            let u = left_perron(&r).unwrap();
            assert!((r.tr_mul(&u) - &u).amax() <= 1e-12);
            assert!((&u - stationary_dense(&r.transpose())).amax() <= 1e-12);

            let c = column_stochastic_weights(&g).unwrap();
            let v = right_perron(&c).unwrap();
            assert!((&c * &v - &v).amax() <= 1e-12);
            assert!((&v - stationary_dense(&c)).amax() <= 1e-12);
        }
    }

    #[test]
    fn validate_catches_broken_pairs() {
        let g = Digraph::ring(3).unwrap();
        let topo = ClusterTopology::new(g.clone(), vec![g], vec![3]).unwrap();
        let mut pair = WeightPair::from_topology(&topo).unwrap();
        assert!(pair.validate().is_ok());
        pair.u[0] += 1e-6;
        assert!(pair.validate().is_err());
    }
}
