use nalgebra::{DMatrix, DVector};

use super::Structure;

/// Floor added to `R` so it stays positive definite for every parameter.
pub const R_FLOOR: f64 = 1e-6;

/// Maps an unconstrained vector onto `(Q, R) = (L_Q L_Q', L_R L_R' + eps I)`.
///
/// With [`Structure::Full`] the factors are lower triangular and the vector
/// holds their entries row by row, `L_Q` first. With
/// [`Structure::Diagonal`] only the diagonals are free.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Parameterization {
    pub n: usize,
    pub m: usize,
    pub structure: Structure,
}

impl Parameterization {
    pub fn new(n: usize, m: usize, structure: Structure) -> Self {
        Self { n, m, structure }
    }

    fn entries(&self, dim: usize) -> Vec<(usize, usize)> {
        match self.structure {
            Structure::Full => (0..dim).flat_map(|i| (0..=i).map(move |j| (i, j))).collect(),
            Structure::Diagonal => (0..dim).map(|i| (i, i)).collect(),
        }
    }

    /// Positions `(block, row, col)` of each parameter; block 0 is `L_Q`.
    fn layout(&self) -> Vec<(usize, usize, usize)> {
        let q = self.entries(self.n).into_iter().map(|(i, j)| (0, i, j));
        let r = self.entries(self.m).into_iter().map(|(i, j)| (1, i, j));
        q.chain(r).collect()
    }

    pub fn len(&self) -> usize {
        self.layout().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Identity factors.
    pub fn identity(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            self.layout()
                .into_iter()
                .map(|(_, i, j)| if i == j { 1.0 } else { 0.0 }),
        )
    }

    pub fn factors(&self, theta: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut lq = DMatrix::zeros(self.n, self.n);
        let mut lr = DMatrix::zeros(self.m, self.m);
        for (p, (block, i, j)) in self.layout().into_iter().enumerate() {
            if block == 0 {
                lq[(i, j)] = theta[p];
            } else {
                lr[(i, j)] = theta[p];
            }
        }
        (lq, lr)
    }

    pub fn weights(&self, theta: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let (lq, lr) = self.factors(theta);
        let q = &lq * lq.transpose();
        let r = &lr * lr.transpose() + DMatrix::identity(self.m, self.m) * R_FLOOR;
        (q, r)
    }

    /// Partial derivatives `(dQ/dtheta_p, dR/dtheta_p)` for every `p`.
    pub fn directions(&self, theta: &DVector<f64>) -> Vec<(DMatrix<f64>, DMatrix<f64>)> {
        let (lq, lr) = self.factors(theta);
        self.layout()
            .into_iter()
            .map(|(block, i, j)| {
                let (l, dim) = if block == 0 { (&lq, self.n) } else { (&lr, self.m) };
                let mut e = DMatrix::zeros(dim, dim);
                e[(i, j)] = 1.0;
                let d = &e * l.transpose() + l * e.transpose();
                if block == 0 {
                    (d, DMatrix::zeros(self.m, self.m))
                } else {
                    (DMatrix::zeros(self.n, self.n), d)
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lengths() {
        assert_eq!(Parameterization::new(2, 2, Structure::Full).len(), 6);
        assert_eq!(Parameterization::new(2, 1, Structure::Full).len(), 4);
        assert_eq!(Parameterization::new(3, 2, Structure::Diagonal).len(), 5);
    }

    #[test]
    fn identity_gives_identity_weights() {
        let p = Parameterization::new(2, 2, Structure::Full);
        let (q, r) = p.weights(&p.identity());
        assert_eq!(q, DMatrix::identity(2, 2));
        assert!((r - DMatrix::identity(2, 2) * (1.0 + R_FLOOR)).amax() < 1e-15);
    }

    #[test]
    fn diagonal_structure_gives_diagonal_weights() {
        let p = Parameterization::new(2, 2, Structure::Diagonal);
        let (q, r) = p.weights(&DVector::from_vec(vec![2.0, -3.0, 0.5, 1.0]));
        assert_eq!(q, DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0])));
        assert_eq!(r[(0, 1)], 0.0);
    }

    #[test]
    fn directions_match_finite_differences() {
        let p = Parameterization::new(3, 2, Structure::Full);
        let theta = DVector::from_fn(p.len(), |i, _| 0.3 + 0.17 * i as f64 - 0.05 * (i * i) as f64);
        let dirs = p.directions(&theta);
        for (k, (dq, dr)) in dirs.iter().enumerate() {
            let h = 1e-6;
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[k] += h;
            tm[k] -= h;
            let (qp, rp) = p.weights(&tp);
            let (qm, rm) = p.weights(&tm);
            assert!(((qp - qm) / (2.0 * h) - dq).amax() < 1e-8);
            assert!(((rp - rm) / (2.0 * h) - dr).amax() < 1e-8);
        }
    }
}
