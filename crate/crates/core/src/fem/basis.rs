//! One-dimensional node sets and Lagrange bases on `[-1, 1]`, and their
//! tensor products on the reference square.

use crate::scalar::Real;

/// Evaluates the Legendre polynomial `P_n` and its derivative at `x`.
fn legendre<T: Real>(n: usize, x: T) -> (T, T) {
    if n == 0 {
        return (T::ONE, T::ZERO);
    }
    let mut p0 = T::ONE;
    let mut p1 = x;
    for j in 2..=n {
        let jf = T::from_usize_(j);
        let p2 = ((T::lit(2.0) * jf - T::ONE) * x * p1 - (jf - T::ONE) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let nf = T::from_usize_(n);
    // P'_n = n (x P_n - P_{n-1}) / (x^2 - 1), only used away from the endpoints.
    let dp = nf * (x * p1 - p0) / (x * x - T::ONE);
    (p1, dp)
}

/// Gauss–Legendre nodes and weights with `n` points, ascending.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one point");
    let mut nodes = vec![T::ZERO; n];
    let mut weights = vec![T::ZERO; n];
    let pi = T::pi();
    for i in 0..n {
        let mut x =
            -(pi * (T::from_usize_(i) + T::lit(0.75)) / (T::from_usize_(n) + T::lit(0.5))).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= T::EPS * T::lit(4.0) {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        nodes[i] = x;
        weights[i] = T::lit(2.0) / ((T::ONE - x * x) * dp * dp);
    }
    if n % 2 == 1 {
        nodes[n / 2] = T::ZERO;
    }
    (nodes, weights)
}

/// Gauss–Lobatto nodes with `n >= 2` points, ascending, including `±1`.
pub fn gauss_lobatto<T: Real>(n: usize) -> Vec<T> {
    assert!(n >= 2, "Gauss-Lobatto set needs at least two points");
    let order = n - 1;
    let mut nodes = vec![T::ZERO; n];
    nodes[0] = -T::ONE;
    nodes[order] = T::ONE;
    let pi = T::pi();
    // Interior nodes are the roots of P'_order; Newton on q(x) = P'_order(x).
    for i in 1..order {
        let mut x = -(pi * T::from_usize_(i) / T::from_usize_(order)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(order, x);
            // (1 - x^2) P'' = 2x P' - n(n+1) P
            let of = T::from_usize_(order);
            let ddp = (T::lit(2.0) * x * dp - of * (of + T::ONE) * p) / (T::ONE - x * x);
            let dx = dp / ddp;
            x -= dx;
            if dx.abs() <= T::EPS * T::lit(4.0) {
                break;
            }
        }
        nodes[i] = x;
    }
    if n % 2 == 1 {
        nodes[n / 2] = T::ZERO;
    }
    nodes
}

/// Nodal Lagrange basis on a fixed 1D node set.
#[derive(Clone, Debug)]
pub struct Lagrange1D<T> {
    nodes: Vec<T>,
}

impl<T: Real> Lagrange1D<T> {
    pub fn new(nodes: Vec<T>) -> Self {
        Lagrange1D { nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    /// Values of every basis function at `x`.
    pub fn values(&self, x: T) -> Vec<T> {
        let n = self.nodes.len();
        (0..n)
            .map(|i| {
                let mut v = T::ONE;
                for j in 0..n {
                    if j != i {
                        v *= (x - self.nodes[j]) / (self.nodes[i] - self.nodes[j]);
                    }
                }
                v
            })
            .collect()
    }

    /// Derivatives of every basis function at `x`.
    pub fn derivatives(&self, x: T) -> Vec<T> {
        let n = self.nodes.len();
        (0..n)
            .map(|i| {
                let mut d = T::ZERO;
                for m in 0..n {
                    if m == i {
                        continue;
                    }
                    let mut term = T::ONE / (self.nodes[i] - self.nodes[m]);
                    for j in 0..n {
                        if j != i && j != m {
                            term *= (x - self.nodes[j]) / (self.nodes[i] - self.nodes[j]);
                        }
                    }
                    d += term;
                }
                d
            })
            .collect()
    }
}

/// Tensor-product Lagrange basis on `[-1,1]^2`; local index `a = ix + n*iy`.
#[derive(Clone, Debug)]
pub struct TensorBasis<T> {
    line: Lagrange1D<T>,
}

impl<T: Real> TensorBasis<T> {
    pub fn new(line: Lagrange1D<T>) -> Self {
        TensorBasis { line }
    }

    /// Number of 1D nodes.
    pub fn n1d(&self) -> usize {
        self.line.len()
    }

    pub fn len(&self) -> usize {
        self.line.len() * self.line.len()
    }

    pub fn is_empty(&self) -> bool {
        self.line.is_empty()
    }

    /// Reference coordinates of local node `a`.
    pub fn node(&self, a: usize) -> [T; 2] {
        let n = self.n1d();
        [self.line.nodes()[a % n], self.line.nodes()[a / n]]
    }

    pub fn values(&self, xi: [T; 2]) -> Vec<T> {
        let vx = self.line.values(xi[0]);
        let vy = self.line.values(xi[1]);
        let n = self.n1d();
        let mut out = Vec::with_capacity(n * n);
        for y in &vy {
            for x in &vx {
                out.push(*x * *y);
            }
        }
        out
    }

    /// Reference gradients `[d/dxi, d/deta]` of every basis function.
    pub fn gradients(&self, xi: [T; 2]) -> Vec<[T; 2]> {
        let vx = self.line.values(xi[0]);
        let vy = self.line.values(xi[1]);
        let dx = self.line.derivatives(xi[0]);
        let dy = self.line.derivatives(xi[1]);
        let n = self.n1d();
        let mut out = Vec::with_capacity(n * n);
        for iy in 0..n {
            for ix in 0..n {
                out.push([dx[ix] * vy[iy], vx[ix] * dy[iy]]);
            }
        }
        out
    }
}
