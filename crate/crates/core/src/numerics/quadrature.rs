//! Gauss-Legendre rules and composite integration.

/// Gauss-Legendre abscissae and weights on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Default rule order used for latent-space integrals.
pub const DEFAULT_ORDER: usize = 64;

impl QuadratureRule {
    /// Builds the `order`-point rule by Newton iteration on the Legendre
    /// polynomial, starting from the Tricomi approximation of each root.
    pub fn gauss_legendre(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let half = n.div_ceil(2);
        for i in 0..half {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights of the composite rule on `[a, b]` with equal panels.
    pub fn composite(&self, a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        let mut out = Vec::with_capacity(panels * self.order());
        for p in 0..panels {
            let lo = a + h * p as f64;
            let mid = lo + 0.5 * h;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                out.push((mid + 0.5 * h * x, 0.5 * h * w));
            }
        }
        out
    }

    /// Nodes and weights on `[a, b]` after the polynomial substitution
    /// `y = a + (b - a) psi(s)`, `psi(s) = s^4 (35 - 84 s + 70 s^2 - 20 s^3)`,
    /// whose Jacobian `140 s^3 (1 - s)^3` vanishes to third order at both
    /// ends. Integrands with algebraic endpoint singularities or thin
    /// boundary layers become smooth in `s`. `panels` splits `[0, 1]` in `s`.
    pub fn endpoint_graded(&self, a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
        self.endpoint_graded_nodes(a, b, panels)
            .into_iter()
            .map(|n| (n.x, n.weight))
            .collect()
    }

    /// [`endpoint_graded`](Self::endpoint_graded) with each node's distance
    /// to both ends computed without cancellation (`psi(s) + psi(1 - s) = 1`).
    pub fn endpoint_graded_nodes(&self, a: f64, b: f64, panels: usize) -> Vec<GradedNode> {
        let len = b - a;
        let psi = |s: f64| {
            let s2 = s * s;
            s2 * s2 * (35.0 - 84.0 * s + 70.0 * s2 - 20.0 * s2 * s)
        };
        self.composite(0.0, 1.0, panels)
            .into_iter()
            .map(|(s, w)| {
                let om = 1.0 - s;
                let from_lo = len * psi(s);
                let to_hi = len * psi(om);
                let x = if from_lo <= to_hi { a + from_lo } else { b - to_hi };
                GradedNode {
                    x,
                    from_lo,
                    to_hi,
                    weight: w * len * 140.0 * s * s * s * om * om * om,
                }
            })
            .collect()
    }
}

/// Node of an endpoint-graded rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradedNode {
    pub x: f64,
    /// `x - a`, accurate near `a`.
    pub from_lo: f64,
    /// `b - x`, accurate near `b`.
    pub to_hi: f64,
    pub weight: f64,
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

/// Composite Gauss-Legendre estimate of the integral of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rule: &QuadratureRule,
    subdivisions: usize,
) -> f64 {
    rule.composite(a, b, subdivisions)
        .into_iter()
        .map(|(x, w)| w * f(x))
        .sum()
}

/// Endpoint-graded integral of `f` over `[a, b]`, comparing one and two
/// panels and keeping the refined estimate.
pub fn integrate_graded<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rule: &QuadratureRule) -> f64 {
    let eval = |panels| -> f64 {
        rule.endpoint_graded(a, b, panels)
            .into_iter()
            .map(|(x, w)| w * f(x))
            .sum()
    };
    let coarse = eval(1);
    let fine = eval(2);
    if (coarse - fine).abs() <= 1e-9 * fine.abs().max(1e-300) {
        fine
    } else {
        eval(4)
    }
}
