//! Exact Riemann solver for a polytropic gas with `p = rho T`.

use crate::error::{Error, Result};

/// Primitive state `(rho, u, T)` normal to the interface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primitive1d {
    pub rho: f64,
    pub u: f64,
    pub t: f64,
}

impl Primitive1d {
    pub fn new(rho: f64, u: f64, t: f64) -> Self {
        Self { rho, u, t }
    }

    pub fn pressure(&self) -> f64 {
        self.rho * self.t
    }
}

/// Star-region solution; sample it with [`RiemannSolution::sample`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiemannSolution {
    pub left: Primitive1d,
    pub right: Primitive1d,
    pub gamma: f64,
    pub p_star: f64,
    pub u_star: f64,
}

struct Side {
    rho: f64,
    p: f64,
    c: f64,
}

impl Side {
    fn new(s: &Primitive1d, gamma: f64) -> Self {
        let p = s.pressure();
        Self {
            rho: s.rho,
            p,
            c: (gamma * p / s.rho).sqrt(),
        }
    }

    /// Velocity jump across the wave connecting this side to pressure `p`.
    fn f(&self, p: f64, gamma: f64) -> f64 {
        if p > self.p {
            let a = 2.0 / ((gamma + 1.0) * self.rho);
            let b = (gamma - 1.0) / (gamma + 1.0) * self.p;
            (p - self.p) * (a / (p + b)).sqrt()
        } else {
            2.0 * self.c / (gamma - 1.0) * ((p / self.p).powf((gamma - 1.0) / (2.0 * gamma)) - 1.0)
        }
    }

    fn star_density(&self, p: f64, gamma: f64) -> f64 {
        let r = p / self.p;
        if p > self.p {
            let g = (gamma - 1.0) / (gamma + 1.0);
            self.rho * (r + g) / (g * r + 1.0)
        } else {
            self.rho * r.powf(1.0 / gamma)
        }
    }
}

/// Solve the Riemann problem by bisection on the pressure function.
///
/// Returns `VacuumState` for non-positive inputs or data that would open a vacuum.
pub fn exact_riemann(left: Primitive1d, right: Primitive1d, gamma: f64) -> Result<RiemannSolution> {
    for (cell, s) in [left, right].iter().enumerate() {
        if !(s.rho > 0.0 && s.t > 0.0) || !s.u.is_finite() {
            return Err(Error::VacuumState {
                cell,
                rho: s.rho,
                internal: s.rho * s.t,
            });
        }
    }
    let (l, r) = (Side::new(&left, gamma), Side::new(&right, gamma));
    let du = right.u - left.u;
    if 2.0 * (l.c + r.c) / (gamma - 1.0) <= du {
        return Err(Error::VacuumState {
            cell: 0,
            rho: 0.0,
            internal: 0.0,
        });
    }
    let phi = |p: f64| l.f(p, gamma) + r.f(p, gamma) + du;
    // phi is increasing in p; phi(0+) < 0 by the vacuum check.
    let mut lo = 0.0;
    let mut hi = l.p.max(r.p);
    while phi(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p_star = 0.5 * (lo + hi);
    let u_star = 0.5 * (left.u + right.u) + 0.5 * (r.f(p_star, gamma) - l.f(p_star, gamma));
    Ok(RiemannSolution {
        left,
        right,
        gamma,
        p_star,
        u_star,
    })
}

impl RiemannSolution {
    /// Residual of the pressure function at the computed star pressure.
    pub fn residual(&self) -> f64 {
        let (l, r) = (Side::new(&self.left, self.gamma), Side::new(&self.right, self.gamma));
        l.f(self.p_star, self.gamma) + r.f(self.p_star, self.gamma) + self.right.u - self.left.u
    }

    /// Star-region densities `(left of contact, right of contact)`.
    pub fn star_densities(&self) -> (f64, f64) {
        let g = self.gamma;
        (
            Side::new(&self.left, g).star_density(self.p_star, g),
            Side::new(&self.right, g).star_density(self.p_star, g),
        )
    }

    /// Self-similar solution at `xi = x / t`.
    pub fn sample(&self, xi: f64) -> Primitive1d {
        if xi <= self.u_star {
            self.sample_left(xi, &self.left, self.u_star)
        } else {
            // The right wave is the left wave of the mirrored problem.
            let s = Primitive1d::new(self.right.rho, -self.right.u, self.right.t);
            let mut out = self.sample_left(-xi, &s, -self.u_star);
            out.u = -out.u;
            out
        }
    }

    /// Sample the wave separating a left state `s` from the star region moving at `u_star`.
    fn sample_left(&self, xi: f64, s: &Primitive1d, u_star: f64) -> Primitive1d {
        let g = self.gamma;
        let side = Side::new(s, g);
        let p_star = self.p_star;
        let star = |rho: f64| Primitive1d::new(rho, u_star, p_star / rho);
        if p_star > side.p {
            let shock = s.u - side.c * ((g + 1.0) / (2.0 * g) * p_star / side.p + (g - 1.0) / (2.0 * g)).sqrt();
            if xi <= shock {
                *s
            } else {
                star(side.star_density(p_star, g))
            }
        } else {
            let rho_star = side.star_density(p_star, g);
            let c_star = (g * p_star / rho_star).sqrt();
            let head = s.u - side.c;
            let tail = u_star - c_star;
            if xi <= head {
                *s
            } else if xi >= tail {
                star(rho_star)
            } else {
                let c = 2.0 / (g + 1.0) * side.c + (g - 1.0) / (g + 1.0) * (s.u - xi);
                let u = 2.0 / (g + 1.0) * (side.c + (g - 1.0) / 2.0 * s.u + xi);
                let rho = side.rho * (c / side.c).powf(2.0 / (g - 1.0));
                let p = side.p * (c / side.c).powf(2.0 * g / (g - 1.0));
                Primitive1d::new(rho, u, p / rho)
            }
        }
    }
}
