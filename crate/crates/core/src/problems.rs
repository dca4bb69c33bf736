//! Coefficient fields of periodic advection–diffusion problems
//!
//! `u_t − ε Δu + B·∇u + c u = f` on `[0, κ]³` with periodic boundary
//! conditions and `u(·, 0) = h`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type VectorField = Arc<dyn Fn(&[f64; 3], f64) -> [f64; 3] + Send + Sync>;
pub type ScalarField = Arc<dyn Fn(&[f64; 3], f64) -> f64 + Send + Sync>;
pub type SpatialVector = Arc<dyn Fn(&[f64; 3]) -> [f64; 3] + Send + Sync>;
pub type SpatialScalar = Arc<dyn Fn(&[f64; 3]) -> f64 + Send + Sync>;
pub type TimeFactor = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `B = B1(x) + B2(x)·B3(t)` and `f = f1(x) + f2(x)·f3(t)`.
#[derive(Clone)]
pub struct Separable {
    pub b1: SpatialVector,
    pub b2: SpatialVector,
    pub b3: TimeFactor,
    pub f1: SpatialScalar,
    pub f2: SpatialScalar,
    pub f3: TimeFactor,
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub epsilon: f64,
    pub kappa: f64,
    pub velocity: VectorField,
    /// Time-independent reaction coefficient; `None` means `c = 0`.
    pub reaction: Option<SpatialScalar>,
    pub source: ScalarField,
    pub initial: SpatialScalar,
    pub separable: Option<Separable>,
    /// Temporal frequency of the ABC flow phase; unused elsewhere.
    pub w_freq: f64,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("epsilon", &self.epsilon)
            .field("kappa", &self.kappa)
            .field("reaction", &self.reaction.is_some())
            .field("separable", &self.separable.is_some())
            .field("w_freq", &self.w_freq)
            .finish()
    }
}

impl ProblemSpec {
    pub fn is_separable(&self) -> bool {
        self.separable.is_some()
    }

    pub fn velocity_at(&self, x: &[f64; 3], t: f64) -> [f64; 3] {
        (self.velocity)(x, t)
    }

    pub fn source_at(&self, x: &[f64; 3], t: f64) -> f64 {
        (self.source)(x, t)
    }

    /// Pure diffusion with `B = 0`, `c = 0`, and a separable source `f2(x)·f3(t)`.
    pub fn heat(epsilon: f64, kappa: f64, f2: SpatialScalar, f3: TimeFactor, initial: SpatialScalar) -> Self {
        let zero_v: SpatialVector = Arc::new(|_| [0.0; 3]);
        let f2c = f2.clone();
        let f3c = f3.clone();
        Self {
            name: "heat".into(),
            epsilon,
            kappa,
            velocity: Arc::new(|_, _| [0.0; 3]),
            reaction: None,
            source: Arc::new(move |x, t| f2c(x) * f3c(t)),
            initial,
            separable: Some(Separable {
                b1: zero_v.clone(),
                b2: zero_v,
                b3: Arc::new(|_| 0.0),
                f1: Arc::new(|_| 0.0),
                f2,
                f3,
            }),
            w_freq: 0.0,
        }
    }
}

fn require_positive(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")))
    }
}

/// Kolmogorov flow: `B = (cos y, cos z, cos x) + (sin z, sin x, sin y) cos t`,
/// `f = −cos y − sin z cos t`, `u₀ = 0`, period `2π`.
pub fn kolmogorov_problem(epsilon: f64) -> Result<ProblemSpec> {
    require_positive(epsilon)?;
    let b1: SpatialVector = Arc::new(|x| [x[1].cos(), x[2].cos(), x[0].cos()]);
    let b2: SpatialVector = Arc::new(|x| [x[2].sin(), x[0].sin(), x[1].sin()]);
    let b3: TimeFactor = Arc::new(f64::cos);
    let f1: SpatialScalar = Arc::new(|x| -x[1].cos());
    let f2: SpatialScalar = Arc::new(|x| -x[2].sin());
    let f3: TimeFactor = Arc::new(f64::cos);
    Ok(ProblemSpec {
        name: "kolmogorov".into(),
        epsilon,
        kappa: 2.0 * PI,
        velocity: Arc::new(|x, t| {
            let ct = t.cos();
            [
                x[1].cos() + x[2].sin() * ct,
                x[2].cos() + x[0].sin() * ct,
                x[0].cos() + x[1].sin() * ct,
            ]
        }),
        reaction: None,
        source: Arc::new(|x, t| -x[1].cos() - x[2].sin() * t.cos()),
        initial: Arc::new(|_| 0.0),
        separable: Some(Separable { b1, b2, b3, f1, f2, f3 }),
        w_freq: 0.0,
    })
}

/// ABC flow with phase `s = sin(w t)`:
/// `B = (sin(z+s) + cos(y+s), sin(x+s) + cos(z+s), sin(y+s) + cos(x+s))`,
/// `f = −sin(z+s) − cos(y+s)`, `u₀ = 0`. Not separable in time.
pub fn abc_problem(epsilon: f64, w: f64) -> Result<ProblemSpec> {
    require_positive(epsilon)?;
    Ok(ProblemSpec {
        name: "abc".into(),
        epsilon,
        kappa: 2.0 * PI,
        velocity: Arc::new(move |x, t| {
            let s = (w * t).sin();
            [
                (x[2] + s).sin() + (x[1] + s).cos(),
                (x[0] + s).sin() + (x[2] + s).cos(),
                (x[1] + s).sin() + (x[0] + s).cos(),
            ]
        }),
        reaction: None,
        source: Arc::new(move |x, t| {
            let s = (w * t).sin();
            -(x[2] + s).sin() - (x[1] + s).cos()
        }),
        initial: Arc::new(|_| 0.0),
        separable: None,
        w_freq: w,
    })
}

/// `cos x cos y cos z e^{−t}`.
pub fn manufactured_exact(x: &[f64; 3], t: f64) -> f64 {
    x[0].cos() * x[1].cos() * x[2].cos() * (-t).exp()
}

/// Pure diffusion with exact solution [`manufactured_exact`];
/// `f = u_t − εΔu = (3ε − 1) u`.
pub fn manufactured_problem(epsilon: f64) -> Result<ProblemSpec> {
    require_positive(epsilon)?;
    let factor = 3.0 * epsilon - 1.0;
    let mut spec = ProblemSpec::heat(
        epsilon,
        2.0 * PI,
        Arc::new(move |x| factor * x[0].cos() * x[1].cos() * x[2].cos()),
        Arc::new(|t| (-t).exp()),
        Arc::new(|x| manufactured_exact(x, 0.0)),
    );
    spec.name = "manufactured".into();
    spec.source = Arc::new(move |x, t| factor * manufactured_exact(x, t));
    Ok(spec)
}

/// Look up a problem by its config name.
pub fn problem_by_name(name: &str, epsilon: f64, w_freq: f64) -> Result<ProblemSpec> {
    match name {
        "kolmogorov" => kolmogorov_problem(epsilon),
        "abc" => abc_problem(epsilon, w_freq),
        "manufactured" => manufactured_problem(epsilon),
        other => Err(Error::InvalidArgument(format!("unknown problem `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn random_points(seed: u64, count: usize) -> Vec<([f64; 3], f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let x = [
                    rng.random_range(0.0..2.0 * PI),
                    rng.random_range(0.0..2.0 * PI),
                    rng.random_range(0.0..2.0 * PI),
                ];
                (x, rng.random_range(0.0..100.0))
            })
            .collect()
    }

    #[test]
    fn kolmogorov_values_at_origin() {
        let p = kolmogorov_problem(0.1).unwrap();
        assert_eq!(p.velocity_at(&[0.0; 3], 0.0), [1.0, 1.0, 1.0]);
        assert_eq!(p.source_at(&[0.0; 3], 0.0), -1.0);
    }

    #[test]
    fn abc_values_at_origin() {
        let p = abc_problem(0.1, 1.0).unwrap();
        assert_eq!(p.velocity_at(&[0.0; 3], 0.0), [1.0, 1.0, 1.0]);
        assert_eq!(p.source_at(&[0.0; 3], 0.0), -1.0);
        assert!(!p.is_separable());
    }

    #[test]
    fn abc_source_without_phase() {
        let p = abc_problem(0.3, 1.0).unwrap();
        for (x, _) in random_points(5, 50) {
            assert_eq!(p.source_at(&x, 0.0), -x[2].sin() - x[1].cos());
        }
    }

    #[test]
    fn fields_are_periodic() {
        for p in [kolmogorov_problem(1.0).unwrap(), abc_problem(1.0, 1.0).unwrap()] {
            for (x, t) in random_points(11, 100) {
                for axis in 0..3 {
                    let mut y = x;
                    y[axis] += p.kappa;
                    let (a, b) = (p.velocity_at(&x, t), p.velocity_at(&y, t));
                    for d in 0..3 {
                        assert!((a[d] - b[d]).abs() < 1e-14);
                    }
                    assert!((p.source_at(&x, t) - p.source_at(&y, t)).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn separable_parts_reproduce_direct_fields() {
        for p in [kolmogorov_problem(0.5).unwrap(), manufactured_problem(0.2).unwrap()] {
            let sep = p.separable.as_ref().unwrap();
            for (x, t) in random_points(19, 1000) {
                let direct = p.velocity_at(&x, t);
                let (b1, b2, b3) = ((sep.b1)(&x), (sep.b2)(&x), (sep.b3)(t));
                for d in 0..3 {
                    assert!((direct[d] - (b1[d] + b2[d] * b3)).abs() < 1e-13);
                }
                let f = (sep.f1)(&x) + (sep.f2)(&x) * (sep.f3)(t);
                assert!((p.source_at(&x, t) - f).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn manufactured_source_ratio() {
        let eps = 0.05;
        let p = manufactured_problem(eps).unwrap();
        for (x, t) in random_points(23, 200) {
            let u = manufactured_exact(&x, t);
            if u.abs() > 1e-6 {
                assert!((p.source_at(&x, t) / u - (3.0 * eps - 1.0)).abs() < 1e-12);
            }
        }
        let q = manufactured_problem(1.0 / 3.0).unwrap();
        for (x, t) in random_points(29, 50) {
            assert!(q.source_at(&x, t).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_nonpositive_epsilon() {
        assert!(kolmogorov_problem(0.0).is_err());
        assert!(abc_problem(-1.0, 1.0).is_err());
        assert!(problem_by_name("burgers", 1.0, 1.0).is_err());
    }
}
