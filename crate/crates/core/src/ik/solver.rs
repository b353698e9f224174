use nalgebra::{DMatrix, DVector, Matrix6, Vector6};

use super::IkSettings;
use crate::kinematics::{pose_error, JointConfig, Pose, SerialChain};

#[derive(Clone, Debug, PartialEq)]
pub struct IkSolution {
    pub q: JointConfig,
    pub residual: f64,
    pub iterations: usize,
}

/// Returned when the solver runs out of iterations above `residual_tol`.
#[derive(Clone, Debug, PartialEq)]
pub struct IkFailure {
    pub q: JointConfig,
    pub residual: f64,
    pub iterations: usize,
}

/// One accepted SQP iterate: seed weight of its stage and objective value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SqpIterate {
    pub seed_weight: f64,
    pub energy: f64,
}

struct Objective<'a> {
    chain: &'a SerialChain,
    target: &'a Pose,
    seed: &'a [f64],
    w: &'a [f64; 6],
}

impl Objective<'_> {
    fn eval(&self, q: &[f64], lambda: f64) -> (f64, Vector6<f64>) {
        let e = pose_error(&self.chain.fk_unchecked(q), self.target);
        let task: f64 = e.iter().zip(self.w).map(|(e, w)| w * e * e).sum();
        let prox: f64 = q.iter().zip(self.seed).map(|(a, b)| (a - b) * (a - b)).sum();
        (0.5 * task + 0.5 * lambda * prox, e)
    }
}

/// Minimises `E(q) = ½‖f(q) − x‖²_W + ½λ‖q − q′‖²` over the joint-limit box.
///
/// Each iteration solves the Gauss–Newton QP model of `E` with a
/// Levenberg–Marquardt trust term and projects the step onto the box; a step
/// is accepted only if it lowers `E`. When the iterate stalls above
/// `residual_tol`, λ is divided by ten (and finally set to zero) so the seed
/// pull cannot bias the converged pose; `E` is non-increasing within each λ
/// stage.
pub fn solve_ik_sqp(
    chain: &SerialChain,
    target: &Pose,
    seed: &JointConfig,
    settings: &IkSettings,
) -> Result<IkSolution, IkFailure> {
    solve_ik_sqp_traced(chain, target, seed, settings).0
}

/// `solve_ik_sqp` plus the sequence of accepted iterates.
pub fn solve_ik_sqp_traced(
    chain: &SerialChain,
    target: &Pose,
    seed: &JointConfig,
    settings: &IkSettings,
) -> (Result<IkSolution, IkFailure>, Vec<SqpIterate>) {
    let m = chain.dof();
    let mut trace = Vec::new();
    if seed.len() != m {
        let fail = IkFailure {
            q: seed.clone(),
            residual: f64::INFINITY,
            iterations: 0,
        };
        return (Err(fail), trace);
    }
    let mut q = chain.clamp_to_limits(seed).expect("dims checked").into_vec();
    let obj = Objective {
        chain,
        target,
        seed,
        w: &settings.task_weight,
    };
    let mut lambda = settings.seed_weight;
    let mut mu = 1e-4;
    let (mut energy, mut err) = obj.eval(&q, lambda);
    trace.push(SqpIterate {
        seed_weight: lambda,
        energy,
    });
    let w = Matrix6::from_diagonal(&Vector6::from_column_slice(&settings.task_weight));
    for iter in 0..settings.max_iters {
        let residual = settings.residual(&err);
        if residual <= settings.residual_tol {
            return (
                Ok(IkSolution {
                    q: q.into(),
                    residual,
                    iterations: iter,
                }),
                trace,
            );
        }
        let (_, jac) = chain.jacobian_unchecked(&q);
        let jtw = jac.transpose() * w;
        let qd = DVector::from_column_slice(&q);
        let sd = DVector::from_column_slice(seed);
        // ∇E (Gauss–Newton model) and its Hessian approximation
        let grad = -(&jtw * err) + (&qd - &sd) * lambda;
        let hess = &jtw * &jac + DMatrix::identity(m, m) * lambda;

        let mut accepted = false;
        let energy_before = energy;
        while mu < 1e10 {
            let sys = &hess + DMatrix::identity(m, m) * mu;
            let Some(chol) = sys.cholesky() else {
                mu *= 10.0;
                continue;
            };
            let d = chol.solve(&(-&grad));
            let mut trial: Vec<f64> = q.iter().zip(d.iter()).map(|(a, b)| a + b).collect();
            chain.clamp_in_place(&mut trial);
            let (e_trial, err_trial) = obj.eval(&trial, lambda);
            if e_trial < energy {
                q = trial;
                energy = e_trial;
                err = err_trial;
                mu = (mu / 3.0).max(1e-12);
                accepted = true;
                trace.push(SqpIterate {
                    seed_weight: lambda,
                    energy,
                });
                break;
            }
            mu *= 4.0;
        }
        // converged to the λ-biased optimum, or no descent left
        let stalled = !accepted || energy_before - energy <= 1e-6 * energy_before;
        if stalled {
            if lambda == 0.0 {
                if !accepted {
                    break;
                }
            } else {
                lambda = if lambda < 1e-9 { 0.0 } else { lambda * 0.1 };
                mu = 1e-4;
                let (e, r) = obj.eval(&q, lambda);
                energy = e;
                err = r;
                trace.push(SqpIterate {
                    seed_weight: lambda,
                    energy,
                });
            }
        }
    }
    let residual = settings.residual(&err);
    let result = if residual <= settings.residual_tol {
        Ok(IkSolution {
            q: q.into(),
            residual,
            iterations: settings.max_iters,
        })
    } else {
        Err(IkFailure {
            q: q.into(),
            residual,
            iterations: settings.max_iters,
        })
    };
    (result, trace)
}

/// Damped pseudoinverse Newton–Raphson:
/// `q_{k+1} = clamp(q_k + α J⁺ (x − f(q_k)))` until `‖q_{k+1} − q_k‖² ≤ ε`.
///
/// `J⁺ = Jᵀ(J Jᵀ + δI)⁻¹` on the W-weighted rows keeps every update finite
/// near singularities.
pub fn solve_ik_newton(
    chain: &SerialChain,
    target: &Pose,
    q0: &JointConfig,
    settings: &IkSettings,
) -> Result<IkSolution, IkFailure> {
    let m = chain.dof();
    if q0.len() != m {
        return Err(IkFailure {
            q: q0.clone(),
            residual: f64::INFINITY,
            iterations: 0,
        });
    }
    let sqrt_w = Matrix6::from_diagonal(&Vector6::from_iterator(
        settings.task_weight.iter().map(|w| w.sqrt()),
    ));
    let mut q = chain.clamp_to_limits(q0).expect("dims checked").into_vec();
    let mut iterations = 0;
    for _ in 0..settings.max_iters {
        iterations += 1;
        let (pose, jac) = chain.jacobian_unchecked(&q);
        let err = sqrt_w * pose_error(&pose, target);
        let jw = sqrt_w * jac;
        let gram = &jw * jw.transpose() + Matrix6::identity() * settings.damping;
        let Some(solved) = gram.cholesky().map(|c| c.solve(&err)) else {
            break;
        };
        let dq = jw.transpose() * solved * settings.step;
        let mut next: Vec<f64> = q.iter().zip(dq.iter()).map(|(a, b)| a + b).collect();
        chain.clamp_in_place(&mut next);
        if next.iter().any(|v| !v.is_finite()) {
            break;
        }
        let moved: f64 = q.iter().zip(&next).map(|(a, b)| (a - b) * (a - b)).sum();
        q = next;
        if moved <= settings.convergence_eps {
            break;
        }
    }
    let residual = settings.residual(&pose_error(&chain.fk_unchecked(&q), target));
    if residual <= settings.residual_tol {
        Ok(IkSolution {
            q: q.into(),
            residual,
            iterations,
        })
    } else {
        Err(IkFailure {
            q: q.into(),
            residual,
            iterations,
        })
    }
}
