//! Muscle-force redistribution.
//!
//! The desired MCP torque is spread over the modeled muscles by minimizing
//!
//! ```text
//!     sum_i (f_i / f_max_i)^p  +  w * C^2,    C = tau_d - sum_i r_i f_i
//! ```
//!
//! over the box `0 <= f_i <= f_max_i`. For the default `p = 2` this is a
//! strictly convex QP with a unique solution; it is solved by cyclic
//! coordinate descent with exact per-coordinate minimization, converged on
//! the KKT conditions. A nested grid search (`brute_force_oracle`) serves as
//! an independent check for instances of up to three muscles.

use crate::dynamics::SimulationTrace;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuscleGroup {
    Flexor,
    Extensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Muscle {
    pub name: String,
    pub group: MuscleGroup,
    /// Signed moment arm about MCP (m), positive = flexion.
    pub moment_arm: f64,
    /// Maximum attainable force (N).
    pub f_max: f64,
}

impl Muscle {
    pub fn new(name: &str, group: MuscleGroup, moment_arm: f64, f_max: f64) -> Self {
        Muscle {
            name: name.to_string(),
            group,
            moment_arm,
            f_max,
        }
    }

    pub fn validate(&self, errors: &mut Vec<String>) {
        if !(self.f_max > 0.0) {
            errors.push(format!("muscle {}: f_max must be > 0 (got {})", self.name, self.f_max));
        }
        match self.group {
            MuscleGroup::Flexor if self.moment_arm <= 0.0 => errors.push(format!(
                "muscle {}: flexor moment arm must be > 0 (got {})",
                self.name, self.moment_arm
            )),
            MuscleGroup::Extensor if self.moment_arm >= 0.0 => errors.push(format!(
                "muscle {}: extensor moment arm must be < 0 (got {})",
                self.name, self.moment_arm
            )),
            _ => {}
        }
    }
}

/// The six modeled index muscles. Moment arms and maximum forces are
/// anthropometric placeholders, configurable per run.
pub fn default_muscle_set() -> Vec<Muscle> {
    vec![
        Muscle::new("FDS", MuscleGroup::Flexor, 0.011, 170.0),
        Muscle::new("FDP", MuscleGroup::Flexor, 0.010, 200.0),
        Muscle::new("FDI_radial", MuscleGroup::Flexor, 0.006, 60.0),
        Muscle::new("FDI_ulnar", MuscleGroup::Flexor, 0.005, 60.0),
        Muscle::new("EDC", MuscleGroup::Extensor, -0.009, 70.0),
        Muscle::new("EI", MuscleGroup::Extensor, -0.008, 50.0),
    ]
}

#[derive(Clone, Debug)]
pub struct MuscleOptProblem<'a> {
    /// Desired joint torque (N*m); a single MCP joint in this model.
    pub desired_torque: f64,
    pub muscles: &'a [Muscle],
    /// Activation exponent, even and >= 2.
    pub exponent: u32,
    /// Residual-torque penalty weight.
    pub penalty: f64,
}

impl<'a> MuscleOptProblem<'a> {
    pub fn new(desired_torque: f64, muscles: &'a [Muscle]) -> Self {
        MuscleOptProblem {
            desired_torque,
            muscles,
            exponent: 2,
            penalty: 100.0,
        }
    }

    fn check(&self) -> Result<()> {
        if self.muscles.is_empty() {
            return Err(Error::Parameter("at least one muscle required".into()));
        }
        if self.exponent < 2 || self.exponent % 2 != 0 {
            return Err(Error::Parameter(format!(
                "exponent must be an even integer >= 2 (got {})",
                self.exponent
            )));
        }
        if !(self.penalty > 0.0) {
            return Err(Error::Parameter(format!(
                "penalty must be > 0 (got {})",
                self.penalty
            )));
        }
        if !self.desired_torque.is_finite() {
            return Err(Error::Numeric("non-finite desired torque".into()));
        }
        for m in self.muscles {
            if !(m.f_max > 0.0) || !m.f_max.is_finite() || !m.moment_arm.is_finite() {
                return Err(Error::Numeric(format!(
                    "invalid parameters for muscle {}",
                    m.name
                )));
            }
        }
        Ok(())
    }

    pub fn residual(&self, forces: &[f64]) -> f64 {
        let produced: f64 = self
            .muscles
            .iter()
            .zip(forces)
            .map(|(m, f)| m.moment_arm * f)
            .sum();
        self.desired_torque - produced
    }

    pub fn objective(&self, forces: &[f64]) -> f64 {
        let effort: f64 = self
            .muscles
            .iter()
            .zip(forces)
            .map(|(m, f)| (f / m.f_max).powi(self.exponent as i32))
            .sum();
        let c = self.residual(forces);
        effort + self.penalty * c * c
    }
}

#[derive(Clone, Debug)]
pub struct MuscleSolution {
    pub forces: Vec<f64>,
    /// `f_i / f_max_i`, in [0, 1].
    pub activations: Vec<f64>,
    /// Residual torque `C` (N*m).
    pub residual: f64,
    pub objective: f64,
}

const KKT_TOL: f64 = 1e-9;
const MAX_SWEEPS: usize = 100_000;

fn kkt_violation(problem: &MuscleOptProblem, forces: &[f64]) -> f64 {
    let p = problem.exponent as i32;
    let w = problem.penalty;
    let c = problem.residual(forces);
    let mut worst = 0.0f64;
    for (m, &f) in problem.muscles.iter().zip(forces) {
        let grad = p as f64 * (f / m.f_max).powi(p - 1) / m.f_max - 2.0 * w * m.moment_arm * c;
        let v = if f <= 0.0 {
            (-grad).max(0.0)
        } else if f >= m.f_max {
            grad.max(0.0)
        } else {
            grad.abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// Exact 1-D minimizer over [0, f_max] for one coordinate, the others held
/// at a combined torque contribution `others`.
fn coordinate_min(m: &Muscle, tau_d: f64, others: f64, p: i32, w: f64) -> f64 {
    let gap = tau_d - others;
    if p == 2 {
        let num = w * m.moment_arm * gap;
        let den = 1.0 / (m.f_max * m.f_max) + w * m.moment_arm * m.moment_arm;
        return (num / den).clamp(0.0, m.f_max);
    }
    // Higher even exponents: the derivative is strictly increasing in f,
    // so bisect it.
    let grad = |f: f64| {
        p as f64 * (f / m.f_max).powi(p - 1) / m.f_max
            - 2.0 * w * m.moment_arm * (gap - m.moment_arm * f)
    };
    if grad(0.0) >= 0.0 {
        return 0.0;
    }
    if grad(m.f_max) <= 0.0 {
        return m.f_max;
    }
    let (mut lo, mut hi) = (0.0, m.f_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if grad(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn solution_from(problem: &MuscleOptProblem, forces: Vec<f64>) -> MuscleSolution {
    let activations = problem
        .muscles
        .iter()
        .zip(&forces)
        .map(|(m, f)| f / m.f_max)
        .collect();
    let residual = problem.residual(&forces);
    let objective = problem.objective(&forces);
    MuscleSolution {
        forces,
        activations,
        residual,
        objective,
    }
}

/// Solve the box-constrained redistribution problem. `warm_start`, when
/// provided (e.g. the previous timestep's forces), seeds the iteration.
pub fn solve_muscle_forces(
    problem: &MuscleOptProblem,
    warm_start: Option<&[f64]>,
) -> Result<MuscleSolution> {
    problem.check()?;
    let n = problem.muscles.len();
    let mut forces: Vec<f64> = match warm_start {
        Some(ws) if ws.len() == n => ws
            .iter()
            .zip(problem.muscles)
            .map(|(&f, m)| f.clamp(0.0, m.f_max))
            .collect(),
        _ => vec![0.0; n],
    };
    let p = problem.exponent as i32;
    let w = problem.penalty;
    let mut produced: f64 = problem
        .muscles
        .iter()
        .zip(&forces)
        .map(|(m, f)| m.moment_arm * f)
        .sum();

    for _ in 0..MAX_SWEEPS {
        for i in 0..n {
            let m = &problem.muscles[i];
            let others = produced - m.moment_arm * forces[i];
            let f_new = coordinate_min(m, problem.desired_torque, others, p, w);
            produced = others + m.moment_arm * f_new;
            forces[i] = f_new;
        }
        if kkt_violation(problem, &forces) < KKT_TOL {
            return Ok(solution_from(problem, forces));
        }
    }
    Err(Error::Numeric(
        "muscle force solver failed to converge".into(),
    ))
}

/// Independent nested grid search for instances of up to three muscles,
/// re-centered and zoomed 3x between passes. The slow zoom keeps the
/// minimum of a narrow penalty valley inside the refined window even when
/// the best grid point sits several steps away along the valley floor.
pub fn brute_force_oracle(problem: &MuscleOptProblem) -> Result<MuscleSolution> {
    problem.check()?;
    let n = problem.muscles.len();
    if n > 3 {
        return Err(Error::Unsupported(format!(
            "brute_force_oracle supports at most 3 muscles (got {n})"
        )));
    }
    // Denser axes for cheap low-dimensional grids; enough passes that the
    // final step resolves the objective far below 1e-6 relative.
    let points: usize = if n <= 2 { 101 } else { 61 };
    let passes = if n <= 2 { 10 } else { 12 };

    let mut centers: Vec<f64> = problem.muscles.iter().map(|m| 0.5 * m.f_max).collect();
    let mut half_ranges: Vec<f64> = centers.clone();
    let mut best = vec![0.0; n];
    let mut best_obj = f64::INFINITY;

    let mut point = vec![0.0; n];
    for _ in 0..passes {
        let grids: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let lo = (centers[i] - half_ranges[i]).max(0.0);
                let hi = (centers[i] + half_ranges[i]).min(problem.muscles[i].f_max);
                (0..points)
                    .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
                    .collect()
            })
            .collect();
        let total: usize = points.pow(n as u32);
        for idx in 0..total {
            let mut rem = idx;
            for i in 0..n {
                point[i] = grids[i][rem % points];
                rem /= points;
            }
            let obj = problem.objective(&point);
            if obj < best_obj {
                best_obj = obj;
                best.copy_from_slice(&point);
            }
        }
        for i in 0..n {
            half_ranges[i] /= 3.0;
            centers[i] = best[i];
        }
    }
    Ok(solution_from(problem, best))
}

/// Group-mean activations over the trace's analysis window (the last
/// complete profile cycle), split into closing and opening phases.
#[derive(Clone, Copy, Debug, Default, serde::Serialize)]
pub struct GroupActivationSummary {
    pub flexor_closing_mean: f64,
    pub flexor_cycle_mean: f64,
    pub extensor_opening_mean: f64,
    pub extensor_cycle_mean: f64,
}

pub fn group_activation_summary(trace: &SimulationTrace) -> GroupActivationSummary {
    let (start, end) = trace.analysis_window();
    let flexors: Vec<usize> = trace
        .muscle_groups
        .iter()
        .enumerate()
        .filter(|(_, g)| **g == MuscleGroup::Flexor)
        .map(|(i, _)| i)
        .collect();
    let extensors: Vec<usize> = (0..trace.muscle_groups.len())
        .filter(|i| !flexors.contains(i))
        .collect();

    let group_mean = |sample: usize, ids: &[usize]| -> f64 {
        if ids.is_empty() {
            return 0.0;
        }
        ids.iter()
            .map(|&i| trace.muscle_activations[i][sample])
            .sum::<f64>()
            / ids.len() as f64
    };

    let mut sums = [0.0f64; 4]; // flex closing, flex cycle, ext opening, ext cycle
    let mut counts = [0usize; 4];
    for k in start..end {
        let closing = trace.cycle_phase(trace.t[k]) < 0.5;
        let fm = group_mean(k, &flexors);
        let em = group_mean(k, &extensors);
        sums[1] += fm;
        counts[1] += 1;
        sums[3] += em;
        counts[3] += 1;
        if closing {
            sums[0] += fm;
            counts[0] += 1;
        } else {
            sums[2] += em;
            counts[2] += 1;
        }
    }
    let mean = |i: usize| if counts[i] > 0 { sums[i] / counts[i] as f64 } else { 0.0 };
    GroupActivationSummary {
        flexor_closing_mean: mean(0),
        flexor_cycle_mean: mean(1),
        extensor_opening_mean: mean(2),
        extensor_cycle_mean: mean(3),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn single_muscle() -> Vec<Muscle> {
        vec![Muscle::new("FDS", MuscleGroup::Flexor, 0.01, 100.0)]
    }

    #[test]
    fn zero_torque_zero_forces() {
        let set = default_muscle_set();
        let p = MuscleOptProblem::new(0.0, &set);
        let sol = solve_muscle_forces(&p, None).unwrap();
        assert!(sol.forces.iter().all(|&f| f == 0.0));
        assert_eq!(sol.residual, 0.0);
        assert_eq!(sol.objective, 0.0);
    }

    #[test]
    fn single_muscle_closed_form() {
        // f* = w*r*tau / (1/f_max^2 + w*r^2)
        let set = single_muscle();
        let p = MuscleOptProblem::new(0.5, &set);
        let sol = solve_muscle_forces(&p, None).unwrap();
        assert_abs_diff_eq!(sol.forces[0], 49.50495049504951, epsilon = 1e-6);
        assert_abs_diff_eq!(sol.residual, 4.9504950495e-3, epsilon = 1e-6);
    }

    #[test]
    fn oracle_self_check_single_muscle() {
        let set = single_muscle();
        let p = MuscleOptProblem::new(0.5, &set);
        let sol = brute_force_oracle(&p).unwrap();
        assert_abs_diff_eq!(sol.forces[0], 49.505, epsilon = 1e-3);
    }

    #[test]
    fn oracle_zero_torque() {
        let set = single_muscle();
        let p = MuscleOptProblem::new(0.0, &set);
        let sol = brute_force_oracle(&p).unwrap();
        assert_abs_diff_eq!(sol.forces[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn oracle_rejects_high_dimension() {
        let set = default_muscle_set();
        let p = MuscleOptProblem::new(0.1, &set);
        assert!(matches!(
            brute_force_oracle(&p),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn identical_muscles_share_equally() {
        let set = vec![
            Muscle::new("A", MuscleGroup::Flexor, 0.01, 100.0),
            Muscle::new("B", MuscleGroup::Flexor, 0.01, 100.0),
        ];
        let p = MuscleOptProblem::new(0.5, &set);
        let sol = solve_muscle_forces(&p, None).unwrap();
        // Equality holds to the force resolution the KKT tolerance implies.
        assert_abs_diff_eq!(sol.forces[0], sol.forces[1], epsilon = 1e-4);
    }

    #[test]
    fn residual_shrinks_with_penalty() {
        let set = default_muscle_set();
        let mut last = f64::INFINITY;
        for w in [1.0, 10.0, 100.0, 1000.0] {
            let p = MuscleOptProblem {
                penalty: w,
                ..MuscleOptProblem::new(0.4, &set)
            };
            let sol = solve_muscle_forces(&p, None).unwrap();
            assert!(sol.residual.abs() <= last + 1e-12);
            last = sol.residual.abs();
        }
    }

    #[test]
    fn activation_torque_consistency() {
        let set = default_muscle_set();
        let p = MuscleOptProblem::new(0.37, &set);
        let sol = solve_muscle_forces(&p, None).unwrap();
        let produced: f64 = set
            .iter()
            .zip(&sol.forces)
            .map(|(m, f)| m.moment_arm * f)
            .sum();
        assert_abs_diff_eq!(produced + sol.residual, 0.37, epsilon = 1e-12);
    }

    #[test]
    fn antagonists_stay_quiet() {
        // For a one-joint model with p = 2 and single-sign demand, zeroing
        // the opposite group never lowers the objective at the solution.
        let set = default_muscle_set();
        for tau in [-0.5, -0.1, 0.05, 0.2, 0.6] {
            let p = MuscleOptProblem::new(tau, &set);
            let sol = solve_muscle_forces(&p, None).unwrap();
            let mut zeroed = sol.forces.clone();
            for (i, m) in set.iter().enumerate() {
                let opposite = (tau > 0.0 && m.group == MuscleGroup::Extensor)
                    || (tau < 0.0 && m.group == MuscleGroup::Flexor);
                if opposite {
                    zeroed[i] = 0.0;
                }
            }
            assert!(p.objective(&zeroed) >= sol.objective - 1e-10);
        }
    }

    #[test]
    fn higher_exponent_converges() {
        let set = default_muscle_set();
        let p = MuscleOptProblem {
            exponent: 4,
            ..MuscleOptProblem::new(0.3, &set)
        };
        let sol = solve_muscle_forces(&p, None).unwrap();
        assert!(kkt_violation(&p, &sol.forces) < 1e-8);
        assert!(sol.activations.iter().all(|&a| (0.0..=1.0).contains(&a)));
    }

    #[test]
    fn empty_muscle_set_rejected() {
        let set: Vec<Muscle> = vec![];
        let p = MuscleOptProblem::new(0.1, &set);
        assert!(solve_muscle_forces(&p, None).is_err());
    }

    #[test]
    fn non_finite_torque_rejected() {
        let set = single_muscle();
        let p = MuscleOptProblem::new(f64::NAN, &set);
        assert!(solve_muscle_forces(&p, None).is_err());
    }

    fn arb_instance() -> impl Strategy<Value = (Vec<Muscle>, f64)> {
        (1usize..=3).prop_flat_map(|n| {
            let muscles = prop::collection::vec(
                (0.003f64..0.012, 30.0f64..80.0, prop::bool::ANY),
                n,
            )
            .prop_map(|specs| {
                specs
                    .into_iter()
                    .enumerate()
                    .map(|(i, (r, fmax, flexor))| {
                        if flexor {
                            Muscle::new(&format!("m{i}"), MuscleGroup::Flexor, r, fmax)
                        } else {
                            Muscle::new(&format!("m{i}"), MuscleGroup::Extensor, -r, fmax)
                        }
                    })
                    .collect::<Vec<_>>()
            });
            (muscles, -0.8f64..0.8)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn solver_matches_oracle((set, tau) in arb_instance()) {
            let p = MuscleOptProblem::new(tau, &set);
            let sol = solve_muscle_forces(&p, None).unwrap();
            let oracle = brute_force_oracle(&p).unwrap();
            let rel = (sol.objective - oracle.objective).abs() / (1.0 + oracle.objective);
            prop_assert!(rel < 1e-6, "relative objective gap {rel}");
        }

        #[test]
        fn forces_stay_in_box((set, tau) in arb_instance()) {
            let p = MuscleOptProblem::new(tau * 10.0, &set);
            let sol = solve_muscle_forces(&p, None).unwrap();
            for (m, &f) in set.iter().zip(&sol.forces) {
                prop_assert!((0.0..=m.f_max).contains(&f));
            }
        }
    }
}
