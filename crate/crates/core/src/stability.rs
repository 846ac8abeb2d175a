//! Orbital distance to a computed ground state and perturbation experiments.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::evolution::{evolve_with, EvolutionError, EvolutionTrace, EvolveOptions};
use crate::ground_state::GroundState;
use crate::model::{CouplingModel, ModelError, State};
use crate::spectral::{Field, SpectralError};

#[derive(Debug, Error)]
pub enum StabilityError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("invalid stability parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
}

/// Best alignment of a reference profile to a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitalFit {
    pub distance: f64,
    /// Translation; the aligned profile is `Phi(x - shift)`.
    pub shift: f64,
    pub phases: [f64; 3],
}

/// `min_{y, theta} (sum_j ||S_j - e^{i theta_j} Phi_j(. - y)||^2_{H^1})^{1/2}`.
pub fn orbital_distance(state: &State, reference: &State) -> Result<f64, StabilityError> {
    Ok(orbital_fit(state, reference)?.distance)
}

/// Golden-section steps of the sub-grid shift search.
const SHIFT_SEARCH_STEPS: usize = 60;

/// The minimizing translation and phases of [`orbital_distance`].
///
/// For a fixed `y` the best phase is `theta_j = arg <S_j, Phi_j(. - y)>_{H^1}`
/// and the squared distance is `||S||^2 + ||Phi||^2 - 2 sum_j |<S_j, Phi_j(. - y)>|`.
/// The inner products at every grid node come from one circular
/// cross-correlation per component. The best node is then refined within one
/// grid step by maximizing the trigonometric interpolant of the correlation,
/// and the distance at the node and at the refined shift is recomputed
/// directly (no cancellation when it is small); the smaller one wins.
pub fn orbital_fit(state: &State, reference: &State) -> Result<OrbitalFit, StabilityError> {
    let grid = state.grid();
    if grid != reference.grid() {
        return Err(SpectralError::GridMismatch.into());
    }
    let n = grid.n();
    let h = grid.spacing();
    // Cross spectra w_m S^_m conj(Phi^_m) scaled so the inverse transform
    // gives the inner products directly.
    let spectra: Vec<Vec<Complex64>> = (0..3)
        .map(|j| {
            let mut s = state.component(j).values().to_vec();
            let mut f = reference.component(j).values().to_vec();
            grid.forward(&mut s);
            grid.forward(&mut f);
            (0..n)
                .map(|m| s[m] * f[m].conj() * ((1.0 + grid.laplace_symbol(m)) * h / n as f64))
                .collect()
        })
        .collect();
    let correlations: Vec<Vec<Complex64>> = spectra
        .iter()
        .map(|c| {
            let mut c = c.clone();
            grid.inverse(&mut c);
            c.iter_mut().for_each(|z| *z *= n as f64);
            c
        })
        .collect();
    let node = (0..n)
        .max_by(|&a, &b| {
            let fa: f64 = correlations.iter().map(|c| c[a].norm()).sum();
            let fb: f64 = correlations.iter().map(|c| c[b].norm()).sum();
            fa.total_cmp(&fb)
        })
        .unwrap_or(0);
    let node_shift = if node > n / 2 { node as f64 - n as f64 } else { node as f64 } * h;
    let node_phases = [0, 1, 2].map(|j| correlations[j][node].arg());

    let k = grid.diff_wavenumbers();
    let inner_at = |y: f64| -> [Complex64; 3] {
        [0, 1, 2].map(|j| {
            spectra[j].iter().zip(k).map(|(c, &km)| c * Complex64::from_polar(1.0, km * y)).sum()
        })
    };
    let objective = |y: f64| -> f64 { inner_at(y).iter().map(|z| z.norm()).sum() };
    let (mut lo, mut hi) = (node_shift - h, node_shift + h);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut fa, mut fb) = (objective(a), objective(b));
    for _ in 0..SHIFT_SEARCH_STEPS {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = objective(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = objective(a);
        }
    }
    let refined = 0.5 * (lo + hi);
    let refined_phases = inner_at(refined).map(|z| z.arg());

    let at_node = aligned_distance(state, reference, node_shift, &node_phases)?;
    let at_refined = aligned_distance(state, reference, refined, &refined_phases)?;
    Ok(if at_refined < at_node {
        OrbitalFit { distance: at_refined, shift: refined, phases: refined_phases }
    } else {
        OrbitalFit { distance: at_node, shift: node_shift, phases: node_phases }
    })
}

/// `||S - e^{i theta} Phi(. - shift)||_Y`.
pub fn aligned_distance(
    state: &State,
    reference: &State,
    shift: f64,
    phases: &[f64; 3],
) -> Result<f64, StabilityError> {
    let aligned = reference.map(|j, f| f.translate(shift).scaled(Complex64::from_polar(1.0, phases[j])));
    Ok(state.y_distance(&aligned)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationKind {
    /// Smooth localized random field in every component.
    RandomH1,
    /// Random field on the occupied components, then each mass restored.
    MassPreservingRandom,
    /// Random real rescaling of each component's own profile.
    ComponentTilt,
}

/// Width of the Gaussian spectral envelope of random perturbations.
const PERTURBATION_BANDWIDTH: f64 = 2.0;

/// `S + amplitude * eta` with `eta` of unit `Y`-norm, deterministic in `seed`.
pub fn perturb(
    state: &State,
    kind: PerturbationKind,
    amplitude: f64,
    seed: u64,
) -> Result<State, StabilityError> {
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return Err(StabilityError::InvalidParameter(format!("amplitude {amplitude} must be non-negative")));
    }
    if amplitude == 0.0 {
        return Ok(state.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let masses = state.masses();
    let eta = match kind {
        PerturbationKind::RandomH1 => state.map(|_, f| random_field(f, &mut rng)),
        PerturbationKind::MassPreservingRandom => state.map(|j, f| {
            if masses[j] > 0.0 {
                random_field(f, &mut rng)
            } else {
                Field::zeros(f.grid())
            }
        }),
        PerturbationKind::ComponentTilt => state.map(|_, f| {
            let c: f64 = StandardNormal.sample(&mut rng);
            f.scaled(Complex64::new(c, 0.0))
        }),
    };
    let norm = eta.y_norm();
    if norm == 0.0 {
        return Ok(state.clone());
    }
    let scale = Complex64::new(amplitude / norm, 0.0);
    let mut out = state.map(|j, f| {
        let mut g = f.clone();
        g.values_mut().iter_mut().zip(eta.component(j).values()).for_each(|(z, e)| *z += scale * e);
        g
    });
    if kind == PerturbationKind::MassPreservingRandom {
        for (j, &target) in masses.iter().enumerate() {
            let now = out.component(j).mass();
            if target > 0.0 && now > 0.0 {
                let c = Complex64::new((target / now).sqrt(), 0.0);
                out.component_mut(j).values_mut().iter_mut().for_each(|z| *z *= c);
            }
        }
    }
    Ok(out)
}

/// Band-limited complex noise with Gaussian envelope `exp(-x^2 / (2 w^2))`,
/// `w = L / 8`.
fn random_field(like: &Field, rng: &mut ChaCha8Rng) -> Field {
    let grid = like.grid();
    let mut coeffs: Vec<Complex64> = grid
        .wavenumbers()
        .iter()
        .map(|&k| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re, im) * (-0.5 * (k / PERTURBATION_BANDWIDTH).powi(2)).exp()
        })
        .collect();
    grid.inverse(&mut coeffs);
    let w = grid.length() / 8.0;
    for (z, &x) in coeffs.iter_mut().zip(grid.nodes()) {
        *z *= (-0.5 * (x / w).powi(2)).exp();
    }
    Field::from_raw(grid, coeffs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Bounded,
    Escaped,
    BlowUp,
}

#[derive(Debug, Clone, Copy)]
pub struct StabilityParams {
    pub kind: PerturbationKind,
    pub delta: f64,
    pub final_time: f64,
    pub dt: f64,
    /// Orbital distance is sampled every this many steps.
    pub sample_every: usize,
    pub eps: f64,
    pub seed: u64,
}

impl StabilityParams {
    /// `eps = max(20 delta, 1e-6)`, samples every 0.1 time units.
    pub fn new(kind: PerturbationKind, delta: f64, final_time: f64, dt: f64, seed: u64) -> Self {
        Self {
            kind,
            delta,
            final_time,
            dt,
            sample_every: ((0.1 / dt).round() as usize).max(1),
            eps: default_eps(delta),
            seed,
        }
    }
}

/// Default verdict threshold for perturbation size `delta`.
pub fn default_eps(delta: f64) -> f64 {
    (20.0 * delta).max(1e-6)
}

#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub delta: f64,
    pub eps: f64,
    pub seed: u64,
    /// Orbital distance of the perturbed initial datum.
    pub initial_distance: f64,
    /// Largest sampled orbital distance (a lower bound on the continuous sup).
    pub sup_distance: f64,
    pub times_sampled: Vec<f64>,
    pub verdict: Verdict,
    pub trace: EvolutionTrace,
    /// The distance fell to less than half its peak after rising well above
    /// its initial value, which suggests drift toward a different minimizer.
    pub orbit_switch_suspected: bool,
}

/// Perturb the ground state, evolve it and sample the orbital distance.
pub fn stability_experiment(
    ground: &GroundState,
    model: &CouplingModel,
    params: &StabilityParams,
) -> Result<StabilityReport, StabilityError> {
    if params.sample_every == 0 {
        return Err(StabilityError::InvalidParameter("sample_every must be at least 1".into()));
    }
    if !(params.eps >= 0.0) {
        return Err(StabilityError::InvalidParameter(format!("eps {} must be non-negative", params.eps)));
    }
    let reference = &ground.profile;
    let start = perturb(reference, params.kind, params.delta, params.seed)?;
    let opts = EvolveOptions { snapshot_every: 0, record_every: params.sample_every };
    let mut samples: Vec<(f64, f64)> = Vec::new();
    let mut failure: Option<StabilityError> = None;
    let result = evolve_with(&start, params.final_time, params.dt, model, &opts, |n, t, s| {
        if n % params.sample_every == 0 && failure.is_none() {
            match orbital_distance(s, reference) {
                Ok(d) => samples.push((t, d)),
                Err(e) => failure = Some(e),
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let (mut trace, blew_up) = match result {
        Ok((trace, end)) => {
            // The last step need not fall on the sampling grid.
            if samples.last().is_none_or(|&(t, _)| t < params.final_time) {
                samples.push((params.final_time, orbital_distance(&end, reference)?));
            }
            (trace, false)
        }
        Err(EvolutionError::BlowUp { trace, .. }) => (*trace, true),
        Err(e) => return Err(e.into()),
    };
    let finite: Vec<f64> = samples.iter().map(|s| s.1).filter(|d| d.is_finite()).collect();
    let sup_distance = finite.iter().cloned().fold(0.0, f64::max);
    let initial_distance = samples.first().map_or(0.0, |s| s.1);
    let verdict = if blew_up {
        Verdict::BlowUp
    } else if sup_distance <= params.eps {
        Verdict::Bounded
    } else {
        Verdict::Escaped
    };
    let orbit_switch_suspected = orbit_switch(&finite, initial_distance);
    let times_sampled = samples.iter().map(|s| s.0).collect();
    trace.orbital_distance = Some(samples);
    Ok(StabilityReport {
        delta: params.delta,
        eps: params.eps,
        seed: params.seed,
        initial_distance,
        sup_distance,
        times_sampled,
        verdict,
        trace,
        orbit_switch_suspected,
    })
}

fn orbit_switch(distances: &[f64], initial: f64) -> bool {
    let Some((peak_at, &peak)) = distances.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) else {
        return false;
    };
    let rose = peak > 2.0 * initial && peak > 1e-8;
    rose && distances[peak_at..].iter().any(|&d| d < 0.5 * peak)
}

/// One experiment per seed, run concurrently. Results keep the seed order.
pub fn stability_ensemble(
    ground: &GroundState,
    model: &CouplingModel,
    params: &StabilityParams,
    seeds: &[u64],
) -> Vec<Result<StabilityReport, StabilityError>> {
    seeds
        .par_iter()
        .map(|&seed| stability_experiment(ground, model, &StabilityParams { seed, ..*params }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{apply_symmetry, equal_coupling_state, Symmetry};
    use crate::spectral::make_grid;
    use proptest::prelude::*;

    fn reference() -> State {
        let g = make_grid(256, 40.0).unwrap();
        let s = equal_coupling_state(1.0, 1.0, 1.0, 2.0, &g).unwrap();
        // Break the component symmetry so phases and shifts are all tested.
        s.map(|j, f| f.scaled(Complex64::new(1.0 + 0.2 * j as f64, 0.0)))
    }

    #[test]
    fn distance_to_itself_vanishes() {
        let s = reference();
        assert!(orbital_distance(&s, &s).unwrap() < 1e-12);
    }

    #[test]
    fn orbit_points_are_at_distance_zero() {
        let s = reference();
        let h = s.grid().spacing();
        let moved = apply_symmetry(&s, &Symmetry { shift: 7.0 * h, phases: [0.3, -2.0, 2.9], ..Default::default() });
        let fit = orbital_fit(&moved, &s).unwrap();
        assert!(fit.distance < 1e-10, "{}", fit.distance);
        assert!((fit.shift - 7.0 * h).abs() < 1e-6 * h);
    }

    #[test]
    fn small_random_perturbation_is_seen() {
        let s = reference();
        let p = perturb(&s, PerturbationKind::RandomH1, 1e-3, 11).unwrap();
        assert!((p.y_distance(&s).unwrap() - 1e-3).abs() < 1e-12);
        let fit = orbital_fit(&p, &s).unwrap();
        assert!((5e-4..=2e-3).contains(&fit.distance), "{}", fit.distance);

        // Brute force over a coarse lattice of shifts and phases.
        let mut brute = f64::INFINITY;
        for shift in -4..=4 {
            for a in 0..16 {
                let th = a as f64 * std::f64::consts::TAU / 16.0;
                let d = aligned_distance(&p, &s, shift as f64 * s.grid().spacing(), &[th; 3]).unwrap();
                brute = brute.min(d);
            }
        }
        assert!(fit.distance <= brute + 1e-12);
    }

    #[test]
    fn mass_preserving_perturbation_keeps_masses() {
        let s = reference();
        let p = perturb(&s, PerturbationKind::MassPreservingRandom, 1e-2, 3).unwrap();
        for (a, b) in p.masses().iter().zip(s.masses()) {
            assert!((a - b).abs() <= 1e-12 * b);
        }
        let d = p.y_distance(&s).unwrap();
        assert!((5e-3..=2e-2).contains(&d), "{d}");
    }

    #[test]
    fn perturbations_are_deterministic() {
        let s = reference();
        for kind in [PerturbationKind::RandomH1, PerturbationKind::MassPreservingRandom, PerturbationKind::ComponentTilt] {
            let a = perturb(&s, kind, 1e-2, 99).unwrap();
            let b = perturb(&s, kind, 1e-2, 99).unwrap();
            assert_eq!(a.max_distance(&b).unwrap(), 0.0);
        }
        let zero = perturb(&s, PerturbationKind::RandomH1, 0.0, 1).unwrap();
        assert_eq!(zero.max_distance(&s).unwrap(), 0.0);
        assert!(perturb(&s, PerturbationKind::RandomH1, -1.0, 1).is_err());
    }

    mod experiments {
        use super::*;
        use crate::ground_state::{minimize, refine_fixed_point, SolverConfig};
        use crate::model::MassTriple;

        fn triple() -> (GroundState, CouplingModel) {
            let g = make_grid(1024, 40.0).unwrap();
            let m = CouplingModel::uniform(1.0, 2.0).unwrap();
            let masses = MassTriple::new(4.0 / 3.0, 4.0 / 3.0, 4.0 / 3.0).unwrap();
            let rough = minimize(&m, &masses, &g, &SolverConfig::default()).unwrap();
            (refine_fixed_point(&rough.profile, &m, &masses).unwrap(), m)
        }

        #[test]
        fn unperturbed_run_shows_only_splitting_error() {
            let (gs, m) = triple();
            let coarse = stability_experiment(&gs, &m, &StabilityParams::new(PerturbationKind::RandomH1, 0.0, 10.0, 1e-3, 0)).unwrap();
            let fine = stability_experiment(&gs, &m, &StabilityParams::new(PerturbationKind::RandomH1, 0.0, 10.0, 5e-4, 0)).unwrap();
            assert_eq!(coarse.initial_distance, 0.0);
            assert!(fine.sup_distance <= 1e-6, "{}", fine.sup_distance);
            assert_eq!(fine.verdict, Verdict::Bounded);
            let ratio = coarse.sup_distance / fine.sup_distance;
            assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
            assert_eq!(coarse.times_sampled.len(), 101);
        }

        #[test]
        fn small_perturbation_stays_close() {
            let (gs, m) = triple();
            let rep = stability_experiment(&gs, &m, &StabilityParams::new(PerturbationKind::RandomH1, 1e-3, 50.0, 1e-3, 7)).unwrap();
            assert_eq!(rep.verdict, Verdict::Bounded);
            assert!(rep.sup_distance <= 1e-2);
            let q = rep.trace.max_mass_drift();
            assert!(q.iter().all(|&d| d <= 1e-12 * 50_000.0));
            assert!(rep.trace.max_energy_drift() <= 1e-8);
        }

        #[test]
        fn distance_grows_with_delta_but_stays_proportional() {
            let (gs, m) = triple();
            let seeds = [1, 2, 3, 4, 5];
            let control = stability_experiment(&gs, &m, &StabilityParams::new(PerturbationKind::MassPreservingRandom, 0.0, 10.0, 1e-3, 0)).unwrap();
            let mut previous = vec![control.sup_distance; seeds.len()];
            for delta in [1e-3, 1e-2] {
                let params = StabilityParams::new(PerturbationKind::MassPreservingRandom, delta, 10.0, 1e-3, 0);
                let reports: Vec<StabilityReport> = stability_ensemble(&gs, &m, &params, &seeds).into_iter().map(Result::unwrap).collect();
                for (rep, prev) in reports.iter().zip(previous.iter_mut()) {
                    assert!(rep.sup_distance <= 10.0 * delta, "delta {delta}: {}", rep.sup_distance);
                    assert!(rep.sup_distance >= *prev);
                    *prev = rep.sup_distance;
                }
            }
        }

        #[test]
        fn blow_up_becomes_a_verdict() {
            let g = make_grid(64, 20.0).unwrap();
            let m = CouplingModel::uniform(1.0, 2.9).unwrap();
            let huge = Field::from_real(&g, |x| 1e200 * (-x * x).exp());
            let profile = State::new(huge.clone(), huge.clone(), huge).unwrap();
            let masses = profile.masses();
            let gs = GroundState {
                profile,
                multipliers: crate::model::Multipliers { omega: [1.0; 3] },
                lambda: -1.0,
                residual: 0.0,
                iterations: 0,
                masses_achieved: masses,
                targets: MassTriple::new(1.0, 1.0, 1.0).unwrap(),
                energy_history: Vec::new(),
            };
            let rep = stability_experiment(&gs, &m, &StabilityParams::new(PerturbationKind::RandomH1, 0.0, 0.1, 1e-2, 0)).unwrap();
            assert_eq!(rep.verdict, Verdict::BlowUp);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn distance_is_a_pseudometric(seed_a in 0u64..1000, seed_b in 0u64..1000, shift in -30i32..30, phase in -3.0f64..3.0) {
            let s = reference();
            let a = perturb(&s, PerturbationKind::RandomH1, 0.05, seed_a).unwrap();
            let b = perturb(&s, PerturbationKind::RandomH1, 0.05, seed_b).unwrap();
            let dab = orbital_distance(&a, &b).unwrap();
            let dba = orbital_distance(&b, &a).unwrap();
            prop_assert!((dab - dba).abs() <= 1e-9);

            let sym = Symmetry { shift: shift as f64 * s.grid().spacing(), phases: [phase, 2.0 * phase, -phase], ..Default::default() };
            let moved = orbital_distance(&apply_symmetry(&a, &sym), &apply_symmetry(&b, &sym)).unwrap();
            prop_assert!((moved - dab).abs() <= 1e-9);

            let dsa = orbital_distance(&s, &a).unwrap();
            let dsb = orbital_distance(&s, &b).unwrap();
            prop_assert!(dab <= dsa + dsb + 1e-9);
        }

        #[test]
        fn analytic_phase_beats_phase_grid(seed in 0u64..1000, shift in -20.0f64..20.0) {
            let s = reference();
            let shift = shift * s.grid().spacing();
            let p = perturb(&s, PerturbationKind::RandomH1, 0.3, seed).unwrap();
            let mut best = [0.0; 3];
            for (j, b) in best.iter_mut().enumerate() {
                let rolled = s.component(j).translate(shift);
                *b = crate::spectral::h1_inner(p.component(j), &rolled).unwrap().arg();
            }
            let analytic = aligned_distance(&p, &s, shift, &best).unwrap();
            for a in 0..64 {
                let th = a as f64 * std::f64::consts::TAU / 64.0;
                for j in 0..3 {
                    let mut phases = best;
                    phases[j] = th;
                    let d = aligned_distance(&p, &s, shift, &phases).unwrap();
                    prop_assert!(analytic <= d + 1e-12);
                }
            }
        }
    }
}
