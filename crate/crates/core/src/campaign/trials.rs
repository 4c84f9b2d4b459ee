//! One Monte Carlo trial per experiment. Each returns its metric row (in
//! the order of [`Experiment::columns`]) plus optional long-form rows.

use faer::{c64, Mat};

use super::{Experiment, Point, Tolerances};
use crate::correlations::{
    boundary_operator, correlation_direct, correlation_length_fit, correlation_profile_transfer, default_window,
    Observable,
};
use crate::error::{Error, Result};
use crate::expander::{
    expander_report, fixed_point, iterate_channel, normalize_channel, sigma, two_to_two_distance, Normalization,
};
use crate::parent_ham::{
    commutator_norm, hamiltonian_dense, hamiltonian_gap, hamiltonian_gap_full, h_squared_margin,
    mps_parent_hamiltonian, peps_parent_hamiltonian,
};
use crate::rand_gauss::{sample_complex_gaussian_matrix, sample_mps_tensor, sample_peps_tensor, SeedSpec};
use crate::spectral::{dot, hermitian_eigenvalues, matvec, operator_norm, upper_gap_dense, LinearOperator};
use crate::tensors::mps_state;
use crate::transfer::{
    apply_cp, deflated_norms, mps_transfer, peps_as_mps, peps_transfer, peps_transfer_independent, psi_vector,
    trace_power, transfer_gap, TransferOperator,
};

pub(crate) struct TrialOutput {
    pub metrics: Vec<f64>,
    pub extra: Vec<Vec<String>>,
}

const NAN: f64 = f64::NAN;

pub(crate) fn run_trial(exp: Experiment, p: &Point, seed: &SeedSpec, tol: &Tolerances) -> Result<TrialOutput> {
    let plain = |metrics| Ok(TrialOutput { metrics, extra: Vec::new() });
    match exp {
        Experiment::MpsGap => plain(mps_gap(p, seed)?),
        Experiment::OverlapCheck => plain(overlap_check(p, seed)?),
        Experiment::TraceCheck => plain(trace_check(p, seed)?),
        Experiment::WishartCheck => plain(wishart_check(p, seed)?),
        Experiment::PepsGap => plain(peps_gap(p, seed, false)?),
        Experiment::PepsGapIndependent => plain(peps_gap(p, seed, true)?),
        Experiment::PepsCpCheck => plain(peps_cp_check(p, seed)?),
        Experiment::ParentGapMps => plain(parent_gap_mps(p, seed, tol)?),
        Experiment::ParentGapPeps => plain(parent_gap_peps(p, seed)?),
        Experiment::Correlations => correlations(p, seed, tol),
        Experiment::Expander => expander(p, seed, tol),
    }
}

fn n_of(p: &Point) -> Result<usize> {
    p.n.ok_or_else(|| Error::invalid("N is required"))
}

/// `(|T(Id) - Id|, lambda_min T(Id))`.
fn cp_identity(t: &TransferOperator) -> Result<(f64, f64)> {
    let n = t.space_dim();
    let id = Mat::<c64>::identity(n, n);
    let img = apply_cp(t, id.as_ref())?;
    let dev = operator_norm((&img - &id).as_ref())?;
    Ok((dev, hermitian_eigenvalues(img.as_ref())?[0]))
}

fn overlap_raw(t: &TransferOperator) -> c64 {
    let psi = psi_vector(t);
    let mut y = vec![c64::new(0.0, 0.0); psi.len()];
    t.apply(&psi, &mut y);
    dot(&psi, &y)
}

fn gap_metrics(t: &TransferOperator) -> Result<Vec<f64>> {
    let (s, cert) = transfer_gap(t)?;
    let (dr, dl) = deflated_norms(t)?;
    let (dev, lmin) = cp_identity(t)?;
    let ov = overlap_raw(t);
    let m = t.matrix_form()?;
    let tr = (0..m.nrows()).map(|i| m[(i, i)].re).sum::<f64>();
    Ok(vec![
        s.lambda1.re,
        s.lambda1.im,
        s.lambda2_modulus,
        s.gap,
        s.s1,
        s.s2,
        ov.re,
        dr,
        dl,
        dev,
        lmin,
        tr,
        cert.delta,
        cert.epsilon,
        cert.eta,
        cert.bound,
        if cert.applicable { 1.0 } else { 0.0 },
    ])
}

fn mps_gap(p: &Point, seed: &SeedSpec) -> Result<Vec<f64>> {
    let t = mps_transfer(&sample_mps_tensor(seed, p.d, p.bond_dim)?);
    gap_metrics(&t)
}

fn overlap_check(p: &Point, seed: &SeedSpec) -> Result<Vec<f64>> {
    let t = mps_transfer(&sample_mps_tensor(seed, p.d, p.bond_dim)?);
    let v = overlap_raw(&t);
    Ok(vec![v.re, v.im])
}

fn trace_check(p: &Point, seed: &SeedSpec) -> Result<Vec<f64>> {
    // Tr(T) = sum_x |Tr G_x|^2 / d straight from the slices.
    let tensor = sample_mps_tensor(seed, p.d, p.bond_dim)?;
    let tr = (0..p.d)
        .map(|x| (0..p.bond_dim).map(|a| tensor.entry(x, a, a)).sum::<c64>().norm_sqr())
        .sum::<f64>();
    Ok(vec![tr])
}

fn wishart_check(p: &Point, seed: &SeedSpec) -> Result<Vec<f64>> {
    // D W with W the two-site site-map Gram matrix is (1/s) G*G for a
    // d x D^2 standard Ginibre G: a Wishart matrix with n = D^2, s = d.
    let tensor = sample_mps_tensor(seed, p.d, p.bond_dim)?;
    let n = p.bond_dim * p.bond_dim;
    let w = crate::parent_ham::w_operator(&tensor) * faer::Scale(c64::new(p.bond_dim as f64, 0.0));
    let dev = operator_norm((w - Mat::<c64>::identity(n, n)).as_ref())?;
    Ok(vec![n as f64, p.d as f64, dev])
}

fn peps_gap(p: &Point, seed: &SeedSpec, independent: bool) -> Result<Vec<f64>> {
    let n = n_of(p)?;
    let (t, tilde) = if independent {
        let ts = (0..n)
            .map(|i| sample_peps_tensor(&seed.child(&format!("row{i}")), p.d, p.bond_dim))
            .collect::<Result<Vec<_>>>()?;
        (peps_transfer_independent(&ts)?, None)
    } else {
        let a = sample_peps_tensor(seed, p.d, p.bond_dim)?;
        (peps_transfer(&a, n)?, Some(mps_transfer(&peps_as_mps(&a))))
    };
    let mut out = gap_metrics(&t)?;
    let m = t.matrix_form()?;
    // <psi^N|T_N|psi^N> = Tr(T~^N)
    let tilde_err = match tilde {
        Some(tt) => {
            let ov = overlap_raw(&t);
            let tr = trace_power(tt.matrix_form()?.as_ref(), n);
            (ov - tr).norm() / tr.norm().max(f64::MIN_POSITIVE)
        }
        None => NAN,
    };
    let real_trace = (1..=4)
        .map(|k| {
            let z = trace_power(m.as_ref(), k);
            z.im.abs() / z.norm().max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max);
    // Kraus application against the matrix form on a random input.
    let dim = t.space_dim();
    let x = sample_complex_gaussian_matrix(&seed.child("probe"), dim, dim, 1.0)?;
    let y = apply_cp(&t, x.as_ref())?;
    let xv: Vec<c64> = (0..dim * dim).map(|ij| x[(ij / dim, ij % dim)]).collect();
    let yv = matvec(m.as_ref(), &xv);
    let scale = yv.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let kraus_err = (0..dim * dim).map(|ij| (y[(ij / dim, ij % dim)] - yv[ij]).norm()).fold(0.0, f64::max) / scale;
    out.extend([tilde_err, real_trace, kraus_err]);
    Ok(out)
}

fn peps_cp_check(p: &Point, seed: &SeedSpec) -> Result<Vec<f64>> {
    let t = peps_transfer(&sample_peps_tensor(seed, p.d, p.bond_dim)?, n_of(p)?)?;
    let (dev, lmin) = cp_identity(&t)?;
    Ok(vec![dev, lmin])
}

fn parent_gap_mps(p: &Point, seed: &SeedSpec, tol: &Tolerances) -> Result<Vec<f64>> {
    let n = n_of(p)?;
    let tensor = sample_mps_tensor(seed, p.d, p.bond_dim)?;
    let h = mps_parent_hamiltonian(&tensor, n)?;
    let comm = commutator_norm(&h.horizontal)?;
    let spec = hamiltonian_gap(&h)?;
    // The gap may come from the reduced space; the dense checks need the full one.
    let dim = h.dim().unwrap_or(usize::MAX);
    let (dense_err, dense_min) = if dim <= tol.dense_check_max_dim() {
        let ev = hermitian_eigenvalues(hamiltonian_dense(&h)?.as_ref())?;
        let full = hamiltonian_gap_full(&h)?;
        let err = (full.gap - ev[1]).abs().max((spec.gap - ev[1]).abs());
        (err, ev[0])
    } else {
        (NAN, NAN)
    };
    let h2 = if dim <= tol.h2_max_dim() { h_squared_margin(&h, comm)? } else { NAN };
    let pr = &h.horizontal;
    Ok(vec![
        pr.rank as f64,
        pr.expected_rank as f64,
        pr.p_tilde_distance,
        comm,
        spec.ground_energy,
        spec.gap,
        if spec.reduced { 1.0 } else { 0.0 },
        spec.residual,
        dense_err,
        dense_min,
        h2,
    ])
}

fn parent_gap_peps(p: &Point, seed: &SeedSpec) -> Result<Vec<f64>> {
    let n = n_of(p)?;
    let tensor = sample_peps_tensor(seed, p.d, p.bond_dim)?;
    let h = peps_parent_hamiltonian(&tensor, n)?;
    let v = h.vertical.as_ref().expect("torus has vertical projectors");
    let ch = commutator_norm(&h.horizontal)?;
    let cv = commutator_norm(v)?;
    let spec = hamiltonian_gap(&h)?;
    Ok(vec![
        h.horizontal.rank as f64,
        v.rank as f64,
        h.horizontal.expected_rank as f64,
        h.horizontal.p_tilde_distance,
        v.p_tilde_distance,
        ch,
        cv,
        spec.ground_energy,
        spec.gap,
        if spec.reduced { 1.0 } else { 0.0 },
        spec.residual,
    ])
}

fn median(mut v: Vec<f64>) -> f64 {
    v.retain(|x| !x.is_nan());
    if v.is_empty() {
        return NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

fn correlations(p: &Point, seed: &SeedSpec, tol: &Tolerances) -> Result<TrialOutput> {
    let n = n_of(p)?;
    if n < 3 {
        return Err(Error::invalid("correlations need N >= 3"));
    }
    let tensor = sample_mps_tensor(seed, p.d, p.bond_dim)?;
    let t = mps_transfer(&tensor);
    let m = t.matrix_form()?;
    let s = upper_gap_dense(m.as_ref())?;
    let l1 = s.lambda1.norm();
    let r = s.lambda2_modulus / l1;
    let obs = Observable::probe_family(&seed.child("obs"), p.d, tol.random_observables())?;
    let bos = obs.iter().map(|o| boundary_operator(&t, o)).collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(usize, usize)> = (0..tol.observable_pairs()).map(|i| (i % obs.len(), (i + 1) % obs.len())).collect();
    let state = match p.d.checked_pow(n as u32) {
        Some(total) if (total as f64) <= tol.path_check_limit() => Some(mps_state(&tensor, n)?),
        _ => None,
    };
    let cap = tol.fit_cap().unwrap_or((n - 2) / 2);
    let env_k = 8.min(n - 2);
    let mut rates = Vec::new();
    let mut fit_failures = 0usize;
    let mut env_violations = 0usize;
    let mut decay_ratio = 0.0f64;
    let mut path_err = if state.is_some() { 0.0f64 } else { NAN };
    let mut extra = Vec::new();
    for &(i, j) in &pairs {
        let g = correlation_profile_transfer(m.as_ref(), bos[i].as_ref(), bos[j].as_ref(), n)?;
        let window = default_window(&g, Some(cap));
        match correlation_length_fit(&g, window) {
            Ok(f) => rates.push(f.rate),
            Err(_) => fit_failures += 1,
        }
        env_violations += (0..=env_k).filter(|&k| g[k] > g[0] * (3.0 * r).powi(k as i32)).count();
        for k in window.0..=window.1 {
            if k + 2 <= window.1 && g[k] > 0.0 {
                decay_ratio = decay_ratio.max(g[k + 2] / g[k] / (4.0 * r * r));
            }
        }
        if let Some(st) = &state {
            for (k, gk) in g.iter().enumerate() {
                let direct = correlation_direct(st, &obs[i], &[0], &obs[j], &[k + 1])?;
                path_err = path_err.max((direct - gk).abs());
            }
        }
        let id = format!("{}|{}", obs[i].label, obs[j].label);
        for (k, gk) in g.iter().enumerate() {
            extra.push(vec![
                seed.derived_seed().to_string(),
                p.d.to_string(),
                p.bond_dim.to_string(),
                n.to_string(),
                k.to_string(),
                (k + 1).to_string(),
                id.clone(),
                super::fmt_real(*gk),
                super::fmt_real(r),
            ]);
        }
    }
    let target = -r.ln();
    let med = median(rates);
    Ok(TrialOutput {
        metrics: vec![
            l1,
            r,
            s.gap / l1,
            med,
            target,
            med / target - 1.0,
            fit_failures as f64,
            env_violations as f64,
            decay_ratio,
            path_err,
            pairs.len() as f64,
        ],
        extra,
    })
}

fn expander(p: &Point, seed: &SeedSpec, tol: &Tolerances) -> Result<TrialOutput> {
    let t = mps_transfer(&sample_mps_tensor(seed, p.d, p.bond_dim)?);
    let dd = p.bond_dim;
    let sig = sigma(&t);
    let sigma_dev = operator_norm((sig - Mat::<c64>::identity(dd, dd)).as_ref())?;
    let ch = normalize_channel(&t, Normalization::TracePreserving)?;
    let fp = fixed_point(&ch, tol.fixed_point_tol(), tol.fixed_point_max_iter())?;
    let rep = expander_report(&ch, &fp)?;
    let mut rho0 = Mat::<c64>::zeros(dd, dd);
    rho0[(0, 0)] = c64::new(1.0, 0.0);
    let steps = tol.iterate_steps();
    let traj = iterate_channel(&ch, rho0.as_ref(), steps, &fp)?;
    let d0 = traj.distances[0];
    let floor = tol.iterate_floor();
    let mut violations = 0usize;
    let mut extra = Vec::new();
    for (s, &dist) in traj.distances.iter().enumerate() {
        let bound = 2.0 * rep.eps.powi(s as i32) * d0;
        if dist > bound + floor {
            violations += 1;
        }
        extra.push(vec![
            seed.derived_seed().to_string(),
            p.d.to_string(),
            dd.to_string(),
            s.to_string(),
            super::fmt_real(dist),
            super::fmt_real(bound),
        ]);
    }
    let dist22 = if dd <= tol.distance_max_bond() { two_to_two_distance(&ch, &t)? } else { NAN };
    Ok(TrialOutput {
        metrics: vec![
            sigma_dev,
            ch.tp_residual,
            rep.eps,
            fp.purity,
            rep.m_lower,
            rep.k as f64,
            fp.iterations as f64,
            fp.residual,
            violations as f64,
            traj.trace_drift,
            dist22,
        ],
        extra,
    })
}
