//! Comparison methods and the slice-inversion symmetrization.
//!
//! * [`orthogonalized_als_random`]: the same sweep as [`asi_step`] from
//!   Haar-random starts.
//! * [`simultaneous_power_iteration`]: a sampled slice mix, matrix subspace
//!   iteration, then symmetric tensor subspace iteration.
//! * [`rank1_power_deflation`]: sequential rank-one power iteration with
//!   deflation.
//! * [`symmetrize`] and the slice condition number, which show why inverting
//!   a slice is a poor route to a symmetric problem.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::decomposition::{asi_step, oracle_angles, oracle_errors, recover_weights, trace_row, CpModel};
use crate::error::{Error, Result};
use crate::linalg::{
    condition_number, haar_random_orthonormal, matrix_subspace_iteration, principal_angles, qr_orthonormalize,
    OrthonormalBasis,
};
use crate::precise::{self, DoubleDouble, PreciseMatrix};
use crate::tensor::{normalize, random_unit, Matrix, Tensor3, Vector};
use crate::trace::{IterationTrace, TraceRow};

/// Relative asymmetry above which the symmetric methods refuse a tensor.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Slice condition number above which [`symmetrize`] gives up.
pub const SINGULAR_SLICE_COND: f64 = 1e12;

/// Decomposition methods known to the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "s-asi")]
    SAsi,
    #[serde(rename = "r-als")]
    RAls,
    #[serde(rename = "spi")]
    Spi,
    #[serde(rename = "rank1-deflation")]
    Rank1Deflation,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::SAsi, Method::RAls, Method::Spi, Method::Rank1Deflation];

    pub fn tag(self) -> &'static str {
        match self {
            Method::SAsi => "s-asi",
            Method::RAls => "r-als",
            Method::Spi => "spi",
            Method::Rank1Deflation => "rank1-deflation",
        }
    }

    /// Stream tag mixed into per-trial seeds.
    pub(crate) fn stream(self) -> u64 {
        match self {
            Method::SAsi => 2,
            Method::RAls => 3,
            Method::Spi => 4,
            Method::Rank1Deflation => 5,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?}")))
    }
}

/// One component found by deflation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankOneComponent {
    pub weight: f64,
    pub vector: Vec<f64>,
    /// Power iteration hit `inner_iters` without settling, or found nothing.
    pub flagged: bool,
    pub iterations: usize,
}

/// Output of a baseline run.
///
/// The trace holds `iterations + 1` rows for the iterative methods (row 0 is
/// the starting state) and `deflations + 1` rows for deflation.
#[derive(Debug, Clone)]
pub struct BaselineReport {
    pub method: Method,
    /// Sorted by decreasing `|λ|`; absent for deflation, whose vectors are
    /// only approximately orthonormal.
    pub model: Option<CpModel>,
    /// Deflation components in recovery order.
    pub components: Vec<RankOneComponent>,
    pub trace: IterationTrace,
    pub iterations: usize,
    pub deflations: usize,
}

fn permute_columns(q: &OrthonormalBasis, order: &[usize]) -> OrthonormalBasis {
    let m = q.matrix();
    let cols: Vec<_> = order.iter().map(|&j| m.column(j).into_owned()).collect();
    OrthonormalBasis::new(Matrix::from_columns(&cols)).expect("column permutation keeps orthonormality")
}

/// Reorders the three bases by decreasing `|T(a_i, b_i, c_i)|`.
fn order_by_weight(
    t: &Tensor3,
    qa: &OrthonormalBasis,
    qb: &OrthonormalBasis,
    qc: &OrthonormalBasis,
) -> (OrthonormalBasis, OrthonormalBasis, OrthonormalBasis, Vec<f64>) {
    let w = recover_weights(t, qa, qb, qc);
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&i, &j| w[j].abs().total_cmp(&w[i].abs()));
    let lambda = order.iter().map(|&i| w[i]).collect();
    (
        permute_columns(qa, &order),
        permute_columns(qb, &order),
        permute_columns(qc, &order),
        lambda,
    )
}

fn sorted_row(
    t: &Tensor3,
    bases: [&OrthonormalBasis; 3],
    iter: usize,
    truth: Option<&CpModel>,
    start: Instant,
) -> Result<TraceRow> {
    let (a, b, c, _) = order_by_weight(t, bases[0], bases[1], bases[2]);
    trace_row(t, [&a, &b, &c], iter, truth, start)
}

fn check_rank(t: &Tensor3, r: usize) -> Result<usize> {
    let d = t.cubical_dim()?;
    if r == 0 || r > d {
        return Err(Error::InvalidArgument(format!("target rank {r} outside 1..={d}")));
    }
    Ok(d)
}

fn check_symmetric(t: &Tensor3) -> Result<()> {
    let asym = t.relative_asymmetry()?;
    if asym > SYMMETRY_TOL {
        return Err(Error::InvalidArgument(format!(
            "tensor is not symmetric (relative asymmetry {asym:e})"
        )));
    }
    Ok(())
}

/// Randomly initialized orthogonalized ALS: `K` sweeps of [`asi_step`] from
/// three independent Haar bases.
pub fn orthogonalized_als_random<R: Rng + ?Sized>(
    t: &Tensor3,
    r: usize,
    iters: usize,
    rng: &mut R,
    truth: Option<&CpModel>,
) -> Result<BaselineReport> {
    let d = check_rank(t, r)?;
    if iters == 0 {
        return Err(Error::InvalidArgument("the number of sweeps must be at least 1".into()));
    }
    let start = Instant::now();
    let mut qa = haar_random_orthonormal(d, r, rng);
    let mut qb = haar_random_orthonormal(d, r, rng);
    let mut qc = haar_random_orthonormal(d, r, rng);
    let mut trace = IterationTrace::new();
    trace.push(sorted_row(t, [&qa, &qb, &qc], 0, truth, start)?);
    for k in 1..=iters {
        (qa, qb, qc) = asi_step(t, &qa, &qb, &qc)?;
        trace.push(sorted_row(t, [&qa, &qb, &qc], k, truth, start)?);
    }
    let (a, b, c, lambda) = order_by_weight(t, &qa, &qb, &qc);
    Ok(BaselineReport {
        method: Method::RAls,
        model: Some(CpModel::new(lambda, a, b, c)?),
        components: Vec::new(),
        trace,
        iterations: iters,
        deflations: 0,
    })
}

/// Settings for [`simultaneous_power_iteration`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpiOptions {
    /// Gaussian samples `L` averaged into the slice mix.
    pub samples: usize,
    /// Matrix subspace iterations `J`.
    pub matrix_iters: usize,
    /// Tensor subspace iterations `K`.
    pub tensor_iters: usize,
}

impl SpiOptions {
    /// `L = d`, `J = 25`, `K = 30`.
    pub fn for_dim(d: usize) -> Self {
        Self {
            samples: d,
            matrix_iters: 25,
            tensor_iters: 30,
        }
    }
}

/// Simultaneous power iteration for symmetric tensors.
///
/// Averages `w̄ = (1/L) Σ T(I, w_l, w_l)` over Gaussian `w_l`, runs `J`
/// subspace iterations on `T(I, I, w̄)`, then `K` iterations of
/// `Q ← qr([T(I, q_j, q_j)]_j)`.
pub fn simultaneous_power_iteration<R: Rng + ?Sized>(
    t: &Tensor3,
    r: usize,
    opts: &SpiOptions,
    rng: &mut R,
    truth: Option<&CpModel>,
) -> Result<BaselineReport> {
    let d = check_rank(t, r)?;
    check_symmetric(t)?;
    if opts.samples == 0 {
        return Err(Error::InvalidArgument("at least one sample is required".into()));
    }
    let start = Instant::now();
    let mut wbar = Vector::zeros(d);
    for _ in 0..opts.samples {
        let w = Vector::from_fn(d, |_, _| StandardNormal.sample(rng));
        wbar += t.contract_modes_23(w.as_slice(), w.as_slice());
    }
    wbar /= opts.samples as f64;
    let mix = t.contract_mode3(wbar.as_slice());
    let q0 = haar_random_orthonormal(d, r, rng);
    let mut q = matrix_subspace_iteration(&mix, r, opts.matrix_iters, &q0)?;

    let mut trace = IterationTrace::new();
    trace.push(sorted_row(t, [&q, &q, &q], 0, truth, start)?);
    for k in 1..=opts.tensor_iters {
        let mut y = Matrix::zeros(d, r);
        for j in 0..r {
            y.set_column(j, &t.contract_modes_23(q.column(j), q.column(j)));
        }
        q = qr_orthonormalize(&y)?.0;
        trace.push(sorted_row(t, [&q, &q, &q], k, truth, start)?);
    }
    let (a, _, _, lambda) = order_by_weight(t, &q, &q, &q);
    Ok(BaselineReport {
        method: Method::Spi,
        model: Some(CpModel::symmetric(lambda, a)?),
        components: Vec::new(),
        trace,
        iterations: opts.tensor_iters,
        deflations: 0,
    })
}

/// Settings for [`rank1_power_deflation`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeflationOptions {
    /// Components to extract.
    pub components: usize,
    /// Power iterations per start.
    pub inner_iters: usize,
    /// Random starts per component; the largest `|λ|` wins.
    pub restarts: usize,
}

/// Step size below which a power iteration counts as settled.
const POWER_TOL: f64 = 1e-12;

fn power_iteration<R: Rng + ?Sized>(t: &Tensor3, inner_iters: usize, rng: &mut R) -> RankOneComponent {
    let d = t.dims()[0];
    let mut v = random_unit(d, rng);
    for it in 1..=inner_iters {
        let mut next = t.contract_modes_23(v.as_slice(), v.as_slice());
        if !normalize(&mut next) {
            return RankOneComponent {
                weight: 0.0,
                vector: v.as_slice().to_vec(),
                flagged: true,
                iterations: it,
            };
        }
        let step = (&next - &v).norm();
        v = next;
        if step <= POWER_TOL {
            return RankOneComponent {
                weight: t.contract_all(v.as_slice(), v.as_slice(), v.as_slice()),
                vector: v.as_slice().to_vec(),
                flagged: false,
                iterations: it,
            };
        }
    }
    RankOneComponent {
        weight: t.contract_all(v.as_slice(), v.as_slice(), v.as_slice()),
        vector: v.as_slice().to_vec(),
        flagged: true,
        iterations: inner_iters,
    }
}

fn deflation_row(
    found: &[RankOneComponent],
    residual: f64,
    r: usize,
    truth: Option<&CpModel>,
    start: Instant,
) -> TraceRow {
    let m = found.len().min(r);
    let mut tan = None;
    let mut err = None;
    if let Some(truth) = truth.filter(|t| m > 0 && t.rank() >= m) {
        let mut order: Vec<usize> = (0..found.len()).collect();
        order.sort_by(|&i, &j| found[j].weight.abs().total_cmp(&found[i].weight.abs()));
        let cols: Vec<Vector> = order[..m]
            .iter()
            .map(|&i| Vector::from_column_slice(&found[i].vector))
            .collect();
        let raw = Matrix::from_columns(&cols);
        let top = truth.leading(m).ok();
        if let (Some(top), Ok((q, _))) = (top, qr_orthonormalize(&raw)) {
            let t = [0, 1, 2].map(|f| principal_angles(&top.factors()[f].leading(m), &q).tan);
            let e = [0, 1, 2].map(|f| {
                let u = top.factors()[f].matrix();
                (0..m)
                    .map(|j| {
                        let s = if raw.column(j).dot(&u.column(j)) < 0.0 {
                            -1.0
                        } else {
                            1.0
                        };
                        (raw.column(j) * s - u.column(j)).norm()
                    })
                    .fold(0.0, f64::max)
            });
            tan = Some(t);
            err = Some(e);
        }
    }
    TraceRow {
        iter: found.len(),
        tan,
        err,
        residual,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    }
}

/// Rank-one power iteration with deflation on a symmetric tensor.
///
/// For each component the best of `restarts` power iterations
/// `v ← T(I, v, v) / ‖T(I, v, v)‖` is kept and `λ v ⊗ v ⊗ v` is subtracted.
/// Components stay in recovery order. Trace row `k` holds the deflated
/// tensor's norm after `k` deflations; its oracle columns compare the
/// `min(k, r)` largest recovered components with the leading truth factors,
/// where `r` is the requested component count.
pub fn rank1_power_deflation<R: Rng + ?Sized>(
    t: &Tensor3,
    opts: &DeflationOptions,
    rng: &mut R,
    truth: Option<&CpModel>,
) -> Result<BaselineReport> {
    check_rank(t, opts.components)?;
    check_symmetric(t)?;
    if opts.inner_iters == 0 || opts.restarts == 0 {
        return Err(Error::InvalidArgument(
            "inner_iters and restarts must be positive".into(),
        ));
    }
    let start = Instant::now();
    let mut work = t.clone();
    let mut found: Vec<RankOneComponent> = Vec::with_capacity(opts.components);
    let mut trace = IterationTrace::new();
    trace.push(deflation_row(
        &found,
        work.frobenius_norm(),
        opts.components,
        truth,
        start,
    ));
    for _ in 0..opts.components {
        let mut best: Option<RankOneComponent> = None;
        for _ in 0..opts.restarts {
            let cand = power_iteration(&work, opts.inner_iters, rng);
            let better = match &best {
                None => true,
                Some(b) => {
                    (b.flagged && !cand.flagged) || (b.flagged == cand.flagged && cand.weight.abs() > b.weight.abs())
                }
            };
            if better {
                best = Some(cand);
            }
        }
        let comp = best.expect("restarts is positive");
        work.add_rank_one(-comp.weight, &comp.vector, &comp.vector, &comp.vector);
        found.push(comp);
        trace.push(deflation_row(
            &found,
            work.frobenius_norm(),
            opts.components,
            truth,
            start,
        ));
    }
    Ok(BaselineReport {
        method: Method::Rank1Deflation,
        model: None,
        deflations: found.len(),
        iterations: found.iter().map(|c| c.iterations).sum(),
        components: found,
        trace,
    })
}

/// `T(I, I, a)`, the slice mix inverted by [`symmetrize`].
pub fn slice_mix(t: &Tensor3, a: &[f64]) -> Matrix {
    t.contract_mode3(a)
}

/// Condition number of `T(I, I, a)`; `+∞` when it is singular.
pub fn slice_condition_number(t: &Tensor3, a: &[f64]) -> f64 {
    condition_number(&slice_mix(t, a))
}

/// Symmetrizes `t` by slice inversion.
///
/// With `S = T(I, I, a)`, the maps `M_a = T(b, I, I)ᵀ S⁻¹` and
/// `M_b = T(I, b, I)ᵀ S⁻ᵀ` send each `a_i` and `b_i` to a multiple of `c_i`,
/// so the result `Σ T_xyz (M_a e_x) ⊗ (M_b e_y) ⊗ e_z` is symmetric for an
/// exact full-rank CP input. Both inverses are applied by LU solves.
pub fn symmetrize(t: &Tensor3, a: &[f64], b: &[f64]) -> Result<Tensor3> {
    let d = t.cubical_dim()?;
    if a.len() != d || b.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "mixing vectors have lengths {} and {}, expected {d}",
            a.len(),
            b.len()
        )));
    }
    let s = slice_mix(t, a);
    let cond = condition_number(&s);
    if !(cond <= SINGULAR_SLICE_COND) {
        return Err(Error::SingularSlice(cond));
    }
    let solve = |m: Matrix, rhs: Matrix| m.lu().solve(&rhs).ok_or(Error::SingularSlice(cond));
    // M_aᵀ = S⁻ᵀ T(b, I, I) and M_bᵀ = S⁻¹ T(I, b, I).
    let ma_t = solve(s.transpose(), t.contract_mode1(b))?;
    let mb_t = solve(s, t.contract_mode2(b))?;
    t.multilinear(&ma_t, &mb_t, &Matrix::identity(d, d))
}

/// Slice condition number of the model's exact tensor,
/// `κ(A diag(λ_i c_iᵀa) Bᵀ)`, computed in double-double arithmetic.
///
/// The dense `f64` tensor cannot serve here: its rounding error alone is
/// comparable to the smallest singular value once `κ` nears `1e10`.
pub fn model_slice_condition_number(model: &CpModel, a: &[f64]) -> Result<f64> {
    let [d1, d2, d3] = model.dims();
    if a.len() != d3 {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} for mode size {d3}",
            a.len()
        )));
    }
    if d1 != d2 {
        return Err(Error::NotCubical(model.dims()));
    }
    let r = model.rank();
    let weights: Vec<DoubleDouble> = (0..r)
        .map(|i| DoubleDouble::from(model.lambda()[i]) * precise::dot(model.c().column(i), a))
        .collect();
    let (fa, fb) = (model.a(), model.b());
    let mut s = PreciseMatrix::zeros(d1, d2);
    for i in 0..d1 {
        for j in 0..d2 {
            let mut acc = DoubleDouble::ZERO;
            for (k, w) in weights.iter().enumerate() {
                acc += DoubleDouble::product(fa.column(k)[i], fb.column(k)[j]) * *w;
            }
            s.set(i, j, acc);
        }
    }
    let sv = s.singular_values();
    let (hi, lo) = (sv[0], *sv.last().expect("nonempty"));
    Ok(if lo > 0.0 { hi / lo } else { f64::INFINITY })
}

/// `max_i |λ_i c_iᵀa| / min_i |λ_i c_iᵀa|` for a full-rank model; `+∞` when
/// the model has fewer components than the slice has columns.
pub fn cp_formula_condition_number(model: &CpModel, a: &[f64]) -> f64 {
    if model.rank() < model.dims()[0].min(model.dims()[1]) {
        return f64::INFINITY;
    }
    let w: Vec<f64> = (0..model.rank())
        .map(|i| (model.lambda()[i] * crate::tensor::dot(model.c().column(i), a)).abs())
        .collect();
    let hi = w.iter().copied().fold(0.0, f64::max);
    let lo = w.iter().copied().fold(f64::INFINITY, f64::min);
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// One sample of a condition-number sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaSample {
    pub sample: usize,
    pub kappa: f64,
    pub kappa_formula: f64,
}

/// Slice condition numbers for `samples` uniformly random unit vectors `a`.
pub fn condition_number_sweep<R: Rng + ?Sized>(
    model: &CpModel,
    samples: usize,
    rng: &mut R,
) -> Result<Vec<KappaSample>> {
    let d = model.dims()[2];
    (0..samples)
        .map(|sample| {
            let a = random_unit(d, rng);
            Ok(KappaSample {
                sample,
                kappa: model_slice_condition_number(model, a.as_slice())?,
                kappa_formula: cp_formula_condition_number(model, a.as_slice()),
            })
        })
        .collect()
}

/// Oracle angles of a baseline's final model against the truth.
pub fn final_angles(report: &BaselineReport, truth: &CpModel) -> Option<[f64; 3]> {
    let m = report.model.as_ref()?;
    let f = m.factors();
    oracle_angles(f, Some(truth)).map(|a| a.map(|x| x.tan))
}

/// Final column errors of a baseline's model against the truth.
pub fn final_errors(report: &BaselineReport, truth: &CpModel) -> Option<[f64; 3]> {
    let m = report.model.as_ref()?;
    oracle_errors(m.factors(), Some(truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::{random_cp_model, LambdaSpec};
    use crate::tensor::outer3;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn diagonal(lambda: &[f64]) -> Tensor3 {
        let d = lambda.len();
        Tensor3::from_fn([d, d, d], |i, j, k| if i == j && j == k { lambda[i] } else { 0.0 })
    }

    #[test]
    fn method_tags_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.tag().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.tag()));
        }
        assert!("als".parse::<Method>().is_err());
    }

    #[test]
    fn deflation_recovers_single_component() {
        let mut g = rng(1);
        let u = random_unit(6, &mut g);
        let t = outer3(u.as_slice(), u.as_slice(), u.as_slice()).scaled(2.0);
        let opts = DeflationOptions {
            components: 1,
            inner_iters: 100,
            restarts: 3,
        };
        let rep = rank1_power_deflation(&t, &opts, &mut g, None).unwrap();
        let c = &rep.components[0];
        assert!((c.weight - 2.0).abs() < 1e-10);
        let v = Vector::from_column_slice(&c.vector);
        assert!((v.dot(&u).abs() - 1.0).abs() < 1e-10);
        assert!(!c.flagged);
        assert_eq!(rep.trace.len(), rep.deflations + 1);
    }

    #[test]
    fn deflation_telescopes() {
        let mut g = rng(2);
        let m = random_cp_model(8, 4, &LambdaSpec::default(), true, &mut g).unwrap();
        let t = m.to_tensor();
        let opts = DeflationOptions {
            components: 4,
            inner_iters: 500,
            restarts: 5,
        };
        let rep = rank1_power_deflation(&t, &opts, &mut g, Some(&m)).unwrap();
        let last = rep.trace.last().unwrap();
        assert!(last.residual <= 1e-8 * t.frobenius_norm(), "{}", last.residual);

        // After k deflations the remainder is the sum of the missing components.
        let mut rest = t.clone();
        for (k, comp) in rep.components.iter().enumerate() {
            rest.add_rank_one(-comp.weight, &comp.vector, &comp.vector, &comp.vector);
            let mut recovered: Vec<usize> = Vec::new();
            for c in &rep.components[..=k] {
                let v = Vector::from_column_slice(&c.vector);
                let idx = (0..4)
                    .max_by(|&i, &j| {
                        let ai = v.dot(&m.a().matrix().column(i)).abs();
                        let aj = v.dot(&m.a().matrix().column(j)).abs();
                        ai.total_cmp(&aj)
                    })
                    .unwrap();
                recovered.push(idx);
            }
            let mut expected = Tensor3::zeros(t.dims());
            for i in (0..4).filter(|i| !recovered.contains(i)) {
                let u = m.a().column(i);
                expected.add_rank_one(m.lambda()[i], u, u, u);
            }
            assert!((&rest - &expected).frobenius_norm() <= 1e-8 * t.frobenius_norm());
        }
    }

    #[test]
    fn deflation_of_zero_flags_everything() {
        let opts = DeflationOptions {
            components: 3,
            inner_iters: 10,
            restarts: 2,
        };
        let rep = rank1_power_deflation(&Tensor3::zeros([3, 3, 3]), &opts, &mut rng(3), None).unwrap();
        assert_eq!(rep.components.len(), 3);
        assert!(rep.components.iter().all(|c| c.flagged && c.weight == 0.0));
    }

    #[test]
    fn symmetric_methods_refuse_asymmetric_input() {
        let mut g = rng(4);
        let m = random_cp_model(5, 2, &LambdaSpec::default(), false, &mut g).unwrap();
        let t = m.to_tensor();
        let opts = DeflationOptions {
            components: 2,
            inner_iters: 10,
            restarts: 1,
        };
        assert!(rank1_power_deflation(&t, &opts, &mut g, None).is_err());
        assert!(simultaneous_power_iteration(&t, 2, &SpiOptions::for_dim(5), &mut g, None).is_err());
    }

    #[test]
    fn r_als_full_rank_converges() {
        let mut g = rng(5);
        let m = random_cp_model(6, 6, &LambdaSpec::default(), false, &mut g).unwrap();
        let rep = orthogonalized_als_random(&m.to_tensor(), 6, 60, &mut g, Some(&m)).unwrap();
        assert_eq!(rep.trace.len(), 61);
        assert!(rep.trace.final_error().unwrap() <= 1e-8);
        let a = orthogonalized_als_random(&m.to_tensor(), 3, 5, &mut rng(9), Some(&m)).unwrap();
        let b = orthogonalized_als_random(&m.to_tensor(), 3, 5, &mut rng(9), Some(&m)).unwrap();
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn spi_single_sample_stays_finite() {
        let mut g = rng(6);
        let m = random_cp_model(8, 4, &LambdaSpec::default(), true, &mut g).unwrap();
        let opts = SpiOptions {
            samples: 1,
            matrix_iters: 10,
            tensor_iters: 10,
        };
        let rep = simultaneous_power_iteration(&m.to_tensor(), 2, &opts, &mut g, Some(&m)).unwrap();
        for row in &rep.trace.rows {
            assert!(row.residual.is_finite());
            assert!(row.tan.unwrap().iter().all(|v| !v.is_nan()));
        }
    }

    #[test]
    fn spi_many_samples_usually_recovers() {
        let mut ok = 0;
        for seed in 0..10 {
            let mut g = rng(100 + seed);
            let m = random_cp_model(8, 4, &LambdaSpec::default(), true, &mut g).unwrap();
            let opts = SpiOptions {
                samples: 640,
                matrix_iters: 25,
                tensor_iters: 30,
            };
            let rep = simultaneous_power_iteration(&m.to_tensor(), 2, &opts, &mut g, Some(&m)).unwrap();
            if rep.trace.final_error().unwrap() <= 1e-6 {
                ok += 1;
            }
        }
        assert!(ok >= 7, "{ok}/10");
    }

    #[test]
    fn symmetrize_diagonal_example() {
        let t = diagonal(&[3.0, 1.0]);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = symmetrize(&t, &[h, h], &[h, h]).unwrap();
        for (x, y) in s.data().iter().zip(t.data()) {
            assert!((x - y).abs() < 1e-14);
        }
        assert_eq!(s.max_asymmetry().unwrap(), 0.0);
    }

    #[test]
    fn symmetrize_full_rank_cp() {
        let mut g = rng(7);
        for _ in 0..10 {
            let m = random_cp_model(5, 5, &LambdaSpec::default(), false, &mut g).unwrap();
            let t = m.to_tensor();
            let a = random_unit(5, &mut g);
            let b = random_unit(5, &mut g);
            let s = symmetrize(&t, a.as_slice(), b.as_slice()).unwrap();
            assert!(s.relative_asymmetry().unwrap() <= 1e-8);
        }
    }

    #[test]
    fn symmetrize_rejects_singular_slice() {
        let t = outer3(&[1.0, 0.0], &[0.0, 1.0], &[0.6, 0.8]);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(matches!(symmetrize(&t, &[h, h], &[h, h]), Err(Error::SingularSlice(_))));
    }

    #[test]
    fn slice_condition_examples() {
        let t = diagonal(&[2.0, 1.0]);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((slice_condition_number(&t, &[h, h]) - 2.0).abs() < 1e-14);
        assert!(slice_condition_number(&t, &[1.0, 0.0]).is_infinite());
        // Equal |λ_i aᵀc_i| gives exactly one.
        let eq = diagonal(&[1.0, 1.0, 1.0]);
        let s = 1.0 / 3f64.sqrt();
        assert!((slice_condition_number(&eq, &[s, s, s]) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn slice_condition_matches_formula() {
        let mut g = rng(8);
        for _ in 0..20 {
            let m = random_cp_model(6, 6, &LambdaSpec::default(), false, &mut g).unwrap();
            let t = m.to_tensor();
            let a = random_unit(6, &mut g);
            let fast = slice_condition_number(&t, a.as_slice());
            let formula = cp_formula_condition_number(&m, a.as_slice());
            assert!(fast >= 1.0);
            if formula < 1e4 {
                assert!((fast / formula - 1.0).abs() <= 1e-10, "{fast} vs {formula}");
            }
            let precise = model_slice_condition_number(&m, a.as_slice()).unwrap();
            assert!((precise / formula - 1.0).abs() <= 1e-12, "{precise} vs {formula}");
        }
    }

    #[test]
    fn precise_condition_handles_wide_spectra() {
        let mut g = rng(9);
        let m = random_cp_model(20, 20, &LambdaSpec::Geometric { ratio: 0.5, scale: 1.0 }, false, &mut g).unwrap();
        let samples = condition_number_sweep(&m, 5, &mut g).unwrap();
        for s in samples {
            assert!(s.kappa > 1e5);
            assert!((s.kappa / s.kappa_formula - 1.0).abs() <= 1e-8);
        }
    }
}
