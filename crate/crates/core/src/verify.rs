//! Empirical verification: assumption checks, structural lemmas, bounds.
//!
//! Everything here is an executable statement about the rest of the crate.
//! The assumption checks sample a model family and report estimated growth
//! constants with explicit sample sizes and seed ranges; they produce
//! evidence, never proofs, and say so in their reports. The lemma suite is
//! different: each lemma is an exact identity or inequality at finite size,
//! so it is asserted per realization (to floating-point tolerance) or by
//! exhaustive enumeration, with a counterexample dump on failure. The
//! brute-force counters and ratio formulas in this module double as the
//! independent oracles that the rest of the test suite is anchored to.

use crate::error::{CoreError, Result};
use crate::freesum::{count_tree_vertices, FreeSum};
use crate::matrix::HermitianMatrix;
use crate::models::{ModelFamily, ModelSpec};
use crate::rng::{self, rng_from};
use crate::traffic::eval::{
    injective_trace, injective_trace_terms, normalized_injective_trace_multi, DEFAULT_EVAL_BUDGET,
};
use crate::traffic::partitions::{cross_amalgamations, enumerate_amalgamations, partial_matchings};
use crate::traffic::{colored_components, gcc, glue_at_root, GraphMonomial, Star, TestGraph};
use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;

/// Version stamp carried by every serialized report.
pub const REPORT_SCHEMA_VERSION: u32 = 1;
/// Relative tolerance for per-realization lemma assertions.
pub const LEMMA_TOL: f64 = 1e-10;
/// Resamples used for bootstrap confidence intervals.
const BOOTSTRAP_RESAMPLES: usize = 1000;
/// Work budget for operator-side trace enumerations inside the lemma suite.
const OPERATOR_TRACE_BUDGET: u64 = 2_000_000;

/// One named scalar in a report.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Estimate {
    pub name: String,
    pub value: f64,
}

impl Estimate {
    fn new(name: impl Into<String>, value: f64) -> Self {
        Self { name: name.into(), value }
    }
}

/// Outcome of one assumption check: what was sampled, what was estimated,
/// and whether the estimates clear the configured thresholds. The sample
/// size and seed range always travel with the estimates.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AssumptionReport {
    pub schema_version: u32,
    pub check: String,
    pub model: ModelSpec,
    pub regime: String,
    pub estimates: Vec<Estimate>,
    pub trials: usize,
    pub seed_lo: u64,
    pub seed_hi: u64,
    pub passed: bool,
    pub notes: String,
}

/// The mean-squared Frobenius growth of a matrix power: `(1/n) ||X^m||_F^2`,
/// computed by repeated dense multiplication. For Hermitian input this
/// equals `(1/n) tr X^{2m}`, which makes the eigenvalue power sum an exact
/// oracle. Refuses when the power overflows to a non-finite value.
pub fn frobenius_moment(x: &HermitianMatrix, m: u32) -> Result<f64> {
    if m == 0 {
        return Err(CoreError::Param("power must be at least 1".into()));
    }
    let dense = x.to_dense();
    let mut acc = dense.clone();
    for _ in 1..m {
        acc = &acc * &dense;
    }
    let value = acc.iter().map(|z| z.norm_sqr()).sum::<f64>() / x.n() as f64;
    if !value.is_finite() {
        return Err(CoreError::Param(format!(
            "matrix power overflowed at exponent {m}; rescale the model or lower the power"
        )));
    }
    Ok(value)
}

/// Monte Carlo check of the power-norm growth hypothesis: estimates
/// `E (1/n) ||X^m||_F^2` over fresh draws of the model and reports the
/// implied per-power constant `c_hat = mean^(1/m)`. Passes when `c_hat`
/// stays at or below the configured threshold.
pub fn check_frobenius(
    spec: &ModelSpec,
    m: u32,
    trials: usize,
    c_threshold: f64,
) -> Result<AssumptionReport> {
    if trials == 0 {
        return Err(CoreError::Param("at least one trial is required".into()));
    }
    if !(c_threshold > 0.0) {
        return Err(CoreError::Param(format!(
            "threshold must be positive, got {c_threshold}"
        )));
    }
    if spec.n > 2000 || m > 64 {
        return Err(CoreError::CapExceeded(format!(
            "dense power of size {} to exponent {m} is beyond the desk-scale budget",
            spec.n
        )));
    }
    let mut mean = 0.0;
    let mut max_v: f64 = 0.0;
    for t in 0..trials {
        let draw = ModelSpec::new(spec.family.clone(), spec.n, spec.seed + t as u64);
        let v = frobenius_moment(&draw.generate()?, m)?;
        mean += v;
        max_v = max_v.max(v);
    }
    mean /= trials as f64;
    let c_hat = mean.powf(1.0 / f64::from(m));
    Ok(AssumptionReport {
        schema_version: REPORT_SCHEMA_VERSION,
        check: "frobenius_growth".into(),
        model: spec.clone(),
        regime: format!("n = {}, power = {m}", spec.n),
        estimates: vec![
            Estimate::new("mean_normalized_frobenius_sq", mean),
            Estimate::new("max_normalized_frobenius_sq", max_v),
            Estimate::new("c_hat", c_hat),
        ],
        trials,
        seed_lo: spec.seed,
        seed_hi: spec.seed + trials as u64 - 1,
        passed: c_hat <= c_threshold,
        notes: "Monte Carlo estimate at fixed n; a pass bounds the sampled mean, \
                not the asymptotic constant."
            .into(),
    })
}

/// Monte Carlo check of injective-trace growth: samples the model on a grid
/// of sizes, evaluates the normalized globally-injective trace of each test
/// graph, and reports the empirical growth exponent
/// `h_hat = log(max |value|) / (c log n)` per size. Every edge label of a
/// test graph is assigned the same sampled matrix, so the graphs act as
/// single-matrix test graphs regardless of how many labels they declare.
/// Graphs larger than `floor(c * m)` in vertices or edges are refused, as is
/// anything beyond the brute-force enumeration cap.
#[allow(clippy::too_many_arguments)]
pub fn check_injective_growth(
    family: &ModelFamily,
    n_grid: &[usize],
    graphs: &[TestGraph],
    m: usize,
    c: f64,
    trials: usize,
    h_threshold: f64,
    base_seed: u64,
) -> Result<AssumptionReport> {
    if n_grid.is_empty() || graphs.is_empty() {
        return Err(CoreError::Param("need at least one size and one test graph".into()));
    }
    if trials == 0 {
        return Err(CoreError::Param("at least one trial is required".into()));
    }
    if !(c > 0.0) {
        return Err(CoreError::Param(format!("speed factor c must be positive, got {c}")));
    }
    let cap = (c * m as f64).floor() as usize;
    for (k, t) in graphs.iter().enumerate() {
        if t.n_vertices() > cap || t.edges().len() > cap {
            return Err(CoreError::CapExceeded(format!(
                "graph {k} has {} vertices and {} edges, beyond the size cap floor(c*m) = {cap}",
                t.n_vertices(),
                t.edges().len()
            )));
        }
        if t.n_vertices() > 8 {
            return Err(CoreError::CapExceeded(format!(
                "graph {k} has {} vertices; injective enumeration is capped at 8",
                t.n_vertices()
            )));
        }
        if t.edges().is_empty() {
            return Err(CoreError::Param(format!("graph {k} has no edges")));
        }
    }
    let mut estimates = Vec::new();
    let mut passed = true;
    let mut seed = base_seed;
    for &n in n_grid {
        if n < 2 {
            return Err(CoreError::Param(format!("size {n} is too small to sample")));
        }
        let mut max_abs: f64 = 0.0;
        for _ in 0..trials {
            let x = ModelSpec::new(family.clone(), n, seed).generate()?;
            seed += 1;
            for t in graphs {
                let assign = vec![&x; t.n_labels()];
                let v = normalized_injective_trace_multi(t, &assign, DEFAULT_EVAL_BUDGET)?;
                max_abs = max_abs.max(v.norm());
            }
        }
        // Values of exactly zero clamp to the smallest positive float so the
        // exponent stays finite (and very negative) in serialized reports.
        let h_hat = max_abs.max(f64::MIN_POSITIVE).ln() / (c * (n as f64).ln());
        estimates.push(Estimate::new(format!("max_abs_n{n}"), max_abs));
        estimates.push(Estimate::new(format!("h_hat_n{n}"), h_hat));
        if h_hat > h_threshold {
            passed = false;
        }
    }
    let n_rep = *n_grid.iter().max().expect("grid nonempty");
    Ok(AssumptionReport {
        schema_version: REPORT_SCHEMA_VERSION,
        check: "injective_trace_growth".into(),
        model: ModelSpec::new(family.clone(), n_rep, base_seed),
        regime: format!(
            "fixed graphs with <= {cap} vertices and edges, sizes {n_grid:?}; \
             the asymptotic statement concerns graphs growing with n, out of desk reach"
        ),
        estimates,
        trials,
        seed_lo: base_seed,
        seed_hi: seed - 1,
        passed,
        notes: "exponent estimated from the largest sampled |value| at each size".into(),
    })
}

/// Entrywise multiplier applied to a sampled matrix before re-evaluating
/// injective traces.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaskKind {
    /// No-op multiplier: the masked matrix is the original.
    AllOnes,
    /// Constant multiplier `eps` on every entry.
    ScaledOnes { eps: f64 },
    /// Independent symmetric signs off the diagonal, +1 on it.
    RandomSigns,
}

/// Entrywise (Hadamard) product of two Hermitian matrices. The result is
/// Hermitian because conjugation distributes over entrywise products.
pub fn hadamard_product(
    x: &HermitianMatrix,
    mask: &HermitianMatrix,
) -> Result<HermitianMatrix> {
    if x.n() != mask.n() {
        return Err(CoreError::Dimension(format!(
            "matrix has size {}, mask has size {}",
            x.n(),
            mask.n()
        )));
    }
    let n = x.n();
    let mut entries = Vec::new();
    for i in 0..n {
        for &(j, v) in x.row(i) {
            let j = j as usize;
            if j < i {
                continue;
            }
            let w = v * mask.entry(i, j);
            if w != Complex64::new(0.0, 0.0) {
                entries.push((i, j, w));
            }
        }
    }
    HermitianMatrix::from_upper_triangle(n, &entries)
}

/// A symmetric random sign pattern: independent +-1 above the diagonal,
/// +1 on it. Multiplying entrywise by signs is exact in floating point,
/// which is what makes the modulus checks below exact rather than
/// approximate.
pub fn sign_mask(n: usize, seed: u64) -> HermitianMatrix {
    let mut rg = rng_from(seed);
    let mut entries = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        entries.push((i, i, Complex64::new(1.0, 0.0)));
        for j in (i + 1)..n {
            let s = if rng::uniform_f64(&mut rg) < 0.5 { 1.0 } else { -1.0 };
            entries.push((i, j, Complex64::new(s, 0.0)));
        }
    }
    HermitianMatrix::from_upper_triangle(n, &entries).expect("sign pattern is Hermitian")
}

/// Per-realization check of how entrywise masking moves injective traces.
/// For each sampled matrix and each rooted monomial, every injective-map
/// term of the masked trace is compared against its exact prediction: equal
/// for the all-ones mask, scaled by `eps^(#edges)` for the constant mask,
/// and unchanged in modulus for random signs. The aggregate bound
/// `|masked trace| <= bound^(#edges) * sum |original terms|` is checked as
/// well. All checks are per-realization; none rely on expectations.
pub fn check_entrywise_product(
    spec: &ModelSpec,
    mask: MaskKind,
    monomials: &[GraphMonomial],
    trials: usize,
) -> Result<AssumptionReport> {
    if trials == 0 {
        return Err(CoreError::Param("at least one trial is required".into()));
    }
    if monomials.is_empty() {
        return Err(CoreError::Param("need at least one rooted monomial".into()));
    }
    for (k, g) in monomials.iter().enumerate() {
        if g.v_in != g.v_out {
            return Err(CoreError::Param(format!(
                "monomial {k} has distinct roots; rooted traces need v_in = v_out"
            )));
        }
        if g.graph.n_vertices() > 8 {
            return Err(CoreError::CapExceeded(format!(
                "monomial {k} has {} vertices; injective enumeration is capped at 8",
                g.graph.n_vertices()
            )));
        }
    }
    if let MaskKind::ScaledOnes { eps } = mask {
        if !eps.is_finite() || eps == 0.0 {
            return Err(CoreError::Param(format!(
                "mask scale must be finite and nonzero, got {eps}"
            )));
        }
    }
    let mask_bound = match mask {
        MaskKind::AllOnes | MaskKind::RandomSigns => 1.0,
        MaskKind::ScaledOnes { eps } => eps.abs(),
    };
    let mut max_term_defect: f64 = 0.0;
    let mut max_bound_ratio: f64 = 0.0;
    for t in 0..trials {
        let x = ModelSpec::new(spec.family.clone(), spec.n, spec.seed + t as u64).generate()?;
        let w = match mask {
            MaskKind::AllOnes => x.clone(),
            MaskKind::ScaledOnes { eps } => x.scale(eps),
            MaskKind::RandomSigns => {
                let signs = sign_mask(spec.n, rng::mix_seed(spec.seed + t as u64, 0x516e));
                hadamard_product(&x, &signs)?
            }
        };
        for g in monomials {
            let ax = vec![&x; g.graph.n_labels()];
            let aw = vec![&w; g.graph.n_labels()];
            let tx = injective_trace_terms(g, &ax, 0, DEFAULT_EVAL_BUDGET)?;
            let tw = injective_trace_terms(g, &aw, 0, DEFAULT_EVAL_BUDGET)?;
            let e_count = g.graph.edges().len() as i32;
            for (a, b) in tx.iter().zip(&tw) {
                let defect = match mask {
                    MaskKind::AllOnes => (a - b).norm(),
                    MaskKind::ScaledOnes { eps } => {
                        let predicted = a * eps.powi(e_count);
                        (b - predicted).norm() / predicted.norm().max(f64::MIN_POSITIVE)
                    }
                    MaskKind::RandomSigns => (a.norm() - b.norm()).abs(),
                };
                max_term_defect = max_term_defect.max(defect);
            }
            let lhs = tw.iter().sum::<Complex64>().norm();
            let rhs = mask_bound.powi(e_count) * tx.iter().map(|z| z.norm()).sum::<f64>();
            let ratio = if rhs > 0.0 {
                lhs / rhs
            } else if lhs == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            max_bound_ratio = max_bound_ratio.max(ratio);
        }
    }
    let term_tol = match mask {
        // Scaling by a constant rounds once per edge factor; signs and the
        // identity mask are exact.
        MaskKind::ScaledOnes { .. } => 1e-12,
        MaskKind::AllOnes | MaskKind::RandomSigns => 0.0,
    };
    let passed = max_term_defect <= term_tol && max_bound_ratio <= 1.0 + 1e-12;
    Ok(AssumptionReport {
        schema_version: REPORT_SCHEMA_VERSION,
        check: "entrywise_product".into(),
        model: spec.clone(),
        regime: format!("mask {mask:?}, {} rooted monomials, root 0", monomials.len()),
        estimates: vec![
            Estimate::new("max_term_defect", max_term_defect),
            Estimate::new("max_bound_ratio", max_bound_ratio),
        ],
        trials,
        seed_lo: spec.seed,
        seed_hi: spec.seed + trials as u64 - 1,
        passed,
        notes: "per-term comparisons are exact per realization; sign-mask seeds are \
                derived from the trial seed"
            .into(),
    })
}

/// An exact ratio, its leading-order approximation, and the relative gap.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RatioCheck {
    pub exact: f64,
    pub leading: f64,
    pub rel_error: f64,
    /// Exponent of the leading power of n.
    pub exponent: f64,
}

/// Falling-factorial ratio `n! / (n - v)!` against its leading power `n^v`.
/// Valid in the regime `v^2 < n`; the relative error of the approximation
/// is reported and is `O(v^2 / n)`.
pub fn stirling_ratio(n: u64, v: u64) -> Result<RatioCheck> {
    if n == 0 {
        return Err(CoreError::Param("n must be positive".into()));
    }
    if v * v >= n {
        return Err(CoreError::Param(format!(
            "validity regime requires v^2 < n, got v = {v}, n = {n}"
        )));
    }
    let exact = (0..v).fold(1.0, |acc, k| acc * (n - k) as f64);
    let leading = (n as f64).powi(v as i32);
    Ok(RatioCheck {
        exact,
        leading,
        rel_error: (exact / leading - 1.0).abs(),
        exponent: v as f64,
    })
}

/// The normalization ratio for a merge of two vertex sets:
/// `n * (n-v1)! * (n-v2)! / ((n-v)! * n!) * n^(k1-1) * n^(k2-1)`,
/// where `v1, v2` are the side vertex counts, `k1, k2` their component
/// counts, and `v` the merged vertex count. Its leading order is `n^eta`
/// with `eta = k1 + k2 - 1 - v1 - v2 + v`, which the merge inequality keeps
/// at or below zero; parameters with `eta > 0` are refused. Computed in log
/// space from short factor products, so the reported relative error is the
/// approximation's, not rounding noise.
pub fn gamma_ratio(n: u64, v: u64, v1: u64, v2: u64, k1: u64, k2: u64) -> Result<RatioCheck> {
    if n == 0 {
        return Err(CoreError::Param("n must be positive".into()));
    }
    if k1 == 0 || k2 == 0 {
        return Err(CoreError::Param("component counts must be positive".into()));
    }
    if v1 < k1 || v2 < k2 {
        return Err(CoreError::Param(format!(
            "each side needs at least one vertex per component: v1 = {v1} < k1 = {k1} \
             or v2 = {v2} < k2 = {k2}"
        )));
    }
    if v < v1.max(v2) || v > v1 + v2 {
        return Err(CoreError::Param(format!(
            "merged vertex count must lie between max(v1, v2) and v1 + v2, got {v}"
        )));
    }
    if v * v >= n {
        return Err(CoreError::Param(format!(
            "validity regime requires v^2 < n, got v = {v}, n = {n}"
        )));
    }
    let eta = (k1 + k2) as i64 - 1 - v1 as i64 - v2 as i64 + v as i64;
    if eta > 0 {
        return Err(CoreError::Param(format!(
            "leading exponent eta = {eta} is positive, outside the merge inequality's range"
        )));
    }
    let ln_n = (n as f64).ln();
    let mut ln_exact = (k1 + k2 - 1) as f64 * ln_n;
    for k in v1..v {
        ln_exact += ((n - k) as f64).ln();
    }
    for k in 0..v2 {
        ln_exact -= ((n - k) as f64).ln();
    }
    let ln_leading = eta as f64 * ln_n;
    Ok(RatioCheck {
        exact: ln_exact.exp(),
        leading: ln_leading.exp(),
        rel_error: (ln_exact - ln_leading).exp_m1().abs(),
        exponent: eta as f64,
    })
}

/// Outcome of one lemma check: how many instances ran, the worst deviation,
/// and a dump of the first counterexample when the lemma fails.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LemmaResult {
    pub name: String,
    pub cases: usize,
    pub max_error: f64,
    pub passed: bool,
    pub counterexample: Option<String>,
}

/// Aggregate of all lemma checks.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LemmaSuiteReport {
    pub schema_version: u32,
    pub results: Vec<LemmaResult>,
    pub passed: bool,
}

// ---------------------------------------------------------------------------
// Merge monotonicity: exhaustive search over two-label supports.
//
// The component structure of a labeled multigraph depends only on which
// vertex pairs carry which labels, never on edge multiplicities, stars, or
// orientations. Exhausting all connected two-label support configurations
// up to relabeling therefore exhausts all labeled multigraphs of that size.
// ---------------------------------------------------------------------------

/// A connected two-label support: vertex count and the unordered pairs
/// (loops included) carrying each label.
#[derive(Debug, Clone)]
struct Support {
    n: usize,
    a: Vec<(usize, usize)>,
    b: Vec<(usize, usize)>,
    eta: i64,
}

fn uf_find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn uf_union(parent: &mut [usize], a: usize, b: usize) {
    let ra = uf_find(parent, a);
    let rb = uf_find(parent, b);
    if ra != rb {
        parent[ra] = rb;
    }
}

/// Count the single-label components induced by an edge list, marking the
/// touched vertices along the way. Vertices with no edge of this label do
/// not form components.
fn count_label_components(
    total: usize,
    edges: impl Iterator<Item = (usize, usize)>,
    touched: &mut [bool],
) -> usize {
    let mut parent = [0usize; 6];
    for (v, p) in parent.iter_mut().enumerate() {
        *p = v;
    }
    for (u, v) in edges {
        uf_union(&mut parent[..total], u, v);
        touched[u] = true;
        touched[v] = true;
    }
    let mut seen = [false; 6];
    let mut comps = 0;
    for v in 0..total {
        if touched[v] {
            let r = uf_find(&mut parent[..total], v);
            if !seen[r] {
                seen[r] = true;
                comps += 1;
            }
        }
    }
    comps
}

/// Euler defect of the component structure of a two-label graph given by
/// edge lists: components plus connectors as nodes, containments as edges.
/// With two labels every connector lies in exactly one component per label,
/// so the defect reduces to `#components - #connectors - 1`.
fn eta_support(total: usize, a: &[(usize, usize)], b: &[(usize, usize)]) -> i64 {
    let mut touched_a = [false; 6];
    let mut touched_b = [false; 6];
    let comps = count_label_components(total, a.iter().copied(), &mut touched_a)
        + count_label_components(total, b.iter().copied(), &mut touched_b);
    let connectors = (0..total).filter(|&v| touched_a[v] && touched_b[v]).count();
    comps as i64 - connectors as i64 - 1
}

/// Euler defect of the merge of two supports under a partial matching,
/// evaluated without materializing a graph.
fn merged_eta(s1: &Support, s2: &Support, matching: &[(usize, usize)]) -> i64 {
    let total = s1.n + s2.n - matching.len();
    let mut map2 = [usize::MAX; 3];
    for &(u, w) in matching {
        map2[w] = u;
    }
    let mut next = s1.n;
    for slot in map2.iter_mut().take(s2.n) {
        if *slot == usize::MAX {
            *slot = next;
            next += 1;
        }
    }
    let remap = |(u, v): &(usize, usize)| (map2[*u], map2[*v]);
    let mut touched_a = [false; 6];
    let mut touched_b = [false; 6];
    let comps = count_label_components(
        total,
        s1.a.iter().copied().chain(s2.a.iter().map(remap)),
        &mut touched_a,
    ) + count_label_components(
        total,
        s1.b.iter().copied().chain(s2.b.iter().map(remap)),
        &mut touched_b,
    );
    let connectors = (0..total).filter(|&v| touched_a[v] && touched_b[v]).count();
    comps as i64 - connectors as i64 - 1
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for v in 0..n {
            if !used[v] {
                used[v] = true;
                cur.push(v);
                rec(n, cur, used, out);
                cur.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(n, &mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

/// All connected two-label supports on exactly `n` vertices, one canonical
/// representative per relabeling orbit. Each unordered vertex pair (loops
/// included) independently carries label a, label b, both, or neither.
fn support_sides(n: usize) -> Vec<Support> {
    let mut slots: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            slots.push((i, j));
        }
    }
    let n_slots = slots.len();
    let perms = permutations(n);
    let slot_of = |i: usize, j: usize| -> usize {
        let key = (i.min(j), i.max(j));
        slots.iter().position(|&s| s == key).expect("every pair is a slot")
    };
    let mut out = Vec::new();
    'cfg: for code in 0..(1u32 << (2 * n_slots)) {
        let states: Vec<u8> = (0..n_slots).map(|s| ((code >> (2 * s)) & 3) as u8).collect();
        if states.iter().all(|&s| s == 0) {
            continue;
        }
        // Connectivity over the union of both labels' supports.
        let mut parent: Vec<usize> = (0..n).collect();
        for (s, &st) in states.iter().enumerate() {
            if st != 0 {
                let (i, j) = slots[s];
                uf_union(&mut parent, i, j);
            }
        }
        let root = uf_find(&mut parent, 0);
        for v in 1..n {
            if uf_find(&mut parent, v) != root {
                continue 'cfg;
            }
        }
        // Keep only the lexicographically minimal relabeling.
        for p in &perms {
            let mut relabeled = vec![0u8; n_slots];
            for (s, &st) in states.iter().enumerate() {
                let (i, j) = slots[s];
                relabeled[slot_of(p[i], p[j])] = st;
            }
            if relabeled < states {
                continue 'cfg;
            }
        }
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (s, &st) in states.iter().enumerate() {
            if st & 1 != 0 {
                a.push(slots[s]);
            }
            if st & 2 != 0 {
                b.push(slots[s]);
            }
        }
        let eta = eta_support(n, &a, &b);
        out.push(Support { n, a, b, eta });
    }
    out
}

/// Exhaustive merge monotonicity: gluing two connected two-label graphs
/// along any nonempty partial identification of their vertex sets never
/// raises the Euler defect of the component structure above either side's.
/// Exhausts every support configuration with at most `max_side` vertices
/// per side (capped at 3) and every identification; multiplicities cannot
/// affect the defect, so this covers all labeled multigraphs of that size.
pub fn lemma_merge_monotonicity(max_side: usize) -> Result<LemmaResult> {
    if max_side == 0 || max_side > 3 {
        return Err(CoreError::Param(format!(
            "side size must lie in 1..=3 (support enumeration cap), got {max_side}"
        )));
    }
    let mut sides = Vec::new();
    for n in 1..=max_side {
        sides.extend(support_sides(n));
    }
    // Matching lists depend only on the side sizes; precompute the handful.
    let mut matchings: Vec<Vec<Vec<Vec<(usize, usize)>>>> = Vec::new();
    for n1 in 0..=max_side {
        let mut row = Vec::new();
        for n2 in 0..=max_side {
            row.push(partial_matchings(n1, n2));
        }
        matchings.push(row);
    }
    let mut cases = 0usize;
    let mut worst = i64::MIN;
    let mut counterexample = None;
    for i in 0..sides.len() {
        for j in i..sides.len() {
            let bound = sides[i].eta.min(sides[j].eta);
            for matching in &matchings[sides[i].n][sides[j].n] {
                if matching.is_empty() {
                    continue;
                }
                let eta = merged_eta(&sides[i], &sides[j], matching);
                cases += 1;
                let excess = eta - bound;
                worst = worst.max(excess);
                if excess > 0 && counterexample.is_none() {
                    counterexample = Some(format!(
                        "sides a1={:?} b1={:?} and a2={:?} b2={:?} under matching {:?}: \
                         eta {} > min({}, {})",
                        sides[i].a,
                        sides[i].b,
                        sides[j].a,
                        sides[j].b,
                        matching,
                        eta,
                        sides[i].eta,
                        sides[j].eta,
                    ));
                }
            }
        }
    }
    Ok(LemmaResult {
        name: "merge_monotonicity".into(),
        cases,
        max_error: worst.max(0) as f64,
        passed: worst <= 0,
        counterexample,
    })
}

// ---------------------------------------------------------------------------
// Morphism counting, trace identity, glued products, factorization.
// ---------------------------------------------------------------------------

/// Count maps from a rooted monomial's vertices into `{0, .., n-1}` that pin
/// the root to `root_image` and are injective on every colored component.
/// Brute-force enumeration; the independent side of the morphism bijection.
pub fn count_component_injective_maps(
    g: &GraphMonomial,
    n: usize,
    root_image: usize,
) -> Result<u64> {
    if g.v_in != g.v_out {
        return Err(CoreError::Param("rooted counting needs v_in = v_out".into()));
    }
    if root_image >= n {
        return Err(CoreError::Param(format!(
            "root image {root_image} out of range for size {n}"
        )));
    }
    let nv = g.graph.n_vertices();
    if nv > 8 {
        return Err(CoreError::CapExceeded(format!(
            "brute-force map counting is capped at 8 vertices, got {nv}"
        )));
    }
    let comps = colored_components(&g.graph);
    let mut membership: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for (c, comp) in comps.iter().enumerate() {
        for &v in &comp.vertices {
            membership[v].push(c);
        }
    }
    let mut img = vec![usize::MAX; nv];
    img[g.v_in] = root_image;
    fn rec(
        v: usize,
        nv: usize,
        n: usize,
        root: usize,
        img: &mut [usize],
        membership: &[Vec<usize>],
        comps: &[crate::traffic::ColoredComponent],
    ) -> u64 {
        if v == nv {
            return 1;
        }
        if v == root {
            return rec(v + 1, nv, n, root, img, membership, comps);
        }
        let mut total = 0;
        'image: for x in 0..n {
            for &c in &membership[v] {
                for &u in &comps[c].vertices {
                    if u != v && img[u] != usize::MAX && img[u] == x {
                        continue 'image;
                    }
                }
            }
            img[v] = x;
            total += rec(v + 1, nv, n, root, img, membership, comps);
            img[v] = usize::MAX;
        }
        total
    }
    Ok(rec(0, nv, n, g.v_in, &mut img, &membership, &comps))
}

/// All-ones Hermitian matrix, diagonal included: the support indicator that
/// turns weighted traces into pure counts.
fn all_ones(n: usize) -> HermitianMatrix {
    let mut entries = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            entries.push((i, j, Complex64::new(1.0, 0.0)));
        }
    }
    HermitianMatrix::from_upper_triangle(n, &entries).expect("all-ones is Hermitian")
}

/// Dense random Hermitian matrix with entries uniform in [-1, 1] (real
/// diagonal): generic input for lemma checks, with no symmetry or sparsity
/// that could mask a bookkeeping error.
pub fn random_dense_hermitian(n: usize, seed: u64) -> HermitianMatrix {
    let mut rg = rng_from(seed);
    let mut entries = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            let re = 2.0 * rng::uniform_f64(&mut rg) - 1.0;
            let im = if i == j { 0.0 } else { 2.0 * rng::uniform_f64(&mut rg) - 1.0 };
            entries.push((i, j, Complex64::new(re, im)));
        }
    }
    HermitianMatrix::from_upper_triangle(n, &entries).expect("constructed Hermitian")
}

/// Random connected rooted monomial on two labels: a random spanning tree
/// with random labels, stars, and orientations, plus up to two extra edges.
fn random_monomial(rg: &mut ChaCha8Rng, max_vertices: usize, allow_loops: bool) -> GraphMonomial {
    let nv = 2 + rng::uniform_index(rg, (max_vertices - 1) as u64) as usize;
    let mut g = TestGraph::with_labels(nv, &["a", "b"]);
    let push_edge = |g: &mut TestGraph, rg: &mut ChaCha8Rng, s: usize, t: usize| {
        let label = rng::uniform_index(rg, 2) as usize;
        let star = if rng::uniform_f64(rg) < 0.5 { Star::One } else { Star::Conj };
        let (s, t) = if rng::uniform_f64(rg) < 0.5 { (s, t) } else { (t, s) };
        g.add_edge(s, t, label, star).expect("vertex indices in range");
    };
    for v in 1..nv {
        let u = rng::uniform_index(rg, v as u64) as usize;
        push_edge(&mut g, rg, u, v);
    }
    for _ in 0..rng::uniform_index(rg, 3) {
        let s = rng::uniform_index(rg, nv as u64) as usize;
        let mut t = rng::uniform_index(rg, nv as u64) as usize;
        if !allow_loops && t == s {
            t = (s + 1) % nv;
        }
        push_edge(&mut g, rg, s, t);
    }
    let root = rng::uniform_index(rg, nv as u64) as usize;
    GraphMonomial::new(g, root, root).expect("root in range")
}

/// Random monomial whose component structure is a tree; spanning trees are
/// automatically tree-like, so rejection terminates quickly.
fn random_tree_gcc_monomial(
    rg: &mut ChaCha8Rng,
    max_vertices: usize,
    allow_loops: bool,
) -> GraphMonomial {
    for _ in 0..500 {
        let g = random_monomial(rg, max_vertices, allow_loops);
        if gcc(&g.graph).map(|v| v.is_tree()).unwrap_or(false) {
            return g;
        }
    }
    // A labeled path is always tree-like; unreachable in practice.
    let mut g = TestGraph::with_labels(2, &["a", "b"]);
    g.add_edge(0, 1, 0, Star::One).expect("path edge");
    GraphMonomial::new(g, 0, 0).expect("root in range")
}

/// Morphism-count bijection: for a tree-like rooted monomial, the number of
/// injective morphisms into the free-sum graph (root pinned) equals the
/// number of maps into `{0, .., n-1}` injective on each colored component
/// (root pinned). Both sides are counted exhaustively, the operator side via
/// traces of all-ones indicator matrices.
pub fn lemma_morphism_count() -> Result<LemmaResult> {
    let mut instances: Vec<(GraphMonomial, usize, usize)> = Vec::new();
    // Mixed two-path: two components sharing the middle vertex.
    let mut path = TestGraph::with_labels(3, &["a", "b"]);
    path.add_edge(0, 1, 0, Star::One)?;
    path.add_edge(1, 2, 1, Star::One)?;
    instances.push((GraphMonomial::new(path, 0, 0)?, 3, 0));
    let mut rg = rng_from(0x30f_0001);
    for k in 0..12 {
        let g = random_tree_gcc_monomial(&mut rg, 4, false);
        let n = if k % 2 == 0 { 3 } else { 5 };
        let root_image = rng::uniform_index(&mut rg, n as u64) as usize;
        instances.push((g, n, root_image));
    }
    let mut cases = 0;
    let mut max_error: f64 = 0.0;
    let mut counterexample = None;
    for (g, n, root_image) in &instances {
        let ones = all_ones(*n);
        let mut fs = FreeSum::new(ones.clone(), ones, *root_image)?;
        let op = fs.operator_injective_trace(g, OPERATOR_TRACE_BUDGET)?;
        let maps = count_component_injective_maps(g, *n, *root_image)? as f64;
        let err = (op - Complex64::new(maps, 0.0)).norm();
        cases += 1;
        max_error = max_error.max(err);
        if err > 1e-9 && counterexample.is_none() {
            counterexample = Some(format!(
                "monomial with {} vertices at n = {n}, root image {root_image}: \
                 operator count {op}, map count {maps}",
                g.graph.n_vertices()
            ));
        }
    }
    Ok(LemmaResult {
        name: "morphism_count_bijection".into(),
        cases,
        max_error,
        passed: counterexample.is_none(),
        counterexample,
    })
}

/// Trace identity: for a tree-like rooted monomial, its injective trace in
/// the free-sum operator equals the sum, over all amalgamations of its
/// colored components (identity included), of the matrix-side injective
/// traces of the quotients.
pub fn lemma_trace_identity(
    n: usize,
    trials: usize,
    max_vertices: usize,
    tol: f64,
    base_seed: u64,
) -> Result<LemmaResult> {
    if n < 2 || trials == 0 || !(2..=6).contains(&max_vertices) || !(tol > 0.0) {
        return Err(CoreError::Param(
            "need n >= 2, trials >= 1, 2 <= max_vertices <= 6, tol > 0".into(),
        ));
    }
    let mut cases = 0;
    let mut max_rel: f64 = 0.0;
    let mut counterexample = None;
    for t in 0..trials as u64 {
        let a = random_dense_hermitian(n, rng::mix_seed(base_seed, 3 * t));
        let b = random_dense_hermitian(n, rng::mix_seed(base_seed, 3 * t + 1));
        let mut rg = rng_from(rng::mix_seed(base_seed, 3 * t + 2));
        let g = random_tree_gcc_monomial(&mut rg, max_vertices, true);
        let x = rng::uniform_index(&mut rg, n as u64) as usize;
        let mut fs = FreeSum::new(a.clone(), b.clone(), x)?;
        let lhs = fs.operator_injective_trace(&g, OPERATOR_TRACE_BUDGET)?;
        let comps = colored_components(&g.graph);
        let mut rhs = Complex64::new(0.0, 0.0);
        for sigma in enumerate_amalgamations(&g, &comps, true, 8)? {
            let q = g.quotient(&sigma)?;
            rhs += injective_trace(&q, &[&a, &b], x, DEFAULT_EVAL_BUDGET)?;
        }
        let rel = (lhs - rhs).norm() / lhs.norm().max(rhs.norm()).max(1.0);
        cases += 1;
        max_rel = max_rel.max(rel);
        if rel > tol && counterexample.is_none() {
            counterexample = Some(format!(
                "seed {t}: monomial with {} vertices rooted at image {x}: \
                 operator {lhs}, amalgamation sum {rhs}",
                g.graph.n_vertices()
            ));
        }
    }
    Ok(LemmaResult {
        name: "trace_identity".into(),
        cases,
        max_error: max_rel,
        passed: counterexample.is_none(),
        counterexample,
    })
}

/// Glued products: the product of two rooted injective traces equals the sum
/// of injective traces of the root-glued monomial over all cross
/// identifications of the two sides' non-root vertices.
pub fn lemma_glued_product(
    n: usize,
    trials: usize,
    tol: f64,
    base_seed: u64,
) -> Result<LemmaResult> {
    if n < 2 || trials == 0 || !(tol > 0.0) {
        return Err(CoreError::Param("need n >= 2, trials >= 1, tol > 0".into()));
    }
    let mut cases = 0;
    let mut max_rel: f64 = 0.0;
    let mut counterexample = None;
    for t in 0..trials as u64 {
        let a = random_dense_hermitian(n, rng::mix_seed(base_seed, 3 * t));
        let b = random_dense_hermitian(n, rng::mix_seed(base_seed, 3 * t + 1));
        let mut rg = rng_from(rng::mix_seed(base_seed, 3 * t + 2));
        let h = random_monomial(&mut rg, 3, true);
        let h2 = random_monomial(&mut rg, 3, true);
        let x = rng::uniform_index(&mut rg, n as u64) as usize;
        let assign: [&HermitianMatrix; 2] = [&a, &b];
        let lhs = injective_trace(&h, &assign, x, DEFAULT_EVAL_BUDGET)?
            * injective_trace(&h2, &assign, x, DEFAULT_EVAL_BUDGET)?;
        let glued = glue_at_root(&h, &h2)?;
        let mut rhs = Complex64::new(0.0, 0.0);
        for sigma in cross_amalgamations(&h, &h2) {
            let q = glued.quotient(&sigma)?;
            rhs += injective_trace(&q, &assign, x, DEFAULT_EVAL_BUDGET)?;
        }
        let rel = (lhs - rhs).norm() / lhs.norm().max(rhs.norm()).max(1.0);
        cases += 1;
        max_rel = max_rel.max(rel);
        if rel > tol && counterexample.is_none() {
            counterexample = Some(format!(
                "seed {t}: sides with {} and {} vertices at root image {x}: \
                 product {lhs}, glued sum {rhs}",
                h.graph.n_vertices(),
                h2.graph.n_vertices()
            ));
        }
    }
    Ok(LemmaResult {
        name: "glued_product".into(),
        cases,
        max_error: max_rel,
        passed: counterexample.is_none(),
        counterexample,
    })
}

/// The single-label restriction of a two-label monomial: the subgraph of one
/// label's edges on its touched vertices, with its vertex and component
/// counts. `None` when the label is unused (empty restriction).
fn label_restriction(g: &GraphMonomial, label: usize) -> Option<(TestGraph, usize, usize)> {
    let edges: Vec<_> = g.graph.edges().iter().filter(|e| e.label == label).collect();
    if edges.is_empty() {
        return None;
    }
    let mut touched: Vec<usize> = edges.iter().flat_map(|e| [e.src, e.tar]).collect();
    touched.sort_unstable();
    touched.dedup();
    let local = |v: usize| touched.binary_search(&v).expect("touched vertex");
    let mut t = TestGraph::with_labels(touched.len(), &["x"]);
    for e in &edges {
        t.add_edge(local(e.src), local(e.tar), 0, e.star).expect("local indices in range");
    }
    let k = t.connected_component_count();
    Some((t, touched.len(), k))
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, j| acc * j as f64)
}

/// The closed form that permutation-averaged rooted traces factorize into:
/// a falling-factorial ratio times the two labels' normalized injective
/// traces, evaluated deterministically from the unconjugated inputs.
fn factorization_rhs(
    g: &GraphMonomial,
    a: &HermitianMatrix,
    b: &HermitianMatrix,
) -> Result<Complex64> {
    if !g.graph.is_connected() {
        return Err(CoreError::Param("factorization check needs a connected monomial".into()));
    }
    let n = a.n();
    let v_total = g.graph.n_vertices();
    let (ta, va, ka) = match label_restriction(g, 0) {
        Some((t, v, k)) => (normalized_injective_trace_multi(&t, &[a], DEFAULT_EVAL_BUDGET)?, v, k),
        None => (Complex64::new(1.0, 0.0), 0, 0),
    };
    let (tb, vb, kb) = match label_restriction(g, 1) {
        Some((t, v, k)) => (normalized_injective_trace_multi(&t, &[b], DEFAULT_EVAL_BUDGET)?, v, k),
        None => (Complex64::new(1.0, 0.0), 0, 0),
    };
    let ratio = factorial(n - va) * factorial(n - vb) / (factorial(n - v_total) * factorial(n - 1));
    let nf = n as f64;
    let powers = nf.powi(ka as i32 - 1) * nf.powi(kb as i32 - 1);
    Ok(ta * tb * ratio * powers)
}

/// Factorization of permutation-averaged traces: conjugating the two inputs
/// by independent uniform permutations makes the expected rooted injective
/// trace split into per-label normalized traces times an explicit
/// combinatorial ratio. Checked exactly by exhausting all permutation pairs
/// at size 5, and by Monte Carlo with a standard-error gate at size 12.
pub fn lemma_factorization() -> Result<LemmaResult> {
    let mut cases = 0;
    let mut max_error: f64 = 0.0;
    let mut counterexample = None;

    // Instances: mixed cycles plus a conjugated double edge.
    let mut instances: Vec<GraphMonomial> = vec![
        crate::traffic::cycle_monomial(2, &[0, 1])?,
        crate::traffic::cycle_monomial(3, &[0, 0, 1])?,
        crate::traffic::cycle_monomial(4, &[0, 1, 0, 1])?,
        crate::traffic::cycle_monomial(4, &[0, 0, 1, 1])?,
    ];
    let mut doubled = TestGraph::with_labels(3, &["a", "b"]);
    doubled.add_edge(0, 1, 0, Star::One)?;
    doubled.add_edge(0, 1, 0, Star::Conj)?;
    doubled.add_edge(1, 2, 1, Star::One)?;
    doubled.add_edge(2, 0, 1, Star::One)?;
    instances.push(GraphMonomial::new(doubled, 0, 0)?);

    // Exhaustive average over every permutation pair at n = 5.
    let n = 5;
    let a0 = random_dense_hermitian(n, 0xfac7_0001);
    let b0 = random_dense_hermitian(n, 0xfac7_0002);
    let perms = permutations(n);
    let conj_a: Vec<HermitianMatrix> =
        perms.iter().map(|p| a0.permute_conjugate(p).expect("permutation valid")).collect();
    let conj_b: Vec<HermitianMatrix> =
        perms.iter().map(|p| b0.permute_conjugate(p).expect("permutation valid")).collect();
    for g in &instances {
        let rhs = factorization_rhs(g, &a0, &b0)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for pa in &conj_a {
            for pb in &conj_b {
                acc += injective_trace(g, &[pa, pb], 0, DEFAULT_EVAL_BUDGET)?;
            }
        }
        let lhs = acc / (perms.len() * perms.len()) as f64;
        let rel = (lhs - rhs).norm() / lhs.norm().max(rhs.norm()).max(1.0);
        cases += 1;
        max_error = max_error.max(rel);
        if rel > LEMMA_TOL && counterexample.is_none() {
            counterexample = Some(format!(
                "exhaustive n = {n}, monomial with {} vertices: average {lhs}, closed form {rhs}",
                g.graph.n_vertices()
            ));
        }
    }

    // Monte Carlo at n = 12 against the same closed form.
    let n = 12;
    let a1 = random_dense_hermitian(n, 0xfac7_0003);
    let b1 = random_dense_hermitian(n, 0xfac7_0004);
    let g = &instances[2];
    let rhs = factorization_rhs(g, &a1, &b1)?;
    let mut rg = rng_from(0xfac7_0005);
    let trials = 3000;
    let mut samples = Vec::with_capacity(trials);
    for _ in 0..trials {
        let pa = rng::random_permutation(&mut rg, n);
        let pb = rng::random_permutation(&mut rg, n);
        let v = injective_trace(
            g,
            &[&a1.permute_conjugate(&pa)?, &b1.permute_conjugate(&pb)?],
            0,
            DEFAULT_EVAL_BUDGET,
        )?;
        samples.push(v);
    }
    let mean = samples.iter().sum::<Complex64>() / trials as f64;
    let var = samples.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (trials - 1) as f64;
    let stderr = (var / trials as f64).sqrt();
    let dev = (mean - rhs).norm();
    let gate = 5.0 * stderr + 1e-9 * rhs.norm().max(1.0);
    cases += 1;
    max_error = max_error.max(dev);
    if dev > gate && counterexample.is_none() {
        counterexample = Some(format!(
            "Monte Carlo n = {n}: mean {mean} vs closed form {rhs}, \
             deviation {dev:.3e} exceeds 5 standard errors ({gate:.3e})"
        ));
    }

    Ok(LemmaResult {
        name: "factorization".into(),
        cases,
        max_error,
        passed: counterexample.is_none(),
        counterexample,
    })
}

/// Run every lemma check with its default exhaustive or sampled instance
/// set.
pub fn lemma_suite() -> Result<LemmaSuiteReport> {
    let results = vec![
        lemma_merge_monotonicity(3)?,
        lemma_morphism_count()?,
        lemma_trace_identity(7, 20, 5, LEMMA_TOL, 0x7e57_0001)?,
        lemma_glued_product(6, 15, LEMMA_TOL, 0x7e57_0002)?,
        lemma_factorization()?,
    ];
    let passed = results.iter().all(|r| r.passed);
    Ok(LemmaSuiteReport { schema_version: REPORT_SCHEMA_VERSION, results, passed })
}

// ---------------------------------------------------------------------------
// Markov bound on non-tree-like roots.
// ---------------------------------------------------------------------------

/// How the ball radius scales with the matrix size.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum RadiusRule {
    /// The same radius at every size.
    Fixed { radius: usize },
    /// `floor(kappa * ln n)`; for sparsity constants above 1 the slope must
    /// stay below `1 / (2 ln C)`, the regime where the bound is meaningful.
    KappaLog { kappa: f64 },
}

/// One grid row of the Markov bound check.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MarkovRow {
    pub n_dim: usize,
    pub radius: usize,
    pub mean_complement: f64,
    pub upper_ci: f64,
    pub bound: f64,
    pub passed: bool,
}

/// Report of the Markov bound check across a size grid.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MarkovReport {
    pub schema_version: u32,
    pub family: ModelFamily,
    pub c_param: f64,
    pub rows: Vec<MarkovRow>,
    pub trials: usize,
    pub seed_lo: u64,
    pub seed_hi: u64,
    pub passed: bool,
}

fn bootstrap_upper(samples: &[f64], resamples: usize, q: f64, seed: u64) -> f64 {
    let t = samples.len();
    if t == 1 {
        return samples[0];
    }
    let mut rg = rng_from(seed);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| {
            let mut s = 0.0;
            for _ in 0..t {
                s += samples[rng::uniform_index(&mut rg, t as u64) as usize];
            }
            s / t as f64
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let idx = ((q * resamples as f64).ceil() as usize).clamp(1, resamples) - 1;
    means[idx]
}

/// Monte Carlo check that the expected number of roots whose colored ball is
/// not tree-like stays below `(e C^2)^radius`: draws independent summand
/// pairs across the size grid, counts non-tree roots, and compares a
/// bootstrap 95% upper confidence bound of the mean against the bound.
pub fn markov_bound_check(
    family: &ModelFamily,
    c_param: f64,
    n_grid: &[usize],
    rule: RadiusRule,
    trials: usize,
    base_seed: u64,
) -> Result<MarkovReport> {
    if n_grid.is_empty() || trials == 0 {
        return Err(CoreError::Param("need at least one size and one trial".into()));
    }
    if !(c_param > 0.0) || !c_param.is_finite() {
        return Err(CoreError::Param(format!(
            "sparsity constant must be positive and finite, got {c_param}"
        )));
    }
    if let RadiusRule::KappaLog { kappa } = rule {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(CoreError::Param(format!("radius slope must be positive, got {kappa}")));
        }
        if c_param > 1.0 {
            let limit = 1.0 / (2.0 * c_param.ln());
            if kappa >= limit {
                return Err(CoreError::Param(format!(
                    "radius slope {kappa} must stay below 1/(2 ln C) = {limit:.4} \
                     for sparsity constant {c_param}"
                )));
            }
        }
    }
    let mut rows = Vec::new();
    let mut seed = base_seed;
    for &n in n_grid {
        let radius = match rule {
            RadiusRule::Fixed { radius } => radius,
            RadiusRule::KappaLog { kappa } => (kappa * (n as f64).ln()).floor() as usize,
        };
        let mut samples = Vec::with_capacity(trials);
        for _ in 0..trials {
            let a = ModelSpec::new(family.clone(), n, seed).generate()?;
            let b = ModelSpec::new(family.clone(), n, seed + 1).generate()?;
            seed += 2;
            samples.push((n - count_tree_vertices(&a, &b, radius)?) as f64);
        }
        let mean = samples.iter().sum::<f64>() / trials as f64;
        let upper = bootstrap_upper(
            &samples,
            BOOTSTRAP_RESAMPLES,
            0.95,
            rng::mix_seed(base_seed, 0xb007 + n as u64),
        );
        let bound = (std::f64::consts::E * c_param * c_param).powi(radius as i32);
        rows.push(MarkovRow {
            n_dim: n,
            radius,
            mean_complement: mean,
            upper_ci: upper,
            bound,
            passed: upper <= bound + 1e-12,
        });
    }
    let passed = rows.iter().all(|r| r.passed);
    Ok(MarkovReport {
        schema_version: REPORT_SCHEMA_VERSION,
        family: family.clone(),
        c_param,
        rows,
        trials,
        seed_lo: base_seed,
        seed_hi: seed - 1,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traffic::cycle_monomial;

    fn single_label_double_edge() -> TestGraph {
        let mut g = TestGraph::with_labels(2, &["x"]);
        g.add_edge(0, 1, 0, Star::One).unwrap();
        g.add_edge(1, 0, 0, Star::One).unwrap();
        g
    }

    #[test]
    fn frobenius_moment_of_zero_matrix_vanishes() {
        let z = HermitianMatrix::zero(10);
        for m in 1..=4 {
            assert_eq!(frobenius_moment(&z, m).unwrap(), 0.0, "zero matrix at power {m}");
        }
    }

    #[test]
    fn frobenius_moment_matches_eigenvalue_power_sum() {
        let x = random_dense_hermitian(12, 41);
        for m in 1..=3u32 {
            let direct = frobenius_moment(&x, m).unwrap();
            let spectral =
                x.eigenvalues().iter().map(|l| l.powi(2 * m as i32)).sum::<f64>() / 12.0;
            assert!(
                (direct - spectral).abs() <= 1e-9 * spectral.max(1.0),
                "power {m}: {direct} vs spectral {spectral}"
            );
        }
    }

    #[test]
    fn frobenius_sample_never_exceeds_operator_norm_power() {
        let families = [
            ModelFamily::ErdosRenyi { p: 0.2 },
            ModelFamily::SparseBounded { c: 2 },
        ];
        for family in families {
            for seed in 50..55 {
                let x = ModelSpec::new(family.clone(), 40, seed).generate().unwrap();
                let opnorm = x.eigenvalues().iter().fold(0.0f64, |a, l| a.max(l.abs()));
                let m = 3;
                let v = frobenius_moment(&x, m).unwrap();
                assert!(
                    v <= opnorm.powi(2 * m as i32) * (1.0 + 1e-9) + 1e-12,
                    "{family:?} seed {seed}: {v} exceeds opnorm bound {}",
                    opnorm.powi(2 * m as i32)
                );
            }
        }
    }

    #[test]
    fn frobenius_chat_stays_bounded_in_catalan_regime() {
        // Edge density ln^2(n)/n with the power from the slow-growth window;
        // the estimated constant should show no growth trend across sizes.
        let mut c_hats = Vec::new();
        for n in [100usize, 200, 400] {
            let p = (n as f64).ln().powi(2) / n as f64;
            let np = (n as f64) * p;
            let m = (np.ln() / np.ln().ln()).round() as u32;
            let spec = ModelSpec::new(ModelFamily::ErdosRenyi { p }, n, 7000);
            let report = check_frobenius(&spec, m, 5, 4.0).unwrap();
            let c_hat = report
                .estimates
                .iter()
                .find(|e| e.name == "c_hat")
                .expect("c_hat estimate present")
                .value;
            assert!(c_hat.is_finite() && c_hat <= 4.0, "n = {n}: c_hat = {c_hat}");
            assert!(report.passed, "n = {n} should pass at threshold 4");
            c_hats.push(c_hat);
        }
        let lo = c_hats.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let hi = c_hats.iter().fold(0.0f64, |a, &b| a.max(b));
        assert!(hi / lo <= 1.75, "growth trend across sizes: {c_hats:?}");
    }

    #[test]
    fn frobenius_power_overflow_is_refused() {
        let x = random_dense_hermitian(8, 3).scale(1e150);
        let err = frobenius_moment(&x, 3).unwrap_err();
        assert!(matches!(err, CoreError::Param(_)), "got {err:?}");
    }

    #[test]
    fn frobenius_check_respects_desk_caps() {
        let spec = ModelSpec::new(ModelFamily::ErdosRenyi { p: 0.5 }, 5000, 1);
        assert!(matches!(
            check_frobenius(&spec, 2, 1, 4.0).unwrap_err(),
            CoreError::CapExceeded(_)
        ));
        let small = ModelSpec::new(ModelFamily::ErdosRenyi { p: 0.5 }, 10, 1);
        assert!(matches!(check_frobenius(&small, 0, 1, 4.0).unwrap_err(), CoreError::Param(_)));
    }

    #[test]
    fn injective_growth_double_edge_cycle_has_small_exponent() {
        // The double edge evaluates to (1/n) sum |X_ij|^2, an O(1) quantity,
        // so the fitted exponent should sit near zero.
        let report = check_injective_growth(
            &ModelFamily::ErdosRenyi { p: 0.2 },
            &[40, 80],
            &[single_label_double_edge()],
            2,
            1.0,
            8,
            0.35,
            900,
        )
        .unwrap();
        assert!(report.passed, "double-edge exponents too large: {:?}", report.estimates);
        for e in report.estimates.iter().filter(|e| e.name.starts_with("h_hat")) {
            assert!(e.value.abs() <= 0.35, "{}: {}", e.name, e.value);
        }
        for e in report.estimates.iter().filter(|e| e.name.starts_with("max_abs")) {
            assert!(e.value > 0.2 && e.value < 4.0, "{}: {}", e.name, e.value);
        }
    }

    #[test]
    fn single_edge_antithetic_pair_cancels_exactly() {
        // For a sign-symmetric entry law, averaging a graph value over X and
        // -X realizes the expectation over the sign group; any graph with an
        // odd edge count is killed exactly, single multiplicity-1 edges
        // included.
        let mut edge = TestGraph::with_labels(2, &["x"]);
        edge.add_edge(0, 1, 0, Star::One).unwrap();
        let mut tri = TestGraph::with_labels(3, &["x"]);
        tri.add_edge(0, 1, 0, Star::One).unwrap();
        tri.add_edge(1, 2, 0, Star::One).unwrap();
        tri.add_edge(2, 0, 0, Star::One).unwrap();
        let spec = ModelSpec::new(
            ModelFamily::DilutedWigner { h: 1.0, eps: 0.5, atom: None },
            50,
            77,
        );
        let x = spec.generate().unwrap();
        let neg = x.scale(-1.0);
        for g in [&edge, &tri] {
            let v = normalized_injective_trace_multi(g, &[&x], DEFAULT_EVAL_BUDGET).unwrap();
            let w = normalized_injective_trace_multi(g, &[&neg], DEFAULT_EVAL_BUDGET).unwrap();
            assert_eq!(v + w, Complex64::new(0.0, 0.0), "odd edge count must cancel exactly");
        }
    }

    #[test]
    fn injective_growth_refuses_oversized_graphs() {
        let mut path = TestGraph::with_labels(5, &["x"]);
        for v in 0..4 {
            path.add_edge(v, v + 1, 0, Star::One).unwrap();
        }
        let err = check_injective_growth(
            &ModelFamily::ErdosRenyi { p: 0.2 },
            &[40],
            &[path],
            2,
            1.0,
            2,
            1.0,
            1,
        )
        .unwrap_err();
        assert!(matches!(err, CoreError::CapExceeded(_)), "got {err:?}");
    }

    #[test]
    fn entrywise_all_ones_mask_is_identity() {
        let spec = ModelSpec::new(ModelFamily::ErdosRenyi { p: 0.3 }, 16, 3000);
        let monomials =
            vec![cycle_monomial(2, &[0, 0]).unwrap(), cycle_monomial(3, &[0, 0, 0]).unwrap()];
        let report =
            check_entrywise_product(&spec, MaskKind::AllOnes, &monomials, 4).unwrap();
        assert!(report.passed);
        assert_eq!(report.estimates[0].value, 0.0, "identity mask must be exact");
    }

    #[test]
    fn entrywise_scaled_mask_scales_terms_by_edge_count() {
        let spec = ModelSpec::new(ModelFamily::ErdosRenyi { p: 0.3 }, 16, 3001);
        let monomials =
            vec![cycle_monomial(2, &[0, 0]).unwrap(), cycle_monomial(3, &[0, 0, 0]).unwrap()];
        let report =
            check_entrywise_product(&spec, MaskKind::ScaledOnes { eps: 0.25 }, &monomials, 4)
                .unwrap();
        assert!(report.passed, "scaling defect: {:?}", report.estimates);
        assert!(report.estimates[0].value <= 1e-12);
    }

    #[test]
    fn entrywise_random_signs_preserve_term_moduli() {
        let spec = ModelSpec::new(ModelFamily::ErdosRenyi { p: 0.3 }, 16, 3002);
        let monomials =
            vec![cycle_monomial(2, &[0, 0]).unwrap(), cycle_monomial(3, &[0, 0, 0]).unwrap()];
        let report =
            check_entrywise_product(&spec, MaskKind::RandomSigns, &monomials, 4).unwrap();
        assert!(report.passed);
        assert_eq!(report.estimates[0].value, 0.0, "sign flips must preserve moduli exactly");
    }

    #[test]
    fn hadamard_product_with_signs_is_hermitian_and_exact() {
        let x = random_dense_hermitian(10, 9);
        let signs = sign_mask(10, 10);
        let w = hadamard_product(&x, &signs).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                let expect = x.entry(i, j) * signs.entry(i, j);
                assert_eq!(w.entry(i, j), expect, "entry ({i}, {j})");
            }
        }
    }

    #[test]
    fn stirling_ratio_single_vertex_is_exact() {
        let r = stirling_ratio(100, 1).unwrap();
        assert_eq!(r.exact, 100.0);
        assert_eq!(r.rel_error, 0.0);
    }

    #[test]
    fn stirling_ratio_two_vertices_error_is_one_over_n() {
        for n in [100u64, 10_000] {
            let r = stirling_ratio(n, 2).unwrap();
            assert!(
                (r.rel_error - 1.0 / n as f64).abs() <= 1e-14,
                "n = {n}: {}",
                r.rel_error
            );
        }
    }

    #[test]
    fn stirling_ratio_error_shrinks_with_n() {
        let grid = [1_000u64, 10_000, 100_000];
        let errs: Vec<f64> = grid.iter().map(|&n| stirling_ratio(n, 20).unwrap().rel_error).collect();
        for w in errs.windows(2) {
            assert!(w[1] < w[0], "errors not decreasing: {errs:?}");
        }
        // Quadratic envelope with constant one at the middle grid point.
        assert!(errs[1] <= 400.0 / 10_000.0, "n = 10^4, v = 20: {}", errs[1]);
    }

    #[test]
    fn ratio_checks_refuse_invalid_regimes() {
        assert!(matches!(stirling_ratio(100, 10).unwrap_err(), CoreError::Param(_)));
        // Two single-vertex components merged disjointly: positive exponent.
        assert!(matches!(gamma_ratio(100, 2, 1, 1, 1, 1).unwrap_err(), CoreError::Param(_)));
        assert!(matches!(gamma_ratio(100, 5, 2, 2, 1, 1).unwrap_err(), CoreError::Param(_)));
    }

    #[test]
    fn gamma_ratio_small_case_matches_hand_value() {
        // n = 10, both sides a connected pair, fully merged:
        // 10 * 8! * 8! / (8! * 10!) = 1/9 against leading order 1/10.
        let r = gamma_ratio(10, 2, 2, 2, 1, 1).unwrap();
        assert!((r.exact - 1.0 / 9.0).abs() <= 1e-12, "exact {}", r.exact);
        assert_eq!(r.exponent, -1.0);
        assert!((r.rel_error - 1.0 / 9.0).abs() <= 1e-12, "rel {}", r.rel_error);
    }

    #[test]
    fn gamma_ratio_error_within_quadratic_envelope() {
        let mut rg = rng_from(500);
        for n in [1_000u64, 10_000] {
            let mut checked = 0;
            while checked < 50 {
                let v1 = 1 + rng::uniform_index(&mut rg, 8);
                let v2 = 1 + rng::uniform_index(&mut rg, 8);
                let k1 = 1 + rng::uniform_index(&mut rg, v1);
                let k2 = 1 + rng::uniform_index(&mut rg, v2);
                let lo = v1.max(v2);
                let v = lo + rng::uniform_index(&mut rg, v1 + v2 - lo + 1);
                let eta = (k1 + k2) as i64 - 1 - v1 as i64 - v2 as i64 + v as i64;
                if eta > 0 {
                    continue;
                }
                let r = gamma_ratio(n, v, v1, v2, k1, k2).unwrap();
                assert!(
                    r.rel_error <= (v * v) as f64 / n as f64,
                    "n = {n}, v = {v}, v1 = {v1}, v2 = {v2}, k1 = {k1}, k2 = {k2}: \
                     rel {} above envelope",
                    r.rel_error
                );
                checked += 1;
            }
        }
    }

    #[test]
    fn two_label_eta_shortcut_matches_component_graph() {
        // The inline defect formula against the full component-graph view,
        // across every enumerated support.
        for n in 1..=3 {
            for s in support_sides(n) {
                let mut g = TestGraph::with_labels(s.n, &["a", "b"]);
                for &(u, v) in &s.a {
                    g.add_edge(u, v, 0, Star::One).unwrap();
                }
                for &(u, v) in &s.b {
                    g.add_edge(u, v, 1, Star::One).unwrap();
                }
                assert_eq!(s.eta, gcc(&g).unwrap().eta(), "support {:?} / {:?}", s.a, s.b);
            }
        }
    }

    #[test]
    fn component_defect_ignores_multiplicities() {
        // Duplicating edges never moves the defect: the reduction from
        // labeled multigraphs to supports is lossless for this lemma.
        let mut rg = rng_from(2500);
        for _ in 0..40 {
            let g = random_monomial(&mut rg, 3, true);
            let mut doubled = TestGraph::with_labels(g.graph.n_vertices(), &["a", "b"]);
            for e in g.graph.edges() {
                doubled.add_edge(e.src, e.tar, e.label, e.star).unwrap();
                doubled.add_edge(e.src, e.tar, e.label, Star::Conj).unwrap();
            }
            assert_eq!(
                gcc(&g.graph).unwrap().eta(),
                gcc(&doubled).unwrap().eta(),
                "multiplicity changed the defect"
            );
        }
    }

    #[test]
    fn merge_monotonicity_holds_exhaustively_for_two_vertex_sides() {
        let r = lemma_merge_monotonicity(2).unwrap();
        assert!(r.passed, "counterexample: {:?}", r.counterexample);
        assert!(r.cases > 100, "expected a real search, got {} cases", r.cases);
        assert_eq!(r.max_error, 0.0);
    }

    #[test]
    fn morphism_counts_agree_on_mixed_two_path() {
        let mut path = TestGraph::with_labels(3, &["a", "b"]);
        path.add_edge(0, 1, 0, Star::One).unwrap();
        path.add_edge(1, 2, 1, Star::One).unwrap();
        let g = GraphMonomial::new(path, 0, 0).unwrap();
        assert_eq!(count_component_injective_maps(&g, 3, 0).unwrap(), 4);
        let ones = all_ones(3);
        let mut fs = FreeSum::new(ones.clone(), ones, 0).unwrap();
        let t = fs.operator_injective_trace(&g, OPERATOR_TRACE_BUDGET).unwrap();
        assert!((t - Complex64::new(4.0, 0.0)).norm() < 1e-12, "operator count {t}");
        let r = lemma_morphism_count().unwrap();
        assert!(r.passed, "counterexample: {:?}", r.counterexample);
    }

    #[test]
    fn operator_and_matrix_traces_agree_on_tree_monomials() {
        let r = lemma_trace_identity(7, 12, 5, 1e-10, 0xabc).unwrap();
        assert!(r.passed, "counterexample: {:?}", r.counterexample);
        assert_eq!(r.cases, 12);
    }

    #[test]
    fn rooted_trace_products_expand_over_cross_matchings() {
        let r = lemma_glued_product(6, 10, 1e-10, 0xdef).unwrap();
        assert!(r.passed, "counterexample: {:?}", r.counterexample);
    }

    #[test]
    fn permutation_averaged_traces_factorize_exactly() {
        let r = lemma_factorization().unwrap();
        assert!(r.passed, "counterexample: {:?}", r.counterexample);
        assert_eq!(r.cases, 6, "five exhaustive instances plus one Monte Carlo");
    }

    #[test]
    fn lemma_suite_aggregates_all_pass() {
        let report = lemma_suite().unwrap();
        assert_eq!(report.results.len(), 5);
        assert!(report.passed, "failing lemmas: {:?}", report
            .results
            .iter()
            .filter(|r| !r.passed)
            .map(|r| &r.name)
            .collect::<Vec<_>>());
        let json = serde_json::to_string(&report).unwrap();
        let back: LemmaSuiteReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn markov_complement_is_zero_at_radius_zero() {
        let report = markov_bound_check(
            &ModelFamily::SparseBounded { c: 2 },
            2.0,
            &[60],
            RadiusRule::Fixed { radius: 0 },
            5,
            42,
        )
        .unwrap();
        assert!(report.passed);
        assert_eq!(report.rows[0].mean_complement, 0.0, "radius-0 balls are trees");
        assert_eq!(report.rows[0].bound, 1.0);
    }

    #[test]
    fn disjoint_supports_are_tree_like_at_all_radii() {
        // One matching on the low half, one on the high half: every root
        // sees at most one edge, so every ball is a tree.
        let n = 40;
        let half: Vec<(usize, usize, Complex64)> =
            (0..10).map(|i| (2 * i, 2 * i + 1, Complex64::new(1.0, 0.0))).collect();
        let upper: Vec<(usize, usize, Complex64)> =
            (0..10).map(|i| (20 + 2 * i, 20 + 2 * i + 1, Complex64::new(1.0, 0.0))).collect();
        let a = HermitianMatrix::from_upper_triangle(n, &half).unwrap();
        let b = HermitianMatrix::from_upper_triangle(n, &upper).unwrap();
        for radius in 0..4 {
            assert_eq!(count_tree_vertices(&a, &b, radius).unwrap(), n, "radius {radius}");
        }
    }

    #[test]
    fn markov_bound_holds_for_sparse_pairs() {
        let report = markov_bound_check(
            &ModelFamily::SparseBounded { c: 1 },
            1.0,
            &[80, 160],
            RadiusRule::Fixed { radius: 1 },
            30,
            777,
        )
        .unwrap();
        assert!(report.passed, "rows: {:?}", report.rows);
        for row in &report.rows {
            assert!(row.upper_ci <= row.bound, "row {row:?}");
        }
    }

    #[test]
    fn kappa_rule_requires_proof_regime() {
        let err = markov_bound_check(
            &ModelFamily::SparseBounded { c: 2 },
            2.0,
            &[50],
            RadiusRule::KappaLog { kappa: 0.9 },
            2,
            1,
        )
        .unwrap_err();
        assert!(matches!(err, CoreError::Param(_)), "got {err:?}");
        let ok = markov_bound_check(
            &ModelFamily::SparseBounded { c: 2 },
            2.0,
            &[50],
            RadiusRule::KappaLog { kappa: 0.5 },
            2,
            1,
        )
        .unwrap();
        assert_eq!(ok.rows[0].radius, (0.5 * (50f64).ln()).floor() as usize);
    }

    #[test]
    fn assumption_reports_round_trip_as_json() {
        let spec = ModelSpec::new(ModelFamily::ErdosRenyi { p: 0.3 }, 16, 5);
        let report = check_frobenius(&spec, 2, 2, 10.0).unwrap();
        assert_eq!(report.schema_version, REPORT_SCHEMA_VERSION);
        assert_eq!(report.trials, 2);
        assert_eq!(report.seed_hi, 6);
        let json = serde_json::to_string(&report).unwrap();
        let back: AssumptionReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }
}
