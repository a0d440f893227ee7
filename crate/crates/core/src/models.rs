//! Random Hermitian matrix model families.
//!
//! Four families share one interface: a `ModelSpec` (family parameters,
//! dimension, seed) is a pure recipe, and `generate` maps equal specs to
//! byte-identical matrices. All families produce real symmetric matrices with
//! zero or real diagonals.
//!
//! * `ErdosRenyi` - centered, variance-normalized adjacency of G(N, p): zero
//!   diagonal, every off-diagonal entry is one of the two values
//!   (1-p)/sqrt(Np(1-p)) (edge) or -p/sqrt(Np(1-p)) (non-edge).
//! * `DilutedWigner` - i.i.d. upper-triangle entries from the three-point law
//!   {-t, 0, +t}/sqrt(N) with P(+-t/sqrt(N)) = 1/(2t^2), so N E x^2 = 1
//!   exactly. By default t = ln(N)^h; `atom` overrides t. Generation
//!   validates the high-moment growth condition
//!   N |E x^k1 conj(x)^k2| <= ln(N)^(h (k1+k2)) / N^eps for 2 <= k1, k2 in
//!   the configured window and refuses specs that violate it.
//! * `SparseBounded` - certified row sparsity and operator norm at most `c`:
//!   for c = 1 a uniform maximal matching (fixed-point-free involution); for
//!   c >= 2 a symmetrized sum of floor(c/2) uniform permutations with unit
//!   weights.
//! * `PermutationSum` - the raw construction: sum of `d` independent uniform
//!   permutation matrices, each symmetrized as P + P^T, scaled by `weight`.
//!   Row sparsity is at most 2d and the operator norm at most 2d|weight|.

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::matrix::{HermitianMatrix, Storage};
use crate::rng;

/// Model family with its parameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelFamily {
    ErdosRenyi {
        p: f64,
    },
    DilutedWigner {
        h: f64,
        eps: f64,
        /// Optional override for the atom scale t (default ln(N)^h).
        #[serde(default)]
        atom: Option<f64>,
    },
    SparseBounded {
        c: u32,
    },
    PermutationSum {
        d: u32,
        #[serde(default = "default_weight")]
        weight: f64,
    },
}

fn default_weight() -> f64 {
    1.0
}

/// A complete, reproducible matrix recipe.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelSpec {
    pub family: ModelFamily,
    pub n: usize,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(family: ModelFamily, n: usize, seed: u64) -> Self {
        Self { family, n, seed }
    }

    /// Sample the matrix. Equal specs give identical results.
    pub fn generate(&self) -> Result<HermitianMatrix> {
        let n = self.n;
        if n == 0 {
            return Err(CoreError::Param("dimension must be positive".into()));
        }
        let mut rng = rng::rng_from(self.seed);
        match self.family {
            ModelFamily::ErdosRenyi { p } => gen_erdos_renyi(n, p, &mut rng),
            ModelFamily::DilutedWigner { h, eps, atom } => {
                gen_diluted_wigner(n, h, eps, atom, &mut rng)
            }
            ModelFamily::SparseBounded { c } => gen_sparse_bounded(n, c, &mut rng),
            ModelFamily::PermutationSum { d, weight } => {
                gen_permutation_sum(n, d, weight, &mut rng)
            }
        }
    }
}

fn gen_erdos_renyi(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Result<HermitianMatrix> {
    if !(p > 0.0 && p < 1.0) {
        return Err(CoreError::Param(format!(
            "edge probability must lie strictly in (0, 1), got {p}"
        )));
    }
    let s = (n as f64 * p * (1.0 - p)).sqrt();
    let edge = (1.0 - p) / s;
    let hole = -p / s;
    let mut entries = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = if rng::uniform_f64(rng) < p { edge } else { hole };
            entries.push((i, j, Complex64::new(v, 0.0)));
        }
    }
    let mut m = HermitianMatrix::from_upper_triangle(n, &entries)?;
    m.set_storage(Storage::Dense);
    Ok(m)
}

/// Default atom scale for the diluted Wigner family.
pub fn diluted_atom_scale(n: usize, h: f64) -> f64 {
    (n as f64).ln().powf(h)
}

/// One draw of the three-point entry law {-t, 0, +t}/sqrt(N).
fn diluted_entry(rng: &mut ChaCha8Rng, t: f64, n: usize) -> f64 {
    let u = rng::uniform_f64(rng);
    let p_half = 1.0 / (2.0 * t * t);
    let scale = t / (n as f64).sqrt();
    if u < p_half {
        scale
    } else if u < 2.0 * p_half {
        -scale
    } else {
        0.0
    }
}

/// Check the high-moment growth condition for the three-point law:
/// N |E x^k1 conj(x)^k2| <= ln(N)^(h (k1+k2)) / N^eps for all
/// 2 <= k1, k2 <= window. Works in logs to avoid overflow.
pub fn diluted_moment_condition(
    n: usize,
    h: f64,
    eps: f64,
    t: f64,
    window: u32,
) -> Result<()> {
    let ln_n = (n as f64).ln();
    let ln_ln_n = ln_n.ln();
    let ln_t = t.ln();
    for k1 in 2..=window {
        for k2 in 2..=window {
            let k = k1 + k2;
            if k % 2 == 1 {
                continue; // symmetric law: odd moments vanish
            }
            // ln( N E|x|^k ) for the three-point law.
            let lhs = ln_n + (k as f64 - 2.0) * ln_t - (k as f64 / 2.0) * ln_n;
            let rhs = h * k as f64 * ln_ln_n - eps * ln_n;
            if lhs > rhs + 1e-12 {
                return Err(CoreError::Param(format!(
                    "entry law violates the moment growth condition at \
                     (k1, k2) = ({k1}, {k2}): ln(N E|x|^{k}) = {lhs:.4} > {rhs:.4}"
                )));
            }
        }
    }
    Ok(())
}

/// Default moment-condition window: the truncation order ln N / ln ln N that
/// the series arguments use, floored and clamped to at least 2.
pub fn default_moment_window(n: usize) -> u32 {
    let ln_n = (n as f64).ln();
    if n < 3 {
        return 2;
    }
    (ln_n / ln_n.ln()).floor().max(2.0) as u32
}

fn gen_diluted_wigner(
    n: usize,
    h: f64,
    eps: f64,
    atom: Option<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<HermitianMatrix> {
    if n < 3 {
        return Err(CoreError::Param(
            "diluted Wigner needs n >= 3 (ln ln N must be defined)".into(),
        ));
    }
    let t = atom.unwrap_or_else(|| diluted_atom_scale(n, h));
    if !(t >= 1.0) {
        return Err(CoreError::Param(format!(
            "atom scale t must be at least 1 so the entry law is a distribution, got {t}"
        )));
    }
    diluted_moment_condition(n, h, eps, t, default_moment_window(n))?;
    let mut entries = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = diluted_entry(rng, t, n);
            if v != 0.0 {
                entries.push((i, j, Complex64::new(v, 0.0)));
            }
        }
    }
    HermitianMatrix::from_upper_triangle(n, &entries)
}

fn gen_sparse_bounded(n: usize, c: u32, rng: &mut ChaCha8Rng) -> Result<HermitianMatrix> {
    if c == 0 {
        return Err(CoreError::Param("sparsity bound c must be positive".into()));
    }
    if c == 1 {
        // Uniform maximal matching: pair up a shuffled vertex list. Every row
        // has at most one nonzero (exactly one for even n), all entries 1,
        // operator norm exactly 1 on the matched part.
        let mut verts: Vec<usize> = (0..n).collect();
        rng::shuffle(rng, &mut verts);
        let mut entries = Vec::with_capacity(n / 2);
        for pair in verts.chunks_exact(2) {
            let (u, v) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            entries.push((u, v, Complex64::new(1.0, 0.0)));
        }
        return HermitianMatrix::from_upper_triangle(n, &entries);
    }
    // Symmetrized permutations contribute up to 2 nonzeros and norm 2 each,
    // so floor(c/2) of them keeps both the row sparsity and the norm at or
    // below c.
    gen_permutation_sum(n, c / 2, 1.0, rng)
}

fn gen_permutation_sum(
    n: usize,
    d: u32,
    weight: f64,
    rng: &mut ChaCha8Rng,
) -> Result<HermitianMatrix> {
    if d == 0 {
        return Err(CoreError::Param("permutation count d must be positive".into()));
    }
    if !weight.is_finite() || weight == 0.0 {
        return Err(CoreError::Param(format!(
            "weight must be finite and nonzero, got {weight}"
        )));
    }
    // Accumulate w (P + P^T) over d permutations; a fixed point lands 2w on
    // the diagonal and a 2-cycle doubles the off-diagonal entry.
    let mut acc: std::collections::BTreeMap<(usize, usize), f64> =
        std::collections::BTreeMap::new();
    for _ in 0..d {
        let perm = rng::random_permutation(rng, n);
        for (i, &pi) in perm.iter().enumerate() {
            let key = (i.min(pi), i.max(pi));
            *acc.entry(key).or_insert(0.0) += if i == pi { 2.0 * weight } else { weight };
        }
    }
    let entries: Vec<(usize, usize, Complex64)> = acc
        .into_iter()
        .map(|((i, j), v)| (i, j, Complex64::new(v, 0.0)))
        .collect();
    HermitianMatrix::from_upper_triangle(n, &entries)
}

/// Max over rows of the combined nonzero count of the pair: the joint
/// sparsity degree of the two-colored graph on 0..n.
pub fn pair_sparsity_degree(a: &HermitianMatrix, b: &HermitianMatrix) -> usize {
    (0..a.n())
        .map(|i| a.row_nnz(i) + b.row_nnz(i))
        .max()
        .unwrap_or(0)
}

/// Smallest single constant that bounds both operator norms (via Gershgorin)
/// and the joint sparsity degree of the pair.
pub fn pair_constant(a: &HermitianMatrix, b: &HermitianMatrix) -> f64 {
    let norms = a.gershgorin_bound().max(b.gershgorin_bound());
    norms.max(pair_sparsity_degree(a, b) as f64)
}
