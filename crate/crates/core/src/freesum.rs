//! The amalgamated free sum of two Hermitian matrices, realized as the
//! adjacency operator of an infinite rooted weighted graph.
//!
//! Vertices are alternating tuples (j1, .., jn, side) over [N] with a
//! distinguished root x: x != j1 and consecutive indices differ. Every vertex
//! belongs to exactly one "a-side" copy of [N] and one "b-side" copy; within
//! a copy the projection to the last index is a bijection, and the operator
//! restricted to the copy is the corresponding matrix under that bijection.
//! The graph is expanded lazily: only vertices reached by walks, balls, or
//! word applications ever materialize, and zero-amplitude edges are pruned,
//! which is exactly the sparsity the moment bounds exploit.
//!
//! On top of the operator this module computes exact rooted moments two ways
//! (a walk sum on the graph and a combinatorial sum over quotient monomials
//! with tree component structure), the colored girth of a vertex in the
//! combined support graph of the two matrices, and the root diagonal of
//! centered alternating words — the numerical witness of freeness over the
//! diagonal.

use crate::error::{CoreError, Result};
use crate::matrix::HermitianMatrix;
use crate::traffic::eval::{injective_trace, DEFAULT_EVAL_BUDGET};
use crate::traffic::partitions::{enumerate_amalgamations, enumerate_partitions};
use crate::traffic::{colored_components, cycle_monomial, gcc, GraphMonomial, Star, TestGraph};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::collections::HashMap;

/// Default cap on how many graph vertices a walk or ball may materialize.
pub const DEFAULT_WALK_BUDGET: usize = 2_000_000;

/// Which of the two summands a copy of [N] belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }
}

/// A vertex of the free-sum graph in explicit tuple form: the index path
/// from the root and the side of the last step (`None` for the root itself).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FreeVertex {
    pub indices: Vec<u32>,
    pub side: Option<Side>,
}

const NO_PARENT: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct VertInfo {
    parent: u32,
    phi: u32,
    side: Side,
}

#[derive(Debug, Clone, Default)]
struct SideLists {
    a: Vec<(u32, Complex64)>,
    b: Vec<(u32, Complex64)>,
}

/// One factor of a word in the operators and embedded diagonals: a product
/// of atoms drawn from a single side's algebra, centered before use.
#[derive(Debug, Clone)]
pub struct WordFactor {
    pub side: Side,
    pub atoms: Vec<Atom>,
}

/// One atom of a word factor: apply the side's operator once, or multiply by
/// an embedded diagonal.
#[derive(Debug, Clone)]
pub enum Atom {
    Op,
    Diag(Vec<Complex64>),
}

/// The finite section of the free sum induced on a ball around the root:
/// vertices within a hop distance, edges restricted to the ball (hard
/// truncation, no boundary correction).
#[derive(Debug, Clone)]
pub struct BallOperator {
    /// Free-sum vertex ids, BFS order from the root (local id 0).
    pub vert_ids: Vec<u32>,
    /// Last tuple index of each ball vertex.
    pub phi: Vec<u32>,
    /// Local adjacency, both sides merged; self-adjoint.
    pub rows: Vec<Vec<(u32, Complex64)>>,
}

impl BallOperator {
    pub fn n(&self) -> usize {
        self.vert_ids.len()
    }

    /// y = H x on the section.
    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (i, row) in self.rows.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for &(j, v) in row {
                acc += v * x[j as usize];
            }
            y[i] = acc;
        }
    }

    /// Max row absolute sum: a certified operator-norm upper bound.
    pub fn gershgorin_bound(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.iter().map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Power-iteration estimate of the section's operator norm (a lower
    /// bound up to floating-point error).
    pub fn power_iteration_norm(&self, iters: usize, seed: u64) -> f64 {
        let n = self.n();
        let mut rng = crate::rng::rng_from(seed);
        let mut x: Vec<Complex64> = (0..n)
            .map(|_| {
                Complex64::new(
                    2.0 * crate::rng::uniform_f64(&mut rng) - 1.0,
                    2.0 * crate::rng::uniform_f64(&mut rng) - 1.0,
                )
            })
            .collect();
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        let mut norm = 0.0;
        for _ in 0..iters {
            let scale = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            if scale == 0.0 {
                return 0.0;
            }
            x.iter_mut().for_each(|v| *v /= scale);
            self.matvec(&x, &mut y);
            norm = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            std::mem::swap(&mut x, &mut y);
        }
        norm
    }
}

/// The free sum a + b of two same-size Hermitian matrices over a chosen
/// root, with lazy memoized neighbor expansion.
#[derive(Debug)]
pub struct FreeSum {
    a: HermitianMatrix,
    b: HermitianMatrix,
    n: usize,
    root_index: u32,
    verts: Vec<VertInfo>,
    index: HashMap<(u32, u32, Side), u32>,
    nbrs: Vec<Option<SideLists>>,
}

impl FreeSum {
    pub fn new(a: HermitianMatrix, b: HermitianMatrix, x: usize) -> Result<Self> {
        if a.n() != b.n() {
            return Err(CoreError::Dimension(format!(
                "summands have sizes {} and {}",
                a.n(),
                b.n()
            )));
        }
        let n = a.n();
        if x >= n {
            return Err(CoreError::Param(format!("root {x} out of range for size {n}")));
        }
        let root = VertInfo { parent: NO_PARENT, phi: x as u32, side: Side::A };
        Ok(Self {
            a,
            b,
            n,
            root_index: x as u32,
            verts: vec![root],
            index: HashMap::new(),
            nbrs: vec![None],
        })
    }

    pub fn matrix_a(&self) -> &HermitianMatrix {
        &self.a
    }

    pub fn matrix_b(&self) -> &HermitianMatrix {
        &self.b
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Id of the root vertex.
    pub fn root(&self) -> u32 {
        0
    }

    /// Root element of [N].
    pub fn root_index(&self) -> usize {
        self.root_index as usize
    }

    /// Number of materialized vertices.
    pub fn n_materialized(&self) -> usize {
        self.verts.len()
    }

    /// Last tuple index of a vertex; the root maps to its own index.
    pub fn phi(&self, v: u32) -> usize {
        self.verts[v as usize].phi as usize
    }

    /// Explicit tuple form of a materialized vertex.
    pub fn vertex(&self, v: u32) -> FreeVertex {
        let mut indices = Vec::new();
        let mut cur = v;
        while self.verts[cur as usize].parent != NO_PARENT {
            indices.push(self.verts[cur as usize].phi);
            cur = self.verts[cur as usize].parent;
        }
        indices.reverse();
        let side = if v == 0 { None } else { Some(self.verts[v as usize].side) };
        FreeVertex { indices, side }
    }

    fn intern(&mut self, parent: u32, phi: u32, side: Side) -> u32 {
        if let Some(&id) = self.index.get(&(parent, phi, side)) {
            return id;
        }
        let id = self.verts.len() as u32;
        self.verts.push(VertInfo { parent, phi, side });
        self.nbrs.push(None);
        self.index.insert((parent, phi, side), id);
        id
    }

    /// The base vertex of v's component on the given side: v itself unless
    /// v's own last step was made on that side, in which case its parent.
    fn base(&self, v: u32, side: Side) -> u32 {
        let info = self.verts[v as usize];
        if info.parent != NO_PARENT && info.side == side {
            info.parent
        } else {
            v
        }
    }

    /// All N vertices of the component of `v` on `side`, base first, then
    /// extensions ordered by their last index.
    pub fn component(&mut self, v: u32, side: Side) -> Vec<u32> {
        let base = self.base(v, side);
        let base_phi = self.verts[base as usize].phi;
        let mut out = vec![base];
        for j in 0..self.n as u32 {
            if j != base_phi {
                out.push(self.intern(base, j, side));
            }
        }
        out
    }

    pub fn component_a(&mut self, v: u32) -> Vec<u32> {
        self.component(v, Side::A)
    }

    pub fn component_b(&mut self, v: u32) -> Vec<u32> {
        self.component(v, Side::B)
    }

    /// The inner product of the operator applied to one basis vector against
    /// another: the matrix entry of the shared component on each side where
    /// the two vertices cohabit, zero otherwise. Both contributions add up
    /// when v = w.
    pub fn amplitude(&self, v: u32, w: u32) -> Complex64 {
        let mut amp = Complex64::new(0.0, 0.0);
        let (pv, pw) = (self.phi(v), self.phi(w));
        if self.base(v, Side::A) == self.base(w, Side::A) {
            amp += self.a.entry(pw, pv);
        }
        if self.base(v, Side::B) == self.base(w, Side::B) {
            amp += self.b.entry(pw, pv);
        }
        amp
    }

    fn side_matrix(&self, side: Side) -> &HermitianMatrix {
        match side {
            Side::A => &self.a,
            Side::B => &self.b,
        }
    }

    /// Nonzero-amplitude neighbors of v on one side: the members w of v's
    /// component with a nonzero matrix entry against v.
    fn expand_side(&mut self, v: u32, side: Side) -> Vec<(u32, Complex64)> {
        let base = self.base(v, side);
        let base_phi = self.verts[base as usize].phi;
        let phi_v = self.verts[v as usize].phi as usize;
        let row: Vec<(u32, Complex64)> = self.side_matrix(side).row(phi_v).to_vec();
        let mut out = Vec::with_capacity(row.len());
        for (k, val) in row {
            let w = if k == base_phi { base } else { self.intern(base, k, side) };
            out.push((w, val));
        }
        out
    }

    fn ensure_neighbors(&mut self, v: u32) {
        if self.nbrs[v as usize].is_some() {
            return;
        }
        let a = self.expand_side(v, Side::A);
        let b = self.expand_side(v, Side::B);
        self.nbrs[v as usize] = Some(SideLists { a, b });
    }

    /// One application of the full operator a + b to a coefficient vector
    /// indexed by materialized ids. The result is indexed by the (possibly
    /// larger) materialized set after expansion.
    pub fn apply(&mut self, x: &[Complex64], max_vertices: usize) -> Result<Vec<Complex64>> {
        self.apply_filtered(x, max_vertices, None)
    }

    /// One application of a single side's operator.
    pub fn apply_side(
        &mut self,
        side: Side,
        x: &[Complex64],
        max_vertices: usize,
    ) -> Result<Vec<Complex64>> {
        self.apply_filtered(x, max_vertices, Some(side))
    }

    fn apply_filtered(
        &mut self,
        x: &[Complex64],
        max_vertices: usize,
        only: Option<Side>,
    ) -> Result<Vec<Complex64>> {
        let support: Vec<u32> = x
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != Complex64::new(0.0, 0.0))
            .map(|(i, _)| i as u32)
            .collect();
        for &v in &support {
            self.ensure_neighbors(v);
            if self.verts.len() > max_vertices {
                return Err(CoreError::BudgetExceeded(format!(
                    "lazy expansion exceeded {max_vertices} vertices"
                )));
            }
        }
        let mut y = vec![Complex64::new(0.0, 0.0); self.verts.len()];
        for &v in &support {
            let xv = x[v as usize];
            let lists = self.nbrs[v as usize].as_ref().expect("expanded above");
            if only != Some(Side::B) {
                for &(w, amp) in &lists.a {
                    y[w as usize] += amp * xv;
                }
            }
            if only != Some(Side::A) {
                for &(w, amp) in &lists.b {
                    y[w as usize] += amp * xv;
                }
            }
        }
        Ok(y)
    }

    /// Multiply by an embedded diagonal: each coefficient scales by the
    /// diagonal entry at the vertex's last index.
    pub fn apply_embedded_diagonal(&self, d: &[Complex64], x: &mut [Complex64]) {
        assert_eq!(d.len(), self.n, "diagonal length must match matrix size");
        for (v, val) in x.iter_mut().enumerate() {
            *val *= d[self.verts[v].phi as usize];
        }
    }

    /// The m-th rooted moment of a + b, exactly, as a closed-walk sum: m
    /// operator applications to the root basis vector, then the root
    /// coefficient.
    pub fn rooted_moment_walk(&mut self, m: usize, max_vertices: usize) -> Result<Complex64> {
        Ok(*self
            .moments_up_to(m, max_vertices)?
            .last()
            .expect("moments_up_to returns m+1 values"))
    }

    /// Rooted moments 0..=m_max in one expansion pass.
    pub fn moments_up_to(
        &mut self,
        m_max: usize,
        max_vertices: usize,
    ) -> Result<Vec<Complex64>> {
        let mut psi = vec![Complex64::new(0.0, 0.0); self.verts.len()];
        psi[0] = Complex64::new(1.0, 0.0);
        let mut out = Vec::with_capacity(m_max + 1);
        out.push(Complex64::new(1.0, 0.0));
        for _ in 0..m_max {
            psi = self.apply(&psi, max_vertices)?;
            out.push(psi[0]);
        }
        Ok(out)
    }

    /// Apply one centered word factor: the factor's atom product, minus the
    /// embedded diagonal of the same product computed in matrix form. The
    /// rightmost atom acts first.
    pub fn apply_word_factor_centered(
        &mut self,
        factor: &WordFactor,
        psi: &[Complex64],
        max_vertices: usize,
    ) -> Result<Vec<Complex64>> {
        if factor.atoms.is_empty() {
            return Err(CoreError::Param("word factor with no atoms".into()));
        }
        let mut cur = psi.to_vec();
        for atom in factor.atoms.iter().rev() {
            match atom {
                Atom::Op => cur = self.apply_side(factor.side, &cur, max_vertices)?,
                Atom::Diag(d) => {
                    if d.len() != self.n {
                        return Err(CoreError::Dimension(format!(
                            "embedded diagonal has {} entries for size {}",
                            d.len(),
                            self.n
                        )));
                    }
                    self.apply_embedded_diagonal(d, &mut cur);
                }
            }
        }
        // The diagonal of a one-sided word: the same product computed inside
        // the matrix algebra the component is isomorphic to.
        let dense = self.side_matrix(factor.side).to_dense();
        let mut mat = DMatrix::<Complex64>::identity(self.n, self.n);
        for atom in &factor.atoms {
            match atom {
                Atom::Op => mat = &mat * &dense,
                Atom::Diag(d) => {
                    let dm = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d.clone()));
                    mat = &mat * &dm;
                }
            }
        }
        for (v, val) in psi.iter().enumerate() {
            let k = self.verts[v].phi as usize;
            cur[v] -= mat[(k, k)] * val;
        }
        Ok(cur)
    }

    /// Root diagonal entry of a product of centered one-sided factors with
    /// alternating sides; zero exactly when the two summands are free over
    /// the diagonal, which the construction guarantees.
    pub fn check_centered_alternating(
        &mut self,
        word: &[WordFactor],
        max_vertices: usize,
    ) -> Result<Complex64> {
        if word.is_empty() {
            return Err(CoreError::Param("empty word".into()));
        }
        for pair in word.windows(2) {
            if pair[0].side == pair[1].side {
                return Err(CoreError::Param(
                    "word factors must alternate between the two sides".into(),
                ));
            }
        }
        let mut psi = vec![Complex64::new(0.0, 0.0); self.verts.len()];
        psi[0] = Complex64::new(1.0, 0.0);
        for factor in word.iter().rev() {
            psi = self.apply_word_factor_centered(factor, &psi, max_vertices)?;
        }
        Ok(psi[0])
    }

    /// Amplitude restricted to one side: the side's matrix entry when the
    /// two vertices share a component on that side, zero otherwise.
    pub fn side_amplitude(&self, v: u32, w: u32, side: Side) -> Complex64 {
        if self.base(v, side) == self.base(w, side) {
            self.side_matrix(side).entry(self.phi(w), self.phi(v))
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    /// Injective trace of a rooted monomial evaluated in the operator: the
    /// sum over injective maps of the monomial's vertices into the graph,
    /// root pinned to the operator's root, of the product of per-edge side
    /// amplitudes. The monomial must be connected (otherwise free vertices
    /// would range over the whole infinite graph) and carry at most the two
    /// sides as labels, in the order a then b. Distinct in/out roots give 0
    /// under the injective convention.
    pub fn operator_injective_trace(
        &mut self,
        g: &GraphMonomial,
        budget: u64,
    ) -> Result<Complex64> {
        if g.graph.n_labels() > 2 {
            return Err(CoreError::Param(format!(
                "monomial uses {} labels; the operator has two sides",
                g.graph.n_labels()
            )));
        }
        if g.v_in != g.v_out {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let nv = g.graph.n_vertices();
        // BFS placement order from the root along the monomial's edges.
        let mut order = vec![g.v_in];
        let mut pos = vec![usize::MAX; nv];
        pos[g.v_in] = 0;
        let mut head = 0;
        while head < order.len() {
            let u = order[head];
            head += 1;
            for e in g.graph.edges() {
                for (x, y) in [(e.src, e.tar), (e.tar, e.src)] {
                    if x == u && pos[y] == usize::MAX {
                        pos[y] = order.len();
                        order.push(y);
                    }
                }
            }
        }
        if order.len() < nv {
            return Err(CoreError::Param(
                "monomial must be connected for an operator-side trace".into(),
            ));
        }
        // For each placement position: an anchor edge into the already-placed
        // prefix, and the edges whose endpoints are complete at that point.
        let mut anchor: Vec<Option<(usize, Side)>> = vec![None; nv];
        let mut edges_at: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for (ei, e) in g.graph.edges().iter().enumerate() {
            let side = if e.label == 0 { Side::A } else { Side::B };
            let (ps, pt) = (pos[e.src], pos[e.tar]);
            let late = ps.max(pt);
            edges_at[late].push(ei);
            if ps != pt {
                let (early_v, late_v) = if ps < pt { (e.src, e.tar) } else { (e.tar, e.src) };
                if anchor[pos[late_v]].is_none() {
                    anchor[pos[late_v]] = Some((early_v, side));
                }
            }
        }
        let mut images = vec![0u32; nv];
        images[g.v_in] = self.root();
        // Loops at the root are complete before any other vertex is placed.
        let mut root_factor = Complex64::new(1.0, 0.0);
        for &ei in &edges_at[0] {
            let e = &g.graph.edges()[ei];
            let s = if e.label == 0 { Side::A } else { Side::B };
            let amp = match e.star {
                Star::One => self.side_amplitude(images[e.src], images[e.tar], s),
                Star::Conj => self.side_amplitude(images[e.tar], images[e.src], s).conj(),
            };
            root_factor *= amp;
        }
        if root_factor == Complex64::new(0.0, 0.0) {
            return Ok(root_factor);
        }
        let mut used: Vec<u32> = Vec::with_capacity(nv);
        used.push(images[g.v_in]);
        let mut spent = 0u64;
        let total = self.trace_recurse(
            g,
            &order,
            &anchor,
            &edges_at,
            1,
            &mut images,
            &mut used,
            root_factor,
            budget,
            &mut spent,
        )?;
        Ok(total)
    }

    #[allow(clippy::too_many_arguments)]
    fn trace_recurse(
        &mut self,
        g: &GraphMonomial,
        order: &[usize],
        anchor: &[Option<(usize, Side)>],
        edges_at: &[Vec<usize>],
        level: usize,
        images: &mut [u32],
        used: &mut Vec<u32>,
        partial: Complex64,
        budget: u64,
        spent: &mut u64,
    ) -> Result<Complex64> {
        if level == order.len() {
            return Ok(partial);
        }
        let v = order[level];
        // BFS over real edges guarantees every non-root position an anchor
        // into the placed prefix; its component is the candidate set.
        let (u, s) = anchor[level].expect("BFS order guarantees an anchor edge");
        let candidates = self.component(images[u], s);
        let mut total = Complex64::new(0.0, 0.0);
        for w in candidates {
            *spent += 1;
            if *spent > budget {
                return Err(CoreError::BudgetExceeded(format!(
                    "operator trace enumeration exceeded {budget} steps"
                )));
            }
            if used.contains(&w) {
                continue;
            }
            images[v] = w;
            let mut factor = partial;
            for &ei in &edges_at[level] {
                let e = &g.graph.edges()[ei];
                let s = if e.label == 0 { Side::A } else { Side::B };
                let amp = match e.star {
                    Star::One => self.side_amplitude(images[e.src], images[e.tar], s),
                    Star::Conj => {
                        self.side_amplitude(images[e.tar], images[e.src], s).conj()
                    }
                };
                factor *= amp;
                if factor == Complex64::new(0.0, 0.0) {
                    break;
                }
            }
            if factor == Complex64::new(0.0, 0.0) {
                continue;
            }
            used.push(w);
            total += self.trace_recurse(
                g, order, anchor, edges_at, level + 1, images, used, factor, budget, spent,
            )?;
            used.pop();
        }
        Ok(total)
    }

    /// The induced section on the radius-`depth` ball around the root, in
    /// the nonzero-amplitude graph.
    pub fn materialize_ball(&mut self, depth: usize, max_vertices: usize) -> Result<BallOperator> {
        let mut local: HashMap<u32, u32> = HashMap::new();
        let mut order: Vec<u32> = vec![0];
        local.insert(0, 0);
        let mut layer_start = 0usize;
        for _ in 0..depth {
            let layer_end = order.len();
            for idx in layer_start..layer_end {
                let v = order[idx];
                self.ensure_neighbors(v);
                if self.verts.len() > max_vertices {
                    return Err(CoreError::BudgetExceeded(format!(
                        "ball expansion exceeded {max_vertices} vertices"
                    )));
                }
                let lists = self.nbrs[v as usize].as_ref().expect("expanded above");
                for &(w, _) in lists.a.iter().chain(lists.b.iter()) {
                    if !local.contains_key(&w) {
                        local.insert(w, order.len() as u32);
                        order.push(w);
                        if order.len() > max_vertices {
                            return Err(CoreError::BudgetExceeded(format!(
                                "ball holds more than {max_vertices} vertices"
                            )));
                        }
                    }
                }
            }
            layer_start = layer_end;
        }
        let mut rows = Vec::with_capacity(order.len());
        let mut phi = Vec::with_capacity(order.len());
        for &v in &order {
            self.ensure_neighbors(v);
            phi.push(self.verts[v as usize].phi);
            let lists = self.nbrs[v as usize].as_ref().expect("expanded above");
            // Merge the two side lists, summing the one shared entry (v
            // itself, when both diagonals are nonzero).
            let mut row: Vec<(u32, Complex64)> = Vec::new();
            for &(w, amp) in lists.a.iter().chain(lists.b.iter()) {
                if let Some(&lw) = local.get(&w) {
                    match row.iter_mut().find(|(c, _)| *c == lw) {
                        Some((_, acc)) => *acc += amp,
                        None => row.push((lw, amp)),
                    }
                }
            }
            row.sort_by_key(|&(c, _)| c);
            rows.push(row);
        }
        Ok(BallOperator { vert_ids: order, phi, rows })
    }
}

/// The m-th rooted moment through the combinatorial expansion: sum over edge
/// colorings of the directed m-cycle, over vertex partitions whose quotient
/// has a tree component structure, and over amalgamations of that quotient,
/// of rooted injective traces in the two matrices. Guarded at m <= 6, where
/// partition counts stay small.
pub fn rooted_moment_combinatorial(
    a: &HermitianMatrix,
    b: &HermitianMatrix,
    rho: usize,
    m: usize,
) -> Result<Complex64> {
    if a.n() != b.n() {
        return Err(CoreError::Dimension(format!(
            "summands have sizes {} and {}",
            a.n(),
            b.n()
        )));
    }
    if rho >= a.n() {
        return Err(CoreError::Param(format!("root {rho} out of range for size {}", a.n())));
    }
    if m > 6 {
        return Err(CoreError::CapExceeded(format!(
            "combinatorial moment guard: m = {m} exceeds 6"
        )));
    }
    if m == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let mut total = Complex64::new(0.0, 0.0);
    for mask in 0..(1u64 << m) {
        let coloring: Vec<usize> = (0..m).map(|k| ((mask >> k) & 1) as usize).collect();
        let g_f = cycle_monomial(m, &coloring)?;
        for pi in enumerate_partitions(m, m)? {
            let q = g_f.quotient(&pi)?;
            let view = gcc(&q.graph)?;
            if !view.is_tree() {
                // Quotients with cyclic component structure admit no
                // injective embedding into the free-sum graph.
                continue;
            }
            let comps = colored_components(&q.graph);
            for sigma in enumerate_amalgamations(&q, &comps, true, m)? {
                let qq = q.quotient(&sigma)?;
                total += injective_trace(&qq, &[a, b], rho, DEFAULT_EVAL_BUDGET)?;
            }
        }
    }
    Ok(total)
}

/// The colored girth of x: the largest radius k <= k_max such that the
/// component structure of the induced ball around x in the combined support
/// graph of the two matrices (edges labeled by the matrix they come from)
/// stays a tree. Edgeless balls count as trees. Growing the ball only merges
/// more structure in, so treeness is monotone and the scan stops at the
/// first failure.
pub fn colored_girth(
    a: &HermitianMatrix,
    b: &HermitianMatrix,
    x: usize,
    k_max: usize,
) -> Result<usize> {
    if a.n() != b.n() {
        return Err(CoreError::Dimension(format!(
            "summands have sizes {} and {}",
            a.n(),
            b.n()
        )));
    }
    let n = a.n();
    if x >= n {
        return Err(CoreError::Param(format!("root {x} out of range for size {n}")));
    }
    // BFS distances in the union support graph, out to k_max.
    let mut dist = vec![usize::MAX; n];
    dist[x] = 0;
    let mut frontier = vec![x];
    let mut by_layer: Vec<Vec<usize>> = vec![vec![x]];
    for d in 1..=k_max {
        let mut next = Vec::new();
        for &u in &frontier {
            for &(w, _) in a.row(u).iter().chain(b.row(u).iter()) {
                let w = w as usize;
                if dist[w] == usize::MAX {
                    dist[w] = d;
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        by_layer.push(next.clone());
        frontier = next;
    }
    let mut girth = 0usize;
    let mut ball: Vec<usize> = Vec::new();
    for k in 0..=k_max {
        if k < by_layer.len() {
            ball.extend(by_layer[k].iter().copied());
        }
        if ball_is_tree(a, b, &dist, k, &ball) {
            girth = k;
        } else {
            return Ok(k.saturating_sub(1));
        }
    }
    Ok(girth)
}

fn ball_is_tree(
    a: &HermitianMatrix,
    b: &HermitianMatrix,
    dist: &[usize],
    k: usize,
    ball: &[usize],
) -> bool {
    // Induced two-label graph on the ball: an a-edge per support entry of A
    // with both endpoints inside, likewise for B.
    let mut local = HashMap::with_capacity(ball.len());
    for (li, &v) in ball.iter().enumerate() {
        local.insert(v, li);
    }
    let mut g = TestGraph::with_labels(ball.len(), &["a", "b"]);
    for (label, m) in [(0usize, a), (1usize, b)] {
        for (li, &v) in ball.iter().enumerate() {
            for &(w, _) in m.row(v) {
                let w = w as usize;
                // Each undirected support edge once: upper pairs only.
                if w < v || dist[w] > k {
                    continue;
                }
                let lw = local[&w];
                g.add_edge(li, lw, label, Star::One).expect("ball edge in range");
            }
        }
    }
    if g.edges().is_empty() {
        return true;
    }
    gcc(&g).expect("ball has edges").is_tree()
}

/// How many roots have colored girth at least n: the size of the tree-like
/// vertex set at that depth.
pub fn count_tree_vertices(a: &HermitianMatrix, b: &HermitianMatrix, n: usize) -> Result<usize> {
    let mut count = 0;
    for x in 0..a.n() {
        if colored_girth(a, b, x, n)? >= n {
            count += 1;
        }
    }
    Ok(count)
}
