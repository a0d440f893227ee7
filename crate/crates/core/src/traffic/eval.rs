//! Evaluation of graph monomials in concrete matrices.
//!
//! The entry `g(X)(i,j)` sums, over all vertex maps pinning the output root
//! to `i` and the input root to `j`, the product over edges of the matrix
//! entry `X(map(tar), map(src))` (conjugate-transposed for starred edges).
//! The injective trace restricts the sum to injective maps. Both refuse when
//! the number of maps would exceed the caller's work budget, and both prune
//! branches whose partial product is already exactly zero — the pruned maps
//! contribute nothing, so the sum is unchanged.

use super::{Edge, GraphMonomial, Star, TestGraph};
use crate::error::{CoreError, Result};
use crate::matrix::HermitianMatrix;
use num_complex::Complex64;

/// Default cap on the number of vertex maps an evaluation may visit.
pub const DEFAULT_EVAL_BUDGET: u64 = 100_000_000;

fn edge_factor(assign: &[&HermitianMatrix], e: &Edge, src_img: usize, tar_img: usize) -> Complex64 {
    let x = assign[e.label];
    match e.star {
        Star::One => x.entry(tar_img, src_img),
        Star::Conj => x.entry(src_img, tar_img).conj(),
    }
}

fn check_assignment(g: &TestGraph, assign: &[&HermitianMatrix]) -> Result<usize> {
    if assign.len() != g.n_labels() {
        return Err(CoreError::Param(format!(
            "{} matrices supplied for {} labels",
            assign.len(),
            g.n_labels()
        )));
    }
    let n = assign.first().map_or(0, |m| m.n());
    if assign.iter().any(|m| m.n() != n) {
        return Err(CoreError::Dimension("assignment matrices differ in size".into()));
    }
    if n == 0 {
        return Err(CoreError::Param("assignment requires at least one nonempty matrix".into()));
    }
    Ok(n)
}

/// Placement order and per-position edge lists for the map enumeration.
///
/// Vertices are placed pinned-first, then by BFS from the pinned set so edge
/// factors multiply in as early as possible; each edge is charged to the
/// later-placed of its endpoints.
struct Schedule {
    order: Vec<usize>,
    edges_at: Vec<Vec<Edge>>,
}

fn schedule(g: &TestGraph, pinned: &[usize]) -> Schedule {
    let n_v = g.n_vertices();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n_v];
    for e in g.edges() {
        adj[e.src].push(e.tar);
        adj[e.tar].push(e.src);
    }
    let mut order = Vec::with_capacity(n_v);
    let mut placed = vec![false; n_v];
    for &v in pinned {
        if !placed[v] {
            placed[v] = true;
            order.push(v);
        }
    }
    let mut head = 0;
    loop {
        while head < order.len() {
            let v = order[head];
            head += 1;
            for &w in &adj[v] {
                if !placed[w] {
                    placed[w] = true;
                    order.push(w);
                }
            }
        }
        // Unreached vertices (other connected components) seed further BFS.
        match (0..n_v).find(|&v| !placed[v]) {
            Some(v) => {
                placed[v] = true;
                order.push(v);
            }
            None => break,
        }
    }
    let mut pos = vec![0usize; n_v];
    for (p, &v) in order.iter().enumerate() {
        pos[v] = p;
    }
    let mut edges_at: Vec<Vec<Edge>> = vec![Vec::new(); n_v];
    for e in g.edges() {
        edges_at[pos[e.src].max(pos[e.tar])].push(*e);
    }
    Schedule { order, edges_at }
}

/// Product of the factors charged to position `p` once `order[p]` is placed.
fn position_factor(
    sched: &Schedule,
    assign: &[&HermitianMatrix],
    phi: &[usize],
    p: usize,
) -> Complex64 {
    let mut f = Complex64::new(1.0, 0.0);
    for e in &sched.edges_at[p] {
        f *= edge_factor(assign, e, phi[e.src], phi[e.tar]);
        if f == Complex64::new(0.0, 0.0) {
            break;
        }
    }
    f
}

struct SumState<'a> {
    sched: &'a Schedule,
    assign: &'a [&'a HermitianMatrix],
    n: usize,
    phi: Vec<usize>,
    used: Vec<bool>,
    injective: bool,
    total: Complex64,
}

fn sum_maps(st: &mut SumState, p: usize, partial: Complex64) {
    if p == st.sched.order.len() {
        st.total += partial;
        return;
    }
    let v = st.sched.order[p];
    for img in 0..st.n {
        if st.injective && st.used[img] {
            continue;
        }
        st.phi[v] = img;
        let f = position_factor(st.sched, st.assign, &st.phi, p);
        if f == Complex64::new(0.0, 0.0) {
            continue;
        }
        if st.injective {
            st.used[img] = true;
        }
        sum_maps(st, p + 1, partial * f);
        if st.injective {
            st.used[img] = false;
        }
    }
}

/// Check `count` maps fit the budget before enumerating anything.
fn budget_check(n: usize, free: usize, injective: bool, budget: u64) -> Result<()> {
    let mut count = 1.0f64;
    for k in 0..free {
        let factor = if injective { (n - k) as f64 } else { n as f64 };
        count *= factor.max(0.0);
        if count > budget as f64 {
            return Err(CoreError::BudgetExceeded(format!(
                "map enumeration needs more than {budget} visits"
            )));
        }
    }
    Ok(())
}

/// Full evaluation `g(X)(i,j)`: sum over all maps with `v_out -> i` and
/// `v_in -> j` of the edge-factor products.
pub fn eval_monomial(
    g: &GraphMonomial,
    assign: &[&HermitianMatrix],
    i: usize,
    j: usize,
    budget: u64,
) -> Result<Complex64> {
    let n = check_assignment(&g.graph, assign)?;
    if i >= n || j >= n {
        return Err(CoreError::Param(format!("entry ({i},{j}) out of range for size {n}")));
    }
    // A shared root pinned to two different values leaves an empty sum.
    if g.v_in == g.v_out && i != j {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let pinned = [g.v_out, g.v_in];
    let sched = schedule(&g.graph, &pinned);
    let n_pinned = if g.v_in == g.v_out { 1 } else { 2 };
    budget_check(n, g.graph.n_vertices() - n_pinned, false, budget)?;

    let mut phi = vec![0usize; g.graph.n_vertices()];
    phi[g.v_out] = i;
    phi[g.v_in] = j;
    let mut partial = Complex64::new(1.0, 0.0);
    for p in 0..n_pinned {
        partial *= position_factor(&sched, assign, &phi, p);
    }
    if partial == Complex64::new(0.0, 0.0) {
        return Ok(partial);
    }
    let mut st = SumState {
        sched: &sched,
        assign,
        n,
        phi,
        used: Vec::new(),
        injective: false,
        total: Complex64::new(0.0, 0.0),
    };
    sum_maps(&mut st, n_pinned, partial);
    Ok(st.total)
}

/// The i-rooted injective trace: sum over injective maps sending both roots
/// to `i`. Zero by convention when the roots are distinct vertices.
pub fn injective_trace(
    g: &GraphMonomial,
    assign: &[&HermitianMatrix],
    i: usize,
    budget: u64,
) -> Result<Complex64> {
    let n = check_assignment(&g.graph, assign)?;
    if i >= n {
        return Err(CoreError::Param(format!("root image {i} out of range for size {n}")));
    }
    if g.v_in != g.v_out {
        // An injective map cannot send two distinct vertices to the same i.
        return Ok(Complex64::new(0.0, 0.0));
    }
    let pinned = [g.v_in];
    let sched = schedule(&g.graph, &pinned);
    budget_check(n, g.graph.n_vertices() - 1, true, budget)?;

    let mut phi = vec![0usize; g.graph.n_vertices()];
    phi[g.v_in] = i;
    let partial = position_factor(&sched, assign, &phi, 0);
    if partial == Complex64::new(0.0, 0.0) {
        return Ok(partial);
    }
    let mut used = vec![false; n];
    used[i] = true;
    let mut st = SumState {
        sched: &sched,
        assign,
        n,
        phi,
        used,
        injective: true,
        total: Complex64::new(0.0, 0.0),
    };
    sum_maps(&mut st, 1, partial);
    Ok(st.total)
}

/// Every injective-map term of the i-rooted injective trace, zeros included,
/// in the deterministic enumeration order. Unlike [`injective_trace`] this
/// does not prune, so it sees exactly one term per injective map.
pub fn injective_trace_terms(
    g: &GraphMonomial,
    assign: &[&HermitianMatrix],
    i: usize,
    budget: u64,
) -> Result<Vec<Complex64>> {
    let n = check_assignment(&g.graph, assign)?;
    if i >= n {
        return Err(CoreError::Param(format!("root image {i} out of range for size {n}")));
    }
    if g.v_in != g.v_out {
        return Ok(Vec::new());
    }
    let pinned = [g.v_in];
    let sched = schedule(&g.graph, &pinned);
    budget_check(n, g.graph.n_vertices() - 1, true, budget)?;

    let mut phi = vec![0usize; g.graph.n_vertices()];
    phi[g.v_in] = i;
    let mut used = vec![false; n];
    used[i] = true;
    let mut terms = Vec::new();
    collect_terms(&sched, assign, n, &mut phi, &mut used, 1, &mut terms);
    Ok(terms)
}

fn collect_terms(
    sched: &Schedule,
    assign: &[&HermitianMatrix],
    n: usize,
    phi: &mut [usize],
    used: &mut [bool],
    p: usize,
    terms: &mut Vec<Complex64>,
) {
    if p == sched.order.len() {
        let mut f = Complex64::new(1.0, 0.0);
        for q in 0..sched.order.len() {
            f *= position_factor(sched, assign, phi, q);
        }
        terms.push(f);
        return;
    }
    let v = sched.order[p];
    for img in 0..n {
        if used[img] {
            continue;
        }
        phi[v] = img;
        used[img] = true;
        collect_terms(sched, assign, n, phi, used, p + 1, terms);
        used[img] = false;
    }
}

/// Unrooted, globally injective trace of a test graph with K connected
/// components, normalized by N^K: a single-realization sample of the
/// quantity whose expectation the growth assumptions bound.
pub fn normalized_injective_trace_multi(
    t: &TestGraph,
    assign: &[&HermitianMatrix],
    budget: u64,
) -> Result<Complex64> {
    let n = check_assignment(t, assign)?;
    let k = t.connected_component_count();
    let sched = schedule(t, &[]);
    budget_check(n, t.n_vertices(), true, budget)?;

    let mut st = SumState {
        sched: &sched,
        assign,
        n,
        phi: vec![0usize; t.n_vertices()],
        used: vec![false; n],
        injective: true,
        total: Complex64::new(0.0, 0.0),
    };
    sum_maps(&mut st, 0, Complex64::new(1.0, 0.0));
    Ok(st.total / (n as f64).powi(k as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::make_hermitian;
    use crate::traffic::partitions::{cross_amalgamations, enumerate_partitions};
    use crate::traffic::{cycle_monomial, glue_at_root};
    use nalgebra::DMatrix;

    fn dense_power(x: &HermitianMatrix, m: usize) -> DMatrix<Complex64> {
        let d = x.to_dense();
        let mut acc = DMatrix::identity(x.n(), x.n());
        for _ in 0..m {
            acc = &acc * &d;
        }
        acc
    }

    #[test]
    fn single_edge_evaluates_to_matrix_entry() {
        let x = make_hermitian(5, 31);
        let mut g = TestGraph::with_labels(2, &["x"]);
        g.add_edge(0, 1, 0, Star::One).unwrap();
        let m = GraphMonomial::new(g, 0, 1).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let v = eval_monomial(&m, &[&x], i, j, DEFAULT_EVAL_BUDGET).unwrap();
                assert_eq!(v, x.entry(i, j), "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn starred_edge_of_a_hermitian_matrix_changes_nothing() {
        let x = make_hermitian(5, 32);
        let mut g1 = TestGraph::with_labels(2, &["x"]);
        g1.add_edge(0, 1, 0, Star::One).unwrap();
        let mut g2 = TestGraph::with_labels(2, &["x"]);
        g2.add_edge(0, 1, 0, Star::Conj).unwrap();
        let m1 = GraphMonomial::new(g1, 0, 1).unwrap();
        let m2 = GraphMonomial::new(g2, 0, 1).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let a = eval_monomial(&m1, &[&x], i, j, DEFAULT_EVAL_BUDGET).unwrap();
                let b = eval_monomial(&m2, &[&x], i, j, DEFAULT_EVAL_BUDGET).unwrap();
                assert!((a - b).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn directed_two_path_is_the_matrix_square() {
        let x = make_hermitian(5, 33);
        let mut g = TestGraph::with_labels(3, &["x"]);
        g.add_edge(0, 1, 0, Star::One).unwrap();
        g.add_edge(1, 2, 0, Star::One).unwrap();
        let m = GraphMonomial::new(g, 0, 2).unwrap();
        let sq = dense_power(&x, 2);
        for i in 0..5 {
            for j in 0..5 {
                let v = eval_monomial(&m, &[&x], i, j, DEFAULT_EVAL_BUDGET).unwrap();
                assert!((v - sq[(i, j)]).norm() < 1e-12, "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn directed_cycles_match_matrix_powers() {
        let n = 8;
        let x = make_hermitian(n, 34);
        for m in 1..=5usize {
            let g = cycle_monomial(m, &vec![0; m]).unwrap();
            let pw = dense_power(&x, m);
            for i in 0..n {
                let v = eval_monomial(&g, &[&x, &x], i, i, DEFAULT_EVAL_BUDGET).unwrap();
                assert!((v - pw[(i, i)]).norm() < 1e-10, "m={m} i={i}");
            }
        }
    }

    #[test]
    fn eval_refuses_when_budget_is_too_small() {
        let x = make_hermitian(8, 35);
        let g = cycle_monomial(5, &[0; 5]).unwrap();
        let err = eval_monomial(&g, &[&x, &x], 0, 0, 10).unwrap_err();
        assert!(matches!(err, CoreError::BudgetExceeded(_)));
    }

    #[test]
    fn loop_injective_trace_is_the_diagonal_entry() {
        let x = make_hermitian(6, 36);
        let g = cycle_monomial(1, &[0]).unwrap();
        for i in 0..6 {
            let v = injective_trace(&g, &[&x, &x], i, DEFAULT_EVAL_BUDGET).unwrap();
            assert_eq!(v, x.entry(i, i));
        }
    }

    #[test]
    fn two_cycle_injective_trace_drops_the_diagonal_term() {
        let x = make_hermitian(6, 37);
        let g = cycle_monomial(2, &[0, 0]).unwrap();
        let sq = dense_power(&x, 2);
        for i in 0..6 {
            let v = injective_trace(&g, &[&x, &x], i, DEFAULT_EVAL_BUDGET).unwrap();
            let expect = sq[(i, i)] - x.entry(i, i) * x.entry(i, i);
            assert!((v - expect).norm() < 1e-12, "i={i}");
        }
    }

    #[test]
    fn partition_sum_identity_reconstructs_the_full_evaluation() {
        // Summing injective traces of all quotients recovers eval exactly.
        let x = make_hermitian(6, 38);
        for m in 1..=4usize {
            let g = cycle_monomial(m, &vec![0; m]).unwrap();
            for i in 0..6 {
                let full = eval_monomial(&g, &[&x, &x], i, i, DEFAULT_EVAL_BUDGET).unwrap();
                let mut sum = Complex64::new(0.0, 0.0);
                for pi in enumerate_partitions(m, 10).unwrap() {
                    let q = g.quotient(&pi).unwrap();
                    sum += injective_trace(&q, &[&x, &x], i, DEFAULT_EVAL_BUDGET).unwrap();
                }
                let scale = full.norm().max(1.0);
                assert!((full - sum).norm() / scale < 1e-10, "m={m} i={i}");
            }
        }
    }

    #[test]
    fn roots_pinned_apart_on_a_shared_vertex_give_zero() {
        let x = make_hermitian(4, 39);
        let g = cycle_monomial(2, &[0, 1]).unwrap();
        let v = eval_monomial(&g, &[&x, &x], 1, 2, DEFAULT_EVAL_BUDGET).unwrap();
        assert_eq!(v, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn multi_trace_of_all_ones_counts_injections() {
        // Two disjoint single edges under the all-ones matrix: every
        // injective 4-vertex map contributes 1.
        let n = 6;
        let ones = DMatrix::from_element(n, n, Complex64::new(1.0, 0.0));
        let j = HermitianMatrix::from_dense(&ones).unwrap();
        let mut t = TestGraph::with_labels(4, &["x"]);
        t.add_edge(0, 1, 0, Star::One).unwrap();
        t.add_edge(2, 3, 0, Star::One).unwrap();
        let v = normalized_injective_trace_multi(&t, &[&j], DEFAULT_EVAL_BUDGET).unwrap();
        let nf = n as f64;
        let expect = (nf - 1.0) * (nf - 2.0) * (nf - 3.0) / nf;
        assert!((v.re - expect).abs() < 1e-10);
        assert!(v.im.abs() < 1e-12);
    }

    #[test]
    fn multi_trace_of_zero_matrix_is_zero() {
        let z = HermitianMatrix::zero(5);
        let mut t = TestGraph::with_labels(4, &["x"]);
        t.add_edge(0, 1, 0, Star::One).unwrap();
        t.add_edge(2, 3, 0, Star::One).unwrap();
        let v = normalized_injective_trace_multi(&t, &[&z], DEFAULT_EVAL_BUDGET).unwrap();
        assert_eq!(v, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn multi_trace_of_a_rooted_cycle_averages_rooted_traces() {
        let n = 6;
        let x = make_hermitian(n, 40);
        let g = cycle_monomial(3, &[0, 0, 0]).unwrap();
        let multi =
            normalized_injective_trace_multi(&g.graph, &[&x, &x], DEFAULT_EVAL_BUDGET).unwrap();
        let mut sum = Complex64::new(0.0, 0.0);
        for i in 0..n {
            sum += injective_trace(&g, &[&x, &x], i, DEFAULT_EVAL_BUDGET).unwrap();
        }
        assert!((multi - sum / n as f64).norm() < 1e-12);
    }

    #[test]
    fn glued_product_identity_over_cross_amalgamations() {
        // tr0(h) tr0(h') equals the sum of injective traces of the glued
        // monomial over all amalgamations taking at most one vertex per side.
        let a = make_hermitian(5, 41);
        let b = make_hermitian(5, 42);
        let cases = [
            (cycle_monomial(2, &[0, 1]).unwrap(), cycle_monomial(2, &[1, 0]).unwrap()),
            (cycle_monomial(3, &[0, 1, 0]).unwrap(), cycle_monomial(2, &[0, 1]).unwrap()),
            (cycle_monomial(1, &[0]).unwrap(), cycle_monomial(3, &[1, 1, 0]).unwrap()),
        ];
        for (h, h2) in &cases {
            let glued = glue_at_root(h, h2).unwrap();
            for rho in 0..5 {
                let lhs = injective_trace(h, &[&a, &b], rho, DEFAULT_EVAL_BUDGET).unwrap()
                    * injective_trace(h2, &[&a, &b], rho, DEFAULT_EVAL_BUDGET).unwrap();
                let mut rhs = Complex64::new(0.0, 0.0);
                for sigma in cross_amalgamations(h, h2) {
                    let q = glued.quotient(&sigma).unwrap();
                    rhs += injective_trace(&q, &[&a, &b], rho, DEFAULT_EVAL_BUDGET).unwrap();
                }
                let scale = lhs.norm().max(1.0);
                assert!((lhs - rhs).norm() / scale < 1e-10, "rho={rho}");
            }
        }
    }

    #[test]
    fn coloring_sum_expands_the_binomial_power() {
        let n = 6;
        let a = make_hermitian(n, 43);
        let b = make_hermitian(n, 44);
        let apb = a.add(&b).unwrap();
        for m in 1..=4usize {
            let pw = dense_power(&apb, m);
            for i in 0..n {
                let mut sum = Complex64::new(0.0, 0.0);
                for mask in 0..(1u32 << m) {
                    let coloring: Vec<usize> =
                        (0..m).map(|k| ((mask >> k) & 1) as usize).collect();
                    let g = cycle_monomial(m, &coloring).unwrap();
                    sum += eval_monomial(&g, &[&a, &b], i, i, DEFAULT_EVAL_BUDGET).unwrap();
                }
                assert!((sum - pw[(i, i)]).norm() < 1e-10, "m={m} i={i}");
            }
        }
    }

    #[test]
    fn injective_trace_is_permutation_covariant() {
        let n = 6;
        let a = make_hermitian(n, 45);
        let b = make_hermitian(n, 46);
        let perm = vec![2, 0, 5, 1, 3, 4];
        let pa = a.permute_conjugate(&perm).unwrap();
        let pb = b.permute_conjugate(&perm).unwrap();
        let g = cycle_monomial(3, &[0, 1, 1]).unwrap();
        for i in 0..n {
            let plain = injective_trace(&g, &[&a, &b], i, DEFAULT_EVAL_BUDGET).unwrap();
            let moved = injective_trace(&g, &[&pa, &pb], perm[i], DEFAULT_EVAL_BUDGET).unwrap();
            assert!((plain - moved).norm() < 1e-12, "i={i}");
        }
    }

    #[test]
    fn terms_sum_to_the_injective_trace() {
        let x = make_hermitian(5, 47);
        let g = cycle_monomial(3, &[0, 0, 0]).unwrap();
        for i in 0..5 {
            let total = injective_trace(&g, &[&x, &x], i, DEFAULT_EVAL_BUDGET).unwrap();
            let terms = injective_trace_terms(&g, &[&x, &x], i, DEFAULT_EVAL_BUDGET).unwrap();
            assert_eq!(terms.len(), 4 * 3, "injective maps of 2 free vertices into 5");
            let sum: Complex64 = terms.iter().sum();
            assert!((total - sum).norm() < 1e-12);
        }
    }
}
