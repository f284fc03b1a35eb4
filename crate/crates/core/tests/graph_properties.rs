use std::collections::BTreeSet;

use mpc_csas::graph::{
    generate_switching_sequence, is_strongly_connected, ring_topology, row_stochastic_from_graph,
    validate_privacy_precondition, CommGraph, GraphError,
};
use mpc_csas::VehicleId;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Transitive closure by Floyd-Warshall over vertex indices.
fn closure(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut r = vec![vec![false; n]; n];
    for (i, row) in r.iter_mut().enumerate() {
        row[i] = true;
    }
    for &(u, v) in edges {
        r[u][v] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if r[i][k] && r[k][j] {
                    r[i][j] = true;
                }
            }
        }
    }
    r
}

fn build(n: usize, edges: &[(usize, usize)]) -> CommGraph {
    let ids = (1..=n as u32).map(VehicleId);
    CommGraph::new(
        ids,
        edges
            .iter()
            .map(|&(u, v)| (VehicleId(u as u32 + 1), VehicleId(v as u32 + 1))),
    )
    .unwrap()
}

fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|u| (0..n).filter(move |&v| v != u).map(move |v| (u, v)))
        .collect()
}

fn check_against_oracle(n: usize, edges: &[(usize, usize)]) {
    let g = build(n, edges);
    let oracle = closure(n, edges).iter().all(|row| row.iter().all(|&x| x));
    assert_eq!(is_strongly_connected(&g), oracle, "n={n} edges={edges:?}");
    let weak: Vec<VehicleId> = (0..n)
        .filter(|&u| !edges.iter().any(|&(a, _)| a == u))
        .map(|u| VehicleId(u as u32 + 1))
        .collect();
    assert_eq!(validate_privacy_precondition(&g), weak);
}

/// Reachability closure over vertex bitmasks.
fn strongly_connected_bits(n: usize, adj: &[u32]) -> bool {
    let full = (1u32 << n) - 1;
    let reach = |start: usize, next: &dyn Fn(usize) -> u32| {
        let mut seen = 1u32 << start;
        let mut frontier = seen;
        while frontier != 0 {
            let v = frontier.trailing_zeros() as usize;
            frontier &= frontier - 1;
            let new = next(v) & !seen;
            seen |= new;
            frontier |= new;
        }
        seen
    };
    let radj: Vec<u32> = (0..n)
        .map(|v| {
            (0..n)
                .filter(|&u| adj[u] & (1 << v) != 0)
                .fold(0, |m, u| m | (1 << u))
        })
        .collect();
    reach(0, &|v| adj[v]) == full && reach(0, &|v| radj[v]) == full
}

#[test]
fn strong_connectivity_exhaustive_up_to_five_vertices() {
    let ids: Vec<VehicleId> = (1..=5).map(VehicleId).collect();
    for n in 1..=5 {
        let pairs = all_pairs(n);
        for mask in 0u32..(1 << pairs.len()) {
            let mut adj = vec![0u32; n];
            let mut edges = Vec::with_capacity(pairs.len());
            for (i, &(u, v)) in pairs.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    adj[u] |= 1 << v;
                    edges.push((ids[u], ids[v]));
                }
            }
            let g = CommGraph::new(ids[..n].iter().copied(), edges).unwrap();
            assert_eq!(
                is_strongly_connected(&g),
                strongly_connected_bits(n, &adj),
                "n={n} mask={mask:#x}"
            );
            let weak: Vec<VehicleId> = (0..n).filter(|&u| adj[u] == 0).map(|u| ids[u]).collect();
            assert_eq!(validate_privacy_precondition(&g), weak);
        }
    }
}

#[test]
fn closure_oracle_agrees_with_bitmask_oracle() {
    for n in 1..=4 {
        let pairs = all_pairs(n);
        for mask in 0u32..(1 << pairs.len()) {
            let edges: Vec<_> = pairs
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, &e)| e)
                .collect();
            let mut adj = vec![0u32; n];
            for &(u, v) in &edges {
                adj[u] |= 1 << v;
            }
            let closure_says = closure(n, &edges).iter().all(|row| row.iter().all(|&x| x));
            assert_eq!(closure_says, strongly_connected_bits(n, &adj));
        }
    }
}

#[test]
fn strong_connectivity_sampled_on_five_to_eight_vertices() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..3000 {
        let n = rng.gen_range(5..=8);
        let p = rng.gen_range(0.1..0.6);
        let edges: Vec<_> = all_pairs(n)
            .into_iter()
            .filter(|_| rng.gen_bool(p))
            .collect();
        check_against_oracle(n, &edges);
    }
}

#[test]
fn rings_are_strongly_connected_with_unit_outdegree() {
    for n in (2..=50).chain([100, 500, 1000]) {
        let g = ring_topology(n).unwrap();
        assert_eq!(g.vertex_count(), n);
        assert_eq!(g.edge_count(), n);
        assert!(is_strongly_connected(&g), "n={n}");
        assert!(validate_privacy_precondition(&g).is_empty());
        assert!(g.vertices().all(|v| g.outdegree(v).unwrap() == 1));
    }
    assert!(matches!(ring_topology(1), Err(GraphError::RingTooSmall(1))));
}

#[test]
fn malformed_graphs_are_rejected() {
    let v = |i| VehicleId(i);
    assert!(matches!(
        CommGraph::new([v(1)], [(v(1), v(1))]),
        Err(GraphError::SelfLoop(_))
    ));
    assert!(matches!(
        CommGraph::new([v(1), v(2)], [(v(1), v(2)), (v(1), v(2))]),
        Err(GraphError::DuplicateEdge(..))
    ));
    assert!(matches!(
        CommGraph::new([v(1)], [(v(1), v(3))]),
        Err(GraphError::UnknownEndpoint(..))
    ));
    assert!(matches!(
        CommGraph::new([v(1), v(1)], []),
        Err(GraphError::DuplicateVertex(_))
    ));
}

#[test]
fn row_stochastic_matrices_follow_in_neighbors() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let n = rng.gen_range(1..=12);
        let edges: Vec<_> = all_pairs(n)
            .into_iter()
            .filter(|_| rng.gen_bool(0.3))
            .collect();
        let g = build(n, &edges);
        let p = row_stochastic_from_graph(&g);
        assert_eq!(p.dim(), n);
        for i in 0..n {
            let row = p.row(i);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&x| x >= 0.0));
            let support: BTreeSet<usize> = (0..n).filter(|&j| row[j] > 0.0).collect();
            let expected: BTreeSet<usize> = std::iter::once(i)
                .chain(edges.iter().filter(|e| e.1 == i).map(|e| e.0))
                .collect();
            assert_eq!(support, expected);
            let w = 1.0 / expected.len() as f64;
            assert!(support.iter().all(|&j| (row[j] - w).abs() < 1e-15));
        }
        // Constant vectors are fixed points.
        assert!(p
            .mul_vec(&vec![42.0; n])
            .iter()
            .all(|x| (x - 42.0).abs() < 1e-9));
    }
}

#[test]
fn switching_windows_are_jointly_strongly_connected() {
    for seed in 0..20u64 {
        let n = 3 + (seed as usize % 8);
        let window = 1 + (seed as usize % 4);
        let seq = generate_switching_sequence(n, 40, window, seed).unwrap();
        assert_eq!(seq.len(), 40);
        assert_eq!((seq.seed(), seq.window()), (seed, window));
        assert!(seq.windows_strongly_connected(), "seed {seed}");
        let ids: BTreeSet<VehicleId> = (1..=n as u32).map(VehicleId).collect();
        for g in seq.graphs() {
            assert_eq!(g.vertices().collect::<BTreeSet<_>>(), ids);
        }
        for start in 0..=(40 - window) {
            let edges: Vec<(usize, usize)> = seq.graphs()[start..start + window]
                .iter()
                .flat_map(|g| {
                    g.edges()
                        .map(|(u, v)| (u.0 as usize - 1, v.0 as usize - 1))
                        .collect::<Vec<_>>()
                })
                .collect();
            assert!(
                closure(n, &edges).iter().all(|row| row.iter().all(|&x| x)),
                "seed {seed} start {start}"
            );
        }
        let again = generate_switching_sequence(n, 40, window, seed).unwrap();
        assert_eq!(again.graphs(), seq.graphs());
        assert_eq!(
            seq.at(40).edges().collect::<Vec<_>>(),
            seq.at(0).edges().collect::<Vec<_>>()
        );
    }
    assert!(matches!(
        generate_switching_sequence(4, 5, 0, 1),
        Err(GraphError::ZeroWindow)
    ));
}
