use morals::grid::CubicalGrid;
use morals::morse::{build_map, CellAnalysis, Enclosure, MapParams, RoaLabel};
use morals::systems::Bistable;

fn analysis(steps: usize) -> CellAnalysis {
    let grid = CubicalGrid::from_edges(vec![
        vec![-3.0, -2.0, -0.5, 0.5, 2.0, 3.0],
        vec![-2.0, -0.5, 0.5, 2.0],
    ])
    .unwrap();
    let params = MapParams {
        lipschitz: 0.0,
        steps,
        enclosure: Enclosure::Hull,
    };
    CellAnalysis::new(build_map(&grid, &|x: &[f64]| Bistable::apply(x), params).unwrap())
}

#[test]
fn three_node_morse_graph() {
    let a = analysis(3);
    let g = a.map.grid().clone();
    let node = |i: usize, j: usize| {
        a.decomposition
            .morse_node_of(a.map.vertex_of(g.linear_index(&[i, j])).unwrap())
    };
    let mg = &a.decomposition.morse_graph;
    assert!(a.map.out_of_domain().is_none());
    assert_eq!(mg.len(), 3);
    let (b, c, d) = (
        node(1, 1).unwrap(),
        node(2, 1).unwrap(),
        node(3, 1).unwrap(),
    );
    let mut edges = mg.edges.clone();
    edges.sort_unstable();
    let mut want = vec![(c, b), (c, d)];
    want.sort_unstable();
    assert_eq!(edges, want);
    for (i, j) in [(1, 1), (2, 1), (3, 1)] {
        assert_eq!(
            a.cells_of(node(i, j).unwrap()),
            vec![g.linear_index(&[i, j])]
        );
    }

    for i in 0..5 {
        for j in 0..3 {
            let label = a.roa_of_cell(g.linear_index(&[i, j])).unwrap();
            let want = match (i, j) {
                (1, 1) => RoaLabel::Attractor(b),
                (3, 1) => RoaLabel::Attractor(d),
                (0, _) | (1, _) => RoaLabel::Basin(b),
                (4, _) | (3, _) => RoaLabel::Basin(d),
                _ => RoaLabel::Undecided,
            };
            assert_eq!(label, want, "cell ({i}, {j})");
        }
    }
}

#[test]
fn single_step_leaves_extra_recurrence() {
    // Over one step the column above C maps back into itself.
    let a = analysis(1);
    assert!(a.decomposition.morse_graph.len() > 3);
}
