use exiffi_core::forest::{average_path_length, Node, Split, Tree};
use exiffi_core::{global_importance, local_importance, Error, Forest, ForestParams};

fn axis(j: usize, p: usize) -> Vec<f64> {
    let mut v = vec![0.0; p];
    v[j] = 1.0;
    v
}

/// Chain of splits on feature 0 at 0, 1, 2: a sample above every cut follows
/// the left branch three times and ends in a leaf of size 1 at depth 3.
fn chain_tree() -> Tree<f64> {
    let nodes = vec![
        Node::internal(0, 8, Split::new(axis(0, 2), vec![0.0, 0.0], 1, 2, 4, 4)),
        Node::internal(1, 4, Split::new(axis(0, 2), vec![1.0, 0.0], 3, 4, 2, 2)),
        Node::leaf(1, 4),
        Node::internal(2, 2, Split::new(axis(0, 2), vec![2.0, 0.0], 5, 6, 1, 1)),
        Node::leaf(2, 2),
        Node::leaf(3, 1),
        Node::leaf(3, 1),
    ];
    Tree::from_nodes(nodes, (0..8).collect(), 2).unwrap()
}

fn one_split_tree(leaf_size: usize) -> Tree<f64> {
    let nodes = vec![
        Node::internal(0, 2 * leaf_size, Split::new(axis(1, 2), vec![0.0, 0.0], 1, 2, leaf_size, leaf_size)),
        Node::leaf(1, leaf_size),
        Node::internal(1, leaf_size, Split::new(axis(0, 2), vec![0.0, 0.0], 3, 4, 1, leaf_size - 1)),
        Node::leaf(2, 1),
        Node::leaf(2, leaf_size - 1),
    ];
    Tree::from_nodes(nodes, (0..2 * leaf_size).collect(), 2).unwrap()
}

fn forest(trees: Vec<Tree<f64>>, psi: usize) -> Forest<f64> {
    Forest::from_trees(ForestParams::default(), trees, vec!["a".into(), "b".into()], psi, None).unwrap()
}

#[test]
fn path_length_depth_three_singleton_leaf() {
    let f = forest(vec![chain_tree()], 8);
    assert_eq!(f.path_length(&[5.0, 0.0]).unwrap(), 3.0);
}

#[test]
fn path_length_adds_leaf_size_correction() {
    let f = forest(vec![one_split_tree(6)], 12);
    // right at the root (b <= 0), then right again (a <= 0): depth 2, leaf of 5
    let got = f.path_length(&[-1.0, -1.0]).unwrap();
    assert!((got - (2.0 + average_path_length(5))).abs() < 1e-15);
    assert!((average_path_length(5) - (2.0 * (1.0 + 0.5 + 1.0 / 3.0 + 0.25) - 1.6)).abs() < 1e-15);
}

#[test]
fn path_length_averages_trees() {
    let f = forest(vec![chain_tree(), chain_tree(), one_split_tree(4)], 8);
    let x = [5.0, 5.0];
    // chain: depth 3; one_split: root left (b > 0) into a leaf of 4 at depth 1
    let want = (3.0 + 3.0 + 1.0 + average_path_length(4)) / 3.0;
    assert!((f.path_length(&x).unwrap() - want).abs() < 1e-15);
    let score = f.anomaly_score(&x).unwrap();
    assert!((score - 2f64.powf(-want / average_path_length(8))).abs() < 1e-15);
}

#[test]
fn hand_lfi_on_chain() {
    let f = forest(vec![chain_tree()], 8);
    let imp = local_importance(&f, &[5.0, 0.0]).unwrap();
    // ratios 8/4, 4/2, 2/1 on feature 0; feature 1 never used
    assert_eq!(imp.raw, vec![6.0, 0.0]);
    assert_eq!(imp.normalizer, vec![3.0, 0.0]);
    assert_eq!(imp.lfi, vec![2.0, 0.0]);
}

#[test]
fn hand_gfi() {
    let f = forest(vec![chain_tree()], 8);
    let d = exiffi_core::Dataset::from_rows(&[vec![5.0, 0.0], vec![-1.0, 0.0], vec![-2.0, 3.0]], None).unwrap();
    // outlier LFI_a = 2; inliers both go right at the root: raw 2, norm 1 each
    let g = global_importance(&f, &d, &[1, 0, 0]).unwrap();
    assert_eq!(g.scores, vec![1.0, 0.0]);
    assert_eq!(g.ranking, vec![0, 1]);
}

#[test]
fn corrupted_topologies_are_rejected() {
    let bad_counts = vec![
        Node::internal(0, 4, Split::new(axis(0, 2), vec![0.0, 0.0], 1, 2, 1, 2)),
        Node::leaf(1, 1),
        Node::leaf(1, 3),
    ];
    assert!(matches!(Tree::from_nodes(bad_counts, vec![0, 1, 2, 3], 2), Err(Error::Corruption(_))));
    let cycle = vec![
        Node::internal(0, 2, Split::new(axis(0, 2), vec![0.0, 0.0], 0, 1, 1, 1)),
        Node::leaf(1, 1),
    ];
    assert!(matches!(Tree::from_nodes(cycle, vec![0, 1], 2), Err(Error::Corruption(_))));
}
