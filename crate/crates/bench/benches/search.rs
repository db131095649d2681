use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use treegnas::evaluator::PlantedMock;
use treegnas::{planted_mock, random_search, search, MctTree, SearchConfig};

fn mock_search(c: &mut Criterion) {
    let mock = planted_mock(PlantedMock::default_prefix(), 0.1, 0).unwrap();
    let cfg = SearchConfig { trials: 1000, ..SearchConfig::default() };
    let mut group = c.benchmark_group("mock_1000_trials");
    group.bench_function("mcts", |b| b.iter(|| search(black_box(&cfg), &mock).unwrap()));
    group.bench_function("uniform", |b| b.iter(|| random_search(black_box(&cfg), &mock).unwrap()));
    group.finish();
}

fn tree_io(c: &mut Criterion) {
    let mock = planted_mock(PlantedMock::default_prefix(), 0.1, 0).unwrap();
    let tree = search(&SearchConfig { trials: 2000, theta: 3, ..SearchConfig::default() }, &mock).unwrap().tree;
    let text = tree.to_json();
    c.bench_function("tree_to_json", |b| b.iter(|| black_box(&tree).to_json()));
    c.bench_function("tree_from_json", |b| b.iter(|| MctTree::from_json(black_box(&text)).unwrap()));
    c.bench_function("tree_to_dot", |b| b.iter(|| black_box(&tree).to_dot()));
}

criterion_group!(benches, mock_search, tree_io);
criterion_main!(benches);
