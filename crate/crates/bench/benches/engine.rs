use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use thetaforge::brokenlines::{chamber_point, structure_constants, theta_in_chamber};
use thetaforge::cluster::{mutate_diagram, mutate_sequence, Seed, TorusKind, TorusPoly};
use thetaforge::lattice::LatticeVec;
use thetaforge_bench::{kronecker_cluster, kronecker_complete, kronecker_initial};

fn completion(c: &mut Criterion) {
    let mut g = c.benchmark_group("complete");
    g.sample_size(10);
    for (n, k) in [(1, 8), (2, 6), (3, 5)] {
        let d = kronecker_initial(n, k).unwrap();
        g.bench_with_input(BenchmarkId::new(format!("kronecker{n}"), k), &k, |b, &k| b.iter(|| d.complete(black_box(k)).unwrap()));
    }
    g.finish();
}

fn thetas(c: &mut Criterion) {
    let mut g = c.benchmark_group("theta");
    g.sample_size(10);
    for (n, k) in [(1, 8), (2, 6)] {
        let d = kronecker_complete(n, k).unwrap();
        let q = chamber_point(&d, 0).unwrap();
        let p = LatticeVec(vec![-2, 1]);
        g.bench_function(BenchmarkId::new(format!("kronecker{n}"), k), |b| b.iter(|| theta_in_chamber(&d, black_box(&p), &q, k).unwrap()));
    }
    g.finish();
}

fn products(c: &mut Criterion) {
    let mut g = c.benchmark_group("structure_constants");
    g.sample_size(10);
    let k = 5;
    let d = kronecker_complete(1, k).unwrap();
    let (p1, p2) = (LatticeVec(vec![1, -1]), LatticeVec(vec![-1, 2]));
    g.bench_function("pentagon", |b| b.iter(|| structure_constants(&d, black_box(&p1), &p2, k).unwrap()));
    g.finish();
}

fn mutation(c: &mut Criterion) {
    let mut g = c.benchmark_group("mutation");
    g.sample_size(10);
    let k = 6;
    let cd = kronecker_cluster(2, k).unwrap();
    g.bench_function("diagram/kronecker2", |b| b.iter(|| mutate_diagram(&cd, black_box(0)).unwrap()));
    let s = Seed::a2().with_found_lambda().unwrap();
    let f = TorusPoly::monomial(LatticeVec(vec![1, 0]));
    g.bench_function("monomial/a2/1,2,1,2", |b| b.iter(|| mutate_sequence(&s, black_box(&[0, 1, 0, 1]), TorusKind::A, &f, k).unwrap()));
    g.finish();
}

criterion_group!(benches, completion, thetas, products, mutation);
criterion_main!(benches);
