use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use cvrp_qptas::dissection::{rho_for_instance, Dissection, LayoutMode, PortalLayout};
use cvrp_qptas::flowgraph::enumerate_flow_graphs;
use cvrp_qptas::lp::{build_constraints, solve_extreme_point, SegmentCatalog};
use cvrp_qptas::mpaths::{run_dp, DpCaps, FlowMode};
use cvrp_qptas::oracle::{brute_force_cvrp, held_karp, itp, HkVariant, OracleBudget};
use cvrp_qptas::pipeline::{run_pipeline, PipelineConfig};
use cvrp_qptas::Eps;
use cvrp_qptas_bench::{cvrp, mpaths, random_points};
use std::hint::black_box;

fn oracles(c: &mut Criterion) {
    let mut g = c.benchmark_group("held_karp");
    for n in [8, 12] {
        let pts = random_points(1, n, 0.0, 1.0);
        g.bench_with_input(BenchmarkId::from_parameter(n), &pts, |b, p| {
            b.iter(|| held_karp(black_box(p), HkVariant::Tour).unwrap())
        });
    }
    g.finish();
    let inst = cvrp(2, 6, 2);
    c.bench_function("brute_force_cvrp_n6", |b| b.iter(|| brute_force_cvrp(black_box(&inst), OracleBudget::default()).unwrap()));
    let inst = cvrp(3, 40, 4);
    c.bench_function("itp_n40", |b| b.iter(|| itp(black_box(&inst)).unwrap()));
}

fn flow_graphs(c: &mut Criterion) {
    c.bench_function("enumerate_flow_graphs_k5", |b| b.iter(|| enumerate_flow_graphs(black_box(5), 1 << 20, None).unwrap()));
}

fn dp(c: &mut Criterion) {
    let mut g = c.benchmark_group("mpaths_dp_shift");
    g.sample_size(10);
    for m in [1, 2] {
        let inst = mpaths(4, 5, m);
        let rho = rho_for_instance(&inst);
        let layout = PortalLayout::new(rho, 3, LayoutMode::Restricted).unwrap();
        let d = Dissection::new(inst.square, rho, (2, 2)).unwrap();
        g.bench_with_input(BenchmarkId::new("exact", m), &inst, |b, i| {
            b.iter(|| run_dp(black_box(i), &d, &layout, FlowMode::Exact, &DpCaps::default()))
        });
    }
    g.finish();
}

fn lp(c: &mut Criterion) {
    let cat = SegmentCatalog { m: 2, counts: vec![vec![1, 2], vec![2, 0], vec![0, 1]] };
    let cs = build_constraints(&cat, 3, Eps::from_inverse(2).unwrap()).unwrap();
    c.bench_function("lp_extreme_point_m2_k3", |b| b.iter(|| solve_extreme_point(black_box(&cs)).unwrap()));
}

fn pipeline(c: &mut Criterion) {
    let mut g = c.benchmark_group("pipeline");
    g.sample_size(10);
    let inst = cvrp(5, 5, 2);
    g.bench_function("n5_c2", |b| b.iter(|| run_pipeline(black_box(&inst), &PipelineConfig::default()).unwrap()));
    g.finish();
}

criterion_group!(benches, oracles, flow_graphs, dp, lp, pipeline);
criterion_main!(benches);
