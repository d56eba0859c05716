use criterion::{black_box, criterion_group, criterion_main, Criterion};
use typomap_bench::{aligned, synthetic, unit_stream};
use typomap_core::aligner::{align_language, AlignerSettings};
use typomap_core::assoc::{chi_square, ContingencyTable};
use typomap_core::kriging::{ordinary_krige, DistanceMode, VariogramParams};
use typomap_core::ngram::{run_language, NgramSettings};
use typomap_core::semmap::{classical_mds, hamming_matrix};

fn chi2(c: &mut Criterion) {
    let mut u = unit_stream(1);
    let tables: Vec<ContingencyTable> = (0..10_000)
        .map(|_| {
            let mut cell = || 1 + (u.next().unwrap() * 500.0) as u64;
            ContingencyTable::new(cell(), cell(), cell(), cell())
        })
        .collect();
    c.bench_function("chi_square x10000", |b| {
        b.iter(|| tables.iter().map(|t| chi_square(black_box(t)).unwrap().1).sum::<f64>())
    });
}

fn align(c: &mut Criterion) {
    let f = synthetic(200);
    c.bench_function("align one language (200 verses)", |b| {
        b.iter(|| align_language(&f.corpus, "mix", AlignerSettings::default()).unwrap())
    });
}

fn mining(c: &mut Criterion) {
    let f = synthetic(200);
    let (alignments, usage) = aligned(&f);
    let settings = NgramSettings::default();
    c.bench_function("ngram refinement (mix)", |b| {
        b.iter(|| run_language(&f.corpus, &alignments["mix"], &usage, Some(&f.deps), &settings).unwrap())
    });
}

fn mds(c: &mut Criterion) {
    let mut u = unit_stream(2);
    let rows: Vec<Vec<String>> = (0..300)
        .map(|_| (0..8).map(|_| format!("l{}", (u.next().unwrap() * 4.0) as u32)).collect())
        .collect();
    let d = hamming_matrix(&rows).unwrap();
    c.bench_function("classical MDS (300 points)", |b| b.iter(|| classical_mds(black_box(&d)).unwrap()));
}

fn kriging(c: &mut Criterion) {
    let mut u = unit_stream(3);
    let samples: Vec<(f64, f64, f64)> = (0..100)
        .map(|_| (u.next().unwrap() * 10.0, u.next().unwrap() * 10.0, u.next().unwrap()))
        .collect();
    let params = VariogramParams::new(0.0, 0.1, 3.0).unwrap();
    let extent = (0.0, 10.0, 0.0, 10.0);
    c.bench_function("ordinary kriging 100 samples, 100x100 grid", |b| {
        b.iter(|| ordinary_krige(&samples, params, DistanceMode::Planar, 100, 100, extent).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = chi2, align, mining, mds, kriging
}
criterion_main!(benches);
