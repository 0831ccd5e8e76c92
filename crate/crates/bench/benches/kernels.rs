use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dppc_core::conditioning::{conditional_kernel, fredholm_det, palm_kernel};
use dppc_core::integrable::{palm_update, IntegrableKernel};
use dppc_core::kernels::sine_kernel;
use dppc_core::oracle;
use dppc_core::sampler::SpectralSampler;
use dppc_core::{Configuration, DomainTag, GroundSpace, Marking, Scheme};

fn interval(n: usize) -> GroundSpace {
    GroundSpace::discretize(DomainTag::RealInterval { a: -5.0, b: 5.0 }, n, Scheme::GaussLegendre).unwrap()
}

fn fredholm(c: &mut Criterion) {
    let mut g = c.benchmark_group("fredholm_det");
    for n in [50, 100, 200] {
        let k = sine_kernel(&interval(n)).unwrap();
        let phi = vec![0.5; n];
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| fredholm_det(&k, &phi).unwrap()));
    }
    g.finish();
}

fn conditioning(c: &mut Criterion) {
    let mut g = c.benchmark_group("conditional_kernel");
    for n in [50, 100, 200] {
        let space = interval(n);
        let k = sine_kernel(&space).unwrap();
        let theta = Marking::from_fn(&space, |x| if x.abs() < 2.0 { 0.3 } else { 1.0 }).unwrap();
        let v = Configuration::new(vec![0, n / 4, 3 * n / 4]).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| conditional_kernel(&k, &theta, &v).unwrap())
        });
    }
    g.finish();
}

fn palm(c: &mut Criterion) {
    let space = interval(100);
    let k = sine_kernel(&space).unwrap();
    let ik = IntegrableKernel::sine(&space).unwrap();
    let v = Configuration::new(vec![10, 40, 70]).unwrap();
    c.bench_function("palm_kernel_100", |b| b.iter(|| palm_kernel(&k, &v).unwrap()));
    c.bench_function("palm_update_100", |b| b.iter(|| palm_update(&ik, &v).unwrap()));
}

fn sampling(c: &mut Criterion) {
    let k = sine_kernel(&interval(100)).unwrap();
    let sampler = SpectralSampler::new(&k).unwrap();
    c.bench_function("sample_batch_100x1000", |b| b.iter(|| sampler.batch(7, 1000)));
}

fn enumeration(c: &mut Criterion) {
    let mut g = c.benchmark_group("oracle_from_kernel");
    for n in [6, 8, 10] {
        let space = GroundSpace::discretize(DomainTag::RealInterval { a: 0.0, b: 2.0 }, n, Scheme::GaussLegendre).unwrap();
        let k = sine_kernel(&space).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| oracle::from_kernel(&k).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, fredholm, conditioning, palm, sampling, enumeration);
criterion_main!(benches);
