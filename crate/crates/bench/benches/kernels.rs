use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use jumplab_core::sde::SmeStepper;
use jumplab_core::{
    decompose, jump_rates, markov_sample, presets, simulate_qy, DensityMatrix, Scheme,
    SimulationParams,
};

fn sme_step(c: &mut Criterion) {
    let model = presets::rabi(1.0, 10.0, 1.0).validate().unwrap();
    for (name, scheme) in [("sme_step_kraus", Scheme::Kraus), ("sme_step_em", Scheme::EulerMaruyama)] {
        let mut stepper = SmeStepper::new(&model, scheme);
        let mut rho = DensityMatrix::maximally_mixed(2).into_matrix();
        // alternate the sign of the increment so the state stays interior
        let mut dw = 1e-2;
        c.bench_function(name, |b| {
            b.iter(|| {
                dw = -dw;
                stepper.step(black_box(&mut rho), 1e-4, dw).unwrap();
            })
        });
    }
}

fn rates(c: &mut Criterion) {
    let model = presets::thermal(1.0, 0.7, 10.0, 1.0).validate().unwrap();
    c.bench_function("decompose_and_rates_2x2", |b| {
        b.iter(|| {
            let t = decompose(black_box(&model));
            jump_rates(&t, model.setup()).unwrap()
        })
    });
}

fn sampling(c: &mut Criterion) {
    let model = presets::rabi(1.0, 10.0, 1.0).validate().unwrap();
    let gen = jump_rates(&decompose(&model), model.setup()).unwrap();
    let mut seed = 0u64;
    c.bench_function("markov_sample_horizon_100", |b| {
        b.iter(|| {
            seed += 1;
            markov_sample(&gen, &[1.0, 0.0], 100.0, seed)
        })
    });
}

fn qy(c: &mut Criterion) {
    let model = presets::rabi(1.0, 10.0, 1.0).validate().unwrap();
    let tensors = decompose(&model);
    let params = SimulationParams::new(1e-4, 0.1).with_decimation(1000);
    c.bench_function("qy_1000_steps", |b| {
        b.iter(|| simulate_qy(&tensors, model.setup(), &[1.0, 0.0], &params, 3).unwrap())
    });
}

criterion_group!(benches, sme_step, rates, sampling, qy);
criterion_main!(benches);
