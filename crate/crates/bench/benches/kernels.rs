use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use hybridpnt::bounds::{bcrb_step, observation_information};
use hybridpnt::filters::{init_estimate, Filter, FilterKind};
use hybridpnt::rng::TrialStreams;
use hybridpnt::statespace::{simulate_truth, ModelSpec, SystemModel, TruthOptions};
use hybridpnt::tworay::{ml_bias, GroundPermittivity, OfdmConfig, Reflection, TwoRayGeometry};
use hybridpnt::{Scenario, ScenarioConfig};

fn short_scenario() -> Scenario {
    let mut cfg = ScenarioConfig::paper_defaults();
    cfg.duration = 30.0;
    Scenario::build(&cfg).unwrap()
}

fn two_ray(c: &mut Criterion) {
    let cfg = OfdmConfig::default();
    let geom = TwoRayGeometry::new(6.0, 1.0, 42.0).unwrap();
    let refl = Reflection::Ground(GroundPermittivity::default());
    c.bench_function("ml_bias one geometry", |b| b.iter(|| ml_bias(&geom, &cfg, refl).unwrap()));
}

fn filters(c: &mut Criterion) {
    let scn = short_scenario();
    let model = SystemModel::new(&scn, ModelSpec::from_config(&scn.config)).unwrap();
    let streams = TrialStreams::new(7, 0);
    let run = simulate_truth(&scn, &model, &streams, TruthOptions::full()).unwrap();
    let k = 5;
    for kind in [FilterKind::Ekf, FilterKind::Iekf, FilterKind::Ekf2] {
        let est = init_estimate(&model, &model, &run.states[0], &streams);
        c.bench_function(&format!("{} predict+update, 5 users", kind.name()), |b| {
            b.iter_batched(
                || Filter::new(kind, &model, est.clone()),
                |mut f| {
                    f.predict(&run.controls[k]);
                    f.update(&run.observations[k], &scn.sats[k]).unwrap()
                },
                BatchSize::SmallInput,
            )
        });
    }
}

fn bounds(c: &mut Criterion) {
    let scn = short_scenario();
    let model = SystemModel::new(&scn, ModelSpec::from_config(&scn.config)).unwrap();
    let run = simulate_truth(&scn, &model, &TrialStreams::new(7, 0), TruthOptions::noiseless()).unwrap();
    let obs = &run.observations[5];
    let h = model.jacobian(&run.states[5], &obs.kinds, &scn.sats[5]);
    let info = observation_information(&h, &model.noise_variances(obs));
    let c0 = model.prior_covariance();
    c.bench_function("bcrb step, 5 users", |b| b.iter(|| bcrb_step(&c0, &model.process, Some(&info)).unwrap()));
}

criterion_group!(benches, two_ray, filters, bounds);
criterion_main!(benches);
