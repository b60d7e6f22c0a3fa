use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use pointgo_core::control::{ControlSystem, GainConfig, JoystickSample};
use pointgo_core::kinematics::KinematicChain;
use pointgo_core::metrics::MetricsConfig;
use pointgo_core::sim::{run_episode, EpisodeSpec, ScenarioKind, ScriptedAgent, TaskScenario, World, DEFAULT_DT};

fn world_step(c: &mut Criterion) {
    let chain = KinematicChain::gen3();
    let gains = GainConfig::default();
    let q0 = TaskScenario::builtin(ScenarioKind::OrientTarget).sample_start(&chain, 0);
    let u = JoystickSample::axes(0.6, -0.3, 0.2);
    for system in ControlSystem::ALL {
        let world = World::new(chain.clone(), gains.clone(), system, q0.clone(), DEFAULT_DT).unwrap();
        c.bench_function(&format!("world_step/{system}"), |b| {
            b.iter_batched_ref(
                || world.clone(),
                |w| w.step(black_box(&u)).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
}

fn episodes(c: &mut Criterion) {
    let chain = KinematicChain::gen3();
    let gains = GainConfig::default();
    let cfg = MetricsConfig::default();
    let mut group = c.benchmark_group("episode");
    group.sample_size(10);
    for kind in ScenarioKind::ALL {
        let scenario = TaskScenario::builtin(kind);
        let spec = EpisodeSpec {
            system: ControlSystem::PointAndGo,
            scenario: scenario.clone(),
            seed: 0,
            dt: DEFAULT_DT,
        };
        group.bench_function(kind.as_str(), |b| {
            b.iter(|| {
                let mut agent = ScriptedAgent::new(spec.system, &scenario, &gains);
                run_episode(&chain, &gains, &spec, &mut agent, &cfg).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, world_step, episodes);
criterion_main!(benches);
