//! Sequential versus rayon execution for the batch stages of the pipeline.
//!
//! Without the `parallel` feature both variants run on one thread, which
//! makes the comparison a check that the fallback adds no overhead.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use scenegraph_vad::eval::{evaluate_all, MatchParams};
use scenegraph_vad::metric::{
    estimate_normalization, sample_cooccurring_pairs, DEFAULT_NORMALIZATION_SAMPLE,
};
use scenegraph_vad::pipeline::{build_model, score_video, ModelConfig, Video};
use scenegraph_vad::scenegraph::{default_edge_threshold, video_graphs, REFERENCE_FRAME_HEIGHT_PX};
use scenegraph_vad::synth::{campus_scene, class_map, generate, inject, AnomalyKind};
use scenegraph_vad::Execution;

const FRAMES: u64 = 600;
const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn clip(id: &str, seed: u64) -> Video {
    Video::from_records(generate(&campus_scene(id, seed, FRAMES)).unwrap().records)
}

fn stages(c: &mut Criterion) {
    let train: Vec<Video> = (1..=5).map(|s| clip(&format!("train-{s}"), s)).collect();
    let h = default_edge_threshold(REFERENCE_FRAME_HEIGHT_PX);
    let config = ModelConfig::default();
    let model = build_model(&train, &config, class_map(), Execution::Parallel).unwrap();

    let spec = inject(
        campus_scene("test", 101, FRAMES),
        AnomalyKind::LeftBehindObject,
        60,
        FRAMES - 60,
    )
    .unwrap();
    let out = generate(&spec).unwrap();
    let test = Video::from_records(out.records);
    let gt = [("test".to_owned(), out.annotations.unwrap())]
        .into_iter()
        .collect();
    let regions = score_video(&test, &model, None, None, Execution::Parallel).unwrap();

    let graphs: Vec<_> = train
        .iter()
        .flat_map(|v| {
            video_graphs(&v.records, h, config.trajectory_len, Execution::Parallel).unwrap()
        })
        .collect();
    let refs: Vec<_> = graphs.iter().map(|f| &f.graph).collect();
    let sample = sample_cooccurring_pairs(&refs, DEFAULT_NORMALIZATION_SAMPLE, 0);

    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new("scene_graphs", name), &exec, |b, &exec| {
            b.iter(|| {
                video_graphs(black_box(&train[0].records), h, config.trajectory_len, exec).unwrap()
            })
        });
        group.bench_with_input(
            BenchmarkId::new("normalization", name),
            &exec,
            |b, &exec| b.iter(|| estimate_normalization(black_box(&sample), exec).unwrap()),
        );
        group.bench_with_input(BenchmarkId::new("build_model", name), &exec, |b, &exec| {
            b.iter(|| build_model(black_box(&train), &config, class_map(), exec).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("score_video", name), &exec, |b, &exec| {
            b.iter(|| score_video(black_box(&test), &model, None, None, exec).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("evaluate", name), &exec, |b, &exec| {
            b.iter(|| evaluate_all(black_box(&regions), &gt, MatchParams::default(), exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, stages);
criterion_main!(benches);
