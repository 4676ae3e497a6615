use pdstl::features::extract_many;
use pdstl::stl::StlTemplate;
use pdstl::pipeline::{
    format_predictions, parse_predictions, predict_waveforms, synth_corpus, train_pipeline, CorpusSpec, PipelineConfig,
};
use pdstl::svm::{load_model, save_model};
use pdstl::waveform::{read_corpus, write_corpus, CorpusFormat, SynthParams};

fn corpus() -> CorpusSpec {
    CorpusSpec {
        n_pd: 12,
        n_nonpd: 36,
        pd_bursts: 3,
        params: SynthParams { n_samples: 4000, burst_amplitude: 0.3, ..SynthParams::default() },
        seed: 5,
    }
}

#[test]
fn synth_extract_train_predict() {
    let waveforms = synth_corpus(&corpus()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.csv");
    write_corpus(&waveforms, &path, CorpusFormat::Csv).unwrap();
    let loaded = read_corpus(&path).unwrap();
    assert_eq!(loaded, waveforms);

    let config = PipelineConfig { window_lengths: vec![2, 10, 50], ..PipelineConfig::default() };
    let spec = config.feature_spec().unwrap();
    let features = extract_many(&loaded, &spec.window_lengths, &StlTemplate::default()).unwrap();
    assert!(features.iter().all(|v| v.values.len() == 9));

    let run = train_pipeline(&features, &config, Some(spec)).unwrap();
    assert!(run.training.macro_avg.f1 >= 0.9, "{}", run.summary());
    assert!(run.n_train + run.n_test == waveforms.len());

    let model_path = dir.path().join("model.json");
    save_model(&run.model, &model_path).unwrap();
    let model = load_model(&model_path).unwrap();
    let predictions = predict_waveforms(&model, &loaded).unwrap();
    let direct = predict_waveforms(&run.model, &loaded).unwrap();
    assert_eq!(predictions, direct);
    assert_eq!(parse_predictions(&format_predictions(&predictions)).unwrap(), predictions);
}
