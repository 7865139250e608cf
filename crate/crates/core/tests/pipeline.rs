use lik_core::evalkit::{self, EvalConfig};
use lik_core::{gest, io, kestim, pvel, synth};
use lik_core::{DMatrix, KernelSpec, LatentModel, SignalFn};

fn model(d: usize, k: usize, seed: u64) -> LatentModel {
    let g = SignalFn::standardized("poly:0,1;0,0.6;0,-0.5".parse().unwrap(), k).unwrap();
    LatentModel::new(d, 2, KernelSpec::Gaussian { sigma: 1.0 }, g, 1.0, seed).unwrap()
}

#[test]
fn estimate_fit_predict_evaluate() {
    let m = model(40, 3, 2);
    let train = synth::generate_rows(&m, 0, 600, 3, 2).unwrap();
    let test = synth::generate_rows(&m, 600, 200, 3, 2).unwrap();
    let k_hat = kestim::estimate_k_auto(&train.y).unwrap().k_hat;
    assert!(kestim::gram_error(&k_hat, m.gram()).unwrap() < 0.01);

    let fit = pvel::boost(&train.y, &train.features, &k_hat, 0.1, 30).unwrap();
    let yhat = pvel::predict(&fit, &test.features, &k_hat).unwrap();
    let report = evalkit::evaluate(&test.y, &yhat, None, &EvalConfig::default()).unwrap();
    assert!(report.corr > 0.0 && report.t_stat > 2.0, "{report:?}");
    assert_eq!(report.n_days, 200);
}

#[test]
fn nparam_fit_tracks_truth_with_true_kernel() {
    let g = SignalFn::standardized("steps:-1,1".parse().unwrap(), 1).unwrap();
    let m = LatentModel::new(60, 2, KernelSpec::Gaussian { sigma: 1.0 }, g, 0.5, 4).unwrap();
    let panel = synth::generate_panel(&m, 4000, 1, 4).unwrap();
    let part = gest::build_partition(&gest::calibration_sample(&panel.features), 4).unwrap();
    let fit = gest::estimate_g(&panel.features, &panel.y, m.gram(), &part, 0.5, 4).unwrap();
    let truth = gest::cell_means(&m.g_true, &part, 20_000, 4);
    for (a, b) in fit.mu.iter().zip(&truth) {
        assert!((a - b).abs() < 0.5, "{:?} vs {truth:?}", fit.mu);
    }
}

#[test]
fn split_generation_matches_one_shot() {
    let m = model(10, 3, 7);
    let whole = synth::generate_panel(&m, 50, 3, 7).unwrap();
    let tail = synth::generate_rows(&m, 20, 30, 3, 7).unwrap();
    assert_eq!(tail.y, whole.y.rows(20, 30).clone_owned());
}

#[test]
fn panel_survives_disk_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let m = model(8, 3, 1);
    let panel = synth::generate_panel(&m, 12, 3, 1).unwrap();
    io::write_panel(dir.path(), &panel, Some(m.gram()), None).unwrap();
    let back = io::read_panel(dir.path()).unwrap();
    assert_eq!(back.y, panel.y);
    assert_eq!(back.features, panel.features);
    let k: DMatrix<f64> = io::read_matrix(&dir.path().join("K_true.csv")).unwrap();
    assert_eq!(&k, m.gram());
}
