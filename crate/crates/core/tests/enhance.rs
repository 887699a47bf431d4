use exposlam_core::enhance::{apply_gamma, enhance, enhance_local, EnhanceMethod, EnhanceParams};
use exposlam_core::simulator::{degrade_frame, render, DegradeConfig, SceneConfig};
use exposlam_core::{CameraModel, Image, Pose};
use rand::{Rng, SeedableRng};

#[test]
fn unit_gamma_and_none_are_exact() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(8);
    let img = Image::new(17, 9, 3, (0..17 * 9 * 3).map(|_| rng.random::<f64>()).collect()).unwrap();
    assert_eq!(apply_gamma(&img, 1.0), img);
    assert_eq!(enhance(&img, &EnhanceParams::with_method(EnhanceMethod::None)).unwrap(), img);
}

#[test]
fn local_output_is_bounded_for_wild_input() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(9);
    let img = Image::new(40, 30, 1, (0..1200).map(|_| rng.random_range(-5.0..5.0)).collect()).unwrap();
    let out = enhance_local(&img, &EnhanceParams::default()).unwrap();
    assert!(out.data().iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
}

/// Same frame degraded with two different gammas; enhancement should pull them together.
#[test]
fn enhancement_improves_photometric_consistency() {
    let frame = render(&SceneConfig::default(), &CameraModel::default(), &Pose::identity()).unwrap().image;
    let dim = DegradeConfig { gamma_bias_sigma: 0.0, noise_sigma: 0.0, ..DegradeConfig::default() };
    // frames 10 and 30 sit at the gamma extremes 1.5 and 0.5
    let a = degrade_frame(&frame, 10, &dim);
    let b = degrade_frame(&frame, 30, &dim);
    let before = a.luminance().mean_abs_diff(&b.luminance());
    for method in [EnhanceMethod::GlobalGamma, EnhanceMethod::LocalPyramid] {
        let p = EnhanceParams::with_method(method);
        let (ea, eb) = (enhance(&a, &p).unwrap(), enhance(&b, &p).unwrap());
        let after = ea.luminance().mean_abs_diff(&eb.luminance());
        assert!(after < before, "{method:?}: {after} vs {before}");
    }
}
