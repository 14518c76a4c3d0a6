mod common;

use common::{check_golden, corner_content, fixture, uniform_image};
use percept::engine::{Layer, Network};
use percept::gradient::{
    grad_cam, grad_cam_pp, guided_bp, integrated_gradients, score_cam, smooth_grad, vanilla_bp, CamMethod, CamRequest,
    IgConfig, SmoothGradConfig,
};
use percept::io::read_image;
use percept::models::{build_reference_cnn, build_reference_cnn_planted, planted_quadrant};
use percept::Tensor;
use proptest::prelude::*;

#[test]
fn linear_model_vanilla_map_is_abs_weight_row() {
    let w: Vec<f32> = (0..12).map(|i| (i as f32 - 5.5) * 0.1).collect();
    let mut all = w.clone();
    all.extend(vec![0.0; 12]);
    let net = Network::new([1, 3, 4], vec![Layer::flatten("flat"), Layer::dense("fc", 12, 2, all, vec![0.0, 0.0])])
        .unwrap();
    let s = vanilla_bp(&net, &Tensor::filled(&[1, 3, 4], 0.3), 0).unwrap();
    let want: Vec<f32> = w.iter().map(|v| v.abs()).collect();
    assert_eq!(s.map.values, want);
}

#[test]
fn vanilla_map_on_fixture_is_golden() {
    let net = build_reference_cnn(7);
    let img = read_image(&fixture("digit0.pgm")).unwrap();
    let s = vanilla_bp(&net, &img, 1).unwrap();
    let again = vanilla_bp(&net, &img, 1).unwrap();
    assert_eq!(s.map.values, again.map.values);
    let text: String = s.map.values.iter().map(|v| format!("{:08x}\n", v.to_bits())).collect();
    check_golden("digit0_vanilla_class1.txt", text.as_bytes());
}

#[test]
fn smoothgrad_single_noiseless_sample_is_vanilla() {
    let net = build_reference_cnn(7);
    for seed in 0..3 {
        let x = uniform_image(seed);
        let cfg = SmoothGradConfig {
            samples: 1,
            sigma: 0.0,
            seed,
        };
        let s = smooth_grad(&net, &x, 2, &cfg).unwrap();
        let v = vanilla_bp(&net, &x, 2).unwrap();
        assert_eq!(s.map.values, v.map.values);
        assert_eq!(s.trace.raw, v.trace.raw);
    }
}

#[test]
fn smoothgrad_is_seeded() {
    let net = build_reference_cnn(7);
    let x = uniform_image(3);
    let cfg = SmoothGradConfig {
        samples: 8,
        sigma: 0.2,
        seed: 11,
    };
    assert_eq!(
        smooth_grad(&net, &x, 0, &cfg).unwrap().map.values,
        smooth_grad(&net, &x, 0, &cfg).unwrap().map.values
    );
}

#[test]
fn guided_support_is_contained_in_vanilla_support() {
    let net = build_reference_cnn(7);
    let mut inputs: Vec<Tensor> = (0..5).map(uniform_image).collect();
    inputs.push(read_image(&fixture("digit0.pgm")).unwrap());
    for x in &inputs {
        for class in 0..4 {
            let g = guided_bp(&net, x, class).unwrap();
            let v = vanilla_bp(&net, x, class).unwrap();
            for (gv, vv) in g.map.values.iter().zip(&v.map.values) {
                assert!(*gv == 0.0 || *vv != 0.0);
            }
            assert!(g.map.nonzero_count() <= v.map.nonzero_count());
        }
    }
}

#[test]
fn integrated_gradients_completeness() {
    let net = build_reference_cnn(7);
    let cfg = IgConfig {
        steps: 256,
        baseline: None,
    };
    for seed in 0..5 {
        let x = uniform_image(seed);
        let s = integrated_gradients(&net, &x, 1, &cfg).unwrap();
        let total: f64 = s.trace.raw.as_ref().unwrap().sum();
        let gap = net.logits(&x).unwrap().data()[1] as f64 - net.logits(&Tensor::zeros(&[1, 16, 16])).unwrap().data()[1] as f64;
        assert!((total - gap).abs() <= 0.01 * gap.abs() + 1e-4, "seed {seed}: {total} vs {gap}");
        let sums = s.trace.ig_partial_sums.as_ref().unwrap();
        assert_eq!(sums.len(), 256);
        assert!((sums[255] - total).abs() < 1e-6);
    }
}

#[test]
fn ig_baseline_shape_is_checked() {
    let net = build_reference_cnn(7);
    let cfg = IgConfig {
        steps: 4,
        baseline: Some(Tensor::zeros(&[1, 8, 8])),
    };
    assert!(integrated_gradients(&net, &uniform_image(0), 0, &cfg).is_err());
}

fn cam(method: CamMethod, net: &Network, x: &Tensor) -> percept::gradient::Saliency {
    let req = CamRequest::new(method, "conv2").with_class(0);
    match method {
        CamMethod::GradCam => grad_cam(net, x, &req),
        CamMethod::GradCamPp => grad_cam_pp(net, x, &req),
        CamMethod::ScoreCam => score_cam(net, x, &req),
    }
    .unwrap()
}

#[test]
fn cam_methods_localize_the_planted_quadrant() {
    let net = build_reference_cnn_planted(7);
    let (rows, cols) = planted_quadrant();
    for seed in 0..5 {
        let x = corner_content(seed, 6);
        for method in [CamMethod::GradCam, CamMethod::GradCamPp, CamMethod::ScoreCam] {
            let s = cam(method, &net, &x);
            assert_eq!((s.map.height, s.map.width), (16, 16));
            let frac = s.map.mass_fraction(rows.clone(), cols.clone());
            assert!(frac >= 0.8, "{method:?} seed {seed}: {frac}");
        }
    }
}

#[test]
fn grad_cam_is_blind_outside_the_planted_path() {
    let net = build_reference_cnn_planted(7);
    for seed in 0..3 {
        let mut data = uniform_image(seed).into_data();
        for (i, v) in data.iter_mut().enumerate() {
            if i / 16 < 8 && i % 16 < 8 {
                *v = 0.0;
            }
        }
        let x = Tensor::new(vec![1, 16, 16], data).unwrap();
        let s = cam(CamMethod::GradCam, &net, &x);
        assert_eq!(s.map.total(), 0.0);
    }
}

#[test]
fn cam_rejects_non_spatial_layers() {
    let net = build_reference_cnn(7);
    let req = CamRequest::new(CamMethod::GradCam, "fc1");
    assert!(grad_cam(&net, &uniform_image(0), &req).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn cam_maps_are_nonnegative_and_input_sized(seed in any::<u64>(), class in 0usize..4) {
        let net = build_reference_cnn(7);
        let x = uniform_image(seed);
        let req = CamRequest::new(CamMethod::GradCamPp, "relu1").with_class(class);
        let s = grad_cam_pp(&net, &x, &req).unwrap();
        prop_assert_eq!(s.map.values.len(), 256);
        prop_assert!(s.map.values.iter().all(|&v| v >= 0.0 && v.is_finite()));
    }
}
