mod common;

use spinrelax::chirp::{
    deconvolve_chirp, deconvolve_chirp_with, distortion_ratio, fit_hole_profile,
    simulate_chirped_transmission, ChirpReadout, DeconvolutionOptions, HoleProfile,
};
use spinrelax::Error;

const HOLE: HoleProfile = HoleProfile {
    center: 0.0,
    fwhm: 56.6e3,
    depth: 0.5,
    baseline_absorption: 0.3,
};

#[test]
fn slow_chirp_reads_the_static_profile() {
    let chirp = ChirpReadout::new(2e6, 60e-3).unwrap();
    assert!(distortion_ratio(&HOLE, &chirp) < 0.05);
    let tr = simulate_chirped_transmission(&HOLE, &chirp).unwrap();
    assert_eq!(tr.metadata["distorted"], "false");
    let y = tr.y();
    let peak = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let want = HOLE.static_transmission(HOLE.center);
    let base = HOLE.static_transmission(1e6);
    assert!(
        ((peak - want) / (want - base)).abs() < 0.01,
        "{peak} vs {want}"
    );
}

#[test]
fn fast_chirp_is_flagged_and_corrected() {
    let chirp = ChirpReadout::new(2e6, 60e-6).unwrap();
    let tr = simulate_chirped_transmission(&HOLE, &chirp).unwrap();
    assert_eq!(tr.metadata["distorted"], "true");
    let d = deconvolve_chirp(&tr, &chirp).unwrap();
    let r = fit_hole_profile(&d.profile).unwrap();
    assert!((r.get("fwhm").unwrap() / HOLE.fwhm - 1.0).abs() < 0.02);
}

#[test]
fn wrong_kernel_sign_rings() {
    let chirp = ChirpReadout::new(2e6, 60e-6).unwrap();
    let tr = simulate_chirped_transmission(&HOLE, &chirp).unwrap();
    let good = deconvolve_chirp(&tr, &chirp).unwrap();
    let lenient = DeconvolutionOptions {
        rate_sign: -1.0,
        ringing_threshold: f64::INFINITY,
        ..DeconvolutionOptions::default()
    };
    let bad = deconvolve_chirp_with(&tr, &chirp, &lenient).unwrap();
    assert!(
        bad.ringing > 10.0 * good.ringing.max(1e-3),
        "{} vs {}",
        bad.ringing,
        good.ringing
    );
    let strict = DeconvolutionOptions {
        rate_sign: -1.0,
        ..DeconvolutionOptions::default()
    };
    assert!(matches!(
        deconvolve_chirp_with(&tr, &chirp, &strict),
        Err(Error::ChirpMismatch(_))
    ));
}

#[test]
fn narrow_hole_needs_a_longer_chirp() {
    let hole = HoleProfile { fwhm: 10e3, ..HOLE };
    let chirp = ChirpReadout::new(2e6, 600e-6).unwrap();
    let tr = simulate_chirped_transmission(&hole, &chirp).unwrap();
    let r = fit_hole_profile(&deconvolve_chirp(&tr, &chirp).unwrap().profile).unwrap();
    assert!((r.get("fwhm").unwrap() / hole.fwhm - 1.0).abs() < 0.02);
}

#[test]
fn mismatched_readout_is_rejected() {
    let chirp = ChirpReadout::new(2e6, 60e-6).unwrap();
    let tr = simulate_chirped_transmission(&HOLE, &chirp).unwrap();
    let other = ChirpReadout::new(4e6, 60e-6).unwrap();
    assert!(matches!(
        deconvolve_chirp(&tr, &other),
        Err(Error::ChirpMismatch(_))
    ));

    let mut samples = tr.samples.clone();
    samples[10].t += 1e-9;
    let warped = spinrelax::model::DecayTrace { samples, ..tr };
    assert!(matches!(
        deconvolve_chirp(&warped, &chirp),
        Err(Error::NonUniformSampling { index: 10 } | Error::NonUniformSampling { index: 11 })
    ));
}
