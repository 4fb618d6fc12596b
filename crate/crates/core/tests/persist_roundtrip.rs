use pat_core::forward::{simulate_fourier_full, simulate_separated, FullOptions, KGrid, PlanOptions, SamplingPlan, SeparatedData, SinogramData};
use pat_core::meanops::{spherical_mean, MeanData};
use pat_core::persist::{load, load_recon, save, save_recon, sidecar_path};
use pat_core::recon::{recon2d, ReconOptions};
use pat_core::xforms::{radon_forward, Sinogram};
use pat_core::{make_phantom, BumpSpec, IlluminationSet, PhantomSpec, ScalarField};

fn phantom() -> pat_core::Phantom {
    let mut spec = PhantomSpec::basic(2, 12, 12);
    spec.q = vec![BumpSpec::with_peak(vec![0.0, 0.1], 0.3, 0.05)];
    spec.f1 = vec![BumpSpec::with_peak(vec![0.1, 0.0], 0.2, 0.2)];
    make_phantom(&spec).unwrap()
}

#[test]
fn separated_data_round_trips() {
    let p = phantom();
    let plan = SamplingPlan::standard(&p, &p.gamma, &PlanOptions { interior_detectors: 2, ..Default::default() }).unwrap();
    let d = simulate_separated(&p, &p.gamma, &plan).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save(&d, &dir.path().join("sep"), Some("h")).unwrap();
    let back: SeparatedData = load(&dir.path().join("sep")).unwrap();
    assert_eq!(back, d);
    let side: serde_json::Value = serde_json::from_slice(&std::fs::read(sidecar_path(&dir.path().join("sep"))).unwrap()).unwrap();
    assert_eq!(side["meta"]["metadata"]["phantom_hash"], d.metadata.phantom_hash.as_str());
    assert_eq!(side["meta"]["integration_order"], 3);
}

#[test]
fn sinogram_data_round_trips() {
    let mut spec = PhantomSpec::basic(2, 8, 6);
    spec.f0 = vec![BumpSpec::with_peak(vec![0.0, 0.0], 1.3, 1.0)];
    let p = make_phantom(&spec).unwrap();
    let illum = IlluminationSet::uniform(2, 6, 4, 1.3, 0.01).unwrap();
    let opts = FullOptions { k_max: Some(3.0), ..Default::default() };
    let s = simulate_fourier_full(&p, &illum, &p.gamma, &KGrid::new(0.75, 4).unwrap(), &opts).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save(&s, &dir.path().join("sino"), None).unwrap();
    let back: SinogramData = load(&dir.path().join("sino")).unwrap();
    assert_eq!(back, s);
}

#[test]
fn mean_data_and_sinogram_round_trip() {
    let p = phantom();
    let m = spherical_mean(&p.q_exact, &p.gamma.points, &[0.2, 0.5, 0.9]);
    let illum = IlluminationSet::uniform(2, 5, 3, 1.0, 0.01).unwrap();
    let sg = radon_forward(&p.q, &illum, 0.05);
    let dir = tempfile::tempdir().unwrap();
    save(&m, &dir.path().join("m"), None).unwrap();
    save(&sg, &dir.path().join("s"), None).unwrap();
    assert_eq!(load::<MeanData>(&dir.path().join("m")).unwrap(), m);
    assert_eq!(load::<Sinogram>(&dir.path().join("s")).unwrap(), sg);
}

#[test]
fn recon_result_round_trips() {
    let p = phantom();
    let plan = SamplingPlan::standard(&p, &p.gamma, &PlanOptions { interior_detectors: 2, ..Default::default() }).unwrap();
    let d = simulate_separated(&p, &p.gamma, &plan).unwrap();
    let r = recon2d(&d, &p.f0_exact, &ReconOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_recon(dir.path(), &r.q_hat, &r.f1_hat, &r.diagnostics, Some("cfg")).unwrap();
    let (q, f1, diag) = load_recon(dir.path()).unwrap();
    assert_eq!(q, r.q_hat);
    assert_eq!(f1, r.f1_hat);
    assert_eq!(diag, r.diagnostics);
    let again: ScalarField = load(&dir.path().join("q_hat")).unwrap();
    assert_eq!(again.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), r.q_hat.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
}
