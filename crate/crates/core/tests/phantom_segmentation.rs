use lus_core::clips::ClipRng;
use lus_core::curves::{flatness, straighten_segmented, StraightenParams};
use lus_core::phantom::{generate_seeded, work_lower_errors, BoundaryError, CurveShape, PhantomSpec};
use lus_core::pleura::{segment_pleura, SegmentationParams};
use rand::SeedableRng;

fn phantom_set(seed: u64, n: usize) -> Vec<PhantomSpec> {
    let mut rng = ClipRng::seed_from_u64(seed);
    let shapes = [CurveShape::Flat, CurveShape::Quadratic, CurveShape::Cubic];
    (0..n).map(|i| PhantomSpec::randomized(shapes[i % 3], 0.15, &mut rng)).collect()
}

#[test]
fn lower_boundary_recovered_on_seeded_phantoms() {
    let params = SegmentationParams::default();
    let mut good = 0;
    for spec in phantom_set(2024, 100) {
        let (clip, truth) = generate_seeded(&spec).unwrap();
        let seg = segment_pleura(&clip.frames()[0], &params).unwrap();
        let err = BoundaryError::from_errors(&work_lower_errors(&seg, &truth).unwrap()).unwrap();
        if err.median_abs <= 2.0 && err.rms <= 4.0 {
            good += 1;
        }
    }
    assert!(good >= 95, "{good}/100");
}

#[test]
fn noiseless_flat_phantom_is_nearly_exact() {
    let spec = PhantomSpec { speckle_sigma: 0.0, ..Default::default() };
    let (clip, truth) = generate_seeded(&spec).unwrap();
    let seg = segment_pleura(&clip.frames()[0], &SegmentationParams::default()).unwrap();
    let err = BoundaryError::from_errors(&work_lower_errors(&seg, &truth).unwrap()).unwrap();
    assert!(err.median_abs <= 1.0 && err.rms <= 1.0, "{err:?}");
}

#[test]
fn straightened_upper_boundary_is_flat() {
    let params = SegmentationParams::default();
    let sp = StraightenParams::default();
    for (i, spec) in phantom_set(2024, 100).into_iter().enumerate() {
        let (clip, truth) = generate_seeded(&spec).unwrap();
        let f = &clip.frames()[0];
        let seg = segment_pleura(f, &params).unwrap();
        let (st, _) = straighten_segmented(f, &seg, &sp).unwrap();
        let target = sp.target_row as f64;
        let detected = flatness(&st.shift_rows(&seg.upper_rows), target, 1.5).unwrap();
        let actual = flatness(&st.shift_rows(&truth.upper_rows), target, 1.5).unwrap();
        assert!(detected >= 0.95 && actual >= 0.95, "phantom {i}: {detected} {actual}");
    }
}
