use nalgebra::{Matrix2, Matrix3, Vector2};
use panotrack_core::ekf::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let q = Matrix3::from_diagonal(&nalgebra::Vector3::new(4e-4, 4e-4, 1e-4));
    let r = Matrix2::identity() * 1e-3;
    let noise = NoiseModel::new(q, r);
    let mut state = SlamState::new(RobotPose::new(0.0, 0.0, 0.0), Matrix3::identity() * 1e-4);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut total = 0;
    for _step in 0..1000 {
        match rng.gen_range(0..10) {
            0 | 1 if state.landmark_count() < 8 => {
                let z = Vector2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
                state = state.augment(&LandmarkObservation::new_landmark(z), &noise).unwrap();
            }
            2..=5 => {
                let u = ControlInput::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.1..0.1), rng.gen_range(-0.3..0.3));
                state = state.predict(&u, &noise);
            }
            _ if state.landmark_count() > 0 => {
                let mut picked = Vec::new();
                for idx in 0..state.landmark_count() { if rng.gen_bool(0.7) { picked.push(idx); } }
                let mut obs = Vec::with_capacity(picked.len());
                for idx in picked {
                    let truth = state.measurement_model(idx, &noise).unwrap();
                    let jitter = Vector2::new(rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05));
                    obs.push(LandmarkObservation::existing(idx, truth + jitter));
                }
                if obs.is_empty() { continue; }
                let post1 = state.update(&obs, &noise, 1).unwrap();
                let post2 = state.update(&obs, &noise, 2).unwrap();
                let res = |s: &SlamState| -> f64 {
                    obs.iter().map(|o| {
                        let idx = match o.target { ObservedLandmark::Existing(i) => i, _ => unreachable!() };
                        (o.z - s.measurement_model(idx, &noise).unwrap()).norm_squared()
                    }).sum::<f64>().sqrt()
                };
                let (r1, r2) = (res(&post1), res(&post2));
                total += 1;
                if r2 > r1 + 1e-9 { count += 1; worst = worst.max(r2 - r1); }
                state = post2;
            }
            _ => {}
        }
    }
    println!("updates: {total}, regressions: {count}, worst: {worst:.3e}");
}
