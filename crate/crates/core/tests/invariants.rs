use proptest::prelude::*;

use camcrew::cinema::compose::{compose, ComposeParams, ASPECT};
use camcrew::detection::{update_pool, Detection, Gaze};
use camcrew::geometry::Rect;
use camcrew::recorder::storage_bytes;
use camcrew::scene::{CameraId, ImageBox};
use camcrew::selection::{bucket_step, Bucket, BucketParams};

fn rect() -> impl Strategy<Value = Rect> {
    (0.0..600.0f64, 0.0..320.0f64, 1.0..200.0f64, 1.0..150.0f64).prop_map(|(x, y, w, h)| Rect::new(x, y, w, h))
}

fn detection() -> impl Strategy<Value = Detection> {
    (rect(), 0..4usize).prop_map(|(r, g)| {
        let gaze = [Gaze::Frontal, Gaze::Left, Gaze::Right, Gaze::Unknown][g];
        Detection::from_box(CameraId::new("ov"), r, gaze, 0.9)
    })
}

proptest! {
    #[test]
    fn bucket_level_stays_in_bounds(
        theta in 0.2..5.0f64,
        leak in 0.0..1.0f64,
        inflows in prop::collection::vec(0.0..4.0f64, 1..400),
    ) {
        let mut b = Bucket::new("b", BucketParams::with_theta(theta, leak), vec![]);
        for inflow in inflows {
            let before = b.recording;
            let (level, rec) = bucket_step(&mut b, inflow, 0.1);
            prop_assert!((0.0..=b.params.level_max).contains(&level));
            if level >= b.params.theta_on {
                prop_assert!(rec);
            }
            if level < b.params.theta_off {
                prop_assert!(!rec);
            }
            // between the thresholds the state is held
            if level >= b.params.theta_off && level < b.params.theta_on {
                prop_assert_eq!(rec, before);
            }
        }
    }

    #[test]
    fn iou_is_symmetric_and_bounded(a in rect(), b in rect()) {
        let (ab, ba) = (a.iou(&b), b.iou(&a));
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
        prop_assert!((a.iou(&a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pool_is_deterministic_and_inside_frame(
        dets in prop::collection::vec(detection(), 0..6),
        acts in prop::collection::vec(rect(), 0..4),
    ) {
        let activity: Vec<ImageBox> = acts.into_iter().map(|r| ImageBox::new(CameraId::new("ov"), r)).collect();
        let a = update_pool(&dets, 0.25, &activity, (640, 360));
        let b = update_pool(&dets, 0.25, &activity, (640, 360));
        prop_assert_eq!(&a, &b);
        for r in &a.regions {
            prop_assert!(r.rect.x >= 0.0 && r.rect.y >= 0.0 && r.rect.right() <= 640.0 && r.rect.bottom() <= 360.0);
        }
        for d in &dets {
            prop_assert!(a.overlaps(&d.bbox.rect));
        }
    }

    #[test]
    fn storage_grows_with_duration(d1 in 0.0..1e6f64, extra in 0.0..1e6f64, bitrate in 1u64..500_000_000) {
        prop_assert!(storage_bytes(d1 + extra, bitrate) >= storage_bytes(d1, bitrate));
    }

    #[test]
    fn canvas_keeps_aspect_and_frame(dets in prop::collection::vec(detection(), 1..5)) {
        let c = compose(&dets, (640, 360), &ComposeParams::default()).unwrap();
        let r = c.canvas.rect;
        prop_assert!((r.w - ASPECT * r.h).abs() <= 1.0);
        prop_assert!(r.x >= -1e-6 && r.y >= -1e-6 && r.right() <= 640.0 + 1e-6 && r.bottom() <= 360.0 + 1e-6);
    }
}
