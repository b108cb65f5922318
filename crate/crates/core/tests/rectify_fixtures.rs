use image::{Rgb, RgbImage};
use nalgebra::{Matrix3, Point2, Point3, Vector3};

use parcelforge::rectify::{face_homography, rectify_face, render_face_texture, visible_faces, Homography};
use parcelforge::{BoxFace, CameraModel, OrientedBox3};

const SQUARE: u32 = 64;

fn checkerboard(size: u32) -> RgbImage {
    RgbImage::from_fn(size, size, |x, y| {
        if ((x / SQUARE) + (y / SQUARE)).is_multiple_of(2) {
            Rgb([235, 235, 235])
        } else {
            Rgb([20, 20, 20])
        }
    })
}

/// Positions along a line where the intensity crosses mid-gray, with
/// sub-pixel linear interpolation. The outermost pixels blend with the
/// background around the face and are skipped.
fn crossings(values: &[f64]) -> Vec<f64> {
    let mid = 127.5;
    values
        .windows(2)
        .enumerate()
        .filter(|(_, w)| (w[0] - mid) * (w[1] - mid) < 0.0)
        .map(|(i, w)| i as f64 + 0.5 + (mid - w[0]) / (w[1] - w[0]))
        .filter(|&x| x > 2.0 && x < values.len() as f64 - 2.0)
        .collect()
}

#[test]
fn slanted_checkerboard_rectifies_to_squares() {
    // A 0.512 m square face at 1000 px/m gives a 512 px crop of 8x8 squares.
    let b = OrientedBox3::axis_aligned(Point3::new(0.0, 0.0, 0.256), Vector3::repeat(0.256)).unwrap();
    let face = BoxFace::NegY;
    let corners = b.face_corners(face);
    let cam = CameraModel::look_at(1400.0, 1600, 1200, &Point3::new(1.1, -1.2, 0.7), &b.face_center(face)).unwrap();
    assert!(visible_faces(&b, &cam).unwrap().contains(&face));
    let img = render_face_texture(&checkerboard(512), &corners, &cam, Rgb([128, 0, 0])).unwrap();
    let r = face_homography(&corners, &cam, 1000.0).unwrap();
    assert_eq!((r.width_px, r.height_px), (512, 512));
    let out = rectify_face(&img, &r.homography, r.width_px, r.height_px).unwrap();
    let gray = |x: u32, y: u32| {
        let p = out.get_pixel(x, y);
        (p[0] as f64 + p[1] as f64 + p[2] as f64) / 3.0
    };
    let mut measured = 0;
    for k in 0..8 {
        let line = k * SQUARE + SQUARE / 2;
        let row: Vec<f64> = (0..512).map(|x| gray(x, line)).collect();
        let col: Vec<f64> = (0..512).map(|y| gray(line, y)).collect();
        for edges in [crossings(&row), crossings(&col)] {
            assert_eq!(edges.len(), 7, "{edges:?}");
            let mut sides: Vec<f64> = edges.windows(2).map(|w| w[1] - w[0]).collect();
            sides.insert(0, edges[0]);
            sides.push(512.0 - edges[6]);
            for s in sides {
                assert!((s - SQUARE as f64).abs() <= 1.0, "square side {s} px");
                measured += 1;
            }
        }
    }
    assert_eq!(measured, 128);
}

fn smooth_image(w: u32, h: u32) -> RgbImage {
    RgbImage::from_fn(w, h, |x, y| {
        let (u, v) = (x as f64 / w as f64, y as f64 / h as f64);
        let tau = std::f64::consts::TAU;
        Rgb([
            (128.0 + 100.0 * (u * tau).sin()) as u8,
            (128.0 + 100.0 * (v * 1.5 * tau).cos()) as u8,
            (128.0 + 80.0 * ((u - v) * tau).sin()) as u8,
        ])
    })
}

#[test]
fn warp_round_trip_is_nearly_lossless() {
    let (w, h) = (400u32, 300u32);
    let src = smooth_image(w, h);
    let m = Matrix3::new(1.05, 0.08, 12.0, -0.05, 0.97, 8.0, 1.2e-4, -0.8e-4, 1.0);
    let fwd = Homography::new(m).unwrap();
    let warped = rectify_face(&src, &fwd, w + 60, h + 60).unwrap();
    // Back-warp only the image content: alpha carries the defined region.
    let rgb = RgbImage::from_fn(warped.width(), warped.height(), |x, y| {
        let p = warped.get_pixel(x, y);
        Rgb([p[0], p[1], p[2]])
    });
    let back = rectify_face(&rgb, &fwd.inverse().unwrap(), w, h).unwrap();
    let margin = 8;
    let mut sum = 0.0;
    let mut n = 0usize;
    for y in margin..h - margin {
        for x in margin..w - margin {
            // Away from borders: the forward image must be defined around
            // this pixel's location.
            let q = fwd.apply(&Point2::new(x as f64 + 0.5, y as f64 + 0.5));
            let (qx, qy) = (q.x.floor() as i64, q.y.floor() as i64);
            let defined = (-2..=2).all(|dy| {
                (-2..=2).all(|dx| {
                    let (px, py) = (qx + dx, qy + dy);
                    px >= 0
                        && py >= 0
                        && (px as u32) < warped.width()
                        && (py as u32) < warped.height()
                        && warped.get_pixel(px as u32, py as u32)[3] == 255
                })
            });
            if !defined {
                continue;
            }
            let (a, b) = (src.get_pixel(x, y), back.get_pixel(x, y));
            for k in 0..3 {
                sum += (a[k] as f64 - b[k] as f64).abs();
                n += 1;
            }
        }
    }
    assert!(n > 3 * 200 * 150, "too few interior pixels: {n}");
    let mae = sum / n as f64;
    assert!(mae < 2.0, "mean absolute error {mae}/255");
}

#[test]
fn two_views_share_crop_size() {
    let b = OrientedBox3::axis_aligned(Point3::origin(), Vector3::new(0.21, 0.14, 0.09)).unwrap();
    let face = BoxFace::PosX;
    let sizes: Vec<(u32, u32)> = [Point3::new(1.5, 0.4, 0.6), Point3::new(1.0, -1.1, 1.3)]
        .iter()
        .map(|eye| {
            let cam = CameraModel::look_at(900.0, 1080, 720, eye, &Point3::origin()).unwrap();
            let r = face_homography(&b.face_corners(face), &cam, 500.0).unwrap();
            (r.width_px, r.height_px)
        })
        .collect();
    assert_eq!(sizes[0], sizes[1]);
    let (fw, fh) = b.face_dimensions(face);
    assert_eq!(sizes[0], ((fw * 500.0).round() as u32, (fh * 500.0).round() as u32));
}
