//! Regenerates the two-clip test fixture.
//!
//! `cargo run -p occlusion-core --example make_fixture -- <out_dir>`

use std::path::{Path, PathBuf};

use image::{GrayImage, Luma, Rgb, RgbImage, Rgba, RgbaImage};
use occlusion_core::dataset::{Manifest, ManifestEntry};
use occlusion_core::frames::{self, ClipInfo};
use occlusion_core::track::{ActorTrack, BoundingBox};

const W: u32 = 96;
const H: u32 = 72;
const FRAMES: usize = 10;

struct ClipDef {
    id: &'static str,
    class: &'static str,
    fps: f64,
    base: (f64, f64, f64, f64),
    drift: f64,
    actor: [u8; 3],
    /// Frames with no detection; interior ones get interpolated.
    dropped: &'static [usize],
}

const CLIPS: [ClipDef; 2] = [
    ClipDef {
        id: "alpha",
        class: "abseiling",
        fps: 25.0,
        base: (24.0, 14.0, 40.0, 42.0),
        drift: 1.0,
        actor: [200, 60, 40],
        dropped: &[4],
    },
    ClipDef {
        id: "beta",
        class: "playing drums",
        fps: 30.0,
        base: (34.5, 12.0, 30.0, 46.0),
        drift: -0.5,
        actor: [40, 90, 210],
        dropped: &[6, 7],
    },
];

fn background(x: u32, y: u32, t: usize) -> [u8; 3] {
    [
        (x * 2 + t as u32) as u8,
        (y * 3) as u8,
        ((x + y) as u8).wrapping_mul(5),
    ]
}

fn write_png(path: &Path, save: impl FnOnce(&Path) -> image::ImageResult<()>) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    save(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
}

fn occluder(w: u32, h: u32, fill: [u8; 3], corner: u32) -> RgbaImage {
    RgbaImage::from_fn(w, h, |x, y| {
        let dx = corner.saturating_sub(x.min(w - 1 - x));
        let dy = corner.saturating_sub(y.min(h - 1 - y));
        let inside = dx * dx + dy * dy <= corner * corner;
        let shade = ((x + y) % 16) as u8 * 4;
        if inside {
            Rgba([fill[0].saturating_sub(shade), fill[1], fill[2].saturating_add(shade), 255])
        } else {
            Rgba([0, 0, 0, 0])
        }
    })
}

fn main() {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "tests/fixtures/two_clips".into()));
    std::fs::create_dir_all(&out).unwrap();
    let mut manifest = Manifest::default();

    for c in &CLIPS {
        let mut boxes = Vec::with_capacity(FRAMES);
        for t in 0..FRAMES {
            let (x, y, w, h) = c.base;
            let b = BoundingBox::new(x + c.drift * t as f64, y, w, h).unwrap();
            boxes.push(b);
        }
        let frame_dir = out.join("clips").join(c.id);
        let mask_dir = out.join("masks").join(c.id);
        for (t, b) in boxes.iter().enumerate() {
            let (x0, y0, x1, y1) = b.pixel_span();
            let inside = |x: u32, y: u32| (x0..x1).contains(&(x as i64)) && (y0..y1).contains(&(y as i64));
            let frame = RgbImage::from_fn(W, H, |x, y| {
                if inside(x, y) {
                    Rgb(c.actor)
                } else {
                    Rgb(background(x, y, t))
                }
            });
            let mask = GrayImage::from_fn(W, H, |x, y| {
                Luma([if inside(x, y) { 255 } else { 0 }])
            });
            write_png(&frame_dir.join(frames::frame_file_name(t)), |p| frame.save(p));
            write_png(&mask_dir.join(frames::frame_file_name(t)), |p| mask.save(p));
        }
        frames::write_json_atomic(
            &frame_dir.join(frames::CLIP_SIDECAR),
            &ClipInfo {
                fps: c.fps,
                action_class: Some(c.class.into()),
            },
        )
        .unwrap();

        let track = ActorTrack {
            clip_id: c.id.into(),
            fps: c.fps,
            frame_count: FRAMES,
            boxes: boxes
                .into_iter()
                .enumerate()
                .map(|(t, b)| (!c.dropped.contains(&t)).then_some(b))
                .collect(),
        };
        let track_path = out.join("tracks").join(format!("{}.csv", c.id));
        std::fs::create_dir_all(track_path.parent().unwrap()).unwrap();
        std::fs::write(&track_path, track.to_text()).unwrap();

        manifest.clips.push(ManifestEntry {
            clip_id: c.id.into(),
            action_class: Some(c.class.into()),
            frames: PathBuf::from("clips").join(c.id),
            track: Some(PathBuf::from("tracks").join(format!("{}.csv", c.id))),
            masks: Some(PathBuf::from("masks").join(c.id)),
        });
    }

    let occ = out.join("occluders");
    let assets = [
        ("backpack/pack_01.png", occluder(200, 180, [30, 140, 60], 24)),
        ("dog/dog_01.png", occluder(190, 190, [150, 110, 70], 40)),
        ("suitcase/case_01.png", occluder(240, 160, [90, 90, 100], 12)),
        // Below the default opaque-pixel floor; the loader should reject it.
        ("handbag/small_01.png", occluder(60, 60, [220, 30, 160], 8)),
    ];
    for (rel, img) in assets {
        write_png(&occ.join(rel), |p| img.save(p));
    }

    frames::write_json_atomic(&out.join("manifest.json"), &manifest).unwrap();
    println!("fixture written to {}", out.display());
}
