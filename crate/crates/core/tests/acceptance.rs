//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use image::{Rgb, RgbImage, Rgba, RgbaImage};
use occlusion_core::car::{self, CeOrientation, LabelDistribution, LossConfig, PredictionPair, ALPHA_GRID};
use occlusion_core::compositor::{self, composite_into, scale_occluder, OcclusionSpec, ScaledOccluder};
use occlusion_core::dataset::{self, ClipAnnotation, Schema, ANNOTATION_FIELDS};
use occlusion_core::exec::Exec;
use occlusion_core::jobs::{self, SynthesizeConfig};
use occlusion_core::metrics;
use occlusion_core::occluder::{Category, OccluderAsset, OccluderCatalog};
use occlusion_core::report::{self, Membership, ParentClassMap, PredictionRecord};
use occlusion_core::rng::SplitMix64;
use occlusion_core::track::{ActorTrack, BoundingBox};

fn verdict(name: &str, ok: bool, detail: String) {
    println!("[{}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{name}: {detail}");
}

fn main() {
    let checks: [(&str, fn()); 10] = [
        ("compositor oracle equivalence", compositor_matches_per_pixel_oracle),
        ("scale-law round trip", scale_law_round_trip),
        ("metric oracle", metrics_match_counting_oracle),
        ("monotonic occlusion severity", severity_increases_with_degree),
        ("CAR math", car_math_properties),
        ("alpha sweep harness", alpha_sweep_table),
        ("annotation fidelity", annotation_round_trip),
        ("report correctness", report_correctness),
        ("determinism", synthesis_is_deterministic),
        ("throughput sanity", throughput_sanity),
    ];
    std::panic::set_hook(Box::new(|info| println!("  panic: {info}")));
    let mut failed = Vec::new();
    for (name, check) in checks {
        if std::panic::catch_unwind(check).is_err() {
            failed.push(name);
        }
    }
    println!("acceptance: {} passed, {} failed", 10 - failed.len(), failed.len());
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/two_clips")
}

fn range(r: &mut SplitMix64, lo: u64, hi: u64) -> u64 {
    lo + r.below(hi - lo + 1)
}

fn uniform(r: &mut SplitMix64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * r.next_f64()
}

fn random_rgb(r: &mut SplitMix64, w: u32, h: u32) -> RgbImage {
    RgbImage::from_fn(w, h, |_, _| Rgb([r.below(256) as u8, r.below(256) as u8, r.below(256) as u8]))
}

/// RGBA with a mix of fully transparent, fully opaque and partial alpha.
fn random_rgba(r: &mut SplitMix64, w: u32, h: u32) -> RgbaImage {
    RgbaImage::from_fn(w, h, |_, _| {
        let a = match r.below(4) {
            0 => 0,
            1 => 255,
            _ => r.below(256) as u8,
        };
        Rgba([r.below(256) as u8, r.below(256) as u8, r.below(256) as u8, a])
    })
}

/// Top-left of an occluder centered at `c`, computed independently of the
/// library: nearest integer to `c - size/2`, halves rounding up.
fn oracle_origin(c: f64, size: u32) -> i64 {
    let v = c - f64::from(size) / 2.0;
    let f = v.floor();
    if v - f >= 0.5 {
        f as i64 + 1
    } else {
        f as i64
    }
}

/// Pixel `i` belongs to the box when its center `i + 0.5` lies in `[lo, lo + len)`.
fn in_box(i: i64, lo: f64, len: f64) -> bool {
    let c = i as f64 + 0.5;
    c >= lo && c < lo + len
}

struct Oracle {
    frame: RgbImage,
    visible: u64,
}

fn oracle_composite(src: &RgbImage, occ: &RgbaImage, center: (f64, f64)) -> Oracle {
    let ox = oracle_origin(center.0, occ.width());
    let oy = oracle_origin(center.1, occ.height());
    let mut frame = src.clone();
    let mut visible = 0;
    for y in 0..src.height() {
        for x in 0..src.width() {
            let (u, v) = (x as i64 - ox, y as i64 - oy);
            if u < 0 || v < 0 || u >= i64::from(occ.width()) || v >= i64::from(occ.height()) {
                continue;
            }
            let o = occ.get_pixel(u as u32, v as u32).0;
            if o[3] == 0 {
                continue;
            }
            visible += 1;
            let a = f64::from(o[3]);
            let p = frame.get_pixel_mut(x, y);
            for (dst, &src) in p.0.iter_mut().zip(&o[..3]) {
                *dst = ((a * f64::from(src) + (255.0 - a) * f64::from(*dst)) / 255.0).round() as u8;
            }
        }
    }
    Oracle { frame, visible }
}

fn compositor_matches_per_pixel_oracle() {
    let t0 = Instant::now();
    let mut r = SplitMix64::new(0xC0FFEE);
    let mut mismatches = Vec::new();
    for case in 0..200 {
        let (fw, fh) = (range(&mut r, 1, 32) as u32, range(&mut r, 1, 32) as u32);
        let (ow, oh) = (range(&mut r, 1, 32) as u32, range(&mut r, 1, 32) as u32);
        let src = random_rgb(&mut r, fw, fh);
        let occ = random_rgba(&mut r, ow, oh);
        // Centers range past the borders so clipping gets exercised.
        let center = (uniform(&mut r, -16.0, f64::from(fw) + 16.0), uniform(&mut r, -16.0, f64::from(fh) + 16.0));
        let scaled = ScaledOccluder { pixels: occ.clone(), scale_factor: 1.0 };
        let mut out = src.clone();
        let p = composite_into(&mut out, &scaled, center, case);
        let want = oracle_composite(&src, &occ, center);
        if out != want.frame || p.visible_opaque_pixels != want.visible {
            mismatches.push(case);
        }
    }
    let dt = t0.elapsed();
    verdict(
        "compositor oracle equivalence",
        mismatches.is_empty() && dt < Duration::from_secs(5),
        format!("200 cases, {} mismatches {:?}, {:.3}s (limit 5s)", mismatches.len(), mismatches, dt.as_secs_f64()),
    );
}

fn scale_law_round_trip() {
    let mut r = SplitMix64::new(42);
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    let mut frame = RgbImage::new(1, 1);
    for case in 0..100 {
        let aw = range(&mut r, 20, 200) as u32;
        let ah = ((f64::from(aw) * uniform(&mut r, 0.5, 2.0)) as u32).max(1);
        let bw = uniform(&mut r, 8.0, 300.0);
        let bh = bw * uniform(&mut r, 0.5, 2.0);
        let bbox = BoundingBox::new(uniform(&mut r, -20.0, 200.0), uniform(&mut r, -20.0, 200.0), bw, bh).unwrap();
        let asset = RgbaImage::from_pixel(aw, ah, Rgba([9, 9, 9, 255]));
        for degree in compositor::DEFAULT_DEGREES {
            let occ = match scale_occluder(&asset, &bbox, degree) {
                Ok(o) => o,
                Err(e) => {
                    failures.push(format!("case {case}: {e}"));
                    continue;
                }
            };
            let p = composite_into(&mut frame, &occ, bbox.center(), 0);
            let m = metrics::measured_occlusion_degree(&bbox, &p).unwrap();
            let tol = 1.0 / bw.min(bh);
            let err = (m - degree).abs();
            worst = worst.max(err / tol);
            if err > tol {
                failures.push(format!("case {case} degree {degree}: measured {m}, tol {tol}"));
            }
        }
    }
    verdict(
        "scale-law round trip",
        failures.is_empty(),
        format!("300 placements, worst error {:.3} of tolerance, failures {:?}", worst, failures),
    );
}

fn metrics_match_counting_oracle() {
    let mut r = SplitMix64::new(7);
    let mut area_bad = 0;
    let mut area_checked = 0;
    for case in 0..500 {
        let (fw, fh) = (range(&mut r, 1, 24) as u32, range(&mut r, 1, 24) as u32);
        let (ow, oh) = (range(&mut r, 1, 16) as u32, range(&mut r, 1, 16) as u32);
        let bbox = BoundingBox::new(
            uniform(&mut r, -6.0, f64::from(fw)),
            uniform(&mut r, -6.0, f64::from(fh)),
            uniform(&mut r, 0.5, 20.0),
            uniform(&mut r, 0.5, 20.0),
        )
        .unwrap();
        let occ = random_rgba(&mut r, ow, oh);
        let center = (uniform(&mut r, -8.0, f64::from(fw) + 8.0), uniform(&mut r, -8.0, f64::from(fh) + 8.0));
        let scaled = ScaledOccluder { pixels: occ.clone(), scale_factor: 1.0 };
        let mut frame = RgbImage::new(fw, fh);
        let p = composite_into(&mut frame, &scaled, center, case);

        let (ox, oy) = (oracle_origin(center.0, ow), oracle_origin(center.1, oh));
        let (mut overlap, mut area) = (0u64, 0u64);
        for y in 0..i64::from(fh) {
            for x in 0..i64::from(fw) {
                if !(in_box(x, bbox.x, bbox.w) && in_box(y, bbox.y, bbox.h)) {
                    continue;
                }
                area += 1;
                let (u, v) = (x - ox, y - oy);
                if u >= 0 && v >= 0 && u < i64::from(ow) && v < i64::from(oh) && occ.get_pixel(u as u32, v as u32).0[3] > 0 {
                    overlap += 1;
                }
            }
        }
        let got = metrics::occlusion_area_ratio(&bbox, &p, &occ);
        let ok = match (area, got) {
            (0, Err(_)) => true,
            (0, Ok(_)) => false,
            (a, Ok(v)) => {
                area_checked += 1;
                v == overlap as f64 / a as f64
            }
            (_, Err(_)) => false,
        };
        if !ok {
            area_bad += 1;
        }
    }

    // Duration ratio against a plain loop over synthesized clips.
    let mut duration_bad = 0;
    for _ in 0..40 {
        let (fw, fh) = (range(&mut r, 4, 24) as u32, range(&mut r, 4, 24) as u32);
        let n = range(&mut r, 1, 12) as usize;
        let boxes: Vec<Option<BoundingBox>> = (0..n)
            .map(|_| {
                (r.below(4) != 0).then(|| {
                    BoundingBox::new(
                        uniform(&mut r, -30.0, f64::from(fw) + 10.0),
                        uniform(&mut r, -30.0, f64::from(fh) + 10.0),
                        uniform(&mut r, 2.0, 24.0),
                        uniform(&mut r, 2.0, 24.0),
                    )
                    .unwrap()
                })
            })
            .collect();
        let track = ActorTrack { clip_id: "c".into(), fps: 10.0, frame_count: n, boxes: boxes.clone() };
        let frames: Vec<RgbImage> = (0..n).map(|_| RgbImage::new(fw, fh)).collect();
        let asset = OccluderAsset::from_rgba("a/a.png", Category::Custom, random_rgba(&mut r, 12, 12), 1);
        let Ok(asset) = asset else { continue };
        let catalog = OccluderCatalog::new(vec![asset]).unwrap();
        let spec = OcclusionSpec::new(uniform(&mut r, 0.3, 1.0), "a/a.png", 0).unwrap();
        let Ok(clip) = compositor::synthesize_clip(&frames, &track, &spec, &catalog, Exec::Sequential) else {
            continue;
        };
        let got = metrics::occlusion_duration_ratio(&track, &clip.placements).unwrap();
        let mut count = 0;
        for p in &clip.placements {
            let b = boxes[p.frame_index].unwrap();
            let (overlap, _) = metrics::area_counts(&b, p, &{
                let s = compositor::scale_occluder(&catalog.assets()[0].pixels, &b, spec.degree).unwrap();
                s.pixels
            });
            if p.visible_opaque_pixels > 0 && overlap > 0 {
                count += 1;
            }
        }
        if got != count as f64 / n as f64 {
            duration_bad += 1;
        }
    }
    verdict(
        "metric oracle",
        area_bad == 0 && duration_bad == 0,
        format!("area: 500 cases ({area_checked} non-empty), {area_bad} mismatches; duration: {duration_bad} mismatches"),
    );
}

fn severity_increases_with_degree() {
    let f = fixture();
    let manifest = dataset::Manifest::load(&f.join("manifest.json")).unwrap();
    let entry = &manifest.clips[0];
    let (catalog, _) = OccluderCatalog::load_dir(&f.join("occluders"), occlusion_core::occluder::DEFAULT_MIN_OPAQUE_PIXELS).unwrap();
    let track = occlusion_core::track::interpolate_track(
        &occlusion_core::track::parse_track(entry.track.as_ref().unwrap()).unwrap(),
        occlusion_core::track::DEFAULT_MAX_GAP,
    );
    let frames = occlusion_core::frames::load_frames(&entry.frames).unwrap();
    let seed = occlusion_core::rng::clip_seed(0, &entry.clip_id);
    let id = catalog.sample(seed, None).unwrap().id.clone();
    let mut means = Vec::new();
    let mut clipped = false;
    for degree in compositor::DEFAULT_DEGREES {
        let spec = OcclusionSpec::new(degree, id.clone(), seed).unwrap();
        let clip = compositor::synthesize_clip(&frames, &track, &spec, &catalog, Exec::default()).unwrap();
        clipped |= clip.placements.iter().any(|p| p.dest_rect != p.target_rect);
        means.push(metrics::clip_metrics(&track, &clip.placements, degree).unwrap().mean_area_ratio);
    }
    let increasing = means.windows(2).all(|w| w[0] < w[1]);
    verdict(
        "monotonic occlusion severity",
        increasing && !clipped,
        format!("clip {} mean area ratios {:?}, border clipping: {clipped}", entry.clip_id, means),
    );
}

fn random_logits(r: &mut SplitMix64, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| uniform(r, -scale, scale)).collect()
}

fn random_label(r: &mut SplitMix64, n: usize) -> LabelDistribution {
    if r.below(2) == 0 {
        LabelDistribution::one_hot(n, r.below(n as u64) as usize).unwrap()
    } else {
        let w: Vec<f64> = (0..n).map(|_| r.next_f64() + 1e-3).collect();
        let s: f64 = w.iter().sum();
        LabelDistribution::new(w.into_iter().map(|v| v / s).collect()).unwrap()
    }
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn car_math_properties() {
    let t0 = Instant::now();
    let mut r = SplitMix64::new(2024);
    let mut notes = Vec::new();

    let mut softmax_worst = 0.0f64;
    let mut uniform_worst = 0.0f64;
    let mut ce_worst = 0.0f64;
    let mut kl_min = f64::INFINITY;
    for _ in 0..1000 {
        let n = range(&mut r, 1, 32) as usize;
        let p = random_logits(&mut r, n, 10.0);
        let c = random_logits(&mut r, n, 10.0);
        let s: f64 = car::softmax(&p).unwrap().iter().sum();
        softmax_worst = softmax_worst.max((s - 1.0).abs());

        let same = PredictionPair::new(p.clone(), p.clone()).unwrap();
        let y = car::corrected_prediction(&same).unwrap();
        uniform_worst = uniform_worst.max(y.iter().map(|v| (v - 1.0 / n as f64).abs()).fold(0.0, f64::max));

        let label = random_label(&mut r, n);
        let pair = PredictionPair::new(p.clone(), c).unwrap();
        let t = car::car_loss(&pair, &label, &LossConfig::with_alpha(0.0)).unwrap();
        ce_worst = ce_worst.max((t.loss - car::cross_entropy(&p, &label).unwrap()).abs());
        kl_min = kl_min.min(car::kl_divergence(&pair).unwrap());
    }
    let basic_ok = softmax_worst <= 1e-12 && uniform_worst <= 1e-12 && ce_worst <= 1e-12 && kl_min >= 0.0;
    notes.push(format!(
        "softmax sum err {softmax_worst:.1e}, uniform err {uniform_worst:.1e}, alpha=0 vs CE {ce_worst:.1e}, min KL {kl_min:.1e}"
    ));

    let h = 1e-5;
    let mut grad_worst = 0.0f64;
    for i in 0..100 {
        let n = range(&mut r, 2, 16) as usize;
        let p = random_logits(&mut r, n, 3.0);
        let c = random_logits(&mut r, n, 3.0);
        let label = random_label(&mut r, n);
        let cfg = LossConfig {
            alpha: ALPHA_GRID[i % ALPHA_GRID.len()].max(if i % 8 == 0 { 0.7 } else { 0.0 }),
            label_smoothing_epsilon: if i % 3 == 0 { 0.0 } else { uniform(&mut r, 0.01, 0.1) },
            orientation: if i % 3 == 2 { CeOrientation::Swapped } else { CeOrientation::Standard },
        };
        let loss = |p: &[f64], c: &[f64]| {
            car::car_loss(&PredictionPair::new(p.to_vec(), c.to_vec()).unwrap(), &label, &cfg).unwrap().loss
        };
        let g = car::car_loss_gradient(&PredictionPair::new(p.clone(), c.clone()).unwrap(), &label, &cfg).unwrap();
        let mut num_p = vec![0.0; n];
        let mut num_c = vec![0.0; n];
        for j in 0..n {
            let (mut a, mut b) = (p.clone(), p.clone());
            a[j] += h;
            b[j] -= h;
            num_p[j] = (loss(&a, &c) - loss(&b, &c)) / (2.0 * h);
            let (mut a, mut b) = (c.clone(), c.clone());
            a[j] += h;
            b[j] -= h;
            num_c[j] = (loss(&p, &a) - loss(&p, &b)) / (2.0 * h);
        }
        let analytic: Vec<f64> = g.d_p.iter().chain(&g.d_c).copied().collect();
        let numeric: Vec<f64> = num_p.into_iter().chain(num_c).collect();
        grad_worst = grad_worst.max(rel_err(&analytic, &numeric));
    }
    notes.push(format!("worst gradient relative error {grad_worst:.2e} over 100 instances"));
    let dt = t0.elapsed();
    notes.push(format!("{:.3}s (limit 10s)", dt.as_secs_f64()));
    verdict(
        "CAR math",
        basic_ok && grad_worst <= 1e-5 && dt < Duration::from_secs(10),
        notes.join("; "),
    );
}

fn alpha_sweep_table() {
    let mut r = SplitMix64::new(5);
    let n = 10;
    let pairs: Vec<PredictionPair> = (0..64)
        .map(|_| PredictionPair::new(random_logits(&mut r, n, 4.0), random_logits(&mut r, n, 4.0)).unwrap())
        .collect();
    let labels: Vec<LabelDistribution> = (0..64).map(|_| random_label(&mut r, n)).collect();
    let rows = car::alpha_sweep(&pairs, &labels, &ALPHA_GRID, &LossConfig::default(), Exec::default()).unwrap();
    let csv = car::sweep_table_csv(&rows).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    let well_formed = lines.len() == 1 + ALPHA_GRID.len()
        && lines[0] == "alpha,mean_loss,mean_cross_entropy,mean_kl"
        && lines[1..].iter().all(|l| l.split(',').count() == 4 && l.split(',').all(|f| f.parse::<f64>().is_ok_and(f64::is_finite)));
    let alphas: Vec<f64> = rows.iter().map(|r| r.alpha).collect();
    let zero = rows.iter().find(|r| r.alpha == 0.0).unwrap();
    let zero_exact = zero.mean_loss == zero.mean_cross_entropy;
    let ce_constant = rows.iter().all(|r| r.mean_cross_entropy == rows[0].mean_cross_entropy);
    verdict(
        "alpha sweep harness",
        well_formed && alphas == ALPHA_GRID && zero_exact && ce_constant,
        format!("alphas {alphas:?}, {} lines, alpha=0 loss==CE: {zero_exact}, CE column constant: {ce_constant}", lines.len()),
    );
}

fn random_text(r: &mut SplitMix64) -> String {
    const PIECES: [&str; 10] = ["a", "Zeta", " ", ",", "\"", "é", "drum", "-", "ß漢", "'"];
    let n = range(r, 1, 8);
    let mut s: String = (0..n).map(|_| PIECES[r.below(PIECES.len() as u64) as usize]).collect();
    if s.trim().is_empty() {
        s.push('x');
    }
    s
}

fn annotation_round_trip() {
    let mut r = SplitMix64::new(99);
    let records: Vec<ClipAnnotation> = (0..1000)
        .map(|i| {
            let video = uniform(&mut r, 0.5, 20.0);
            let secs = r.below(2_000_000_000) as i64;
            ClipAnnotation {
                action_class: random_text(&mut r),
                file_name: format!("{}_{i}", random_text(&mut r)),
                occluder_type: ["backpack", "handbag", "suitcase", "dog", "custom"][r.below(5) as usize].into(),
                occluder_file_name: format!("{}.png", random_text(&mut r)),
                occluder_pixel_ratio: r.next_f64(),
                occluder_size_ratio: [0.25, 0.5, 0.75][r.below(3) as usize],
                occlusion_duration: video * r.next_f64(),
                video_duration: video,
                fps: [24.0, 25.0, 29.97, 30.0][r.below(4) as usize],
                clip_generation_time: chrono::DateTime::from_timestamp(secs, 0).unwrap().to_rfc3339(),
            }
        })
        .collect();
    let bytes = dataset::encode_annotations(&records, Schema::D).unwrap();
    let header = std::str::from_utf8(&bytes).unwrap().lines().next().unwrap().to_owned();
    let expected = [
        "action_class",
        "file_name",
        "occluder_type",
        "occluder_file_name",
        "occluder_pixel_ratio",
        "occluder_size_ratio",
        "occlusion_duration",
        "video_duration",
        "fps",
        "clip_generation_time",
    ];
    let header_ok = header == expected.join(",") && ANNOTATION_FIELDS == expected;
    let back = dataset::decode_annotations(&bytes).unwrap();
    let identical = back == records;
    verdict(
        "annotation fidelity",
        header_ok && identical,
        format!("header ok: {header_ok}, 1000 records identical after round trip: {identical}"),
    );
}

fn report_correctness() {
    let mut r = SplitMix64::new(31337);
    let map = ParentClassMap::bundled();
    let classes: Vec<String> = map.classes().map(str::to_owned).take(40).collect();
    let records: Vec<PredictionRecord> = (0..1000)
        .map(|i| {
            let truth = classes[r.below(classes.len() as u64) as usize].clone();
            let mut scores: BTreeMap<String, f64> = classes.iter().map(|c| (c.clone(), r.next_f64())).collect();
            if r.below(3) == 0 {
                *scores.get_mut(&truth).unwrap() += 0.8;
            }
            // A few exact ties to exercise the label tie-break.
            if i % 50 == 0 {
                let other = classes[(i / 50) % classes.len()].clone();
                let v = scores[&truth];
                scores.insert(other, v);
            }
            PredictionRecord::with_scores(format!("clip{i:04}"), truth, scores)
        })
        .collect();

    let oracle = |k: usize| {
        let hits = records
            .iter()
            .filter(|rec| {
                let s = rec.scores.as_ref().unwrap();
                let t = s[&rec.true_label];
                let ahead = s
                    .iter()
                    .filter(|(l, &v)| v > t || (v == t && l.as_str() < rec.true_label.as_str()))
                    .count();
                ahead < k
            })
            .count();
        hits as f64 / records.len() as f64
    };
    let top1 = report::top_k_accuracy(&records, 1, Exec::default()).unwrap();
    let top5 = report::top_k_accuracy(&records, 5, Exec::default()).unwrap();
    let topk_ok = top1 == oracle(1) && top5 == oracle(5);

    let parents = report::parent_class_aggregate(&records, &map, 1, Membership::First).unwrap();
    let total: usize = parents.iter().map(|p| p.clips).sum();
    let weighted = parents.iter().map(|p| p.accuracy * p.clips as f64).sum::<f64>() / total as f64;
    let parent_ok = total == records.len() && (weighted - top1).abs() <= 1e-12;

    // top-1 <= top-5 on the synthetic set and on the fixture-style dumps.
    let mut ordered = top1 <= top5;
    for seed in 0..20 {
        let mut r = SplitMix64::new(seed);
        let small: Vec<PredictionRecord> = (0..50)
            .map(|i| {
                let mut ranking: Vec<String> = classes[..10].to_vec();
                for j in (1..ranking.len()).rev() {
                    ranking.swap(j, r.below(j as u64 + 1) as usize);
                }
                PredictionRecord::with_ranking(format!("c{i}"), classes[r.below(10) as usize].clone(), ranking)
            })
            .collect();
        ordered &= report::top_k_accuracy(&small, 1, Exec::Sequential).unwrap()
            <= report::top_k_accuracy(&small, 5, Exec::Sequential).unwrap();
    }
    verdict(
        "report correctness",
        topk_ok && parent_ok && ordered,
        format!(
            "top1 {top1} (oracle {}), top5 {top5} (oracle {}), weighted parent mean {weighted} over {} parents, top1<=top5: {ordered}",
            oracle(1),
            oracle(5),
            parents.len()
        ),
    );
}

fn files_under(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn synthesis_is_deterministic() {
    let f = fixture();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut trees = Vec::new();
    for (i, d) in dirs.iter().enumerate() {
        let mut cfg = SynthesizeConfig::new(f.join("occluders"), d.path().join("out"));
        cfg.manifest = Some(f.join("manifest.json"));
        cfg.seed = 0;
        // Different worker counts must not change the bytes.
        cfg.workers = Some(if i == 0 { 1 } else { 4 });
        let s = jobs::synthesize(&cfg).unwrap();
        assert_eq!(s.exit_code(), 0, "{:?}", s.failures);
        let mut tree = files_under(&d.path().join("out"));
        tree.remove(Path::new(jobs::RUN_SUMMARY));
        trees.push(tree);
    }
    let frames = trees[0].keys().filter(|p| p.extension().is_some_and(|e| e == "png")).count();
    let metrics = trees[0].keys().filter(|p| p.ends_with(jobs::METRICS_JSON)).count();
    let same_keys = trees[0].keys().eq(trees[1].keys());
    let differing: Vec<&PathBuf> = trees[0].iter().filter(|(k, v)| trees[1].get(*k) != Some(v)).map(|(k, _)| k).collect();
    verdict(
        "determinism",
        same_keys && differing.is_empty() && frames > 0 && metrics == 6 && trees[0].contains_key(Path::new(jobs::ANNOTATIONS_CSV)),
        format!(
            "{} files ({frames} frames, {metrics} metrics, annotations) compared, {} differ",
            trees[0].len(),
            differing.len()
        ),
    );
}

fn throughput_sanity() {
    let mut r = SplitMix64::new(1);
    let frames: Vec<RgbImage> = (0..100).map(|_| random_rgb(&mut r, 640, 480)).collect();
    let boxes = (0..100)
        .map(|i| Some(BoundingBox::new(180.0 + i as f64, 90.0, 220.0, 300.0).unwrap()))
        .collect();
    let track = ActorTrack { clip_id: "bench".into(), fps: 25.0, frame_count: 100, boxes };
    let asset = RgbaImage::from_fn(400, 400, |x, y| {
        let a = if (x as i32 - 200).pow(2) + (y as i32 - 200).pow(2) < 190 * 190 { 255 } else { 0 };
        Rgba([(x % 256) as u8, (y % 256) as u8, 90, a])
    });
    let catalog = OccluderCatalog::new(vec![OccluderAsset::from_rgba("dog/big.png", Category::Dog, asset, 30_000).unwrap()]).unwrap();
    let spec = OcclusionSpec::new(0.5, "dog/big.png", 0).unwrap();

    let t0 = Instant::now();
    let clip = compositor::synthesize_clip(&frames, &track, &spec, &catalog, Exec::Sequential).unwrap();
    let m = metrics::clip_metrics(&track, &clip.placements, 0.5).unwrap();
    let dt = t0.elapsed();
    verdict(
        "throughput sanity",
        dt < Duration::from_secs(2) && clip.frames.len() == 100 && m.mean_area_ratio > 0.0,
        format!("100 frames 640x480, one degree, single thread: {:.3}s (limit 2s)", dt.as_secs_f64()),
    );
}
