use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use proptest::prelude::*;

use viskey::bitimage::{BitImage, Rect};
use viskey::cas::{render_key_image, GlyphBank};
use viskey::classify::{classify_1nn, decode_string, load_corpus, train_glyphs, CorpusGlyph};
use viskey::denoise::Cleanup;
use viskey::ocr::{extract_features, glyph_features, moment, normalize_glyph, segment, Glyph};
use viskey::rng::SeededRng;
use viskey::vcs::{encode, reconstruct, scheme_params};
use viskey::{FeatureVector, LabeledSample, Model, ALPHABET};

fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

struct Fixture {
    glyphs: Vec<CorpusGlyph>,
    bank: GlyphBank,
    model: Model,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let glyphs = load_corpus(&corpus_dir()).unwrap();
        let model = train_glyphs(&glyphs, &scheme_params(2).unwrap(), 1)
            .unwrap()
            .model;
        Fixture {
            bank: GlyphBank::load(&corpus_dir()).unwrap(),
            glyphs,
            model,
        }
    })
}

fn decode_key(key: &str, n: usize, seed: u64) -> String {
    let f = fixture();
    let p = scheme_params(n).unwrap();
    let img = render_key_image(key, &f.bank, "sans", 4).unwrap();
    let set = encode(&img, &p, seed).unwrap();
    let stack = reconstruct(&set.shares[..2]).unwrap();
    decode_string(&stack, &f.model, &Cleanup::for_stack(&p, &stack)).unwrap()
}

#[test]
fn corpus_is_complete() {
    let f = fixture();
    assert_eq!(f.glyphs.len(), 360);
    assert_eq!(f.model.len(), 360);
    for g in &f.glyphs {
        assert_eq!((g.image.width(), g.image.height()), (32, 32));
        assert_eq!(segment(&g.image).len(), 1, "{}", g.source_id());
    }
}

#[test]
fn decodes_rendered_keys() {
    assert_eq!(decode_key("A7K", 2, 5), "A7K");
    assert_eq!(decode_key("0", 2, 6), "0");
    assert_eq!(decode_key("Q4ZX9M", 9, 7), "Q4ZX9M");
}

#[test]
fn blank_stack_decodes_to_nothing() {
    let p = scheme_params(2).unwrap();
    let set = encode(&BitImage::new(40, 36).unwrap(), &p, 1).unwrap();
    let stack = reconstruct(&set.shares).unwrap();
    assert_eq!(
        decode_string(&stack, &fixture().model, &Cleanup::for_stack(&p, &stack)).unwrap(),
        ""
    );
}

#[test]
fn every_training_vector_recognizes_itself() {
    let model = &fixture().model;
    for s in model.samples() {
        let (label, d) = classify_1nn(&s.features, model).unwrap();
        assert_eq!(d, 0.0);
        // Distinct corpus glyphs may collide after normalization; the label
        // must still agree with some sample at distance zero.
        assert!(model
            .samples()
            .iter()
            .any(|o| o.label == label && o.features == s.features));
    }
}

#[test]
fn pipeline_closure_over_corpus() {
    let f = fixture();
    let p = scheme_params(2).unwrap();
    let (mut ok, mut total) = (0, 0);
    for seed in [11u64, 12, 13] {
        for (k, g) in f.glyphs.iter().enumerate() {
            let set = encode(&g.image, &p, seed * 1000 + k as u64).unwrap();
            let stack = reconstruct(&set.shares).unwrap();
            let text = decode_string(&stack, &f.model, &Cleanup::for_stack(&p, &stack)).unwrap();
            total += 1;
            ok += (text == g.label.to_string()) as usize;
        }
    }
    assert!(ok as f64 >= 0.99 * total as f64, "{ok}/{total}");
}

#[test]
fn translation_keeps_features() {
    let glyph = &fixture().glyphs[17].image;
    let want = glyph_features(glyph).unwrap();
    let mut canvas = BitImage::new(80, 50).unwrap();
    canvas.blit(glyph, 9, 31);
    assert_eq!(glyph_features(&canvas).unwrap(), want);
}

fn random_image(rng: &mut SeededRng, w: usize, h: usize) -> BitImage {
    let px = (0..w * h).map(|_| rng.below(2) == 1).collect();
    BitImage::from_pixels(w, h, px).unwrap()
}

proptest! {
    #[test]
    fn features_are_bounded_and_densities_sum(seed in any::<u64>(), fill in 0u32..100) {
        let mut rng = SeededRng::new(seed);
        let px = (0..1024).map(|_| rng.below(100) < fill).collect();
        let bitmap = BitImage::from_pixels(32, 32, px).unwrap();
        let black = bitmap.black_count();
        let f = extract_features(&Glyph { bbox: bitmap.full_rect(), bitmap }).unwrap();
        prop_assert_eq!(f.len(), 48);
        prop_assert!(f.values().iter().all(|v| (0.0..=1.0).contains(v)));
        let density: f64 = f.values().iter().step_by(3).sum();
        prop_assert!((density * 64.0 - black as f64).abs() < 1e-9);
    }

    #[test]
    fn moments_match_double_sums(seed in any::<u64>(), top in 0usize..25, left in 0usize..25, p in 0u32..3, q in 0u32..3) {
        let mut rng = SeededRng::new(seed);
        let img = random_image(&mut rng, 32, 32);
        let mut brute = 0.0;
        for y in 0..8usize {
            for x in 0..8usize {
                if img.get(top + y, left + x) {
                    brute += (x as f64).powi(p as i32) * (y as f64).powi(q as i32);
                }
            }
        }
        prop_assert_eq!(moment(&img, Rect::new(top, top + 7, left, left + 7), p, q), brute);
    }

    #[test]
    fn normalized_glyphs_are_32_square(seed in any::<u64>(), w in 1usize..60, h in 1usize..60) {
        let mut rng = SeededRng::new(seed);
        let img = random_image(&mut rng, w, h);
        let g = normalize_glyph(&img, img.full_rect()).unwrap();
        prop_assert_eq!((g.bitmap.width(), g.bitmap.height()), (32, 32));
    }

    #[test]
    fn nearest_neighbour_matches_scan(seed in any::<u64>(), count in 1usize..25, len in 1usize..5) {
        let mut rng = SeededRng::new(seed);
        let value = |rng: &mut SeededRng| rng.below(3) as f64 * 0.25;
        let samples: Vec<LabeledSample> = (0..count)
            .map(|i| LabeledSample {
                label: ALPHABET[rng.below(36) as usize] as char,
                features: FeatureVector::new((0..len).map(|_| value(&mut rng)).collect()),
                source_id: format!("x_{i}"),
            })
            .collect();
        let query = FeatureVector::new((0..len).map(|_| value(&mut rng)).collect());
        let best = samples
            .iter()
            .map(|s| {
                let d: f64 = s.features.values().iter().zip(query.values()).map(|(a, b)| (a - b) * (a - b)).sum();
                (d, ALPHABET.iter().position(|&c| c as char == s.label).unwrap())
            })
            .min_by(|a, b| a.partial_cmp(b).unwrap())
            .unwrap();
        let model = Model::new(samples.clone(), None).unwrap();
        let (label, _) = classify_1nn(&query, &model).unwrap();
        prop_assert_eq!(label, ALPHABET[best.1] as char);

        // Duplicating a sample never changes the answer.
        let mut doubled = samples.clone();
        doubled.push(samples[rng.below(count as u32) as usize].clone());
        let (again, _) = classify_1nn(&query, &Model::new(doubled, None).unwrap()).unwrap();
        prop_assert_eq!(again, label);
    }
}
