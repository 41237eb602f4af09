use std::fs;
use std::path::Path;
use std::process::ExitCode;

use viskey::bitimage::{or_merge, write_pbm};
use viskey::cas::{render_key_image, share_is_uniform, AuthDecision, Cas, GlyphBank};
use viskey::classify::{load_corpus, train_glyphs};
use viskey::rng::SeededRng;
use viskey::vcs::scheme_params;
use viskey::{BitImage, Cleanup, Error, PbmVariant};

fn save(dir: Option<&Path>, name: &str, img: &BitImage) -> Result<(), Error> {
    if let Some(dir) = dir {
        let path = dir.join(name);
        fs::write(&path, write_pbm(img, PbmVariant::P4))
            .map_err(|source| Error::File { path, source })?;
    }
    Ok(())
}

pub fn run(
    n: usize,
    seed: u64,
    key_len: usize,
    corpus: &Path,
    out_dir: Option<&Path>,
) -> Result<ExitCode, Error> {
    let params = scheme_params(n)?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|source| Error::File {
            path: dir.to_path_buf(),
            source,
        })?;
    }

    let glyphs = load_corpus(corpus)?;
    let training = train_glyphs(&glyphs, &scheme_params(2)?, seed)?;
    println!(
        "model: {} samples from {} corpus glyphs",
        training.model.len(),
        glyphs.len()
    );
    let cas = Cas::new(GlyphBank::load(corpus)?, training.model);

    let mut group = cas.create_group("demo", n, key_len, seed)?;
    println!("key: {}", group.key);
    let key_image = render_key_image(&group.key, &cas.bank, &cas.font_id, cas.spacing)?;
    println!("key image: {}x{}", key_image.width(), key_image.height());
    save(out_dir, "key.pbm", &key_image)?;
    println!(
        "scheme: {} n={} m={} block {}x{}",
        params.variant, params.n, params.m, params.block_h, params.block_w
    );

    let uniform = group
        .shares
        .iter()
        .all(|s| share_is_uniform(&s.image, &params));
    println!(
        "shares: {} issued, every block holds {} black subpixels: {}",
        group.shares.len(),
        params.share_weight(),
        if uniform { "yes" } else { "NO" }
    );
    for (i, s) in group.shares.iter().enumerate() {
        save(out_dir, &format!("share_{}.pbm", i + 1), &s.image)?;
    }

    let mut rng = SeededRng::with_stream(seed, 2);
    let a = 1 + rng.below(n as u32) as usize;
    let b = {
        let k = 1 + rng.below(n as u32 - 1) as usize;
        if k >= a {
            k + 1
        } else {
            k
        }
    };

    group.submit(a, group.shares[a - 1].image.clone())?;
    match cas.authenticate(&mut group) {
        AuthDecision::Denied(r) => println!("member {a} alone: DENIED {r}"),
        AuthDecision::Granted => println!("member {a} alone: GRANTED"),
    }

    group.submit(b, group.shares[b - 1].image.clone())?;
    let shares: Vec<BitImage> = group.submissions.values().cloned().collect();
    let stack = or_merge(&shares)?;
    save(out_dir, "stack.pbm", &stack)?;
    let cleanup = Cleanup::for_stack(&params, &stack);
    let clean = cleanup.apply(&stack)?;
    save(out_dir, "clean.pbm", &clean)?;
    let agree = clean
        .pixels()
        .iter()
        .zip(key_image.pixels())
        .filter(|(x, y)| x == y)
        .count();
    println!(
        "members {a} and {b} stacked: {:.2}% of key pixels recovered",
        100.0 * agree as f64 / key_image.pixels().len() as f64
    );

    let decision = cas.authenticate(&mut group);
    match decision {
        AuthDecision::Granted => {
            println!("decoded: {}", group.key);
            println!("AUTH: GRANTED");
            Ok(ExitCode::SUCCESS)
        }
        AuthDecision::Denied(r) => {
            println!("AUTH: DENIED {r}");
            Ok(ExitCode::from(1))
        }
    }
}
