use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use viskey::cas::protocol::{Client, Server};
use viskey::cas::{share_is_uniform, store, AuthDecision, Cas, DenyReason, GlyphBank};
use viskey::classify::train_model;
use viskey::ocr::segment;
use viskey::vcs::scheme_params;
use viskey::{cas, Error};

fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn cas() -> &'static Cas {
    static CAS: OnceLock<Cas> = OnceLock::new();
    CAS.get_or_init(|| {
        let model = train_model(&corpus_dir(), &scheme_params(2).unwrap(), 1)
            .unwrap()
            .model;
        Cas::new(GlyphBank::load(&corpus_dir()).unwrap(), model)
    })
}

#[test]
fn rendered_keys_segment_per_character() {
    let img = cas::render_key_image("A7K", &cas().bank, "sans", 4).unwrap();
    assert_eq!(segment(&img).len(), 3);
    let two = cas::render_key_image("AB", &cas().bank, "sans", 4).unwrap();
    assert_eq!((two.width(), two.height()), (72, 36));
}

#[test]
fn create_group_shapes() {
    let g = cas().create_group("a", 2, 6, 3).unwrap();
    assert_eq!(g.shares.len(), 2);
    assert_eq!(g.key.len(), 6);
    for s in &g.shares {
        assert!(share_is_uniform(&s.image, &g.params));
        assert_eq!(s.image.width(), g.secret_w * 2);
    }
    let g = cas().create_group("b", 9, 6, 3).unwrap();
    assert_eq!(g.shares.len(), 9);
    assert_eq!((g.params.block_h, g.params.block_w), (2, 3));
    assert!(g
        .shares
        .iter()
        .all(|s| share_is_uniform(&s.image, &g.params)));
    assert!(matches!(
        cas().create_group("c", 7, 6, 3),
        Err(Error::UnsupportedShareCount(7))
    ));
}

#[test]
fn every_pair_of_nine_authenticates() {
    let g = cas().create_group("g", 9, 6, 11).unwrap();
    for a in 1..=9 {
        for b in a + 1..=9 {
            let mut rec = g.clone();
            rec.submit(a, g.shares[a - 1].image.clone()).unwrap();
            rec.submit(b, g.shares[b - 1].image.clone()).unwrap();
            assert_eq!(
                cas().authenticate(&mut rec),
                AuthDecision::Granted,
                "{a},{b}"
            );
        }
    }
}

#[test]
fn denials() {
    let g = cas().create_group("g", 9, 6, 12).unwrap();
    let mut rec = g.clone();
    assert_eq!(
        cas().authenticate(&mut rec),
        AuthDecision::Denied(DenyReason::InsufficientShares)
    );
    rec.submit(4, g.shares[3].image.clone()).unwrap();
    rec.submit(4, g.shares[3].image.clone()).unwrap();
    assert_eq!(
        cas().authenticate(&mut rec),
        AuthDecision::Denied(DenyReason::InsufficientShares)
    );
    assert!(rec.submit(10, g.shares[0].image.clone()).is_err());

    let other = cas().create_group("h", 9, 6, 13).unwrap();
    let mut mixed = g.clone();
    mixed.submit(1, g.shares[0].image.clone()).unwrap();
    mixed.submit(2, other.shares[0].image.clone()).unwrap();
    assert!(matches!(
        cas().authenticate(&mut mixed),
        AuthDecision::Denied(DenyReason::KeyMismatch(_))
    ));

    let short = cas().create_group("s", 9, 5, 13).unwrap();
    let mut odd = g.clone();
    odd.submit(1, g.shares[0].image.clone()).unwrap();
    odd.submit(2, short.shares[1].image.clone()).unwrap();
    assert_eq!(
        cas().authenticate(&mut odd),
        AuthDecision::Denied(DenyReason::DimensionMismatch)
    );
}

#[test]
fn server_round_trip_and_restart() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::bind("127.0.0.1:0", dir.path(), cas().clone()).unwrap();
    let handle = server.spawn().unwrap();
    let mut c = Client::connect(handle.addr()).unwrap();
    assert_eq!(c.create("g1", 9, 6, 1234).unwrap(), 9);
    for i in 1..=9 {
        assert!(dir.path().join(format!("g1/share_{i}.pbm")).is_file());
    }
    assert!(
        matches!(c.create("g1", 9, 6, 1), Err(Error::Remote(r)) if r.starts_with("ERR exists"))
    );
    let s3 = c.fetch("g1", 3).unwrap();
    assert_eq!(s3.header.share_index, 3);
    assert!(s3.header.matches(&s3.image));
    let s5 = c.fetch("g1", 5).unwrap();
    assert!(
        matches!(c.fetch("g1", 10), Err(Error::Remote(r)) if r.starts_with("ERR unknown-member"))
    );
    assert!(
        matches!(c.fetch("zz", 1), Err(Error::Remote(r)) if r.starts_with("ERR unknown-group"))
    );
    assert_eq!(
        c.auth("g1").unwrap(),
        AuthDecision::Denied(DenyReason::InsufficientShares)
    );
    assert_eq!(c.submit("g1", 3, &s3.image).unwrap(), 1);
    assert!(
        matches!(c.submit_bytes("g1", 5, b"P4 junk"), Err(Error::Remote(r)) if r.starts_with("ERR payload"))
    );
    assert_eq!(c.submit("g1", 5, &s5.image).unwrap(), 2);
    assert_eq!(c.auth("g1").unwrap(), AuthDecision::Granted);
    assert_eq!(
        c.auth("nope").unwrap(),
        AuthDecision::Denied(DenyReason::UnknownGroup)
    );
    assert!(matches!(c.request("BOGUS", &[]), Err(Error::Remote(r)) if r.starts_with("ERR usage")));
    drop(c);
    let before = store::load(dir.path(), "g1").unwrap();
    handle.shutdown();

    let handle = Server::bind("127.0.0.1:0", dir.path(), cas().clone())
        .unwrap()
        .spawn()
        .unwrap();
    let mut c = Client::connect(handle.addr()).unwrap();
    assert_eq!(c.fetch("g1", 3).unwrap(), s3);
    assert_eq!(c.auth("g1").unwrap(), AuthDecision::Granted);
    assert_eq!(store::load(dir.path(), "g1").unwrap(), before);
    c.reset("g1").unwrap();
    assert_eq!(
        c.auth("g1").unwrap(),
        AuthDecision::Denied(DenyReason::InsufficientShares)
    );
    handle.shutdown();
}

#[test]
fn concurrent_submissions_serialize() {
    let dir = tempfile::tempdir().unwrap();
    let handle = Server::bind("127.0.0.1:0", dir.path(), cas().clone())
        .unwrap()
        .spawn()
        .unwrap();
    let addr = handle.addr();
    Client::connect(addr)
        .unwrap()
        .create("par", 9, 4, 8)
        .unwrap();
    let workers: Vec<_> = (1..=9)
        .map(|m| {
            std::thread::spawn(move || {
                let mut c = Client::connect(addr).unwrap();
                let s = c.fetch("par", m).unwrap();
                c.submit("par", m, &s.image).unwrap()
            })
        })
        .collect();
    let mut counts: Vec<usize> = workers.into_iter().map(|w| w.join().unwrap()).collect();
    counts.sort();
    assert_eq!(counts, (1..=9).collect::<Vec<_>>());
    assert_eq!(
        Client::connect(addr).unwrap().auth("par").unwrap(),
        AuthDecision::Granted
    );
    handle.shutdown();
}
