//! On-disk group records: `<state_dir>/<group_id>/record.txt`, the issued
//! shares as `share_<i>.pbm` and pending submissions as `submitted_<i>.pbm`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{DenyReason, GroupRecord, IssuedShare, Status};
use crate::bitimage::{read_pbm, write_pbm, BitImage, PbmVariant};
use crate::vcs::scheme_params;
use crate::{Error, Result};

const MAGIC: &str = "viskey-group 1";

/// Group identifiers double as directory names.
pub fn valid_group_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
        && !id.starts_with('-')
}

pub fn group_dir(state_dir: &Path, group_id: &str) -> PathBuf {
    state_dir.join(group_id)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::file(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::file(&tmp, e))?;
    f.sync_all().map_err(|e| Error::file(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::file(path, e))
}

fn status_line(status: &Status) -> String {
    match status {
        Status::Pending => "Pending".into(),
        Status::Granted => "Granted".into(),
        Status::Denied(r) => format!("Denied {r}"),
    }
}

fn record_text(rec: &GroupRecord) -> String {
    let issued: Vec<&str> = rec
        .shares
        .iter()
        .map(|s| if s.issued { "1" } else { "0" })
        .collect();
    let submitted: Vec<String> = rec.submissions.keys().map(|m| m.to_string()).collect();
    format!(
        "{MAGIC}\ngroup {}\nkey {}\nn {}\nsecret {} {}\nissued {}\nsubmitted {}\nstatus {}\n",
        rec.group_id,
        rec.key,
        rec.params.n,
        rec.secret_w,
        rec.secret_h,
        issued.join(" "),
        submitted.join(" "),
        status_line(&rec.status),
    )
}

/// Writes the share files once and the mutable parts on every call. The
/// record file is replaced last, so a crash leaves the previous record intact.
pub fn save(state_dir: &Path, rec: &GroupRecord) -> Result<()> {
    let dir = group_dir(state_dir, &rec.group_id);
    fs::create_dir_all(&dir).map_err(|e| Error::file(&dir, e))?;
    for (i, share) in rec.shares.iter().enumerate() {
        let path = dir.join(format!("share_{}.pbm", i + 1));
        if !path.exists() {
            write_atomic(&path, &write_pbm(&share.image, PbmVariant::P4))?;
        }
    }
    for (m, img) in &rec.submissions {
        write_atomic(
            &dir.join(format!("submitted_{m}.pbm")),
            &write_pbm(img, PbmVariant::P4),
        )?;
    }
    write_atomic(&dir.join("record.txt"), record_text(rec).as_bytes())?;
    for m in 1..=rec.shares.len() {
        if !rec.submissions.contains_key(&m) {
            let stale = dir.join(format!("submitted_{m}.pbm"));
            if stale.exists() {
                fs::remove_file(&stale).map_err(|e| Error::file(&stale, e))?;
            }
        }
    }
    Ok(())
}

fn read_image(path: &Path) -> Result<BitImage> {
    let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
    read_pbm(&bytes)
}

fn format_err(line: usize, message: impl Into<String>) -> Error {
    Error::RecordFormat {
        line,
        message: message.into(),
    }
}

fn field<'a>(lines: &[&'a str], idx: usize, name: &str) -> Result<&'a str> {
    let line = lines
        .get(idx)
        .ok_or_else(|| format_err(idx + 1, format!("missing {name} line")))?;
    match line.split_once(' ') {
        Some((k, v)) if k == name => Ok(v),
        None if *line == name => Ok(""),
        _ => Err(format_err(idx + 1, format!("expected {name}"))),
    }
}

fn parse_num(s: &str, line: usize) -> Result<usize> {
    s.parse()
        .map_err(|_| format_err(line, format!("bad number {s:?}")))
}

pub fn load(state_dir: &Path, group_id: &str) -> Result<GroupRecord> {
    let dir = group_dir(state_dir, group_id);
    let path = dir.join("record.txt");
    let text = fs::read_to_string(&path).map_err(|e| Error::file(&path, e))?;
    let lines: Vec<&str> = text.lines().collect();
    if lines.first() != Some(&MAGIC) {
        return Err(format_err(1, "not a group record"));
    }
    let gid = field(&lines, 1, "group")?;
    if gid != group_id {
        return Err(format_err(2, format!("record names group {gid}")));
    }
    let key = field(&lines, 2, "key")?.to_string();
    let params = scheme_params(parse_num(field(&lines, 3, "n")?, 4)?)?;
    let dims: Vec<usize> = field(&lines, 4, "secret")?
        .split(' ')
        .map(|s| parse_num(s, 5))
        .collect::<Result<_>>()?;
    let [secret_w, secret_h] = dims[..] else {
        return Err(format_err(5, "expected width and height"));
    };
    let issued: Vec<&str> = field(&lines, 5, "issued")?.split(' ').collect();
    if issued.len() != params.n {
        return Err(format_err(6, "issued flags do not match n"));
    }
    let mut shares = Vec::with_capacity(params.n);
    for (i, flag) in issued.iter().enumerate() {
        let image = read_image(&dir.join(format!("share_{}.pbm", i + 1)))?;
        shares.push(IssuedShare {
            image,
            issued: *flag == "1",
        });
    }
    let mut submissions = std::collections::BTreeMap::new();
    for m in field(&lines, 6, "submitted")?
        .split(' ')
        .filter(|s| !s.is_empty())
    {
        let m = parse_num(m, 7)?;
        if !(1..=params.n).contains(&m) {
            return Err(format_err(7, format!("submission from non-member {m}")));
        }
        submissions.insert(m, read_image(&dir.join(format!("submitted_{m}.pbm")))?);
    }
    let status = match field(&lines, 7, "status")? {
        "Pending" => Status::Pending,
        "Granted" => Status::Granted,
        s => match s.strip_prefix("Denied ") {
            Some(r) => Status::Denied(r.parse::<DenyReason>()?),
            None => return Err(format_err(8, format!("bad status {s:?}"))),
        },
    };
    Ok(GroupRecord {
        group_id: group_id.to_string(),
        key,
        params,
        secret_w,
        secret_h,
        shares,
        submissions,
        status,
    })
}

/// Every group found under `state_dir`, sorted by id. Directories without a
/// record file are skipped.
pub fn load_all(state_dir: &Path) -> Result<Vec<GroupRecord>> {
    let mut out = Vec::new();
    if !state_dir.exists() {
        return Ok(out);
    }
    let entries = fs::read_dir(state_dir).map_err(|e| Error::file(state_dir, e))?;
    let mut ids: Vec<String> = entries
        .filter_map(|e| e.ok())
        .filter(|e| e.path().join("record.txt").is_file())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|id| valid_group_id(id))
        .collect();
    ids.sort();
    for id in ids {
        out.push(load(state_dir, &id)?);
    }
    Ok(out)
}
