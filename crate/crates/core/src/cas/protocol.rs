//! Line protocol over TCP, with a threaded server and a blocking client.
//!
//! ```text
//! CREATE <group_id> <n> <key_len> <seed>   -> OK <group_id> <n>
//! FETCH <group_id> <member>                -> SHARE <group_id> <member> <nbytes>
//!                                             <nbytes of P4 PBM><sidecar line>
//! SUBMIT <group_id> <member> <nbytes>
//! <nbytes of PBM>                          -> ACCEPTED <submission count>
//! AUTH <group_id>                          -> GRANTED <group_id> | DENIED <group_id> <reason>
//! RESET <group_id>                         -> OK
//! ```
//!
//! Failures are answered with `ERR <code> <message>` and the connection
//! stays open.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::thread::{self, JoinHandle};

use log::{debug, info, warn};

use super::store::{self, valid_group_id};
use super::{AuthDecision, Cas, DenyReason, GroupRecord};
use crate::bitimage::{read_pbm, write_pbm, BitImage, PbmVariant};
use crate::vcs::ShareHeader;
use crate::{Error, Result};

/// Largest PBM payload a SUBMIT may announce.
pub const MAX_PAYLOAD: usize = 16 << 20;

type Shared = Arc<Mutex<GroupRecord>>;

struct State {
    cas: Cas,
    state_dir: PathBuf,
    groups: RwLock<HashMap<String, Shared>>,
}

struct Reply {
    bytes: Vec<u8>,
    /// Drop the connection after sending.
    close: bool,
}

impl Reply {
    fn line(s: impl AsRef<str>) -> Self {
        let mut bytes = s.as_ref().as_bytes().to_vec();
        bytes.push(b'\n');
        Reply {
            bytes,
            close: false,
        }
    }

    fn err(code: &str, message: impl AsRef<str>) -> Self {
        Reply::line(format!("ERR {code} {}", message.as_ref()))
    }
}

impl State {
    fn group(&self, id: &str) -> Option<Shared> {
        self.groups.read().unwrap().get(id).cloned()
    }

    /// Applies `f` to a copy of the record and commits it only once the copy
    /// is on disk.
    fn update<T>(&self, group: &Shared, f: impl FnOnce(&mut GroupRecord) -> T) -> Result<T> {
        let mut rec = group.lock().unwrap();
        let mut next = rec.clone();
        let out = f(&mut next);
        if next != *rec {
            store::save(&self.state_dir, &next)?;
            *rec = next;
        }
        Ok(out)
    }

    fn create(&self, args: &[&str]) -> Reply {
        let [gid, n, key_len, seed] = args else {
            return Reply::err("usage", "CREATE <group_id> <n> <key_len> <seed>");
        };
        if !valid_group_id(gid) {
            return Reply::err("invalid", format!("bad group id {gid:?}"));
        }
        let (Ok(n), Ok(key_len), Ok(seed)) = (
            n.parse::<usize>(),
            key_len.parse::<usize>(),
            seed.parse::<u64>(),
        ) else {
            return Reply::err("usage", "n, key_len and seed must be non-negative integers");
        };
        if self.group(gid).is_some() {
            return Reply::err("exists", format!("group {gid} already exists"));
        }
        let rec = match self.cas.create_group(gid, n, key_len, seed) {
            Ok(r) => r,
            Err(e) => return Reply::err("invalid", e.to_string()),
        };
        let mut groups = self.groups.write().unwrap();
        if groups.contains_key(*gid) {
            return Reply::err("exists", format!("group {gid} already exists"));
        }
        if let Err(e) = store::save(&self.state_dir, &rec) {
            warn!("saving group {gid}: {e}");
            return Reply::err("io", e.to_string());
        }
        info!("created group {gid} with {n} members");
        groups.insert(gid.to_string(), Arc::new(Mutex::new(rec)));
        Reply::line(format!("OK {gid} {n}"))
    }

    fn member_of(&self, gid: &str, member: &str) -> Result<(Shared, usize), Reply> {
        let group = self
            .group(gid)
            .ok_or_else(|| Reply::err("unknown-group", format!("no group {gid}")))?;
        let m = member
            .parse::<usize>()
            .ok()
            .filter(|&m| group.lock().unwrap().is_member(m))
            .ok_or_else(|| Reply::err("unknown-member", format!("no member {member} in {gid}")))?;
        Ok((group, m))
    }

    fn fetch(&self, args: &[&str]) -> Reply {
        let [gid, member] = args else {
            return Reply::err("usage", "FETCH <group_id> <member>");
        };
        let (group, m) = match self.member_of(gid, member) {
            Ok(x) => x,
            Err(r) => return r,
        };
        let out = self.update(&group, |rec| {
            rec.shares[m - 1].issued = true;
            (
                write_pbm(&rec.shares[m - 1].image, PbmVariant::P4),
                rec.header(m),
            )
        });
        match out {
            Ok((pbm, header)) => {
                let mut bytes = format!("SHARE {gid} {m} {}\n", pbm.len()).into_bytes();
                bytes.extend_from_slice(&pbm);
                bytes.extend_from_slice(header.to_line().as_bytes());
                bytes.push(b'\n');
                Reply {
                    bytes,
                    close: false,
                }
            }
            Err(e) => Reply::err("io", e.to_string()),
        }
    }

    fn submit(&self, args: &[&str], payload: &[u8]) -> Reply {
        let [gid, member, _] = args else {
            return Reply::err("usage", "SUBMIT <group_id> <member> <nbytes>");
        };
        let (group, m) = match self.member_of(gid, member) {
            Ok(x) => x,
            Err(r) => return r,
        };
        let share = match read_pbm(payload) {
            Ok(img) => img,
            Err(e) => return Reply::err("payload", e.to_string()),
        };
        match self.update(&group, |rec| rec.submit(m, share)) {
            Ok(Ok(count)) => Reply::line(format!("ACCEPTED {count}")),
            Ok(Err(e)) => Reply::err("unknown-member", e.to_string()),
            Err(e) => Reply::err("io", e.to_string()),
        }
    }

    fn auth(&self, args: &[&str]) -> Reply {
        let [gid] = args else {
            return Reply::err("usage", "AUTH <group_id>");
        };
        let Some(group) = self.group(gid) else {
            return Reply::line(format!("DENIED {gid} {}", DenyReason::UnknownGroup));
        };
        match self.update(&group, |rec| self.cas.authenticate(rec)) {
            Ok(AuthDecision::Granted) => Reply::line(format!("GRANTED {gid}")),
            Ok(AuthDecision::Denied(r)) => Reply::line(format!("DENIED {gid} {r}")),
            Err(e) => Reply::err("io", e.to_string()),
        }
    }

    fn reset(&self, args: &[&str]) -> Reply {
        let [gid] = args else {
            return Reply::err("usage", "RESET <group_id>");
        };
        let Some(group) = self.group(gid) else {
            return Reply::err("unknown-group", format!("no group {gid}"));
        };
        match self.update(&group, GroupRecord::reset) {
            Ok(()) => Reply::line("OK"),
            Err(e) => Reply::err("io", e.to_string()),
        }
    }

    fn handle<R: BufRead>(&self, line: &str, reader: &mut R) -> std::io::Result<Reply> {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let Some((&verb, args)) = tokens.split_first() else {
            return Ok(Reply::err("usage", "empty request"));
        };
        Ok(match verb {
            "CREATE" => self.create(args),
            "FETCH" => self.fetch(args),
            "SUBMIT" => {
                let Some(n) = args.get(2).and_then(|s| s.parse::<usize>().ok()) else {
                    let mut r = Reply::err("usage", "SUBMIT <group_id> <member> <nbytes>");
                    r.close = true;
                    return Ok(r);
                };
                if n > MAX_PAYLOAD {
                    let mut r = Reply::err("payload", format!("{n} bytes exceeds {MAX_PAYLOAD}"));
                    r.close = true;
                    return Ok(r);
                }
                let mut payload = vec![0; n];
                reader.read_exact(&mut payload)?;
                self.submit(args, &payload)
            }
            "AUTH" => self.auth(args),
            "RESET" => self.reset(args),
            other => Reply::err("usage", format!("unknown command {other:?}")),
        })
    }

    fn serve_connection(&self, stream: TcpStream) -> std::io::Result<()> {
        let peer = stream.peer_addr()?;
        debug!("connection from {peer}");
        let mut writer = stream.try_clone()?;
        let mut reader = BufReader::new(stream);
        let mut line = String::new();
        loop {
            line.clear();
            if reader.read_line(&mut line)? == 0 {
                debug!("{peer} closed");
                return Ok(());
            }
            let reply = self.handle(line.trim_end_matches(['\r', '\n']), &mut reader)?;
            writer.write_all(&reply.bytes)?;
            writer.flush()?;
            if reply.close {
                return Ok(());
            }
        }
    }
}

/// A bound, not yet running server.
pub struct Server {
    listener: TcpListener,
    state: Arc<State>,
}

impl Server {
    /// Binds `addr` and loads every group persisted under `state_dir`.
    pub fn bind(addr: impl ToSocketAddrs, state_dir: &Path, cas: Cas) -> Result<Server> {
        std::fs::create_dir_all(state_dir).map_err(|e| Error::file(state_dir, e))?;
        let groups = store::load_all(state_dir)?
            .into_iter()
            .map(|r| (r.group_id.clone(), Arc::new(Mutex::new(r))))
            .collect::<HashMap<_, _>>();
        info!(
            "loaded {} groups from {}",
            groups.len(),
            state_dir.display()
        );
        let listener = TcpListener::bind(addr)?;
        Ok(Server {
            listener,
            state: Arc::new(State {
                cas,
                state_dir: state_dir.to_path_buf(),
                groups: RwLock::new(groups),
            }),
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    fn accept_loop(self, stop: &AtomicBool) {
        for conn in self.listener.incoming() {
            if stop.load(Ordering::SeqCst) {
                break;
            }
            match conn {
                Ok(stream) => {
                    let state = Arc::clone(&self.state);
                    thread::spawn(move || {
                        if let Err(e) = state.serve_connection(stream) {
                            warn!("connection dropped: {e}");
                        }
                    });
                }
                Err(e) => warn!("accept failed: {e}"),
            }
        }
    }

    /// Serves until the process exits.
    pub fn run(self) {
        self.accept_loop(&AtomicBool::new(false));
    }

    /// Serves on a background thread.
    pub fn spawn(self) -> Result<ServerHandle> {
        let addr = self.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&stop);
        let thread = thread::spawn(move || self.accept_loop(&flag));
        Ok(ServerHandle { addr, stop, thread })
    }
}

pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: JoinHandle<()>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting connections and waits for the accept loop to end.
    pub fn shutdown(self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        let _ = self.thread.join();
    }
}

/// Binds `0.0.0.0:port` and serves forever.
pub fn serve(port: u16, state_dir: &Path, cas: Cas) -> Result<()> {
    let server = Server::bind(("0.0.0.0", port), state_dir, cas)?;
    info!("listening on {}", server.local_addr()?);
    server.run();
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FetchedShare {
    pub image: BitImage,
    /// The PBM bytes exactly as sent.
    pub pbm: Vec<u8>,
    pub header: ShareHeader,
}

pub struct Client {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl Client {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Client> {
        let stream = TcpStream::connect(addr)?;
        Ok(Client {
            writer: stream.try_clone()?,
            reader: BufReader::new(stream),
        })
    }

    fn read_line(&mut self) -> Result<String> {
        let mut line = String::new();
        if self.reader.read_line(&mut line)? == 0 {
            return Err(Error::Protocol("connection closed by server".into()));
        }
        Ok(line.trim_end_matches(['\r', '\n']).to_string())
    }

    /// Sends one request and returns the reply line, or [`Error::Remote`]
    /// for an `ERR` reply.
    pub fn request(&mut self, line: &str, payload: &[u8]) -> Result<String> {
        let mut msg = format!("{line}\n").into_bytes();
        msg.extend_from_slice(payload);
        self.writer.write_all(&msg)?;
        self.writer.flush()?;
        let reply = self.read_line()?;
        if reply.starts_with("ERR ") {
            return Err(Error::Remote(reply));
        }
        Ok(reply)
    }

    fn unexpected(reply: &str) -> Error {
        Error::Protocol(format!("unexpected reply {reply:?}"))
    }

    /// Returns the member count.
    pub fn create(&mut self, group_id: &str, n: usize, key_len: usize, seed: u64) -> Result<usize> {
        let reply = self.request(&format!("CREATE {group_id} {n} {key_len} {seed}"), &[])?;
        let prefix = format!("OK {group_id} ");
        reply
            .strip_prefix(&prefix)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Self::unexpected(&reply))
    }

    pub fn fetch(&mut self, group_id: &str, member: usize) -> Result<FetchedShare> {
        let reply = self.request(&format!("FETCH {group_id} {member}"), &[])?;
        let prefix = format!("SHARE {group_id} {member} ");
        let nbytes: usize = reply
            .strip_prefix(&prefix)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Self::unexpected(&reply))?;
        let mut pbm = vec![0; nbytes];
        self.reader.read_exact(&mut pbm)?;
        let header = ShareHeader::parse(&self.read_line()?)?;
        let image = read_pbm(&pbm)?;
        Ok(FetchedShare { image, pbm, header })
    }

    /// Returns the number of members that have submitted.
    pub fn submit(&mut self, group_id: &str, member: usize, share: &BitImage) -> Result<usize> {
        self.submit_bytes(group_id, member, &write_pbm(share, PbmVariant::P4))
    }

    pub fn submit_bytes(&mut self, group_id: &str, member: usize, pbm: &[u8]) -> Result<usize> {
        let reply = self.request(&format!("SUBMIT {group_id} {member} {}", pbm.len()), pbm)?;
        reply
            .strip_prefix("ACCEPTED ")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Self::unexpected(&reply))
    }

    pub fn auth(&mut self, group_id: &str) -> Result<AuthDecision> {
        let reply = self.request(&format!("AUTH {group_id}"), &[])?;
        if reply == format!("GRANTED {group_id}") {
            return Ok(AuthDecision::Granted);
        }
        let prefix = format!("DENIED {group_id} ");
        match reply.strip_prefix(&prefix) {
            Some(reason) => Ok(AuthDecision::Denied(reason.parse()?)),
            None => Err(Self::unexpected(&reply)),
        }
    }

    pub fn reset(&mut self, group_id: &str) -> Result<()> {
        let reply = self.request(&format!("RESET {group_id}"), &[])?;
        if reply == "OK" {
            Ok(())
        } else {
            Err(Self::unexpected(&reply))
        }
    }
}
