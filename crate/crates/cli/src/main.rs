use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use viskey::bitimage::{read_pbm, write_pbm};
use viskey::cas::protocol::{Client, Server};
use viskey::cas::{generate_key, render_key_image, AuthDecision, Cas, GlyphBank, DEFAULT_FONT};
use viskey::classify::{classify_1nn, decode_string, train_model};
use viskey::denoise::adaptive_filter;
use viskey::ocr::{extract_features, glyph_features, normalize_glyph, segment};
use viskey::vcs::{encode, reconstruct, scheme_params, SchemeParams, ShareHeader};
use viskey::{BitImage, Cleanup, Error, Model, PbmVariant};

mod demo;

#[derive(Parser)]
#[command(
    name = "viskey",
    version,
    about = "Group-key authentication with visual secret sharing"
)]
struct Cli {
    /// Log more; repeat for debug output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    P1,
    P4,
}

impl From<Format> for PbmVariant {
    fn from(f: Format) -> Self {
        match f {
            Format::P1 => PbmVariant::P1,
            Format::P4 => PbmVariant::P4,
        }
    }
}

#[derive(Args)]
struct Output {
    /// Output image path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "p4")]
    format: Format,
}

#[derive(Args)]
struct ServerAddr {
    /// Address of a running `viskey serve`.
    #[arg(long, default_value = "127.0.0.1:7070")]
    server: String,
}

#[derive(Subcommand)]
enum Command {
    /// Print a random key over 0-9A-Z.
    Keygen {
        #[arg(long, default_value_t = 6)]
        length: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Render a key as a bilevel image from corpus glyphs.
    Render {
        #[arg(long)]
        key: String,
        #[arg(long, default_value = "corpus")]
        corpus: PathBuf,
        #[arg(long, default_value = DEFAULT_FONT)]
        font: String,
        #[arg(long, default_value_t = viskey::cas::DEFAULT_SPACING)]
        spacing: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Split a secret image into shares, each with a `.txt` header sidecar.
    Encode {
        /// Share count: 2, or 3t for t >= 3.
        #[arg(long)]
        scheme: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        input: PathBuf,
        /// Shares are written to `<prefix>_<i>.pbm`; defaults to the input's stem.
        #[arg(long)]
        out_prefix: Option<String>,
        #[arg(long, default_value = "-")]
        group: String,
    },
    /// Stack shares by OR.
    Reconstruct {
        #[arg(required = true, num_args = 2..)]
        shares: Vec<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Filter a stacked image and collapse it to secret resolution.
    Denoise {
        input: PathBuf,
        /// Scheme of the stack; read from the input's sidecar when omitted.
        #[arg(long)]
        scheme: Option<usize>,
        #[arg(long)]
        white_cutoff: Option<f64>,
        #[arg(long)]
        black_cutoff: Option<f64>,
        #[arg(long)]
        max_window: Option<usize>,
        /// Keep the filtered image at share resolution.
        #[arg(long)]
        no_collapse: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Print glyph bounding boxes as `top bottom left right`.
    Segment { input: PathBuf },
    /// Print one 48-value CSV feature line per glyph.
    Features { input: PathBuf },
    /// Build a model from a glyph corpus passed through the share pipeline.
    Train {
        #[arg(long, default_value = "corpus")]
        corpus: PathBuf,
        #[arg(long, default_value_t = 2)]
        scheme: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Read the glyphs of a clean image.
    Classify {
        #[arg(long)]
        model: PathBuf,
        image: PathBuf,
    },
    /// Read the key from a raw stacked image.
    Decode {
        #[arg(long)]
        model: PathBuf,
        /// Scheme of the stack; read from the input's sidecar when omitted.
        #[arg(long)]
        scheme: Option<usize>,
        input: PathBuf,
    },
    /// Ask the server to create a group.
    Create {
        #[command(flatten)]
        addr: ServerAddr,
        group: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 6)]
        key_len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Download a member's share and its sidecar.
    Fetch {
        #[command(flatten)]
        addr: ServerAddr,
        group: String,
        member: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Hand a share back to the server.
    Submit {
        #[command(flatten)]
        addr: ServerAddr,
        group: String,
        member: usize,
        share: PathBuf,
    },
    /// Ask the server for a verdict. Exits 1 when denied.
    Auth {
        #[command(flatten)]
        addr: ServerAddr,
        group: String,
    },
    /// Clear a group's submissions.
    Reset {
        #[command(flatten)]
        addr: ServerAddr,
        group: String,
    },
    /// Run the authentication server.
    Serve {
        #[arg(long, default_value_t = 7070)]
        port: u16,
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "corpus")]
        corpus: PathBuf,
        #[arg(long, default_value = DEFAULT_FONT)]
        font: String,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Walk through key generation, sharing and authentication in-process.
    Demo {
        #[arg(long, default_value_t = 9)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        key_len: usize,
        #[arg(long, default_value = "corpus")]
        corpus: PathBuf,
        /// Also write the key image, shares and intermediate images here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

type CliResult<T = ()> = Result<T, Error>;

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::File {
        path: path.to_path_buf(),
        source,
    }
}

fn read_image(path: &Path) -> CliResult<BitImage> {
    let bytes = fs::read(path).map_err(file_err(path))?;
    read_pbm(&bytes)
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult {
    fs::write(path, bytes).map_err(file_err(path))
}

fn write_image(path: &Path, img: &BitImage, variant: PbmVariant) -> CliResult {
    write_file(path, &write_pbm(img, variant))
}

fn sidecar_path(image: &Path) -> PathBuf {
    image.with_extension("txt")
}

fn read_sidecar(image: &Path) -> CliResult<Option<ShareHeader>> {
    let path = sidecar_path(image);
    if !path.is_file() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(file_err(&path))?;
    ShareHeader::parse(text.trim()).map(Some)
}

fn write_sidecar(image: &Path, header: &ShareHeader) -> CliResult {
    write_file(
        &sidecar_path(image),
        format!("{}\n", header.to_line()).as_bytes(),
    )
}

fn scheme_for(input: &Path, scheme: Option<usize>) -> CliResult<SchemeParams> {
    match (scheme, read_sidecar(input)?) {
        (Some(n), _) => scheme_params(n),
        (None, Some(h)) => Ok(h.params),
        (None, None) => Err(Error::InvalidArgument(format!(
            "no --scheme given and no sidecar {} found",
            sidecar_path(input).display()
        ))),
    }
}

fn run(command: Command) -> CliResult<ExitCode> {
    match command {
        Command::Keygen { length, seed } => println!("{}", generate_key(length, seed)?),
        Command::Render {
            key,
            corpus,
            font,
            spacing,
            output,
        } => {
            let bank = GlyphBank::load(&corpus)?;
            let img = render_key_image(&key, &bank, &font, spacing)?;
            write_image(&output.out, &img, output.format.into())?;
        }
        Command::Encode {
            scheme,
            seed,
            input,
            out_prefix,
            group,
        } => {
            let params = scheme_params(scheme)?;
            let secret = read_image(&input)?;
            let set = encode(&secret, &params, seed)?;
            let prefix = out_prefix
                .unwrap_or_else(|| input.with_extension("").to_string_lossy().into_owned());
            for (i, share) in set.shares.iter().enumerate() {
                let path = PathBuf::from(format!("{prefix}_{}.pbm", i + 1));
                write_image(&path, share, PbmVariant::P4)?;
                write_sidecar(
                    &path,
                    &ShareHeader {
                        params,
                        secret_w: set.secret_w,
                        secret_h: set.secret_h,
                        share_index: i + 1,
                        group_id: group.clone(),
                    },
                )?;
                println!("{}", path.display());
            }
        }
        Command::Reconstruct { shares, output } => {
            let mut images = Vec::with_capacity(shares.len());
            let mut header: Option<ShareHeader> = None;
            for path in &shares {
                let img = read_image(path)?;
                if let Some(h) = read_sidecar(path)? {
                    if !h.matches(&img) {
                        return Err(Error::InvalidArgument(format!(
                            "{} does not have the size its sidecar declares",
                            path.display()
                        )));
                    }
                    match &header {
                        Some(first)
                            if (
                                first.params,
                                first.secret_w,
                                first.secret_h,
                                &first.group_id,
                            ) != (h.params, h.secret_w, h.secret_h, &h.group_id) =>
                        {
                            return Err(Error::InvalidArgument(format!(
                                "{} belongs to a different sharing",
                                path.display()
                            )));
                        }
                        Some(_) => {}
                        None => header = Some(h),
                    }
                }
                images.push(img);
            }
            let stack = reconstruct(&images)?;
            write_image(&output.out, &stack, output.format.into())?;
            if let Some(h) = header {
                write_sidecar(&output.out, &h)?;
            }
        }
        Command::Denoise {
            input,
            scheme,
            white_cutoff,
            black_cutoff,
            max_window,
            no_collapse,
            output,
        } => {
            let params = scheme_for(&input, scheme)?;
            let stack = read_image(&input)?;
            let mut cleanup = Cleanup::for_stack(&params, &stack);
            if let Some(w) = white_cutoff {
                cleanup.filter.white_cutoff = w;
            }
            if let Some(b) = black_cutoff {
                cleanup.filter.black_cutoff = b;
            }
            if let Some(m) = max_window {
                cleanup.filter.max_window = m;
            }
            cleanup.filter.validate()?;
            let out = if no_collapse {
                adaptive_filter(&stack, &cleanup.filter)
            } else {
                cleanup.apply(&stack)?
            };
            write_image(&output.out, &out, output.format.into())?;
        }
        Command::Segment { input } => {
            for b in segment(&read_image(&input)?) {
                println!("{} {} {} {}", b.top, b.bottom, b.left, b.right);
            }
        }
        Command::Features { input } => {
            for f in glyph_features(&read_image(&input)?)? {
                println!("{}", f.to_csv());
            }
        }
        Command::Train {
            corpus,
            scheme,
            seed,
            out,
        } => {
            let params = scheme_params(scheme)?;
            let training = train_model(&corpus, &params, seed)?;
            for (path, why) in &training.skipped {
                eprintln!("skipped {}: {why}", path.display());
            }
            training.model.save(&out)?;
            println!("{} samples", training.model.len());
        }
        Command::Classify { model, image } => {
            let model = Model::load(&model)?;
            let img = read_image(&image)?;
            let mut text = String::new();
            for b in segment(&img) {
                let f = extract_features(&normalize_glyph(&img, b)?)?;
                text.push(classify_1nn(&f, &model)?.0);
            }
            println!("{text}");
        }
        Command::Decode {
            model,
            scheme,
            input,
        } => {
            let params = scheme_for(&input, scheme)?;
            let model = Model::load(&model)?;
            let stack = read_image(&input)?;
            let cleanup = Cleanup::for_stack(&params, &stack);
            println!("{}", decode_string(&stack, &model, &cleanup)?);
        }
        Command::Create {
            addr,
            group,
            n,
            key_len,
            seed,
        } => {
            let n = Client::connect(&addr.server)?.create(&group, n, key_len, seed)?;
            println!("OK {group} {n}");
        }
        Command::Fetch {
            addr,
            group,
            member,
            out,
        } => {
            let share = Client::connect(&addr.server)?.fetch(&group, member)?;
            write_file(&out, &share.pbm)?;
            write_sidecar(&out, &share.header)?;
        }
        Command::Submit {
            addr,
            group,
            member,
            share,
        } => {
            let bytes = fs::read(&share).map_err(file_err(&share))?;
            let count = Client::connect(&addr.server)?.submit_bytes(&group, member, &bytes)?;
            println!("ACCEPTED {count}");
        }
        Command::Auth { addr, group } => match Client::connect(&addr.server)?.auth(&group)? {
            AuthDecision::Granted => println!("GRANTED {group}"),
            AuthDecision::Denied(reason) => {
                println!("DENIED {group} {reason}");
                return Ok(ExitCode::from(1));
            }
        },
        Command::Reset { addr, group } => {
            Client::connect(&addr.server)?.reset(&group)?;
            println!("OK");
        }
        Command::Serve {
            port,
            state,
            model,
            corpus,
            font,
            host,
        } => {
            let mut cas = Cas::new(GlyphBank::load(&corpus)?, Model::load(&model)?);
            cas.font_id = font;
            let server = Server::bind((host.as_str(), port), &state, cas)?;
            println!("listening on {}", server.local_addr()?);
            std::io::stdout().flush()?;
            server.run();
        }
        Command::Demo {
            n,
            seed,
            key_len,
            corpus,
            out_dir,
        } => return demo::run(n, seed, key_len, &corpus, out_dir.as_deref()),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("viskey: {e}");
            ExitCode::from(1)
        }
    }
}
