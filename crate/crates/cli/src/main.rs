//! `dnavault` command-line front end.
//!
//! Exit codes: 0 success, 1 user error, 2 integrity or availability failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use dnavault::analysis::{self, render_histogram};
use dnavault::cipher::{self, render_cipher_image, CipherContainer, EncryptOptions};
use dnavault::image::{GrayImage, Netpbm, PixelFormat};
use dnavault::keystore::{self, validate_key, KeyProvider, KeyRegistry};
use dnavault::multicloud::{self, parse_cloud_config, BackendDescriptor, StoreManifest};
use dnavault::scramble::{PatternId, PATTERN_COUNT};

#[derive(Parser)]
#[command(name = "dnavault", version, about = "DNA-substitution image encryption with multi-cloud replicas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Manage the key registry.
    Key {
        #[command(subcommand)]
        action: KeyAction,
    },
    /// Encrypt an image into a container.
    Encrypt(EncryptArgs),
    /// Decrypt a container back into an image.
    Decrypt(DecryptArgs),
    /// Encrypt independently for every configured cloud and upload.
    Store(StoreArgs),
    /// Download and decrypt the first replica that verifies.
    Fetch(FetchArgs),
    /// Correlation, histogram and avalanche statistics as CSV.
    Analyze(AnalyzeArgs),
}

#[derive(Subcommand)]
enum KeyAction {
    /// Register a FASTA file.
    Add {
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        key_id: Option<u16>,
        fasta: PathBuf,
    },
    /// List registered keys.
    List {
        #[arg(long)]
        keys: PathBuf,
    },
    /// Report quadruple coverage of one key, or of every key.
    Validate {
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        key_id: Option<u16>,
    },
    /// Write a uniformly random key as FASTA.
    Generate {
        #[arg(long)]
        length: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args)]
struct RawInput {
    /// Treat the input as raw 8-bit grayscale (needs --width and --height).
    #[arg(long, requires_all = ["width", "height"])]
    raw: bool,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
}

#[derive(Args)]
struct EncryptArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    keys: PathBuf,
    #[arg(long)]
    key_id: Option<u16>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..PATTERN_COUNT as i64))]
    pattern: Option<u8>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    no_corner_embed: bool,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u8).range(1..=4))]
    pointer_width: u8,
    #[command(flatten)]
    raw: RawInput,
}

#[derive(Args)]
struct DecryptArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    keys: PathBuf,
    /// Write raw bytes instead of PGM/PPM.
    #[arg(long)]
    raw: bool,
}

#[derive(Args)]
struct StoreArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    clouds: PathBuf,
    #[arg(long)]
    keys: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    no_corner_embed: bool,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u8).range(1..=4))]
    pointer_width: u8,
    #[command(flatten)]
    raw: RawInput,
}

#[derive(Args)]
struct FetchArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    clouds: PathBuf,
    #[arg(long)]
    keys: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    raw: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Plaintext image; repeat together with --cipher for several pairs.
    #[arg(long, required = true)]
    plain: Vec<PathBuf>,
    #[arg(long, required = true)]
    cipher: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Key registry; enables the avalanche columns.
    #[arg(long)]
    keys: Option<PathBuf>,
    /// Directory for histogram bar-chart PGMs.
    #[arg(long)]
    hist_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<dnavault::Error>()) {
        Some(err) if err.is_integrity_or_availability() => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Key { action } => cmd_key(action),
        Command::Encrypt(a) => cmd_encrypt(a),
        Command::Decrypt(a) => cmd_decrypt(a),
        Command::Store(a) => cmd_store(a),
        Command::Fetch(a) => cmd_fetch(a),
        Command::Analyze(a) => cmd_analyze(a),
    }
}

fn rng_for(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_os_rng(),
    }
}

fn cmd_key(action: KeyAction) -> Result<()> {
    match action {
        KeyAction::Add { keys, key_id, fasta } => {
            let mut reg = KeyRegistry::open(&keys)?;
            let entry = reg.add(&fasta, key_id)?;
            println!("{} {} {}", entry.key_id, entry.filename, entry.sha256);
        }
        KeyAction::List { keys } => {
            let reg = KeyRegistry::open_existing(&keys)?;
            for e in reg.entries() {
                println!("{} {} {}", e.key_id, e.filename, e.sha256);
            }
        }
        KeyAction::Validate { keys, key_id } => {
            let reg = KeyRegistry::open_existing(&keys)?;
            let ids = match key_id {
                Some(id) => vec![id],
                None => reg.key_ids(),
            };
            for id in ids {
                let index = reg.key_index(id)?;
                println!("{}", validate_key(&index));
            }
        }
        KeyAction::Generate { length, out, seed } => {
            let key = keystore::random_key(0, length, &mut rng_for(seed))?;
            fs::write(&out, key.to_fasta()).with_context(|| format!("writing {}", out.display()))?;
        }
    }
    Ok(())
}

fn read_input(path: &Path, raw: &RawInput) -> Result<(GrayImage, PixelFormat)> {
    if raw.raw {
        let (w, h) = (raw.width.unwrap_or(0), raw.height.unwrap_or(0));
        Ok((dnavault::image::read_raw(path, w, h)?, PixelFormat::Gray))
    } else {
        let img = Netpbm::read(path)?;
        Ok((img.to_planes(), img.format))
    }
}

fn write_output(path: &Path, planes: GrayImage, rgb: bool, raw: bool) -> Result<()> {
    if raw {
        fs::write(path, &planes.pixels).with_context(|| format!("writing {}", path.display()))?;
    } else {
        let format = if rgb { PixelFormat::Rgb } else { PixelFormat::Gray };
        Netpbm::from_planes(planes, format)?.write(path)?;
    }
    Ok(())
}

fn cmd_encrypt(a: EncryptArgs) -> Result<()> {
    let (img, format) = read_input(&a.input, &a.raw)?;
    let reg = KeyRegistry::open_existing(&a.keys)?;
    let mut rng = rng_for(a.seed);

    let key_id = match a.key_id {
        Some(id) => id,
        None => pick_key(&reg, &mut rng)?,
    };
    let pattern = match a.pattern {
        Some(p) => PatternId::new(p)?,
        None => PatternId::new(rng.random_range(0..PATTERN_COUNT))?,
    };
    let index = reg.key_index(key_id)?;
    let opts = EncryptOptions {
        pointer_width: a.pointer_width,
        corner_embed: !a.no_corner_embed,
        seed: None,
        rgb_planes: format == PixelFormat::Rgb,
    };
    let container = cipher::encrypt(&img.pixels, img.width, img.height, &index, pattern, &mut rng, &opts)?;
    fs::write(&a.out, container.serialize()?).with_context(|| format!("writing {}", a.out.display()))?;
    eprintln!(
        "encrypted {}x{} with key {key_id}, pattern {pattern}, metadata in {}",
        img.width,
        img.height,
        if container.corner_embedded { "corners" } else { "header" }
    );
    Ok(())
}

/// Uniform choice among complete keys, or among all keys if none is complete.
fn pick_key(reg: &KeyRegistry, rng: &mut impl Rng) -> Result<u16> {
    let ids = reg.key_ids();
    if ids.is_empty() {
        bail!("key registry {} is empty", reg.dir().display());
    }
    let mut complete = Vec::new();
    for &id in &ids {
        if reg.key_index(id)?.is_complete() {
            complete.push(id);
        }
    }
    let pool = if complete.is_empty() { &ids } else { &complete };
    Ok(pool[rng.random_range(0..pool.len())])
}

fn read_container(path: &Path) -> Result<CipherContainer> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(CipherContainer::deserialize(&bytes)?)
}

fn cmd_decrypt(a: DecryptArgs) -> Result<()> {
    let container = read_container(&a.input)?;
    let reg = KeyRegistry::open_existing(&a.keys)?;
    let pixels = cipher::decrypt(&container, &reg)?;
    let planes = GrayImage::new(container.width as usize, container.height as usize, pixels)?;
    write_output(&a.out, planes, container.rgb_planes, a.raw)
}

fn read_clouds(path: &Path) -> Result<Vec<BackendDescriptor>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let clouds = parse_cloud_config(&text)?;
    if clouds.is_empty() {
        return Err(anyhow!("cloud config {} lists no backends", path.display()));
    }
    Ok(clouds)
}

fn cmd_store(a: StoreArgs) -> Result<()> {
    let (img, format) = read_input(&a.input, &a.raw)?;
    let clouds = read_clouds(&a.clouds)?;
    let reg = KeyRegistry::open_existing(&a.keys)?;
    let opts = EncryptOptions {
        pointer_width: a.pointer_width,
        corner_embed: !a.no_corner_embed,
        seed: None,
        rgb_planes: format == PixelFormat::Rgb,
    };
    let name = a
        .input
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let manifest = multicloud::store_replicated(
        &img.pixels,
        img.width,
        img.height,
        &name,
        &clouds,
        &reg,
        &mut rng_for(a.seed),
        &opts,
    )?;
    manifest.write(&a.manifest)?;
    for r in &manifest.replicas {
        eprintln!("stored {} on {} (key {}, pattern {})", r.object_id, r.cloud_id, r.key_id, r.pattern.id());
    }
    for x in &manifest.absent {
        eprintln!("skipped {}: {}", x.cloud_id, x.reason);
    }
    Ok(())
}

fn cmd_fetch(a: FetchArgs) -> Result<()> {
    let manifest = StoreManifest::read(&a.manifest)?;
    let clouds = read_clouds(&a.clouds)?;
    let reg = KeyRegistry::open_existing(&a.keys)?;
    let got = multicloud::retrieve(&manifest, &clouds, &reg)?;
    eprintln!("retrieved from {}", got.cloud_id);
    let planes = GrayImage::new(manifest.width, manifest.height, got.pixels)?;
    write_output(&a.out, planes, got.container.rgb_planes, a.raw)
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<()> {
    if a.plain.len() != a.cipher.len() {
        bail!("--plain and --cipher must be given the same number of times");
    }
    let reg = a.keys.as_deref().map(KeyRegistry::open_existing).transpose()?;
    let mut rows = Vec::new();
    for (plain_path, cipher_path) in a.plain.iter().zip(&a.cipher) {
        let plain = Netpbm::read(plain_path)?.to_planes();
        let container = read_container(cipher_path)?;
        let rendered = render_cipher_image(&container);
        let name = plain_path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();

        let avalanche = match &reg {
            Some(reg) => avalanche_for(&plain, &container, reg, a.seed)
                .map_err(|e| eprintln!("{name}: avalanche skipped: {e}"))
                .ok(),
            None => None,
        };
        rows.extend(analysis::analysis_rows::<f64>(&name, &plain, &rendered, avalanche));

        if let Some(dir) = &a.hist_dir {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let stem = Path::new(&name).file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or(name.clone());
            let plain_hist = render_histogram(&analysis::histogram(&plain.pixels), 128);
            let cipher_hist = render_histogram(&analysis::histogram(&rendered.pixels), 128);
            dnavault::image::write_pgm(&dir.join(format!("{stem}.plain-hist.pgm")), &plain_hist)?;
            dnavault::image::write_pgm(&dir.join(format!("{stem}.cipher-hist.pgm")), &cipher_hist)?;
        }
    }
    fs::write(&a.out, analysis::rows_to_csv(&rows)).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(reg) = &reg {
        if let Ok(ks) = analysis::keyspace_report::<f64>(reg) {
            eprintln!(
                "keyspace: {} keys x {} patterns, mean {:.2} bits of pointer choice per cell",
                ks.key_count, ks.pattern_count, ks.mean_log2_pointer_choices
            );
        }
    }
    Ok(())
}

fn avalanche_for(
    plain: &GrayImage,
    container: &CipherContainer,
    reg: &KeyRegistry,
    seed: u64,
) -> Result<dnavault::AvalancheReport> {
    let (pattern, key_id) = cipher::resolve_metadata(container)?;
    let index = reg.key_index(key_id)?;
    let opts = EncryptOptions {
        pointer_width: container.pointer_width,
        corner_embed: container.corner_embedded,
        ..Default::default()
    };
    Ok(analysis::avalanche(
        &plain.pixels,
        plain.width,
        plain.height,
        0,
        &index,
        pattern,
        seed,
        seed.wrapping_add(1),
        &opts,
    )?)
}
