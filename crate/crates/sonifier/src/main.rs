use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use sonifier::live::{build_embedder, build_fetcher, build_services, wall_clock};
use sonifier_core::ingestion::{fetch_snapshot, fixture_file_name, parse_weather, WEATHER_FIXTURE};
use sonifier_core::library::{generate_fixture_library, FixtureParams, LabelingSession, SoundLibrary};
use sonifier_core::music::{parse_event_log, write_midi};
use sonifier_core::session::{
    configured_layers, configured_weather_source, parse_script, run_headless, Session, SessionConfig, SessionError,
};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "sonifier", version, about = "Pace-layer generative sonifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Start a session: a WebSocket server, or a scripted headless run.
    Run(RunArgs),
    /// Inspect and edit sound libraries.
    #[command(subcommand)]
    Library(LibraryCommand),
    /// Capture live sources into a fixture directory.
    #[command(subcommand)]
    Fixtures(FixturesCommand),
    /// Render an event log to a standard MIDI file.
    Midi {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    headless: bool,
    #[arg(long)]
    script: Option<PathBuf>,
    /// Event log path; the manifest is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    fixtures: Option<PathBuf>,
    #[arg(long)]
    time_scale_factor: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    port: Option<u16>,
}

#[derive(Args)]
struct LibraryOpts {
    /// Session config selecting the embedder; defaults to the offline one.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum LibraryCommand {
    /// Print coverage statistics as JSON.
    Stats {
        #[arg(long)]
        library: PathBuf,
        #[command(flatten)]
        opts: LibraryOpts,
    },
    /// Write a synthetic library shaped like the reference corpus.
    GenFixture {
        #[arg(long, default_value_t = 1050)]
        sounds: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        opts: LibraryOpts,
    },
    /// Add one label to a sound.
    AddLabel {
        #[arg(long)]
        library: PathBuf,
        #[arg(long)]
        sound: u32,
        #[arg(long)]
        text: String,
        #[arg(long)]
        labeler: String,
        #[command(flatten)]
        opts: LibraryOpts,
    },
    /// Pick the next sound to present to a labeler.
    Assign {
        #[arg(long)]
        library: PathBuf,
        #[arg(long)]
        labeler: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        opts: LibraryOpts,
    },
}

#[derive(Subcommand)]
enum FixturesCommand {
    Fetch {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<SessionConfig, SessionError> {
    let mut config = match path {
        Some(p) => SessionConfig::load(p)?,
        None => SessionConfig::default(),
    };
    config.apply_env(|k| std::env::var(k).ok());
    Ok(config)
}

fn manifest_path(log: &Path) -> PathBuf {
    log.with_extension("manifest.json")
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(dir) = args.fixtures {
        config.fixtures_dir = Some(dir);
    }
    if let Some(s) = args.script {
        config.script = Some(s);
    }
    if let Some(f) = args.time_scale_factor {
        config.time_scale_factor = f;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(port) = args.port {
        config.port = port;
    }
    config.headless |= args.headless;
    config.validate()?;

    let services = build_services(&config)?;
    if config.headless {
        let script_path = config.script.as_ref().expect("validated");
        let text = std::fs::read_to_string(script_path).with_context(|| script_path.display().to_string())?;
        let script = parse_script(&text)?;
        let run = run_headless(&config, services, &script)?;
        let out = args.out.unwrap_or_else(|| PathBuf::from("events.ndjson"));
        run.write(&out, &manifest_path(&out))?;
        for f in &run.failures {
            tracing::warn!(target = ?f.target, "refresh failed: {}", f.detail);
        }
        println!("{}", run.manifest_json().trim_end());
        return Ok(());
    }

    let session = Session::start(&config, services, wall_clock())?;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    let session = runtime.block_on(async {
        let addr = format!("0.0.0.0:{}", config.port);
        let listener = tokio::net::TcpListener::bind(&addr).await.map_err(|e| BindError(format!("{addr}: {e}")))?;
        tracing::info!("serving pv1 on ws://{addr}/ws");
        sonifier::server::serve(listener, session, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    })?;
    drop(runtime);
    if let Some(out) = args.out {
        let log = sonifier_core::music::serialize_event_log(session.event_log());
        std::fs::write(&out, log)?;
        tracing::info!("wrote {} events to {}", session.event_log().len(), out.display());
    }
    Ok(())
}

#[derive(Debug)]
struct BindError(String);

impl std::fmt::Display for BindError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "cannot bind {}", self.0)
    }
}

impl std::error::Error for BindError {}

fn library(cmd: LibraryCommand) -> anyhow::Result<()> {
    let embedder =
        |opts: &LibraryOpts| -> anyhow::Result<_> { Ok(build_embedder(&load_config(opts.config.as_deref())?)) };
    match cmd {
        LibraryCommand::Stats { library, opts } => {
            let lib = SoundLibrary::load(&library, embedder(&opts)?.dimension())?;
            println!("{}", serde_json::to_string_pretty(&lib.coverage_stats())?);
        }
        LibraryCommand::GenFixture { sounds, seed, out, opts } => {
            let emb = embedder(&opts)?;
            let lib = generate_fixture_library(FixtureParams::with_default_shape(sounds, seed), &*emb)?;
            lib.save(&out)?;
            println!("{}", serde_json::to_string_pretty(&lib.coverage_stats())?);
        }
        LibraryCommand::AddLabel { library, sound, text, labeler, opts } => {
            let emb = embedder(&opts)?;
            let mut lib = SoundLibrary::load(&library, emb.dimension())?;
            let label = lib.add_label(sound, &text, &labeler, &*emb, wall_clock())?;
            lib.save(&library)?;
            println!("sound {sound}: \"{}\" by {}", label.text, label.labeler_id);
        }
        LibraryCommand::Assign { library, labeler, seed, opts } => {
            let lib = SoundLibrary::load(&library, embedder(&opts)?.dimension())?;
            println!("{}", LabelingSession::new(seed).next_assignment(&lib, &labeler)?);
        }
    }
    Ok(())
}

fn fetch_fixtures(config: Option<PathBuf>, out: PathBuf) -> anyhow::Result<()> {
    let config = load_config(config.as_deref())?;
    if config.fixtures_dir.is_some() {
        bail!("fixtures fetch reads live sources; remove fixtures_dir from the config");
    }
    let fetcher = build_fetcher(&config)?;
    std::fs::create_dir_all(&out)?;
    let now = wall_clock();
    for layer in configured_layers(&config) {
        let snapshot = fetch_snapshot(&layer, &*fetcher, now)?;
        let path = out.join(fixture_file_name(layer.id));
        std::fs::write(&path, &snapshot.raw)?;
        println!("{}: {} entries -> {}", layer.id.name(), snapshot.payload.len(), path.display());
    }
    let source = configured_weather_source(&config);
    let raw = fetcher.fetch_raw(&source)?;
    let reading = parse_weather(&raw, now)?;
    let path = out.join(format!("{WEATHER_FIXTURE}.json"));
    std::fs::write(&path, raw)?;
    println!("weather: {:?} -> {}", reading.condition, path.display());
    Ok(())
}

fn midi(log: PathBuf, out: PathBuf) -> anyhow::Result<()> {
    let events = parse_event_log(&std::fs::read_to_string(&log)?)?;
    std::fs::write(&out, write_midi(&events))?;
    println!("{} events -> {}", events.len(), out.display());
    Ok(())
}

/// 2 for configuration, 3 for fixture and source errors, 4 when the port is
/// taken, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<BindError>().is_some() {
        return 4;
    }
    match err.downcast_ref::<SessionError>() {
        Some(SessionError::Config(_)) => 2,
        Some(SessionError::Ingest(_)) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Library(cmd) => library(cmd),
        Command::Fixtures(FixturesCommand::Fetch { config, out }) => fetch_fixtures(config, out),
        Command::Midi { log, out } => midi(log, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
