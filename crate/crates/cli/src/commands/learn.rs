use std::path::PathBuf;

use clap::Args;
use cisnmf::nmf::{dictionary_file_name, format_dictionary, learn_dictionary};
use cisnmf::signal::{read_wav, stft};

use crate::config::{file_stem, keys, unique_names, ConfigFile, StftArgs};
use crate::error::Result;
use crate::output::OutputSet;

pub const DEFAULT_RANK: usize = 50;
pub const DEFAULT_ITERS: usize = 200;

/// Learn one spectral dictionary per isolated source recording.
#[derive(Debug, Args)]
pub struct LearnArgs {
    /// WAV files of isolated sources; each file stem names its source
    #[arg(required = true)]
    pub sources: Vec<PathBuf>,
    /// Directory receiving `dict_<name>.txt` files
    #[arg(long, short = 'o', default_value = ".")]
    pub output_dir: PathBuf,
    /// Number of dictionary atoms [default: 50]
    #[arg(long)]
    pub rank: Option<usize>,
    /// IS-NMF iterations [default: 200]
    #[arg(long)]
    pub iters: Option<usize>,
    /// Seed for the random initialisation [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub stft: StftArgs,
    /// Optional `key = value` file with defaults for the flags above
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(args: &LearnArgs) -> Result<()> {
    let file = ConfigFile::load(args.config.as_deref(), &keys(&["rank", "iters", "seed"]))?;
    let rank = file.resolve(args.rank, "rank", DEFAULT_RANK)?;
    let iters = file.resolve(args.iters, "iters", DEFAULT_ITERS)?;
    let seed = file.resolve(args.seed, "seed", 0)?;
    let stft_settings = args.stft.resolve(&file)?;

    let names: Vec<String> = args.sources.iter().map(|p| file_stem(p)).collect();
    unique_names(&names, "sources")?;
    OutputSet::create_dir(&args.output_dir)?;
    let mut outputs = OutputSet::new();
    for (path, name) in args.sources.iter().zip(&names) {
        let wave = read_wav(path)?;
        let spec = stft(&wave, &stft_settings.config(wave.sample_rate())?);
        let w = learn_dictionary(&spec, rank, iters, seed)?;
        let out = args.output_dir.join(dictionary_file_name(name));
        outputs.write_bytes(&out, format_dictionary(&w).as_bytes())?;
        println!("{} ({} x {})", out.display(), w.nrows(), w.ncols());
    }
    outputs.commit();
    Ok(())
}
