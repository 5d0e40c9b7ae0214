//! `trawl split` — deterministic train/val/test tagging.

use std::path::Path;

use anyhow::Result;

use trawl_core::dataset::{save_manifest, split_dataset, Split, SplitFractions};

use super::{read_manifest_file, write_output};

pub fn run(
    manifest_path: &Path,
    fractions: SplitFractions,
    seed: u64,
    output: &Path,
    strict: bool,
) -> Result<()> {
    let manifest = read_manifest_file(manifest_path, strict)?;
    let tagged = split_dataset(&manifest, fractions, seed);
    write_output(output, &save_manifest(&tagged)?)?;
    let count = |s: Split| tagged.split_images(s).count();
    println!(
        "wrote {} (train {}, val {}, test {}, seed {seed})",
        output.display(),
        count(Split::Train),
        count(Split::Val),
        count(Split::Test),
    );
    Ok(())
}
