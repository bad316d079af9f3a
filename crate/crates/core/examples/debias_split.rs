// Build both debiased training splits from a biased corpus and materialize
// one of them to disk.

use genbias::debias::{build_jpeg96_split, build_size_split, materialize, ConstraintConfig};
use genbias::formats::{scan_corpus, DirectoryLabeler};
use genbias::synth::{plan, write_corpus, SynthSpec};

pub fn run_example() -> genbias::Result<(u64, u64, usize)> {
    let dir = tempfile::tempdir().map_err(|e| genbias::Error::io("tempdir", e))?;
    let corpus = dir.path().join("corpus");
    let mut spec = SynthSpec::biased(120, 9);
    spec.classes = 3;
    spec.natural_sides = (440, 560);
    write_corpus(&corpus, &plan(&spec)?)?;
    let metas = scan_corpus(&corpus, &DirectoryLabeler::default())?.metas;

    let config = ConstraintConfig::new(9);
    let jpeg = build_jpeg96_split(&metas, &config)?;
    println!("jpeg96 split: {:?}", jpeg.header.total);
    for (class, c) in &jpeg.header.counts {
        println!("  {class}: {} natural / {} generated", c.natural, c.generated);
    }
    let size = build_size_split(&metas, &config)?;
    println!("size split:   {:?}", size.header.total);

    let report = materialize(&jpeg, &dir.path().join("split"))?;
    println!(
        "materialized {} files, {} failures",
        report.written.len(),
        report.failures.len()
    );
    Ok((jpeg.header.total.natural, size.header.total.natural, report.written.len()))
}

fn main() -> genbias::Result<()> {
    run_example().map(|_| ())
}
