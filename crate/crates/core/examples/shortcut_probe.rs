// A metadata-only classifier: if format, quality and size alone separate
// natural from generated, a detector can learn the shortcut too.

use genbias::formats::{scan_corpus, DirectoryLabeler};
use genbias::probe::probe_corpus;
use genbias::synth::{plan, write_corpus, SynthSpec};

pub fn run_example() -> genbias::Result<f64> {
    let dir = tempfile::tempdir().map_err(|e| genbias::Error::io("tempdir", e))?;
    let mut spec = SynthSpec::biased(200, 21);
    spec.natural_sides = (48, 160);
    spec.native_side = 96;
    write_corpus(dir.path(), &plan(&spec)?)?;
    let metas = scan_corpus(dir.path(), &DirectoryLabeler::default())?.metas;

    let report = probe_corpus(&metas, 0.25, 21)?;
    for s in &report.model.stumps {
        println!(
            "{:<12} {} {:>8.2}  weight {:.3}",
            s.feature_name,
            if s.polarity > 0 { ">" } else { "<=" },
            s.threshold,
            s.weight
        );
    }
    println!("train accuracy:   {:.3}", report.train.accuracy);
    println!("heldout accuracy: {:.3}", report.heldout.accuracy);
    Ok(report.heldout.accuracy)
}

fn main() -> genbias::Result<()> {
    run_example().map(|_| ())
}
