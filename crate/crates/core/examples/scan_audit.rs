// Generate a small biased corpus, scan it into metadata records and
// measure how far the natural and generated halves differ in quality and
// size.

use genbias::audit::audit_corpus;
use genbias::formats::{scan_corpus, DirectoryLabeler};
use genbias::synth::{plan, write_corpus, SynthSpec};

pub fn run_example() -> genbias::Result<(f64, f64)> {
    let dir = tempfile::tempdir().map_err(|e| genbias::Error::io("tempdir", e))?;
    let mut spec = SynthSpec::biased(80, 3);
    spec.natural_sides = (64, 160);
    spec.native_side = 128;
    write_corpus(dir.path(), &plan(&spec)?)?;

    let scan = scan_corpus(dir.path(), &DirectoryLabeler::default())?;
    println!("{} records, {} unreadable", scan.metas.len(), scan.errors.len());

    let report = audit_corpus(&scan.metas)?;
    let t = &report.format_table;
    println!("natural:   {:?}", t.natural);
    println!("generated: {:?}", t.generated);
    let q96 = report.qf_hist_natural.counts[95];
    println!("naturals stored at q96: {q96}/{}", report.qf_hist_natural.total);
    println!("quality TV distance: {:.3}", report.qf_divergence);
    println!("size TV distance:    {:.3}", report.size_divergence);
    Ok((report.qf_divergence, report.size_divergence))
}

fn main() -> genbias::Result<()> {
    run_example().map(|_| ())
}
