// Encode a raster at a few qualities, then recover the quality factor from
// the embedded quantization tables alone.

use genbias::formats::{estimate_qf, inspect, parse_jpeg_meta, scale_tables};
use genbias::transcode::{encode_qf, Raster};

pub fn run_example() -> genbias::Result<Vec<(u8, u8, bool)>> {
    let img = genbias::synth::gradient(96, 64, 7)?;
    let mut seen = Vec::new();
    for q in [50u8, 75, 90, 96, 100] {
        let bytes = encode_qf(&img, q)?;
        let header = parse_jpeg_meta(&bytes)?;
        let est = estimate_qf(&header.tables);
        println!(
            "q={q:>3}  luma[0]={:>2}  estimated={:>3}  exact={}  bytes={}",
            header.tables.luma[0],
            est.qf,
            est.exact,
            bytes.len()
        );
        seen.push((q, est.qf, est.exact));
    }

    // A hand-edited table no longer matches any standard quality.
    let mut tables = scale_tables(90)?;
    tables.luma[0] += 1;
    let est = estimate_qf(&tables);
    println!("perturbed q90 table -> {} (distance {})", est.qf, est.distance);

    let gray = Raster::filled(16, 16, &[128])?;
    let info = inspect(&encode_qf(&gray, 96)?)?;
    println!("gray 16x16: {:?} {}x{}", info.format, info.width, info.height);
    Ok(seen)
}

fn main() -> genbias::Result<()> {
    run_example().map(|_| ())
}
