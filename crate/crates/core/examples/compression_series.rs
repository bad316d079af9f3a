// Re-encode one PNG across the robustness series and watch the file size
// and reconstruction error move with quality.

use genbias::transcode::{compress_series, decode, encode_png, CompressionSeries};

pub fn run_example() -> genbias::Result<Vec<(u8, usize, f64)>> {
    let img = genbias::synth::gradient(128, 128, 11)?;
    let png = encode_png(&img)?;
    let series = CompressionSeries::robustness();
    println!("series: {:?}", series.qualities());

    let mut rows = Vec::new();
    for (q, bytes) in compress_series(&png, &series)? {
        let back = decode(&bytes)?;
        let mae = img
            .samples()
            .iter()
            .zip(back.samples())
            .map(|(&a, &b)| f64::from(a.abs_diff(b)))
            .sum::<f64>()
            / img.samples().len() as f64;
        println!("jpeg{q:<3} {:>6} bytes  mae {mae:.3}", bytes.len());
        rows.push((q, bytes.len(), mae));
    }
    Ok(rows)
}

fn main() -> genbias::Result<()> {
    run_example().map(|_| ())
}
