// The two spatial pipelines: training crops in-window images, inference
// resizes anything to 512 first. Both end at 224x224.

use genbias::transcode::{infer_preprocess, train_preprocess, INPUT_SIDE};

pub fn run_example() -> genbias::Result<Vec<(u32, u32, bool)>> {
    let mut out = Vec::new();
    for (w, h) in [(512, 512), (450, 550), (300, 700), (1024, 768)] {
        let img = genbias::synth::gradient(w, h, 5)?;
        let inferred = infer_preprocess(&img)?;
        assert_eq!((inferred.width(), inferred.height()), (INPUT_SIDE, INPUT_SIDE));
        let trainable = match train_preprocess(&img) {
            Ok(t) => {
                println!("{w}x{h}: train -> {}x{}", t.width(), t.height());
                true
            }
            Err(e) => {
                println!("{w}x{h}: not trainable ({e})");
                false
            }
        };
        out.push((w, h, trainable));
    }
    Ok(out)
}

fn main() -> genbias::Result<()> {
    run_example().map(|_| ())
}
