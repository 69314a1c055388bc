//! Convert one event stream into all five image-like representations and
//! round-trip one of them through the dump format.
//!
//! ```bash
//! cargo run --example representations
//! ```

use evpoison::dataset::{synth_dataset, SynthDatasetConfig};
use evpoison::repr::dump::{read_dump, write_dump};
use evpoison::repr::{convert, ReprConfig, ReprMethod};

fn main() {
    let (stream, _) = synth_dataset(&SynthDatasetConfig::desk_default(1), 7)
        .unwrap()
        .remove(0);
    println!("input stream: {} events", stream.len());

    let cfg = ReprConfig::with_bins(4);
    for method in ReprMethod::ALL {
        let rep = convert(&stream, method, &cfg).unwrap();
        let nonzero = rep.data.iter().filter(|v| **v != 0.0).count();
        let max = rep.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = rep.data.iter().cloned().fold(f64::INFINITY, f64::min);
        println!(
            "{method:?}: {}x{}x{}, {nonzero} nonzero cells, values in [{min:.3}, {max:.3}]",
            rep.channels, rep.height, rep.width
        );
    }

    let est = convert(&stream, ReprMethod::Est, &cfg).unwrap();
    let bytes = write_dump(&est).unwrap();
    let back = read_dump(&bytes).unwrap();
    assert_eq!(
        (back.channels, back.height, back.width, back.method),
        (est.channels, est.height, est.width, est.method)
    );
    println!(
        "dump format: {} bytes (16-byte header + f32 payload), parses back",
        bytes.len()
    );
}
