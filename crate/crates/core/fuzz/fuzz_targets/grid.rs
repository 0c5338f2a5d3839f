#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // header line, then little-endian samples
    let split = data.iter().position(|b| *b == b'\n').unwrap_or(data.len());
    if let Ok(header) = std::str::from_utf8(&data[..split]) {
        let _ = shardflow::io::parse_grid(header, data.get(split + 1..).unwrap_or(&[]));
    }
});
