use std::io::{self, Write};

use crate::matrix::SpikeMatrix;

/// Plain PBM lines should stay within 70 characters.
const PBM_LINE: usize = 70;

/// Writes a plain (P1) PBM raster: one image row per pixel index, one column
/// per bin, black (`1`) where the pixel spiked.
pub fn render_raster<W: Write>(m: &SpikeMatrix, mut sink: W) -> io::Result<()> {
    let label = m
        .label()
        .map_or_else(|| "none".to_string(), |l| l.to_string());
    writeln!(sink, "P1")?;
    writeln!(sink, "# image_index={} label={}", m.image_index(), label)?;
    writeln!(sink, "{} {}", m.bins(), m.pixels())?;
    let mut line = Vec::with_capacity(PBM_LINE + 1);
    for pixel in 0..m.pixels() {
        for bin in 0..m.bins() {
            line.push(if m.get(pixel, bin) { b'1' } else { b'0' });
            if line.len() == PBM_LINE {
                line.push(b'\n');
                sink.write_all(&line)?;
                line.clear();
            }
        }
        if !line.is_empty() {
            line.push(b'\n');
            sink.write_all(&line)?;
            line.clear();
        }
    }
    sink.flush()
}
