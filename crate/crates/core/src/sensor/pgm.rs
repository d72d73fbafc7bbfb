//! Binary 16-bit PGM export of observations.
//!
//! Depth is stored in millimeters; `0` marks a dropped pixel and `65535` a
//! ray that hit nothing within range. Instance maps store `id + 1`, with `0`
//! for pixels without an instance.

use super::render::Observation;

pub const NO_DATA: u16 = 0;
pub const NO_HIT: u16 = u16::MAX;

fn pgm16(width: usize, height: usize, values: impl Iterator<Item = u16>) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    for v in values {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

pub fn depth_pgm(obs: &Observation) -> Vec<u8> {
    pgm16(
        obs.width,
        obs.height,
        obs.depth.iter().map(|&d| {
            if d.is_nan() {
                NO_DATA
            } else if d.is_infinite() {
                NO_HIT
            } else {
                (d * 1000.0).round().clamp(1.0, (NO_HIT - 1) as f64) as u16
            }
        }),
    )
}

pub fn instance_pgm(obs: &Observation) -> Vec<u8> {
    pgm16(
        obs.width,
        obs.height,
        obs.instance.iter().map(|i| i.map_or(0, |id| (id + 1).min(u16::MAX as u32) as u16)),
    )
}

/// Parses a 16-bit PGM written by this module into `(width, height, values)`.
pub fn read_pgm16(bytes: &[u8]) -> Option<(usize, usize, Vec<u16>)> {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return None;
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).ok()?.to_string());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "65535" {
        return None;
    }
    let w: usize = fields[1].parse().ok()?;
    let h: usize = fields[2].parse().ok()?;
    let body = bytes.get(pos..pos + 2 * w * h)?;
    Some((w, h, body.chunks(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;
    use crate::scene::GridDims;
    use crate::sensor::Viewpoint;

    #[test]
    fn round_trip_encodings() {
        let obs = Observation {
            viewpoint: Viewpoint::look_at(Point3::origin(), Point3::new(1.0, 0.0, 0.0)),
            dims: GridDims::new(2, 2, 2, 0.1, Point3::origin()).unwrap(),
            width: 3,
            height: 1,
            depth: vec![0.5, f64::INFINITY, f64::NAN],
            instance: vec![Some(2), None, None],
            hit_voxel: vec![Some(0), None, None],
        };
        let (w, h, d) = read_pgm16(&depth_pgm(&obs)).unwrap();
        assert_eq!((w, h), (3, 1));
        assert_eq!(d, vec![500, NO_HIT, NO_DATA]);
        let (_, _, ids) = read_pgm16(&instance_pgm(&obs)).unwrap();
        assert_eq!(ids, vec![3, 0, 0]);
    }
}
