//! Snapshot export: CSV text and a compact binary format.
//!
//! Binary layout: the 8-byte magic `BWPK0001`, the point count as a
//! little-endian `u64`, then one `(x, re_psi, im_psi)` triple of
//! little-endian `f64` per grid point.

use num_complex::Complex64;

use super::grid::GridState;
use crate::io::format_f64;

pub const MAGIC: &[u8; 8] = b"BWPK0001";

/// CSV with columns `t,x,re_psi,im_psi,rho` for every snapshot in order.
pub fn snapshots_to_csv(states: &[GridState]) -> String {
    let mut s = String::from("t,x,re_psi,im_psi,rho\n");
    for st in states {
        let t = format_f64(st.t);
        for (j, z) in st.psi.iter().enumerate() {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                t,
                format_f64(st.grid.x(j)),
                format_f64(z.re),
                format_f64(z.im),
                format_f64(z.norm_sqr())
            ));
        }
    }
    s
}

pub fn to_binary(state: &GridState) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 24 * state.psi.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(state.psi.len() as u64).to_le_bytes());
    for (j, z) in state.psi.iter().enumerate() {
        out.extend_from_slice(&state.grid.x(j).to_le_bytes());
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

/// Decodes a binary snapshot into `(x, psi)` pairs.
pub fn from_binary(bytes: &[u8]) -> Option<Vec<(f64, Complex64)>> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return None;
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().ok()?) as usize;
    if bytes.len() != 16 + 24 * n {
        return None;
    }
    let f = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    Some(
        (0..n)
            .map(|i| {
                let o = 16 + 24 * i;
                (f(o), Complex64::new(f(o + 8), f(o + 16)))
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tdse::grid::{init_from_packet, Boundary, Grid1D};
    use crate::wavepacket::GaussianPacket;

    fn state() -> GridState {
        let g = Grid1D::new(-5.0, 5.0, 201, 1e-3, Boundary::Dirichlet).unwrap();
        init_from_packet(&g, &GaussianPacket::natural(0.0, 1.0, 0.5).unwrap()).unwrap()
    }

    #[test]
    fn binary_round_trip() {
        let s = state();
        let bytes = to_binary(&s);
        assert_eq!(&bytes[..8], b"BWPK0001");
        assert_eq!(bytes.len(), 16 + 24 * 201);
        let back = from_binary(&bytes).unwrap();
        for (j, (x, z)) in back.iter().enumerate() {
            assert_eq!(*x, s.grid.x(j));
            assert_eq!(*z, s.psi[j]);
        }
        assert!(from_binary(&bytes[..100]).is_none());
    }

    #[test]
    fn csv_layout() {
        let csv = snapshots_to_csv(&[state()]);
        assert!(csv.starts_with("t,x,re_psi,im_psi,rho\n0.0,-5.0,"));
        assert_eq!(csv.lines().count(), 202);
    }
}
