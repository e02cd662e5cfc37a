//! 8-byte frame encoding for the standard and EcoTIM messages.
//!
//! Multi-byte fields are little-endian. Bytes not carrying a field are 0xFF.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PGN_GROUND_SPEED: u32 = 65096;
pub const PGN_REAR_HITCH: u32 = 65094;
pub const PGN_TIM_SPEED: u32 = 65098;
/// Placeholder in the Proprietary A range until a PGN is assigned.
pub const PGN_ECOTIM_DEFAULT: u32 = 0xEF00;

pub const CAN_BITRATE: f64 = 250_000.0;
/// Extended-ID data frame with 8 data bytes, including interframe space.
pub const BITS_PER_FRAME_DEFAULT: u32 = 131;

const NA: u8 = 0xFF;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("{field} = {value} outside encodable range [{min}, {max}]")]
    OutOfRange { field: &'static str, value: f64, min: f64, max: f64 },
    #[error("expected PGN {expected}, got {got}")]
    PgnMismatch { expected: u32, got: u32 },
    #[error("PGN {0} does not fit 18 bits")]
    BadPgn(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Frame {
    pub pgn: u32,
    pub data: [u8; 8],
}

impl Frame {
    pub fn new(pgn: u32, data: [u8; 8]) -> Result<Self, CodecError> {
        if pgn >= 1 << 18 {
            return Err(CodecError::BadPgn(pgn));
        }
        Ok(Self { pgn, data })
    }

    pub fn to_hex(&self) -> String {
        self.data.iter().map(|b| format!("{b:02X}")).collect()
    }
}

/// Efficiency broadcast, all fields in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyBroadcast {
    pub eta_tractor: f64,
    /// Percent per (m/s).
    pub deta_dv: f64,
    pub eta_engine_rel: f64,
    pub eta_transmission: f64,
    pub eta_tractive: f64,
    pub load_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedAccelCommand {
    /// m/s.
    pub speed: f64,
    /// m/s², `None` for a speed-only command.
    pub accel: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundSpeed {
    /// m/s.
    pub speed: f64,
    /// m.
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HitchState {
    /// Percent of full travel.
    pub position: f64,
    /// Draft force [N], positive when the implement pulls back.
    pub draft: f64,
}

/// Resolution of each scaled field.
pub mod res {
    pub const ETA: f64 = 0.01;
    pub const DETA: f64 = 0.01;
    pub const DIAG: f64 = 0.4;
    pub const SPEED: f64 = 0.001;
    pub const ACCEL: f64 = 0.001;
    pub const DISTANCE: f64 = 0.001;
    pub const HITCH_POS: f64 = 0.4;
    pub const DRAFT: f64 = 10.0;
    pub const DRAFT_OFFSET: f64 = -320_000.0;
}

fn check(field: &'static str, value: f64, min: f64, max: f64) -> Result<f64, CodecError> {
    if value.is_finite() && value >= min && value <= max {
        Ok(value)
    } else {
        Err(CodecError::OutOfRange { field, value, min, max })
    }
}

fn expect_pgn(frame: &Frame, pgn: u32) -> Result<(), CodecError> {
    if frame.pgn != pgn {
        return Err(CodecError::PgnMismatch { expected: pgn, got: frame.pgn });
    }
    Ok(())
}

fn u16_at(d: &[u8; 8], i: usize) -> u16 {
    u16::from_le_bytes([d[i], d[i + 1]])
}

/// Message codec with a configurable EcoTIM PGN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Codec {
    pub efficiency_pgn: u32,
    pub bits_per_frame: u32,
}

impl Default for Codec {
    fn default() -> Self {
        Self { efficiency_pgn: PGN_ECOTIM_DEFAULT, bits_per_frame: BITS_PER_FRAME_DEFAULT }
    }
}

impl Codec {
    pub fn encode_efficiency(&self, m: &EfficiencyBroadcast) -> Result<Frame, CodecError> {
        let eta = check("eta_tractor", m.eta_tractor, 0.0, 100.0)?;
        let deta = check("deta_dv", m.deta_dv, i16::MIN as f64 * res::DETA, i16::MAX as f64 * res::DETA)?;
        let mut d = [NA; 8];
        d[0..2].copy_from_slice(&((eta / res::ETA).round() as u16).to_le_bytes());
        d[2..4].copy_from_slice(&((deta / res::DETA).round() as i16).to_le_bytes());
        let diags = [
            ("eta_engine_rel", m.eta_engine_rel),
            ("eta_transmission", m.eta_transmission),
            ("eta_tractive", m.eta_tractive),
            ("load_fraction", m.load_fraction),
        ];
        for (i, (name, v)) in diags.into_iter().enumerate() {
            let v = check(name, v, 0.0, 100.0)?;
            d[4 + i] = (v / res::DIAG).round() as u8;
        }
        Frame::new(self.efficiency_pgn, d)
    }

    pub fn decode_efficiency(&self, f: &Frame) -> Result<EfficiencyBroadcast, CodecError> {
        expect_pgn(f, self.efficiency_pgn)?;
        let d = &f.data;
        Ok(EfficiencyBroadcast {
            eta_tractor: u16_at(d, 0) as f64 * res::ETA,
            deta_dv: i16::from_le_bytes([d[2], d[3]]) as f64 * res::DETA,
            eta_engine_rel: d[4] as f64 * res::DIAG,
            eta_transmission: d[5] as f64 * res::DIAG,
            eta_tractive: d[6] as f64 * res::DIAG,
            load_fraction: d[7] as f64 * res::DIAG,
        })
    }

    /// Speed in bytes 0-1; acceleration in the otherwise reserved bytes 2-3.
    /// 0xFFFF in bytes 2-3 means no acceleration, so the raw value -1 is sent as 0.
    pub fn encode_speed_accel(&self, m: &SpeedAccelCommand) -> Result<Frame, CodecError> {
        let v = check("speed", m.speed, 0.0, 0xFAFF as f64 * res::SPEED)?;
        let mut d = [NA; 8];
        d[0..2].copy_from_slice(&((v / res::SPEED).round() as u16).to_le_bytes());
        if let Some(a) = m.accel {
            let a = check("accel", a, -8.0, 8.0)?;
            let mut raw = (a / res::ACCEL).round() as i16;
            if raw == -1 {
                raw = 0;
            }
            d[2..4].copy_from_slice(&raw.to_le_bytes());
        }
        Frame::new(PGN_TIM_SPEED, d)
    }

    pub fn decode_speed_accel(&self, f: &Frame) -> Result<SpeedAccelCommand, CodecError> {
        expect_pgn(f, PGN_TIM_SPEED)?;
        let d = &f.data;
        let accel = match u16_at(d, 2) {
            0xFFFF => None,
            _ => Some(i16::from_le_bytes([d[2], d[3]]) as f64 * res::ACCEL),
        };
        Ok(SpeedAccelCommand { speed: u16_at(d, 0) as f64 * res::SPEED, accel })
    }

    pub fn encode_ground_speed(&self, m: &GroundSpeed) -> Result<Frame, CodecError> {
        let v = check("speed", m.speed, 0.0, 0xFAFF as f64 * res::SPEED)?;
        let x = check("distance", m.distance, 0.0, 0xFAFF_FFFFu32 as f64 * res::DISTANCE)?;
        let mut d = [NA; 8];
        d[0..2].copy_from_slice(&((v / res::SPEED).round() as u16).to_le_bytes());
        d[2..6].copy_from_slice(&((x / res::DISTANCE).round() as u32).to_le_bytes());
        Frame::new(PGN_GROUND_SPEED, d)
    }

    pub fn decode_ground_speed(&self, f: &Frame) -> Result<GroundSpeed, CodecError> {
        expect_pgn(f, PGN_GROUND_SPEED)?;
        let d = &f.data;
        Ok(GroundSpeed {
            speed: u16_at(d, 0) as f64 * res::SPEED,
            distance: u32::from_le_bytes([d[2], d[3], d[4], d[5]]) as f64 * res::DISTANCE,
        })
    }

    pub fn encode_hitch(&self, m: &HitchState) -> Result<Frame, CodecError> {
        let p = check("position", m.position, 0.0, 100.0)?;
        let max_draft = 0xFAFF as f64 * res::DRAFT + res::DRAFT_OFFSET;
        let f = check("draft", m.draft, res::DRAFT_OFFSET, max_draft)?;
        let mut d = [NA; 8];
        d[0] = (p / res::HITCH_POS).round() as u8;
        d[2..4].copy_from_slice(&(((f - res::DRAFT_OFFSET) / res::DRAFT).round() as u16).to_le_bytes());
        Frame::new(PGN_REAR_HITCH, d)
    }

    pub fn decode_hitch(&self, f: &Frame) -> Result<HitchState, CodecError> {
        expect_pgn(f, PGN_REAR_HITCH)?;
        let d = &f.data;
        Ok(HitchState {
            position: d[0] as f64 * res::HITCH_POS,
            draft: u16_at(d, 2) as f64 * res::DRAFT + res::DRAFT_OFFSET,
        })
    }

    pub fn bus_load(&self, frames_per_second: f64) -> f64 {
        bus_load(frames_per_second, self.bits_per_frame)
    }
}

/// Fraction of the 250 kbit/s bus used by `frames_per_second` frames.
pub fn bus_load(frames_per_second: f64, bits_per_frame: u32) -> f64 {
    frames_per_second.max(0.0) * bits_per_frame as f64 / CAN_BITRATE
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eff(eta: f64, deta: f64) -> EfficiencyBroadcast {
        EfficiencyBroadcast {
            eta_tractor: eta,
            deta_dv: deta,
            eta_engine_rel: 0.0,
            eta_transmission: 0.0,
            eta_tractive: 0.0,
            load_fraction: 0.0,
        }
    }

    #[test]
    fn zero_efficiency_frame() {
        let f = Codec::default().encode_efficiency(&eff(0.0, 0.0)).unwrap();
        assert_eq!(f.data, [0; 8]);
    }

    #[test]
    fn eta_round_trip() {
        let c = Codec::default();
        let f = c.encode_efficiency(&eff(38.25, -1.5)).unwrap();
        assert_eq!(u16_at(&f.data, 0), 3825);
        let m = c.decode_efficiency(&f).unwrap();
        assert!((m.eta_tractor - 38.25).abs() < 1e-9);
        assert!((m.deta_dv + 1.5).abs() < 1e-9);
        assert!(c.encode_efficiency(&eff(100.005, 0.0)).is_err());
    }

    #[test]
    fn golden_frames() {
        let c = Codec::default();
        let m = EfficiencyBroadcast {
            eta_tractor: 38.25,
            deta_dv: -1.5,
            eta_engine_rel: 90.0,
            eta_transmission: 84.0,
            eta_tractive: 65.2,
            load_fraction: 74.0,
        };
        assert_eq!(c.encode_efficiency(&m).unwrap().to_hex(), "F10E6AFFE1D2A3B9");
        let cmd = SpeedAccelCommand { speed: 2.222, accel: Some(-0.5) };
        assert_eq!(c.encode_speed_accel(&cmd).unwrap().to_hex(), "AE080CFEFFFFFFFF");
        let legacy = SpeedAccelCommand { speed: 2.222, accel: None };
        assert_eq!(c.encode_speed_accel(&legacy).unwrap().to_hex(), "AE08FFFFFFFFFFFF");
    }

    #[test]
    fn speed_accel_examples() {
        let c = Codec::default();
        let f = c.encode_speed_accel(&SpeedAccelCommand { speed: 2.222, accel: Some(-0.5) }).unwrap();
        assert_eq!(u16_at(&f.data, 0), 2222);
        assert_eq!(i16::from_le_bytes([f.data[2], f.data[3]]), -500);
        let m = c.decode_speed_accel(&f).unwrap();
        assert!((m.speed - 2.222).abs() < 1e-12);
        assert!((m.accel.unwrap() + 0.5).abs() < 1e-12);
        assert!(c.encode_speed_accel(&SpeedAccelCommand { speed: 1.0, accel: Some(8.5) }).is_err());
    }

    #[test]
    fn minus_one_lsb_does_not_alias_absent() {
        let c = Codec::default();
        let f = c.encode_speed_accel(&SpeedAccelCommand { speed: 1.0, accel: Some(-0.001) }).unwrap();
        assert_eq!(c.decode_speed_accel(&f).unwrap().accel, Some(0.0));
    }

    #[test]
    fn pgn_mismatch() {
        let c = Codec::default();
        let f = c.encode_speed_accel(&SpeedAccelCommand { speed: 1.0, accel: None }).unwrap();
        assert!(matches!(c.decode_efficiency(&f), Err(CodecError::PgnMismatch { .. })));
    }

    #[test]
    fn hitch_and_ground_speed() {
        let c = Codec::default();
        let h = c.decode_hitch(&c.encode_hitch(&HitchState { position: 40.0, draft: 21_916.0 }).unwrap()).unwrap();
        assert!((h.draft - 21_920.0).abs() < 1e-9);
        let g = c
            .decode_ground_speed(&c.encode_ground_speed(&GroundSpeed { speed: 2.5, distance: 512.345 }).unwrap())
            .unwrap();
        assert!((g.distance - 512.345).abs() < 1e-9);
    }

    #[test]
    fn bus_load_examples() {
        assert_eq!(bus_load(0.0, 131), 0.0);
        assert!((bus_load(20.0, 131) - 0.01048).abs() < 1e-12);
        assert!(bus_load(10.0, 131) < 0.01);
        let sat = bus_load(1861.0, 131);
        assert!((sat - 1861.0 * 131.0 / 250_000.0).abs() < 1e-12);
        assert!((sat - 1.0).abs() < 0.03);
    }
}
