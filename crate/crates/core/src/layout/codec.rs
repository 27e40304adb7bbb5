//! Bit-packed semantic messages.
//!
//! Wire format, big-endian bit order (the first bit of a record is the most
//! significant bit of its first byte):
//!
//! ```text
//! record := class:2 | q1:5 | q2:5 | q3:5 | q4:5      (22 bits)
//! payload := record* | zero padding to the next byte boundary
//! ```
//!
//! `class` stores `code - 1`. Each `q` is `floor(b * 32)` clamped to
//! `[0, 31]`; decoding maps it back to the cell center `(q + 0.5) / 32`.
//! The record count is implied by the payload length: a payload of `n`
//! bytes carries `floor(8n / 22)` records, and `n` must equal
//! `ceil(22 M / 8)` with all padding bits zero.

use serde::{Deserialize, Serialize};

use super::{BoundingBox, SceneAnnotation, VehicleClass, VehicleRecord};
use crate::error::{Error, Result};

/// Bits per vehicle record: 2 class bits plus four 5-bit coordinates.
pub const BITS_PER_VEHICLE: usize = 22;
/// Quantization levels per coordinate.
pub const COORD_LEVELS: u32 = 32;
/// Largest number of vehicles one message may carry.
pub const MAX_VEHICLES: usize = 64;

/// A quantized, bit-packed scene layout: the unit of transmission.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SemanticMessage {
    payload: Vec<u8>,
    vehicle_count: usize,
    size_bits: usize,
}

impl SemanticMessage {
    /// Rebuilds a message from a raw payload, validating framing.
    pub fn from_bytes(payload: Vec<u8>) -> Result<Self> {
        let count = payload.len() * 8 / BITS_PER_VEHICLE;
        Self::from_parts(payload, count * BITS_PER_VEHICLE)
    }

    /// Rebuilds a message from a payload and an explicit bit length.
    pub fn from_parts(payload: Vec<u8>, size_bits: usize) -> Result<Self> {
        if size_bits % BITS_PER_VEHICLE != 0 {
            return Err(Error::Decode(format!(
                "bit length {size_bits} is not a multiple of {BITS_PER_VEHICLE}"
            )));
        }
        let expected_bytes = size_bits.div_ceil(8);
        if payload.len() != expected_bytes {
            return Err(Error::Decode(format!(
                "payload has {} bytes, {size_bits} bits need {expected_bytes}",
                payload.len()
            )));
        }
        let vehicle_count = size_bits / BITS_PER_VEHICLE;
        if vehicle_count > MAX_VEHICLES {
            return Err(Error::Decode(format!("{vehicle_count} records exceed the {MAX_VEHICLES} cap")));
        }
        let pad = expected_bytes * 8 - size_bits;
        if pad > 0 {
            let last = payload[expected_bytes - 1];
            if last & ((1u8 << pad) - 1) != 0 {
                return Err(Error::Decode("nonzero padding bits".into()));
            }
        }
        Ok(SemanticMessage { payload, vehicle_count, size_bits })
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn into_payload(self) -> Vec<u8> {
        self.payload
    }

    pub fn vehicle_count(&self) -> usize {
        self.vehicle_count
    }

    /// Packet size `L = 22 M` in bits (padding excluded).
    pub fn size_bits(&self) -> usize {
        self.size_bits
    }

    pub fn is_empty(&self) -> bool {
        self.vehicle_count == 0
    }
}

struct BitWriter {
    bytes: Vec<u8>,
    bit_len: usize,
}

impl BitWriter {
    fn with_capacity(bits: usize) -> Self {
        BitWriter { bytes: Vec::with_capacity(bits.div_ceil(8)), bit_len: 0 }
    }

    fn push(&mut self, value: u32, width: u32) {
        for i in (0..width).rev() {
            if self.bit_len % 8 == 0 {
                self.bytes.push(0);
            }
            if (value >> i) & 1 == 1 {
                let byte = self.bit_len / 8;
                self.bytes[byte] |= 0x80 >> (self.bit_len % 8);
            }
            self.bit_len += 1;
        }
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl BitReader<'_> {
    fn read(&mut self, width: u32) -> u32 {
        let mut out = 0u32;
        for _ in 0..width {
            let bit = (self.bytes[self.pos / 8] >> (7 - self.pos % 8)) & 1;
            out = (out << 1) | bit as u32;
            self.pos += 1;
        }
        out
    }
}

fn quantize(coord: f64) -> u32 {
    let q = (coord * COORD_LEVELS as f64).floor();
    q.clamp(0.0, (COORD_LEVELS - 1) as f64) as u32
}

fn dequantize(q: u32) -> f64 {
    (q as f64 + 0.5) / COORD_LEVELS as f64
}

/// Packs a scene into a semantic message, vehicles in scene order.
pub fn encode_message(scene: &SceneAnnotation) -> Result<SemanticMessage> {
    let count = scene.len();
    if count > MAX_VEHICLES {
        return Err(Error::TooManyVehicles { count, max: MAX_VEHICLES });
    }
    let size_bits = count * BITS_PER_VEHICLE;
    let mut w = BitWriter::with_capacity(size_bits);
    for v in scene.vehicles() {
        w.push(u32::from(v.class.code() - 1), 2);
        for c in v.bbox.coords() {
            w.push(quantize(c), 5);
        }
    }
    debug_assert_eq!(w.bit_len, size_bits);
    Ok(SemanticMessage { payload: w.bytes, vehicle_count: count, size_bits })
}

/// Unpacks a message. Decoded vehicles get synthetic track ids `0..M` in
/// payload order and coordinates at quantization cell centers.
pub fn decode_message(msg: &SemanticMessage) -> Result<SceneAnnotation> {
    if msg.size_bits % BITS_PER_VEHICLE != 0 || msg.payload.len() != msg.size_bits.div_ceil(8) {
        return Err(Error::Decode("inconsistent message framing".into()));
    }
    let mut r = BitReader { bytes: &msg.payload, pos: 0 };
    let mut vehicles = Vec::with_capacity(msg.vehicle_count);
    for id in 0..msg.vehicle_count {
        let class = VehicleClass::from_code(r.read(2) as u8 + 1)?;
        let q: [u32; 4] = std::array::from_fn(|_| r.read(5));
        let bbox = BoundingBox::new(dequantize(q[0]), dequantize(q[1]), dequantize(q[2]), dequantize(q[3]))
            .map_err(|e| Error::Decode(format!("record {id}: {e}")))?;
        vehicles.push(VehicleRecord::new(id as u32, class, bbox));
    }
    SceneAnnotation::new(0, vehicles)
}
