//! MSB-first bit packing.

#[derive(Debug, Default, Clone)]
pub struct BitWriter {
    bytes: Vec<u8>,
    len: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity_bits(bits: usize) -> Self {
        Self {
            bytes: Vec::with_capacity(bits.div_ceil(8)),
            len: 0,
        }
    }

    pub fn push(&mut self, bit: bool) {
        let shift = 7 - (self.len % 8) as u32;
        if shift == 7 {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().expect("byte pushed above") |= 1 << shift;
        }
        self.len += 1;
    }

    pub fn extend<I: IntoIterator<Item = bool>>(&mut self, bits: I) {
        for b in bits {
            self.push(b);
        }
    }

    pub fn bit_len(&self) -> u64 {
        self.len
    }

    /// Packed bytes; the unused tail of the last byte is zero.
    pub fn into_bytes(self) -> (Vec<u8>, u64) {
        (self.bytes, self.len)
    }
}

#[inline]
pub fn get_bit(bytes: &[u8], index: u64) -> bool {
    bytes[(index / 8) as usize] >> (7 - (index % 8)) & 1 == 1
}

pub fn unpack_bits(bytes: &[u8], bit_len: u64) -> Vec<bool> {
    (0..bit_len).map(|i| get_bit(bytes, i)).collect()
}

pub fn pack_bits(bits: &[bool]) -> Vec<u8> {
    let mut w = BitWriter::with_capacity_bits(bits.len());
    w.extend(bits.iter().copied());
    w.into_bytes().0
}
