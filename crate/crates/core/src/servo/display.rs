use serde::{Deserialize, Serialize};

/// One 8x8 frame, row-major, top row first.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DotMatrixFrame {
    rows: [u8; 8],
}

impl DotMatrixFrame {
    /// Each byte is one row; bit 7 is the leftmost column.
    pub const fn from_rows(rows: [u8; 8]) -> Self {
        DotMatrixFrame { rows }
    }

    pub fn blank() -> Self {
        Self::default()
    }

    pub fn smile() -> Self {
        Self::from_rows([
            0b0011_1100,
            0b0100_0010,
            0b1010_0101,
            0b1000_0001,
            0b1010_0101,
            0b1001_1001,
            0b0100_0010,
            0b0011_1100,
        ])
    }

    pub fn neutral() -> Self {
        Self::from_rows([
            0b0011_1100,
            0b0100_0010,
            0b1010_0101,
            0b1000_0001,
            0b1000_0001,
            0b1011_1101,
            0b0100_0010,
            0b0011_1100,
        ])
    }

    pub fn cross() -> Self {
        Self::from_rows([
            0b1000_0001,
            0b0100_0010,
            0b0010_0100,
            0b0001_1000,
            0b0001_1000,
            0b0010_0100,
            0b0100_0010,
            0b1000_0001,
        ])
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.rows[row] & (0x80 >> col) != 0
    }

    pub fn set(&mut self, row: usize, col: usize, on: bool) {
        if on {
            self.rows[row] |= 0x80 >> col;
        } else {
            self.rows[row] &= !(0x80 >> col);
        }
    }

    /// 64 cells, row-major, 1 = lit.
    pub fn bits(&self) -> Vec<u8> {
        (0..64).map(|i| u8::from(self.get(i / 8, i % 8))).collect()
    }

    pub fn from_bits(bits: &[u8]) -> Option<Self> {
        if bits.len() != 64 || bits.iter().any(|b| *b > 1) {
            return None;
        }
        let mut frame = Self::blank();
        for (i, b) in bits.iter().enumerate() {
            frame.set(i / 8, i % 8, *b == 1);
        }
        Some(frame)
    }
}

/// Display stand-in that remembers the last frame for readback.
#[derive(Clone, Debug, Default)]
pub struct SimulatedDisplay {
    current: DotMatrixFrame,
    frames_shown: u64,
}

impl SimulatedDisplay {
    pub fn show(&mut self, frame: DotMatrixFrame) {
        self.current = frame;
        self.frames_shown += 1;
    }

    pub fn current(&self) -> DotMatrixFrame {
        self.current
    }

    pub fn frames_shown(&self) -> u64 {
        self.frames_shown
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn readback() {
        let mut d = SimulatedDisplay::default();
        d.show(DotMatrixFrame::blank());
        assert!(d.current().bits().iter().all(|b| *b == 0));
        d.show(DotMatrixFrame::smile());
        assert_eq!(d.current(), DotMatrixFrame::smile());
        d.show(DotMatrixFrame::cross());
        assert_eq!(d.current(), DotMatrixFrame::cross());
        assert_eq!(d.frames_shown(), 3);
    }

    #[test]
    fn bits_round_trip() {
        for f in [DotMatrixFrame::smile(), DotMatrixFrame::cross(), DotMatrixFrame::neutral()] {
            let bits = f.bits();
            assert_eq!(bits.len(), 64);
            assert_eq!(DotMatrixFrame::from_bits(&bits), Some(f));
        }
        assert!(DotMatrixFrame::from_bits(&[0; 63]).is_none());
        assert!(DotMatrixFrame::cross().get(0, 0) && DotMatrixFrame::cross().get(0, 7));
    }
}
