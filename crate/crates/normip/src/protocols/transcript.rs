use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::quantize::Quantizer;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Party {
    Alice,
    Bob,
}

impl Party {
    pub fn other(self) -> Party {
        match self {
            Party::Alice => Party::Bob,
            Party::Bob => Party::Alice,
        }
    }
}

/// Bits packed most-significant first.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitString {
    bytes: Vec<u8>,
    len: usize,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Append the low `width` bits of `value`, most significant first.
    pub fn push(&mut self, value: u64, width: u32) {
        debug_assert!(width == 64 || value >> width == 0, "value {value} does not fit in {width} bits");
        for k in (0..width).rev() {
            let bit = (value >> k) & 1;
            if self.len.is_multiple_of(8) {
                self.bytes.push(0);
            }
            if bit == 1 {
                let last = self.bytes.len() - 1;
                self.bytes[last] |= 0x80 >> (self.len % 8);
            }
            self.len += 1;
        }
    }

    /// Read `width` bits starting at bit `pos`.
    pub fn read(&self, pos: usize, width: u32) -> u64 {
        let mut v = 0u64;
        for k in 0..width as usize {
            let i = pos + k;
            let bit = (self.bytes[i / 8] >> (7 - i % 8)) & 1;
            v = (v << 1) | bit as u64;
        }
        v
    }

    pub fn to_hex(&self) -> String {
        self.bytes.iter().fold(String::with_capacity(2 * self.bytes.len()), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub sender: Party,
    pub label: String,
    pub payload: BitString,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantizer: Option<Quantizer>,
}

/// Everything that crossed the channel during one execution.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    messages: Vec<Message>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, m: Message) {
        self.messages.push(m);
    }

    pub fn append(&mut self, other: Transcript) {
        self.messages.extend(other.messages);
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    /// Exact sum of payload lengths.
    pub fn total_bits(&self) -> u64 {
        self.messages.iter().map(|m| m.payload.len() as u64).sum()
    }

    pub fn senders(&self) -> Vec<Party> {
        let mut s: Vec<Party> = self.messages.iter().map(|m| m.sender).collect();
        s.dedup();
        s
    }

    /// Relabel every message with the other party.
    pub fn swap_parties(&mut self) {
        self.messages.iter_mut().for_each(|m| m.sender = m.sender.other());
    }

    /// One line per message: sender, label, bit length, hex payload.
    pub fn to_debug_string(&self) -> String {
        let mut s = String::new();
        for m in &self.messages {
            let _ = writeln!(s, "{:?} {} {} {}", m.sender, m.label, m.payload.len(), m.payload.to_hex());
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bits_round_trip() {
        let mut b = BitString::new();
        b.push(0b101, 3);
        b.push(0xABCD, 16);
        b.push(1, 1);
        assert_eq!(b.len(), 20);
        assert_eq!(b.read(0, 3), 0b101);
        assert_eq!(b.read(3, 16), 0xABCD);
        assert_eq!(b.read(19, 1), 1);
        assert_eq!(b.to_hex(), "b579b0");
    }

    #[test]
    fn totals_and_swaps() {
        let mut t = Transcript::new();
        let mut p = BitString::new();
        p.push(3, 5);
        t.push(Message { sender: Party::Alice, label: "x".into(), payload: p.clone(), quantizer: None });
        t.push(Message { sender: Party::Alice, label: "y".into(), payload: p, quantizer: None });
        assert_eq!(t.total_bits(), 10);
        assert_eq!(t.senders(), vec![Party::Alice]);
        t.swap_parties();
        assert_eq!(t.senders(), vec![Party::Bob]);
        assert_eq!(t.to_debug_string(), "Bob x 5 18\nBob y 5 18\n");
    }
}
