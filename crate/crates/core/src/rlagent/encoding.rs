//! Binary state encoding: the queue length and the UAV count are fed to the
//! network as little-endian bit vectors rather than raw integers.

pub const QUEUE_BITS: usize = 15;
pub const UAV_BITS: usize = 10;
pub const INPUT_SIZE: usize = QUEUE_BITS + UAV_BITS;

pub type EncodedState = [f64; INPUT_SIZE];

/// Queue bits (LSB first) followed by UAV-count bits (LSB first). Values that
/// do not fit are clamped to the all-ones pattern.
pub fn encode_state(uavs: usize, queue: usize) -> EncodedState {
    let mut out = [0.0; INPUT_SIZE];
    let q = clamp(queue, QUEUE_BITS, "queue length");
    let n = clamp(uavs, UAV_BITS, "UAV count");
    for (i, bit) in out[..QUEUE_BITS].iter_mut().enumerate() {
        *bit = ((q >> i) & 1) as f64;
    }
    for (i, bit) in out[QUEUE_BITS..].iter_mut().enumerate() {
        *bit = ((n >> i) & 1) as f64;
    }
    out
}

/// Inverse of [`encode_state`]: returns `(uavs, queue)`.
pub fn decode_state(x: &EncodedState) -> (usize, usize) {
    let read = |bits: &[f64]| {
        bits.iter()
            .enumerate()
            .map(|(i, &b)| (b > 0.5) as usize * (1 << i))
            .sum::<usize>()
    };
    (read(&x[QUEUE_BITS..]), read(&x[..QUEUE_BITS]))
}

fn clamp(value: usize, bits: usize, what: &str) -> usize {
    let max = (1 << bits) - 1;
    if value > max {
        log::warn!("{what} {value} does not fit in {bits} bits, clamping to {max}");
        max
    } else {
        value
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(x: &[f64]) -> String {
        x.iter().map(|&b| if b > 0.5 { '1' } else { '0' }).collect()
    }

    #[test]
    fn examples() {
        assert!(encode_state(0, 0).iter().all(|&b| b == 0.0));
        let x = encode_state(3, 5);
        assert_eq!(bits(&x[..QUEUE_BITS]), "101000000000000");
        assert_eq!(bits(&x[QUEUE_BITS..]), "1100000000");
        let full = encode_state(0, (1 << 15) - 1);
        assert!(full[..QUEUE_BITS].iter().all(|&b| b == 1.0));
    }

    #[test]
    fn overflow_clamps() {
        assert_eq!(decode_state(&encode_state(5000, 1 << 20)), (1023, 32767));
    }

    proptest::proptest! {
        #[test]
        fn round_trip(n in 0usize..1024, q in 0usize..32768) {
            proptest::prop_assert_eq!(decode_state(&encode_state(n, q)), (n, q));
        }
    }
}
