//! AES-128 block encryption per FIPS 197. Encrypt-only: GCM needs no
//! inverse cipher. The S-box is derived from the field inverse at
//! construction time rather than transcribed, so the FIPS test vector in
//! lib.rs genuinely anchors the whole table.

fn gf_mul(mut a: u8, mut b: u8) -> u8 {
    let mut acc = 0u8;
    while b != 0 {
        if b & 1 != 0 {
            acc ^= a;
        }
        let hi = a & 0x80;
        a <<= 1;
        if hi != 0 {
            a ^= 0x1b;
        }
        b >>= 1;
    }
    acc
}

fn gf_inv(a: u8) -> u8 {
    if a == 0 {
        return 0;
    }
    // a^254 = a^-1 in GF(2^8).
    let mut result = 1u8;
    let mut base = a;
    let mut exp = 254u32;
    while exp > 0 {
        if exp & 1 != 0 {
            result = gf_mul(result, base);
        }
        base = gf_mul(base, base);
        exp >>= 1;
    }
    result
}

fn build_sbox() -> [u8; 256] {
    let mut sbox = [0u8; 256];
    for (x, slot) in sbox.iter_mut().enumerate() {
        let b = gf_inv(x as u8);
        *slot = b
            ^ b.rotate_left(1)
            ^ b.rotate_left(2)
            ^ b.rotate_left(3)
            ^ b.rotate_left(4)
            ^ 0x63;
    }
    sbox
}

pub struct Aes128 {
    round_keys: [[u8; 16]; 11],
    sbox: [u8; 256],
}

impl Aes128 {
    pub fn new(key: &[u8; 16]) -> Self {
        let sbox = build_sbox();
        let mut round_keys = [[0u8; 16]; 11];
        round_keys[0] = *key;
        let mut rcon = 1u8;
        for round in 1..11 {
            let prev = round_keys[round - 1];
            let mut word = [prev[12], prev[13], prev[14], prev[15]];
            word.rotate_left(1);
            for b in word.iter_mut() {
                *b = sbox[*b as usize];
            }
            word[0] ^= rcon;
            rcon = gf_mul(rcon, 2);
            let mut rk = [0u8; 16];
            for i in 0..4 {
                rk[i] = prev[i] ^ word[i];
            }
            for i in 4..16 {
                rk[i] = prev[i] ^ rk[i - 4];
            }
            round_keys[round] = rk;
        }
        Aes128 { round_keys, sbox }
    }

    fn sub_bytes(&self, state: &mut [u8; 16]) {
        for b in state.iter_mut() {
            *b = self.sbox[*b as usize];
        }
    }

    fn shift_rows(state: &mut [u8; 16]) {
        // State is column-major: byte index = 4*col + row.
        let s = *state;
        for row in 1..4 {
            for col in 0..4 {
                state[4 * col + row] = s[4 * ((col + row) % 4) + row];
            }
        }
    }

    fn mix_columns(state: &mut [u8; 16]) {
        for col in 0..4 {
            let c = &mut state[4 * col..4 * col + 4];
            let (a0, a1, a2, a3) = (c[0], c[1], c[2], c[3]);
            c[0] = gf_mul(a0, 2) ^ gf_mul(a1, 3) ^ a2 ^ a3;
            c[1] = a0 ^ gf_mul(a1, 2) ^ gf_mul(a2, 3) ^ a3;
            c[2] = a0 ^ a1 ^ gf_mul(a2, 2) ^ gf_mul(a3, 3);
            c[3] = gf_mul(a0, 3) ^ a1 ^ a2 ^ gf_mul(a3, 2);
        }
    }

    fn add_round_key(state: &mut [u8; 16], rk: &[u8; 16]) {
        for (b, k) in state.iter_mut().zip(rk.iter()) {
            *b ^= k;
        }
    }

    pub fn encrypt_block(&self, block: &[u8; 16]) -> [u8; 16] {
        let mut state = *block;
        Self::add_round_key(&mut state, &self.round_keys[0]);
        for round in 1..10 {
            self.sub_bytes(&mut state);
            Self::shift_rows(&mut state);
            Self::mix_columns(&mut state);
            Self::add_round_key(&mut state, &self.round_keys[round]);
        }
        self.sub_bytes(&mut state);
        Self::shift_rows(&mut state);
        Self::add_round_key(&mut state, &self.round_keys[10]);
        state
    }
}
