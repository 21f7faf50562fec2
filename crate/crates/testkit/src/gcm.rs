//! AES-128-GCM per NIST SP 800-38D, 96-bit nonces, 128-bit tags.

use crate::aes::Aes128;

const R: u128 = 0xe100_0000_0000_0000_0000_0000_0000_0000;

fn gf128_mul(x: u128, y: u128) -> u128 {
    let mut z = 0u128;
    let mut v = x;
    for i in 0..128 {
        if (y >> (127 - i)) & 1 == 1 {
            z ^= v;
        }
        let lsb = v & 1;
        v >>= 1;
        if lsb == 1 {
            v ^= R;
        }
    }
    z
}

fn block_to_u128(b: &[u8]) -> u128 {
    let mut buf = [0u8; 16];
    buf[..b.len()].copy_from_slice(b);
    u128::from_be_bytes(buf)
}

fn ghash(h: u128, aad: &[u8], ct: &[u8]) -> u128 {
    let mut y = 0u128;
    for chunk in aad.chunks(16) {
        y = gf128_mul(y ^ block_to_u128(chunk), h);
    }
    for chunk in ct.chunks(16) {
        y = gf128_mul(y ^ block_to_u128(chunk), h);
    }
    let lens = ((aad.len() as u128 * 8) << 64) | (ct.len() as u128 * 8);
    gf128_mul(y ^ lens, h)
}

fn counter_block(nonce: &[u8; 12], ctr: u32) -> [u8; 16] {
    let mut block = [0u8; 16];
    block[..12].copy_from_slice(nonce);
    block[12..].copy_from_slice(&ctr.to_be_bytes());
    block
}

fn ctr_xor(aes: &Aes128, nonce: &[u8; 12], data: &mut [u8]) {
    // Counter starts at 2; counter 1 is reserved for the tag mask.
    for (i, chunk) in data.chunks_mut(16).enumerate() {
        let ks = aes.encrypt_block(&counter_block(nonce, 2 + i as u32));
        for (b, k) in chunk.iter_mut().zip(ks.iter()) {
            *b ^= k;
        }
    }
}

fn tag(aes: &Aes128, h: u128, nonce: &[u8; 12], aad: &[u8], ct: &[u8]) -> [u8; 16] {
    let s = ghash(h, aad, ct);
    let mask = aes.encrypt_block(&counter_block(nonce, 1));
    let mut t = s.to_be_bytes();
    for (b, m) in t.iter_mut().zip(mask.iter()) {
        *b ^= m;
    }
    t
}

pub fn gcm_seal(key: &[u8; 16], nonce: &[u8; 12], aad: &[u8], pt: &[u8]) -> Vec<u8> {
    let aes = Aes128::new(key);
    let h = u128::from_be_bytes(aes.encrypt_block(&[0u8; 16]));
    let mut out = pt.to_vec();
    ctr_xor(&aes, nonce, &mut out);
    let t = tag(&aes, h, nonce, aad, &out);
    out.extend_from_slice(&t);
    out
}

pub fn gcm_open(key: &[u8; 16], nonce: &[u8; 12], aad: &[u8], sealed: &[u8]) -> Option<Vec<u8>> {
    if sealed.len() < 16 {
        return None;
    }
    let (ct, t) = sealed.split_at(sealed.len() - 16);
    let aes = Aes128::new(key);
    let h = u128::from_be_bytes(aes.encrypt_block(&[0u8; 16]));
    let expect = tag(&aes, h, nonce, aad, ct);
    // Not constant time; oracle use only.
    if expect != t {
        return None;
    }
    let mut out = ct.to_vec();
    ctr_xor(&aes, nonce, &mut out);
    Some(out)
}
