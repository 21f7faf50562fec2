//! Lease state machine vs the reference model in tests/common: bounded
//! exhaustive enumeration over several (capacity, duration) shapes plus
//! long randomized walks with bogus tokens and large clock jumps.

mod common;

use minidrm::server::lease::{LeaseError, LeaseState};
use minidrm_core::types::DeviceId;

#[test]
fn exhaustive_equivalence_small_shapes() {
    // Every reachable canonical state and every applicable operation, for
    // a spread of pool shapes. Divergence panics inside the driver.
    let mut total = 0;
    for (devices, capacity, duration, depth) in [
        (2u8, 1u32, 2u64, 8usize),
        (3, 2, 3, 8),
        (3, 3, 2, 6),
        (4, 2, 4, 6),
    ] {
        total += common::exhaustive_lease_equivalence(devices, capacity, duration, depth);
    }
    assert!(total > 2_000, "enumeration too shallow: {total} transitions");
}

#[test]
fn randomized_equivalence_long_walks() {
    let mut total = 0;
    for seed in [11u64, 12, 13] {
        total += common::randomized_lease_equivalence(seed, 4_000, 2, 120);
        total += common::randomized_lease_equivalence(seed ^ 0xAA, 2_000, 3, 7);
    }
    assert_eq!(total, 18_000);
}

#[test]
fn pools_are_independent_across_accounts_and_contents() {
    // Saturate one (account, content) pool and confirm neighbours are
    // untouched; capacity is per pair, not global.
    let mut st = LeaseState::default();
    let scid_a = [1u8; 32];
    let scid_b = [2u8; 32];
    let dev = |n: u8| DeviceId([n; 32]);
    st.allocate("u1", scid_a, dev(1), 1, 60, 0, [1; 16]).unwrap();
    assert_eq!(
        st.allocate("u1", scid_a, dev(2), 1, 60, 0, [2; 16]),
        Err(LeaseError::Exhausted)
    );
    st.allocate("u1", scid_b, dev(2), 1, 60, 0, [3; 16]).unwrap();
    st.allocate("u2", scid_a, dev(2), 1, 60, 0, [4; 16]).unwrap();
    assert_eq!(st.held("u1", scid_a, 0), 1);
    assert_eq!(st.held("u1", scid_b, 0), 1);
    assert_eq!(st.held("u2", scid_a, 0), 1);
    // Expiry in one pool frees only that pool.
    assert_eq!(st.held("u1", scid_a, 60), 0);
    st.allocate("u1", scid_a, dev(3), 1, 60, 60, [5; 16]).unwrap();
}
